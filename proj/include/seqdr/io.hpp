#pragma once

// Record parsing and number formatting for streaming input and output.
//
// CSV rows are `x1..xd,a,y[,pi]`; JSON-lines rows are objects
// {"x":[...],"a":0|1,"y":...,"pi":optional}.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "seqdr/error.hpp"
#include "seqdr/observation.hpp"

namespace seqdr::io {

// Fixed-width-free numeric text with 9 significant digits.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

struct Schema {
  std::size_t d = 0;
};

// Accepts "d=K" or a bare "K".
inline Schema parse_schema(std::string_view text) {
  if (text.starts_with("d=")) text.remove_prefix(2);
  const std::string s(text);
  char* end = nullptr;
  errno = 0;
  const long long k = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno != 0 || k < 0) throw DomainError("schema: expected d=K with K >= 0");
  return Schema{static_cast<std::size_t>(k)};
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view field, std::size_t line, const char* what) {
  const std::string s(trim(field));
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw ParseError(line, std::string("malformed number for ") + what + ": '" + s + "'");
  if (!std::isfinite(v) || errno == ERANGE) throw ParseError(line, std::string("non-finite value for ") + what);
  return v;
}

inline int parse_treatment(double v, std::size_t line) {
  if (v == 0.0) return 0;
  if (v == 1.0) return 1;
  throw ParseError(line, "treatment must be 0 or 1");
}

inline void finish(Observation& z, std::size_t line) {
  try {
    z.validate();
  } catch (const DataError& e) {
    throw ParseError(line, e.what());
  }
}

}  // namespace detail

inline Observation parse_csv_row(std::string_view row, const Schema& schema, std::size_t line) {
  std::vector<std::string_view> fields;
  row = detail::trim(row);
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = row.find(',', start);
    fields.push_back(row.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  const std::size_t d = schema.d;
  if (fields.size() != d + 2 && fields.size() != d + 3)
    throw ParseError(line, "expected " + std::to_string(d + 2) + " or " + std::to_string(d + 3) + " fields, got " +
                               std::to_string(fields.size()));
  Observation z;
  z.x.reserve(d);
  for (std::size_t j = 0; j < d; ++j) z.x.push_back(detail::parse_double(fields[j], line, "covariate"));
  z.a = detail::parse_treatment(detail::parse_double(fields[d], line, "treatment"), line);
  z.y = detail::parse_double(fields[d + 1], line, "outcome");
  if (fields.size() == d + 3) z.known_pi = detail::parse_double(fields[d + 2], line, "propensity");
  detail::finish(z, line);
  return z;
}

// A schema dimension of 0 in JSON mode means "any"; otherwise x must have d entries.
inline Observation parse_json_row(std::string_view row, const Schema& schema, std::size_t line) {
  const nlohmann::json j = nlohmann::json::parse(row.begin(), row.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError(line, "malformed JSON object");
  auto number = [&](const nlohmann::json& v, const char* what) {
    if (!v.is_number()) throw ParseError(line, std::string("expected a number for ") + what);
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError(line, std::string("non-finite value for ") + what);
    return d;
  };
  Observation z;
  if (j.contains("x")) {
    const auto& xs = j.at("x");
    if (!xs.is_array()) throw ParseError(line, "x must be an array");
    for (const auto& v : xs) z.x.push_back(number(v, "covariate"));
  }
  if (schema.d != 0 && z.x.size() != schema.d)
    throw ParseError(line, "expected " + std::to_string(schema.d) + " covariates, got " + std::to_string(z.x.size()));
  if (!j.contains("a")) throw ParseError(line, "missing field a");
  if (!j.contains("y")) throw ParseError(line, "missing field y");
  z.a = detail::parse_treatment(number(j.at("a"), "treatment"), line);
  z.y = number(j.at("y"), "outcome");
  if (j.contains("pi") && !j.at("pi").is_null()) z.known_pi = number(j.at("pi"), "propensity");
  detail::finish(z, line);
  return z;
}

// Dispatches on the first non-blank character: '{' means JSON.
inline Observation parse_observation(std::string_view row, const Schema& schema, std::size_t line = 1) {
  const std::string_view t = detail::trim(row);
  if (!t.empty() && t.front() == '{') return parse_json_row(t, schema, line);
  return parse_csv_row(t, schema, line);
}

inline bool is_blank(std::string_view row) { return detail::trim(row).empty(); }

// Shortest round-trip text, so parse(serialize(z)) == z exactly.
inline std::string serialize_csv(const Observation& z) {
  auto exact = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::string out;
  for (double v : z.x) out += exact(v) + ",";
  out += std::to_string(z.a) + "," + exact(z.y);
  if (z.known_pi) out += "," + exact(*z.known_pi);
  return out;
}

inline std::string serialize_json(const Observation& z) {
  nlohmann::json j;
  j["x"] = z.x;
  j["a"] = z.a;
  j["y"] = z.y;
  if (z.known_pi) j["pi"] = *z.known_pi;
  return j.dump();
}

}  // namespace seqdr::io
