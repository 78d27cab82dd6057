#pragma once

// Sequential sample splitting: each arriving record is routed to the
// training or the evaluation stream before any of its fields are read.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seqdr/error.hpp"
#include "seqdr/numerics/rng.hpp"

namespace seqdr::splitting {

enum class Split : std::uint8_t { train = 0, eval = 1 };

enum class SplitMode {
  bernoulli_half,  // fair coin from the ledger's seeded stream
  alternating,     // 0-based even arrivals train, odd arrivals evaluate
};

inline SplitMode parse_split_mode(std::string_view name) {
  if (name == "bernoulli" || name == "bernoulli_half") return SplitMode::bernoulli_half;
  if (name == "alternating") return SplitMode::alternating;
  throw DomainError("unknown split mode: " + std::string(name));
}

// Stream id reserved for split coins so they never share draws with data noise.
inline constexpr std::uint64_t kSplitStreamId = 0x5EED5917ULL;

class SplitLedger {
 public:
  explicit SplitLedger(SplitMode mode = SplitMode::bernoulli_half, std::uint64_t master_seed = 0)
      : mode_(mode), seed_{master_seed, kSplitStreamId}, rng_(seed_) {}

  Split assign() {
    Split s;
    if (mode_ == SplitMode::alternating) {
      s = (log_.size() % 2 == 0) ? Split::train : Split::eval;
    } else {
      s = (rng_() >> 63) ? Split::eval : Split::train;
    }
    log_.push_back(s);
    if (s == Split::eval) {
      eval_.push_back(log_.size() - 1);
    } else {
      train_.push_back(log_.size() - 1);
    }
    return s;
  }

  std::uint64_t t() const { return log_.size(); }
  // T: evaluation count.
  std::uint64_t t_eval() const { return eval_.size(); }
  // T': training count, t - T.
  std::uint64_t t_train() const { return train_.size(); }

  SplitMode mode() const { return mode_; }
  const numerics::SeedSpec& seed() const { return seed_; }
  const std::vector<Split>& assignment_log() const { return log_; }

  // 0-based arrival indices in each split, in arrival order.
  const std::vector<std::uint64_t>& train_indices() const { return train_; }
  const std::vector<std::uint64_t>& eval_indices() const { return eval_; }

 private:
  SplitMode mode_;
  numerics::SeedSpec seed_;
  numerics::Rng rng_;
  std::vector<Split> log_;
  std::vector<std::uint64_t> train_;
  std::vector<std::uint64_t> eval_;
};

// One direction of cross-fitting: fit on `fit`, score `score`.
struct SplitView {
  std::vector<std::uint64_t> fit;
  std::vector<std::uint64_t> score;
};

struct CrossfitViews {
  SplitView primary;  // train -> fit, eval -> score
  SplitView swapped;  // eval -> fit, train -> score
};

// Both directions; nullopt while either split is still empty.
inline std::optional<CrossfitViews> crossfit_views(const SplitLedger& ledger) {
  if (ledger.t_train() == 0 || ledger.t_eval() == 0) return std::nullopt;
  return CrossfitViews{{ledger.train_indices(), ledger.eval_indices()},
                       {ledger.eval_indices(), ledger.train_indices()}};
}

}  // namespace seqdr::splitting
