#pragma once

#include "seqdr/numerics/lambert_w.hpp"
#include "seqdr/numerics/linalg.hpp"
#include "seqdr/numerics/moments.hpp"
#include "seqdr/numerics/rng.hpp"
#include "seqdr/numerics/special.hpp"
