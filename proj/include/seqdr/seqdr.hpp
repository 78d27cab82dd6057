#pragma once

#include "seqdr/ate.hpp"
#include "seqdr/boundaries.hpp"
#include "seqdr/error.hpp"
#include "seqdr/io.hpp"
#include "seqdr/nuisance.hpp"
#include "seqdr/numerics.hpp"
#include "seqdr/observation.hpp"
#include "seqdr/simlab.hpp"
#include "seqdr/splitting.hpp"
