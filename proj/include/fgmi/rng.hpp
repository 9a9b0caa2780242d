#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fgmi {

using Rng = std::mt19937_64;

/// Independent generator keyed by a master seed and a path of stream indices,
/// e.g. (seed, replication, method, imputation). The derived state depends only
/// on the keys, so work can be scheduled in any order.
Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {});

/// Uniform draw on the open interval (0, 1).
double uniform_open(Rng& rng);

}  // namespace fgmi
