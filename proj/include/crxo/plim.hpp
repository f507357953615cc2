#pragma once

#include <cstdint>

#include "crxo/dgp.hpp"
#include "crxo/model_spec.hpp"

namespace crxo {

// Large-I limit of the treatment coefficient: solves E[G] theta = E[h] where
// the expectations run over cluster type, sizes and a fair sequence draw, with
// mean outcomes substituted for Y. Period weights use E[K_j]. Variance
// components are held at `vc` (the working structure need not be correct).
// draws == 0 enumerates the size distribution exactly; otherwise Monte Carlo.
double probability_limit(const ModelSpec& spec, const DgpSpec& dgp, const VarianceComponents& vc,
                         std::size_t draws = 0, std::uint64_t seed = 1);

}  // namespace crxo
