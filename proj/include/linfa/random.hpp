#ifndef LINFA_RANDOM_HPP
#define LINFA_RANDOM_HPP

#include "linfa/core.hpp"

#include <cstdint>
#include <random>

namespace linfa {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a master seed and a counter
/// (SplitMix64 finalizer), so replicate k always sees the same stream
/// regardless of scheduling.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t counter);

Matrix standard_normal(Index rows, Index cols, Rng& rng);

/// n draws x = L z + e with z ~ N(0, I_q), e ~ N(0, Diag(psi)).
/// Returns the factors in `factors` when non-null.
Matrix draw_factor_model(const Restriction& model, Index n, Rng& rng, Matrix* factors = nullptr);

}  // namespace linfa

#endif  // LINFA_RANDOM_HPP
