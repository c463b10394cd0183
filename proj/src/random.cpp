#include "linfa/random.hpp"

namespace linfa {

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t counter) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Matrix standard_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) out(r, c) = normal(rng);
  }
  return out;
}

Matrix draw_factor_model(const Restriction& model, Index n, Rng& rng, Matrix* factors) {
  Matrix z = standard_normal(n, model.loadings.cols(), rng);
  Matrix noise = standard_normal(n, model.loadings.rows(), rng);
  Matrix x = z * model.loadings.transpose() + noise * model.psi.cwiseSqrt().asDiagonal();
  if (factors != nullptr) *factors = std::move(z);
  return x;
}

}  // namespace linfa
