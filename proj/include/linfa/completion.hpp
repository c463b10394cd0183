#ifndef LINFA_COMPLETION_HPP
#define LINFA_COMPLETION_HPP

#include "linfa/core.hpp"

#include <vector>

namespace linfa {

/// Latent factor prediction Lambda_k^T Sigma_k^{-1} x for a sample observed
/// on `subset`.
Vector predict_factors(const FactorParams& params, const IndexSet& subset, const Vector& x);

struct CompletedSample {
  Vector values;                ///< length d
  std::vector<bool> predicted;  ///< true where the entry was filled in
};

/// Keeps the observed entries and fills the rest from Lambda * z_hat.
CompletedSample complete_sample(const FactorParams& params, const IndexSet& subset, const Vector& x);

enum class GraphKind { partial_correlation, factor_graph };

struct Edge {
  Index a = 0;  ///< variable
  Index b = 0;  ///< variable (partial correlation) or factor (factor graph)
  double weight = 0.0;
};

struct GraphEdges {
  GraphKind kind = GraphKind::partial_correlation;
  Index variables = 0;
  Index factors = 0;  ///< 0 for partial-correlation graphs
  std::vector<Edge> edges;
  /// Every candidate weight is zero.
  bool empty_graph = false;
};

/// Top `top_m` variable pairs by |rho_ij|; ties by (i, j).
GraphEdges partial_correlation_graph(const FactorParams& params, std::size_t top_m);

/// Top `top_m` variable-factor pairs by |gamma_ij|; ties by (i, j).
GraphEdges factor_graph(const FactorParams& params, std::size_t top_m);

/// Row j is the |gamma_.j|-weighted mean of the coordinate rows.
Matrix factor_positions(const Matrix& gamma, const Matrix& coords);

}  // namespace linfa

#endif  // LINFA_COMPLETION_HPP
