#ifndef LINFA_EM_HPP
#define LINFA_EM_HPP

#include "linfa/core.hpp"
#include "linfa/gvt.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace linfa {

/// Posterior moments of the latent factors for one dataset.
struct DatasetMoments {
  Matrix scaled;      ///< A = Psi_k^{-1} Lambda_k          (|V_k| x q)
  Matrix gram;        ///< B = A^T Lambda_k                 (q x q)
  Matrix regression;  ///< Gamma = Sigma_k^{-1} Lambda_k    (|V_k| x q)
  Matrix means;       ///< M = X_k Gamma                    (n_k x q)
  Matrix second;      ///< S = n_k (I - Gamma^T Lambda_k) + M^T M
  Matrix cross;       ///< X_k^T M                          (|V_k| x q)
};

struct EStepStats {
  std::vector<DatasetMoments> datasets;
};

struct FitConfig {
  Index q = 1;
  int max_iter = 1000;
  double tol = 1e-8;
  double psi_floor = 1e-6;
  std::uint64_t seed = 0;
  /// Start values; the simple-fill spectral start is used when empty.
  std::optional<FactorParams> start;

  void validate() const;
};

struct FitResult {
  FactorParams params;
  std::vector<double> loglik_trace;  ///< entry 0 is the start value
  bool converged = false;
  int iterations = 0;
  VertexPartition partition;
};

/// Stacks all datasets into an n x d matrix, filling unobserved entries with
/// the pooled mean of the observed values of that variable.
Matrix simple_fill(const DatasetCollection& data);

FactorParams start_values(const DatasetCollection& data, Index q);

EStepStats e_step(const FactorParams& params, const DatasetCollection& data);

/// D_W for each block: per-variable mean square over the covering datasets.
std::vector<Vector> block_moments(const DatasetCollection& data, const VertexPartition& partition);

FactorParams m_step(const EStepStats& stats, const DatasetCollection& data,
                    const VertexPartition& partition, const std::vector<Vector>& block_dw,
                    double psi_floor);

/// Expected complete-data log-likelihood, additive constant dropped.
double q_function(const FactorParams& params, const EStepStats& stats,
                  const DatasetCollection& data);

/// Rotates Lambda so that Lambda^T Psi^{-1} Lambda is diagonal with
/// non-increasing entries; each column's largest-magnitude entry is made
/// positive.
FactorParams rotate_canonical(const FactorParams& params);

FitResult fit(const DatasetCollection& data, const FitConfig& config);

}  // namespace linfa

#endif  // LINFA_EM_HPP
