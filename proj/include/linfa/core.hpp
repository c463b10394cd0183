#ifndef LINFA_CORE_HPP
#define LINFA_CORE_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace linfa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Sorted, duplicate-free list of 0-based variable indices.
using IndexSet = std::vector<Index>;

/// Raised when a computation meets a numerically degenerate matrix
/// (non-PD covariance, singular factor moment, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on malformed or inconsistent inputs.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Smallest Cholesky pivot accepted before a matrix is declared non-PD.
inline constexpr double kPivotFloor = 1e-12;

/// Loading matrix and diagonal noise variances of the model
/// Sigma = Lambda * Lambda^T + Diag(psi).
class FactorParams {
 public:
  FactorParams(Matrix loadings, Vector psi);

  const Matrix& loadings() const { return loadings_; }
  const Vector& psi() const { return psi_; }
  Index dim() const { return loadings_.rows(); }
  Index factors() const { return loadings_.cols(); }

 private:
  Matrix loadings_;
  Vector psi_;
};

/// The variable subsets V_1..V_K recorded by each dataset.
class ObservationPattern {
 public:
  ObservationPattern(Index dim, std::vector<IndexSet> subsets);

  Index dim() const { return dim_; }
  std::size_t size() const { return subsets_.size(); }
  const std::vector<IndexSet>& subsets() const { return subsets_; }
  const IndexSet& subset(std::size_t k) const { return subsets_[k]; }

 private:
  Index dim_;
  std::vector<IndexSet> subsets_;
};

/// K data matrices; column j of matrix k holds variable pattern.subset(k)[j].
class DatasetCollection {
 public:
  DatasetCollection(ObservationPattern pattern, std::vector<Matrix> matrices);

  const ObservationPattern& pattern() const { return pattern_; }
  const std::vector<Matrix>& matrices() const { return matrices_; }
  const Matrix& matrix(std::size_t k) const { return matrices_[k]; }
  std::size_t size() const { return matrices_.size(); }
  Index dim() const { return pattern_.dim(); }
  Index samples(std::size_t k) const { return matrices_[k].rows(); }
  Index total_samples() const;

 private:
  ObservationPattern pattern_;
  std::vector<Matrix> matrices_;
};

/// Symmetric membership of jointly observed variable pairs,
/// O = union_k (V_k x V_k).
class PairSet {
 public:
  explicit PairSet(const ObservationPattern& pattern);

  Index dim() const { return dim_; }
  bool contains(Index i, Index j) const { return mask_[i * dim_ + j] != 0; }
  /// Number of ordered pairs (i, j) outside O.
  Index unobserved_count() const;
  /// |O^c| / d^2.
  double eta() const;

 private:
  Index dim_;
  std::vector<char> mask_;
};

/// Rows of Lambda and entries of psi selected by a variable subset.
struct Restriction {
  Matrix loadings;
  Vector psi;
};

Matrix assemble_covariance(const FactorParams& params);

/// Sigma^{-1} by the Woodbury identity; only a q x q system is factored.
Matrix precision_woodbury(const FactorParams& params);

Matrix partial_correlations(const Matrix& theta);

/// gamma_ij = Lambda_ij / sqrt(Lambda_ij^2 + psi_i).
Matrix factor_variable_correlations(const FactorParams& params);

/// C = diag(S)^{-1/2} S diag(S)^{-1/2}.
Matrix correlation_from_covariance(const Matrix& sigma);

Restriction restrict(const FactorParams& params, const IndexSet& subset);

/// Sum over rows of X of log N(x; 0, L L^T + Diag(psi)) using the
/// Woodbury / determinant-lemma forms.
double restricted_log_likelihood(const Restriction& block, const Matrix& x);

/// Same quantity from the Gram matrix X^T X of n mean-zero samples.
double restricted_log_likelihood_gram(const Restriction& block,
                                      const Matrix& gram, Index n);

/// Observed-data log-likelihood summed over all datasets.
double log_likelihood(const FactorParams& params,
                      const DatasetCollection& data);

}  // namespace linfa

#endif  // LINFA_CORE_HPP
