#include "linfa/core.hpp"

#include <cmath>
#include <algorithm>

namespace linfa {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Cholesky of I + A^T L, with A = Psi^{-1} L. Throws when a pivot
// falls below kPivotFloor.
Eigen::LLT<Matrix> capacitance(const Matrix& scaled, const Matrix& loadings) {
  const Index q = loadings.cols();
  Matrix cap = Matrix::Identity(q, q) + scaled.transpose() * loadings;
  Eigen::LLT<Matrix> llt(cap);
  if (llt.info() != Eigen::Success) {
    throw NumericError("capacitance matrix I + L^T Psi^{-1} L is not positive definite");
  }
  const Matrix& factor = llt.matrixLLT();
  for (Index i = 0; i < q; ++i) {
    if (!(factor(i, i) >= kPivotFloor)) {
      throw NumericError("capacitance matrix I + L^T Psi^{-1} L is numerically singular");
    }
  }
  return llt;
}

void check_psi(const Vector& psi) {
  for (Index i = 0; i < psi.size(); ++i) {
    if (!(psi(i) > 0.0) || !std::isfinite(psi(i))) {
      throw NumericError("noise variance " + std::to_string(i + 1) +
                         " is not strictly positive");
    }
  }
}

}  // namespace

FactorParams::FactorParams(Matrix loadings, Vector psi)
    : loadings_(std::move(loadings)), psi_(std::move(psi)) {
  if (loadings_.rows() < 1 || loadings_.cols() < 1) {
    throw InputError("loading matrix must have at least one row and one column");
  }
  if (psi_.size() != loadings_.rows()) {
    throw InputError("psi length " + std::to_string(psi_.size()) +
                     " does not match loading rows " + std::to_string(loadings_.rows()));
  }
  if (!loadings_.allFinite()) {
    throw InputError("loading matrix has non-finite entries");
  }
  for (Index i = 0; i < psi_.size(); ++i) {
    if (!(psi_(i) > 0.0) || !std::isfinite(psi_(i))) {
      throw InputError("psi entry " + std::to_string(i + 1) + " must be finite and positive");
    }
  }
}

ObservationPattern::ObservationPattern(Index dim, std::vector<IndexSet> subsets)
    : dim_(dim), subsets_(std::move(subsets)) {
  if (dim_ < 1) throw InputError("pattern dimension must be positive");
  if (subsets_.empty()) throw InputError("pattern needs at least one subset");
  std::vector<char> seen(static_cast<std::size_t>(dim_), 0);
  for (std::size_t k = 0; k < subsets_.size(); ++k) {
    const auto& s = subsets_[k];
    if (s.size() < 2) {
      throw InputError("subset " + std::to_string(k + 1) + " must hold more than one variable");
    }
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s[j] < 0 || s[j] >= dim_) {
        throw InputError("subset " + std::to_string(k + 1) + " has out-of-range index");
      }
      if (j > 0 && s[j] <= s[j - 1]) {
        throw InputError("subset " + std::to_string(k + 1) + " must be sorted and unique");
      }
      seen[static_cast<std::size_t>(s[j])] = 1;
    }
  }
  for (Index i = 0; i < dim_; ++i) {
    if (!seen[static_cast<std::size_t>(i)]) {
      throw InputError("variable " + std::to_string(i + 1) + " is not covered by any subset");
    }
  }
}

DatasetCollection::DatasetCollection(ObservationPattern pattern, std::vector<Matrix> matrices)
    : pattern_(std::move(pattern)), matrices_(std::move(matrices)) {
  if (matrices_.size() != pattern_.size()) {
    throw InputError("dataset count does not match pattern subset count");
  }
  for (std::size_t k = 0; k < matrices_.size(); ++k) {
    const auto& m = matrices_[k];
    if (m.rows() < 1) throw InputError("dataset " + std::to_string(k + 1) + " has no samples");
    if (m.cols() != static_cast<Index>(pattern_.subset(k).size())) {
      throw InputError("dataset " + std::to_string(k + 1) + " column count does not match its subset");
    }
    if (!m.allFinite()) {
      throw InputError("dataset " + std::to_string(k + 1) + " has non-finite values");
    }
  }
}

Index DatasetCollection::total_samples() const {
  Index n = 0;
  for (const auto& m : matrices_) n += m.rows();
  return n;
}

PairSet::PairSet(const ObservationPattern& pattern)
    : dim_(pattern.dim()), mask_(static_cast<std::size_t>(dim_ * dim_), 0) {
  for (const auto& s : pattern.subsets()) {
    for (Index a : s) {
      for (Index b : s) mask_[static_cast<std::size_t>(a * dim_ + b)] = 1;
    }
  }
}

Index PairSet::unobserved_count() const {
  Index count = 0;
  for (char c : mask_) count += c ? 0 : 1;
  return count;
}

double PairSet::eta() const {
  return static_cast<double>(unobserved_count()) / static_cast<double>(dim_ * dim_);
}

Matrix assemble_covariance(const FactorParams& params) {
  Matrix sigma = params.loadings() * params.loadings().transpose();
  sigma.diagonal() += params.psi();
  return sigma;
}

Matrix precision_woodbury(const FactorParams& params) {
  const Vector inv_psi = params.psi().cwiseInverse();
  const Matrix scaled = inv_psi.asDiagonal() * params.loadings();
  const auto llt = capacitance(scaled, params.loadings());
  Matrix theta = -scaled * llt.solve(scaled.transpose());
  theta.diagonal() += inv_psi;
  return 0.5 * (theta + theta.transpose());
}

Matrix partial_correlations(const Matrix& theta) {
  const Index d = theta.rows();
  if (theta.cols() != d) throw InputError("precision matrix must be square");
  Vector scale(d);
  for (Index i = 0; i < d; ++i) {
    if (!(theta(i, i) > 0.0)) {
      throw NumericError("precision diagonal entry " + std::to_string(i + 1) + " is not positive");
    }
    scale(i) = 1.0 / std::sqrt(theta(i, i));
  }
  Matrix rho = Matrix::Identity(d, d);
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i < j; ++i) {
      rho(i, j) = std::clamp(-theta(i, j) * (scale(i) * scale(j)), -1.0, 1.0);
      rho(j, i) = rho(i, j);
    }
  }
  return rho;
}

Matrix factor_variable_correlations(const FactorParams& params) {
  const Matrix& l = params.loadings();
  Matrix gamma(l.rows(), l.cols());
  for (Index j = 0; j < l.cols(); ++j) {
    for (Index i = 0; i < l.rows(); ++i) {
      gamma(i, j) = l(i, j) / std::sqrt(l(i, j) * l(i, j) + params.psi()(i));
    }
  }
  return gamma;
}

Matrix correlation_from_covariance(const Matrix& sigma) {
  const Vector scale = sigma.diagonal().cwiseSqrt().cwiseInverse();
  return scale.asDiagonal() * sigma * scale.asDiagonal();
}

Restriction restrict(const FactorParams& params, const IndexSet& subset) {
  const Index q = params.factors();
  Restriction out{Matrix(static_cast<Index>(subset.size()), q),
                  Vector(static_cast<Index>(subset.size()))};
  for (std::size_t r = 0; r < subset.size(); ++r) {
    const Index i = subset[r];
    if (i < 0 || i >= params.dim()) throw InputError("restriction index out of range");
    out.loadings.row(static_cast<Index>(r)) = params.loadings().row(i);
    out.psi(static_cast<Index>(r)) = params.psi()(i);
  }
  return out;
}

double restricted_log_likelihood(const Restriction& block, const Matrix& x) {
  check_psi(block.psi);
  const Vector inv_psi = block.psi.cwiseInverse();
  const Matrix scaled = inv_psi.asDiagonal() * block.loadings;
  const auto llt = capacitance(scaled, block.loadings);
  const Matrix& factor = llt.matrixLLT();

  const double p = static_cast<double>(x.cols());
  double logdet = block.psi.array().log().sum();
  for (Index i = 0; i < factor.rows(); ++i) logdet += 2.0 * std::log(factor(i, i));

  // x^T Sigma^{-1} x = x^T Psi^{-1} x - u^T (I + B)^{-1} u with u = A^T x.
  const Matrix u = x * scaled;
  const Matrix w = llt.matrixL().solve(u.transpose());
  double quad = (x.array().square().rowwise() * inv_psi.transpose().array()).sum();
  quad -= w.squaredNorm();

  const double n = static_cast<double>(x.rows());
  return -0.5 * (n * (p * kLog2Pi + logdet) + quad);
}

double restricted_log_likelihood_gram(const Restriction& block, const Matrix& gram, Index n) {
  check_psi(block.psi);
  const Vector inv_psi = block.psi.cwiseInverse();
  const Matrix scaled = inv_psi.asDiagonal() * block.loadings;
  const auto llt = capacitance(scaled, block.loadings);
  const Matrix& factor = llt.matrixLLT();

  const double p = static_cast<double>(gram.rows());
  double logdet = block.psi.array().log().sum();
  for (Index i = 0; i < factor.rows(); ++i) logdet += 2.0 * std::log(factor(i, i));

  const Matrix projected = scaled.transpose() * gram * scaled;
  double trace = gram.diagonal().dot(inv_psi);
  trace -= llt.solve(projected).trace();

  return -0.5 * (static_cast<double>(n) * (p * kLog2Pi + logdet) + trace);
}

double log_likelihood(const FactorParams& params, const DatasetCollection& data) {
  if (data.dim() != params.dim()) throw InputError("parameter and data dimensions differ");
  double total = 0.0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    total += restricted_log_likelihood(restrict(params, data.pattern().subset(k)), data.matrix(k));
  }
  return total;
}

}  // namespace linfa
