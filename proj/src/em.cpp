#include "linfa/em.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace linfa {

namespace {

// Position of every variable inside each dataset's column list, -1 if absent.
std::vector<std::vector<Index>> column_lookup(const ObservationPattern& pattern) {
  std::vector<std::vector<Index>> lookup(pattern.size(),
                                         std::vector<Index>(static_cast<std::size_t>(pattern.dim()), -1));
  for (std::size_t k = 0; k < pattern.size(); ++k) {
    const auto& s = pattern.subset(k);
    for (std::size_t c = 0; c < s.size(); ++c) {
      lookup[k][static_cast<std::size_t>(s[c])] = static_cast<Index>(c);
    }
  }
  return lookup;
}

std::string describe_block(std::size_t j, const IndexSet& block) {
  std::string text = "block " + std::to_string(j + 1) + " (variables " +
                     std::to_string(block.front() + 1);
  if (block.size() > 1) text += ".." + std::to_string(block.back() + 1);
  text += ", " + std::to_string(block.size()) + " total)";
  return text;
}

Index pooled_count(const DatasetCollection& data, const std::vector<std::size_t>& cover) {
  Index n = 0;
  for (std::size_t k : cover) n += data.samples(k);
  return n;
}

}  // namespace

void FitConfig::validate() const {
  if (q < 1) throw InputError("factor count q must be at least 1");
  if (max_iter < 1) throw InputError("max_iter must be at least 1");
  if (!(tol > 0.0)) throw InputError("tol must be positive");
  if (!(psi_floor > 0.0)) throw InputError("psi_floor must be positive");
}

Matrix simple_fill(const DatasetCollection& data) {
  const Index d = data.dim();
  Vector sums = Vector::Zero(d);
  std::vector<Index> counts(static_cast<std::size_t>(d), 0);
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& s = data.pattern().subset(k);
    const Vector col_sums = data.matrix(k).colwise().sum().transpose();
    for (std::size_t c = 0; c < s.size(); ++c) {
      sums(s[c]) += col_sums(static_cast<Index>(c));
      counts[static_cast<std::size_t>(s[c])] += data.samples(k);
    }
  }
  Vector means(d);
  for (Index i = 0; i < d; ++i) {
    if (counts[static_cast<std::size_t>(i)] == 0) {
      throw InputError("variable " + std::to_string(i + 1) + " has no observed samples");
    }
    means(i) = sums(i) / static_cast<double>(counts[static_cast<std::size_t>(i)]);
  }

  Matrix filled(data.total_samples(), d);
  Index row = 0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& s = data.pattern().subset(k);
    const Index n = data.samples(k);
    filled.middleRows(row, n).rowwise() = means.transpose();
    for (std::size_t c = 0; c < s.size(); ++c) {
      filled.middleRows(row, n).col(s[c]) = data.matrix(k).col(static_cast<Index>(c));
    }
    row += n;
  }
  return filled;
}

FactorParams start_values(const DatasetCollection& data, Index q) {
  const Index d = data.dim();
  if (q < 1) throw InputError("factor count q must be at least 1");
  if (q >= d) throw InputError("factor count q must be smaller than the variable count");
  const Index n = data.total_samples();
  if (n < 2) throw InputError("start values need at least two samples in total");

  const Matrix filled = simple_fill(data);
  // Mean-zero model: second moments about the origin.
  const Matrix cov = filled.transpose() * filled / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition of the filled covariance failed");

  // Eigen sorts ascending; take the top q from the end.
  Matrix loadings(d, q);
  for (Index c = 0; c < q; ++c) {
    const Index src = d - 1 - c;
    loadings.col(c) = eig.eigenvectors().col(src) * std::sqrt(std::max(eig.eigenvalues()(src), 0.0));
  }
  Vector psi = cov.diagonal();
  for (Index i = 0; i < d; ++i) {
    if (!(psi(i) > 0.0)) {
      throw InputError("variable " + std::to_string(i + 1) + " has zero variance after filling");
    }
  }
  return rotate_canonical(FactorParams(std::move(loadings), std::move(psi)));
}

EStepStats e_step(const FactorParams& params, const DatasetCollection& data) {
  if (data.dim() != params.dim()) throw InputError("parameter and data dimensions differ");
  const Index q = params.factors();
  const Matrix identity = Matrix::Identity(q, q);

  EStepStats stats;
  stats.datasets.reserve(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) {
    const Restriction block = restrict(params, data.pattern().subset(k));
    const Matrix& x = data.matrix(k);
    DatasetMoments m;
    m.scaled = block.psi.cwiseInverse().asDiagonal() * block.loadings;
    m.gram = m.scaled.transpose() * block.loadings;

    Eigen::LLT<Matrix> llt(identity + m.gram);
    if (llt.info() != Eigen::Success || llt.matrixLLT().diagonal().minCoeff() < kPivotFloor) {
      throw NumericError("I + B is singular for dataset " + std::to_string(k + 1));
    }
    m.regression = m.scaled * (identity - llt.solve(m.gram));
    m.means = x * m.regression;
    m.second = static_cast<double>(x.rows()) * (identity - m.regression.transpose() * block.loadings) +
               m.means.transpose() * m.means;
    m.second = 0.5 * (m.second + m.second.transpose()).eval();
    m.cross = x.transpose() * m.means;
    stats.datasets.push_back(std::move(m));
  }
  return stats;
}

std::vector<Vector> block_moments(const DatasetCollection& data, const VertexPartition& partition) {
  const auto lookup = column_lookup(data.pattern());
  std::vector<Vector> out;
  out.reserve(partition.size());
  for (std::size_t j = 0; j < partition.size(); ++j) {
    const auto& block = partition.blocks[j];
    Vector dw = Vector::Zero(static_cast<Index>(block.size()));
    for (std::size_t k : partition.covers[j]) {
      const Matrix& x = data.matrix(k);
      for (std::size_t r = 0; r < block.size(); ++r) {
        dw(static_cast<Index>(r)) += x.col(lookup[k][static_cast<std::size_t>(block[r])]).squaredNorm();
      }
    }
    out.push_back(dw / static_cast<double>(pooled_count(data, partition.covers[j])));
  }
  return out;
}

FactorParams m_step(const EStepStats& stats, const DatasetCollection& data,
                    const VertexPartition& partition, const std::vector<Vector>& block_dw,
                    double psi_floor) {
  if (stats.datasets.size() != data.size()) throw InputError("statistics do not match the datasets");
  if (block_dw.size() != partition.size()) throw InputError("block moments do not match the partition");
  const Index d = data.dim();
  const Index q = stats.datasets.front().second.rows();
  const auto lookup = column_lookup(data.pattern());

  Matrix loadings(d, q);
  Vector psi(d);
  for (std::size_t j = 0; j < partition.size(); ++j) {
    const auto& block = partition.blocks[j];
    const auto& cover = partition.covers[j];
    const Index width = static_cast<Index>(block.size());

    Matrix s_w = Matrix::Zero(q, q);
    Matrix c_w = Matrix::Zero(width, q);
    for (std::size_t k : cover) {
      const auto& m = stats.datasets[k];
      s_w += m.second;
      for (Index r = 0; r < width; ++r) {
        c_w.row(r) += m.cross.row(lookup[k][static_cast<std::size_t>(block[static_cast<std::size_t>(r)])]);
      }
    }
    const Index n_w = pooled_count(data, cover);
    if (n_w <= q) {
      throw NumericError(describe_block(j, block) + ": pooled sample count " + std::to_string(n_w) +
                         " does not exceed q = " + std::to_string(q));
    }
    Eigen::LLT<Matrix> llt(s_w);
    if (llt.info() != Eigen::Success || llt.matrixLLT().diagonal().minCoeff() < kPivotFloor) {
      throw NumericError(describe_block(j, block) + ": pooled factor moment S_W is singular");
    }
    const Matrix lam_w = llt.solve(c_w.transpose()).transpose();
    const Vector shrink = (lam_w * s_w).cwiseProduct(lam_w).rowwise().sum() / static_cast<double>(n_w);
    const Vector psi_w = (block_dw[j] - shrink).cwiseMax(psi_floor);
    for (Index r = 0; r < width; ++r) {
      const Index i = block[static_cast<std::size_t>(r)];
      loadings.row(i) = lam_w.row(r);
      psi(i) = psi_w(r);
    }
  }
  return FactorParams(std::move(loadings), std::move(psi));
}

double q_function(const FactorParams& params, const EStepStats& stats, const DatasetCollection& data) {
  if (stats.datasets.size() != data.size()) throw InputError("statistics do not match the datasets");
  double total = 0.0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const Restriction block = restrict(params, data.pattern().subset(k));
    const Matrix& x = data.matrix(k);
    const auto& m = stats.datasets[k];
    const Vector inv_psi = block.psi.cwiseInverse();
    const Matrix scaled = inv_psi.asDiagonal() * block.loadings;

    const double logdet = block.psi.array().log().sum();
    const double data_term = x.colwise().squaredNorm().dot(inv_psi);
    const double second_term = (m.second * (block.loadings.transpose() * scaled)).trace();
    // tr(M Lambda^T Psi^{-1} X^T) = sum_ij (X^T M)_ij (Psi^{-1} Lambda)_ij
    const double cross_term = (x.transpose() * m.means).cwiseProduct(scaled).sum();
    total += static_cast<double>(x.rows()) * logdet + data_term + second_term - 2.0 * cross_term;
  }
  return -0.5 * total;
}

FactorParams rotate_canonical(const FactorParams& params) {
  const Matrix& l = params.loadings();
  const Index d = params.dim();
  const Index q = params.factors();
  const Matrix metric = l.transpose() * params.psi().cwiseInverse().asDiagonal() * l / static_cast<double>(d);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(metric);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition for rotation failed");

  const Matrix rotated = l * eig.eigenvectors();
  const Vector& values = eig.eigenvalues();
  const double scale = std::max(values.cwiseAbs().maxCoeff(), 1.0);

  std::vector<Index> order(static_cast<std::size_t>(q));
  std::iota(order.begin(), order.end(), Index{0});
  // Descending eigenvalue; exact ties resolved by the first differing
  // loading magnitude so the ordering is reproducible.
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (std::abs(values(a) - values(b)) > 1e-14 * scale) return values(a) > values(b);
    for (Index i = 0; i < d; ++i) {
      const double ma = std::abs(rotated(i, a));
      const double mb = std::abs(rotated(i, b));
      if (ma != mb) return ma > mb;
    }
    return false;
  });

  Matrix out(d, q);
  for (Index c = 0; c < q; ++c) {
    Vector column = rotated.col(order[static_cast<std::size_t>(c)]);
    Index peak = 0;
    column.cwiseAbs().maxCoeff(&peak);
    if (column(peak) < 0.0) column = -column;
    out.col(c) = column;
  }
  return FactorParams(std::move(out), params.psi());
}

FitResult fit(const DatasetCollection& data, const FitConfig& config) {
  config.validate();
  const Index d = data.dim();
  if (config.q >= d) throw InputError("factor count q must be smaller than the variable count");

  VertexPartition partition = tessellate(data.pattern());
  assign_pooled_counts(partition, data);
  for (std::size_t j = 0; j < partition.size(); ++j) {
    if (partition.pooled_n[j] <= config.q) {
      throw NumericError(describe_block(j, partition.blocks[j]) + ": pooled sample count " +
                         std::to_string(partition.pooled_n[j]) + " does not exceed q = " +
                         std::to_string(config.q));
    }
  }
  const auto dw = block_moments(data, partition);

  FactorParams params = config.start ? *config.start : start_values(data, config.q);
  if (params.dim() != d || params.factors() != config.q) {
    throw InputError("start values do not match the data dimension and q");
  }

  std::vector<Matrix> grams;
  grams.reserve(data.size());
  for (const auto& x : data.matrices()) grams.push_back(x.transpose() * x);
  auto loglik = [&](const FactorParams& p) {
    double total = 0.0;
    for (std::size_t k = 0; k < data.size(); ++k) {
      total += restricted_log_likelihood_gram(restrict(p, data.pattern().subset(k)), grams[k],
                                              data.samples(k));
    }
    return total;
  };

  FitResult result{params, {}, false, 0, partition};
  double previous = loglik(params);
  result.loglik_trace.push_back(previous);
  for (int it = 1; it <= config.max_iter; ++it) {
    const EStepStats stats = e_step(params, data);
    params = m_step(stats, data, partition, dw, config.psi_floor);
    const double current = loglik(params);
    result.loglik_trace.push_back(current);
    result.iterations = it;
    const double change = std::abs(current - previous) / (std::abs(previous) + 1.0);
    previous = current;
    if (change < config.tol) {
      result.converged = true;
      break;
    }
  }
  result.params = rotate_canonical(params);
  return result;
}

}  // namespace linfa
