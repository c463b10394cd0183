#ifndef LINFA_TESTS_SUPPORT_HPP
#define LINFA_TESTS_SUPPORT_HPP

#include "linfa/core.hpp"
#include "linfa/em.hpp"
#include "linfa/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

namespace linfa::testing {

constexpr double kLog2Pi = 1.8378770664093454836;

inline Index uniform_index(Rng& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline FactorParams random_params(Rng& rng, Index d, Index q, double psi_lo = 0.2, double psi_hi = 2.0) {
  Matrix l = standard_normal(d, q, rng);
  Vector psi(d);
  for (Index i = 0; i < d; ++i) psi(i) = uniform_real(rng, psi_lo, psi_hi);
  return FactorParams(std::move(l), std::move(psi));
}

/// K random subsets of size >= 2 whose union is {0..d-1}.
inline ObservationPattern random_pattern(Rng& rng, Index d, Index K) {
  std::vector<std::set<Index>> sets(static_cast<std::size_t>(K));
  for (auto& s : sets) {
    const Index size = uniform_index(rng, 2, d);
    std::vector<Index> all(static_cast<std::size_t>(d));
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    s.insert(all.begin(), all.begin() + size);
  }
  for (Index i = 0; i < d; ++i) {
    bool covered = false;
    for (const auto& s : sets) covered = covered || s.count(i) > 0;
    if (!covered) sets[static_cast<std::size_t>(uniform_index(rng, 0, K - 1))].insert(i);
  }
  std::vector<IndexSet> subsets;
  for (const auto& s : sets) subsets.emplace_back(s.begin(), s.end());
  return ObservationPattern(d, std::move(subsets));
}

inline DatasetCollection draw_data(const FactorParams& params, const ObservationPattern& pattern,
                                   const std::vector<Index>& sizes, Rng& rng) {
  std::vector<Matrix> mats;
  for (std::size_t k = 0; k < pattern.size(); ++k) {
    mats.push_back(draw_factor_model(restrict(params, pattern.subset(k)), sizes[k], rng));
  }
  return DatasetCollection(pattern, std::move(mats));
}

inline DatasetCollection random_instance(Rng& rng, Index d, Index q, Index K, Index n_each,
                                         FactorParams* truth = nullptr) {
  const FactorParams p = random_params(rng, d, q);
  const ObservationPattern pattern = random_pattern(rng, d, K);
  if (truth) *truth = p;
  return draw_data(p, pattern, std::vector<Index>(static_cast<std::size_t>(K), n_each), rng);
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

inline Matrix dense_covariance(const FactorParams& p) {
  Matrix s = Matrix::Zero(p.dim(), p.dim());
  for (Index i = 0; i < p.dim(); ++i) {
    for (Index j = 0; j < p.dim(); ++j) {
      double v = 0.0;
      for (Index c = 0; c < p.factors(); ++c) v += p.loadings()(i, c) * p.loadings()(j, c);
      s(i, j) = v + (i == j ? p.psi()(i) : 0.0);
    }
  }
  return s;
}

inline double dense_gaussian_loglik(const Matrix& sigma, const Matrix& x) {
  const Matrix inv = sigma.inverse();
  const double logdet = std::log(sigma.determinant());
  double total = 0.0;
  for (Index r = 0; r < x.rows(); ++r) {
    const Vector v = x.row(r).transpose();
    total += -0.5 * (static_cast<double>(x.cols()) * kLog2Pi + logdet + v.dot(inv * v));
  }
  return total;
}

inline double dense_log_likelihood(const FactorParams& p, const DatasetCollection& data) {
  const Matrix sigma = dense_covariance(p);
  double total = 0.0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& s = data.pattern().subset(k);
    total += dense_gaussian_loglik(sigma(s, s), data.matrix(k));
  }
  return total;
}

/// Literal group-vertex tessellation: incidence matrix, pairwise l1
/// distances, blocks of zero-distance vertices.
inline std::vector<IndexSet> delta_tessellation(const ObservationPattern& pattern) {
  const Index d = pattern.dim();
  const Index K = static_cast<Index>(pattern.size());
  Eigen::MatrixXi inc = Eigen::MatrixXi::Zero(d, K);
  for (Index k = 0; k < K; ++k) {
    for (Index i : pattern.subset(static_cast<std::size_t>(k))) inc(i, k) = 1;
  }
  Eigen::MatrixXi delta(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) delta(i, j) = (inc.row(i) - inc.row(j)).cwiseAbs().sum();
  }
  std::vector<IndexSet> blocks;
  std::vector<bool> used(static_cast<std::size_t>(d), false);
  for (Index i = 0; i < d; ++i) {
    if (used[static_cast<std::size_t>(i)] || inc.row(i).sum() == 0) continue;
    IndexSet block;
    for (Index j = i; j < d; ++j) {
      if (delta(i, j) == 0) {
        block.push_back(j);
        used[static_cast<std::size_t>(j)] = true;
      }
    }
    blocks.push_back(block);
  }
  return blocks;
}

/// M-step that updates every variable on its own from all datasets that
/// contain it.
inline FactorParams per_vertex_m_step(const EStepStats& stats, const DatasetCollection& data,
                                      double psi_floor) {
  const Index d = data.dim();
  const Index q = stats.datasets.front().second.rows();
  Matrix l(d, q);
  Vector psi(d);
  for (Index i = 0; i < d; ++i) {
    Matrix s = Matrix::Zero(q, q);
    Vector cross = Vector::Zero(q);
    double sq = 0.0;
    double n = 0.0;
    for (std::size_t k = 0; k < data.size(); ++k) {
      const auto& sub = data.pattern().subset(k);
      const auto it = std::find(sub.begin(), sub.end(), i);
      if (it == sub.end()) continue;
      const Index c = it - sub.begin();
      const Vector xi = data.matrix(k).col(c);
      s += stats.datasets[k].second;
      cross += stats.datasets[k].means.transpose() * xi;
      sq += xi.squaredNorm();
      n += static_cast<double>(xi.size());
    }
    const Vector li = s.inverse() * cross;
    l.row(i) = li.transpose();
    psi(i) = std::max(psi_floor, (sq - li.dot(s * li)) / n);
  }
  return FactorParams(l, psi);
}

/// Expected complete-data log-likelihood by explicit summation.
inline double naive_q(const FactorParams& p, const EStepStats& stats, const DatasetCollection& data) {
  double total = 0.0;
  const Index q = p.factors();
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& sub = data.pattern().subset(k);
    const Matrix& x = data.matrix(k);
    const auto& st = stats.datasets[k];
    for (std::size_t c = 0; c < sub.size(); ++c) {
      const Index i = sub[c];
      const double psi = p.psi()(i);
      double term = static_cast<double>(x.rows()) * std::log(psi);
      for (Index r = 0; r < x.rows(); ++r) term += x(r, static_cast<Index>(c)) * x(r, static_cast<Index>(c)) / psi;
      for (Index a = 0; a < q; ++a) {
        for (Index b = 0; b < q; ++b) term += st.second(a, b) * p.loadings()(i, a) * p.loadings()(i, b) / psi;
      }
      for (Index r = 0; r < x.rows(); ++r) {
        for (Index a = 0; a < q; ++a) {
          term -= 2.0 * st.means(r, a) * p.loadings()(i, a) * x(r, static_cast<Index>(c)) / psi;
        }
      }
      total += term;
    }
  }
  return -0.5 * total;
}

/// Largest central-difference derivative of Q in any loading entry or any
/// precision entry omega_i = 1 / psi_i.
inline double q_gradient_max(const FactorParams& p, const EStepStats& stats, const DatasetCollection& data,
                             double h = 1e-5) {
  double worst = 0.0;
  for (Index i = 0; i < p.dim(); ++i) {
    for (Index c = 0; c < p.factors(); ++c) {
      Matrix up = p.loadings();
      Matrix down = p.loadings();
      up(i, c) += h;
      down(i, c) -= h;
      const double g = (q_function(FactorParams(up, p.psi()), stats, data) -
                        q_function(FactorParams(down, p.psi()), stats, data)) / (2.0 * h);
      worst = std::max(worst, std::abs(g));
    }
    const double omega = 1.0 / p.psi()(i);
    Vector up = p.psi();
    Vector down = p.psi();
    up(i) = 1.0 / (omega + h);
    down(i) = 1.0 / (omega - h);
    const double g = (q_function(FactorParams(p.loadings(), up), stats, data) -
                      q_function(FactorParams(p.loadings(), down), stats, data)) / (2.0 * h);
    worst = std::max(worst, std::abs(g));
  }
  return worst;
}

/// Textbook single-dataset factor EM step.
inline FactorParams classical_em_step(const FactorParams& p, const Matrix& x) {
  const Index q = p.factors();
  const double n = static_cast<double>(x.rows());
  const Matrix sigma = dense_covariance(p);
  const Matrix beta = p.loadings().transpose() * sigma.inverse();  // q x d
  const Matrix sxx = x.transpose() * x / n;
  const Matrix ezz = Matrix::Identity(q, q) - beta * p.loadings() + beta * sxx * beta.transpose();
  const Matrix l = sxx * beta.transpose() * ezz.inverse();
  const Vector psi = (sxx - l * beta * sxx).diagonal();
  return FactorParams(l, psi);
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(ranks(a), ranks(b));
}

inline Matrix random_orthogonal(Rng& rng, Index q) {
  Eigen::HouseholderQR<Matrix> qr(standard_normal(q, q, rng));
  return qr.householderQ() * Matrix::Identity(q, q);
}

}  // namespace linfa::testing

#endif  // LINFA_TESTS_SUPPORT_HPP
