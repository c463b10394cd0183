#include "linfa/selection.hpp"

#include "linfa/parallel.hpp"
#include "linfa/random.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace linfa {

double aic_penalized(double loglik, Index d, Index q) {
  return -2.0 * loglik + 2.0 * static_cast<double>(d) * static_cast<double>(q + 1);
}

double aic_risk(const FitResult& fit, const DatasetCollection& data) {
  return aic_penalized(log_likelihood(fit.params, data), data.dim(), fit.params.factors());
}

std::vector<std::vector<int>> assign_folds(const DatasetCollection& data, int folds, std::uint64_t seed) {
  if (folds < 2) throw InputError("cross-validation needs at least two folds");
  Rng rng(seed);
  std::vector<std::vector<int>> out(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) {
    const Index n = data.samples(k);
    if (n < folds) {
      throw InputError("dataset " + std::to_string(k + 1) + " has " + std::to_string(n) +
                       " rows, fewer than the " + std::to_string(folds) + " folds; some fold would be empty");
    }
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    out[k].assign(static_cast<std::size_t>(n), 0);
    for (int j = 0; j < folds; ++j) {
      const Index lo = n * j / folds;
      const Index hi = n * (j + 1) / folds;
      for (Index p = lo; p < hi; ++p) out[k][static_cast<std::size_t>(perm[static_cast<std::size_t>(p)])] = j;
    }
  }
  return out;
}

std::pair<DatasetCollection, DatasetCollection> split_fold(const DatasetCollection& data,
                                                           const std::vector<std::vector<int>>& folds,
                                                           int fold) {
  std::vector<Matrix> train, test;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const Matrix& x = data.matrix(k);
    std::vector<Index> in, out;
    for (Index r = 0; r < x.rows(); ++r) {
      (folds[k][static_cast<std::size_t>(r)] == fold ? in : out).push_back(r);
    }
    if (in.empty() || out.empty()) {
      throw InputError("fold " + std::to_string(fold + 1) + " leaves dataset " + std::to_string(k + 1) +
                       " without rows");
    }
    train.emplace_back(x(out, Eigen::all));
    test.emplace_back(x(in, Eigen::all));
  }
  return {DatasetCollection(data.pattern(), std::move(train)),
          DatasetCollection(data.pattern(), std::move(test))};
}

CvOutcome cv_evaluate(const DatasetCollection& data, Index q, int folds, const FitConfig& config,
                      std::uint64_t seed) {
  const auto assignment = assign_folds(data, folds, seed);
  FitConfig cfg = config;
  cfg.q = q;
  CvOutcome out;
  double total = 0.0;
  for (int j = 0; j < folds; ++j) {
    const auto [train, test] = split_fold(data, assignment, j);
    const FitResult fitted = fit(train, cfg);
    const double held_out = log_likelihood(fitted.params, test);
    out.fold_nll.push_back(-held_out);
    out.iterations += fitted.iterations;
    out.converged = out.converged && fitted.converged;
    total += held_out;
  }
  out.risk = -total / static_cast<double>(folds);
  return out;
}

double cv_risk(const DatasetCollection& data, Index q, int folds, const FitConfig& config,
               std::uint64_t seed) {
  return cv_evaluate(data, q, folds, config, seed).risk;
}

SelectionReport select_q(const DatasetCollection& data, const std::vector<Index>& grid,
                         const SelectionSettings& settings, const FitConfig& config) {
  if (grid.empty()) throw InputError("candidate grid for q is empty");
  SelectionReport report;
  report.settings = settings;
  report.grid = grid;
  const std::size_t m = grid.size();
  report.risks.assign(m, 0.0);
  report.logliks.assign(m, 0.0);
  report.iterations.assign(m, 0);
  report.converged.assign(m, false);
  if (settings.criterion == Criterion::cv) report.per_fold.assign(m, {});

  std::vector<char> converged(m, 0);
  parallel_for(m, settings.threads, [&](std::size_t g) {
    FitConfig cfg = config;
    cfg.q = grid[g];
    cfg.start.reset();
    if (settings.criterion == Criterion::aic) {
      const FitResult fitted = fit(data, cfg);
      const double ll = fitted.loglik_trace.back();
      report.logliks[g] = ll;
      report.risks[g] = aic_penalized(ll, data.dim(), grid[g]);
      report.iterations[g] = fitted.iterations;
      converged[g] = fitted.converged;
    } else {
      const CvOutcome cv = cv_evaluate(data, grid[g], settings.folds, cfg, settings.seed);
      report.risks[g] = cv.risk;
      report.logliks[g] = -cv.risk;
      report.per_fold[g] = cv.fold_nll;
      report.iterations[g] = cv.iterations;
      converged[g] = cv.converged;
    }
  });
  for (std::size_t g = 0; g < m; ++g) report.converged[g] = converged[g] != 0;

  std::size_t best = 0;
  for (std::size_t g = 1; g < m; ++g) {
    if (report.risks[g] < report.risks[best] ||
        (report.risks[g] == report.risks[best] && grid[g] < grid[best])) {
      best = g;
    }
  }
  report.chosen_q = grid[best];
  return report;
}

}  // namespace linfa
