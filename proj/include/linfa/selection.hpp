#ifndef LINFA_SELECTION_HPP
#define LINFA_SELECTION_HPP

#include "linfa/core.hpp"
#include "linfa/em.hpp"

#include <cstdint>
#include <vector>

namespace linfa {

enum class Criterion { aic, cv };

struct SelectionSettings {
  Criterion criterion = Criterion::aic;
  int folds = 2;           ///< used by Criterion::cv
  std::uint64_t seed = 0;  ///< fold assignment seed
  unsigned threads = 1;    ///< 0 = machine parallelism
};

struct SelectionReport {
  SelectionSettings settings;
  std::vector<Index> grid;
  std::vector<double> risks;
  Index chosen_q = 0;
  /// AIC: full-data log-likelihood per grid point. CV: mean held-out
  /// log-likelihood per grid point.
  std::vector<double> logliks;
  /// CV only: held-out negative log-likelihood per grid point and fold.
  std::vector<std::vector<double>> per_fold;
  std::vector<int> iterations;  ///< summed over folds for CV
  std::vector<bool> converged;  ///< all folds converged for CV
};

/// -2 logL + 2 d (q + 1).
double aic_penalized(double loglik, Index d, Index q);
double aic_risk(const FitResult& fit, const DatasetCollection& data);

/// Row-to-fold assignment: folds[k][r] is the fold of row r in dataset k.
/// Each dataset is permuted with the seeded RNG and cut into N contiguous
/// runs whose sizes differ by at most one.
std::vector<std::vector<int>> assign_folds(const DatasetCollection& data, int folds, std::uint64_t seed);

/// Splits data into (rows outside fold j, rows inside fold j).
std::pair<DatasetCollection, DatasetCollection> split_fold(const DatasetCollection& data,
                                                           const std::vector<std::vector<int>>& folds,
                                                           int fold);

struct CvOutcome {
  double risk = 0.0;
  std::vector<double> fold_nll;
  int iterations = 0;
  bool converged = true;
};

CvOutcome cv_evaluate(const DatasetCollection& data, Index q, int folds, const FitConfig& config,
                      std::uint64_t seed);

/// -(1/N) sum_j logL(fit without fold j; fold j).
double cv_risk(const DatasetCollection& data, Index q, int folds, const FitConfig& config,
               std::uint64_t seed);

/// Minimizes the chosen criterion over the grid; ties go to the smaller q.
SelectionReport select_q(const DatasetCollection& data, const std::vector<Index>& grid,
                         const SelectionSettings& settings, const FitConfig& config);

}  // namespace linfa

#endif  // LINFA_SELECTION_HPP
