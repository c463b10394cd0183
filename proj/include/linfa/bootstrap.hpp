#ifndef LINFA_BOOTSTRAP_HPP
#define LINFA_BOOTSTRAP_HPP

#include "linfa/core.hpp"
#include "linfa/em.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace linfa {

/// Scalar functional g(Lambda, Psi); must be rotation invariant.
using Statistic = std::function<double(const FactorParams&)>;
/// Several functionals evaluated on the same refit.
using StatisticVector = std::function<Vector(const FactorParams&)>;

struct BootstrapSettings {
  int replicates = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;  ///< 0 = machine parallelism
};

struct BootstrapReport {
  int replicates = 0;
  std::vector<double> theta_hats;  ///< successful replicates, in replicate order
  double se = 0.0;
  int failures = 0;                ///< refits that did not converge or threw
};

struct BootstrapTable {
  int replicates = 0;
  Matrix theta_hats;  ///< successful replicates x statistics
  Vector se;
  int failures = 0;
};

/// Sample standard deviation (divisor B - 1), computed with Welford's
/// update so identical values give exactly zero.
double replicate_se(const std::vector<double>& values);

/// Refits on K datasets simulated from the fitted model; each refit is
/// warm-started at `mle`.
BootstrapTable parametric_bootstrap(const FactorParams& mle, const ObservationPattern& pattern,
                                    const std::vector<Index>& sizes, const StatisticVector& g,
                                    const BootstrapSettings& settings, const FitConfig& config);
BootstrapReport parametric_bootstrap(const FactorParams& mle, const ObservationPattern& pattern,
                                     const std::vector<Index>& sizes, const Statistic& g,
                                     const BootstrapSettings& settings, const FitConfig& config);

/// Refits on rows resampled with replacement within each dataset; each
/// refit uses the simple-fill spectral start.
BootstrapTable nonparametric_bootstrap(const DatasetCollection& data, const StatisticVector& g,
                                       const BootstrapSettings& settings, const FitConfig& config);
BootstrapReport nonparametric_bootstrap(const DatasetCollection& data, const Statistic& g,
                                        const BootstrapSettings& settings, const FitConfig& config);

double fisher_z(double r);

/// Named statistics: correlation, fisher-correlation, partial-correlation,
/// psi, sigma. Indices are 0-based; psi ignores j.
Statistic named_statistic(const std::string& name, Index i, Index j, Index dim);

}  // namespace linfa

#endif  // LINFA_BOOTSTRAP_HPP
