#ifndef LINFA_SIMHARNESS_HPP
#define LINFA_SIMHARNESS_HPP

#include "linfa/core.hpp"
#include "linfa/em.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace linfa {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Generating parameters plus the latent factors and complete data drawn
/// from them (rows stacked in dataset order).
struct GroundTruth {
  FactorParams params;
  Matrix factors;  ///< n x q
  Matrix full;     ///< n x d, full = factors * Lambda^T + noise
};

struct SimulatedData {
  DatasetCollection data;
  GroundTruth truth;
};

/// Lambda: seeded permutation of d*q evenly spaced values on [-2, 2],
/// filled row by row. Psi: evenly spaced from 1/d to 5.
FactorParams generate_ground_truth(Index d, Index q, std::uint64_t seed);

/// K contiguous, equally long blocks with evenly spread starts whose
/// realized eta is within `tolerance` of the target.
ObservationPattern build_pattern(Index d, Index K, double eta_target, double tolerance = 0.02);

/// n_total split over K datasets; the first n_total % K datasets get one
/// extra row.
std::vector<Index> split_sizes(Index n_total, Index K);

SimulatedData simulate_data(const FactorParams& truth, const ObservationPattern& pattern,
                            const std::vector<Index>& sizes, std::uint64_t seed);

/// Mean-fill the data, then fit a single complete dataset.
FitResult sffa_baseline(const DatasetCollection& data, const FitConfig& config);

enum class PairScope { observed, unobserved };

/// Mean squared difference over unordered pairs i < j in the chosen scope.
double correlation_risk(const Matrix& estimate, const Matrix& truth, const PairSet& pairs, PairScope scope);

struct ComponentRisks {
  double loadings = 0.0;  ///< d^-2 sum_ij ([L L^T]_ij - [L0 L0^T]_ij)^2
  double psi = 0.0;       ///< d^-1 sum_i (psi_i - psi0_i)^2
};

ComponentRisks component_risks(const FactorParams& estimate, const FactorParams& truth);

/// tr(Z^T Zh (Zh^T Zh)^{-1} Zh^T Z) / tr(Z^T Z).
double trace_r2(const Matrix& truth, const Matrix& predicted);

/// Pearson correlation of the masked entries.
double completion_accuracy(const Matrix& truth, const Matrix& completed, const Mask& mask);

enum class Method { linfa, sffa };
std::string method_name(Method m);
Method parse_method(const std::string& name);

struct ExperimentConfig {
  Index d = 50;
  Index q_true = 2;
  Index K = 3;
  Index n_total = 1000;
  double eta_target = 0.3;
  std::vector<std::uint64_t> seeds;
  std::vector<Index> q_fit_grid;  ///< empty = {q_true}; several = pick by AIC
  std::vector<Method> methods{Method::linfa, Method::sffa};
  FitConfig fit;
  unsigned threads = 1;

  void validate() const;
};

struct ExperimentRecord {
  std::uint64_t seed = 0;
  Method method = Method::linfa;
  Index q_fit = 0;
  double eta = 0.0;
  int iterations = 0;
  bool converged = false;
  std::optional<double> corr_risk_observed;
  std::optional<double> corr_risk_unobserved;
  std::optional<double> pcor_risk_observed;
  std::optional<double> pcor_risk_unobserved;
  std::optional<double> loadings_risk;
  std::optional<double> psi_risk;
  std::optional<double> trace_r2;
  std::optional<double> completion_corr;
  std::string status;  ///< "ok", or semicolon-joined flags / error text
  double wall_seconds = 0.0;
};

struct MetricSummary {
  int count = 0;
  double mean = 0.0;
  double se = 0.0;  ///< sd / sqrt(count); 0 when count < 2
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct ExperimentResults {
  std::vector<ExperimentRecord> records;  ///< seed-major, methods in config order
  /// summaries[method][metric]
  std::map<std::string, std::map<std::string, MetricSummary>> summaries;
};

/// Metric names in output column order, with accessors.
const std::vector<std::string>& metric_names();
std::optional<double> metric_value(const ExperimentRecord& record, const std::string& name);

/// Truth and data for one replicate seed of an experiment.
SimulatedData simulate_replicate(const ExperimentConfig& config, const ObservationPattern& pattern,
                                 std::uint64_t seed);

ExperimentResults run_experiment(const ExperimentConfig& config);

}  // namespace linfa

#endif  // LINFA_SIMHARNESS_HPP
