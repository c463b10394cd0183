#include "linfa/simharness.hpp"

#include "linfa/completion.hpp"
#include "linfa/parallel.hpp"
#include "linfa/random.hpp"
#include "linfa/selection.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <cmath>
#include <numeric>

namespace linfa {

namespace {

Vector linspace(double lo, double hi, Index count) {
  Vector v(count);
  if (count == 1) {
    v(0) = lo;
    return v;
  }
  for (Index i = 0; i < count; ++i) {
    v(i) = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return v;
}

struct PatternCandidate {
  ObservationPattern pattern;
  double eta;
};

std::optional<PatternCandidate> serial_blocks(Index d, Index K, Index length) {
  std::vector<IndexSet> subsets;
  Index covered = 0;
  for (Index k = 0; k < K; ++k) {
    // round(k (d - L) / (K - 1)) in integers
    const Index start = K == 1 ? 0 : (2 * k * (d - length) + (K - 1)) / (2 * (K - 1));
    if (start > covered) return std::nullopt;
    IndexSet s(static_cast<std::size_t>(length));
    std::iota(s.begin(), s.end(), start);
    covered = std::max(covered, start + length);
    subsets.push_back(std::move(s));
  }
  if (covered != d) return std::nullopt;
  ObservationPattern pattern(d, std::move(subsets));
  const double eta = PairSet(pattern).eta();
  return PatternCandidate{std::move(pattern), eta};
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw NumericError("Pearson correlation undefined: zero variance");
  return sab / std::sqrt(saa * sbb);
}

std::optional<double> guarded(const std::function<double()>& f, std::string& status, const char* flag) {
  try {
    return f();
  } catch (const std::exception&) {
    if (!status.empty()) status += ';';
    status += flag;
    return std::nullopt;
  }
}

}  // namespace

FactorParams generate_ground_truth(Index d, Index q, std::uint64_t seed) {
  if (d < 1 || q < 1) throw InputError("ground truth needs d >= 1 and q >= 1");
  const Vector grid = linspace(-2.0, 2.0, d * q);
  std::vector<double> values(grid.data(), grid.data() + grid.size());
  Rng rng(seed);
  std::shuffle(values.begin(), values.end(), rng);
  Matrix loadings(d, q);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < q; ++j) loadings(i, j) = values[static_cast<std::size_t>(i * q + j)];
  }
  return FactorParams(std::move(loadings), linspace(1.0 / static_cast<double>(d), 5.0, d));
}

ObservationPattern build_pattern(Index d, Index K, double eta_target, double tolerance) {
  if (d < 2 || K < 1) throw InputError("pattern needs d >= 2 and K >= 1");
  std::optional<PatternCandidate> best;
  for (Index length = d; length >= 2; --length) {
    auto candidate = serial_blocks(d, K, length);
    if (!candidate) continue;
    if (!best || std::abs(candidate->eta - eta_target) < std::abs(best->eta - eta_target)) {
      best = std::move(candidate);
    }
    if (K == 1) break;
  }
  if (!best || std::abs(best->eta - eta_target) > tolerance) {
    throw InputError("target eta " + std::to_string(eta_target) + " is not reachable with " + std::to_string(K) +
                     " serial blocks over " + std::to_string(d) + " variables" +
                     (best ? " (closest " + std::to_string(best->eta) + ")" : std::string()));
  }
  return std::move(best->pattern);
}

std::vector<Index> split_sizes(Index n_total, Index K) {
  if (K < 1 || n_total < K) throw InputError("need at least one sample per dataset");
  std::vector<Index> sizes(static_cast<std::size_t>(K), n_total / K);
  for (Index k = 0; k < n_total % K; ++k) ++sizes[static_cast<std::size_t>(k)];
  return sizes;
}

SimulatedData simulate_data(const FactorParams& truth, const ObservationPattern& pattern,
                            const std::vector<Index>& sizes, std::uint64_t seed) {
  if (sizes.size() != pattern.size()) throw InputError("one sample size per dataset is required");
  const Index d = truth.dim();
  const Index n = std::accumulate(sizes.begin(), sizes.end(), Index{0});
  IndexSet everything(static_cast<std::size_t>(d));
  std::iota(everything.begin(), everything.end(), Index{0});
  const Restriction model = restrict(truth, everything);

  Rng rng(seed);
  Matrix factors(n, truth.factors());
  Matrix full(n, d);
  std::vector<Matrix> matrices;
  Index row = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    Matrix z;
    Matrix x = draw_factor_model(model, sizes[k], rng, &z);
    factors.middleRows(row, sizes[k]) = z;
    full.middleRows(row, sizes[k]) = x;
    matrices.emplace_back(x(Eigen::all, pattern.subset(k)));
    row += sizes[k];
  }
  return {DatasetCollection(pattern, std::move(matrices)), GroundTruth{truth, std::move(factors), std::move(full)}};
}

FitResult sffa_baseline(const DatasetCollection& data, const FitConfig& config) {
  IndexSet everything(static_cast<std::size_t>(data.dim()));
  std::iota(everything.begin(), everything.end(), Index{0});
  std::vector<Matrix> filled{simple_fill(data)};
  FitConfig cfg = config;
  cfg.start.reset();
  return fit(DatasetCollection(ObservationPattern(data.dim(), {everything}), std::move(filled)), cfg);
}

double correlation_risk(const Matrix& estimate, const Matrix& truth, const PairSet& pairs, PairScope scope) {
  const Index d = truth.rows();
  if (estimate.rows() != d || estimate.cols() != d || truth.cols() != d || pairs.dim() != d) {
    throw InputError("correlation risk needs matching square matrices");
  }
  const bool want = scope == PairScope::observed;
  double total = 0.0;
  Index count = 0;
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) {
      if (pairs.contains(i, j) != want) continue;
      const double diff = estimate(i, j) - truth(i, j);
      total += diff * diff;
      ++count;
    }
  }
  if (count == 0) throw InputError("no variable pairs in the selected scope");
  return total / static_cast<double>(count);
}

ComponentRisks component_risks(const FactorParams& estimate, const FactorParams& truth) {
  if (estimate.dim() != truth.dim()) throw InputError("component risks need equal dimensions");
  const double d = static_cast<double>(truth.dim());
  const Matrix diff = estimate.loadings() * estimate.loadings().transpose() -
                      truth.loadings() * truth.loadings().transpose();
  return {diff.squaredNorm() / (d * d), (estimate.psi() - truth.psi()).squaredNorm() / d};
}

double trace_r2(const Matrix& truth, const Matrix& predicted) {
  if (truth.rows() != predicted.rows()) throw InputError("trace R^2 needs equal row counts");
  const Matrix gram = predicted.transpose() * predicted;
  Eigen::LDLT<Matrix> ldlt(gram);
  const double scale = std::max(gram.diagonal().maxCoeff(), 1.0);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= kPivotFloor * scale) {
    throw NumericError("predicted factor Gram matrix is singular");
  }
  const Matrix cross = predicted.transpose() * truth;
  const double explained = (cross.transpose() * ldlt.solve(cross)).trace();
  return explained / truth.squaredNorm();
}

double completion_accuracy(const Matrix& truth, const Matrix& completed, const Mask& mask) {
  if (truth.rows() != completed.rows() || truth.cols() != completed.cols() || mask.rows() != truth.rows() ||
      mask.cols() != truth.cols()) {
    throw InputError("completion accuracy needs equally shaped inputs");
  }
  std::vector<double> a, b;
  for (Index j = 0; j < truth.cols(); ++j) {
    for (Index i = 0; i < truth.rows(); ++i) {
      if (!mask(i, j)) continue;
      a.push_back(truth(i, j));
      b.push_back(completed(i, j));
    }
  }
  if (a.empty()) throw InputError("completion mask selects no entries");
  return pearson(a, b);
}

std::string method_name(Method m) { return m == Method::linfa ? "linfa" : "sffa"; }

Method parse_method(const std::string& name) {
  if (name == "linfa") return Method::linfa;
  if (name == "sffa") return Method::sffa;
  throw InputError("unknown method '" + name + "' (expected linfa or sffa)");
}

void ExperimentConfig::validate() const {
  if (d < 2 || q_true < 1 || q_true >= d) throw InputError("experiment needs 1 <= q < d");
  if (K < 1 || n_total < K) throw InputError("experiment needs n_total >= K >= 1");
  if (seeds.empty()) throw InputError("experiment needs at least one seed");
  if (methods.empty()) throw InputError("experiment needs at least one method");
  for (Index q : q_fit_grid) {
    if (q < 1 || q >= d) throw InputError("q grid entries must lie in [1, d)");
  }
  fit.validate();
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{
      "corr_risk_O",  "corr_risk_Oc", "pcor_risk_O", "pcor_risk_Oc",
      "loadings_risk", "psi_risk",    "trace_r2",    "completion_corr"};
  return names;
}

std::optional<double> metric_value(const ExperimentRecord& r, const std::string& name) {
  if (name == "corr_risk_O") return r.corr_risk_observed;
  if (name == "corr_risk_Oc") return r.corr_risk_unobserved;
  if (name == "pcor_risk_O") return r.pcor_risk_observed;
  if (name == "pcor_risk_Oc") return r.pcor_risk_unobserved;
  if (name == "loadings_risk") return r.loadings_risk;
  if (name == "psi_risk") return r.psi_risk;
  if (name == "trace_r2") return r.trace_r2;
  if (name == "completion_corr") return r.completion_corr;
  throw InputError("unknown metric '" + name + "'");
}

namespace {

FitResult fit_method(Method method, const DatasetCollection& data, const FitConfig& base,
                     const std::vector<Index>& grid) {
  auto run = [&](Index q) {
    FitConfig cfg = base;
    cfg.q = q;
    cfg.start.reset();
    return method == Method::linfa ? fit(data, cfg) : sffa_baseline(data, cfg);
  };
  if (grid.size() == 1) return run(grid.front());
  std::optional<FitResult> best;
  double best_risk = 0.0;
  for (Index q : grid) {
    FitResult r = run(q);
    // SF-FA is scored by AIC on its own filled data, LINFA on the observed data.
    const double risk = aic_penalized(r.loglik_trace.back(), data.dim(), q);
    if (!best || risk < best_risk) {
      best_risk = risk;
      best = std::move(r);
    }
  }
  return std::move(*best);
}

void evaluate(ExperimentRecord& rec, Method method, const FitResult& fitted, const SimulatedData& sim,
              const PairSet& pairs) {
  const FactorParams& est = fitted.params;
  const FactorParams& truth = sim.truth.params;
  const DatasetCollection& data = sim.data;
  std::string& status = rec.status;

  const Matrix c_true = correlation_from_covariance(assemble_covariance(truth));
  const Matrix c_hat = correlation_from_covariance(assemble_covariance(est));
  rec.corr_risk_observed = correlation_risk(c_hat, c_true, pairs, PairScope::observed);
  const bool has_complement = pairs.unobserved_count() > 0;
  if (has_complement) {
    rec.corr_risk_unobserved = correlation_risk(c_hat, c_true, pairs, PairScope::unobserved);
  } else {
    status += status.empty() ? "empty_Oc" : ";empty_Oc";
  }

  const Matrix rho_true = partial_correlations(precision_woodbury(truth));
  const Matrix rho_hat = partial_correlations(precision_woodbury(est));
  rec.pcor_risk_observed = correlation_risk(rho_hat, rho_true, pairs, PairScope::observed);
  if (has_complement) rec.pcor_risk_unobserved = correlation_risk(rho_hat, rho_true, pairs, PairScope::unobserved);

  const ComponentRisks comp = component_risks(est, truth);
  rec.loadings_risk = comp.loadings;
  rec.psi_risk = comp.psi;

  // Predicted factors and completed data, rows stacked in dataset order.
  const Index n = data.total_samples();
  const Index d = data.dim();
  Matrix z_hat(n, est.factors());
  Matrix completed(n, d);
  Mask mask = Mask::Constant(n, d, true);
  IndexSet everything(static_cast<std::size_t>(d));
  std::iota(everything.begin(), everything.end(), Index{0});
  const Matrix filled = method == Method::sffa ? simple_fill(data) : Matrix();
  Index row = 0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& subset = data.pattern().subset(k);
    for (Index r = 0; r < data.samples(k); ++r, ++row) {
      for (Index i : subset) mask(row, i) = false;
      if (method == Method::linfa) {
        const Vector x = data.matrix(k).row(r).transpose();
        z_hat.row(row) = predict_factors(est, subset, x).transpose();
        completed.row(row) = complete_sample(est, subset, x).values.transpose();
      } else {
        const Vector x = filled.row(row).transpose();
        z_hat.row(row) = predict_factors(est, everything, x).transpose();
        completed.row(row) = x.transpose();
      }
    }
  }
  rec.trace_r2 = guarded([&] { return trace_r2(sim.truth.factors, z_hat); }, status, "trace_r2_undefined");
  if (mask.any()) {
    rec.completion_corr = guarded([&] { return completion_accuracy(sim.truth.full, completed, mask); }, status,
                                  "completion_undefined");
  } else {
    status += status.empty() ? "nothing_to_complete" : ";nothing_to_complete";
  }
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    s.se = sd / std::sqrt(static_cast<double>(values.size()));
  }
  s.ci_low = s.mean - 2.0 * s.se;
  s.ci_high = s.mean + 2.0 * s.se;
  return s;
}

}  // namespace

SimulatedData simulate_replicate(const ExperimentConfig& config, const ObservationPattern& pattern,
                                 std::uint64_t seed) {
  const FactorParams truth = generate_ground_truth(config.d, config.q_true, stream_seed(seed, 0));
  return simulate_data(truth, pattern, split_sizes(config.n_total, config.K), stream_seed(seed, 1));
}

ExperimentResults run_experiment(const ExperimentConfig& config) {
  config.validate();
  const ObservationPattern pattern = build_pattern(config.d, config.K, config.eta_target);
  const PairSet pairs(pattern);
  const std::vector<Index> grid = config.q_fit_grid.empty() ? std::vector<Index>{config.q_true} : config.q_fit_grid;

  const std::size_t m = config.methods.size();
  ExperimentResults results;
  results.records.resize(config.seeds.size() * m);

  parallel_for(config.seeds.size(), config.threads, [&](std::size_t s) {
    const std::uint64_t seed = config.seeds[s];
    const SimulatedData sim = simulate_replicate(config, pattern, seed);
    for (std::size_t mi = 0; mi < m; ++mi) {
      ExperimentRecord& rec = results.records[s * m + mi];
      rec.seed = seed;
      rec.method = config.methods[mi];
      rec.eta = pairs.eta();
      const auto started = std::chrono::steady_clock::now();
      try {
        const FitResult fitted = fit_method(rec.method, sim.data, config.fit, grid);
        rec.q_fit = fitted.params.factors();
        rec.iterations = fitted.iterations;
        rec.converged = fitted.converged;
        evaluate(rec, rec.method, fitted, sim, pairs);
      } catch (const std::exception& e) {
        rec.status = std::string("error: ") + e.what();
      }
      if (rec.status.empty()) rec.status = "ok";
      rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
  });

  for (Method method : config.methods) {
    auto& table = results.summaries[method_name(method)];
    for (const auto& name : metric_names()) {
      std::vector<double> values;
      for (const auto& rec : results.records) {
        if (rec.method != method) continue;
        if (auto v = metric_value(rec, name)) values.push_back(*v);
      }
      table[name] = summarize(values);
    }
  }
  return results;
}

}  // namespace linfa
