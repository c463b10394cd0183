#include "linfa/bootstrap.hpp"

#include "linfa/parallel.hpp"
#include "linfa/random.hpp"

#include <cmath>
#include <optional>

namespace linfa {

namespace {

using Replicate = std::function<std::optional<Vector>(std::size_t)>;

BootstrapTable run_replicates(int replicates, unsigned threads, const Replicate& one) {
  if (replicates < 2) throw InputError("bootstrap needs at least two replicates");
  std::vector<std::optional<Vector>> slots(static_cast<std::size_t>(replicates));
  parallel_for(slots.size(), threads, [&](std::size_t b) {
    try {
      slots[b] = one(b);
    } catch (const NumericError&) {
      slots[b].reset();
    }
  });

  BootstrapTable table;
  table.replicates = replicates;
  std::vector<const Vector*> ok;
  for (const auto& s : slots) {
    if (s) ok.push_back(&*s);
  }
  table.failures = replicates - static_cast<int>(ok.size());
  if (ok.size() < 2) {
    throw NumericError("bootstrap produced fewer than two successful replicates (" +
                       std::to_string(table.failures) + " of " + std::to_string(replicates) + " failed)");
  }
  const Index m = ok.front()->size();
  table.theta_hats.resize(static_cast<Index>(ok.size()), m);
  for (std::size_t b = 0; b < ok.size(); ++b) table.theta_hats.row(static_cast<Index>(b)) = ok[b]->transpose();
  table.se.resize(m);
  for (Index c = 0; c < m; ++c) {
    std::vector<double> col(table.theta_hats.col(c).data(), table.theta_hats.col(c).data() + ok.size());
    table.se(c) = replicate_se(col);
  }
  return table;
}

BootstrapReport to_report(const BootstrapTable& table) {
  BootstrapReport r;
  r.replicates = table.replicates;
  r.failures = table.failures;
  r.se = table.se(0);
  r.theta_hats.assign(table.theta_hats.col(0).data(),
                      table.theta_hats.col(0).data() + table.theta_hats.rows());
  return r;
}

StatisticVector lift(const Statistic& g) {
  return [g](const FactorParams& p) {
    Vector v(1);
    v(0) = g(p);
    return v;
  };
}

}  // namespace

double replicate_se(const std::vector<double>& values) {
  if (values.size() < 2) throw InputError("standard error needs at least two values");
  double mean = 0.0;
  double m2 = 0.0;
  double count = 0.0;
  for (double v : values) {
    count += 1.0;
    const double delta = v - mean;
    mean += delta / count;
    m2 += delta * (v - mean);
  }
  return std::sqrt(m2 / (count - 1.0));
}

BootstrapTable parametric_bootstrap(const FactorParams& mle, const ObservationPattern& pattern,
                                    const std::vector<Index>& sizes, const StatisticVector& g,
                                    const BootstrapSettings& settings, const FitConfig& config) {
  if (sizes.size() != pattern.size()) throw InputError("one sample size per dataset is required");
  if (pattern.dim() != mle.dim()) throw InputError("pattern and parameter dimensions differ");
  std::vector<Restriction> blocks;
  for (const auto& s : pattern.subsets()) blocks.push_back(restrict(mle, s));
  FitConfig cfg = config;
  cfg.q = mle.factors();
  cfg.start = mle;

  return run_replicates(settings.replicates, settings.threads, [&](std::size_t b) -> std::optional<Vector> {
    Rng rng(stream_seed(settings.seed, b));
    std::vector<Matrix> sims;
    for (std::size_t k = 0; k < blocks.size(); ++k) sims.push_back(draw_factor_model(blocks[k], sizes[k], rng));
    const FitResult refit = fit(DatasetCollection(pattern, std::move(sims)), cfg);
    if (!refit.converged) return std::nullopt;
    return g(refit.params);
  });
}

BootstrapReport parametric_bootstrap(const FactorParams& mle, const ObservationPattern& pattern,
                                     const std::vector<Index>& sizes, const Statistic& g,
                                     const BootstrapSettings& settings, const FitConfig& config) {
  return to_report(parametric_bootstrap(mle, pattern, sizes, lift(g), settings, config));
}

BootstrapTable nonparametric_bootstrap(const DatasetCollection& data, const StatisticVector& g,
                                       const BootstrapSettings& settings, const FitConfig& config) {
  FitConfig cfg = config;
  cfg.start.reset();
  return run_replicates(settings.replicates, settings.threads, [&](std::size_t b) -> std::optional<Vector> {
    Rng rng(stream_seed(settings.seed, b));
    std::vector<Matrix> resampled;
    for (const auto& x : data.matrices()) {
      std::uniform_int_distribution<Index> pick(0, x.rows() - 1);
      std::vector<Index> rows(static_cast<std::size_t>(x.rows()));
      for (auto& r : rows) r = pick(rng);
      resampled.emplace_back(x(rows, Eigen::all));
    }
    const FitResult refit = fit(DatasetCollection(data.pattern(), std::move(resampled)), cfg);
    if (!refit.converged) return std::nullopt;
    return g(refit.params);
  });
}

BootstrapReport nonparametric_bootstrap(const DatasetCollection& data, const Statistic& g,
                                        const BootstrapSettings& settings, const FitConfig& config) {
  return to_report(nonparametric_bootstrap(data, lift(g), settings, config));
}

double fisher_z(double r) {
  if (!(std::abs(r) < 1.0)) throw InputError("Fisher transform needs |r| < 1");
  return std::atanh(r);
}

Statistic named_statistic(const std::string& name, Index i, Index j, Index dim) {
  auto in_range = [dim](Index v) { return v >= 0 && v < dim; };
  if (!in_range(i) || (name != "psi" && !in_range(j))) {
    throw InputError("statistic index out of range for dimension " + std::to_string(dim));
  }
  const bool diagonal = i == j;
  if (name == "sigma") {
    return [i, j](const FactorParams& p) {
      double v = p.loadings().row(i).dot(p.loadings().row(j));
      if (i == j) v += p.psi()(i);
      return v;
    };
  }
  if (name == "psi") {
    return [i](const FactorParams& p) { return p.psi()(i); };
  }
  if (name == "correlation" || name == "fisher-correlation") {
    if (diagonal) throw InputError(name + " needs two distinct variables (the diagonal is constant 1)");
    const bool fisher = name == "fisher-correlation";
    return [i, j, fisher](const FactorParams& p) {
      const auto& l = p.loadings();
      const double sii = l.row(i).squaredNorm() + p.psi()(i);
      const double sjj = l.row(j).squaredNorm() + p.psi()(j);
      const double r = l.row(i).dot(l.row(j)) / std::sqrt(sii * sjj);
      return fisher ? fisher_z(r) : r;
    };
  }
  if (name == "partial-correlation") {
    if (diagonal) throw InputError(name + " needs two distinct variables (the diagonal is constant 1)");
    return [i, j](const FactorParams& p) { return partial_correlations(precision_woodbury(p))(i, j); };
  }
  throw InputError("unknown statistic '" + name + "'");
}

}  // namespace linfa
