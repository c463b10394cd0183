#include "linfa/bootstrap.hpp"
#include "linfa/parallel.hpp"
#include "linfa/selection.hpp"
#include "linfa/simharness.hpp"

#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <sys/wait.h>

using namespace linfa;
using namespace linfa::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double e = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, e);
  return buf;
}

const unsigned kThreads = default_threads();

Outcome monotonicity() {
  Rng rng(1001);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Index d = t % 2 ? 50 : 10;
    const Index q = (t / 2) % 2 ? 3 : 1;
    const Index K = (t / 4) % 2 ? 3 : 1;
    const Index n = (t / 8) % 2 ? 1000 : 200;
    const FactorParams truth = random_params(rng, d, q);
    const ObservationPattern pattern =
        K == 1 ? ObservationPattern(d, {[&] { IndexSet all(d); std::iota(all.begin(), all.end(), 0); return all; }()})
               : random_pattern(rng, d, K);
    const DatasetCollection data = draw_data(truth, pattern, split_sizes(n, K), rng);
    FitConfig cfg;
    cfg.q = q;
    const FitResult r = fit(data, cfg);
    for (std::size_t i = 1; i < r.loglik_trace.size(); ++i) {
      worst = std::max(worst, r.loglik_trace[i - 1] - r.loglik_trace[i]);
    }
  }
  return {worst <= 1e-8, fmt("largest decrease %.3g over 50 fits", worst)};
}

Outcome woodbury() {
  Rng rng(1002);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Index d = uniform_index(rng, 1, 200);
    const Index q = uniform_index(rng, 1, std::min<Index>(d, 5));
    const FactorParams p = random_params(rng, d, q);
    const Matrix e = precision_woodbury(p) * assemble_covariance(p) - Matrix::Identity(d, d);
    worst = std::max(worst, max_abs(e));
  }
  return {worst < 1e-8, fmt("max |Theta Sigma - I| = %.3g", worst)};
}

Outcome gvt_oracle() {
  Rng rng(1003);
  int mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const ObservationPattern pattern = random_pattern(rng, uniform_index(rng, 2, 50), uniform_index(rng, 1, 8));
    if (tessellate(pattern).blocks != delta_tessellation(pattern)) ++mismatches;
  }
  IndexSet v1(80);
  IndexSet v2(80);
  std::iota(v1.begin(), v1.end(), 0);
  std::iota(v2.begin(), v2.end(), 20);
  const VertexPartition worked = tessellate(ObservationPattern(100, {v1, v2}));
  IndexSet w1(20), w2(60), w3(20);
  std::iota(w1.begin(), w1.end(), 0);
  std::iota(w2.begin(), w2.end(), 20);
  std::iota(w3.begin(), w3.end(), 80);
  const bool example = worked.blocks == std::vector<IndexSet>{w1, w2, w3};
  return {mismatches == 0 && example,
          fmt("%.0f of 100 random patterns differ; worked example ", mismatches) + (example ? "matches" : "differs")};
}

struct Prepared {
  VertexPartition partition;
  std::vector<Vector> dw;
};

Prepared prepare(const DatasetCollection& data) {
  Prepared p{tessellate(data.pattern()), {}};
  assign_pooled_counts(p.partition, data);
  p.dw = block_moments(data, p.partition);
  return p;
}

Outcome stationarity() {
  Rng rng(1004);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Index d = uniform_index(rng, 2, 20);
    const Index q = uniform_index(rng, 1, std::min<Index>(d - 1, 3));
    FactorParams p = random_params(rng, d, q);
    const DatasetCollection data = random_instance(rng, d, q, uniform_index(rng, 1, 4), 40, &p);
    const Prepared prep = prepare(data);
    const EStepStats st = e_step(random_params(rng, d, q), data);
    const FactorParams next = m_step(st, data, prep.partition, prep.dw, 1e-8);
    worst = std::max(worst, q_gradient_max(next, st, data));
  }
  return {worst < 1e-5, fmt("max |grad Q| = %.3g", worst)};
}

Outcome blocked_equivalence() {
  Rng rng(1005);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Index d = uniform_index(rng, 3, 30);
    const Index q = uniform_index(rng, 1, 3);
    FactorParams p = random_params(rng, d, q);
    const DatasetCollection data = random_instance(rng, d, q, uniform_index(rng, 1, 6), 30, &p);
    const Prepared prep = prepare(data);
    const EStepStats st = e_step(random_params(rng, d, q), data);
    const FactorParams blocked = m_step(st, data, prep.partition, prep.dw, 1e-6);
    const FactorParams ref = per_vertex_m_step(st, data, 1e-6);
    worst = std::max({worst, max_abs(blocked.loadings() - ref.loadings()), max_abs(blocked.psi() - ref.psi())});
  }
  return {worst < 1e-10, fmt("max difference %.3g", worst)};
}

Outcome rotation() {
  Rng rng(1006);
  double off_worst = 0.0;
  double sigma_worst = 0.0;
  bool ordered = true;
  for (int t = 0; t < 50; ++t) {
    const Index d = uniform_index(rng, 2, 60);
    const Index q = uniform_index(rng, 1, std::min<Index>(d, 6));
    const FactorParams p = random_params(rng, d, q);
    const FactorParams r = rotate_canonical(p);
    Matrix metric = r.loadings().transpose() * r.psi().cwiseInverse().asDiagonal() * r.loadings();
    for (Index c = 1; c < q; ++c) ordered = ordered && metric(c, c) <= metric(c - 1, c - 1);
    metric.diagonal().setZero();
    off_worst = std::max(off_worst, max_abs(metric));
    sigma_worst = std::max(sigma_worst, max_abs(assemble_covariance(r) - assemble_covariance(p)));
  }
  return {off_worst < 1e-8 && ordered && sigma_worst < 1e-10,
          fmt("off-diagonal %.3g, covariance change %.3g", off_worst, sigma_worst) +
              (ordered ? ", diagonal ordered" : ", diagonal out of order")};
}

ExperimentConfig figure_setting() {
  ExperimentConfig cfg;
  cfg.d = 50;
  cfg.q_true = 2;
  cfg.K = 3;
  cfg.n_total = 1000;
  cfg.eta_target = 0.3;
  for (std::uint64_t s = 1; s <= 20; ++s) cfg.seeds.push_back(s);
  cfg.threads = kThreads;
  return cfg;
}

const ExperimentResults& figure_results() {
  static const ExperimentResults results = run_experiment(figure_setting());
  return results;
}

struct Paired {
  std::vector<double> linfa;
  std::vector<double> sffa;
  double mean(const std::vector<double>& v) const { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }
};

Paired paired_metric(const std::string& name) {
  Paired out;
  std::map<std::uint64_t, std::pair<std::optional<double>, std::optional<double>>> by_seed;
  for (const auto& rec : figure_results().records) {
    auto& slot = by_seed[rec.seed];
    (rec.method == Method::linfa ? slot.first : slot.second) = metric_value(rec, name);
  }
  for (const auto& [seed, v] : by_seed) {
    if (v.first && v.second) {
      out.linfa.push_back(*v.first);
      out.sffa.push_back(*v.second);
    }
  }
  return out;
}

Outcome correlation_ordering() {
  const Paired m = paired_metric("corr_risk_Oc");
  if (m.linfa.size() != 20) return {false, fmt("only %.0f of 20 seeds produced both methods", m.linfa.size())};
  int wins = 0;
  for (std::size_t s = 0; s < m.linfa.size(); ++s) wins += m.linfa[s] < m.sffa[s] ? 1 : 0;
  const double a = m.mean(m.linfa);
  const double b = m.mean(m.sffa);
  return {a < b && wins >= 18, fmt("mean risk on Oc: LINFA %.4g, SF-FA %.4g; LINFA wins %.0f of 20", a, b, wins)};
}

Outcome trace_and_completion() {
  const Paired r2 = paired_metric("trace_r2");
  const Paired cc = paired_metric("completion_corr");
  if (r2.linfa.empty() || cc.linfa.empty()) return {false, "metrics missing"};
  const double a = r2.mean(r2.linfa), b = r2.mean(r2.sffa), c = cc.mean(cc.linfa), e = cc.mean(cc.sffa);
  return {a > b && c > e, fmt("trace R2 %.4g vs %.4g; completion corr %.4g vs %.4g", a, b, c, e)};
}

Outcome partial_correlation_ordering() {
  const Paired o = paired_metric("pcor_risk_O");
  const Paired oc = paired_metric("pcor_risk_Oc");
  if (o.linfa.empty() || oc.linfa.empty()) return {false, "metrics missing"};
  const double a = o.mean(o.linfa), b = o.mean(o.sffa), c = oc.mean(oc.linfa), e = oc.mean(oc.sffa);
  return {a < b && c < e, fmt("risk on O %.4g vs %.4g; on Oc %.4g vs %.4g", a, b, c, e)};
}

Index modal(const std::vector<Index>& v) {
  std::map<Index, int> counts;
  for (Index x : v) ++counts[x];
  Index best = 0;
  int best_count = -1;
  for (const auto& [q, c] : counts) {
    if (c > best_count) {
      best = q;
      best_count = c;
    }
  }
  return best;
}

Outcome model_selection() {
  ExperimentConfig cfg = figure_setting();
  cfg.eta_target = 0.2;
  const ObservationPattern pattern = build_pattern(cfg.d, cfg.K, cfg.eta_target);
  const std::vector<Index> grid{1, 2, 3, 4, 5, 6};
  std::vector<Index> aic(20), cv(20);
  parallel_for(20, kThreads, [&](std::size_t s) {
    const SimulatedData sim = simulate_replicate(cfg, pattern, s + 1);
    SelectionSettings st;
    st.threads = 1;
    FitConfig fc;
    st.criterion = Criterion::aic;
    aic[s] = select_q(sim.data, grid, st, fc).chosen_q;
    st.criterion = Criterion::cv;
    st.folds = 2;
    st.seed = s + 1;
    cv[s] = select_q(sim.data, grid, st, fc).chosen_q;
  });
  const auto hits = [](const std::vector<Index>& v) { return static_cast<double>(std::count(v.begin(), v.end(), 2)); };
  const bool pass = hits(aic) > 10 && hits(cv) > 10 && modal(aic) == modal(cv);
  return {pass, fmt("q=2 chosen by AIC in %.0f/20, by 2-fold CV in %.0f/20; modes %.0f and %.0f", hits(aic), hits(cv),
                    modal(aic), modal(cv))};
}

Outcome bootstrap_calibration() {
  const Index d = 20;
  const Index n = 1000;
  const FactorParams truth = generate_ground_truth(d, 2, 11);
  const ObservationPattern pattern = build_pattern(d, 3, 0.3);
  const std::vector<Index> sizes = split_sizes(n, 3);
  const PairSet observed(pattern);

  std::vector<std::pair<Index, Index>> candidates;
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) {
      if (observed.contains(i, j)) candidates.emplace_back(i, j);
    }
  }
  Rng pick(stream_seed(11, 99));
  std::shuffle(candidates.begin(), candidates.end(), pick);
  candidates.resize(10);
  std::vector<Statistic> stats;
  for (const auto& [i, j] : candidates) stats.push_back(named_statistic("fisher-correlation", i, j, d));
  const StatisticVector g = [&](const FactorParams& p) {
    Vector v(static_cast<Index>(stats.size()));
    for (std::size_t s = 0; s < stats.size(); ++s) v(static_cast<Index>(s)) = stats[s](p);
    return v;
  };

  const int mc_reps = 500;
  Matrix mc(mc_reps, 10);
  std::vector<char> mc_ok(mc_reps, 0);
  parallel_for(mc_reps, kThreads, [&](std::size_t r) {
    Rng rng(stream_seed(2024, r));
    const DatasetCollection data = draw_data(truth, pattern, sizes, rng);
    FitConfig cfg;
    cfg.q = 2;
    cfg.start = truth;
    const FitResult res = fit(data, cfg);
    if (!res.converged) return;
    mc.row(static_cast<Index>(r)) = g(res.params).transpose();
    mc_ok[r] = 1;
  });
  std::vector<std::vector<double>> columns(10);
  for (int r = 0; r < mc_reps; ++r) {
    if (!mc_ok[static_cast<std::size_t>(r)]) continue;
    for (Index c = 0; c < 10; ++c) columns[static_cast<std::size_t>(c)].push_back(mc(r, c));
  }

  Rng rng(stream_seed(2024, 1000000));
  const DatasetCollection data = draw_data(truth, pattern, sizes, rng);
  FitConfig cfg;
  cfg.q = 2;
  const FactorParams mle = fit(data, cfg).params;
  BootstrapSettings bs;
  bs.replicates = 200;
  bs.seed = 5;
  bs.threads = kThreads;
  const BootstrapTable table = parametric_bootstrap(mle, pattern, sizes, g, bs, cfg);

  std::vector<double> boot, truth_se;
  double lo = 1e300, hi = 0.0;
  for (std::size_t c = 0; c < 10; ++c) {
    truth_se.push_back(replicate_se(columns[c]));
    boot.push_back(table.se(static_cast<Index>(c)));
    const double ratio = boot.back() / truth_se.back();
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  const double rank = spearman(boot, truth_se);
  return {lo >= 0.5 && hi <= 2.0 && rank > 0.7,
          fmt("se ratio range [%.3f, %.3f], rank correlation %.3f, %.0f bootstrap failures", lo, hi, rank,
              table.failures)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LINFA_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("linfa_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
  std::vector<std::string> differing;
  int failed_runs = 0;

  const std::string sim = " simulate --d 30 --q 2 --K 3 --n 600 --eta 0.3 --seeds 4 --emit-data --out-dir ";
  failed_runs += run_cli("--threads 4" + sim + q(dir / "sim_a")) != 0;
  failed_runs += run_cli("--threads 1" + sim + q(dir / "sim_b")) != 0;
  for (const char* f : {"results.csv", "summary.json"}) {
    if (slurp(dir / "sim_a" / f) != slurp(dir / "sim_b" / f)) differing.push_back(std::string("simulate ") + f);
  }

  const fs::path manifest = dir / "sim_a" / "data" / "seed_1" / "manifest.json";
  const std::string fit = "fit --input " + q(manifest) + " --q 2 --out-dir ";
  failed_runs += run_cli(fit + q(dir / "fit_a")) != 0;
  failed_runs += run_cli(fit + q(dir / "fit_b")) != 0;
  for (const char* f : {"lambda.csv", "psi.csv", "sigma.csv", "loglik_trace.csv"}) {
    if (slurp(dir / "fit_a" / f) != slurp(dir / "fit_b" / f)) differing.push_back(std::string("fit ") + f);
  }

  for (const char* crit : {"aic", "cv"}) {
    const std::string sel = std::string("select --input ") + q(manifest) + " --criterion " + crit +
                            " --q-grid 1:4 --seed 3 --out-dir ";
    failed_runs += run_cli("--threads 4 " + sel + q(dir / "sel_a")) != 0;
    failed_runs += run_cli("--threads 1 " + sel + q(dir / "sel_b")) != 0;
    if (slurp(dir / "sel_a" / "selection_report.json") != slurp(dir / "sel_b" / "selection_report.json")) {
      differing.push_back(std::string("select ") + crit);
    }
  }
  fs::remove_all(dir);
  std::string detail = fmt("%.0f runs exited nonzero; ", failed_runs);
  if (differing.empty()) {
    detail += "all primary outputs byte-identical";
  } else {
    detail += "differing:";
    for (const auto& s : differing) detail += " " + s;
  }
  return {failed_runs == 0 && differing.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"EM monotonicity", monotonicity},
      {"Woodbury identity", woodbury},
      {"tessellation oracle", gvt_oracle},
      {"M-step stationarity", stationarity},
      {"blocked M-step equivalence", blocked_equivalence},
      {"rotation contract", rotation},
      {"correlation risk ordering", correlation_ordering},
      {"trace R2 and completion ordering", trace_and_completion},
      {"partial correlation ordering", partial_correlation_ordering},
      {"model selection", model_selection},
      {"bootstrap calibration", bootstrap_calibration},
      {"CLI determinism", determinism},
  };
  int failures = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[c].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c + 1, criteria[c].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
