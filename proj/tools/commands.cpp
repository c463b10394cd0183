#include "commands.hpp"

#include "linfa/bootstrap.hpp"
#include "linfa/completion.hpp"
#include "linfa/em.hpp"
#include "linfa/io.hpp"
#include "linfa/selection.hpp"
#include "linfa/simharness.hpp"

#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

namespace linfa::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

using Clock = std::chrono::steady_clock;

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Json subsets_json(const ObservationPattern& pattern) {
  Json arr = Json::array();
  for (const auto& s : pattern.subsets()) {
    Json one = Json::array();
    for (Index i : s) one.push_back(i + 1);
    arr.push_back(one);
  }
  return arr;
}

Json vector_json(const Vector& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Json data_json(const io::Ingested& in) {
  Json sizes = Json::array();
  for (std::size_t k = 0; k < in.data.size(); ++k) sizes.push_back(in.data.samples(k));
  return Json{{"d", in.data.dim()},
              {"K", in.data.size()},
              {"n_total", in.data.total_samples()},
              {"sizes", sizes},
              {"subsets", subsets_json(in.data.pattern())},
              {"names", in.names},
              {"centered", in.centered},
              {"means", vector_json(in.means)},
              {"input_rows", in.input_rows},
              {"dropped_rows", in.dropped_rows},
              {"coordinates", "model files are in centered coordinates; add means to recover input units"}};
}

Json fit_flags_json(const FitFlags& f) {
  return Json{{"tol", f.tol}, {"max_iter", f.max_iter}, {"psi_floor", f.psi_floor}};
}

FitConfig make_fit_config(const FitFlags& f, long q) {
  FitConfig cfg;
  cfg.q = q;
  cfg.tol = f.tol;
  cfg.max_iter = f.max_iter;
  cfg.psi_floor = f.psi_floor;
  cfg.validate();
  return cfg;
}

void write_run_manifest(const fs::path& dir, const std::string& command, const std::vector<std::string>& argv,
                        const Json& config, const std::vector<fs::path>& inputs, Clock::time_point started,
                        Json extra = Json::object()) {
  Json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["argv"] = argv;
  m["config"] = config;
  Json digests = Json::array();
  for (const auto& p : inputs) digests.push_back({{"path", p.string()}, {"sha256", io::file_digest(p)}});
  m["inputs"] = digests;
  for (auto& [k, v] : extra.items()) m[k] = v;
  m["timing"] = {{"wall_seconds", std::chrono::duration<double>(Clock::now() - started).count()}};
  write_json(dir / "run_manifest.json", m);
}

io::Ingested load_data(const std::string& input) {
  if (input.empty()) throw InputError("--input is required");
  io::Ingested in = io::ingest(input);
  for (const auto& w : in.warnings) warn(w);
  return in;
}

std::vector<fs::path> input_files(const std::string& input) {
  std::vector<fs::path> files{input};
  if (fs::path(input).extension() == ".json") {
    std::ifstream f(input);
    const auto m = Json::parse(f);
    for (const auto& entry : m.at("datasets")) {
      files.push_back(fs::path(input).parent_path() / entry.at("path").get<std::string>());
    }
  }
  return files;
}

struct LoadedModel {
  FactorParams params;
  Vector means;
  std::vector<std::string> names;
};

LoadedModel load_model(const std::string& dir_text) {
  if (dir_text.empty()) throw InputError("--params-dir is required");
  const fs::path dir(dir_text);
  Matrix lambda = io::read_matrix_csv(dir / "lambda.csv");
  const Matrix psi = io::read_matrix_csv(dir / "psi.csv");
  if (psi.cols() != 1) throw InputError((dir / "psi.csv").string() + ": expected one value per line");
  FactorParams params(std::move(lambda), psi.col(0));
  Vector means = Vector::Zero(params.dim());
  std::vector<std::string> names = io::default_names(params.dim());
  const fs::path manifest = dir / "run_manifest.json";
  if (fs::exists(manifest)) {
    std::ifstream f(manifest);
    const auto m = Json::parse(f);
    if (m.contains("data")) {
      const auto& data = m["data"];
      const auto mv = data.at("means").get<std::vector<double>>();
      if (static_cast<Index>(mv.size()) != params.dim()) throw InputError(manifest.string() + ": means length mismatch");
      means = Eigen::Map<const Vector>(mv.data(), params.dim());
      names = data.at("names").get<std::vector<std::string>>();
    }
  }
  return {std::move(params), std::move(means), std::move(names)};
}

void write_params(const fs::path& dir, const FactorParams& params) {
  io::write_matrix_csv(dir / "lambda.csv", params.loadings());
  io::write_matrix_csv(dir / "psi.csv", params.psi());
  io::write_matrix_csv(dir / "sigma.csv", assemble_covariance(params));
}

std::string optional_cell(const std::optional<double>& v) { return v ? io::format_double(*v) : "NA"; }

}  // namespace

std::vector<long> parse_int_list(const std::string& text) {
  std::vector<long> out;
  auto to_long = [&](const std::string& s) {
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw InputError("cannot parse '" + s + "' in list '" + text + "'");
    return v;
  };
  if (const auto colon = text.find(':'); colon != std::string::npos) {
    const long lo = to_long(text.substr(0, colon));
    const long hi = to_long(text.substr(colon + 1));
    if (hi < lo) throw InputError("empty range '" + text + "'");
    for (long v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_long(item));
  if (out.empty()) throw InputError("empty list");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  const auto values = parse_int_list(text);
  std::vector<std::uint64_t> seeds;
  if (values.size() == 1 && text.find_first_of(":,") == std::string::npos) {
    if (values[0] < 1) throw InputError("seed count must be positive");
    for (long s = 1; s <= values[0]; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
    return seeds;
  }
  for (long v : values) {
    if (v < 0) throw InputError("seeds must be non-negative");
    seeds.push_back(static_cast<std::uint64_t>(v));
  }
  return seeds;
}

int run_fit(const FitOptions& opt, unsigned /*threads*/, const std::vector<std::string>& argv) {
  const auto started = Clock::now();
  if (opt.q < 1) throw InputError("--q must be at least 1");
  const io::Ingested in = load_data(opt.input);
  FitConfig cfg = make_fit_config(opt.fit, opt.q);
  if (!opt.start_dir.empty()) {
    LoadedModel start = load_model(opt.start_dir);
    if (start.params.dim() != in.data.dim() || start.params.factors() != opt.q) {
      throw InputError("--start parameters do not match the data dimension and --q");
    }
    cfg.start = start.params;
  }
  const FitResult result = fit(in.data, cfg);

  const fs::path out(opt.out_dir);
  fs::create_directories(out);
  write_params(out, result.params);
  {
    std::ofstream trace(out / "loglik_trace.csv");
    trace << "iteration,loglik\n";
    for (std::size_t t = 0; t < result.loglik_trace.size(); ++t) {
      trace << t << ',' << io::format_double(result.loglik_trace[t]) << '\n';
    }
  }
  Json config{{"q", opt.q}, {"fit", fit_flags_json(opt.fit)}, {"start", opt.start_dir.empty() ? "spectral" : opt.start_dir}};
  Json extra{{"seed", nullptr},
             {"data", data_json(in)},
             {"result",
              {{"converged", result.converged},
               {"iterations", result.iterations},
               {"loglik", result.loglik_trace.back()},
               {"blocks", result.partition.size()}}}};
  write_run_manifest(out, "fit", argv, config, input_files(opt.input), started, extra);
  if (!result.converged) {
    warn("EM stopped at max-iter " + std::to_string(opt.fit.max_iter) + " without meeting tol");
    return kNotConverged;
  }
  return kOk;
}

int run_select(const SelectOptions& opt, unsigned threads, const std::vector<std::string>& argv) {
  const auto started = Clock::now();
  const io::Ingested in = load_data(opt.input);
  SelectionSettings settings;
  if (opt.criterion == "aic") {
    settings.criterion = Criterion::aic;
  } else if (opt.criterion == "cv") {
    settings.criterion = Criterion::cv;
  } else {
    throw InputError("--criterion must be aic or cv");
  }
  settings.folds = opt.folds;
  settings.seed = opt.seed;
  settings.threads = threads;
  std::vector<Index> grid;
  for (long q : parse_int_list(opt.q_grid)) {
    if (q < 1) throw InputError("--q-grid entries must be at least 1");
    grid.push_back(q);
  }
  const SelectionReport report = select_q(in.data, grid, settings, make_fit_config(opt.fit, 1));

  Json j;
  j["criterion"] = opt.criterion;
  if (settings.criterion == Criterion::cv) {
    j["folds"] = settings.folds;
    j["seed"] = settings.seed;
  }
  j["d"] = in.data.dim();
  j["grid"] = report.grid;
  j["risks"] = report.risks;
  j["logliks"] = report.logliks;
  j["chosen_q"] = report.chosen_q;
  if (settings.criterion == Criterion::cv) j["per_fold_nll"] = report.per_fold;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;

  const fs::path out(opt.out_dir);
  fs::create_directories(out);
  write_json(out / "selection_report.json", j);
  Json config{{"criterion", opt.criterion}, {"folds", opt.folds}, {"q_grid", opt.q_grid}, {"fit", fit_flags_json(opt.fit)}};
  write_run_manifest(out, "select", argv, config, input_files(opt.input), started,
                     Json{{"seed", opt.seed}, {"data", data_json(in)}});
  return kOk;
}

int run_bootstrap(const BootstrapOptions& opt, unsigned threads, const std::vector<std::string>& argv) {
  const auto started = Clock::now();
  if (opt.stat.size() < 2 || opt.stat.size() > 3) {
    throw InputError("--stat takes a name and one or two 1-based indices");
  }
  const io::Ingested in = load_data(opt.input);
  const Index d = in.data.dim();
  auto index_of = [](const std::string& s) {
    const auto v = parse_int_list(s);
    if (v.size() != 1) throw InputError("bad statistic index '" + s + "'");
    return static_cast<Index>(v[0] - 1);
  };
  const std::string& name = opt.stat[0];
  const Index i = index_of(opt.stat[1]);
  Index j = i;
  if (opt.stat.size() == 3) {
    j = index_of(opt.stat[2]);
  } else if (name != "psi") {
    throw InputError("statistic '" + name + "' needs two indices");
  }
  const Statistic g = named_statistic(name, i, j, d);

  FitConfig cfg = make_fit_config(opt.fit, std::max(opt.q, 1L));
  std::optional<FactorParams> mle;
  if (!opt.params_dir.empty()) {
    mle = load_model(opt.params_dir).params;
    if (mle->dim() != d) throw InputError("--params-dir dimension does not match the data");
    cfg.q = mle->factors();
  } else {
    if (opt.q < 1) throw InputError("--q is required when --params-dir is not given");
    mle = fit(in.data, cfg).params;
  }

  BootstrapSettings settings;
  settings.replicates = opt.replicates;
  settings.seed = opt.seed;
  settings.threads = threads;
  BootstrapReport report;
  if (opt.method == "parametric") {
    std::vector<Index> sizes;
    for (std::size_t k = 0; k < in.data.size(); ++k) sizes.push_back(in.data.samples(k));
    report = parametric_bootstrap(*mle, in.data.pattern(), sizes, g, settings, cfg);
  } else if (opt.method == "nonparametric") {
    report = nonparametric_bootstrap(in.data, g, settings, cfg);
  } else {
    throw InputError("--method must be parametric or nonparametric");
  }

  Json stat{{"name", name}, {"i", i + 1}};
  if (opt.stat.size() == 3) stat["j"] = j + 1;
  Json out_json{{"method", opt.method},
                {"statistic", stat},
                {"B", report.replicates},
                {"seed", opt.seed},
                {"estimate", g(*mle)},
                {"se", report.se},
                {"failures", report.failures},
                {"successful", report.theta_hats.size()},
                {"theta_hats", report.theta_hats}};
  const fs::path out(opt.out_dir);
  fs::create_directories(out);
  write_json(out / "bootstrap_report.json", out_json);
  Json config{{"method", opt.method}, {"B", opt.replicates}, {"q", cfg.q}, {"stat", opt.stat},
              {"params_dir", opt.params_dir}, {"fit", fit_flags_json(opt.fit)}};
  write_run_manifest(out, "bootstrap", argv, config, input_files(opt.input), started,
                     Json{{"seed", opt.seed}, {"data", data_json(in)}});
  return kOk;
}

int run_complete(const CompleteOptions& opt, unsigned /*threads*/, const std::vector<std::string>& argv) {
  const auto started = Clock::now();
  if (opt.input.empty() || opt.out.empty()) throw InputError("--input and --out are required");
  if (fs::path(opt.input).extension() == ".json") {
    throw InputError("complete reads a single CSV with missing cells, not a manifest");
  }
  const LoadedModel model = load_model(opt.params_dir);
  const io::CsvTable table = io::read_csv_table(opt.input);
  const Index d = model.params.dim();
  if (static_cast<Index>(table.header.size()) != d) {
    throw InputError("input has " + std::to_string(table.header.size()) + " columns but the model has " +
                     std::to_string(d) + " variables");
  }
  const Index n = static_cast<Index>(table.rows.size());
  Matrix completed(n, d);
  Matrix mask(n, d);
  Index predicted = 0;
  Index empty_rows = 0;
  for (Index r = 0; r < n; ++r) {
    const auto& row = table.rows[static_cast<std::size_t>(r)];
    IndexSet subset;
    for (Index c = 0; c < d; ++c) {
      if (row[static_cast<std::size_t>(c)]) subset.push_back(c);
    }
    Vector x(static_cast<Index>(subset.size()));
    for (std::size_t c = 0; c < subset.size(); ++c) {
      x(static_cast<Index>(c)) = *row[static_cast<std::size_t>(subset[c])] - model.means(subset[c]);
    }
    if (subset.empty()) ++empty_rows;
    const CompletedSample filled = complete_sample(model.params, subset, x);
    for (Index c = 0; c < d; ++c) {
      const bool pred = filled.predicted[static_cast<std::size_t>(c)];
      completed(r, c) = pred ? filled.values(c) + model.means(c) : *row[static_cast<std::size_t>(c)];
      mask(r, c) = pred ? 1.0 : 0.0;
      predicted += pred ? 1 : 0;
    }
  }
  if (empty_rows > 0) warn(std::to_string(empty_rows) + " row(s) had no observed values and were filled with means");

  const fs::path out(opt.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  io::write_csv_table(out, table.header, completed);
  const fs::path mask_path =
      opt.mask_out.empty() ? out.parent_path() / (out.stem().string() + "_mask.csv") : fs::path(opt.mask_out);
  {
    std::ofstream m(mask_path);
    for (std::size_t c = 0; c < table.header.size(); ++c) m << (c ? "," : "") << table.header[c];
    m << '\n';
    for (Index r = 0; r < n; ++r) {
      for (Index c = 0; c < d; ++c) m << (c ? "," : "") << (mask(r, c) != 0.0 ? 1 : 0);
      m << '\n';
    }
  }
  const fs::path manifest_dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
  write_run_manifest(manifest_dir, "complete", argv, Json{{"params_dir", opt.params_dir}},
                     {fs::path(opt.input), fs::path(opt.params_dir) / "lambda.csv", fs::path(opt.params_dir) / "psi.csv"},
                     started,
                     Json{{"seed", nullptr}, {"rows", n}, {"predicted_cells", predicted}, {"mask", mask_path.string()}});
  return kOk;
}

int run_graph(const GraphOptions& opt, unsigned /*threads*/, const std::vector<std::string>& argv) {
  const auto started = Clock::now();
  const LoadedModel model = load_model(opt.params_dir);
  const Index d = model.params.dim();
  const Index q = model.params.factors();
  if (opt.top < 0) throw InputError("--top must be non-negative");
  const bool partial = opt.kind == "partial";
  if (!partial && opt.kind != "factor") throw InputError("--kind must be partial or factor");
  const std::size_t available = partial ? static_cast<std::size_t>(d * (d - 1) / 2) : static_cast<std::size_t>(d * q);
  std::size_t top = static_cast<std::size_t>(opt.top);
  if (top > available) {
    warn("--top " + std::to_string(top) + " exceeds the " + std::to_string(available) + " available edges; clamped");
    top = available;
  }
  const GraphEdges graph = partial ? partial_correlation_graph(model.params, top) : factor_graph(model.params, top);
  if (graph.empty_graph) warn("all edge weights are zero (empty graph)");

  const fs::path out(opt.out_dir);
  fs::create_directories(out);
  {
    std::ofstream e(out / "edges.csv");
    e << "a,b,weight\n";
    for (const auto& edge : graph.edges) {
      e << edge.a + 1 << ',' << edge.b + 1 << ',' << io::format_double(edge.weight) << '\n';
    }
  }
  std::vector<fs::path> inputs{fs::path(opt.params_dir) / "lambda.csv", fs::path(opt.params_dir) / "psi.csv"};
  if (!opt.coords.empty()) {
    if (partial) throw InputError("--coords applies to factor graphs only");
    const Matrix coords = io::read_matrix_csv(opt.coords);
    const Matrix pos = factor_positions(factor_variable_correlations(model.params), coords);
    Matrix table(pos.rows(), pos.cols() + 1);
    for (Index j = 0; j < pos.rows(); ++j) table(j, 0) = static_cast<double>(j + 1);
    table.rightCols(pos.cols()) = pos;
    std::vector<std::string> header{"factor"};
    for (Index c = 0; c < pos.cols(); ++c) header.push_back(c == 0 ? "x" : c == 1 ? "y" : "c" + std::to_string(c + 1));
    std::ofstream f(out / "factor_positions.csv");
    for (std::size_t c = 0; c < header.size(); ++c) f << (c ? "," : "") << header[c];
    f << '\n';
    for (Index j = 0; j < pos.rows(); ++j) {
      f << j + 1;
      for (Index c = 0; c < pos.cols(); ++c) f << ',' << io::format_double(pos(j, c));
      f << '\n';
    }
    inputs.emplace_back(opt.coords);
  }
  write_run_manifest(out, "graph", argv, Json{{"kind", opt.kind}, {"top", opt.top}, {"coords", opt.coords}}, inputs,
                     started, Json{{"seed", nullptr}, {"edges", graph.edges.size()}, {"empty_graph", graph.empty_graph}});
  return kOk;
}

int run_simulate(const SimulateOptions& opt, unsigned threads, const std::vector<std::string>& argv) {
  const auto started = Clock::now();
  ExperimentConfig cfg;
  cfg.d = opt.d;
  cfg.q_true = opt.q;
  cfg.K = opt.K;
  cfg.n_total = opt.n;
  cfg.eta_target = opt.eta;
  cfg.seeds = parse_seeds(opt.seeds);
  cfg.methods.clear();
  {
    std::stringstream ss(opt.methods);
    std::string m;
    while (std::getline(ss, m, ',')) cfg.methods.push_back(parse_method(m));
  }
  if (!opt.q_grid.empty()) {
    for (long q : parse_int_list(opt.q_grid)) cfg.q_fit_grid.push_back(q);
  }
  cfg.fit = make_fit_config(opt.fit, opt.q);
  cfg.threads = threads;
  cfg.validate();

  const ObservationPattern pattern = build_pattern(cfg.d, cfg.K, cfg.eta_target);
  const ExperimentResults results = run_experiment(cfg);

  const fs::path out(opt.out_dir);
  fs::create_directories(out);
  {
    std::ofstream csv(out / "results.csv");
    csv << "seed,method,q_fit,eta,iterations,converged";
    for (const auto& name : metric_names()) csv << ',' << name;
    csv << ",status\n";
    for (const auto& r : results.records) {
      csv << r.seed << ',' << method_name(r.method) << ',' << r.q_fit << ',' << io::format_double(r.eta) << ','
          << r.iterations << ',' << (r.converged ? 1 : 0);
      for (const auto& name : metric_names()) csv << ',' << optional_cell(metric_value(r, name));
      csv << ',' << r.status << '\n';
    }
  }
  Json summary;
  summary["d"] = cfg.d;
  summary["q_true"] = cfg.q_true;
  summary["K"] = cfg.K;
  summary["n_total"] = cfg.n_total;
  summary["eta_target"] = cfg.eta_target;
  summary["eta_realized"] = PairSet(pattern).eta();
  summary["subsets"] = subsets_json(pattern);
  summary["replicates"] = cfg.seeds.size();
  Json methods;
  for (const auto& [method, metrics] : results.summaries) {
    Json mj;
    for (const auto& name : metric_names()) {
      const auto& s = metrics.at(name);
      mj[name] = {{"count", s.count}, {"mean", s.mean}, {"se", s.se}, {"ci_low", s.ci_low}, {"ci_high", s.ci_high}};
    }
    methods[method] = mj;
  }
  summary["methods"] = methods;
  write_json(out / "summary.json", summary);

  if (opt.emit_data) {
    for (auto seed : cfg.seeds) {
      const SimulatedData sim = simulate_replicate(cfg, pattern, seed);
      io::export_manifest(sim.data, io::default_names(cfg.d), out / "data" / ("seed_" + std::to_string(seed)));
    }
  }

  Json timings = Json::array();
  for (const auto& r : results.records) {
    timings.push_back({{"seed", r.seed}, {"method", method_name(r.method)}, {"wall_seconds", r.wall_seconds}});
  }
  Json config{{"d", opt.d},       {"q", opt.q},           {"K", opt.K},
              {"n", opt.n},       {"eta", opt.eta},       {"seeds", opt.seeds},
              {"methods", opt.methods}, {"q_grid", opt.q_grid}, {"fit", fit_flags_json(opt.fit)}};
  write_run_manifest(out, "simulate", argv, config, {}, started,
                     Json{{"seed", opt.seeds}, {"record_timings", timings}});
  return kOk;
}

}  // namespace linfa::cli
