#include "commands.hpp"

#include "linfa/core.hpp"
#include "linfa/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

namespace {

using namespace linfa::cli;

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--tol", f.tol, "relative log-likelihood tolerance")->capture_default_str();
  cmd->add_option("--max-iter", f.max_iter, "EM iteration cap")->capture_default_str();
  cmd->add_option("--psi-floor", f.psi_floor, "lower bound on uniquenesses")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Linked factor analysis over partially overlapping datasets"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  unsigned threads = linfa::default_threads();
  app.add_option("--threads", threads, "worker threads for select, bootstrap and simulate")->capture_default_str();

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "maximum-likelihood fit for a fixed number of factors");
  fit_cmd->add_option("--input", fit.input, "CSV with missing cells, or a .json pattern manifest")->required();
  fit_cmd->add_option("--q", fit.q, "number of factors")->required();
  fit_cmd->add_option("--start", fit.start_dir, "directory with lambda.csv and psi.csv to start from");
  fit_cmd->add_option("--out-dir,--out", fit.out_dir, "output directory")->capture_default_str();
  add_fit_flags(fit_cmd, fit.fit);

  SelectOptions sel;
  auto* sel_cmd = app.add_subcommand("select", "choose the number of factors");
  sel_cmd->add_option("--input", sel.input)->required();
  sel_cmd->add_option("--criterion", sel.criterion, "aic or cv")->capture_default_str();
  sel_cmd->add_option("--folds", sel.folds)->capture_default_str();
  sel_cmd->add_option("--q-grid", sel.q_grid, "a:b or a,b,c")->capture_default_str();
  sel_cmd->add_option("--seed", sel.seed)->capture_default_str();
  sel_cmd->add_option("--out-dir,--out", sel.out_dir)->capture_default_str();
  add_fit_flags(sel_cmd, sel.fit);

  BootstrapOptions boot;
  auto* boot_cmd = app.add_subcommand("bootstrap", "bootstrap standard error of a scalar statistic");
  boot_cmd->add_option("--input", boot.input)->required();
  boot_cmd->add_option("--q", boot.q, "number of factors (when fitting here)");
  boot_cmd->add_option("--method", boot.method, "parametric or nonparametric")->capture_default_str();
  boot_cmd->add_option("--B", boot.replicates, "replicates")->capture_default_str();
  boot_cmd->add_option("--seed", boot.seed)->capture_default_str();
  boot_cmd->add_option("--stat", boot.stat, "NAME I [J] with 1-based indices; NAME in sigma, psi, correlation, "
                                            "fisher-correlation, partial-correlation")
      ->required()
      ->expected(2, 3);
  boot_cmd->add_option("--params-dir", boot.params_dir, "fitted model to use as the point estimate");
  boot_cmd->add_option("--out-dir,--out", boot.out_dir)->capture_default_str();
  add_fit_flags(boot_cmd, boot.fit);

  CompleteOptions comp;
  auto* comp_cmd = app.add_subcommand("complete", "fill missing cells by factor prediction");
  comp_cmd->add_option("--input", comp.input, "CSV with missing cells")->required();
  comp_cmd->add_option("--params-dir", comp.params_dir)->required();
  comp_cmd->add_option("--out", comp.out, "completed CSV")->required();
  comp_cmd->add_option("--mask-out", comp.mask_out, "predicted-cell mask (default <out>_mask.csv)");

  GraphOptions graph;
  auto* graph_cmd = app.add_subcommand("graph", "edge lists for partial-correlation or factor graphs");
  graph_cmd->add_option("--params-dir", graph.params_dir)->required();
  graph_cmd->add_option("--kind", graph.kind, "partial or factor")->capture_default_str();
  graph_cmd->add_option("--top", graph.top)->capture_default_str();
  graph_cmd->add_option("--coords", graph.coords, "headerless d x 2 variable coordinates");
  graph_cmd->add_option("--out-dir,--out", graph.out_dir)->capture_default_str();

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "simulation study against the single-fill baseline");
  sim_cmd->add_option("--d", sim.d)->capture_default_str();
  sim_cmd->add_option("--q", sim.q)->capture_default_str();
  sim_cmd->add_option("--K", sim.K)->capture_default_str();
  sim_cmd->add_option("--n", sim.n, "total samples")->capture_default_str();
  sim_cmd->add_option("--eta", sim.eta, "target unobserved pair fraction")->capture_default_str();
  sim_cmd->add_option("--seeds", sim.seeds, "N for seeds 1..N, or a list")->capture_default_str();
  sim_cmd->add_option("--methods", sim.methods)->capture_default_str();
  sim_cmd->add_option("--q-grid", sim.q_grid, "fitted q values (several: chosen by AIC)");
  sim_cmd->add_flag("--emit-data", sim.emit_data, "write each replicate's datasets");
  sim_cmd->add_option("--out-dir,--out", sim.out_dir)->capture_default_str();
  add_fit_flags(sim_cmd, sim.fit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (threads == 0) threads = 1;

  try {
    if (fit_cmd->parsed()) return run_fit(fit, threads, args);
    if (sel_cmd->parsed()) return run_select(sel, threads, args);
    if (boot_cmd->parsed()) return run_bootstrap(boot, threads, args);
    if (comp_cmd->parsed()) return run_complete(comp, threads, args);
    if (graph_cmd->parsed()) return run_graph(graph, threads, args);
    if (sim_cmd->parsed()) return run_simulate(sim, threads, args);
  } catch (const linfa::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const linfa::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << '\n';
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
  return kUsage;
}
