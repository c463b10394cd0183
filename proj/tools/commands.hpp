#ifndef LINFA_TOOLS_COMMANDS_HPP
#define LINFA_TOOLS_COMMANDS_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace linfa::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kNumeric = 2, kNotConverged = 3 };

struct FitFlags {
  double tol = 1e-8;
  int max_iter = 1000;
  double psi_floor = 1e-6;
};

struct FitOptions {
  std::string input;
  long q = 0;
  FitFlags fit;
  std::string start_dir;
  std::string out_dir = ".";
};

struct SelectOptions {
  std::string input;
  std::string criterion = "aic";
  int folds = 2;
  std::string q_grid = "1:5";
  std::uint64_t seed = 0;
  FitFlags fit;
  std::string out_dir = ".";
};

struct BootstrapOptions {
  std::string input;
  long q = 0;
  std::string method = "parametric";
  int replicates = 1000;
  std::uint64_t seed = 0;
  std::vector<std::string> stat;
  std::string params_dir;
  FitFlags fit;
  std::string out_dir = ".";
};

struct CompleteOptions {
  std::string input;
  std::string params_dir;
  std::string out;
  std::string mask_out;
};

struct GraphOptions {
  std::string params_dir;
  std::string kind = "partial";
  long top = 400;
  std::string coords;
  std::string out_dir = ".";
};

struct SimulateOptions {
  long d = 50;
  long q = 2;
  long K = 3;
  long n = 1000;
  double eta = 0.3;
  std::string seeds = "20";
  std::string methods = "linfa,sffa";
  std::string q_grid;
  FitFlags fit;
  bool emit_data = false;
  std::string out_dir = ".";
};

/// "a:b" (inclusive range), "a,b,c", or a single value.
std::vector<long> parse_int_list(const std::string& text);

/// A single integer N means seeds 1..N; otherwise as parse_int_list.
std::vector<std::uint64_t> parse_seeds(const std::string& text);

int run_fit(const FitOptions& opt, unsigned threads, const std::vector<std::string>& argv);
int run_select(const SelectOptions& opt, unsigned threads, const std::vector<std::string>& argv);
int run_bootstrap(const BootstrapOptions& opt, unsigned threads, const std::vector<std::string>& argv);
int run_complete(const CompleteOptions& opt, unsigned threads, const std::vector<std::string>& argv);
int run_graph(const GraphOptions& opt, unsigned threads, const std::vector<std::string>& argv);
int run_simulate(const SimulateOptions& opt, unsigned threads, const std::vector<std::string>& argv);

}  // namespace linfa::cli

#endif  // LINFA_TOOLS_COMMANDS_HPP
