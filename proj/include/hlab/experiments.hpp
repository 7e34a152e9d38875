#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hlab/errors.hpp"
#include "hlab/fit.hpp"
#include "hlab/hetero_solver.hpp"
#include "hlab/random_field.hpp"

namespace hlab {

inline constexpr const char* kToolVersion = "hlab 0.1.0";

enum class RhoSource { disc, continuum };
std::string to_string(RhoSource s);

/// Campaign description. Text form:
///
///   [grid]      dim, n, length
///   [model]     family, sigma2, k_max, gamma, mode, modes_M
///   [solver]    tol, max_iter, restart
///   [campaign]  ladder, seeds, master_seed, rho_source, output
///
/// one `key = value` per line, `#` starts a comment, ladder entries are
/// comma separated and may be written as fractions (1/8).
struct ExperimentConfig {
  int dim = 3;
  int n = 128;
  double length = 2.0;
  SpectrumModel model;
  SynthesisMode mode = SynthesisMode::random_phase;
  int modes = kDefaultRandomPhaseModes;
  SolverConfig solver;
  std::vector<double> ladder{0.5, 0.25, 0.125};
  int seeds = 16;
  std::uint64_t master_seed = 20240611;
  RhoSource rho_source = RhoSource::disc;
  std::string output = "out";

  TorusGrid grid() const { return TorusGrid(dim, n, length); }
  /// Throws ConfigError on an empty or non-decreasing ladder, seeds < 4,
  /// unsupported dimension, or a ladder entry violating the resolution rule.
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// splitmix64 chain over (master, d, eps index, replicate).
std::uint64_t cell_seed(std::uint64_t master, int dim, int eps_index, int replicate);

struct CellResult {
  int eps_index = 0;
  int replicate = 0;
  double eps = 0.0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  ErrorMetrics metrics;
  int iterations = 0;
  double residual = 0.0;
  double real_identity_error = 0.0;
  double imag_balance_error = 0.0;
  bool apriori = true;
};

struct LevelStat {
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct LevelSummary {
  double eps = 0.0;
  double rho = 0.0;
  std::size_t cells = 0;
  // Root-mean-square over the ensemble, i.e. the L2(ensemble x grid) norm.
  LevelStat l2_err;
  LevelStat h1_exp_err;
  LevelStat grad_corr_err;
  // Ensemble means of squared norms.
  LevelStat eps_u1_sq;
  LevelStat eps_grad_u1_sq;
};

struct ExperimentRecord {
  ExperimentConfig config;
  std::vector<CellResult> cells;  ///< sorted by (eps index, replicate)
  std::vector<LevelSummary> levels;
  std::map<std::string, std::optional<RateFit>> fits;  ///< empty optional: slope undefined
  std::size_t failed_cells = 0;
};

class CampaignFailure : public Error {
 public:
  using Error::Error;
};

/// Identity tolerance re-asserted on every solved cell.
double energy_identity_tolerance(const SolverConfig& solver);

/// Runs every (eps, replicate) cell on `threads` workers. Output is
/// independent of the thread count. Throws CampaignFailure when more than
/// 10% of cells fail or any solved cell violates the energy identities.
ExperimentRecord run_campaign(const ExperimentConfig& cfg, int threads = 1);

/// Writes results.csv, summary.json and plotdata.csv into `dir`.
void emit_report(const ExperimentRecord& record, const std::filesystem::path& dir);

nlohmann::ordered_json summary_json(const ExperimentRecord& record);

}  // namespace hlab
