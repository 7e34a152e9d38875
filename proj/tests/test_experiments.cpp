#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hlab/errors.hpp"
#include "hlab/experiments.hpp"

using namespace hlab;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(
# tiny campaign
[grid]
dim = 3
n = 32
length = 1

[model]
family = band-limited-flat
sigma2 = 1
k_max = 6.283185307179586
mode = random-phase
modes_M = 128

[solver]
tol = 1e-8
max_iter = 300
restart = 30

[campaign]
ladder = 1/2, 0.35355339, 1/4
seeds = 4
master_seed = 7
rho_source = disc
)";

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "hlab_experiment_tests" / name;
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, ParsesAllSections) {
  const auto c = parse(kSmall);
  EXPECT_EQ(c.dim, 3);
  EXPECT_EQ(c.n, 32);
  EXPECT_EQ(c.modes, 128);
  EXPECT_EQ(c.solver.restart, 30);
  ASSERT_EQ(c.ladder.size(), 3u);
  EXPECT_DOUBLE_EQ(c.ladder[0], 0.5);
  EXPECT_DOUBLE_EQ(c.ladder[2], 0.25);
  EXPECT_EQ(c.master_seed, 7u);
  EXPECT_EQ(c.mode, SynthesisMode::random_phase);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse(std::string(kSmall) + "colour = red\n"), ConfigError);
  EXPECT_THROW(parse("[mystery]\n"), ConfigError);
  EXPECT_THROW(parse("[grid]\nn = sixteen\n"), ConfigError);
  EXPECT_THROW(parse("[grid]\nn = 32\nlength = 1\n[campaign]\nladder = \n"), ConfigError);
  EXPECT_THROW(parse("[grid]\nn = 32\nlength = 1\n[campaign]\nladder = 0.25, 0.5\n"), ConfigError);
  EXPECT_THROW(parse("[grid]\nn = 32\nlength = 1\n[campaign]\nladder = 0.5\nseeds = 3\n"), ConfigError);
  EXPECT_THROW(parse("[grid]\nn = 32\nlength = 1\n[campaign]\nladder = 0.125\n"), ConfigError);
  EXPECT_THROW(parse("[grid]\ndim = 2\n"), ConfigError);
}

TEST(Config, CellSeedsAreStableAndDistinct) {
  EXPECT_EQ(cell_seed(1, 3, 0, 0), cell_seed(1, 3, 0, 0));
  std::set<std::uint64_t> seen;
  for (int d = 3; d <= 5; ++d)
    for (int e = 0; e < 3; ++e)
      for (int r = 0; r < 16; ++r) seen.insert(cell_seed(99, d, e, r));
  EXPECT_EQ(seen.size(), 3u * 3u * 16u);
  EXPECT_NE(cell_seed(1, 3, 0, 0), cell_seed(2, 3, 0, 0));
}

TEST(Campaign, ReportIsDeterministicAcrossThreadCounts) {
  const auto cfg = parse(kSmall);
  const auto a = run_campaign(cfg, 1);
  const auto b = run_campaign(cfg, 2);
  const auto da = scratch("serial"), db = scratch("parallel");
  emit_report(a, da);
  emit_report(b, db);
  for (const char* f : {"results.csv", "summary.json", "plotdata.csv"}) EXPECT_EQ(slurp(da / f), slurp(db / f)) << f;

  std::istringstream csv(slurp(da / "results.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "d,eps,seed,l2_err,h1_exp_err,grad_corr_err,eps_u1_l2,iters,residual");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 3 * 4);
  EXPECT_EQ(a.cells.size(), 12u);
  EXPECT_EQ(a.failed_cells, 0u);
  for (const auto& c : a.cells) {
    EXPECT_LE(c.residual, cfg.solver.tolerance);
    EXPECT_TRUE(c.apriori);
  }
  const auto summary = nlohmann::json::parse(slurp(da / "summary.json"));
  EXPECT_EQ(summary["tool_version"], kToolVersion);
  EXPECT_TRUE(summary["fits"]["l2_err"].is_object());
  EXPECT_EQ(summary["rho"]["values"].size(), 3u);
}

TEST(Campaign, ZeroVarianceHasZeroErrorsAndUndefinedSlopes) {
  auto cfg = parse(kSmall);
  cfg.model.sigma2 = 0.0;
  const auto rec = run_campaign(cfg);
  for (const auto& c : rec.cells) {
    EXPECT_LT(c.metrics.l2_err, 1e-9);
    EXPECT_LT(c.metrics.grad_corr_err, 1e-9);
  }
  EXPECT_FALSE(rec.fits.at("l2_err").has_value());
  EXPECT_EQ(summary_json(rec)["fits"]["l2_err"], "undefined");
}

TEST(Campaign, TooManyFailedCellsAbort) {
  auto cfg = parse(kSmall);
  cfg.solver.max_iterations = 1;
  cfg.solver.restart = 1;
  EXPECT_THROW(run_campaign(cfg), CampaignFailure);
}

TEST(Campaign, InvalidConfigRejectedBeforeWriting) {
  auto cfg = parse(kSmall);
  cfg.ladder.clear();
  EXPECT_THROW(run_campaign(cfg), ConfigError);
  ExperimentRecord empty;
  empty.config.ladder.clear();
  const auto dir = scratch("empty");
  EXPECT_THROW(emit_report(empty, dir), ConfigError);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Campaign, UnwritablePath) {
  const auto cfg = parse(kSmall);
  ExperimentRecord rec;
  rec.config = cfg;
  rec.levels.resize(1);
  const auto blocker = scratch("blocker");
  fs::create_directories(blocker.parent_path());
  std::ofstream(blocker) << "x";
  EXPECT_THROW(emit_report(rec, blocker / "sub"), IoError);
}
