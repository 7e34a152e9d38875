#include "hlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "hlab/corrector.hpp"

namespace hlab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  try {
    const auto slash = s.find('/');
    std::size_t used = 0;
    if (slash != std::string::npos) {
      const std::string a = trim(s.substr(0, slash)), b = trim(s.substr(slash + 1));
      const double num = std::stod(a, &used);
      if (used != a.size()) throw std::invalid_argument(s);
      const double den = std::stod(b, &used);
      if (used != b.size() || den == 0.0) throw std::invalid_argument(s);
      return num / den;
    }
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + s + "'");
  }
}

int parse_int(const std::string& key, const std::string& raw) {
  const double v = parse_number(key, raw);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError("config: " + key + " must be an integer");
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used, 0);
    if (used != s.size() || s.front() == '-') throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad unsigned integer for " + key + ": '" + s + "'");
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

LevelStat mean_of(const std::vector<double>& xs) {
  LevelStat s;
  if (xs.empty()) return s;
  const double n = static_cast<double>(xs.size());
  double a = 0.0;
  for (double x : xs) a += x;
  s.mean = a / n;
  if (xs.size() > 1) {
    double v = 0.0;
    for (double x : xs) v += (x - s.mean) * (x - s.mean);
    s.stderr_ = std::sqrt(v / (n - 1.0) / n);
  }
  return s;
}

// sqrt(E x^2) with a delta-method standard error.
LevelStat rms_of(const std::vector<double>& xs) {
  std::vector<double> sq;
  for (double x : xs) sq.push_back(x * x);
  const LevelStat m = mean_of(sq);
  LevelStat s;
  s.mean = std::sqrt(m.mean);
  s.stderr_ = s.mean > 0.0 ? m.stderr_ / (2.0 * s.mean) : 0.0;
  return s;
}

nlohmann::ordered_json stat_json(const LevelStat& s) {
  nlohmann::ordered_json j;
  j["mean"] = s.mean;
  j["stderr"] = s.stderr_;
  return j;
}

struct MetricSeries {
  const char* name;
  LevelStat LevelSummary::*field;
  bool squared = false;
};

constexpr MetricSeries kSeries[] = {
    {"l2_err", &LevelSummary::l2_err},
    {"h1_exp_err", &LevelSummary::h1_exp_err},
    {"grad_corr_err", &LevelSummary::grad_corr_err},
    {"eps_u1_sq", &LevelSummary::eps_u1_sq, true},
    {"eps_grad_u1_sq", &LevelSummary::eps_grad_u1_sq, true},
};

}  // namespace

std::string to_string(RhoSource s) { return s == RhoSource::disc ? "disc" : "continuum"; }

void ExperimentConfig::validate() const {
  if (dim < 3 || dim > 5) throw ConfigError("config: dim must be 3, 4 or 5");
  if (n < 2 || (n & (n - 1)) != 0) throw ConfigError("config: n must be a power of two");
  if (!(length > 0.0)) throw ConfigError("config: length must be positive");
  if (ladder.empty()) throw ConfigError("config: empty eps ladder");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (!(ladder[i] > 0.0)) throw ConfigError("config: ladder entries must be positive");
    if (i > 0 && !(ladder[i] < ladder[i - 1])) throw ConfigError("config: ladder must be strictly decreasing");
  }
  if (seeds < 4) throw ConfigError("config: seeds must be >= 4");
  if (modes < 1) throw ConfigError("config: modes_M must be positive");
  try {
    model.validate();
    solver.validate();
    const TorusGrid g = grid();
    for (double e : ladder) check_resolution(g, e);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["grid"] = {{"dim", dim}, {"n", n}, {"length", length}};
  j["model"] = {{"family", to_string(model.family)}, {"sigma2", model.sigma2}, {"k_max", model.k_max},
                {"gamma", model.gamma},           {"mode", to_string(mode)},    {"modes_M", modes}};
  j["solver"] = {{"tol", solver.tolerance}, {"max_iter", solver.max_iterations}, {"restart", solver.restart}};
  j["campaign"] = {{"ladder", ladder},
                   {"seeds", seeds},
                   {"master_seed", master_seed},
                   {"rho_source", to_string(rho_source)}};
  return j;
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "grid" && section != "model" && section != "solver" && section != "campaign")
        throw ConfigError("config: unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    const std::string full = section + "." + key;

    if (full == "grid.dim") c.dim = parse_int(full, val);
    else if (full == "grid.n") c.n = parse_int(full, val);
    else if (full == "grid.length") c.length = parse_number(full, val);
    else if (full == "model.family") c.model.family = parse_family(val);
    else if (full == "model.sigma2") c.model.sigma2 = parse_number(full, val);
    else if (full == "model.k_max") c.model.k_max = parse_number(full, val);
    else if (full == "model.gamma") c.model.gamma = parse_number(full, val);
    else if (full == "model.mode") c.mode = parse_mode(val);
    else if (full == "model.modes_M") c.modes = parse_int(full, val);
    else if (full == "solver.tol") c.solver.tolerance = parse_number(full, val);
    else if (full == "solver.max_iter") c.solver.max_iterations = parse_int(full, val);
    else if (full == "solver.restart") c.solver.restart = parse_int(full, val);
    else if (full == "campaign.ladder") {
      c.ladder.clear();
      std::stringstream ss(val);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (trim(item).empty()) continue;
        c.ladder.push_back(parse_number(full, item));
      }
    } else if (full == "campaign.seeds") c.seeds = parse_int(full, val);
    else if (full == "campaign.master_seed") c.master_seed = parse_u64(full, val);
    else if (full == "campaign.rho_source") {
      if (val == "disc") c.rho_source = RhoSource::disc;
      else if (val == "continuum") c.rho_source = RhoSource::continuum;
      else throw ConfigError("config: rho_source must be disc or continuum");
    } else if (full == "campaign.output") c.output = val;
    else throw ConfigError("config: unknown key '" + key + "'" + (section.empty() ? "" : " in [" + section + "]"));
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  return parse_config(in);
}

std::uint64_t cell_seed(std::uint64_t master, int dim, int eps_index, int replicate) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(dim));
  h = splitmix64(h ^ static_cast<std::uint64_t>(eps_index));
  return splitmix64(h ^ static_cast<std::uint64_t>(replicate));
}

double energy_identity_tolerance(const SolverConfig& solver) { return 100.0 * solver.tolerance; }

ExperimentRecord run_campaign(const ExperimentConfig& cfg, int threads) {
  cfg.validate();
  const TorusGrid grid = cfg.grid();
  const SpectralField f = default_source(grid);

  ExperimentRecord rec;
  rec.config = cfg;
  const int levels = static_cast<int>(cfg.ladder.size());

  std::vector<HomogSolution> homog;
  std::vector<double> rhos;
  double rho_cont = 0.0;
  if (cfg.rho_source == RhoSource::continuum) rho_cont = rho_spectral(cfg.model, cfg.dim);
  for (double eps : cfg.ladder) {
    const double rho = cfg.rho_source == RhoSource::disc ? rho_discrete(cfg.model, grid, eps) : rho_cont;
    rhos.push_back(rho);
    homog.push_back(solve_homogenized(f, rho));
  }

  const std::size_t total = static_cast<std::size_t>(levels) * static_cast<std::size_t>(cfg.seeds);
  rec.cells.resize(total);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&]() {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= total) return;
      CellResult& cell = rec.cells[idx];
      cell.eps_index = static_cast<int>(idx / static_cast<std::size_t>(cfg.seeds));
      cell.replicate = static_cast<int>(idx % static_cast<std::size_t>(cfg.seeds));
      cell.eps = cfg.ladder[static_cast<std::size_t>(cell.eps_index)];
      cell.seed = cell_seed(cfg.master_seed, cfg.dim, cell.eps_index, cell.replicate);
      try {
        const FieldRealization real = synthesize(cfg.model, grid, cell.eps, cell.seed, cfg.mode, cfg.modes);
        const CorrectorBundle bundle = solve_corrector(real);
        const HeteroSolution sol = solve_hetero(bundle.potential, f, cfg.solver, cell.seed);
        cell.metrics = error_metrics(sol, homog[static_cast<std::size_t>(cell.eps_index)], bundle);
        cell.iterations = sol.iterations;
        cell.residual = sol.residual;
        cell.real_identity_error = sol.energy.real_identity_error();
        cell.imag_balance_error = sol.energy.imag_balance_error();
        cell.apriori = sol.energy.apriori_holds(cfg.solver.tolerance);
      } catch (const SolverStagnation& e) {
        cell.failed = true;
        cell.failure = e.what();
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(total);
        return;
      }
    }
  };

  const int nthreads = std::max(1, std::min<int>(threads, static_cast<int>(total)));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  const double id_tol = energy_identity_tolerance(cfg.solver);
  for (const auto& c : rec.cells) {
    if (c.failed) {
      ++rec.failed_cells;
      continue;
    }
    if (c.residual > cfg.solver.tolerance || c.real_identity_error > id_tol || c.imag_balance_error > id_tol ||
        !c.apriori) {
      std::ostringstream os;
      os << "energy identity violated at eps=" << c.eps << " seed=" << c.seed << ": residual " << c.residual
         << ", real identity " << c.real_identity_error << ", imaginary balance " << c.imag_balance_error
         << ", a-priori " << (c.apriori ? "ok" : "violated");
      throw CampaignFailure(os.str());
    }
  }
  if (10 * rec.failed_cells > total)
    throw CampaignFailure("campaign failed: " + std::to_string(rec.failed_cells) + " of " + std::to_string(total) +
                          " cells did not converge");

  for (int l = 0; l < levels; ++l) {
    LevelSummary s;
    s.eps = cfg.ladder[static_cast<std::size_t>(l)];
    s.rho = rhos[static_cast<std::size_t>(l)];
    std::vector<double> a, b, c, d, e;
    for (const auto& cell : rec.cells) {
      if (cell.eps_index != l || cell.failed) continue;
      a.push_back(cell.metrics.l2_err);
      b.push_back(cell.metrics.h1_exp_err);
      c.push_back(cell.metrics.grad_corr_err);
      d.push_back(cell.metrics.eps_u1_l2 * cell.metrics.eps_u1_l2);
      e.push_back(cell.metrics.eps_grad_u1_l2 * cell.metrics.eps_grad_u1_l2);
    }
    s.cells = a.size();
    s.l2_err = rms_of(a);
    s.h1_exp_err = rms_of(b);
    s.grad_corr_err = rms_of(c);
    s.eps_u1_sq = mean_of(d);
    s.eps_grad_u1_sq = mean_of(e);
    rec.levels.push_back(s);
  }

  // below this a level mean is rounding noise; treat it as zero so the fit is undefined
  const double floor = 1e-13 * norm(f, NormKind::Hminus1);
  for (const auto& series : kSeries) {
    const double cut = series.squared ? floor * floor : floor;
    std::vector<RatePoint> pts;
    for (const auto& s : rec.levels) {
      const LevelStat& st = s.*series.field;
      pts.push_back({s.eps, st.mean > cut ? st.mean : 0.0, st.stderr_});
    }
    try {
      rec.fits[series.name] = fit_rate(pts);
    } catch (const DegenerateFit&) {
      rec.fits[series.name] = std::nullopt;
    }
  }
  return rec;
}

nlohmann::ordered_json summary_json(const ExperimentRecord& rec) {
  nlohmann::ordered_json j;
  j["tool_version"] = kToolVersion;
  j["config"] = rec.config.to_json();
  j["cells"] = {{"total", rec.cells.size()}, {"failed", rec.failed_cells}};

  double max_real = 0.0, max_imag = 0.0;
  bool apriori = true;
  int max_iter = 0;
  for (const auto& c : rec.cells) {
    if (c.failed) continue;
    max_real = std::max(max_real, c.real_identity_error);
    max_imag = std::max(max_imag, c.imag_balance_error);
    apriori = apriori && c.apriori;
    max_iter = std::max(max_iter, c.iterations);
  }
  j["energy"] = {{"max_real_identity_error", max_real},
                 {"max_imag_balance_error", max_imag},
                 {"apriori_bound_all_cells", apriori},
                 {"max_iterations", max_iter}};

  nlohmann::ordered_json levels = nlohmann::ordered_json::array();
  for (const auto& s : rec.levels) {
    nlohmann::ordered_json l;
    l["eps"] = s.eps;
    l["rho"] = s.rho;
    l["cells"] = s.cells;
    for (const auto& series : kSeries) l[series.name] = stat_json(s.*series.field);
    levels.push_back(l);
  }
  j["levels"] = levels;

  nlohmann::ordered_json rho;
  rho["source"] = to_string(rec.config.rho_source);
  rho["values"] = nlohmann::ordered_json::array();
  for (const auto& s : rec.levels) rho["values"].push_back(s.rho);
  j["rho"] = rho;

  nlohmann::ordered_json fits;
  for (const auto& series : kSeries) {
    const auto it = rec.fits.find(series.name);
    if (it == rec.fits.end() || !it->second) {
      fits[series.name] = "undefined";
      continue;
    }
    const RateFit& r = *it->second;
    fits[series.name] = {{"slope", r.slope},
                         {"intercept", r.intercept},
                         {"ci", r.ci},
                         {"weighted", r.weighted},
                         {"rms_residual", r.rms_residual},
                         {"eps_sqrt_log_model", {{"log_c", r.log_corrected_log_c}, {"rms", r.log_corrected_rms}}}};
  }
  j["fits"] = fits;
  return j;
}

void emit_report(const ExperimentRecord& rec, const std::filesystem::path& dir) {
  if (rec.config.ladder.empty() || rec.levels.empty()) throw ConfigError("config: empty eps ladder");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    return out;
  };

  {
    auto out = open("results.csv");
    out << "d,eps,seed,l2_err,h1_exp_err,grad_corr_err,eps_u1_l2,iters,residual\n";
    for (const auto& c : rec.cells) {
      out << rec.config.dim << ',' << num(c.eps) << ',' << c.seed << ',';
      if (c.failed) {
        out << "nan,nan,nan,nan," << c.iterations << ",nan\n";
        continue;
      }
      out << num(c.metrics.l2_err) << ',' << num(c.metrics.h1_exp_err) << ',' << num(c.metrics.grad_corr_err) << ','
          << num(c.metrics.eps_u1_l2) << ',' << c.iterations << ',' << num(c.residual) << '\n';
    }
    if (!out) throw IoError("write failed: results.csv");
  }
  {
    auto out = open("summary.json");
    out << summary_json(rec).dump(2) << '\n';
    if (!out) throw IoError("write failed: summary.json");
  }
  {
    auto out = open("plotdata.csv");
    out << "metric,eps,log_eps,mean,stderr,log_mean,fit_log_mean\n";
    for (const auto& series : kSeries) {
      const auto it = rec.fits.find(series.name);
      for (const auto& s : rec.levels) {
        const LevelStat& st = s.*series.field;
        out << series.name << ',' << num(s.eps) << ',' << num(std::log(s.eps)) << ',' << num(st.mean) << ','
            << num(st.stderr_) << ',';
        out << (st.mean > 0.0 ? num(std::log(st.mean)) : std::string("nan")) << ',';
        if (it != rec.fits.end() && it->second)
          out << num(it->second->intercept + it->second->slope * std::log(s.eps));
        else
          out << "nan";
        out << '\n';
      }
    }
    if (!out) throw IoError("write failed: plotdata.csv");
  }
}

}  // namespace hlab
