#include "hlab/random_field.hpp"

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <random>

#include "hlab/errors.hpp"

namespace hlab {

namespace {

constexpr double kPi = std::numbers::pi;

double ball_volume(int d) { return std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d + 1.0); }

// Integrates g(r) over [0, support] (or [0, inf) for unbounded support).
template <class F>
double radial_integral(const SpectrumModel& m, F&& g) {
  if (m.family == SpectrumFamily::gaussian_bump) {
    boost::math::quadrature::exp_sinh<double> integrator;
    return integrator.integrate(g, 0.0, std::numeric_limits<double>::infinity(), 1e-13);
  }
  boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate(g, 0.0, m.k_max, 1e-13);
}

// R_hat(r) r^(d-3) dr for the power law after r = k_max t^2, written so that
// no 0 * inf product appears near t = 0.
double power_law_rho_integrand(const SpectrumModel& m, int dim, double t) {
  const double amp = m.sigma2 * m.gamma / (unit_sphere_area(dim) * std::pow(m.k_max, m.gamma));
  return amp * 2.0 * std::pow(m.k_max, m.gamma - 2.0) * std::pow(t, 2.0 * m.gamma - 5.0);
}

// Minimal-image distance of a lag slot, in units of h.
double lag_distance_cells(const TorusGrid& g, std::size_t linear) {
  double s = 0.0;
  const int n = g.points_per_axis();
  for (int a = 0; a < g.dim(); ++a) {
    int i = g.axis_index(linear, a);
    if (i > n / 2) i = n - i;
    s += static_cast<double>(i) * i;
  }
  return std::sqrt(s);
}

std::size_t lag_slot(const TorusGrid& g, std::size_t from, std::size_t to) {
  const int n = g.points_per_axis();
  std::size_t out = 0;
  for (int a = 0; a < g.dim(); ++a) {
    const int d = ((g.axis_index(to, a) - g.axis_index(from, a)) % n + n) % n;
    out += static_cast<std::size_t>(d) * g.stride(a);
  }
  return out;
}

}  // namespace

std::string to_string(SpectrumFamily f) {
  switch (f) {
    case SpectrumFamily::band_limited_flat: return "band-limited-flat";
    case SpectrumFamily::gaussian_bump: return "gaussian-bump";
    case SpectrumFamily::power_law_cutoff: return "power-law-cutoff";
  }
  return "?";
}

std::string to_string(SynthesisMode m) { return m == SynthesisMode::gaussian ? "gaussian" : "random-phase"; }

SpectrumFamily parse_family(const std::string& s) {
  if (s == "band-limited-flat") return SpectrumFamily::band_limited_flat;
  if (s == "gaussian-bump") return SpectrumFamily::gaussian_bump;
  if (s == "power-law-cutoff") return SpectrumFamily::power_law_cutoff;
  throw ConfigError("unknown spectrum family '" + s + "'");
}

SynthesisMode parse_mode(const std::string& s) {
  if (s == "gaussian") return SynthesisMode::gaussian;
  if (s == "random-phase") return SynthesisMode::random_phase;
  throw ConfigError("unknown synthesis mode '" + s + "'");
}

double unit_sphere_area(int dim) { return 2.0 * std::pow(kPi, 0.5 * dim) / std::tgamma(0.5 * dim); }

void SpectrumModel::validate() const {
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw InvalidSpectrum("invalid spectrum: sigma2 must be >= 0");
  if (!(k_max > 0.0) || !std::isfinite(k_max)) throw InvalidSpectrum("invalid spectrum: k_max must be > 0");
  if (family == SpectrumFamily::power_law_cutoff && !(gamma > 0.0))
    throw InvalidSpectrum("invalid spectrum: power-law exponent gamma must be > 0");
}

double SpectrumModel::support_radius() const {
  // exp(-r^2 / 2 k^2) < 1e-30 beyond r = 11.8 k.
  return family == SpectrumFamily::gaussian_bump ? 12.0 * k_max : k_max;
}

double SpectrumModel::density(double r, int dim) const {
  if (sigma2 == 0.0) return 0.0;
  switch (family) {
    case SpectrumFamily::band_limited_flat:
      return r <= k_max ? sigma2 / (ball_volume(dim) * std::pow(k_max, dim)) : 0.0;
    case SpectrumFamily::gaussian_bump:
      return sigma2 * std::pow(2.0 * kPi * k_max * k_max, -0.5 * dim) * std::exp(-0.5 * r * r / (k_max * k_max));
    case SpectrumFamily::power_law_cutoff: {
      if (r > k_max) return 0.0;
      const double amp = sigma2 * gamma / (unit_sphere_area(dim) * std::pow(k_max, gamma));
      return amp * std::pow(r, gamma - dim);
    }
  }
  return 0.0;
}

double SpectrumModel::correlation(double r, int dim) const {
  if (sigma2 == 0.0) return 0.0;
  if (r == 0.0) return sigma2;
  const double nu = 0.5 * dim;
  switch (family) {
    case SpectrumFamily::band_limited_flat: {
      const double z = k_max * r;
      return sigma2 * std::tgamma(nu + 1.0) * std::pow(2.0 / z, nu) * boost::math::cyl_bessel_j(nu, z);
    }
    case SpectrumFamily::gaussian_bump:
      return sigma2 * std::exp(-0.5 * k_max * k_max * r * r);
    case SpectrumFamily::power_law_cutoff: {
      auto g = [&](double rho) {
        return density(rho, dim) * boost::math::cyl_bessel_j(nu - 1.0, rho * r) * std::pow(rho, nu);
      };
      boost::math::quadrature::tanh_sinh<double> integrator;
      return std::pow(2.0 * kPi, nu) * std::pow(r, 1.0 - nu) * integrator.integrate(g, 0.0, k_max, 1e-12);
    }
  }
  return 0.0;
}

std::vector<double> spectral_weights(const SpectrumModel& model, const TorusGrid& grid, double eps) {
  model.validate();
  check_resolution(grid, eps);
  const int d = grid.dim();
  const double cell = std::pow(grid.wave_step() * eps, d);
  const auto k2 = grid.k_squared();
  std::vector<double> w(grid.size(), 0.0);
  if (model.sigma2 == 0.0) return w;
  for (std::size_t i = 1; i < w.size(); ++i) {
    // Unpaired Nyquist slots are left empty so both synthesis modes share
    // one lattice spectrum.
    if (grid.on_nyquist_plane(i)) continue;
    const double s = model.density(eps * std::sqrt(k2[i]), d) * cell;
    if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidSpectrum("invalid spectrum: negative or non-finite R_hat sample");
    w[i] = s;
  }
  return w;
}

SpectralField lattice_correlation(const TorusGrid& grid, std::span<const double> weights) {
  std::vector<cplx> v(weights.begin(), weights.end());
  fft_inverse(grid, v);
  const double n = static_cast<double>(grid.size());
  for (auto& z : v) z = z.real() * n;
  return SpectralField(grid, std::move(v), Representation::nodal);
}

FieldRealization synthesize_from_weights(const TorusGrid& grid, std::span<const double> weights, double eps,
                                         std::uint64_t seed, SynthesisMode mode, int modes) {
  if (weights.size() != grid.size()) throw std::invalid_argument("weight count does not match grid");
  check_resolution(grid, eps);
  for (double s : weights)
    if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidSpectrum("invalid spectrum: negative or non-finite weight");

  double variance = 0.0;
  for (double s : weights) variance += s;
  const double total = static_cast<double>(grid.size());
  std::mt19937_64 rng(seed);
  std::vector<cplx> spec(grid.size(), cplx{0.0, 0.0});
  double bound = std::numeric_limits<double>::infinity();

  if (mode == SynthesisMode::gaussian) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& z : spec) z = normal(rng);
    fft_forward(grid, spec);
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= std::sqrt(weights[i] * total);
    spec[0] = 0.0;
  } else {
    if (modes < 1) throw std::invalid_argument("random-phase synthesis needs at least one mode");
    bound = std::sqrt(2.0 * variance * modes);
    // Pairs {k, -k} are represented by the lower slot index.
    std::vector<std::size_t> slots;
    std::vector<double> cumulative;
    double acc = 0.0;
    for (std::size_t i = 1; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      const std::size_t j = grid.conjugate_slot(i);
      if (j <= i) continue;
      acc += weights[i] + weights[j];
      slots.push_back(i);
      cumulative.push_back(acc);
    }
    if (!slots.empty()) {
      const double amp = std::sqrt(2.0 * variance / modes);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (int m = 0; m < modes; ++m) {
        const double u = unit(rng) * acc;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const std::size_t pick = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
            it - cumulative.begin(), static_cast<std::ptrdiff_t>(slots.size()) - 1));
        const double phase = 2.0 * kPi * unit(rng);
        const std::size_t i = slots[pick];
        const cplx c = std::polar(0.5 * amp * total, phase);
        spec[i] += c;
        spec[grid.conjugate_slot(i)] += std::conj(c);
      }
    }
  }

  fft_inverse(grid, spec);
  for (auto& z : spec) z = z.real();
  return FieldRealization{SpectralField(grid, std::move(spec), Representation::nodal),
                          eps,
                          seed,
                          mode,
                          variance,
                          mode == SynthesisMode::gaussian ? std::numeric_limits<double>::infinity() : bound};
}

FieldRealization synthesize(const SpectrumModel& model, const TorusGrid& grid, double eps, std::uint64_t seed,
                            SynthesisMode mode, int modes) {
  const auto w = spectral_weights(model, grid, eps);
  return synthesize_from_weights(grid, w, eps, seed, mode, modes);
}

CorrelationTable empirical_correlation(std::span<const FieldRealization> fields) {
  if (fields.size() < 2) throw InsufficientEnsemble("insufficient ensemble: need at least 2 realizations");
  const TorusGrid& g = fields.front().grid();
  for (const auto& f : fields)
    if (!(f.grid() == g)) throw IncompatibleInputs("incompatible realizations: grids differ");

  std::vector<std::size_t> bin_of(g.size());
  std::size_t nbins = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    bin_of[i] = static_cast<std::size_t>(std::lround(lag_distance_cells(g, i)));
    nbins = std::max(nbins, bin_of[i] + 1);
  }
  CorrelationTable t;
  t.count.assign(nbins, 0);
  for (std::size_t b : bin_of) ++t.count[b];

  const double h = g.spacing();
  const double total = static_cast<double>(g.size());
  std::vector<double> sum(nbins, 0.0), sum_sq(nbins, 0.0), per(nbins);
  for (const auto& f : fields) {
    const SpectralField nodal = f.potential.to_nodal();
    std::vector<cplx> v(nodal.values().begin(), nodal.values().end());
    fft_forward(g, v);
    for (auto& z : v) z = std::norm(z);
    fft_inverse(g, v);
    std::fill(per.begin(), per.end(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) per[bin_of[i]] += v[i].real() / total;
    for (std::size_t b = 0; b < nbins; ++b) {
      const double m = per[b] / static_cast<double>(t.count[b]);
      sum[b] += m;
      sum_sq[b] += m * m;
    }
  }
  const double nf = static_cast<double>(fields.size());
  for (std::size_t b = 0; b < nbins; ++b) {
    const double mean = sum[b] / nf;
    const double var = std::max(0.0, (sum_sq[b] - nf * mean * mean) / (nf - 1.0));
    t.radius.push_back(h * static_cast<double>(b));
    t.mean.push_back(mean);
    t.stderr_.push_back(std::sqrt(var / nf));
  }
  return t;
}

double rho_spectral(const SpectrumModel& model, int dim) {
  model.validate();
  if (dim < 3) throw RhoUndefined("rho undefined: requires dimension >= 3");
  if (model.family == SpectrumFamily::power_law_cutoff && model.gamma <= 2.0)
    throw RhoUndefined("rho undefined: slow correlation decay (gamma <= 2)");
  if (model.sigma2 == 0.0) return 0.0;
  const double area = unit_sphere_area(dim);
  if (model.family == SpectrumFamily::power_law_cutoff) {
    // Substituting r = k_max t^2 removes the r^(gamma-3) endpoint singularity.
    auto g = [&](double t) { return power_law_rho_integrand(model, dim, t); };
    boost::math::quadrature::tanh_sinh<double> integrator;
    return area * integrator.integrate(g, 0.0, 1.0, 1e-13);
  }
  return area * radial_integral(model, [&](double r) { return model.density(r, dim) * std::pow(r, dim - 3); });
}

double rho_discrete(const SpectrumModel& model, const TorusGrid& grid, double eps) {
  if (grid.dim() < 3) throw RhoUndefined("rho undefined: requires dimension >= 3");
  const auto w = spectral_weights(model, grid, eps);
  const auto k2 = grid.k_squared();
  double s = 0.0;
  for (std::size_t i = 1; i < w.size(); ++i)
    if (w[i] > 0.0) s += w[i] / (eps * eps * k2[i]);
  return s;
}

AdmissibilityReport check_admissibility(const SpectrumModel& model, int dim) {
  AdmissibilityReport rep;
  rep.witness_s = 0.25 * (dim - 2) + 0.5;
  if (model.sigma2 == 0.0) {
    rep.rho_finite = rep.s_condition = true;
    rep.weighted_integral = 0.0;
    return rep;
  }
  try {
    (void)rho_spectral(model, dim);
  } catch (const RhoUndefined&) {
    return rep;
  }
  rep.rho_finite = true;
  const double s = rep.witness_s;
  const double area = unit_sphere_area(dim);
  double value = 0.0;
  if (model.family == SpectrumFamily::power_law_cutoff) {
    auto g = [&](double t) {
      const double r = model.k_max * t * t;
      return (1.0 + std::pow(r, 2.0 * s)) * power_law_rho_integrand(model, dim, t);
    };
    boost::math::quadrature::tanh_sinh<double> integrator;
    value = area * integrator.integrate(g, 0.0, 1.0, 1e-12);
  } else {
    value = area * radial_integral(model, [&](double r) {
      return (1.0 + std::pow(r, 2.0 * s)) * model.density(r, dim) * std::pow(r, dim - 3);
    });
  }
  rep.weighted_integral = value;
  rep.s_condition = std::isfinite(value);
  return rep;
}

MixingDiagnostics fourth_moment_residual(std::span<const FieldRealization> fields,
                                         std::span<const Quadruple> quadruples,
                                         const SpectralField& lag_correlation) {
  if (fields.size() < kMinFourthMomentEnsemble)
    throw InsufficientEnsemble("insufficient ensemble: fourth moments need at least 256 realizations");
  const TorusGrid& g = fields.front().grid();
  for (const auto& f : fields)
    if (!(f.grid() == g)) throw IncompatibleInputs("incompatible realizations: grids differ");
  if (!(lag_correlation.grid() == g)) throw IncompatibleInputs("correlation table lives on another grid");

  const SpectralField corr = lag_correlation.to_nodal();
  auto R = [&](std::size_t a, std::size_t b) { return corr.values()[lag_slot(g, a, b)].real(); };

  MixingDiagnostics out;
  // Radial |R| profile in bins of width h.
  std::vector<double> prof_sum, prof_cnt;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto b = static_cast<std::size_t>(std::lround(lag_distance_cells(g, i)));
    if (b >= prof_sum.size()) {
      prof_sum.resize(b + 1, 0.0);
      prof_cnt.resize(b + 1, 0.0);
    }
    prof_sum[b] += std::abs(corr.values()[i].real());
    prof_cnt[b] += 1.0;
  }
  std::vector<double> profile(prof_sum.size());
  for (std::size_t b = 0; b < profile.size(); ++b) profile[b] = prof_sum[b] / prof_cnt[b];
  const double h = g.spacing();
  const double area = unit_sphere_area(g.dim());
  for (std::size_t b = 0; b < profile.size(); ++b)
    out.eta_radial_integral += profile[b] * area * std::pow(h * b, g.dim() - 1) * h;
  out.eta = [profile, h](double r) {
    const auto b = static_cast<std::size_t>(std::lround(std::abs(r) / h));
    return b < profile.size() ? profile[b] : 0.0;
  };

  std::vector<std::span<const cplx>> vals;
  std::vector<SpectralField> keep;
  keep.reserve(fields.size());
  for (const auto& f : fields) {
    keep.push_back(f.potential.to_nodal());
    vals.push_back(keep.back().values());
  }
  const double nf = static_cast<double>(fields.size());
  for (const auto& q : quadruples) {
    const auto [x1, x2, x3, x4] = q.nodes;
    for (auto x : q.nodes)
      if (x >= g.size()) throw std::out_of_range("quadruple node outside grid");
    double s = 0.0, s2 = 0.0;
    for (const auto& v : vals) {
      const double p = v[x1].real() * v[x2].real() * v[x3].real() * v[x4].real();
      s += p;
      s2 += p * p;
    }
    FourthMomentRow row;
    row.moment = s / nf;
    row.moment_stderr = std::sqrt(std::max(0.0, (s2 - nf * row.moment * row.moment) / (nf - 1.0)) / nf);
    row.residual = row.moment - R(x1, x2) * R(x3, x4);
    row.isserlis = R(x1, x3) * R(x2, x4) + R(x1, x4) * R(x2, x3);
    row.eta_bound = std::abs(R(x1, x3) * R(x2, x4)) + std::abs(R(x1, x4) * R(x2, x3));
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace hlab
