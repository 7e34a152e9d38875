#include "hlab/kernel.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "hlab/errors.hpp"

namespace hlab {

namespace {

constexpr double kPi = std::numbers::pi;

// Heat-kernel subordination integral int_0^inf t^-p exp(-r^2/(4t) - t) dt
// with the prefactor (4 pi)^(-d/2) applied by the caller.
double subordination(double r, double power) {
  boost::math::quadrature::exp_sinh<double> q;
  const double r2 = r * r;
  auto fn = [&](double t) {
    if (t <= 0.0) return 0.0;
    return std::exp(-r2 / (4.0 * t) - t - power * std::log(t));
  };
  return q.integrate(fn, 0.0, std::numeric_limits<double>::infinity());
}

}  // namespace

GreenKernel::GreenKernel(int dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("kernel dimension must be >= 1");
}

double GreenKernel::quadrature_value(double r) const {
  if (!(r > 0.0)) throw std::invalid_argument("singular point excluded");
  return std::pow(4.0 * kPi, -0.5 * dim_) * subordination(r, 0.5 * dim_);
}

double GreenKernel::value(double r) const {
  if (!(r > 0.0)) throw std::invalid_argument("singular point excluded");
  if (dim_ == 3) return std::exp(-r) / (4.0 * kPi * r);
  return quadrature_value(r);
}

double GreenKernel::radial_derivative(double r) const {
  if (!(r > 0.0)) throw std::invalid_argument("singular point excluded");
  if (dim_ == 3) return -std::exp(-r) * (1.0 + r) / (4.0 * kPi * r * r);
  // d/dr exp(-r^2/(4t)) = -(r / 2t) exp(-r^2/(4t))
  return -0.5 * r * std::pow(4.0 * kPi, -0.5 * dim_) * subordination(r, 0.5 * dim_ + 1.0);
}

SpectralField GreenKernel::on_grid(const TorusGrid& grid) {
  const auto k2 = grid.k_squared();
  std::vector<cplx> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / (k2[i] + 1.0);
  fft_inverse(grid, v);
  const double scale = 1.0 / grid.cell_volume();
  for (auto& z : v) z = z.real() * scale;
  return SpectralField(grid, std::move(v), Representation::nodal);
}

double GreenKernel::periodized(std::span<const double> x, double length, int images) const {
  if (static_cast<int>(x.size()) != dim_) throw std::invalid_argument("point dimension mismatch");
  std::vector<int> j(static_cast<std::size_t>(dim_), -images);
  double sum = 0.0;
  while (true) {
    double r2 = 0.0;
    for (int a = 0; a < dim_; ++a) {
      const double c = x[static_cast<std::size_t>(a)] + length * j[static_cast<std::size_t>(a)];
      r2 += c * c;
    }
    sum += value(std::sqrt(r2));
    int a = 0;
    for (; a < dim_; ++a) {
      if (++j[static_cast<std::size_t>(a)] <= images) break;
      j[static_cast<std::size_t>(a)] = -images;
    }
    if (a == dim_) break;
  }
  return sum;
}

GreenBoundReport green_bound_check(const GreenKernel& kernel, std::span<const double> radii, double nu,
                                   double fit_radius) {
  for (double r : radii)
    if (!(r > 0.0)) throw std::invalid_argument("singular point excluded");
  if (!(nu > 0.0)) throw std::invalid_argument("decay rate nu must be positive");
  const int d = kernel.dim();
  auto lhs = [&](double r) { return kernel.value(r) * r - kernel.radial_derivative(r); };
  auto scaled = [&](double r) { return lhs(r) * std::pow(r, d - 1) * std::exp(nu * r); };

  GreenBoundReport rep;
  rep.nu = nu;
  if (fit_radius > 0.0) {
    rep.constant = scaled(fit_radius);
  } else {
    // r^(d-1) e^(nu r) lhs is bounded near 0 and decays like e^((nu-1) r)
    // at infinity, so the sup is attained on a finite window.
    const double r_hi = 40.0 / (1.0 - std::min(nu, 0.975));
    const int steps = 4000;
    for (int i = 0; i <= steps; ++i) {
      const double r = 1e-4 * std::pow(r_hi / 1e-4, static_cast<double>(i) / steps);
      rep.constant = std::max(rep.constant, scaled(r));
    }
    for (double r : radii) rep.constant = std::max(rep.constant, scaled(r));
  }
  for (double r : radii) {
    GreenBoundRow row;
    row.radius = r;
    row.lhs = lhs(r);
    row.bound = rep.constant * std::exp(-nu * r) / std::pow(r, d - 1);
    row.ratio = row.lhs / row.bound;
    rep.max_ratio = std::max(rep.max_ratio, row.ratio);
    rep.rows.push_back(row);
  }
  return rep;
}

std::string to_string(ConvolutionRegime r) {
  switch (r) {
    case ConvolutionRegime::above: return "above";
    case ConvolutionRegime::critical: return "critical";
    case ConvolutionRegime::below: return "below";
  }
  return "unknown";
}

ConvolutionRegime classify(double alpha, double beta, int dim) {
  const double s = alpha + beta;
  if (s > dim) return ConvolutionRegime::above;
  if (s == dim) return ConvolutionRegime::critical;
  return ConvolutionRegime::below;
}

double regime_factor(ConvolutionRegime regime, double alpha, double beta, int dim, double separation) {
  switch (regime) {
    case ConvolutionRegime::above: return std::pow(separation, dim - alpha - beta) + 1.0;
    case ConvolutionRegime::critical: return std::abs(std::log(separation)) + 1.0;
    case ConvolutionRegime::below: return 1.0;
  }
  return 1.0;
}

ConvolutionResult convolution_lemma_check(const ConvolutionCase& c, std::uint64_t seed, std::size_t samples) {
  const int d = c.dim;
  if (d < 1) throw std::invalid_argument("dimension must be >= 1");
  if (!(c.alpha > 0.0 && c.alpha < d && c.beta > 0.0 && c.beta < d))
    throw std::invalid_argument("exponents must lie in (0, d)");
  if (!(c.lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (!(c.separation > 0.0)) throw std::invalid_argument("separation must be positive");
  if (samples < 1000) throw InsufficientSamples("insufficient effective samples: too few draws requested");

  const double omega = unit_sphere_area(d);
  const double zx = omega * std::tgamma(d - c.alpha) * std::pow(c.lambda, c.alpha - d);
  const double zy = omega * std::tgamma(d - c.beta) * std::pow(c.lambda, c.beta - d);

  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gx(d - c.alpha, 1.0 / c.lambda);
  std::gamma_distribution<double> gy(d - c.beta, 1.0 / c.lambda);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  std::vector<double> z(static_cast<std::size_t>(d));
  double sw = 0.0, sw2 = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const bool at_x = coin(rng);
    const double rad = at_x ? gx(rng) : gy(rng);
    double nn = 0.0;
    for (auto& v : z) {
      v = normal(rng);
      nn += v * v;
    }
    nn = std::sqrt(nn);
    // x at the origin, y at separation * e_0
    for (auto& v : z) v *= rad / nn;
    if (!at_x) z[0] += c.separation;
    double rx = 0.0, ry = 0.0;
    for (int a = 0; a < d; ++a) {
      const double ya = a == 0 ? c.separation : 0.0;
      rx += z[static_cast<std::size_t>(a)] * z[static_cast<std::size_t>(a)];
      ry += (z[static_cast<std::size_t>(a)] - ya) * (z[static_cast<std::size_t>(a)] - ya);
    }
    rx = std::sqrt(rx);
    ry = std::sqrt(ry);
    if (rx == 0.0 || ry == 0.0) continue;
    const double ex = std::exp(-c.lambda * rx), ey = std::exp(-c.lambda * ry);
    const double fx = ex * std::pow(rx, -c.alpha), fy = ey * std::pow(ry, -c.beta);
    const double q = 0.5 * fx / zx + 0.5 * fy / zy;
    const double w = fx * fy / q;
    sw += w;
    sw2 += w * w;
  }

  const double n = static_cast<double>(samples);
  ConvolutionResult out;
  out.input = c;
  out.regime = classify(c.alpha, c.beta, d);
  out.integral = sw / n;
  const double var = std::max(0.0, sw2 / n - out.integral * out.integral);
  out.stderr_ = std::sqrt(var / (n - 1.0));
  out.effective_samples = sw2 > 0.0 ? sw * sw / sw2 : 0.0;
  if (out.effective_samples < 0.01 * n)
    throw InsufficientSamples("insufficient effective samples: ESS " + std::to_string(out.effective_samples));
  out.relative_stderr = out.stderr_ / out.integral;
  out.bound = std::exp(-c.lambda * c.separation) * regime_factor(out.regime, c.alpha, c.beta, d, c.separation);
  out.ratio = out.integral / out.bound;
  return out;
}

MomentDiagnostic feps_moments(const SpectrumModel& model, const TorusGrid& grid, std::span<const double> ladder,
                              std::span<const std::uint64_t> seeds, const SpectralField& f,
                              const MomentOptions& opts) {
  if (seeds.size() < kMinMomentSeeds)
    throw InsufficientEnsemble("insufficient ensemble: f_eps moments need at least 16 seeds per eps");
  if (!(f.grid() == grid)) throw IncompatibleInputs("source lives on a different grid");
  for (double eps : ladder) check_resolution(grid, eps);

  MomentDiagnostic out;
  for (double eps : ladder) {
    MomentLevel lvl;
    lvl.eps = eps;
    lvl.seeds = seeds.size();
    lvl.rho = opts.rho >= 0.0 ? opts.rho : rho_discrete(model, grid, eps);
    const HomogSolution homog = solve_homogenized(f, lvl.rho);
    const SpectralField u0 = homog.u0.to_nodal();
    const auto k2 = grid.k_squared();

    double s_l2 = 0.0, s_l2sq = 0.0, s_gr = 0.0, s_grsq = 0.0;
    cplx s_mean{0.0, 0.0};
    for (std::uint64_t seed : seeds) {
      const FieldRealization real = synthesize(model, grid, eps, seed, opts.mode, opts.modes);
      const CorrectorBundle b = solve_corrector(real);
      const auto v = b.potential.values();
      const auto psi = b.psi_eps.values();
      // rho - i V_eps chi_eps = rho + V_eps psi_eps
      std::vector<cplx> g(grid.size());
      cplx smean{0.0, 0.0};
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double q = lvl.rho + v[i].real() * psi[i].real();
        smean += q;
        g[i] = q * u0.values()[i];
      }
      s_mean += smean / static_cast<double>(grid.size());

      fft_forward(grid, g);
      std::vector<cplx> fe(g.size());
      for (std::size_t i = 0; i < fe.size(); ++i) fe[i] = g[i] / (k2[i] + 1.0);
      double res = 0.0, ref = 0.0;
      for (std::size_t i = 0; i < fe.size(); ++i) {
        res += std::norm((k2[i] + 1.0) * fe[i] - g[i]);
        ref += std::norm(g[i]);
      }
      lvl.max_construction_residual =
          std::max(lvl.max_construction_residual, ref > 0.0 ? std::sqrt(res / ref) : 0.0);

      const SpectralField f_eps(grid, std::move(fe), Representation::spectral);
      const double l2 = norm(f_eps, NormKind::L2);
      const auto gr = gradient(f_eps);
      const double gn = norm(std::span<const SpectralField>(gr));
      s_l2 += l2 * l2;
      s_l2sq += l2 * l2 * l2 * l2;
      s_gr += gn * gn;
      s_grsq += gn * gn * gn * gn;
    }
    const double n = static_cast<double>(seeds.size());
    lvl.l2_sq = s_l2 / n;
    lvl.grad_sq = s_gr / n;
    lvl.l2_sq_stderr = std::sqrt(std::max(0.0, (s_l2sq - n * lvl.l2_sq * lvl.l2_sq) / (n - 1.0)) / n);
    lvl.grad_sq_stderr = std::sqrt(std::max(0.0, (s_grsq - n * lvl.grad_sq * lvl.grad_sq) / (n - 1.0)) / n);
    lvl.source_mean = std::abs(s_mean / n);
    out.levels.push_back(lvl);
  }

  bool positive = out.levels.size() >= 3;
  for (const auto& l : out.levels) positive = positive && l.l2_sq > 0.0 && l.grad_sq > 0.0;
  if (positive) {
    std::vector<RatePoint> a, b;
    for (const auto& l : out.levels) {
      a.push_back({l.eps, l.l2_sq, l.l2_sq_stderr});
      b.push_back({l.eps, l.grad_sq, l.grad_sq_stderr});
    }
    out.l2_fit = fit_rate(a);
    out.grad_fit = fit_rate(b);
    out.fitted = true;
  }
  return out;
}

}  // namespace hlab
