#include "hlab/corrector.hpp"

#include <cmath>

#include "hlab/errors.hpp"

namespace hlab {

double CorrectorBundle::mean_gradient_energy() const {
  const double n = norm(std::span<const SpectralField>(grad_psi));
  return n * n / grid().volume();
}

CorrectorBundle solve_corrector(const FieldRealization& realization) {
  const TorusGrid& g = realization.grid();
  SpectralField potential = real_part(realization.scaled_potential());
  const auto k2 = g.k_squared();

  std::vector<cplx> v_hat(potential.values().begin(), potential.values().end());
  fft_forward(g, v_hat);
  std::vector<cplx> psi_hat(v_hat.size());
  for (std::size_t i = 0; i < psi_hat.size(); ++i) psi_hat[i] = -v_hat[i] / (k2[i] + 1.0);

  std::vector<SpectralField> grads;
  for (int a = 0; a < g.dim(); ++a) {
    std::vector<cplx> w(psi_hat.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = cplx{0.0, g.wavevector(i, a)} * psi_hat[i];
    fft_inverse(g, w);
    for (auto& z : w) z = z.real();
    grads.emplace_back(g, std::move(w), Representation::nodal);
  }

  std::vector<cplx> psi = psi_hat;
  fft_inverse(g, psi);
  for (auto& z : psi) z = z.real();

  // Residual of the stored (real) corrector.
  std::vector<cplx> check = psi;
  fft_forward(g, check);
  double res = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < check.size(); ++i) {
    res += std::norm((k2[i] + 1.0) * check[i] + v_hat[i]);
    ref += std::norm(v_hat[i]);
  }

  const double eps = realization.eps;
  std::vector<cplx> chi(psi.size());
  for (std::size_t i = 0; i < chi.size(); ++i) chi[i] = cplx{0.0, psi[i].real() / eps};

  return CorrectorBundle{std::move(potential),
                         SpectralField(g, std::move(psi), Representation::nodal),
                         std::move(grads),
                         SpectralField(g, std::move(chi), Representation::nodal),
                         eps,
                         realization.seed,
                         ref > 0.0 ? std::sqrt(res / ref) : 0.0};
}

Estimate rho_empirical(std::span<const CorrectorBundle> bundles) {
  if (bundles.size() < 8) throw InsufficientEnsemble("insufficient ensemble: rho_empirical needs at least 8 bundles");
  const double eps = bundles.front().eps;
  for (const auto& b : bundles)
    if (b.eps != eps || !(b.grid() == bundles.front().grid()))
      throw IncompatibleInputs("incompatible bundles: eps or grid differ");
  double s = 0.0, s2 = 0.0;
  for (const auto& b : bundles) {
    const double e = b.mean_gradient_energy();
    s += e;
    s2 += e * e;
  }
  const double n = static_cast<double>(bundles.size());
  const double mean = s / n;
  const double var = std::max(0.0, (s2 - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

HomogSolution solve_homogenized(const SpectralField& f, double rho) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw std::invalid_argument("homogenized potential rho must be >= 0");
  SpectralField u0 = apply_radial_multiplier(f.to_nodal(), [rho](double k2) { return cplx{1.0 / (k2 + 1.0 + rho), 0.0}; });
  return HomogSolution{std::move(u0), rho, f};
}

Expansion expansion(const HomogSolution& sol, const CorrectorBundle& bundle) {
  const TorusGrid& g = bundle.grid();
  if (!(sol.u0.grid() == g)) throw IncompatibleInputs("homogenized solution and corrector live on different grids");
  const double eps = bundle.eps;
  const SpectralField u0 = sol.u0.to_nodal();
  const SpectralField lap_u0 = laplacian(u0);
  const auto grad_u0 = gradient(u0);

  const auto u = u0.values();
  const auto chi = bundle.chi_eps.values();
  const auto v = bundle.potential.values();
  const auto lap = lap_u0.values();
  std::vector<cplx> u1(g.size()), rhs(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    u1[i] = -chi[i] * u[i];
    cplx dot{0.0, 0.0};
    for (int a = 0; a < g.dim(); ++a) {
      // grad chi = (i / eps) grad psi
      const cplx grad_chi{0.0, bundle.grad_psi[static_cast<std::size_t>(a)].values()[i].real() / eps};
      dot += grad_chi * grad_u0[static_cast<std::size_t>(a)].values()[i];
    }
    const cplx v_unit = eps * v[i];  // V(x/eps)
    rhs[i] = (sol.rho_used - cplx{0.0, 1.0} * v_unit * chi[i]) * u[i] - eps * (chi[i] * lap[i] + 2.0 * dot);
  }
  return Expansion{SpectralField(g, std::move(u1), Representation::nodal),
                   SpectralField(g, std::move(rhs), Representation::nodal)};
}

SpectralField default_source(const TorusGrid& grid) {
  const double r = grid.length() / 4.0;
  const double c = grid.length() / 2.0;
  return SpectralField::from_function(grid, [&](std::span<const double> x) {
    double q = 0.0;
    for (double xi : x) q += (xi - c) * (xi - c);
    q /= r * r;
    return cplx{q < 1.0 ? std::exp(-1.0 / (1.0 - q)) : 0.0, 0.0};
  });
}

}  // namespace hlab
