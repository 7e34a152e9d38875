#include "hlab/hetero_solver.hpp"

#include <cmath>
#include <sstream>

#include "hlab/errors.hpp"

namespace hlab {

namespace {

using Vec = std::vector<cplx>;

cplx dot(const Vec& a, const Vec& b) {
  cplx s{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double norm2(const Vec& a) {
  double s = 0.0;
  for (const auto& z : a) s += std::norm(z);
  return std::sqrt(s);
}

// Left-preconditioned operator on spectral coefficients:
//   x -> x - i (|k|^2 + 1)^-1 F(V F^-1 x).
class PreconditionedOperator {
 public:
  PreconditionedOperator(const TorusGrid& grid, std::span<const cplx> potential)
      : grid_(grid), potential_(potential), k2_(grid.k_squared()), work_(grid.size()) {}

  void apply(const Vec& x, Vec& out) {
    work_.assign(x.begin(), x.end());
    fft_inverse(grid_, work_);
    for (std::size_t i = 0; i < work_.size(); ++i) work_[i] *= potential_[i].real();
    fft_forward(grid_, work_);
    out.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - cplx{0.0, 1.0} * work_[i] / (k2_[i] + 1.0);
  }

  /// Unpreconditioned residual f - A x from B x.
  void true_residual(const Vec& f_hat, const Vec& bx, Vec& out) const {
    out.resize(bx.size());
    for (std::size_t i = 0; i < bx.size(); ++i) out[i] = f_hat[i] - (k2_[i] + 1.0) * bx[i];
  }

 private:
  const TorusGrid& grid_;
  std::span<const cplx> potential_;
  std::span<const double> k2_;
  Vec work_;
};

EnergyReport energy_report(const SpectralField& potential, const SpectralField& f, const SpectralField& u) {
  const TorusGrid& g = u.grid();
  EnergyReport e;
  e.h1_norm = norm(u, NormKind::H1);
  e.h1_energy = e.h1_norm * e.h1_norm;
  e.source_hminus1 = norm(f, NormKind::Hminus1);
  e.source_pairing = inner(f, u);
  const SpectralField un = u.to_nodal();
  const SpectralField vn = potential.to_nodal();
  double s = 0.0;
  for (std::size_t i = 0; i < un.size(); ++i) s += vn.values()[i].real() * std::norm(un.values()[i]);
  e.potential_energy = -g.cell_volume() * s;
  return e;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(tolerance > 0.0 && tolerance <= 1e-2)) throw std::invalid_argument("solver tolerance must lie in (0, 1e-2]");
  if (max_iterations <= 0 || restart <= 0) throw std::invalid_argument("solver iteration limits must be positive");
}

double EnergyReport::real_identity_error() const {
  if (h1_energy == 0.0) return std::abs(source_pairing.real());
  return std::abs(h1_energy - source_pairing.real()) / h1_energy;
}

double EnergyReport::imag_balance_error() const {
  const double scale = std::abs(source_pairing);
  if (scale == 0.0) return std::abs(potential_energy);
  return std::abs(potential_energy - source_pairing.imag()) / scale;
}

SpectralField apply_hetero_operator(const SpectralField& potential, const SpectralField& u) {
  const SpectralField un = u.to_nodal();
  const SpectralField vn = potential.to_nodal();
  SpectralField out = apply_radial_multiplier(un, [](double k2) { return cplx{k2 + 1.0, 0.0}; });
  std::vector<cplx> v(out.values().begin(), out.values().end());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= cplx{0.0, 1.0} * vn.values()[i].real() * un.values()[i];
  return SpectralField(u.grid(), std::move(v), Representation::nodal);
}

HeteroSolution solve_hetero(const FieldRealization& realization, const SpectralField& f, const SolverConfig& cfg) {
  return solve_hetero(realization.scaled_potential(), f, cfg, realization.seed);
}

HeteroSolution solve_hetero(const SpectralField& potential, const SpectralField& f, const SolverConfig& cfg,
                            std::uint64_t seed) {
  cfg.validate();
  const TorusGrid& g = f.grid();
  if (!(potential.grid() == g)) throw IncompatibleInputs("potential and source live on different grids");
  if (!f.is_finite()) throw std::invalid_argument("source must be finite");

  const SpectralField vn = potential.to_nodal();
  PreconditionedOperator op(g, vn.values());
  const auto k2 = g.k_squared();

  Vec f_hat = f.to_spectral().release();
  Vec b(f_hat.size());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = f_hat[i] / (k2[i] + 1.0);
  const double f_norm = norm2(f_hat);
  const double b_norm = norm2(b);

  HeteroSolution out{SpectralField(g, Representation::nodal), seed, 0, 0.0, {}, {}};
  Vec x(b.size(), cplx{0.0, 0.0});
  if (f_norm == 0.0) {
    out.energy = energy_report(vn, f, out.u_eps);
    return out;
  }

  const int m = cfg.restart;
  std::vector<Vec> basis;
  std::vector<std::vector<cplx>> h(static_cast<std::size_t>(m + 1), std::vector<cplx>(static_cast<std::size_t>(m)));
  std::vector<double> cs(static_cast<std::size_t>(m));
  std::vector<cplx> sn(static_cast<std::size_t>(m)), rhs(static_cast<std::size_t>(m + 1));
  Vec w, r, bx, tr;
  double inner_tol = 0.1 * cfg.tolerance;
  int total = 0;

  while (true) {
    // Preconditioned residual b - B x.
    if (total == 0) {
      r = b;
    } else {
      op.apply(x, bx);
      r.resize(b.size());
      for (std::size_t i = 0; i < b.size(); ++i) r[i] = b[i] - bx[i];
    }
    const double beta = norm2(r);
    basis.clear();
    basis.push_back(r);
    for (auto& z : basis[0]) z /= beta;
    std::fill(rhs.begin(), rhs.end(), cplx{0.0, 0.0});
    rhs[0] = beta;

    int k = 0;
    for (int j = 0; j < m && total < cfg.max_iterations; ++j) {
      op.apply(basis[static_cast<std::size_t>(j)], w);
      ++total;
      // Modified Gram-Schmidt with one reorthogonalization pass.
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          const cplx c = dot(basis[static_cast<std::size_t>(i)], w);
          if (pass == 0) h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = c;
          else h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] += c;
          const auto& vi = basis[static_cast<std::size_t>(i)];
          for (std::size_t q = 0; q < w.size(); ++q) w[q] -= c * vi[q];
        }
      }
      const double hn = norm2(w);
      h[static_cast<std::size_t>(j + 1)][static_cast<std::size_t>(j)] = hn;

      for (int i = 0; i < j; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        const cplx a = h[iu][static_cast<std::size_t>(j)];
        const cplx c2 = h[iu + 1][static_cast<std::size_t>(j)];
        h[iu][static_cast<std::size_t>(j)] = cs[iu] * a + sn[iu] * c2;
        h[iu + 1][static_cast<std::size_t>(j)] = -std::conj(sn[iu]) * a + cs[iu] * c2;
      }
      const auto ju = static_cast<std::size_t>(j);
      const cplx a = h[ju][ju];
      const double bb = hn;
      const double denom = std::sqrt(std::norm(a) + bb * bb);
      if (denom == 0.0) {
        cs[ju] = 1.0;
        sn[ju] = 0.0;
      } else if (std::abs(a) == 0.0) {
        cs[ju] = 0.0;
        sn[ju] = 1.0;
      } else {
        cs[ju] = std::abs(a) / denom;
        sn[ju] = (a / std::abs(a)) * bb / denom;
      }
      h[ju][ju] = cs[ju] * a + sn[ju] * bb;
      h[ju + 1][ju] = 0.0;
      rhs[ju + 1] = -std::conj(sn[ju]) * rhs[ju];
      rhs[ju] = cs[ju] * rhs[ju];
      k = j + 1;

      if (std::abs(rhs[ju + 1]) <= inner_tol * b_norm || hn <= 1e-14 * b_norm) break;
      basis.push_back(w);
      for (auto& z : basis.back()) z /= hn;
    }

    // Back substitution and update.
    std::vector<cplx> y(static_cast<std::size_t>(k));
    for (int i = k - 1; i >= 0; --i) {
      const auto iu = static_cast<std::size_t>(i);
      cplx s = rhs[iu];
      for (int q = i + 1; q < k; ++q) s -= h[iu][static_cast<std::size_t>(q)] * y[static_cast<std::size_t>(q)];
      y[iu] = s / h[iu][iu];
    }
    for (int i = 0; i < k; ++i) {
      const auto& vi = basis[static_cast<std::size_t>(i)];
      const cplx yi = y[static_cast<std::size_t>(i)];
      for (std::size_t q = 0; q < x.size(); ++q) x[q] += yi * vi[q];
    }

    op.apply(x, bx);
    op.true_residual(f_hat, bx, tr);
    const double rel = norm2(tr) / f_norm;
    out.residual_history.push_back(rel);
    if (rel <= cfg.tolerance) {
      out.iterations = total;
      out.residual = rel;
      break;
    }
    if (total >= cfg.max_iterations) {
      std::ostringstream os;
      os << "solver stagnation: relative residual " << rel << " after " << total << " iterations (tolerance "
         << cfg.tolerance << ")";
      throw SolverStagnation(os.str(), out.residual_history);
    }
    // The preconditioned residual underestimated the true one; tighten.
    inner_tol = std::max(1e-15, inner_tol * std::min(0.5, cfg.tolerance / rel));
  }

  fft_inverse(g, x);
  out.u_eps = SpectralField(g, std::move(x), Representation::nodal);
  out.energy = energy_report(vn, f, out.u_eps);
  return out;
}

ErrorMetrics error_metrics(const HeteroSolution& sol, const HomogSolution& homog, const CorrectorBundle& bundle) {
  const TorusGrid& g = bundle.grid();
  if (!(sol.u_eps.grid() == g) || !(homog.u0.grid() == g))
    throw IncompatibleInputs("error metrics need a common grid");
  const SpectralField ue = sol.u_eps.to_nodal();
  const SpectralField u0 = homog.u0.to_nodal();
  const auto psi = bundle.psi_eps.values();

  ErrorMetrics m;
  m.l2_err = norm(ue - u0, NormKind::L2);

  // eps u1 = -eps chi u0 = -i psi u0
  std::vector<cplx> eu1(g.size());
  for (std::size_t i = 0; i < eu1.size(); ++i) eu1[i] = cplx{0.0, -1.0} * psi[i].real() * u0.values()[i];
  const SpectralField eps_u1(g, std::move(eu1), Representation::nodal);
  m.eps_u1_l2 = norm(eps_u1, NormKind::L2);
  const auto grad_eu1 = gradient(eps_u1);
  m.eps_grad_u1_l2 = norm(std::span<const SpectralField>(grad_eu1));

  m.h1_exp_err = norm(u0 + eps_u1 - ue, NormKind::H1);

  const auto gue = gradient(ue);
  const auto gu0 = gradient(u0);
  double s = 0.0;
  for (int a = 0; a < g.dim(); ++a) {
    const auto au = static_cast<std::size_t>(a);
    const auto gp = bundle.grad_psi[au].values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const cplx e = gue[au].values()[i] - gu0[au].values()[i] + cplx{0.0, 1.0} * u0.values()[i] * gp[i].real();
      s += std::norm(e);
    }
  }
  m.grad_corr_err = std::sqrt(g.cell_volume() * s);
  return m;
}

}  // namespace hlab
