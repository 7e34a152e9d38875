#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hlab/corrector.hpp"
#include "hlab/errors.hpp"
#include "hlab/hetero_solver.hpp"

using namespace hlab;

namespace {

constexpr double kPi = std::numbers::pi;

struct Case {
  TorusGrid grid{3, 32, 1.0};
  double eps = 0.25;
  FieldRealization real = synthesize(SpectrumModel{}, grid, eps, 21, SynthesisMode::random_phase);
  SpectralField f = default_source(grid);
};

}  // namespace

TEST(SolverConfig, Validation) {
  SolverConfig c;
  EXPECT_NO_THROW(c.validate());
  c.tolerance = 0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SolverConfig{};
  c.restart = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Hetero, ZeroPotentialPlaneWaveOneIteration) {
  const TorusGrid g(3, 16, 2.0 * kPi);
  const int m[3] = {2, -1, 1};
  const auto f = SpectralField::plane_wave(g, m);
  const auto sol = solve_hetero(SpectralField(g), f, SolverConfig{});
  EXPECT_EQ(sol.iterations, 1);
  EXPECT_LT(norm(sol.u_eps - cplx{1.0 / 7.0, 0.0} * f, NormKind::L2) / norm(f, NormKind::L2), 1e-13);
}

TEST(Hetero, ResidualCertificateAndEnergyIdentities) {
  const Case c;
  const auto sol = solve_hetero(c.real, c.f, SolverConfig{});
  EXPECT_LE(sol.residual, 1e-8);
  const auto r = apply_hetero_operator(c.real.scaled_potential(), sol.u_eps) - c.f;
  EXPECT_LE(norm(r, NormKind::L2) / norm(c.f, NormKind::L2), 1e-8);
  EXPECT_LT(sol.energy.real_identity_error(), 1e-6);
  EXPECT_LT(sol.energy.imag_balance_error(), 1e-6);
  EXPECT_TRUE(sol.energy.apriori_holds(1e-8));
  EXPECT_FALSE(sol.residual_history.empty());
  EXPECT_EQ(sol.seed, 21u);
}

TEST(Hetero, Linearity) {
  const Case c;
  const auto f2 = SpectralField::from_function(c.grid, [](std::span<const double> x) {
    return cplx{std::sin(2.0 * kPi * x[0]), 0.0};
  });
  const SolverConfig cfg;
  const auto a = solve_hetero(c.real, c.f, cfg);
  const auto b = solve_hetero(c.real, f2, cfg);
  const auto ab = solve_hetero(c.real, c.f + f2, cfg);
  const double scale = norm(ab.u_eps, NormKind::L2);
  EXPECT_LT(norm(ab.u_eps - a.u_eps - b.u_eps, NormKind::L2), 10.0 * cfg.tolerance * scale);
}

TEST(Hetero, StagnationCarriesHistory) {
  const Case c;
  SolverConfig cfg;
  cfg.max_iterations = 2;
  cfg.restart = 1;
  cfg.tolerance = 1e-12;
  try {
    (void)solve_hetero(c.real, c.f, cfg);
    FAIL() << "expected stagnation";
  } catch (const SolverStagnation& e) {
    EXPECT_NE(std::string(e.what()).find("solver stagnation"), std::string::npos);
    EXPECT_EQ(e.residual_history().size(), 2u);
    EXPECT_GT(e.residual_history().back(), 1e-12);
  }
}

TEST(Hetero, RejectsMismatchedGrid) {
  const Case c;
  EXPECT_THROW(solve_hetero(c.real, default_source(TorusGrid(3, 16, 1.0)), SolverConfig{}), IncompatibleInputs);
}

TEST(ErrorMetrics, VanishWithoutPotential) {
  const TorusGrid g(3, 16, 1.0);
  const auto f = default_source(g);
  const FieldRealization zero{SpectralField(g), 0.5, 0, SynthesisMode::gaussian, 0.0};
  const auto b = solve_corrector(zero);
  const auto sol = solve_hetero(zero, f, SolverConfig{});
  const auto m = error_metrics(sol, solve_homogenized(f, 0.0), b);
  EXPECT_LT(m.l2_err, 1e-10);
  EXPECT_LT(m.h1_exp_err, 1e-10);
  EXPECT_LT(m.grad_corr_err, 1e-10);
  EXPECT_EQ(m.eps_u1_l2, 0.0);
}

TEST(ErrorMetrics, PhaseInvariant) {
  const Case c;
  const auto b = solve_corrector(c.real);
  const double rho = rho_discrete(SpectrumModel{}, c.grid, c.eps);
  const cplx phase = std::polar(1.0, 0.7);
  const auto fp = phase * c.f;
  const auto m1 = error_metrics(solve_hetero(c.real, c.f, SolverConfig{}), solve_homogenized(c.f, rho), b);
  const auto m2 = error_metrics(solve_hetero(c.real, fp, SolverConfig{}), solve_homogenized(fp, rho), b);
  EXPECT_NEAR(m1.l2_err, m2.l2_err, 1e-12);
  EXPECT_NEAR(m1.h1_exp_err, m2.h1_exp_err, 1e-12);
  EXPECT_NEAR(m1.grad_corr_err, m2.grad_corr_err, 1e-12);
  EXPECT_NEAR(m1.eps_u1_l2, m2.eps_u1_l2, 1e-12);
}
