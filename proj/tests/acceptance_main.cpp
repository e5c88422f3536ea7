// Acceptance gate for the shipped benchmark configurations.  Every check
// loads one of the files under --configs, reproduces the quantity it gates
// through the library (or, for the determinism check, through the full
// command pipelines), and prints exactly one PASS or FAIL line with the
// measured numbers.  Thresholds and time budgets are fixed constants here,
// next to the check that uses them; the configs only choose grids, targets,
// and degree lists.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "omegaflow/config.hpp"
#include "omegaflow/flows_finite.hpp"
#include "omegaflow/flows_pde.hpp"
#include "omegaflow/functionals.hpp"
#include "omegaflow/geometry.hpp"
#include "omegaflow/moment.hpp"
#include "omegaflow/pipelines.hpp"
#include "omegaflow/quantization.hpp"
#include "omegaflow/section_basis.hpp"
#include "omegaflow/util.hpp"

namespace {

using namespace omegaflow;
namespace fsys = std::filesystem;
using Clock = std::chrono::steady_clock;

// 1: fixed-point iteration on the tilted sphere target.
constexpr int kBalancedIterBudget = 500;
constexpr double kBalancedMu0 = 1e-10;
constexpr double kSeededAgreement = 1e-8;
constexpr double kBalancedSeconds = 30.0;
// 2: flow and iteration land on the same metric.
constexpr double kFlowTMax = 40.0;
constexpr double kFlowMu0Tol = 1e-11;
constexpr double kTkFlowDistance = 1e-8;
constexpr double kFlowSeconds = 60.0;
// 3: uniform-target closed form, every degree up to the cap.
constexpr int kClosedFormMaxK = 16;
constexpr double kClosedFormGramDev = 1e-9;
constexpr double kClosedFormRhoDev = 1e-10;
// 4-6: first-order rates for the degree sweeps.
constexpr double kRateLo = -1.4;
constexpr double kRateHi = -0.6;
constexpr double kDensityRateSeconds = 300.0;
// 7: integrated identities under seeded perturbations.
constexpr int kIdentityTrials = 100;
constexpr double kPairingResidual = 1e-6;
constexpr double kInequalitySlack = -1e-9;
constexpr double kIdentitySeconds = 120.0;
// 8: torus endpoint against the Fourier inversion of the target.
constexpr double kTorusResidual = 1e-7;
constexpr double kTorusOracleGap = 1e-7;
constexpr double kMonotoneSlack = 1e-12;  // times max(1, sup |F0|)
constexpr double kMaxPrincipleSlack = 1e-8;
constexpr int kOracleModes = 16;
constexpr double kTorusSeconds = 60.0;
// 9: sphere endpoint.
constexpr double kSphereResidual = 1e-5;
constexpr double kSphereVdot = 1e-6;
constexpr double kSphereSeconds = 300.0;
// 10: balancing flows approach the parabolic flow as the degree grows.
constexpr double kQuantRateLo = -1.6;
constexpr double kQuantRateHi = -0.6;
constexpr double kQuantSeconds = 1200.0;
// 11: energy functional algebra.
constexpr int kFunctionalTrials = 20;
constexpr double kIJIdentity = 1e-12;  // times max(1, |I|)
constexpr double kCocycle = 1e-9;
constexpr double kConvexitySlack = 1e-8;  // times max(1, sup |F0|)
constexpr int kConvexitySkip = 4;         // rows before divided differences settle

std::string str(const char* fmt, ...) {
  char buf[768];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw CheckFailure(what);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// State shared between checks so the expensive runs happen once.  Lazy so a
// failure in one check leaves the others able to recompute for themselves.
struct BalancedBundle {
  std::shared_ptr<const GeometryBackend> geom;
  DensityField omega;
  SectionBasis basis;
  HermitianInnerProduct h0;
  TkRunResult tk;
  double perturbation = 0.3;
};

struct TorusBundle {
  std::shared_ptr<const GeometryBackend> geom;
  DensityField omega;
  PdeFlowResult flow;
  double seconds = 0.0;
};

struct World {
  fsys::path config_dir;
  fsys::path work_dir;
  std::optional<BalancedBundle> balanced;
  std::optional<TorusBundle> torus;

  ExperimentConfig cfg(const std::string& name) const {
    return ExperimentConfig::load(config_dir / name);
  }

  const BalancedBundle& balanced_state() {
    if (!balanced) {
      const ExperimentConfig cfg = this->cfg("balanced.cfg");
      auto geom = make_geometry(cfg);
      DensityField omega = make_omega(cfg, *geom);
      const int k = static_cast<int>(cfg.get_long("k", 8));
      SectionBasis basis = make_section_basis(geom, k);
      const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(geom->num_nodes());
      HermitianInnerProduct h0 = hilb_omega(basis, FibrewiseMetric{k, zero}, omega);
      TkRunOptions topts;
      topts.max_iterations = 1000;
      topts.mu0_tol = 1e-12;
      TkRunResult tk = run_tk(basis, h0, omega, topts);
      balanced = BalancedBundle{geom, std::move(omega), std::move(basis), std::move(h0),
                                std::move(tk), cfg.get_double("perturbation_scale", 0.3)};
    }
    return *balanced;
  }

  const TorusBundle& torus_state() {
    if (!torus) {
      const ExperimentConfig cfg = this->cfg("calabi_torus.cfg");
      auto geom = make_geometry(cfg);
      DensityField omega = make_omega(cfg, *geom);
      PdeFlowOptions popts;
      popts.t_max = cfg.get_double("pde_t_max", 50.0);
      popts.cfl = cfg.get_double("pde_cfl", 0.4);
      popts.stop_tol = cfg.get_double("pde_tol", 1e-8);
      const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(geom->num_nodes());
      const auto t0 = Clock::now();
      PdeFlowResult flow = run_volume_flow(*geom, omega, zero, popts);
      const double secs = seconds_since(t0);
      torus = TorusBundle{geom, std::move(omega), std::move(flow), secs};
    }
    return *torus;
  }
};

HermitianInnerProduct perturbed_start(const SectionBasis& basis,
                                      const HermitianInnerProduct& h0, std::uint64_t seed,
                                      double scale) {
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXcd a = random_hermitian(rng, basis.dim, scale);
  const Eigen::MatrixXcd l = cholesky_factor(h0, "perturbed start");
  return HermitianInnerProduct{basis.k,
                               hermitize(l * matrix_exp_hermitian(a) * l.adjoint())};
}

// Mean-zero solution of lap(phi) = rhs on the torus by plane-wave projection
// with the normalized reference measure; independent of the flow code.
Eigen::ArrayXd torus_poisson(const GeometryBackend& geom, const Eigen::ArrayXd& rhs,
                             int max_mode) {
  Eigen::ArrayXd phi = Eigen::ArrayXd::Zero(geom.num_nodes());
  for (int a = -max_mode; a <= max_mode; ++a) {
    for (int b = -max_mode; b <= max_mode; ++b) {
      if (a == 0 && b == 0) continue;
      const Eigen::ArrayXd angle = a * geom.coord1 + b * geom.coord2;
      const Eigen::ArrayXd c = angle.cos();
      const Eigen::ArrayXd s = angle.sin();
      const double re = geom.integrate(c * rhs);
      const double im = geom.integrate(s * rhs);
      phi += (re * c + im * s) / (-double(a * a + b * b));
    }
  }
  return phi;
}

// ---------------------------------------------------------------------------

std::string check_balanced_fixed_point(World& world) {
  const auto t0 = Clock::now();
  const BalancedBundle& b = world.balanced_state();

  int crossed = -1;
  for (std::size_t i = 0; i < b.tk.mu0_history.size(); ++i) {
    if (b.tk.mu0_history[i] < kBalancedMu0) {
      crossed = static_cast<int>(i) + 1;
      break;
    }
  }
  require(crossed > 0 && crossed <= kBalancedIterBudget,
          str("|mu0| did not reach %.0e within %d iterations (crossed at %d)", kBalancedMu0,
              kBalancedIterBudget, crossed));

  TkRunOptions topts;
  topts.max_iterations = 1000;
  topts.mu0_tol = 1e-12;
  const TkRunResult ra =
      run_tk(b.basis, perturbed_start(b.basis, b.h0, 101, b.perturbation), b.omega, topts);
  const TkRunResult rb =
      run_tk(b.basis, perturbed_start(b.basis, b.h0, 202, b.perturbation), b.omega, topts);
  require(ra.converged && rb.converged, "a seeded start failed to converge");

  const Eigen::ArrayXd pa = centered(*b.geom, fs(b.basis, ra.h).potential);
  const Eigen::ArrayXd pb = centered(*b.geom, fs(b.basis, rb.h).potential);
  const double gap = (pa - pb).abs().maxCoeff();
  require(gap < kSeededAgreement,
          str("seeded potentials differ by %.3e (limit %.0e)", gap, kSeededAgreement));

  const double secs = seconds_since(t0);
  require(secs < kBalancedSeconds, str("took %.1fs (budget %.0fs)", secs, kBalancedSeconds));
  return str("|mu0| < %.0e at iteration %d; seeded potential gap %.2e; %.1fs", kBalancedMu0,
             crossed, gap, secs);
}

std::string check_flow_matches_iteration(World& world) {
  const auto t0 = Clock::now();
  const BalancedBundle& b = world.balanced_state();

  BalancingFlowOptions fopts;
  fopts.t_max = kFlowTMax;
  fopts.mu0_tol = kFlowMu0Tol;
  const BalancingFlowResult flow = run_balancing_flow(b.basis, b.h0, b.omega, fopts);
  require(flow.converged, str("flow still at |mu0| = %.3e after t = %.1f",
                              flow.mu0_history.back(), flow.t));

  const double dist = dist_geodesic(normalize_det(b.tk.h), normalize_det(flow.h));
  require(dist < kTkFlowDistance,
          str("iteration/flow distance %.3e (limit %.0e)", dist, kTkFlowDistance));

  const double secs = seconds_since(t0);
  require(secs < kFlowSeconds, str("took %.1fs (budget %.0fs)", secs, kFlowSeconds));
  return str("distance %.2e after %ld flow steps (t = %.2f); %.1fs", dist, flow.steps,
             flow.t, secs);
}

std::string check_uniform_closed_form(World& world) {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = world.cfg("bergman_ref.cfg");
  const auto geom = make_geometry(cfg);
  const DensityField omega = make_omega(cfg, *geom);
  const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(geom->num_nodes());

  double worst_gram = 0.0;
  double worst_rho = 0.0;
  for (int k = 2; k <= kClosedFormMaxK; ++k) {
    const SectionBasis basis = make_section_basis(geom, k);
    const HermitianInnerProduct h0 = hilb_omega(basis, FibrewiseMetric{k, zero}, omega);

    TkRunOptions topts;
    topts.max_iterations = 3000;
    topts.mu0_tol = 1e-13;
    const TkRunResult tk = run_tk(basis, perturbed_start(basis, h0, 4000 + k, 0.2), omega,
                                  topts);
    require(tk.mu0_history.back() < 1e-11,
            str("k=%d stalled at |mu0| = %.3e", k, tk.mu0_history.back()));

    Eigen::MatrixXcd ref = Eigen::MatrixXcd::Zero(k + 1, k + 1);
    for (int j = 0; j <= k; ++j) {
      ref(j, j) = std::exp(std::lgamma(j + 1.0) + std::lgamma(k - j + 1.0) -
                           std::lgamma(k + 2.0));
    }
    const Eigen::MatrixXcd ga = normalize_det(tk.h).gram;
    const Eigen::MatrixXcd gb = normalize_det(HermitianInnerProduct{k, ref}).gram;
    for (int r = 0; r <= k; ++r) {
      for (int c = 0; c <= k; ++c) {
        const double scale = std::sqrt(std::real(gb(r, r)) * std::real(gb(c, c)));
        worst_gram = std::max(worst_gram, std::abs(ga(r, c) - gb(r, c)) / scale);
      }
    }

    const Eigen::ArrayXd rho = bergman_density(basis, fs(basis, tk.h),
                                               BergmanWeighting::GivenVolume, omega);
    worst_rho = std::max(worst_rho, (rho - double(k + 1)).abs().maxCoeff());
  }

  require(worst_gram < kClosedFormGramDev,
          str("balanced Gram deviates from the Beta diagonal by %.3e (limit %.0e)",
              worst_gram, kClosedFormGramDev));
  require(worst_rho < kClosedFormRhoDev,
          str("projector density deviates from k+1 by %.3e (limit %.0e)", worst_rho,
              kClosedFormRhoDev));
  return str("k <= %d: Gram deviation %.2e, density deviation %.2e; %.1fs", kClosedFormMaxK,
             worst_gram, worst_rho, seconds_since(t0));
}

std::string check_projector_density_rate(World& world) {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = world.cfg("bergman_curved.cfg");
  const auto geom = make_geometry(cfg);
  const DensityField omega = make_omega(cfg, *geom);
  const std::vector<int> ks = cfg.get_int_list("k_list", {4, 8, 12, 16, 24, 32});
  const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(geom->num_nodes());
  const Eigen::ArrayXd target = omega.values.inverse();

  std::vector<double> kd;
  std::vector<double> errs;
  for (const int k : ks) {
    const SectionBasis basis = make_section_basis(geom, k);
    const Eigen::ArrayXd rho = bergman_density(basis, FibrewiseMetric{k, zero},
                                               BergmanWeighting::GivenVolume, omega);
    kd.push_back(k);
    errs.push_back((rho / double(k) - target).abs().maxCoeff());
  }
  const double slope = fit_loglog_slope(kd, errs);
  require(slope >= kRateLo && slope <= kRateHi,
          str("fitted rate %.3f outside [%.1f, %.1f]", slope, kRateLo, kRateHi));

  const double secs = seconds_since(t0);
  require(secs < kDensityRateSeconds,
          str("took %.1fs (budget %.0fs)", secs, kDensityRateSeconds));
  return str("sup error %.2e -> %.2e over k = %d..%d, rate %.2f; %.1fs", errs.front(),
             errs.back(), ks.front(), ks.back(), slope, secs);
}

std::string check_smoothing_operator_rate(World& world) {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = world.cfg("bergman_ref.cfg");
  const auto geom = make_geometry(cfg);
  const DensityField omega = make_omega(cfg, *geom);
  const std::vector<int> ks = cfg.get_int_list("k_list", {4, 8, 12, 16, 24, 32});

  // Same three test functions the sweep command tabulates.
  const Eigen::ArrayXd t = geom->cos_theta;
  const Eigen::ArrayXd sin_theta = (1.0 - t.square()).sqrt();
  const std::vector<Eigen::ArrayXd> test_functions = {
      t, sin_theta * geom->coord2.cos(), (0.2 * t).exp()};

  std::vector<double> kd(ks.begin(), ks.end());
  std::vector<double> slopes;
  for (const Eigen::ArrayXd& f : test_functions) {
    std::vector<double> errs;
    for (const int k : ks) {
      const SectionBasis basis = make_section_basis(geom, k);
      const FibrewiseMetric ref{k, Eigen::ArrayXd::Zero(geom->num_nodes())};
      const Eigen::ArrayXd q = berezin_qk(basis, ref, omega, f);
      errs.push_back((q - f).abs().maxCoeff());
    }
    slopes.push_back(fit_loglog_slope(kd, errs));
  }
  for (std::size_t i = 0; i < slopes.size(); ++i) {
    require(slopes[i] >= kRateLo && slopes[i] <= kRateHi,
            str("function %zu: fitted rate %.3f outside [%.1f, %.1f]", i + 1, slopes[i],
                kRateLo, kRateHi));
  }
  return str("rates %.2f / %.2f / %.2f over k = %d..%d; %.1fs", slopes[0], slopes[1],
             slopes[2], ks.front(), ks.back(), seconds_since(t0));
}

std::string check_balancing_potential_limit(World& world) {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = world.cfg("bergman_curved.cfg");
  const auto geom = make_geometry(cfg);
  const DensityField omega = make_omega(cfg, *geom);
  const std::vector<int> ks = cfg.get_int_list("k_list", {4, 8, 12, 16, 24, 32});
  const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(geom->num_nodes());
  const Eigen::ArrayXd target = 1.0 - omega.values;

  std::vector<double> kd;
  std::vector<double> errs;
  for (const int k : ks) {
    const SectionBasis basis = make_section_basis(geom, k);
    const HermitianInnerProduct h = hilb_omega(basis, FibrewiseMetric{k, zero}, omega);
    const Eigen::ArrayXd beta = balancing_potential(basis, h, omega);
    kd.push_back(k);
    errs.push_back((beta - target).abs().maxCoeff());
  }
  for (std::size_t i = 1; i < errs.size(); ++i) {
    require(errs[i] < errs[i - 1], str("sup error not decreasing at k = %d", ks[i]));
  }
  const double slope = fit_loglog_slope(kd, errs);
  require(slope >= kRateLo && slope <= kRateHi,
          str("fitted rate %.3f outside [%.1f, %.1f]", slope, kRateLo, kRateHi));
  return str("sup error %.2e -> %.2e decreasing, rate %.2f; %.1fs", errs.front(),
             errs.back(), slope, seconds_since(t0));
}

std::string check_moment_map_identities(World&) {
  const auto t0 = Clock::now();
  const auto geom = make_sphere_backend(32, 32);
  const Eigen::ArrayXd raw = 1.0 + 0.3 * geom->cos_theta;
  const DensityField omega{FieldRole::VolumeDensity, raw / (geom->weights * raw).sum()};
  const int k = 6;
  const SectionBasis basis = make_section_basis(geom, k);
  const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(geom->num_nodes());
  const HermitianInnerProduct h0 = hilb_omega(basis, FibrewiseMetric{k, zero}, omega);

  // Pairing of the moment-map derivative, with the derivative taken by
  // finite differences so the two sides come from independent routes.
  double worst_pairing = 0.0;
  for (int trial = 0; trial < kIdentityTrials; ++trial) {
    std::mt19937_64 rng(9100 + trial);
    const HermitianInnerProduct h{
        k, hermitize(cholesky_factor(h0, "trial") *
                     matrix_exp_hermitian(random_hermitian(rng, basis.dim, 0.4)) *
                     cholesky_factor(h0, "trial").adjoint())};
    const Eigen::MatrixXcd a = random_hermitian(rng, basis.dim, 1.0);
    const Eigen::MatrixXcd b = random_hermitian(rng, basis.dim, 1.0);
    const Eigen::MatrixXcd dmu = moment_map_derivative(basis, h, omega, a);
    const MomentMapValue mm = moment_map(basis, h, omega);
    const Eigen::ArrayXd ha = matrix_potential(basis, h, a);
    const Eigen::ArrayXd hb = matrix_potential(basis, h, b);
    const double lhs = std::real((b * dmu).trace()) + geom->integrate(ha * hb * omega.values);
    const double rhs = std::real((a * b * mm.mu).trace());
    worst_pairing = std::max(worst_pairing, std::abs(lhs - rhs));
  }
  require(worst_pairing < kPairingResidual,
          str("pairing residual %.3e (limit %.0e)", worst_pairing, kPairingResidual));

  // Operator-norm bound on the derivative.
  double worst_bound = 1e300;
  for (int trial = 0; trial < kIdentityTrials; ++trial) {
    std::mt19937_64 rng(9300 + trial);
    const HermitianInnerProduct h = perturbed_start(basis, h0, 9300 + trial, 0.4);
    const Eigen::MatrixXcd a = random_hermitian(rng, basis.dim, 1.0);
    const Eigen::MatrixXcd dmu = moment_map_derivative_exact(basis, h, omega, a);
    const MomentMapValue mm = moment_map(basis, h, omega);
    const double slack =
        2.0 * operator_norm_hermitian(a) * mm.mu_op - operator_norm_hermitian(dmu);
    worst_bound = std::min(worst_bound, slack);
  }
  require(worst_bound >= kInequalitySlack,
          str("derivative bound violated, slack %.3e", worst_bound));

  // Growth of the operator norm along geodesics.
  double worst_growth = 1e300;
  for (int trial = 0; trial < kIdentityTrials; ++trial) {
    const HermitianInnerProduct ha = perturbed_start(basis, h0, 9500 + 2 * trial, 0.5);
    const HermitianInnerProduct hb = perturbed_start(basis, h0, 9501 + 2 * trial, 0.5);
    const OpnormGrowthReport rep = opnorm_growth_check(basis, ha, hb, omega);
    worst_growth = std::min(worst_growth, rep.slack);
  }
  require(worst_growth >= kInequalitySlack,
          str("growth bound violated, slack %.3e", worst_growth));

  const double secs = seconds_since(t0);
  require(secs < kIdentitySeconds, str("took %.1fs (budget %.0fs)", secs, kIdentitySeconds));
  return str("%d trials each: pairing %.2e, bound slacks %.2e / %.2e; %.1fs",
             kIdentityTrials, worst_pairing, worst_bound, worst_growth, secs);
}

std::string check_torus_endpoint(World& world) {
  const TorusBundle& tb = world.torus_state();
  const PdeFlowResult& flow = tb.flow;
  require(flow.converged, str("flow not converged after t = %.1f", flow.t));
  require(flow.residual.back() < kTorusResidual,
          str("final residual %.3e (limit %.0e)", flow.residual.back(), kTorusResidual));

  const Eigen::ArrayXd phi_star =
      torus_poisson(*tb.geom, 2.0 * (tb.omega.values - 1.0), kOracleModes);
  const double oracle_gap =
      (centered(*tb.geom, flow.phi) - centered(*tb.geom, phi_star)).abs().maxCoeff();
  require(oracle_gap < kTorusOracleGap,
          str("gap to Fourier solution %.3e (limit %.0e)", oracle_gap, kTorusOracleGap));

  double f0_scale = 1.0;
  for (const double v : flow.f0) f0_scale = std::max(f0_scale, std::abs(v));
  for (std::size_t i = 1; i < flow.f0.size(); ++i) {
    require(flow.f0[i] <= flow.f0[i - 1] + kMonotoneSlack * f0_scale,
            str("F0 increased at step %zu", i));
  }
  for (std::size_t i = 1; i < flow.vdot_max.size(); ++i) {
    require(flow.vdot_max[i] <= flow.vdot_max[i - 1] + kMaxPrincipleSlack &&
                flow.vdot_min[i] >= flow.vdot_min[i - 1] - kMaxPrincipleSlack,
            str("velocity bounds expanded at step %zu", i));
  }

  require(tb.seconds < kTorusSeconds,
          str("took %.1fs (budget %.0fs)", tb.seconds, kTorusSeconds));
  return str("residual %.2e, oracle gap %.2e, F0 monotone over %zu steps; %.1fs",
             flow.residual.back(), oracle_gap, flow.f0.size() - 1, tb.seconds);
}

std::string check_sphere_endpoint(World& world) {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = world.cfg("calabi_sphere.cfg");
  const auto geom = make_geometry(cfg);
  const DensityField omega = make_omega(cfg, *geom);
  PdeFlowOptions popts;
  popts.t_max = cfg.get_double("pde_t_max", 60.0);
  popts.cfl = cfg.get_double("pde_cfl", 0.4);
  popts.stop_tol = cfg.get_double("pde_tol", 5e-7);
  const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(geom->num_nodes());
  const PdeFlowResult flow = run_volume_flow(*geom, omega, zero, popts);
  const double secs = seconds_since(t0);

  require(flow.converged, str("flow not converged after t = %.1f", flow.t));
  require(flow.residual.back() < kSphereResidual,
          str("final residual %.3e (limit %.0e)", flow.residual.back(), kSphereResidual));
  require(flow.vdot_sup.back() < kSphereVdot,
          str("final sup |phi_dot| %.3e (limit %.0e)", flow.vdot_sup.back(), kSphereVdot));
  require(secs < kSphereSeconds, str("took %.1fs (budget %.0fs)", secs, kSphereSeconds));

  // The stationary potential for the tilted-cosine target in closed form.
  const double a = cfg.get_double("omega_a", 0.3);
  const Eigen::ArrayXd analytic = -(a / 2.0) * geom->cos_theta;
  const double analytic_gap =
      (centered(*geom, flow.phi) - centered(*geom, analytic)).abs().maxCoeff();
  return str("residual %.2e, sup |phi_dot| %.2e, closed-form gap %.2e; %.1fs",
             flow.residual.back(), flow.vdot_sup.back(), analytic_gap, secs);
}

std::string check_flow_quantizes_pde(World& world) {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = world.cfg("quantization.cfg");
  const auto geom = make_geometry(cfg);
  const DensityField omega = make_omega(cfg, *geom);
  const std::vector<int> ks = cfg.get_int_list("k_list", {6, 10, 14, 18});
  const std::vector<double> times = cfg.get_double_list("sample_times", {0.3});
  const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(geom->num_nodes());

  PdeFlowOptions popts;
  popts.t_max = times.back();
  popts.cfl = cfg.get_double("pde_cfl", 0.4);
  popts.stop_tol = 1e-14;  // unreachable this far from stationarity: run to t_max
  popts.snapshot_times = times;
  const PdeFlowResult pde = run_volume_flow(*geom, omega, zero, popts);
  require(pde.snapshots.size() == times.size(), "parabolic flow missed a snapshot");
  std::vector<Eigen::ArrayXd> pde_density;
  for (const auto& [t, phi] : pde.snapshots) pde_density.push_back(ma_density(*geom, phi).values);

  std::vector<std::vector<double>> errs(times.size());
  for (const int k : ks) {
    const SectionBasis basis = make_section_basis(geom, k);
    const HermitianInnerProduct h0 = hilb_omega(basis, FibrewiseMetric{k, zero}, omega);
    BalancingFlowOptions fopts;
    fopts.t_max = times.back();
    fopts.dt_max = cfg.get_double("quant_dt_max", 1e-3);
    fopts.dt0 = std::min(fopts.dt0, fopts.dt_max);
    fopts.mu0_tol = 0.0;
    fopts.snapshot_times = times;
    const BalancingFlowResult flow = run_balancing_flow(basis, h0, omega, fopts);
    require(flow.snapshots.size() == times.size(),
            str("balancing flow missed a snapshot at k = %d", k));
    for (std::size_t s = 0; s < times.size(); ++s) {
      const Eigen::ArrayXd u_k = ma_density(*geom, flow.snapshots[s].second).values;
      errs[s].push_back((u_k - pde_density[s]).abs().maxCoeff());
    }
  }

  const std::vector<double> kd(ks.begin(), ks.end());
  std::string rates;
  for (std::size_t s = 0; s < times.size(); ++s) {
    for (std::size_t i = 1; i < errs[s].size(); ++i) {
      require(errs[s][i] < errs[s][i - 1],
              str("t = %.2f: density gap not decreasing at k = %d", times[s], ks[i]));
    }
    const double slope = fit_loglog_slope(kd, errs[s]);
    require(slope >= kQuantRateLo && slope <= kQuantRateHi,
            str("t = %.2f: fitted rate %.3f outside [%.1f, %.1f]", times[s], slope,
                kQuantRateLo, kQuantRateHi));
    rates += str("%s%.2f", rates.empty() ? "" : " / ", slope);
  }

  const double secs = seconds_since(t0);
  require(secs < kQuantSeconds, str("took %.1fs (budget %.0fs)", secs, kQuantSeconds));
  return str("density gap %.2e -> %.2e over k = %d..%d, rate %s; %.1fs", errs[0].front(),
             errs[0].back(), ks.front(), ks.back(), rates.c_str(), secs);
}

std::string check_functional_algebra(World& world) {
  const auto t0 = Clock::now();
  const auto sphere = make_sphere_backend(32, 32);
  const auto torus = make_torus_backend(32, 32);

  const auto random_smooth = [](const GeometryBackend& g, std::mt19937_64& rng) {
    std::normal_distribution<double> coef(0.0, 0.5);
    Eigen::ArrayXd phi = Eigen::ArrayXd::Zero(g.num_nodes());
    if (g.kind == GeometryKind::Sphere) {
      const Eigen::ArrayXd ct = g.cos_theta;
      const Eigen::ArrayXd st = (1.0 - ct.square()).sqrt();
      const std::vector<Eigen::ArrayXd> modes = {
          ct, ct.square(), st * g.coord2.cos(), st * g.coord2.sin(),
          st.square() * (2.0 * g.coord2).cos(), st * ct * g.coord2.cos()};
      for (const Eigen::ArrayXd& m : modes) phi += coef(rng) * m;
    } else {
      const std::vector<Eigen::ArrayXd> modes = {
          g.coord1.cos(), g.coord1.sin(), g.coord2.cos(), g.coord2.sin(),
          (g.coord1 + g.coord2).cos(), (2.0 * g.coord1).sin(),
          g.coord1.cos() * g.coord2.cos()};
      for (const Eigen::ArrayXd& m : modes) phi += coef(rng) * m;
    }
    return phi;
  };

  double worst_ij = 0.0;
  for (int trial = 0; trial < kFunctionalTrials; ++trial) {
    for (const GeometryBackend* g : {sphere.get(), torus.get()}) {
      std::mt19937_64 rng(7700 + trial);
      const Eigen::ArrayXd phi = random_smooth(*g, rng);
      const double i_val = aubin_i(*g, phi);
      const double j_val = aubin_j(*g, phi);
      worst_ij = std::max(worst_ij,
                          std::abs(i_val - 2.0 * j_val) / std::max(1.0, std::abs(i_val)));
    }
  }
  require(worst_ij < kIJIdentity,
          str("I = 2J residual %.3e (limit %.0e)", worst_ij, kIJIdentity));

  const TorusBundle& tb = world.torus_state();
  double worst_cocycle = 0.0;
  for (int trial = 0; trial < kFunctionalTrials; ++trial) {
    std::mt19937_64 rng(8800 + trial);
    const Eigen::ArrayXd pa = random_smooth(*tb.geom, rng);
    const Eigen::ArrayXd pb = random_smooth(*tb.geom, rng);
    const Eigen::ArrayXd pc = random_smooth(*tb.geom, rng);
    worst_cocycle = std::max(worst_cocycle, cocycle_defect(*tb.geom, pa, pb, pc, tb.omega));
  }
  require(worst_cocycle < kCocycle,
          str("cocycle defect %.3e (limit %.0e)", worst_cocycle, kCocycle));

  // Convexity of F0 along the recorded torus trace, via divided differences
  // on the adaptive time grid.
  const std::vector<double>& f0 = tb.flow.f0;
  const std::vector<double>& ts = tb.flow.times;
  double f0_scale = 1.0;
  for (const double v : f0) f0_scale = std::max(f0_scale, std::abs(v));
  double worst_convexity = 1e300;
  for (std::size_t i = kConvexitySkip; i + 1 < f0.size(); ++i) {
    const double g_prev = (f0[i] - f0[i - 1]) / (ts[i] - ts[i - 1]);
    const double g_next = (f0[i + 1] - f0[i]) / (ts[i + 1] - ts[i]);
    worst_convexity = std::min(worst_convexity, g_next - g_prev);
  }
  require(worst_convexity >= -kConvexitySlack * f0_scale,
          str("second difference %.3e below -%.0e * scale", worst_convexity,
              kConvexitySlack));

  return str("I=2J to %.1e, cocycle %.1e, convexity margin %.1e (rows %d+); %.1fs",
             worst_ij, worst_cocycle, worst_convexity, kConvexitySkip,
             seconds_since(t0));
}

std::string check_deterministic_traces(World& world) {
  const auto t0 = Clock::now();
  struct Job {
    const char* file;
    const char* name;
    void (*fn)(const ExperimentConfig&, const RunContext&);
  };
  const std::vector<Job> jobs = {
      {"balanced.cfg", "balanced", cmd_balanced},
      {"bergman_ref.cfg", "bergman_ref", cmd_bergman_asymptotics},
      {"bergman_curved.cfg", "bergman_curved", cmd_bergman_asymptotics},
      {"quantization.cfg", "quantization", cmd_quantization},
      {"calabi_torus.cfg", "calabi_torus", cmd_calabi},
      {"calabi_sphere.cfg", "calabi_sphere", cmd_calabi},
  };

  const auto csv_files = [](const fsys::path& dir) {
    std::vector<std::string> names;
    for (const auto& entry : fsys::directory_iterator(dir)) {
      if (entry.path().extension() == ".csv") names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
  };
  const auto slurp = [](const fsys::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  int compared = 0;
  for (const Job& job : jobs) {
    const ExperimentConfig cfg = world.cfg(job.file);
    const fsys::path da = world.work_dir / "det" / (std::string(job.name) + "_a");
    const fsys::path db = world.work_dir / "det" / (std::string(job.name) + "_b");
    job.fn(cfg, RunContext{da, 0, 1});
    job.fn(cfg, RunContext{db, 0, 2});

    const std::vector<std::string> fa = csv_files(da);
    require(fa == csv_files(db), str("%s: reruns produced different file sets", job.name));
    for (const std::string& name : fa) {
      require(slurp(da / name) == slurp(db / name),
              str("%s/%s differs between reruns", job.name, name.c_str()));
      ++compared;
    }
  }
  return str("%d trace files byte-identical across reruns (threads 1 vs 2); %.1fs",
             compared, seconds_since(t0));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks for the shipped benchmark configurations"};
  std::string config_dir = "configs";
  std::string work_dir;
  app.add_option("--configs", config_dir, "Directory holding the shipped .cfg files");
  app.add_option("--work", work_dir, "Scratch directory (default under the system temp dir)");
  CLI11_PARSE(app, argc, argv);

  World world;
  world.config_dir = config_dir;
  world.work_dir = work_dir.empty()
                       ? fsys::temp_directory_path() / "omegaflow-acceptance"
                       : fsys::path(work_dir);
  std::error_code ec;
  fsys::remove_all(world.work_dir, ec);
  fsys::create_directories(world.work_dir);

  struct Entry {
    const char* name;
    std::function<std::string(World&)> run;
  };
  const std::vector<Entry> checks = {
      {"balanced fixed point", check_balanced_fixed_point},
      {"iteration and flow agree", check_flow_matches_iteration},
      {"uniform-target closed form", check_uniform_closed_form},
      {"projector density rate", check_projector_density_rate},
      {"smoothing operator rate", check_smoothing_operator_rate},
      {"balancing potential limit", check_balancing_potential_limit},
      {"moment map identities", check_moment_map_identities},
      {"torus stationary endpoint", check_torus_endpoint},
      {"sphere stationary endpoint", check_sphere_endpoint},
      {"flows quantize the parabolic limit", check_flow_quantizes_pde},
      {"energy functional algebra", check_functional_algebra},
      {"deterministic traces", check_deterministic_traces},
  };

  int failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    std::string verdict;
    try {
      const std::string detail = checks[i].run(world);
      verdict = str("PASS %2zu %s (%s)", i + 1, checks[i].name, detail.c_str());
    } catch (const std::exception& ex) {
      ++failed;
      verdict = str("FAIL %2zu %s (%s)", i + 1, checks[i].name, ex.what());
    }
    std::puts(verdict.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu of %zu checks passed\n", checks.size() - failed, checks.size());
  return failed == 0 ? 0 : 1;
}
