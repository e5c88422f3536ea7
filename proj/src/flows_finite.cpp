#include "omegaflow/flows_finite.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "omegaflow/util.hpp"

namespace omegaflow {

namespace {

void check_options(const BalancingFlowOptions& opts) {
  if (!(opts.t_max > 0.0)) throw std::invalid_argument("balancing flow: t_max must be positive");
  if (!(opts.dt0 > 0.0) || opts.dt0 > opts.dt_max) {
    throw std::invalid_argument("balancing flow: need 0 < dt0 <= dt_max");
  }
  if (!(opts.dt_min > 0.0) || opts.dt_min > opts.dt0) {
    throw std::invalid_argument("balancing flow: need 0 < dt_min <= dt0");
  }
  double prev = -1.0;
  for (double s : opts.snapshot_times) {
    if (s < 0.0 || s > opts.t_max + 1e-12 || s <= prev) {
      throw std::invalid_argument("balancing flow: snapshot times must be increasing in [0, t_max]");
    }
    prev = s;
  }
}

HermitianInnerProduct step_from(const SectionBasis& basis, const HermitianInnerProduct& h,
                                const Eigen::MatrixXcd& mu0, double dt) {
  const Eigen::MatrixXcd l = cholesky_factor(h, "balancing_flow_step");
  const double rate = double(basis.k) * double(basis.k);
  const Eigen::MatrixXcd e = matrix_exp_hermitian(dt * rate * mu0);
  return HermitianInnerProduct{basis.k, hermitize(l * e * l.adjoint())};
}

}  // namespace

HermitianInnerProduct balancing_flow_step(const SectionBasis& basis,
                                          const HermitianInnerProduct& h,
                                          const DensityField& omega, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("balancing_flow_step: dt must be positive");
  const MomentMapValue mu = moment_map(basis, h, omega);
  return step_from(basis, h, mu.mu0, dt);
}

BalancingFlowResult run_balancing_flow(const SectionBasis& basis,
                                       const HermitianInnerProduct& h0,
                                       const DensityField& omega,
                                       const BalancingFlowOptions& opts) {
  check_options(opts);
  if (h0.k != basis.k) {
    throw std::invalid_argument("run_balancing_flow: tensor power mismatch");
  }
  validate_inner_product(h0);

  BalancingFlowResult res;
  res.h = h0;
  res.t = 0.0;

  MomentMapValue mu = moment_map(basis, res.h, omega);
  res.times.push_back(0.0);
  res.dts.push_back(0.0);
  res.mu0_history.push_back(mu.mu0_hs);
  res.mu_op_history.push_back(mu.mu_op);
  if (opts.trace_sink) opts.trace_sink({0.0, 0.0, mu.mu0_hs, mu.mu_op});

  std::size_t next_snap = 0;
  const auto record_due_snapshots = [&]() {
    while (next_snap < opts.snapshot_times.size() &&
           opts.snapshot_times[next_snap] <= res.t + 1e-12) {
      res.snapshots.emplace_back(opts.snapshot_times[next_snap], fs(basis, res.h).potential);
      res.metric_snapshots.emplace_back(opts.snapshot_times[next_snap], res.h);
      ++next_snap;
    }
  };
  record_due_snapshots();

  double dt = opts.dt0;
  while (res.steps < opts.max_steps) {
    const bool snaps_done = next_snap >= opts.snapshot_times.size();
    if (mu.mu0_hs <= opts.mu0_tol && snaps_done) {
      res.converged = true;
      break;
    }
    if (res.t >= opts.t_max - 1e-12) break;

    double horizon = opts.t_max;
    if (!snaps_done) horizon = std::min(horizon, opts.snapshot_times[next_snap]);
    const double step = std::min(dt, horizon - res.t);

    const HermitianInnerProduct h_new = step_from(basis, res.h, mu.mu0, step);
    const MomentMapValue mu_new = moment_map(basis, h_new, omega);
    if (mu_new.mu0_hs > mu.mu0_hs * (1.0 + opts.growth_tol) + 1e-14) {
      dt *= 0.5;
      if (dt < opts.dt_min) {
        throw ConvergenceError("run_balancing_flow: step size collapsed below " +
                               std::to_string(opts.dt_min) + " at t=" + std::to_string(res.t) +
                               " with |mu0|=" + std::to_string(mu.mu0_hs));
      }
      continue;
    }

    res.h = h_new;
    res.t += step;
    mu = mu_new;
    ++res.steps;
    res.times.push_back(res.t);
    res.dts.push_back(step);
    res.mu0_history.push_back(mu.mu0_hs);
    res.mu_op_history.push_back(mu.mu_op);
    if (opts.trace_sink) opts.trace_sink({res.t, step, mu.mu0_hs, mu.mu_op});
    record_due_snapshots();
    if (step >= dt) dt = std::min(dt * 1.2, opts.dt_max);
  }

  if (!res.converged && mu.mu0_hs <= opts.mu0_tol) res.converged = true;
  return res;
}

}  // namespace omegaflow
