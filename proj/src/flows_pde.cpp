#include "omegaflow/flows_pde.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace omegaflow {

namespace {

// RK4 real-axis stability interval.
constexpr double kRk4Stability = 2.785;

// Every callback receives the potential together with its volume density so
// the runner can share one density evaluation per step between the trace row,
// the stability bound, and the first Runge-Kutta stage.
struct Problem {
  std::function<Eigen::ArrayXd(const Eigen::ArrayXd&, const Eigen::ArrayXd&)> velocity;
  std::function<double(const Eigen::ArrayXd&, const Eigen::ArrayXd&)> stable_dt;
  std::function<double(const Eigen::ArrayXd&, const Eigen::ArrayXd&)> residual;
  const DensityField* f0_density = nullptr;
};

void check_options(const GeometryBackend& geom, const Eigen::ArrayXd& phi0,
                   const PdeFlowOptions& opts) {
  if (phi0.size() != geom.num_nodes()) {
    throw std::invalid_argument("pde flow: initial potential has wrong grid size");
  }
  if (!(opts.t_max > 0.0)) throw std::invalid_argument("pde flow: t_max must be positive");
  if (!(opts.cfl > 0.0) || opts.cfl > 1.0) {
    throw std::invalid_argument("pde flow: cfl must lie in (0, 1]");
  }
  if (!(opts.stop_tol > 0.0)) throw std::invalid_argument("pde flow: stop_tol must be positive");
  double prev = -1.0;
  for (double s : opts.snapshot_times) {
    if (s < 0.0 || s > opts.t_max + 1e-12 || s <= prev) {
      throw std::invalid_argument("pde flow: snapshot times must be increasing in [0, t_max]");
    }
    prev = s;
  }
}

PdeFlowResult run(const GeometryBackend& geom, const Problem& prob,
                  const Eigen::ArrayXd& phi0, const PdeFlowOptions& opts) {
  PdeFlowResult res;
  res.phi = phi0;
  res.t = 0.0;

  // Comparison principle: the range of phi_dot can only contract.
  double best_max = std::numeric_limits<double>::infinity();
  double best_min = -std::numeric_limits<double>::infinity();
  double cur_sup = 0.0;
  double cur_resid = 0.0;
  Eigen::ArrayXd u = ma_density(geom, res.phi).values;
  Eigen::ArrayXd v;

  const auto record = [&](double dt_used) {
    v = prob.velocity(res.phi, u);
    const double vmax = v.maxCoeff();
    const double vmin = v.minCoeff();
    if (vmax > best_max + opts.max_principle_slack ||
        vmin < best_min - opts.max_principle_slack) {
      throw NumericError("pde flow: comparison principle violated at t=" + std::to_string(res.t) +
                         " (range [" + std::to_string(vmin) + ", " + std::to_string(vmax) + "])");
    }
    best_max = std::min(best_max, vmax);
    best_min = std::max(best_min, vmin);
    cur_sup = std::max(std::abs(vmax), std::abs(vmin));
    cur_resid = prob.residual(res.phi, u);

    const double vbar = geom.integrate(v * u);
    res.times.push_back(res.t);
    res.dts.push_back(dt_used);
    res.vdot_sup.push_back(cur_sup);
    res.vdot_min.push_back(vmin);
    res.vdot_max.push_back(vmax);
    res.residual.push_back(cur_resid);
    res.energy.push_back(geom.integrate((v - vbar).square() * u));
    if (prob.f0_density != nullptr) {
      // J = I/2 in complex dimension one and the Dirichlet integral is free
      // given the density, since u - 1 is half the Laplacian of phi (the
      // general path-quadrature route is cross-checked in tests).
      res.f0.push_back(geom.integrate(res.phi * (prob.f0_density->values - 0.5 * (1.0 + u))));
    }
    if (opts.trace_sink) {
      std::vector<double> row = {res.t,     dt_used,   cur_sup,
                                 vmin,      vmax,      cur_resid,
                                 res.energy.back()};
      if (prob.f0_density != nullptr) row.push_back(res.f0.back());
      opts.trace_sink(row);
    }
  };

  std::size_t next_snap = 0;
  const auto record_due_snapshots = [&]() {
    while (next_snap < opts.snapshot_times.size() &&
           opts.snapshot_times[next_snap] <= res.t + 1e-12) {
      res.snapshots.emplace_back(opts.snapshot_times[next_snap], res.phi);
      ++next_snap;
    }
  };

  record(0.0);
  record_due_snapshots();

  while (res.steps < opts.max_steps) {
    const bool snaps_done = next_snap >= opts.snapshot_times.size();
    if (cur_sup <= opts.stop_tol && cur_resid <= opts.stop_tol && snaps_done) {
      res.converged = true;
      break;
    }
    if (res.t >= opts.t_max - 1e-12) break;

    double horizon = opts.t_max;
    if (!snaps_done) horizon = std::min(horizon, opts.snapshot_times[next_snap]);
    const double dt = std::min(opts.cfl * prob.stable_dt(res.phi, u), horizon - res.t);

    const auto vel_at = [&](const Eigen::ArrayXd& p) {
      return prob.velocity(p, ma_density(geom, p).values);
    };
    const Eigen::ArrayXd& k1 = v;  // velocity at res.phi, computed by record
    const Eigen::ArrayXd k2 = vel_at(res.phi + 0.5 * dt * k1);
    const Eigen::ArrayXd k3 = vel_at(res.phi + 0.5 * dt * k2);
    const Eigen::ArrayXd k4 = vel_at(res.phi + dt * k3);
    res.phi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    res.t += dt;
    ++res.steps;
    u = ma_density(geom, res.phi).values;
    record(dt);
    record_due_snapshots();
  }

  if (!res.converged && cur_sup <= opts.stop_tol && cur_resid <= opts.stop_tol) {
    res.converged = true;
  }
  return res;
}

}  // namespace

PdeFlowResult run_volume_flow(const GeometryBackend& geom, const DensityField& f,
                              const Eigen::ArrayXd& phi0, const PdeFlowOptions& opts) {
  check_options(geom, phi0, opts);
  validate_volume_density(geom, f, "run_volume_flow");
  const double lam = geom.laplacian_spectral_radius();

  Problem prob;
  prob.velocity = [&f](const Eigen::ArrayXd&, const Eigen::ArrayXd& u) {
    return (1.0 - f.values / u).eval();
  };
  prob.stable_dt = [&f, lam](const Eigen::ArrayXd&, const Eigen::ArrayXd& u) {
    const double stiff = (f.values / (2.0 * u.square())).maxCoeff();
    return kRk4Stability / (lam * stiff);
  };
  prob.residual = [&f](const Eigen::ArrayXd&, const Eigen::ArrayXd& u) {
    return (u - f.values).abs().maxCoeff();
  };
  prob.f0_density = opts.record_functionals ? &f : nullptr;
  return run(geom, prob, phi0, opts);
}

PdeFlowResult run_log_volume_flow(const GeometryBackend& geom, const Eigen::ArrayXd& f_log,
                                  const Eigen::ArrayXd& phi0, const PdeFlowOptions& opts) {
  check_options(geom, phi0, opts);
  if (f_log.size() != geom.num_nodes() || !f_log.isFinite().all()) {
    throw std::invalid_argument("run_log_volume_flow: bad log-density field");
  }
  const double lam = geom.laplacian_spectral_radius();

  Problem prob;
  prob.velocity = [&f_log](const Eigen::ArrayXd& phi, const Eigen::ArrayXd& u) {
    return (1.0 - (f_log + phi).exp() / u).eval();
  };
  prob.stable_dt = [&f_log, lam](const Eigen::ArrayXd& phi, const Eigen::ArrayXd& u) {
    const Eigen::ArrayXd g = (f_log + phi).exp();
    const double stiff = (g / (2.0 * u.square())).maxCoeff();
    const double damp = (g / u).maxCoeff();
    return kRk4Stability / (lam * stiff + damp);
  };
  prob.residual = [&f_log](const Eigen::ArrayXd& phi, const Eigen::ArrayXd& u) {
    return (u - (f_log + phi).exp()).abs().maxCoeff();
  };
  return run(geom, prob, phi0, opts);
}

Eigen::ArrayXd centered(const GeometryBackend& geom, const Eigen::ArrayXd& phi) {
  if (phi.size() != geom.num_nodes()) {
    throw std::invalid_argument("centered: field has wrong grid size");
  }
  return phi - geom.mean(phi);
}

}  // namespace omegaflow
