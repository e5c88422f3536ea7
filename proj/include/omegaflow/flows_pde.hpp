#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "omegaflow/geometry.hpp"
#include "omegaflow/types.hpp"

namespace omegaflow {

// Parabolic potential flows driving the curvature density u = 1 + lap(phi)/2
// toward a prescribed positive density.  Time stepping is classical RK4 with
// the step chosen from the linearized stiffness each step.
struct PdeFlowOptions {
  double t_max = 50.0;
  // Fraction of the RK4 real-axis stability bound 2.785 / |lambda| used.
  double cfl = 0.4;
  // Converged once both sup|phi_dot| and the stationarity residual are below.
  double stop_tol = 1e-8;
  long max_steps = 2000000;
  // Comparison-principle slack: the running max of phi_dot must not increase,
  // nor the running min decrease, by more than this per step.
  double max_principle_slack = 1e-8;
  bool record_functionals = true;
  // Times at which the potential is recorded; the stepper lands on them.
  std::vector<double> snapshot_times;
  // Receives {t, dt, sup|phi_dot|, min phi_dot, max phi_dot, residual,
  // energy[, F0]} after every step.
  RowSink trace_sink;
};

struct PdeFlowResult {
  Eigen::ArrayXd phi;
  double t = 0.0;
  long steps = 0;
  bool converged = false;
  // Per accepted step (index 0 is the initial state with dt = 0).
  std::vector<double> times;
  std::vector<double> dts;
  std::vector<double> vdot_sup;    // sup |phi_dot|
  std::vector<double> vdot_min;    // min phi_dot
  std::vector<double> vdot_max;    // max phi_dot
  std::vector<double> residual;    // sup |u - target|
  std::vector<double> energy;      // integral of centered phi_dot^2 against u
  std::vector<double> f0;          // empty unless record_functionals
  std::vector<std::pair<double, Eigen::ArrayXd>> snapshots;
};

// phi_dot = 1 - f / u.  Stationary points have u = f; the energy decays and
// the running bounds on phi_dot contract (both are monitored, violations
// throw NumericError).
PdeFlowResult run_volume_flow(const GeometryBackend& geom, const DensityField& f,
                              const Eigen::ArrayXd& phi0, const PdeFlowOptions& opts);

// phi_dot = 1 - e^{f_log + phi} / u, the self-tightening variant whose
// stationarity condition u = e^{f_log + phi} determines phi itself.  For
// small f_log the solution is close to the linear solve
// lap(phi)/2 - phi = f_log.  No F0 column is recorded.
PdeFlowResult run_log_volume_flow(const GeometryBackend& geom,
                                  const Eigen::ArrayXd& f_log,
                                  const Eigen::ArrayXd& phi0, const PdeFlowOptions& opts);

// phi minus its reference mean.
Eigen::ArrayXd centered(const GeometryBackend& geom, const Eigen::ArrayXd& phi);

}  // namespace omegaflow
