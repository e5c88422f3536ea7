#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "omegaflow/moment.hpp"
#include "omegaflow/quantization.hpp"
#include "omegaflow/types.hpp"

namespace omegaflow {

// Rescaled balancing flow on the space of Hermitian inner products.  In the
// orthonormal frame of the current metric the Gram matrix moves with velocity
// k^2 * mu0, so one step of size dt maps H to L * exp(dt * k^2 * mu0) * L^*
// where L is the Cholesky factor of H.  The k^2 rescaling matches continuum
// time: the induced Fubini-Study potential moves at -k * tr(mu0 mu(p)), which
// tends to the volume-flow velocity 1 - Omega / omega^n as k grows, and one
// fixed-point iteration of T_k corresponds to a time increment of about 1/k.
// The step is an exact geodesic segment and therefore stays inside the
// positive cone for every dt.
struct BalancingFlowOptions {
  double t_max = 10.0;
  double dt0 = 1e-3;
  double dt_min = 1e-9;
  double dt_max = 0.25;
  // Accept a step only if |mu0| does not grow by more than this relative
  // factor; rejected steps halve dt, accepted ones grow it by 1.2.
  double growth_tol = 1e-6;
  double mu0_tol = 1e-10;
  long max_steps = 200000;
  // Times at which the Fubini-Study potential of the current metric is
  // recorded; the stepper lands on them exactly.  Must be increasing.
  std::vector<double> snapshot_times;
  RowSink trace_sink;  // receives {t, dt, |mu0|_HS, |mu|_op} after every step
};

struct BalancingFlowResult {
  HermitianInnerProduct h;
  double t = 0.0;
  long steps = 0;
  bool converged = false;
  // Per accepted step: time after the step, step size, |mu0|_HS, |mu|_op.
  std::vector<double> times;
  std::vector<double> dts;
  std::vector<double> mu0_history;
  std::vector<double> mu_op_history;
  // Fubini-Study potentials, and the metrics themselves, at snapshot_times.
  std::vector<std::pair<double, Eigen::ArrayXd>> snapshots;
  std::vector<std::pair<double, HermitianInnerProduct>> metric_snapshots;
};

// Single accepted flow step of size dt; returns the new metric.
HermitianInnerProduct balancing_flow_step(const SectionBasis& basis,
                                          const HermitianInnerProduct& h,
                                          const DensityField& omega, double dt);

// Runs the flow until |mu0|_HS falls below mu0_tol or t reaches t_max.
// Throws ConvergenceError if the adaptive step collapses below dt_min.
BalancingFlowResult run_balancing_flow(const SectionBasis& basis,
                                       const HermitianInnerProduct& h0,
                                       const DensityField& omega,
                                       const BalancingFlowOptions& opts);

}  // namespace omegaflow
