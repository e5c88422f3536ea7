#pragma once

#include <optional>
#include <vector>

#include "omegaflow/section_basis.hpp"
#include "omegaflow/types.hpp"

namespace omegaflow {

// Hermitian inner product on the degree-k sections, stored as the Gram matrix
// of the monomial basis: gram(a, b) = <e_a, e_b>.
struct HermitianInnerProduct {
  int k = 0;
  Eigen::MatrixXcd gram;
};

// Fibrewise metric on the k-th tensor power: weight e^{-k psi} times the
// reference weight.  The induced Kahler form has density 1 + (1/2) lap(psi)
// against the reference form (the Laplacian normalization makes this exact).
struct FibrewiseMetric {
  int k = 0;
  Eigen::ArrayXd potential;  // psi at the quadrature nodes
};

// Throws unless gram is Hermitian to 1e-14 and positive definite.
void validate_inner_product(const HermitianInnerProduct& h);

// Lower-triangular Cholesky factor L with gram = L L^*.  Falls back to a
// pivoted factorization for badly conditioned input; if that also finds a
// non-positive pivot, throws NotPositiveDefiniteError carrying the smallest
// eigenvalue.  The inverse factor defines the canonical orthonormal frame
// used by the moment-map and flow code: s = L^{-1} e.
Eigen::MatrixXcd cholesky_factor(const HermitianInnerProduct& h, const char* what);

// sum_p weights(p) * pointwise(p) * v(p) v(p)^*, with v the reference-weighted
// section evaluations.  All Gram-type integrals funnel through here; callers
// fold fibrewise weights and volume densities into `pointwise`.
Eigen::MatrixXcd weighted_gram(const SectionBasis& basis, const Eigen::ArrayXd& pointwise);

// L^2(Omega) inner product of sections under the fibrewise metric h:
// H_ab = integral of <e_a, e_b>_h against Omega.
HermitianInnerProduct hilb_omega(const SectionBasis& basis, const FibrewiseMetric& h,
                                 const DensityField& omega);

// Fubini-Study pullback of an inner product: potential
// psi(p) = (1/k) log( B_H(p) / (dim) ) with B_H(p) = sum |s_i(p)|^2_ref over
// an H-orthonormal basis, so that sum |s_i|^2_{FS(H)} = dim everywhere.
FibrewiseMetric fs(const SectionBasis& basis, const HermitianInnerProduct& h);

// One balancing iteration: Hilb_Omega after FS.
HermitianInnerProduct tk_step(const SectionBasis& basis, const HermitianInnerProduct& h,
                              const DensityField& omega);

struct TkRunOptions {
  int max_iterations = 2000;
  double mu0_tol = 1e-12;  // stop when the trace-free moment map is this small
  RowSink trace_sink;      // receives {iteration, |mu0|_HS} after every step
};

struct TkRunResult {
  HermitianInnerProduct h;
  int iterations = 0;
  bool converged = false;
  std::vector<double> mu0_history;  // ||mu0||_HS after each step
};

// Iterates tk_step to the balanced fixed point.
TkRunResult run_tk(const SectionBasis& basis, const HermitianInnerProduct& h0,
                   const DensityField& omega, const TkRunOptions& opts);

// Rescales to unit determinant.  Both the iteration and the flow move only
// along the determinant-preserving directions up to an overall ray, so
// metrics are compared after this normalization.
HermitianInnerProduct normalize_det(const HermitianInnerProduct& h);

enum class BergmanWeighting {
  SmoothVolume,  // sections orthonormalized in L^2 of the metric's own volume
  GivenVolume,   // sections orthonormalized in L^2(Omega)
};

// Bergman density rho_k(p) = sum |s_i(p)|^2_{h} over an orthonormal basis of
// the chosen L^2 structure.  `omega` is required for GivenVolume and ignored
// otherwise.
Eigen::ArrayXd bergman_density(const SectionBasis& basis, const FibrewiseMetric& h,
                               BergmanWeighting weighting,
                               const std::optional<DensityField>& omega = std::nullopt);

// Berezin transform with the squared-modulus Bergman kernel of L^2(Omega):
// Q_k(f)(p) = (1/k) u(p)^* S_f u(p) in the orthonormal frame, S_f the Gram
// integral of f.  Reproduces Q_k(1) = rho_k / k exactly.
Eigen::ArrayXd berezin_qk(const SectionBasis& basis, const FibrewiseMetric& h,
                          const DensityField& omega, const Eigen::ArrayXd& f);

// Balancing potential beta_k(p) = -k * tr(mu0_Omega mu(p)): the velocity of
// the normalized Fubini-Study potential along the rescaled balancing flow.
// At Bergman metrics of the reference it approaches 1 - Omega / omega^n.
Eigen::ArrayXd balancing_potential(const SectionBasis& basis, const HermitianInnerProduct& h,
                                   const DensityField& omega);

}  // namespace omegaflow
