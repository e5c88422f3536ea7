#pragma once

#include <memory>

#include "omegaflow/types.hpp"

namespace omegaflow {

enum class GeometryKind { Sphere, Torus };

namespace detail {
class SpectralOps;
// Gauss-Legendre nodes (ascending) and weights on [-1, 1].
void gauss_legendre(int n, Eigen::ArrayXd& x, Eigen::ArrayXd& w);
}

// Discretized model surface: quadrature nodes carrying the unit-mass
// reference Kahler form and a spectral Laplacian.
//
// Conventions (fixed here, relied on everywhere else):
//   * total volume is 1: weights sum to 1, all densities are taken against
//     the reference form;
//   * the Laplacian is normalized so that a fibrewise-metric potential psi
//     (weight e^{-k psi} times the reference weight) induces the curvature
//     density 1 + (1/2) lap(psi).  On the sphere this gives
//     lap(Y_lm) = -2 l (l+1) Y_lm for degree-l spherical harmonics; on the
//     torus the coordinate eigenvalues lap(cos x) = -cos x are used;
//   * fields are flat arrays over nodes, node = i * n2 + j with i indexing
//     theta (sphere) or x (torus) and j indexing phi or y.
class GeometryBackend {
 public:
  GeometryKind kind = GeometryKind::Sphere;
  int n1 = 0;
  int n2 = 0;

  // Per-node data, all of length n1 * n2.
  Eigen::ArrayXd weights;    // reference measure; sums to 1
  Eigen::ArrayXd coord1;     // theta in (0, pi) | x in [0, 2 pi)
  Eigen::ArrayXd coord2;     // phi in [0, 2 pi) | y in [0, 2 pi)
  Eigen::ArrayXd cos_theta;  // sphere only: Gauss-Legendre abscissa per node

  Eigen::Index num_nodes() const { return weights.size(); }

  double integrate(const Eigen::ArrayXd& f) const { return (weights * f).sum(); }
  // Volume is 1, so the reference mean is the same sum.
  double mean(const Eigen::ArrayXd& f) const { return integrate(f); }

  Eigen::ArrayXd laplacian(const Eigen::ArrayXd& f) const;

  // Largest |eigenvalue| representable on the grid; parabolic step control.
  double laplacian_spectral_radius() const;

  std::shared_ptr<const detail::SpectralOps> ops;
};

// Gauss-Legendre x trapezoid grid on the round model of CP^1, reference form
// of total mass 1.  Requires n_theta >= 8, n_phi >= 16.
std::shared_ptr<const GeometryBackend> make_sphere_backend(int n_theta, int n_phi);

// Uniform grid on R^2 / (2 pi Z)^2 with the flat unit-mass form.  Requires
// power-of-two n_x, n_y >= 16 (Fourier-diagonal Laplacian).
std::shared_ptr<const GeometryBackend> make_torus_backend(int n_x, int n_y);

// Orthonormal real spherical harmonic sampled on the grid: m >= 0 selects the
// cos(m phi) branch, m < 0 the sin(|m| phi) branch.  Test/diagnostic helper.
Eigen::ArrayXd spherical_harmonic(const GeometryBackend& geom, int ell, int m);

// Monge-Ampere density of the potential phi: u = 1 + (1/2) lap(phi).
// Always integrates to 1; throws PositivityError at the worst node if the
// induced form degenerates (values are never clamped).
DensityField ma_density(const GeometryBackend& geom, const Eigen::ArrayXd& potential);

// Validates role/positivity/unit mass of a candidate volume density.
void validate_volume_density(const GeometryBackend& geom, const DensityField& f,
                             const char* what);

}  // namespace omegaflow
