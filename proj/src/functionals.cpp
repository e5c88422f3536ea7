#include "omegaflow/functionals.hpp"

#include <cmath>

namespace omegaflow {

namespace {

void check_potential(const GeometryBackend& geom, const Eigen::ArrayXd& phi, const char* what) {
  if (phi.size() != geom.num_nodes()) {
    throw std::invalid_argument(std::string(what) + ": potential has wrong grid size");
  }
}

}  // namespace

double aubin_i(const GeometryBackend& geom, const Eigen::ArrayXd& phi) {
  check_potential(geom, phi, "aubin_i");
  // phi * (1 - u) with u = 1 + lap(phi)/2 collapses to the Dirichlet form.
  return geom.integrate(phi * (-0.5 * geom.laplacian(phi)));
}

double aubin_j(const GeometryBackend& geom, const Eigen::ArrayXd& phi) {
  check_potential(geom, phi, "aubin_j");
  Eigen::ArrayXd x, w;
  detail::gauss_legendre(4, x, w);
  double j = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double s = 0.5 * (x[i] + 1.0);
    j += 0.5 * w[i] * aubin_i(geom, (s * phi).eval()) / s;
  }
  return j;
}

double f0_relative(const GeometryBackend& geom, const Eigen::ArrayXd& phi_a,
                   const Eigen::ArrayXd& phi_b, const DensityField& f) {
  check_potential(geom, phi_a, "f0_relative");
  check_potential(geom, phi_b, "f0_relative");
  validate_volume_density(geom, f, "f0_relative");
  const Eigen::ArrayXd v = phi_b - phi_a;
  const Eigen::ArrayXd base = f.values - 1.0 - 0.5 * geom.laplacian(phi_a);
  const Eigen::ArrayXd half_lap_v = 0.5 * geom.laplacian(v);
  // Integrand is affine in the path parameter; a 4-point rule is exact with
  // margin.
  Eigen::ArrayXd x, w;
  detail::gauss_legendre(4, x, w);
  double val = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double s = 0.5 * (x[i] + 1.0);
    val += 0.5 * w[i] * geom.integrate(v * (base - s * half_lap_v));
  }
  return val;
}

double f0_omega(const GeometryBackend& geom, const Eigen::ArrayXd& phi,
                const DensityField& f) {
  const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(geom.num_nodes());
  return f0_relative(geom, zero, phi, f);
}

double cocycle_defect(const GeometryBackend& geom, const Eigen::ArrayXd& phi_a,
                      const Eigen::ArrayXd& phi_b, const Eigen::ArrayXd& phi_c,
                      const DensityField& f) {
  return std::abs(f0_relative(geom, phi_a, phi_b, f) + f0_relative(geom, phi_b, phi_c, f) +
                  f0_relative(geom, phi_c, phi_a, f));
}

}  // namespace omegaflow
