#include "omegaflow/section_basis.hpp"

#include <cmath>

namespace omegaflow {

SectionBasis make_section_basis(std::shared_ptr<const GeometryBackend> geom, int k) {
  if (!geom) throw std::invalid_argument("make_section_basis: null geometry");
  if (geom->kind != GeometryKind::Sphere) {
    throw UnsupportedError(
        "make_section_basis: holomorphic sections are not available for the flat-torus "
        "model (no ample line bundle); use the sphere backend");
  }
  if (k < 2 || k > 64) {
    throw ConfigError("make_section_basis: k must lie in [2, 64]");
  }

  SectionBasis basis;
  basis.geom = std::move(geom);
  basis.k = k;
  basis.dim = k + 1;
  const Eigen::Index nodes = basis.geom->num_nodes();
  basis.values_ref.resize(basis.dim, nodes);
  basis.log_mag_ref.resize(basis.dim, nodes);

  for (Eigen::Index p = 0; p < nodes; ++p) {
    const double t = basis.geom->cos_theta[p];
    // sigma = |z|^2 / (1 + |z|^2); Gauss-Legendre nodes are interior, so
    // sigma stays strictly inside (0, 1).
    const double sigma = 0.5 * (1.0 - t);
    const double log_sigma = std::log(sigma);
    const double log_1m_sigma = std::log1p(-sigma);
    const double phi = basis.geom->coord2[p];
    for (int j = 0; j <= k; ++j) {
      const double lm = 0.5 * (j * log_sigma + (k - j) * log_1m_sigma);
      basis.log_mag_ref(j, p) = lm;
      const double mag = std::exp(lm);
      basis.values_ref(j, p) = Complex(mag * std::cos(j * phi), mag * std::sin(j * phi));
    }
  }

  // log magnitudes are <= 0 by construction, so pointwise Gram entries
  // exp(lm_i + lm_j) can underflow but never overflow; verify finiteness.
  if (!basis.log_mag_ref.allFinite() || basis.log_mag_ref.maxCoeff() > 1e-12) {
    throw NumericError("make_section_basis: weighted evaluations left the stable range");
  }
  return basis;
}

}  // namespace omegaflow
