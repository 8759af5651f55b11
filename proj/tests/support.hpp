// Synthetic inputs shared by the unit and acceptance suites.
#ifndef MANIFOLD_TESTS_SUPPORT_HPP
#define MANIFOLD_TESTS_SUPPORT_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "manifold/core.hpp"
#include "manifold/rng.hpp"

namespace support {

inline manifold::PatchSet patchset_from_rows(const manifold::RowMatrixXd& rows) {
  manifold::PatchSet set;
  set.patch_h = 1;
  set.patch_w = static_cast<int>(rows.cols());
  set.vectors = rows;
  set.positions.assign(rows.rows(), {0, 0});
  return set;
}

inline manifold::Image random_image(int w, int h, std::uint64_t seed) {
  manifold::Rng rng(seed);
  manifold::Image img(w, h);
  for (double& v : img.data) v = rng.uniform(0.0, 255.0);
  return img;
}

// Textured crop: oriented stripe fields, a bright disk, and a smooth ramp.
// Stripe wavelengths stay above the 3x subsampling Nyquist so the structure
// survives degradation.
inline manifold::Image textured_image(int size) {
  manifold::Image img(size, size);
  const double pi = 3.14159265358979323846;
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const double x = static_cast<double>(c) / size;
      const double y = static_cast<double>(r) / size;
      double v = 90.0 + 50.0 * x + 25.0 * y;
      // diagonal stripes, wavelength ~10.7 px at size 96
      v += 55.0 * std::sin(2.0 * pi * (6.0 * (x + 0.7 * y)));
      // near-vertical band pattern in the lower half, wavelength ~12 px
      if (y > 0.55) v += 40.0 * std::sin(2.0 * pi * (8.0 * x - 2.0 * y));
      // bright disk with a sharp rim
      const double dx = x - 0.32, dy = y - 0.30;
      if (dx * dx + dy * dy < 0.04) v = 215.0 - 180.0 * (dx * dx + dy * dy) / 0.04;
      img.at(r, c) = std::min(255.0, std::max(0.0, v));
    }
  return img;
}

// Two concentric arcs, radial gap `gap`, consecutive points `spacing` apart
// along each arc. Returns the stacked points; the first `per_arc` rows are
// arc 0.
inline manifold::RowMatrixXd two_arcs(int per_arc, double gap, double spacing) {
  const double r0 = 2.0;
  const double r1 = r0 + gap;
  manifold::RowMatrixXd pts(2 * per_arc, 2);
  for (int i = 0; i < per_arc; ++i) {
    const double t0 = spacing * i / r0;
    pts(i, 0) = r0 * std::cos(t0);
    pts(i, 1) = r0 * std::sin(t0);
    const double t1 = spacing * i / r1;
    pts(per_arc + i, 0) = r1 * std::cos(t1);
    pts(per_arc + i, 1) = r1 * std::sin(t1);
  }
  return pts;
}

struct SwissRoll {
  manifold::RowMatrixXd points;   // m x 3
  std::vector<double> theta;      // spiral parameter per point
};

// Archimedean roll r = 1 + pitch * theta over theta in [1.5 pi, 4.5 pi]. The
// default pitch 0.15 and height 8 give a winding gap near 0.94 and neighbor
// spacing near 0.3 at m = 2000.
inline SwissRoll swiss_roll(int m, double noise_sigma, std::uint64_t seed, double pitch = 0.15,
                            double height = 8.0) {
  manifold::Rng rng(seed);
  SwissRoll roll;
  roll.points.resize(m, 3);
  roll.theta.resize(m);
  const double lo = 1.5 * 3.14159265358979323846;
  const double hi = 4.5 * 3.14159265358979323846;
  for (int i = 0; i < m; ++i) {
    const double th = rng.uniform(lo, hi);
    const double h = rng.uniform(0.0, height);
    const double r = 1.0 + pitch * th;
    roll.theta[i] = th;
    roll.points(i, 0) = r * std::cos(th) + noise_sigma * rng.gaussian();
    roll.points(i, 1) = h + noise_sigma * rng.gaussian();
    roll.points(i, 2) = r * std::sin(th) + noise_sigma * rng.gaussian();
  }
  return roll;
}

// Isometric embedding of 3-D points into dim-D space through a random
// orthonormal injection.
inline manifold::RowMatrixXd embed_isometric(const manifold::RowMatrixXd& pts3, int dim,
                                             std::uint64_t seed) {
  manifold::Rng rng(seed);
  Eigen::MatrixXd g(dim, 3);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < 3; ++j) g(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, 3);
  return pts3 * q.transpose();
}

// Orthonormal basis of the analytic tangent plane at parameter theta.
inline Eigen::Matrix<double, 3, 2> roll_tangent(double th, double pitch = 0.15) {
  const double b = pitch;
  const double r = 1.0 + b * th;
  Eigen::Vector3d t1(b * std::cos(th) - r * std::sin(th), 0.0,
                     b * std::sin(th) + r * std::cos(th));
  t1.normalize();
  Eigen::Matrix<double, 3, 2> basis;
  basis.col(0) = t1;
  basis.col(1) = Eigen::Vector3d(0.0, 1.0, 0.0);
  return basis;
}

// Mean principal angle (radians) between two 2-D subspaces with orthonormal
// columns.
inline double mean_principal_angle(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(u.transpose() * v);
  double total = 0.0;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    const double c = std::min(1.0, std::max(-1.0, svd.singularValues()(i)));
    total += std::acos(c);
  }
  return total / static_cast<double>(svd.singularValues().size());
}

// Two Gaussian blobs in dim-d space separated along the first axis.
inline manifold::RowMatrixXd two_blobs(int per_blob, int dim, double separation, double spread,
                                       std::uint64_t seed) {
  manifold::Rng rng(seed);
  manifold::RowMatrixXd pts(2 * per_blob, dim);
  for (int i = 0; i < 2 * per_blob; ++i) {
    const double center = i < per_blob ? 0.0 : separation;
    for (int d = 0; d < dim; ++d)
      pts(i, d) = (d == 0 ? center : 0.0) + spread * rng.gaussian();
  }
  return pts;
}

}  // namespace support

#endif
