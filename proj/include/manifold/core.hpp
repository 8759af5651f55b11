#ifndef MANIFOLD_CORE_HPP
#define MANIFOLD_CORE_HPP

#include <Eigen/Dense>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "manifold/errors.hpp"

namespace manifold {

using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Single-channel image, row-major intensities nominally in [0, 255].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // height * width

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
  std::size_t size() const { return data.size(); }
};

// Collection of vectorized patches; one row per patch, n = patch_h * patch_w.
struct PatchSet {
  int patch_h = 0;
  int patch_w = 0;
  RowMatrixXd vectors;                            // m x n
  std::vector<std::pair<int, int>> positions;     // (row, col) origin per patch

  int count() const { return static_cast<int>(vectors.rows()); }
  int dim() const { return static_cast<int>(vectors.cols()); }
  Eigen::VectorXd patch(int i) const { return vectors.row(i).transpose(); }
};

// Centroid plus orthonormal principal directions, eigenvalues nonincreasing.
struct LocalBasis {
  Eigen::VectorXd centroid;     // n
  Eigen::MatrixXd vectors;      // n x p, orthonormal columns
  Eigen::VectorXd eigenvalues;  // p

  int dim() const { return static_cast<int>(centroid.size()); }
  int components() const { return static_cast<int>(vectors.cols()); }
};

// Patches enumerated over row-major origins with the given stride.
// Throws ParamError("image too small") if a patch does not fit.
PatchSet extract_patches(const Image& img, int patch_h, int patch_w, int stride);

// Weighted per-pixel average of the covering patches. Empty `weights` means
// uniform weight 1. Throws NumericError("uncovered pixel") if some pixel of
// the out_h x out_w canvas is covered by no patch.
Image aggregate_patches(const PatchSet& patches, std::span<const double> weights,
                        int out_h, int out_w);

// PCA of the rows of `samples`: centroid = mean, covariance divisor = m.
// Component count = min(max_components, m - 1, n); eigenvalues below
// 1e-12 * trace are dropped. Eigenvector signs fixed so the entry of largest
// magnitude is positive. Throws NumericError("degenerate cluster") for m < 2.
LocalBasis compute_pca(const Eigen::Ref<const RowMatrixXd>& samples, int max_components);
LocalBasis compute_pca(const PatchSet& samples, int max_components);

// Rows of `source` selected by `indices`, in order.
RowMatrixXd gather_rows(const Eigen::Ref<const RowMatrixXd>& source,
                        std::span<const int> indices);

// Binary PGM (P5, maxval 255). PPM (P6) inputs are converted to luminance
// Y = 0.299 R + 0.587 G + 0.114 B rounded to nearest integer.
Image read_image(const std::string& path);
// Clamps to [0, 255] and rounds to nearest integer.
void write_pgm(const Image& img, const std::string& path);

// Basis block: 4-byte magic, little-endian u32 n, u32 p, f64 centroid[n],
// f64 vectors[n*p] column-major, f64 eigenvalues[p].
void write_basis_block(std::ostream& out, const LocalBasis& basis, const char magic[4]);
LocalBasis read_basis_block(std::istream& in, const char magic[4]);

}  // namespace manifold

#endif
