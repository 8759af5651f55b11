#include "manifold/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "manifold/parallel.hpp"

namespace manifold {

PatchSet extract_patches(const Image& img, int patch_h, int patch_w, int stride) {
  if (patch_h < 1 || patch_w < 1) throw ParamError("patch dims must be positive");
  if (stride < 1) throw ParamError("stride must be >= 1");
  if (patch_h > img.height || patch_w > img.width) throw ParamError("image too small");

  const int rows = (img.height - patch_h) / stride + 1;
  const int cols = (img.width - patch_w) / stride + 1;
  const int n = patch_h * patch_w;

  PatchSet out;
  out.patch_h = patch_h;
  out.patch_w = patch_w;
  out.vectors.resize(static_cast<Eigen::Index>(rows) * cols, n);
  out.positions.resize(static_cast<std::size_t>(rows) * cols);

  parallel_for(0, rows, [&](int pr) {
    const int r0 = pr * stride;
    for (int pc = 0; pc < cols; ++pc) {
      const int c0 = pc * stride;
      const int idx = pr * cols + pc;
      out.positions[idx] = {r0, c0};
      double* dst = out.vectors.row(idx).data();
      for (int dr = 0; dr < patch_h; ++dr)
        for (int dc = 0; dc < patch_w; ++dc)
          *dst++ = img.at(r0 + dr, c0 + dc);
    }
  });
  return out;
}

Image aggregate_patches(const PatchSet& patches, std::span<const double> weights,
                        int out_h, int out_w) {
  if (!weights.empty() && static_cast<int>(weights.size()) != patches.count())
    throw ParamError("weight count mismatch");

  Image acc(out_w, out_h, 0.0);
  std::vector<double> wsum(acc.size(), 0.0);

  for (int i = 0; i < patches.count(); ++i) {
    const auto [r0, c0] = patches.positions[i];
    if (r0 < 0 || c0 < 0 || r0 + patches.patch_h > out_h || c0 + patches.patch_w > out_w)
      throw ParamError("patch position out of bounds");
    const double w = weights.empty() ? 1.0 : weights[i];
    const double* src = patches.vectors.row(i).data();
    for (int dr = 0; dr < patches.patch_h; ++dr)
      for (int dc = 0; dc < patches.patch_w; ++dc) {
        const std::size_t px = static_cast<std::size_t>(r0 + dr) * out_w + (c0 + dc);
        acc.data[px] += w * (*src++);
        wsum[px] += w;
      }
  }

  for (std::size_t px = 0; px < acc.size(); ++px) {
    if (wsum[px] == 0.0) throw NumericError("uncovered pixel");
    acc.data[px] /= wsum[px];
  }
  return acc;
}

namespace {

void fix_sign(Eigen::MatrixXd& vecs) {
  for (Eigen::Index j = 0; j < vecs.cols(); ++j) {
    Eigen::Index imax = 0;
    vecs.col(j).cwiseAbs().maxCoeff(&imax);
    if (vecs(imax, j) < 0.0) vecs.col(j) = -vecs.col(j);
  }
}

}  // namespace

LocalBasis compute_pca(const Eigen::Ref<const RowMatrixXd>& samples, int max_components) {
  const Eigen::Index m = samples.rows();
  const Eigen::Index n = samples.cols();
  if (m < 2) throw NumericError("degenerate cluster");

  LocalBasis basis;
  basis.centroid = samples.colwise().mean().transpose();
  RowMatrixXd centered = samples.rowwise() - basis.centroid.transpose();

  Eigen::VectorXd evals;
  Eigen::MatrixXd evecs;
  if (m > n) {
    // scatter route: n x n
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    evals = es.eigenvalues();
    evecs = es.eigenvectors();
  } else {
    // Gram route: m x m, cheaper when samples are few
    Eigen::MatrixXd gram = (centered * centered.transpose()) / static_cast<double>(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    evals = es.eigenvalues();
    Eigen::MatrixXd u = es.eigenvectors();
    evecs.resize(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double lam = evals(j);
      if (lam > 0.0) {
        Eigen::VectorXd dir = centered.transpose() * u.col(j);
        const double norm = dir.norm();
        evecs.col(j) = norm > 0.0 ? Eigen::VectorXd(dir / norm) : Eigen::VectorXd::Zero(n);
      } else {
        evecs.col(j).setZero();
      }
    }
  }

  // SelfAdjointEigenSolver sorts ascending; we want nonincreasing.
  const Eigen::Index avail = evals.size();
  const double trace = std::max(evals.sum(), 0.0);
  const double cutoff = 1e-12 * trace;
  int p = std::min<Eigen::Index>({static_cast<Eigen::Index>(max_components), m - 1, n});
  p = std::max(p, 0);

  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = avail - 1; j >= 0 && static_cast<int>(keep.size()) < p; --j) {
    if (evals(j) <= cutoff || evals(j) <= 0.0) break;  // ascending order: rest are smaller
    keep.push_back(j);
  }

  basis.vectors.resize(n, static_cast<Eigen::Index>(keep.size()));
  basis.eigenvalues.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    basis.vectors.col(static_cast<Eigen::Index>(k)) = evecs.col(keep[k]);
    basis.eigenvalues(static_cast<Eigen::Index>(k)) = evals(keep[k]);
  }
  fix_sign(basis.vectors);
  return basis;
}

LocalBasis compute_pca(const PatchSet& samples, int max_components) {
  return compute_pca(samples.vectors, max_components);
}

RowMatrixXd gather_rows(const Eigen::Ref<const RowMatrixXd>& source,
                        std::span<const int> indices) {
  RowMatrixXd out(static_cast<Eigen::Index>(indices.size()), source.cols());
  for (std::size_t i = 0; i < indices.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = source.row(indices[i]);
  return out;
}

namespace {

int read_pnm_token(std::istream& in) {
  // skips whitespace and '#' comments
  while (true) {
    int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  int value = 0;
  if (!(in >> value)) throw IoError("malformed PNM header");
  return value;
}

}  // namespace

Image read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || (m1 != '5' && m1 != '6')) throw IoError("unsupported image format in " + path);
  const bool color = (m1 == '6');
  const int w = read_pnm_token(in);
  const int h = read_pnm_token(in);
  const int maxval = read_pnm_token(in);
  if (w < 1 || h < 1 || maxval != 255) throw IoError("unsupported PNM header in " + path);
  in.get();  // single whitespace after maxval

  const std::size_t count = static_cast<std::size_t>(w) * h * (color ? 3 : 1);
  std::vector<unsigned char> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) throw IoError("truncated image " + path);

  Image img(w, h);
  if (color) {
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double y = 0.299 * raw[3 * i] + 0.587 * raw[3 * i + 1] + 0.114 * raw[3 * i + 2];
      img.data[i] = std::round(y);
    }
  } else {
    for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = raw[i];
  }
  return img;
}

namespace {

void put_u32_le(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int b = 0; b < 4; ++b) buf[b] = static_cast<unsigned char>(v >> (8 * b));
  out.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t get_u32_le(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(buf[b]) << (8 * b);
  return v;
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char buf[8];
  for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>(bits >> (8 * b));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

double get_f64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void write_basis_block(std::ostream& out, const LocalBasis& basis, const char magic[4]) {
  out.write(magic, 4);
  const int n = basis.dim();
  const int p = basis.components();
  put_u32_le(out, static_cast<std::uint32_t>(n));
  put_u32_le(out, static_cast<std::uint32_t>(p));
  for (int i = 0; i < n; ++i) put_f64(out, basis.centroid(i));
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) put_f64(out, basis.vectors(i, j));
  for (int j = 0; j < p; ++j) put_f64(out, basis.eigenvalues(j));
}

LocalBasis read_basis_block(std::istream& in, const char magic[4]) {
  char got[4];
  in.read(got, 4);
  if (!in || std::memcmp(got, magic, 4) != 0) throw IoError("bad basis block magic");
  const auto n = static_cast<int>(get_u32_le(in));
  const auto p = static_cast<int>(get_u32_le(in));
  LocalBasis basis;
  basis.centroid.resize(n);
  basis.vectors.resize(n, p);
  basis.eigenvalues.resize(p);
  for (int i = 0; i < n; ++i) basis.centroid(i) = get_f64(in);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) basis.vectors(i, j) = get_f64(in);
  for (int j = 0; j < p; ++j) basis.eigenvalues(j) = get_f64(in);
  if (!in) throw IoError("truncated basis block");
  return basis;
}

void write_pgm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = std::round(img.data[i]);
    raw[i] = static_cast<unsigned char>(std::min(255.0, std::max(0.0, v)));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace manifold
