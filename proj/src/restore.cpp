#include "manifold/restore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "manifold/baselines.hpp"
#include "manifold/parallel.hpp"
#include "manifold/rng.hpp"

namespace manifold {

namespace {

// half-sample symmetric reflection
inline int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

Image convolve_sym(const Image& img, const Eigen::MatrixXd& kernel) {
  const int kh = static_cast<int>(kernel.rows());
  const int kw = static_cast<int>(kernel.cols());
  const int cy = kh / 2, cx = kw / 2;
  Image out(img.width, img.height, 0.0);
  parallel_for(0, img.height, [&](int r) {
    for (int c = 0; c < img.width; ++c) {
      double acc = 0.0;
      for (int a = 0; a < kh; ++a) {
        const int rr = reflect(r + a - cy, img.height);
        for (int b = 0; b < kw; ++b)
          acc += kernel(a, b) * img.at(rr, reflect(c + b - cx, img.width));
      }
      out.at(r, c) = acc;
    }
  });
  return out;
}

// scatter with the same index map as convolve_sym, so adjointness is exact
Image convolve_sym_adjoint(const Image& v, const Eigen::MatrixXd& kernel) {
  const int kh = static_cast<int>(kernel.rows());
  const int kw = static_cast<int>(kernel.cols());
  const int cy = kh / 2, cx = kw / 2;
  Image out(v.width, v.height, 0.0);
  for (int r = 0; r < v.height; ++r)
    for (int c = 0; c < v.width; ++c) {
      const double val = v.at(r, c);
      if (val == 0.0) continue;
      for (int a = 0; a < kh; ++a) {
        const int rr = reflect(r + a - cy, v.height);
        for (int b = 0; b < kw; ++b)
          out.at(rr, reflect(c + b - cx, v.width)) += kernel(a, b) * val;
      }
    }
  return out;
}

Image crop_to_multiple(const Image& img, int q) {
  const int h = (img.height / q) * q;
  const int w = (img.width / q) * q;
  if (h == img.height && w == img.width) return img;
  Image out(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out.at(r, c) = img.at(r, c);
  return out;
}

Image subsample(const Image& img, int q) {
  Image out(img.width / q, img.height / q);
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c) out.at(r, c) = img.at(r * q, c * q);
  return out;
}

Image upsample_zero(const Image& img, int q) {
  Image out(img.width * q, img.height * q, 0.0);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) out.at(r * q, c * q) = img.at(r, c);
  return out;
}

void validate_op(const DegradationOp& op) {
  if (op.scale < 1) throw ParamError("scale must be >= 1");
  if (op.noise_sigma < 0.0) throw ParamError("noise sigma must be >= 0");
  if (op.blur.size() > 0) {
    if ((op.blur.array() < 0.0).any()) throw ParamError("kernel entries must be nonnegative");
    if (std::abs(op.blur.sum() - 1.0) > 1e-12) throw ParamError("kernel must sum to 1");
  }
}

}  // namespace

Eigen::MatrixXd gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0) throw ParamError("kernel size must be odd and positive");
  if (sigma <= 0.0) throw ParamError("sigma must be positive");
  const int c = size / 2;
  Eigen::MatrixXd k(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double di = i - c, dj = j - c;
      k(i, j) = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
    }
  return k / k.sum();
}

Eigen::MatrixXd uniform_kernel(int size) {
  if (size < 1 || size % 2 == 0) throw ParamError("kernel size must be odd and positive");
  return Eigen::MatrixXd::Constant(size, size, 1.0 / (size * size));
}

Image degrade_linear(const Image& x, const DegradationOp& op) {
  validate_op(op);
  Image img = op.scale > 1 ? crop_to_multiple(x, op.scale) : x;
  if (op.blur.size() > 0) img = convolve_sym(img, op.blur);
  if (op.scale > 1) img = subsample(img, op.scale);
  return img;
}

Image degrade(const Image& x, const DegradationOp& op, std::uint64_t seed) {
  Image y = degrade_linear(x, op);
  if (op.noise_sigma > 0.0) {
    Rng rng(seed);
    for (double& v : y.data) v += op.noise_sigma * rng.gaussian();
  }
  return y;
}

Image adjoint_degrade(const Image& v, const DegradationOp& op) {
  validate_op(op);
  Image img = op.scale > 1 ? upsample_zero(v, op.scale) : v;
  if (op.blur.size() > 0) img = convolve_sym_adjoint(img, op.blur);
  return img;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t) {
  if (t < 0.0) throw ParamError("threshold must be >= 0");
  return v.array().sign() * (v.array().abs() - t).max(0.0);
}

SparseCode code_patch(std::span<const double> y_patch, const LocalBasis& basis, double lambda,
                      int steps) {
  if (lambda < 0.0) throw ParamError("lambda must be >= 0");
  if (steps < 1) throw ParamError("steps must be >= 1");
  if (static_cast<int>(y_patch.size()) != basis.dim()) throw ParamError("patch dimension mismatch");

  Eigen::Map<const Eigen::VectorXd> y(y_patch.data(), static_cast<Eigen::Index>(y_patch.size()));
  const Eigen::VectorXd centered = y - basis.centroid;

  SparseCode code;
  code.coefficients = Eigen::VectorXd::Zero(basis.components());
  for (int t = 0; t < steps; ++t) {
    const Eigen::VectorXd grad_point =
        code.coefficients + basis.vectors.transpose() * (centered - basis.vectors * code.coefficients);
    code.coefficients = soft_threshold(grad_point, lambda);
  }
  return code;
}

Eigen::VectorXd reconstruct_patch(const SparseCode& code, const LocalBasis& basis) {
  if (code.coefficients.size() != basis.components())
    throw ParamError("coefficient count does not match basis");
  return basis.centroid + basis.vectors * code.coefficients;
}

double estimate_noise_sigma(const Image& img) {
  std::vector<double> diffs;
  diffs.reserve(img.size());
  const double inv_sqrt2 = 0.7071067811865475244;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c + 1 < img.width; ++c)
      diffs.push_back(std::abs(img.at(r, c + 1) - img.at(r, c)) * inv_sqrt2);
  if (diffs.empty()) return 0.0;
  std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
  return 1.4826 * diffs[diffs.size() / 2];
}

namespace {

double spectral_norm_sq(const DegradationOp& op, int h, int w, std::uint64_t seed) {
  // power iteration on Theta' Theta
  Rng rng(seed);
  Image v(w, h);
  for (double& x : v.data) x = rng.gaussian();
  double lambda = 1.0;
  for (int it = 0; it < 30; ++it) {
    double norm = 0.0;
    for (double x : v.data) norm += x * x;
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) return 1.0;
    for (double& x : v.data) x /= norm;
    const Image w2 = adjoint_degrade(degrade_linear(v, op), op);
    lambda = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) lambda += v.data[i] * w2.data[i];
    v = w2;
  }
  return std::max(lambda, 1e-12);
}

struct StrategyState {
  AffinityGraph graph;      // agnn, geod
  DiffusedGraph diffused;   // agnn
  ClusterModel goc_model;   // goc
  KmeansModel kmeans_model; // kmeans
};

LocalBasis patch_basis(const RestoreConfig& cfg, const PatchSet& train,
                       const StrategyState& state, std::span<const double> patch) {
  switch (cfg.strategy) {
    case Strategy::agnn: {
      const NeighborSet set = agnn_query(train, state.diffused, patch, cfg.agnn);
      return compute_pca(gather_rows(train.vectors, set.indices), train.dim());
    }
    case Strategy::geod: {
      const int k = cfg.geod_k > 0 ? cfg.geod_k : train.dim() + 1;
      const NeighborSet set = geodesic_neighbors(state.graph, train, patch, k);
      return compute_pca(gather_rows(train.vectors, set.indices), train.dim());
    }
    case Strategy::goc: {
      const int k = select_basis(patch, state.goc_model, cfg.goc.gamma, cfg.goc.r);
      return state.goc_model.bases[k];
    }
    case Strategy::kmeans: {
      const int k = kmeans_select(patch, state.kmeans_model);
      return state.kmeans_model.bases[k];
    }
  }
  throw ParamError("unknown strategy");
}

}  // namespace

Image restore(const Image& y, const DegradationOp& op, const RestoreConfig& cfg,
              std::uint64_t seed) {
  if (cfg.outer_iters < 1 || cfg.inner_iters < 1) throw ParamError("iteration counts must be >= 1");
  validate_op(op);

  std::uint64_t seed_state = seed;
  const std::uint64_t model_seed = split_seed(seed_state);
  const std::uint64_t power_seed = split_seed(seed_state);

  const double lambda = cfg.lambda >= 0.0 ? cfg.lambda : 0.05 * estimate_noise_sigma(y);

  // training patches come from the observation once and stay fixed
  const PatchSet train = extract_patches(y, cfg.patch_h, cfg.patch_w, cfg.stride);
  StrategyState state;
  switch (cfg.strategy) {
    case Strategy::agnn:
      state.graph = build_graph(train, cfg.agnn.s, cfg.agnn.c1);
      state.diffused = diffuse_graph(state.graph);
      break;
    case Strategy::geod:
      state.graph = build_graph(train, cfg.agnn.s, cfg.agnn.c1);
      break;
    case Strategy::goc:
      state.goc_model = build_model(train, cfg.goc, model_seed);
      break;
    case Strategy::kmeans:
      state.kmeans_model = kmeans_fit(train, cfg.kmeans_clusters, model_seed, cfg.kmeans_max_iter);
      break;
  }

  Image estimate = op.kind == TaskKind::superres ? bicubic_upsample(y, op.scale) : y;
  const double tau = 1.0 / spectral_norm_sq(op, estimate.height, estimate.width, power_seed);

  for (int outer = 0; outer < cfg.outer_iters; ++outer) {
    for (int inner = 0; inner < cfg.inner_iters; ++inner) {
      // proximal-gradient order: fidelity gradient step, then the model
      // projection. Ending a pass on the gradient step would map the
      // estimate straight back to y whenever the operator is the identity.
      Image residual = degrade_linear(estimate, op);
      for (std::size_t i = 0; i < residual.size(); ++i) residual.data[i] -= y.data[i];
      const Image grad = adjoint_degrade(residual, op);
      for (std::size_t i = 0; i < estimate.size(); ++i) estimate.data[i] -= tau * grad.data[i];

      PatchSet patches = extract_patches(estimate, cfg.patch_h, cfg.patch_w, cfg.stride);
      parallel_for(0, patches.count(), [&](int j) {
        const Eigen::VectorXd p = patches.vectors.row(j).transpose();
        const std::span<const double> pv(p.data(), static_cast<std::size_t>(p.size()));
        const LocalBasis basis = patch_basis(cfg, train, state, pv);
        const SparseCode code = code_patch(pv, basis, lambda, cfg.code_steps);
        patches.vectors.row(j) = reconstruct_patch(code, basis).transpose();
      });
      estimate = aggregate_patches(patches, {}, estimate.height, estimate.width);
    }
  }
  return estimate;
}

double psnr(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw ParamError("image size mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(255.0 * 255.0 / mse));
}

namespace {

// separable valid-region filter with a normalized 1-D window
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& img, const Eigen::VectorXd& g) {
  const int win = static_cast<int>(g.size());
  const int vh = static_cast<int>(img.rows()) - win + 1;
  const int vw = static_cast<int>(img.cols()) - win + 1;
  Eigen::MatrixXd rows(vh, img.cols());
  for (int r = 0; r < vh; ++r)
    for (int c = 0; c < img.cols(); ++c) {
      double acc = 0.0;
      for (int i = 0; i < win; ++i) acc += g(i) * img(r + i, c);
      rows(r, c) = acc;
    }
  Eigen::MatrixXd out(vh, vw);
  for (int r = 0; r < vh; ++r)
    for (int c = 0; c < vw; ++c) {
      double acc = 0.0;
      for (int j = 0; j < win; ++j) acc += g(j) * rows(r, c + j);
      out(r, c) = acc;
    }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw ParamError("image size mismatch");
  const int win = 11;
  if (a.width < win || a.height < win) throw ParamError("image smaller than SSIM window");

  Eigen::VectorXd g(win);
  const double sigma = 1.5;
  for (int i = 0; i < win; ++i) {
    const double d = i - win / 2;
    g(i) = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  g /= g.sum();

  Eigen::MatrixXd x(a.height, a.width), y(a.height, a.width);
  for (int r = 0; r < a.height; ++r)
    for (int c = 0; c < a.width; ++c) {
      x(r, c) = a.at(r, c);
      y(r, c) = b.at(r, c);
    }

  const Eigen::MatrixXd mx = filter_valid(x, g);
  const Eigen::MatrixXd my = filter_valid(y, g);
  const Eigen::MatrixXd sxx = filter_valid(x.cwiseProduct(x), g) - mx.cwiseProduct(mx);
  const Eigen::MatrixXd syy = filter_valid(y.cwiseProduct(y), g) - my.cwiseProduct(my);
  const Eigen::MatrixXd sxy = filter_valid(x.cwiseProduct(y), g) - mx.cwiseProduct(my);

  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);

  double total = 0.0;
  for (int r = 0; r < mx.rows(); ++r)
    for (int c = 0; c < mx.cols(); ++c)
      total += ((2 * mx(r, c) * my(r, c) + c1) * (2 * sxy(r, c) + c2)) /
               ((mx(r, c) * mx(r, c) + my(r, c) * my(r, c) + c1) * (sxx(r, c) + syy(r, c) + c2));
  return total / static_cast<double>(mx.rows() * mx.cols());
}

namespace {

double cubic_weight(double t) {
  // Catmull-Rom (a = -0.5)
  t = std::abs(t);
  if (t <= 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
  if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
  return 0.0;
}

}  // namespace

Image bicubic_upsample(const Image& img, int factor) {
  if (factor < 1) throw ParamError("factor must be >= 1");
  Image out(img.width * factor, img.height * factor);
  parallel_for(0, out.height, [&](int r) {
    const double sr = (r + 0.5) / factor - 0.5;
    const int r0 = static_cast<int>(std::floor(sr));
    for (int c = 0; c < out.width; ++c) {
      const double sc = (c + 0.5) / factor - 0.5;
      const int c0 = static_cast<int>(std::floor(sc));
      double acc = 0.0, wsum = 0.0;
      for (int a = -1; a <= 2; ++a) {
        const double wr = cubic_weight(sr - (r0 + a));
        const int rr = std::clamp(r0 + a, 0, img.height - 1);
        for (int b = -1; b <= 2; ++b) {
          const double w = wr * cubic_weight(sc - (c0 + b));
          acc += w * img.at(rr, std::clamp(c0 + b, 0, img.width - 1));
          wsum += w;
        }
      }
      out.at(r, c) = acc / wsum;
    }
  });
  return out;
}

LabeledPatches rotated_patch_dataset(const std::vector<Image>& refs, double step_deg,
                                     [[maybe_unused]] std::uint64_t seed) {
  if (refs.empty()) throw ParamError("need at least one reference patch");
  if (step_deg <= 0.0 || step_deg > 360.0) throw ParamError("step must be in (0, 360]");
  const int ph = refs[0].height;
  const int pw = refs[0].width;
  for (const auto& ref : refs)
    if (ref.height != ph || ref.width != pw) throw ParamError("reference sizes differ");

  const int angles = static_cast<int>(360.0 / step_deg);
  const double deg2rad = 0.017453292519943295;
  const double cy = (ph - 1) / 2.0;
  const double cx = (pw - 1) / 2.0;

  LabeledPatches out;
  out.patches.patch_h = ph;
  out.patches.patch_w = pw;
  out.patches.vectors.resize(static_cast<Eigen::Index>(refs.size()) * angles, ph * pw);
  out.patches.positions.assign(refs.size() * angles, {0, 0});
  out.labels.resize(refs.size() * angles);

  for (std::size_t ref_id = 0; ref_id < refs.size(); ++ref_id) {
    const Image& ref = refs[ref_id];
    for (int ai = 0; ai < angles; ++ai) {
      const double theta = ai * step_deg * deg2rad;
      const double cth = std::cos(theta), sth = std::sin(theta);
      const Eigen::Index row = static_cast<Eigen::Index>(ref_id) * angles + ai;
      out.labels[row] = static_cast<int>(ref_id);
      double* dst = out.patches.vectors.row(row).data();
      for (int r = 0; r < ph; ++r)
        for (int c = 0; c < pw; ++c) {
          // inverse rotation of the output grid point
          const double dy = r - cy, dx = c - cx;
          const double sy = std::clamp(cth * dy + sth * dx + cy, 0.0, ph - 1.0);
          const double sx = std::clamp(-sth * dy + cth * dx + cx, 0.0, pw - 1.0);
          const int y0 = std::min(static_cast<int>(sy), ph - 2);
          const int x0 = std::min(static_cast<int>(sx), pw - 2);
          const double fy = sy - y0, fx = sx - x0;
          *dst++ = (1 - fy) * (1 - fx) * ref.at(y0, x0) + (1 - fy) * fx * ref.at(y0, x0 + 1) +
                   fy * (1 - fx) * ref.at(y0 + 1, x0) + fy * fx * ref.at(y0 + 1, x0 + 1);
        }
    }
  }
  return out;
}

std::vector<Image> reference_patches(int count, int size, std::uint64_t seed) {
  if (count < 1 || size < 2) throw ParamError("need count >= 1 and size >= 2");
  Rng rng(seed);
  std::vector<Image> refs;
  const double pi = 3.14159265358979323846;
  for (int k = 0; k < count; ++k) {
    // smooth random field: a handful of low-frequency oriented waves, so
    // small rotations move the patch gently while distinct references stay
    // far apart
    Image ref(size, size, 128.0);
    const double cx = (size - 1) / 2.0;
    for (int comp = 0; comp < 6; ++comp) {
      const double ang = rng.uniform(0.0, pi);
      const double freq = rng.uniform(0.35, 0.85);
      const double phase = rng.uniform(0.0, 2.0 * pi);
      const double amp = rng.uniform(18.0, 34.0);
      for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
          const double u = (c - cx) * std::cos(ang) + (r - cx) * std::sin(ang);
          ref.at(r, c) += amp * std::sin(freq * u + phase);
        }
    }
    for (double& v : ref.data) v = std::min(255.0, std::max(0.0, v));
    refs.push_back(ref);
  }
  return refs;
}

RotationRates rotation_experiment_rates(const LabeledPatches& data, const AgnnParams& params,
                                        std::uint64_t seed) {
  const PatchSet& train = data.patches;
  const int m = train.count();
  if (m < 2) throw ParamError("dataset too small");
  const int classes = 1 + *std::max_element(data.labels.begin(), data.labels.end());

  const AffinityGraph graph = build_graph(train, params.s, params.c1);
  const DiffusedGraph astar = diffuse_graph(graph);

  std::vector<std::vector<int>> agnn_sets(m), euclid_sets(m), kmeans_sets(m);
  parallel_for(0, m, [&](int q) {
    const Eigen::VectorXd y = train.vectors.row(q).transpose();
    const std::span<const double> yv(y.data(), static_cast<std::size_t>(y.size()));
    const NeighborSet set = agnn_query(train, astar, yv, params);
    agnn_sets[q] = set.indices;

    // Euclidean neighbors at the same size, the query included
    Eigen::VectorXd d2 = (train.vectors.rowwise() - train.vectors.row(q)).rowwise().squaredNorm();
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    const int k = std::min<int>(set.size(), m);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
      if (d2(a) != d2(b)) return d2(a) < d2(b);
      return a < b;
    });
    euclid_sets[q].assign(order.begin(), order.begin() + k);
  });

  const KmeansModel km = kmeans_fit(train, classes, seed);
  std::vector<std::vector<int>> cluster_members(classes);
  for (int i = 0; i < m; ++i) cluster_members[km.assignments[i]].push_back(i);
  for (int q = 0; q < m; ++q) kmeans_sets[q] = cluster_members[km.assignments[q]];

  RotationRates rates;
  rates.agnn = correct_cluster_rate(agnn_sets, data.labels);
  rates.euclid = correct_cluster_rate(euclid_sets, data.labels);
  rates.kmeans = correct_cluster_rate(kmeans_sets, data.labels);
  return rates;
}

double correct_cluster_rate(const std::vector<std::vector<int>>& memberships,
                            const std::vector<int>& labels) {
  if (memberships.empty()) throw ParamError("no queries");
  double sum = 0.0;
  for (std::size_t q = 0; q < memberships.size(); ++q) {
    const auto& members = memberships[q];
    if (members.empty()) throw ParamError("empty membership set");
    if (q >= labels.size()) throw ParamError("label count mismatch");
    int hits = 0;
    for (int i : members) {
      if (i < 0 || i >= static_cast<int>(labels.size())) throw ParamError("member index out of range");
      if (labels[i] == labels[q]) ++hits;
    }
    sum += static_cast<double>(hits) / static_cast<double>(members.size());
  }
  return 100.0 * sum / static_cast<double>(memberships.size());
}

}  // namespace manifold
