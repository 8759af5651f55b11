#ifndef MANIFOLD_RESTORE_HPP
#define MANIFOLD_RESTORE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "manifold/agnn.hpp"
#include "manifold/core.hpp"
#include "manifold/goc.hpp"

namespace manifold {

enum class TaskKind { superres, deblur, denoise };

// y = D H x + noise: optional blur H, scale-q subsampling D at offset (0,0),
// additive white Gaussian noise.
struct DegradationOp {
  TaskKind kind = TaskKind::denoise;
  Eigen::MatrixXd blur;      // normalized kernel; empty means no blur
  int scale = 1;             // q, 1 for deblur/denoise
  double noise_sigma = 0.0;  // intensity units
};

// Normalized kernels; even sizes are a ParamError.
Eigen::MatrixXd gaussian_kernel(int size, double sigma);
Eigen::MatrixXd uniform_kernel(int size);

// Symmetric-boundary convolution, then subsampling, then seeded AWGN.
// Dimensions not divisible by the scale are cropped first.
Image degrade(const Image& x, const DegradationOp& op, std::uint64_t seed);
// The noiseless linear part of degrade.
Image degrade_linear(const Image& x, const DegradationOp& op);
// Exact adjoint of degrade_linear: <Hx, v> = <x, H'v> for all x, v.
Image adjoint_degrade(const Image& v, const DegradationOp& op);

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t);

struct SparseCode {
  Eigen::VectorXd coefficients;
  int basis_ref = -1;
};

// IST on 0.5 ||(y - centroid) - Phi a||^2 + lambda ||a||_1 with unit step;
// the objective is nonincreasing across steps for orthonormal Phi.
SparseCode code_patch(std::span<const double> y_patch, const LocalBasis& basis, double lambda,
                      int steps);

Eigen::VectorXd reconstruct_patch(const SparseCode& code, const LocalBasis& basis);

enum class Strategy { agnn, goc, kmeans, geod };

struct RestoreConfig {
  Strategy strategy = Strategy::agnn;
  double lambda = -1.0;  // < 0 selects 0.05 * MAD noise estimate of y
  int outer_iters = 4;   // basis-refresh count
  int inner_iters = 10;  // coding + fidelity passes per refresh
  int patch_h = 6;
  int patch_w = 6;
  int stride = 1;
  int code_steps = 2;  // IST steps per patch coding
  AgnnParams agnn;
  GocParams goc;
  int kmeans_clusters = 64;
  int kmeans_max_iter = 100;
  int geod_k = 0;  // 0 means patch dimension + 1
};

// Iterative restoration: bicubic-initialized for superresolution, training
// patches extracted once from the observation, per-pass patch coding in the
// selected local bases followed by one data-fidelity gradient step with
// tau = 1 / ||Theta||^2 (power iteration).
Image restore(const Image& y, const DegradationOp& op, const RestoreConfig& cfg,
              std::uint64_t seed);

// 10 log10(255^2 / MSE), capped at 99 dB.
double psnr(const Image& a, const Image& b);
// Mean local SSIM, 11x11 Gaussian window sigma = 1.5, K1 = 0.01, K2 = 0.03,
// L = 255, valid windows only.
double ssim(const Image& a, const Image& b);

// Center-aligned Catmull-Rom upsampling by an integer factor.
Image bicubic_upsample(const Image& img, int factor);

// Robust noise estimate from scaled horizontal first differences.
double estimate_noise_sigma(const Image& img);

struct LabeledPatches {
  PatchSet patches;
  std::vector<int> labels;  // reference id per patch
};

// Bilinear rotations of each reference about its center at angles
// 0, step, ..., 360 - step. Labels follow the reference order.
LabeledPatches rotated_patch_dataset(const std::vector<Image>& refs, double step_deg,
                                     std::uint64_t seed);

// Percentage of (query, member) pairs whose labels agree with the query,
// averaged over queries.
double correct_cluster_rate(const std::vector<std::vector<int>>& memberships,
                            const std::vector<int>& labels);

// Synthetic reference patches for the rotation experiment: oriented gratings
// with distinct frequencies plus modulated and corner patterns.
std::vector<Image> reference_patches(int count, int size, std::uint64_t seed);

struct RotationRates {
  double agnn = 0.0;
  double euclid = 0.0;  // same per-query neighborhood size as AGNN
  double kmeans = 0.0;  // true class count
};

// Correct-cluster rates of the three selection strategies on a labeled
// rotation dataset. Every patch doubles as a query; neighbor sets include
// the query itself for all three methods.
RotationRates rotation_experiment_rates(const LabeledPatches& data, const AgnnParams& params,
                                        std::uint64_t seed);

}  // namespace manifold

#endif
