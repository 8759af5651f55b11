#ifndef MANIFOLD_AFFINITY_HPP
#define MANIFOLD_AFFINITY_HPP

#include <Eigen/SparseCore>
#include <span>
#include <string>

#include "manifold/core.hpp"

namespace manifold {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Symmetric Gaussian-kernel graph on the union-symmetrized s-NN support.
// Diagonal entries are 1 before diffusion.
struct AffinityGraph {
  SparseRowMatrix entries;  // m x m
  double c1 = 0.0;
  int s = 0;

  int m() const { return static_cast<int>(entries.rows()); }
};

// Row-wise replicator fixed points of the affinity graph, each row rescaled
// to unit max entry. Not symmetric in general.
struct DiffusedGraph {
  SparseRowMatrix entries;  // m x m, support subset of the input support
  int iterations_used = 0;  // max over rows
  double residual = 0.0;    // max final row update magnitude

  int m() const { return static_cast<int>(entries.rows()); }
};

// exp(-||u - v||^2 / (n c1^2)) with n = u.size(). c1 <= 0 is a ParamError.
double gaussian_affinity(std::span<const double> u, std::span<const double> v, double c1);

// Kernel weights to each node's s Euclidean-nearest neighbors, support
// symmetrized by union, self-affinity 1. Ties broken by lower index.
AffinityGraph build_graph(const PatchSet& train, int s, double c1);

// Per-row replicator dynamics v <- (v o (Av)) / (v' A v) restricted to the
// row support, from the sum-normalized row, until the max-norm change drops
// below tol or max_iter is hit. The payoff matrix excludes the diagonal;
// self-loops stay in the stored graph but must not reinforce themselves or
// every row converges to a pure self strategy.
DiffusedGraph diffuse_graph(const AffinityGraph& graph, int max_iter = 200, double tol = 1e-6);

// a_i = exp(-||y - d_i||^2 / (n c1^2))
Eigen::VectorXd init_test_affinity(std::span<const double> y, const PatchSet& train, double c1);

// (A*)^kappa a by successive sparse products. Negative entries of `a` are a
// ParamError.
Eigen::VectorXd diffuse_test_affinity(const DiffusedGraph& astar, const Eigen::VectorXd& a,
                                      int kappa);

// Binary format: magic "AFG1", little-endian u64 m, u64 nnz, then
// (u32 row, u32 col, f64 weight) triples sorted row-major.
void save_graph(const SparseRowMatrix& entries, const std::string& path);
SparseRowMatrix load_graph(const std::string& path);

}  // namespace manifold

#endif
