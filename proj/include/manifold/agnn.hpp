#ifndef MANIFOLD_AGNN_HPP
#define MANIFOLD_AGNN_HPP

#include <span>
#include <string>
#include <vector>

#include "manifold/affinity.hpp"
#include "manifold/core.hpp"

namespace manifold {

struct NeighborSet {
  std::vector<int> indices;
  std::vector<double> affinities;  // geodesic baselines store distances here

  int size() const { return static_cast<int>(indices.size()); }
};

struct AgnnParams {
  double c1 = 10.0;  // Gaussian kernel scale
  double c2 = 0.9;   // affinity threshold fraction, in (0, 1)
  int kappa = 2;     // diffusion power
  int s = 35;        // graph neighbor count
  int min_size = 0;  // 0 means patch dimension + 1
};

// S = {i : astar_i >= c2 * max astar}, padded with the next-highest
// affinities up to min_size. An all-zero vector is a NumericError
// ("no affinity signal").
NeighborSet select_neighbors(const Eigen::VectorXd& astar, double c2, int min_size);

// init_test_affinity -> diffuse_test_affinity -> select_neighbors.
NeighborSet agnn_query(const PatchSet& train, const DiffusedGraph& astar,
                       std::span<const double> y, const AgnnParams& params);

// CSV rows (query_id, index, affinity), one block per set in order.
void save_neighbor_sets(std::span<const NeighborSet> sets, const std::string& path);
std::vector<NeighborSet> load_neighbor_sets(const std::string& path);

}  // namespace manifold

#endif
