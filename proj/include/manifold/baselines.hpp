#ifndef MANIFOLD_BASELINES_HPP
#define MANIFOLD_BASELINES_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "manifold/affinity.hpp"
#include "manifold/agnn.hpp"
#include "manifold/core.hpp"

namespace manifold {

struct KmeansModel {
  RowMatrixXd centroids;         // C x n
  std::vector<int> assignments;  // per training point
  std::vector<LocalBasis> bases = {};

  int clusters() const { return static_cast<int>(centroids.rows()); }
};

// Lloyd iterations from distance-weighted probabilistic seeding. An empty
// cluster is re-seeded at the point farthest from its nearest centroid.
// Per-cluster PCA bases are computed after convergence; single-member
// clusters get a centroid-only basis.
KmeansModel kmeans_fit(const PatchSet& train, int C, std::uint64_t seed, int max_iter = 100);

// Nearest centroid, ties to the smaller index.
int kmeans_select(std::span<const double> y, const KmeansModel& model);

// Attach y to its s Euclidean-nearest training points (s from the graph),
// use Euclidean edge lengths on the graph support, run Dijkstra, return the
// k geodesic-nearest training points. The affinities field holds geodesic
// distances. Fewer than k reachable nodes is a NumericError.
NeighborSet geodesic_neighbors(const AffinityGraph& graph, const PatchSet& train,
                               std::span<const double> y, int k);

// Same layout as the cluster-model serialization but with magic "KMN1".
void save_kmeans(const KmeansModel& model, const std::string& csv_path,
                 const std::string& bases_path);
KmeansModel load_kmeans(const std::string& csv_path, const std::string& bases_path);

}  // namespace manifold

#endif
