#ifndef MANIFOLD_GOC_HPP
#define MANIFOLD_GOC_HPP

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "manifold/core.hpp"

namespace manifold {

struct Cluster {
  int center_index = -1;     // training index of the central sample
  std::vector<int> members;  // sorted, unique, contains center_index
  int L = 0;                 // expansion iterations used
  int K = 0;                 // neighbors per hop used
};

struct GocParams {
  int C = 64;           // cluster count
  double c3 = 0.5;      // energy fraction for the decay index, in (0, 1)
  int L0 = 1;           // initial L for the coordinate search
  int Kmax = 40;        // search bounds
  int Lmax = 5;
  double gamma = 150.0; // basis-selection weight
  int r = 8;            // leading components used in selection
};

struct ClusterModel {
  std::vector<Cluster> clusters;
  std::vector<LocalBasis> bases;  // one per cluster

  int size() const { return static_cast<int>(clusters.size()); }
};

// Precomputed neighbor lists shared across expansions of one training set.
// Row i holds the kmax nearest other samples of i, closest first, ties by
// lower index.
class KnnTable {
 public:
  KnnTable(const PatchSet& train, int kmax);
  std::span<const int> neighbors(int i, int k) const;
  int kmax() const { return kmax_; }

 private:
  int kmax_ = 0;
  int m_ = 0;
  std::vector<int> flat_;
};

// K-means centers snapped to the nearest training sample, one per cluster.
std::vector<int> seed_centers(const PatchSet& train, int C, std::uint64_t seed);

// S0 = {center} + its K nearest neighbors; each hop unions in the K nearest
// neighbors of every member. Returns S^L.
Cluster expand_cluster(const PatchSet& train, int center, int K, int L);
Cluster expand_cluster(const PatchSet& train, const KnnTable& table, int center, int K, int L);

// Smallest count of leading principal components holding >= c3 of the total
// centered energy. All-identical samples give 1.
int decay_index(const Eigen::Ref<const RowMatrixXd>& cluster_samples, double c3);

// decay_index normalized by min(|S| - 1, n), in (0, 1].
double normalized_decay(const PatchSet& train, int center, int L, int K, double c3);
double normalized_decay(const PatchSet& train, const KnnTable& table, int center, int L, int K,
                        double c3);

// Coordinate search: scan K at L = L0, then scan L at the best K. Ties go to
// the smaller value.
std::pair<int, int> optimize_params(const PatchSet& train, int center, const GocParams& params);
std::pair<int, int> optimize_params(const PatchSet& train, const KnnTable& table, int center,
                                    const GocParams& params);

// seed_centers, then per-center parameter search, expansion, and PCA.
ClusterModel build_model(const PatchSet& train, const GocParams& params, std::uint64_t seed);

// argmin over clusters of ||y - mu|| - gamma * ||(Phi_r)' (y - mu)|| / ||y - mu||,
// with the objective pinned to -gamma when y coincides with the centroid.
int select_basis(std::span<const double> y, const ClusterModel& model, double gamma, int r);

// Members CSV (cluster_id, member_index; center listed first) plus
// concatenated "GOC1" basis blocks.
void save_model(const ClusterModel& model, const std::string& csv_path,
                const std::string& bases_path);
ClusterModel load_model(const std::string& csv_path, const std::string& bases_path);

}  // namespace manifold

#endif
