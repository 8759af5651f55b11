#include "manifold/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

#include "manifold/parallel.hpp"
#include "manifold/rng.hpp"

namespace manifold {

namespace {

// distance-weighted probabilistic seeding; inverse-CDF sampling keeps the
// draw sequence identical across platforms
std::vector<int> seed_centroids(const RowMatrixXd& pts, int C, Rng& rng) {
  const int m = static_cast<int>(pts.rows());
  std::vector<int> chosen;
  chosen.reserve(C);
  chosen.push_back(rng.uniform_int(0, m - 1));

  Eigen::VectorXd d2 =
      (pts.rowwise() - pts.row(chosen[0])).rowwise().squaredNorm();
  d2(chosen[0]) = 0.0;
  while (static_cast<int>(chosen.size()) < C) {
    const double total = d2.sum();
    int pick = -1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (int i = 0; i < m; ++i) {
        target -= d2(i);
        if (target <= 0.0) {
          pick = i;
          break;
        }
      }
      if (pick < 0) pick = m - 1;
    } else {
      // all remaining points coincide with chosen centroids
      for (int i = 0; i < m; ++i)
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
          pick = i;
          break;
        }
      if (pick < 0) pick = rng.uniform_int(0, m - 1);
    }
    chosen.push_back(pick);
    Eigen::VectorXd nd2 = (pts.rowwise() - pts.row(pick)).rowwise().squaredNorm();
    d2 = d2.cwiseMin(nd2);
  }
  return chosen;
}

int nearest_centroid(const RowMatrixXd& centroids, const Eigen::RowVectorXd& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

KmeansModel kmeans_fit(const PatchSet& train, int C, std::uint64_t seed, int max_iter) {
  const int m = train.count();
  const int n = train.dim();
  if (C < 1 || C > m) throw ParamError("cluster count C must satisfy 1 <= C <= m");
  if (max_iter < 1) throw ParamError("max_iter must be >= 1");

  Rng rng(seed);
  const RowMatrixXd& pts = train.vectors;

  KmeansModel model;
  model.centroids.resize(C, n);
  {
    const std::vector<int> init = seed_centroids(pts, C, rng);
    for (int c = 0; c < C; ++c) model.centroids.row(c) = pts.row(init[c]);
  }
  model.assignments.assign(m, -1);

  std::vector<int> next(m);
  for (int iter = 0; iter < max_iter; ++iter) {
    parallel_for(0, m, [&](int i) { next[i] = nearest_centroid(model.centroids, pts.row(i)); });
    if (next == model.assignments) break;
    model.assignments = next;

    std::vector<int> count(C, 0);
    RowMatrixXd sums = RowMatrixXd::Zero(C, n);
    for (int i = 0; i < m; ++i) {
      sums.row(model.assignments[i]) += pts.row(i);
      ++count[model.assignments[i]];
    }
    for (int c = 0; c < C; ++c) {
      if (count[c] > 0) {
        model.centroids.row(c) = sums.row(c) / count[c];
      } else {
        // re-seed at the point farthest from its nearest centroid
        int far = 0;
        double far_d = -1.0;
        for (int i = 0; i < m; ++i) {
          const double d =
              (model.centroids.row(model.assignments[i]) - pts.row(i)).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        model.centroids.row(c) = pts.row(far);
      }
    }
  }

  // final consistent assignment, means, and per-cluster bases
  parallel_for(0, m, [&](int i) {
    model.assignments[i] = nearest_centroid(model.centroids, pts.row(i));
  });
  std::vector<std::vector<int>> members(C);
  for (int i = 0; i < m; ++i) members[model.assignments[i]].push_back(i);
  for (int c = 0; c < C; ++c)
    if (!members[c].empty()) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(n);
      for (int i : members[c]) mean += pts.row(i);
      model.centroids.row(c) = mean / static_cast<double>(members[c].size());
    }

  model.bases.resize(C);
  parallel_for(0, C, [&](int c) {
    if (static_cast<int>(members[c].size()) >= 2) {
      model.bases[c] = compute_pca(gather_rows(pts, members[c]), n);
    } else {
      LocalBasis flat;
      flat.centroid = model.centroids.row(c).transpose();
      flat.vectors.resize(n, 0);
      flat.eigenvalues.resize(0);
      model.bases[c] = flat;
    }
  });
  return model;
}

int kmeans_select(std::span<const double> y, const KmeansModel& model) {
  if (model.clusters() == 0) throw ParamError("empty model");
  if (static_cast<int>(y.size()) != model.centroids.cols())
    throw ParamError("query dimension mismatch");
  Eigen::Map<const Eigen::RowVectorXd> q(y.data(), static_cast<Eigen::Index>(y.size()));
  // nearest_centroid keeps the first (smallest) index on ties
  return nearest_centroid(model.centroids, q);
}

NeighborSet geodesic_neighbors(const AffinityGraph& graph, const PatchSet& train,
                               std::span<const double> y, int k) {
  const int m = train.count();
  if (graph.m() != m) throw ParamError("graph size does not match training set");
  if (k < 1 || k > m) throw ParamError("neighbor count k must satisfy 1 <= k <= m");
  if (static_cast<int>(y.size()) != train.dim()) throw ParamError("query dimension mismatch");

  Eigen::Map<const Eigen::RowVectorXd> q(y.data(), static_cast<Eigen::Index>(y.size()));
  Eigen::VectorXd d2 = (train.vectors.rowwise() - q).rowwise().squaredNorm();

  // attachment edges: s Euclidean-nearest training points
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  const int s = std::min(graph.s, m);
  std::partial_sort(order.begin(), order.begin() + s, order.end(), [&](int a, int b) {
    if (d2(a) != d2(b)) return d2(a) < d2(b);
    return a < b;
  });

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(m, kInf);
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
  for (int a = 0; a < s; ++a) {
    const int i = order[a];
    const double d = std::sqrt(d2(i));
    if (d < dist[i]) {
      dist[i] = d;
      heap.emplace(d, i);
    }
  }

  while (!heap.empty()) {
    const auto [d, i] = heap.top();
    heap.pop();
    if (d > dist[i]) continue;
    for (SparseRowMatrix::InnerIterator it(graph.entries, i); it; ++it) {
      const int j = static_cast<int>(it.col());
      if (j == i) continue;
      const double w = (train.vectors.row(i) - train.vectors.row(j)).norm();
      if (dist[i] + w < dist[j]) {
        dist[j] = dist[i] + w;
        heap.emplace(dist[j], j);
      }
    }
  }

  std::vector<int> reach;
  for (int i = 0; i < m; ++i)
    if (dist[i] < kInf) reach.push_back(i);
  if (static_cast<int>(reach.size()) < k) throw NumericError("insufficient connectivity");
  std::partial_sort(reach.begin(), reach.begin() + k, reach.end(), [&](int a, int b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return a < b;
  });

  NeighborSet set;
  for (int a = 0; a < k; ++a) {
    set.indices.push_back(reach[a]);
    set.affinities.push_back(dist[reach[a]]);
  }
  return set;
}

void save_kmeans(const KmeansModel& model, const std::string& csv_path,
                 const std::string& bases_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write " + csv_path);
  csv << "cluster_id,member_index\n";
  for (std::size_t i = 0; i < model.assignments.size(); ++i)
    csv << model.assignments[i] << "," << i << "\n";
  if (!csv) throw IoError("write failed for " + csv_path);

  std::ofstream bin(bases_path, std::ios::binary);
  if (!bin) throw IoError("cannot write " + bases_path);
  for (const auto& basis : model.bases) write_basis_block(bin, basis, "KMN1");
  if (!bin) throw IoError("write failed for " + bases_path);
}

KmeansModel load_kmeans(const std::string& csv_path, const std::string& bases_path) {
  std::ifstream csv(csv_path);
  if (!csv) throw IoError("cannot open " + csv_path);
  std::string line;
  std::getline(csv, line);  // header
  KmeansModel model;
  int max_cluster = -1;
  std::vector<std::pair<int, int>> rows;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    int cid = 0, idx = 0;
    char comma = 0;
    if (!(ss >> cid >> comma >> idx)) throw IoError("malformed row in " + csv_path);
    rows.emplace_back(cid, idx);
    max_cluster = std::max(max_cluster, cid);
  }
  model.assignments.assign(rows.size(), 0);
  for (const auto& [cid, idx] : rows) {
    if (idx < 0 || idx >= static_cast<int>(rows.size()))
      throw IoError("member index out of range in " + csv_path);
    model.assignments[idx] = cid;
  }

  std::ifstream bin(bases_path, std::ios::binary);
  if (!bin) throw IoError("cannot open " + bases_path);
  for (int c = 0; c <= max_cluster; ++c) model.bases.push_back(read_basis_block(bin, "KMN1"));

  const int n = model.bases.empty() ? 0 : model.bases[0].dim();
  model.centroids.resize(static_cast<Eigen::Index>(model.bases.size()), n);
  for (std::size_t c = 0; c < model.bases.size(); ++c)
    model.centroids.row(static_cast<Eigen::Index>(c)) = model.bases[c].centroid.transpose();
  return model;
}

}  // namespace manifold
