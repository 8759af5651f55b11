#include "manifold/goc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "manifold/baselines.hpp"
#include "manifold/parallel.hpp"

namespace manifold {

KnnTable::KnnTable(const PatchSet& train, int kmax) {
  m_ = train.count();
  if (m_ < 2) throw ParamError("need at least 2 training samples");
  kmax_ = std::min(kmax, m_ - 1);
  if (kmax_ < 1) throw ParamError("kmax must be >= 1");
  flat_.resize(static_cast<std::size_t>(m_) * kmax_);

  const Eigen::VectorXd sqnorm = train.vectors.rowwise().squaredNorm();
  parallel_for(0, m_, [&](int i) {
    Eigen::VectorXd d2 =
        (sqnorm.array() + sqnorm(i) -
         2.0 * (train.vectors * train.vectors.row(i).transpose()).array())
            .max(0.0);
    std::vector<int> order(m_);
    std::iota(order.begin(), order.end(), 0);
    order.erase(order.begin() + i);
    std::partial_sort(order.begin(), order.begin() + kmax_, order.end(), [&](int a, int b) {
      if (d2(a) != d2(b)) return d2(a) < d2(b);
      return a < b;
    });
    std::copy(order.begin(), order.begin() + kmax_,
              flat_.begin() + static_cast<std::size_t>(i) * kmax_);
  });
}

std::span<const int> KnnTable::neighbors(int i, int k) const {
  if (k < 1 || k > kmax_) throw ParamError("k outside precomputed range");
  return {flat_.data() + static_cast<std::size_t>(i) * kmax_, static_cast<std::size_t>(k)};
}

std::vector<int> seed_centers(const PatchSet& train, int C, std::uint64_t seed) {
  const int m = train.count();
  if (C < 1 || C > m) throw ParamError("cluster count C must satisfy 1 <= C <= m");

  const KmeansModel km = kmeans_fit(train, C, seed);
  std::vector<int> centers(C, -1);
  std::vector<double> best(C, std::numeric_limits<double>::infinity());
  for (int i = 0; i < m; ++i) {
    for (int c = 0; c < C; ++c) {
      const double d = (train.vectors.row(i) - km.centroids.row(c)).squaredNorm();
      if (d < best[c]) {
        best[c] = d;
        centers[c] = i;
      }
    }
  }
  return centers;
}

Cluster expand_cluster(const PatchSet& train, const KnnTable& table, int center, int K, int L) {
  const int m = train.count();
  if (center < 0 || center >= m) throw ParamError("center index out of range");
  if (K < 1 || K >= m) throw ParamError("K must satisfy 1 <= K < m");
  if (L < 0) throw ParamError("L must be >= 0");

  std::vector<char> in_set(m, 0);
  std::vector<int> frontier;
  in_set[center] = 1;
  for (int j : table.neighbors(center, K)) {
    in_set[j] = 1;
    frontier.push_back(j);
  }
  // expanding only the newly added members is equivalent to the full union
  std::vector<int> next;
  for (int l = 0; l < L && !frontier.empty(); ++l) {
    next.clear();
    for (int i : frontier)
      for (int j : table.neighbors(i, K))
        if (!in_set[j]) {
          in_set[j] = 1;
          next.push_back(j);
        }
    frontier.swap(next);
  }

  Cluster cluster;
  cluster.center_index = center;
  cluster.K = K;
  cluster.L = L;
  for (int i = 0; i < m; ++i)
    if (in_set[i]) cluster.members.push_back(i);
  return cluster;
}

Cluster expand_cluster(const PatchSet& train, int center, int K, int L) {
  const KnnTable table(train, std::max(K, 1));
  return expand_cluster(train, table, center, K, L);
}

int decay_index(const Eigen::Ref<const RowMatrixXd>& cluster_samples, double c3) {
  if (c3 <= 0.0 || c3 >= 1.0) throw ParamError("energy fraction c3 must be in (0, 1)");
  if (cluster_samples.rows() < 2) throw NumericError("cluster too small");

  const LocalBasis basis = compute_pca(cluster_samples, static_cast<int>(cluster_samples.cols()));
  const double total = basis.eigenvalues.sum();
  if (!(total > 0.0)) return 1;  // all-identical cluster

  double running = 0.0;
  for (int q = 0; q < basis.components(); ++q) {
    running += basis.eigenvalues(q);
    if (running >= c3 * total) return q + 1;
  }
  return std::max(basis.components(), 1);
}

double normalized_decay(const PatchSet& train, const KnnTable& table, int center, int L, int K,
                        double c3) {
  const Cluster cluster = expand_cluster(train, table, center, K, L);
  if (static_cast<int>(cluster.members.size()) < 2) throw NumericError("cluster too small");
  const int index = decay_index(gather_rows(train.vectors, cluster.members), c3);
  const int cap = std::min(static_cast<int>(cluster.members.size()) - 1, train.dim());
  return static_cast<double>(index) / static_cast<double>(cap);
}

double normalized_decay(const PatchSet& train, int center, int L, int K, double c3) {
  const KnnTable table(train, std::max(K, 1));
  return normalized_decay(train, table, center, L, K, c3);
}

std::pair<int, int> optimize_params(const PatchSet& train, const KnnTable& table, int center,
                                    const GocParams& params) {
  const int m = train.count();
  const int kmax = std::min(params.Kmax, m - 1);
  if (kmax < 1 || params.Lmax < 1 || params.L0 < 0) throw ParamError("invalid search bounds");

  int best_k = 1;
  double best_val = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= kmax; ++k) {
    const double val = normalized_decay(train, table, center, params.L0, k, params.c3);
    if (val < best_val) {
      best_val = val;
      best_k = k;
    }
  }

  int best_l = 1;
  best_val = std::numeric_limits<double>::infinity();
  for (int l = 1; l <= params.Lmax; ++l) {
    const double val = normalized_decay(train, table, center, l, best_k, params.c3);
    if (val < best_val) {
      best_val = val;
      best_l = l;
    }
  }
  return {best_l, best_k};
}

std::pair<int, int> optimize_params(const PatchSet& train, int center, const GocParams& params) {
  const KnnTable table(train, std::min(params.Kmax, train.count() - 1));
  return optimize_params(train, table, center, params);
}

ClusterModel build_model(const PatchSet& train, const GocParams& params, std::uint64_t seed) {
  if (params.C < 1) throw ParamError("cluster count C must be >= 1");
  const std::vector<int> centers = seed_centers(train, params.C, seed);
  const KnnTable table(train, std::min(params.Kmax, train.count() - 1));

  ClusterModel model;
  model.clusters.resize(centers.size());
  model.bases.resize(centers.size());
  parallel_for(0, static_cast<int>(centers.size()), [&](int c) {
    const auto [l, k] = optimize_params(train, table, centers[c], params);
    model.clusters[c] = expand_cluster(train, table, centers[c], k, l);
    model.bases[c] =
        compute_pca(gather_rows(train.vectors, model.clusters[c].members), train.dim());
  });
  return model;
}

int select_basis(std::span<const double> y, const ClusterModel& model, double gamma, int r) {
  if (model.size() == 0) throw ParamError("empty model");
  if (r < 1) throw ParamError("component count r must be >= 1");
  if (gamma < 0.0) throw ParamError("gamma must be >= 0");

  Eigen::Map<const Eigen::VectorXd> q(y.data(), static_cast<Eigen::Index>(y.size()));
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int c = 0; c < model.size(); ++c) {
    const LocalBasis& basis = model.bases[c];
    if (q.size() != basis.centroid.size()) throw ParamError("query dimension mismatch");
    const Eigen::VectorXd delta = q - basis.centroid;
    const double dist = delta.norm();
    double val;
    if (dist < 1e-9) {
      val = -gamma;  // correlation term attains its maximum 1 in the limit
    } else {
      const int rr = std::min<int>(r, basis.components());
      const double corr =
          rr > 0 ? (basis.vectors.leftCols(rr).transpose() * (delta / dist)).norm() : 0.0;
      val = dist - gamma * corr;
    }
    if (val < best_val) {
      best_val = val;
      best = c;
    }
  }
  return best;
}

void save_model(const ClusterModel& model, const std::string& csv_path,
                const std::string& bases_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write " + csv_path);
  csv << "cluster_id,member_index\n";
  for (int c = 0; c < model.size(); ++c) {
    const Cluster& cluster = model.clusters[c];
    csv << c << "," << cluster.center_index << "\n";
    for (int i : cluster.members)
      if (i != cluster.center_index) csv << c << "," << i << "\n";
  }
  if (!csv) throw IoError("write failed for " + csv_path);

  std::ofstream bin(bases_path, std::ios::binary);
  if (!bin) throw IoError("cannot write " + bases_path);
  for (const auto& basis : model.bases) write_basis_block(bin, basis, "GOC1");
  if (!bin) throw IoError("write failed for " + bases_path);
}

ClusterModel load_model(const std::string& csv_path, const std::string& bases_path) {
  std::ifstream csv(csv_path);
  if (!csv) throw IoError("cannot open " + csv_path);
  std::string line;
  std::getline(csv, line);  // header
  ClusterModel model;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    int cid = 0, idx = 0;
    char comma = 0;
    if (!(ss >> cid >> comma >> idx)) throw IoError("malformed row in " + csv_path);
    if (cid < 0) throw IoError("negative cluster id in " + csv_path);
    if (cid >= model.size()) model.clusters.resize(cid + 1);
    Cluster& cluster = model.clusters[cid];
    if (cluster.center_index < 0) cluster.center_index = idx;  // center row comes first
    cluster.members.push_back(idx);
  }
  for (auto& cluster : model.clusters) std::sort(cluster.members.begin(), cluster.members.end());

  std::ifstream bin(bases_path, std::ios::binary);
  if (!bin) throw IoError("cannot open " + bases_path);
  for (int c = 0; c < model.size(); ++c) model.bases.push_back(read_basis_block(bin, "GOC1"));
  return model;
}

}  // namespace manifold
