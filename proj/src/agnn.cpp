#include "manifold/agnn.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace manifold {

NeighborSet select_neighbors(const Eigen::VectorXd& astar, double c2, int min_size) {
  if (c2 <= 0.0 || c2 >= 1.0) throw ParamError("threshold c2 must be in (0, 1)");
  if (min_size < 1) throw ParamError("min_size must be >= 1");
  const int m = static_cast<int>(astar.size());
  const double peak = astar.maxCoeff();
  if (!(peak > 0.0)) throw NumericError("no affinity signal");

  const double cut = c2 * peak;
  NeighborSet set;
  for (int i = 0; i < m; ++i)
    if (astar(i) >= cut) {
      set.indices.push_back(i);
      set.affinities.push_back(astar(i));
    }

  if (set.size() < std::min(min_size, m)) {
    // pad with the highest remaining affinities, ties by lower index
    std::vector<int> rest;
    rest.reserve(m - set.size());
    for (int i = 0; i < m; ++i)
      if (astar(i) < cut) rest.push_back(i);
    std::sort(rest.begin(), rest.end(), [&](int a, int b) {
      if (astar(a) != astar(b)) return astar(a) > astar(b);
      return a < b;
    });
    for (int i : rest) {
      if (set.size() >= min_size) break;
      set.indices.push_back(i);
      set.affinities.push_back(astar(i));
    }
    // keep index order stable for callers that gather rows
    std::vector<int> order(set.indices.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return set.indices[a] < set.indices[b]; });
    NeighborSet sorted;
    sorted.indices.reserve(set.indices.size());
    sorted.affinities.reserve(set.indices.size());
    for (int k : order) {
      sorted.indices.push_back(set.indices[k]);
      sorted.affinities.push_back(set.affinities[k]);
    }
    return sorted;
  }
  return set;
}

NeighborSet agnn_query(const PatchSet& train, const DiffusedGraph& astar,
                       std::span<const double> y, const AgnnParams& params) {
  if (astar.m() != train.count()) throw ParamError("graph size does not match training set");
  const int min_size = params.min_size > 0 ? params.min_size : train.dim() + 1;
  const Eigen::VectorXd a = init_test_affinity(y, train, params.c1);
  const Eigen::VectorXd diffused = diffuse_test_affinity(astar, a, params.kappa);
  return select_neighbors(diffused, params.c2, min_size);
}

void save_neighbor_sets(std::span<const NeighborSet> sets, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "query_id,index,affinity\n";
  char buf[64];
  for (std::size_t q = 0; q < sets.size(); ++q)
    for (int k = 0; k < sets[q].size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", sets[q].affinities[k]);
      out << q << "," << sets[q].indices[k] << "," << buf << "\n";
    }
  if (!out) throw IoError("write failed for " + path);
}

std::vector<NeighborSet> load_neighbor_sets(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<NeighborSet> sets;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    long query = 0;
    int index = 0;
    double affinity = 0.0;
    char comma = 0;
    if (!(ss >> query >> comma >> index >> comma >> affinity))
      throw IoError("malformed row in " + path);
    if (query < 0) throw IoError("negative query id in " + path);
    if (static_cast<std::size_t>(query) >= sets.size()) sets.resize(query + 1);
    sets[query].indices.push_back(index);
    sets[query].affinities.push_back(affinity);
  }
  return sets;
}

}  // namespace manifold
