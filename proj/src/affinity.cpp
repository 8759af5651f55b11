#include "manifold/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <vector>

#include "manifold/parallel.hpp"

namespace manifold {

double gaussian_affinity(std::span<const double> u, std::span<const double> v, double c1) {
  if (c1 <= 0.0) throw ParamError("kernel scale c1 must be positive");
  if (u.size() != v.size()) throw ParamError("vector length mismatch");
  double d2 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    d2 += d * d;
  }
  return std::exp(-d2 / (static_cast<double>(u.size()) * c1 * c1));
}

AffinityGraph build_graph(const PatchSet& train, int s, double c1) {
  const int m = train.count();
  const int n = train.dim();
  if (m < 2) throw ParamError("need at least 2 training samples");
  if (s < 1 || s >= m) throw ParamError("neighbor count s must satisfy 1 <= s < m");
  if (c1 <= 0.0) throw ParamError("kernel scale c1 must be positive");

  const double scale = static_cast<double>(n) * c1 * c1;
  const Eigen::VectorXd sqnorm = train.vectors.rowwise().squaredNorm();

  // per-node s nearest neighbors, ties by lower index
  std::vector<std::vector<int>> nn(m);
  parallel_for(0, m, [&](int i) {
    Eigen::VectorXd d2 =
        (sqnorm.array() + sqnorm(i) - 2.0 * (train.vectors * train.vectors.row(i).transpose()).array())
            .max(0.0);
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    order.erase(order.begin() + i);  // exclude self
    std::partial_sort(order.begin(), order.begin() + s, order.end(), [&](int a, int b) {
      if (d2(a) != d2(b)) return d2(a) < d2(b);
      return a < b;
    });
    nn[i].assign(order.begin(), order.begin() + s);
  });

  // union-symmetrized support
  std::vector<std::vector<int>> support(m);
  for (int i = 0; i < m; ++i)
    for (int j : nn[i]) {
      support[i].push_back(j);
      support[j].push_back(i);
    }

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(m) * (2 * s + 1));
  for (int i = 0; i < m; ++i) {
    auto& sup = support[i];
    std::sort(sup.begin(), sup.end());
    sup.erase(std::unique(sup.begin(), sup.end()), sup.end());
    trips.emplace_back(i, i, 1.0);
    for (int j : sup) {
      const double d2 = (train.vectors.row(i) - train.vectors.row(j)).squaredNorm();
      trips.emplace_back(i, j, std::exp(-d2 / scale));
    }
  }

  AffinityGraph graph;
  graph.c1 = c1;
  graph.s = s;
  graph.entries.resize(m, m);
  graph.entries.setFromTriplets(trips.begin(), trips.end());
  graph.entries.makeCompressed();
  return graph;
}

namespace {

// Replicator iteration of one row on the induced support subgraph.
struct RowResult {
  Eigen::VectorXd v;  // over support indices
  int iterations = 0;
  double residual = 0.0;
};

RowResult diffuse_row(const SparseRowMatrix& A, std::span<const int> support,
                      const Eigen::VectorXd& init, int max_iter, double tol) {
  const int k = static_cast<int>(support.size());

  // dense induced submatrix; supports are small (about 2s entries)
  Eigen::MatrixXd sub(k, k);
  sub.setZero();
  std::vector<int> pos(A.rows(), -1);
  for (int a = 0; a < k; ++a) pos[support[a]] = a;
  for (int a = 0; a < k; ++a) {
    for (SparseRowMatrix::InnerIterator it(A, support[a]); it; ++it) {
      const int b = pos[it.col()];
      if (b >= 0) sub(a, b) = it.value();
    }
  }
  // the payoff matrix carries no self-reinforcement: a dominant diagonal
  // would make every pure strategy stable and freeze the diffusion at the
  // identity
  sub.diagonal().setZero();

  RowResult res;
  res.v = init;
  Eigen::VectorXd next(k);
  for (int iter = 1; iter <= max_iter; ++iter) {
    const Eigen::VectorXd av = sub * res.v;
    const double denom = res.v.dot(av);
    if (!(denom > 0.0)) throw NumericError("replicator denominator vanished");
    next = res.v.cwiseProduct(av) / denom;
    const double delta = (next - res.v).cwiseAbs().maxCoeff();
    res.v = next;
    res.iterations = iter;
    res.residual = delta;
    if (delta < tol) break;
  }
  return res;
}

}  // namespace

DiffusedGraph diffuse_graph(const AffinityGraph& graph, int max_iter, double tol) {
  const int m = graph.m();
  if (max_iter < 1) throw ParamError("max_iter must be >= 1");
  const SparseRowMatrix& A = graph.entries;

  std::vector<std::vector<int>> supports(m);
  std::vector<RowResult> rows(m);

  parallel_for(0, m, [&](int i) {
    std::vector<int>& sup = supports[i];
    Eigen::VectorXd init;
    double total = 0.0;
    bool off_diagonal = false;
    for (SparseRowMatrix::InnerIterator it(A, i); it; ++it) {
      sup.push_back(static_cast<int>(it.col()));
      total += it.value();
      if (it.col() != i && it.value() > 0.0) off_diagonal = true;
    }
    if (!off_diagonal || !(total > 0.0)) throw NumericError("isolated node");
    init.resize(static_cast<Eigen::Index>(sup.size()));
    int a = 0;
    for (SparseRowMatrix::InnerIterator it(A, i); it; ++it) init(a++) = it.value() / total;
    rows[i] = diffuse_row(A, sup, init, max_iter, tol);
  });

  std::vector<Eigen::Triplet<double>> trips;
  DiffusedGraph out;
  for (int i = 0; i < m; ++i) {
    const double peak = rows[i].v.maxCoeff();
    if (!(peak > 0.0)) throw NumericError("isolated node");
    for (std::size_t a = 0; a < supports[i].size(); ++a) {
      const double w = rows[i].v(static_cast<Eigen::Index>(a)) / peak;
      if (w > 0.0) trips.emplace_back(i, supports[i][a], w);
    }
    out.iterations_used = std::max(out.iterations_used, rows[i].iterations);
    out.residual = std::max(out.residual, rows[i].residual);
  }
  out.entries.resize(m, m);
  out.entries.setFromTriplets(trips.begin(), trips.end());
  out.entries.makeCompressed();
  return out;
}

Eigen::VectorXd init_test_affinity(std::span<const double> y, const PatchSet& train, double c1) {
  if (c1 <= 0.0) throw ParamError("kernel scale c1 must be positive");
  if (static_cast<int>(y.size()) != train.dim()) throw ParamError("query dimension mismatch");
  const double scale = static_cast<double>(train.dim()) * c1 * c1;
  Eigen::Map<const Eigen::RowVectorXd> q(y.data(), static_cast<Eigen::Index>(y.size()));
  Eigen::VectorXd d2 = (train.vectors.rowwise() - q).rowwise().squaredNorm();
  return (-d2.array() / scale).exp();
}

Eigen::VectorXd diffuse_test_affinity(const DiffusedGraph& astar, const Eigen::VectorXd& a,
                                      int kappa) {
  if (kappa < 0) throw ParamError("kappa must be >= 0");
  if (a.size() != astar.entries.rows()) throw ParamError("affinity vector length mismatch");
  if ((a.array() < 0.0).any()) throw ParamError("affinity vector must be nonnegative");
  Eigen::VectorXd v = a;
  for (int t = 0; t < kappa; ++t) v = astar.entries * v;
  return v;
}

namespace {

template <class T>
void put_le(std::ofstream& out, T value) {
  unsigned char buf[sizeof(T)];
  for (std::size_t b = 0; b < sizeof(T); ++b) buf[b] = static_cast<unsigned char>(value >> (8 * b));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::ifstream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  T value = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) value |= static_cast<T>(buf[b]) << (8 * b);
  return value;
}

}  // namespace

void save_graph(const SparseRowMatrix& entries, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write("AFG1", 4);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(entries.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(entries.nonZeros()));
  for (int i = 0; i < entries.outerSize(); ++i)
    for (SparseRowMatrix::InnerIterator it(entries, i); it; ++it) {
      put_le<std::uint32_t>(out, static_cast<std::uint32_t>(it.row()));
      put_le<std::uint32_t>(out, static_cast<std::uint32_t>(it.col()));
      static_assert(sizeof(double) == 8);
      std::uint64_t bits;
      const double w = it.value();
      std::memcpy(&bits, &w, 8);
      put_le<std::uint64_t>(out, bits);
    }
  if (!out) throw IoError("write failed for " + path);
}

SparseRowMatrix load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "AFG1") throw IoError("bad graph magic in " + path);
  const auto m = get_le<std::uint64_t>(in);
  const auto nnz = get_le<std::uint64_t>(in);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(nnz);
  for (std::uint64_t e = 0; e < nnz; ++e) {
    const auto r = get_le<std::uint32_t>(in);
    const auto c = get_le<std::uint32_t>(in);
    const auto bits = get_le<std::uint64_t>(in);
    double w;
    std::memcpy(&w, &bits, 8);
    trips.emplace_back(static_cast<int>(r), static_cast<int>(c), w);
  }
  if (!in) throw IoError("truncated graph file " + path);
  SparseRowMatrix entries(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  entries.setFromTriplets(trips.begin(), trips.end());
  entries.makeCompressed();
  return entries;
}

}  // namespace manifold
