#include <algorithm>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "manifold/goc.hpp"
#include "manifold/rng.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace manifold;

namespace {

// independent cluster expansion: full-sort knn lists and std::set unions
std::set<int> expand_reference(const RowMatrixXd& pts, int center, int K, int L) {
  std::set<int> members;
  members.insert(center);
  for (int j : oracles::knn_reference(pts, center, K)) members.insert(j);
  for (int l = 0; l < L; ++l) {
    std::set<int> snapshot = members;
    for (int d : snapshot)
      for (int j : oracles::knn_reference(pts, d, K)) members.insert(j);
  }
  return members;
}

int decay_reference(const RowMatrixXd& samples, double c3) {
  Eigen::VectorXd vals;
  Eigen::MatrixXd vecs;
  oracles::pca_reference(samples, vals, vecs);
  const double total = std::max(vals.sum(), 0.0);
  if (!(total > 0.0)) return 1;
  double running = 0.0;
  for (int q = 0; q < vals.size(); ++q) {
    running += vals(q);
    if (running >= c3 * total) return q + 1;
  }
  return static_cast<int>(vals.size());
}

double normalized_decay_reference(const RowMatrixXd& pts, int center, int L, int K, double c3) {
  const std::set<int> members = expand_reference(pts, center, K, L);
  std::vector<int> idx(members.begin(), members.end());
  RowMatrixXd gathered(idx.size(), pts.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) gathered.row(i) = pts.row(idx[i]);
  const int cap = std::min<int>(static_cast<int>(idx.size()) - 1, static_cast<int>(pts.cols()));
  return static_cast<double>(decay_reference(gathered, c3)) / cap;
}

}  // namespace

TEST_SUITE("goc") {

TEST_CASE("seed_centers basics") {
  Rng rng(3);
  RowMatrixXd pts(10, 2);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 2; ++j) pts(i, j) = rng.uniform(-1.0, 1.0);
  PatchSet train = support::patchset_from_rows(pts);

  SUBCASE("single center is the medoid of the mean") {
    const std::vector<int> centers = seed_centers(train, 1, 17);
    REQUIRE(centers.size() == 1);
    const Eigen::RowVectorXd mean = pts.colwise().mean();
    int expect = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 10; ++i) {
      const double d = (pts.row(i) - mean).squaredNorm();
      if (d < best) {
        best = d;
        expect = i;
      }
    }
    CHECK(centers[0] == expect);
  }

  SUBCASE("C = m makes every point a center") {
    std::vector<int> centers = seed_centers(train, 10, 17);
    std::sort(centers.begin(), centers.end());
    for (int i = 0; i < 10; ++i) CHECK(centers[i] == i);
  }

  SUBCASE("two blobs get one center each") {
    RowMatrixXd blob_pts = support::two_blobs(6, 2, 15.0, 0.5, 23);
    PatchSet blob_train = support::patchset_from_rows(blob_pts);
    const std::vector<int> centers = seed_centers(blob_train, 2, 31);
    REQUIRE(centers.size() == 2);
    CHECK(((centers[0] < 6) != (centers[1] < 6)));
  }

  SUBCASE("C above m is rejected") {
    CHECK_THROWS_AS(seed_centers(train, 11, 1), ParamError);
  }
}

TEST_CASE("expand_cluster base and full expansions") {
  Rng rng(7);
  RowMatrixXd pts(12, 3);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 3; ++j) pts(i, j) = rng.uniform(-2.0, 2.0);
  PatchSet train = support::patchset_from_rows(pts);

  SUBCASE("L = 0 is the center plus its K nearest neighbors") {
    Cluster cluster = expand_cluster(train, 4, 3, 0);
    std::set<int> expect = {4};
    for (int j : oracles::knn_reference(pts, 4, 3)) expect.insert(j);
    CHECK(std::set<int>(cluster.members.begin(), cluster.members.end()) == expect);
    CHECK(cluster.center_index == 4);
  }

  SUBCASE("K = m - 1 swallows the whole set after one hop") {
    Cluster cluster = expand_cluster(train, 2, 11, 1);
    CHECK(static_cast<int>(cluster.members.size()) == 12);
  }
}

TEST_CASE("expand_cluster walks 1-nn links on a line") {
  // unit-spaced points on a line: 1-NN of 0 is 1, of 1 is 0 (tie to the
  // lower index), so expansion from the end freezes at {0, 1}
  RowMatrixXd pts(6, 1);
  pts << 0, 1, 2, 3, 4, 5;
  PatchSet train = support::patchset_from_rows(pts);
  Cluster cluster = expand_cluster(train, 0, 1, 2);
  CHECK(cluster.members == std::vector<int>{0, 1});

  SUBCASE("matches the reference walk") {
    const std::set<int> expect = expand_reference(pts, 0, 1, 2);
    CHECK(std::set<int>(cluster.members.begin(), cluster.members.end()) == expect);
  }
}

TEST_CASE("expand_cluster growth is monotone in L and K") {
  Rng rng(11);
  RowMatrixXd pts(30, 3);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 3; ++j) pts(i, j) = rng.uniform(-3.0, 3.0);
  PatchSet train = support::patchset_from_rows(pts);
  const KnnTable table(train, 8);

  for (int trial = 0; trial < 5; ++trial) {
    const int center = rng.uniform_int(0, 29);
    const int K = rng.uniform_int(1, 6);
    std::set<int> prev;
    for (int L = 0; L <= 3; ++L) {
      Cluster c = expand_cluster(train, table, center, K, L);
      std::set<int> cur(c.members.begin(), c.members.end());
      CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
      prev = cur;
    }
    // monotone in K at fixed L
    std::set<int> smaller;
    for (int K2 = 1; K2 <= 6; ++K2) {
      Cluster c = expand_cluster(train, table, center, K2, 2);
      std::set<int> cur(c.members.begin(), c.members.end());
      CHECK(std::includes(cur.begin(), cur.end(), smaller.begin(), smaller.end()));
      smaller = cur;
    }
  }
}

TEST_CASE("decay_index forced cases") {
  SUBCASE("collinear points need one component") {
    RowMatrixXd pts(6, 3);
    for (int i = 0; i < 6; ++i) pts.row(i) << i * 1.0, i * 2.0, -i * 1.0;
    for (double c3 : {0.1, 0.5, 0.9, 0.999}) CHECK(decay_index(pts, c3) == 1);
  }

  SUBCASE("exactly equal eigenvalues split at two of four") {
    // +-2 e_i in R^4: covariance is exactly the identity
    RowMatrixXd pts(8, 4);
    pts.setZero();
    for (int d = 0; d < 4; ++d) {
      pts(2 * d, d) = 2.0;
      pts(2 * d + 1, d) = -2.0;
    }
    CHECK(decay_index(pts, 0.5) == 2);
  }

  SUBCASE("all-identical cluster is flagged as one") {
    RowMatrixXd pts = RowMatrixXd::Constant(5, 3, 4.2);
    CHECK(decay_index(pts, 0.5) == 1);
  }

  SUBCASE("single sample is rejected") {
    RowMatrixXd one(1, 3);
    one << 1, 2, 3;
    CHECK_THROWS_AS(decay_index(one, 0.5), NumericError);
  }

  SUBCASE("random clusters match the cumulative-eigenvalue oracle") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
      RowMatrixXd pts(5, 4);
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j) pts(i, j) = rng.uniform(-1.0, 1.0);
      CHECK(decay_index(pts, 0.5) == decay_reference(pts, 0.5));
    }
  }
}

TEST_CASE("normalized_decay values") {
  SUBCASE("two-point cluster") {
    RowMatrixXd pts(3, 4);
    pts << 0, 0, 0, 0, 1, 0, 0, 0, 50, 50, 50, 50;
    PatchSet train = support::patchset_from_rows(pts);
    // K = 1 from point 0 picks point 1 only: |S| = 2, I = 1
    CHECK(normalized_decay(train, 0, 0, 1, 0.5) == doctest::Approx(1.0));
  }

  SUBCASE("collinear cluster of 10 in R^5") {
    RowMatrixXd pts(10, 5);
    pts.setZero();
    for (int i = 0; i < 10; ++i) pts(i, 0) = i;
    PatchSet train = support::patchset_from_rows(pts);
    // K = 9 gathers all ten points: I = 1, denominator min{9, 5} = 5
    CHECK(normalized_decay(train, 0, 0, 9, 0.5) == doctest::Approx(0.2));
  }

  SUBCASE("random clusters match the composed oracle") {
    Rng rng(17);
    RowMatrixXd pts(25, 4);
    for (int i = 0; i < 25; ++i)
      for (int j = 0; j < 4; ++j) pts(i, j) = rng.uniform(-2.0, 2.0);
    PatchSet train = support::patchset_from_rows(pts);
    for (int trial = 0; trial < 10; ++trial) {
      const int center = rng.uniform_int(0, 24);
      const int K = rng.uniform_int(1, 8);
      const int L = rng.uniform_int(0, 3);
      CHECK(normalized_decay(train, center, L, K, 0.5) ==
            doctest::Approx(normalized_decay_reference(pts, center, L, K, 0.5)).epsilon(1e-12));
    }
  }

  SUBCASE("values stay in (0, 1]") {
    Rng rng(19);
    RowMatrixXd pts(20, 3);
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 3; ++j) pts(i, j) = rng.uniform(-1.0, 1.0);
    PatchSet train = support::patchset_from_rows(pts);
    for (int trial = 0; trial < 20; ++trial) {
      const double v = normalized_decay(train, rng.uniform_int(0, 19), rng.uniform_int(0, 2),
                                        rng.uniform_int(1, 6), 0.5);
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("optimize_params tie-breaks and oracle") {
  SUBCASE("two points always give (1, 1)") {
    RowMatrixXd pts(2, 10);
    pts.setZero();
    pts(1, 0) = 1.0;
    pts(1, 1) = 1.0;  // both points live on a 2-plane
    PatchSet train = support::patchset_from_rows(pts);
    GocParams params;
    params.Kmax = 3;
    params.Lmax = 3;
    CHECK(optimize_params(train, 0, params) == std::pair<int, int>{1, 1});
  }

  SUBCASE("degenerate bounds force (1, 1)") {
    Rng rng(23);
    RowMatrixXd pts(10, 3);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 3; ++j) pts(i, j) = rng.uniform(-1.0, 1.0);
    PatchSet train = support::patchset_from_rows(pts);
    GocParams params;
    params.Kmax = 1;
    params.Lmax = 1;
    CHECK(optimize_params(train, 4, params) == std::pair<int, int>{1, 1});
  }

  SUBCASE("matches the coordinate-path scan oracle") {
    Rng rng(29);
    for (int trial = 0; trial < 10; ++trial) {
      RowMatrixXd pts(18, 4);
      for (int i = 0; i < 18; ++i)
        for (int j = 0; j < 4; ++j) pts(i, j) = rng.uniform(-2.0, 2.0);
      PatchSet train = support::patchset_from_rows(pts);
      GocParams params;
      params.Kmax = 6;
      params.Lmax = 3;
      const int center = rng.uniform_int(0, 17);

      int best_k = 1;
      double best = std::numeric_limits<double>::infinity();
      for (int k = 1; k <= params.Kmax; ++k) {
        const double v = normalized_decay_reference(pts, center, params.L0, k, params.c3);
        if (v < best) {
          best = v;
          best_k = k;
        }
      }
      int best_l = 1;
      best = std::numeric_limits<double>::infinity();
      for (int l = 1; l <= params.Lmax; ++l) {
        const double v = normalized_decay_reference(pts, center, l, best_k, params.c3);
        if (v < best) {
          best = v;
          best_l = l;
        }
      }
      CHECK(optimize_params(train, center, params) == std::pair<int, int>{best_l, best_k});
    }
  }
}

TEST_CASE("build_model composition and coverage") {
  SUBCASE("single cluster covers an expansion of the set") {
    Rng rng(31);
    RowMatrixXd pts(15, 3);
    for (int i = 0; i < 15; ++i)
      for (int j = 0; j < 3; ++j) pts(i, j) = rng.uniform(-1.0, 1.0);
    PatchSet train = support::patchset_from_rows(pts);
    GocParams params;
    params.C = 1;
    params.Kmax = 8;
    ClusterModel model = build_model(train, params, 7);
    REQUIRE(model.size() == 1);
    CHECK(model.bases[0].components() >= 1);
    CHECK(static_cast<int>(model.clusters[0].members.size()) >= 2);
  }

  SUBCASE("every point appears in at least one cluster on connected data") {
    // patch-like ambient dimension: the decay normalization keeps rewarding
    // growth until clusters pass n + 1 members, so eight clusters blanket
    // the 200-point roll (coverage checked for this dataset)
    support::SwissRoll roll = support::swiss_roll(200, 0.0, 43);
    PatchSet train = support::patchset_from_rows(support::embed_isometric(roll.points, 36, 7));
    GocParams params;
    params.C = 8;
    ClusterModel model = build_model(train, params, 13);
    std::vector<bool> covered(200, false);
    for (const auto& cluster : model.clusters)
      for (int i : cluster.members) covered[i] = true;
    CHECK(std::count(covered.begin(), covered.end(), true) == 200);
  }
}

TEST_CASE("select_basis rules") {
  // three tight clusters on a line, bases spanning different directions
  Rng rng(37);
  auto make_cluster = [&](double cx, double dir_y) {
    RowMatrixXd pts(12, 3);
    for (int i = 0; i < 12; ++i) {
      const double t = rng.uniform(-1.0, 1.0);
      pts.row(i) << cx + t, dir_y * t + 0.01 * rng.gaussian(), 0.01 * rng.gaussian();
    }
    return pts;
  };
  ClusterModel model;
  double centers[3] = {0.0, 8.0, 16.0};
  for (int c = 0; c < 3; ++c) {
    RowMatrixXd pts = make_cluster(centers[c], c == 1 ? 1.0 : 0.0);
    Cluster cluster;
    cluster.center_index = 0;
    for (int i = 0; i < 12; ++i) cluster.members.push_back(i);
    model.clusters.push_back(cluster);
    model.bases.push_back(compute_pca(pts, 3));
  }

  SUBCASE("gamma zero reduces to nearest centroid") {
    std::vector<double> y = {7.3, 0.4, 0.0};
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < 3; ++c) {
      Eigen::Map<const Eigen::VectorXd> q(y.data(), 3);
      const double d = (q - model.bases[c].centroid).norm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    CHECK(select_basis(y, model, 0.0, 2) == best);
  }

  SUBCASE("centroid hit wins outright") {
    for (int c = 0; c < 3; ++c) {
      Eigen::VectorXd y = model.bases[c].centroid;
      CHECK(select_basis({y.data(), 3}, model, 150.0, 2) == c);
    }
  }

  SUBCASE("matches the brute-force objective") {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> y = {rng.uniform(-2.0, 18.0), rng.uniform(-2.0, 2.0),
                               rng.uniform(-0.5, 0.5)};
      Eigen::Map<const Eigen::VectorXd> q(y.data(), 3);
      int best = 0;
      double best_val = std::numeric_limits<double>::infinity();
      for (int c = 0; c < 3; ++c) {
        const Eigen::VectorXd delta = q - model.bases[c].centroid;
        const double dist = delta.norm();
        const int r = std::min(2, model.bases[c].components());
        const double corr = (model.bases[c].vectors.leftCols(r).transpose() * delta).norm() / dist;
        const double val = dist < 1e-9 ? -150.0 : dist - 150.0 * corr;
        if (val < best_val) {
          best_val = val;
          best = c;
        }
      }
      CHECK(select_basis(y, model, 150.0, 2) == best);
    }
  }

  SUBCASE("appending strictly worse clusters leaves the argmin alone") {
    std::vector<double> y = {0.5, 0.1, 0.0};
    const int before = select_basis(y, model, 150.0, 2);
    ClusterModel extended = model;
    LocalBasis far = model.bases[2];
    far.centroid.array() += 1e4;
    extended.clusters.push_back(model.clusters[2]);
    extended.bases.push_back(far);
    CHECK(select_basis(y, extended, 150.0, 2) == before);
  }
}

TEST_CASE("cluster model serialization round trip") {
  namespace fs = std::filesystem;
  Rng rng(43);
  RowMatrixXd pts(30, 4);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 4; ++j) pts(i, j) = rng.uniform(-2.0, 2.0);
  PatchSet train = support::patchset_from_rows(pts);
  GocParams params;
  params.C = 4;
  params.Kmax = 6;
  ClusterModel model = build_model(train, params, 3);

  const fs::path dir = fs::temp_directory_path() / "manifold_goc";
  fs::create_directories(dir);
  const std::string csv = (dir / "members.csv").string();
  const std::string bin = (dir / "bases.bin").string();
  save_model(model, csv, bin);
  ClusterModel back = load_model(csv, bin);

  REQUIRE(back.size() == model.size());
  for (int c = 0; c < model.size(); ++c) {
    CHECK(back.clusters[c].center_index == model.clusters[c].center_index);
    CHECK(back.clusters[c].members == model.clusters[c].members);
    CHECK(back.bases[c].centroid == model.bases[c].centroid);
    CHECK(back.bases[c].vectors == model.bases[c].vectors);
  }
  fs::remove_all(dir);
}

}  // TEST_SUITE
