#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Geometry>

#include "doctest.h"
#include "drape/embed.hpp"
#include "drape/error.hpp"

using namespace drape;

namespace {

Eigen::MatrixXd random_points(int n, int dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(n, dims);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < dims; ++d) x(i, d) = g(rng);
  return x;
}

std::vector<int> order_of(const Eigen::VectorXd& v) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
  return idx;
}

}  // namespace

TEST_CASE("planted line ordering is recovered") {
  // Unequal gaps so no two distances tie.
  const std::vector<double> line = {0.109, 0.224, 1.054, 1.655, 2.069, 2.35, 2.516, 2.654, 3.029, 3.076};
  Eigen::MatrixXd planted(10, 1);
  for (int i = 0; i < 10; ++i) planted(i, 0) = line[i];
  const auto triplets = consistent_triplets(pairwise_distances(planted));
  REQUIRE(triplets.size() == 360);

  TsteOptions opt;
  opt.seed = 1;
  const auto e = tste_embed(triplets, 10, 1, opt);
  auto got = order_of(e.points.col(0));
  std::vector<int> forward(10);
  std::iota(forward.begin(), forward.end(), 0);
  auto backward = forward;
  std::reverse(backward.begin(), backward.end());
  CHECK((got == forward || got == backward));
}

TEST_CASE("a single triplet is satisfied") {
  const std::vector<Triplet> t = {{0, 1, 2}};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TsteOptions opt;
    opt.seed = seed;
    opt.iterations = 300;
    const auto e = tste_embed(t, 3, 2, opt);
    CHECK((e.points.row(0) - e.points.row(1)).norm() < (e.points.row(0) - e.points.row(2)).norm());
    CHECK(triplet_agreement(e, t) == 1.0);
  }
}

TEST_CASE("noiseless planted 2D triplets are reproduced") {
  const auto planted = random_points(10, 2, 5);
  const auto triplets = synthetic_triplets(pairwise_distances(planted), 1000, 0.0, 6);
  CHECK(triplets.size() == 1000);
  CHECK(triplet_agreement(planted, triplets) == 1.0);
  TsteOptions opt;
  opt.seed = 7;
  const auto e = tste_embed(triplets, 10, 2, opt);
  CHECK(triplet_agreement(e, triplets) >= 0.95);
}

TEST_CASE("triplet agreement counting") {
  Eigen::MatrixXd same = Eigen::MatrixXd::Zero(4, 2);
  const std::vector<Triplet> ts = {{0, 1, 2}, {1, 2, 3}, {3, 0, 1}};
  CHECK(triplet_agreement(same, ts) == 0.5);

  Eigen::MatrixXd three(3, 1);
  three << 0.0, 1.0, 3.0;
  const std::vector<Triplet> half = {{0, 1, 2}, {0, 2, 1}};
  CHECK(triplet_agreement(three, half) == 0.5);
  CHECK(triplet_agreement(three, std::vector<Triplet>{{2, 1, 0}}) == 1.0);
}

TEST_CASE("agreement is invariant under similarity transforms") {
  const auto x = random_points(12, 2, 9);
  const auto ts = synthetic_triplets(pairwise_distances(random_points(12, 2, 10)), 400, 0.0, 11);
  const double base = triplet_agreement(x, ts);
  const Eigen::Matrix2d r = Eigen::Rotation2Dd(0.83).toRotationMatrix();
  Eigen::MatrixXd y = (x * r.transpose() * 3.7).rowwise() + Eigen::RowVector2d(5.0, -2.0);
  CHECK(triplet_agreement(y, ts) == base);
}

TEST_CASE("objective history never decreases and gradient is exact") {
  const auto planted = random_points(8, 2, 12);
  const auto ts = synthetic_triplets(pairwise_distances(planted), 300, 0.1, 13);
  TsteOptions opt;
  opt.seed = 3;
  opt.restarts = 2;
  opt.iterations = 400;
  const auto e = tste_embed(ts, 8, 2, opt);
  REQUIRE(e.history.size() > 1);
  for (std::size_t k = 1; k < e.history.size(); ++k) CHECK(e.history[k] >= e.history[k - 1]);
  CHECK(e.loss <= 0.0);
  CHECK(e.loss == doctest::Approx(tste_objective(e.points, ts, 1.0)));

  const auto x = random_points(8, 2, 14);
  Eigen::MatrixXd g;
  tste_objective(x, ts, 1.0, &g);
  const double h = 1e-6;
  for (int i = 0; i < 8; ++i)
    for (int d = 0; d < 2; ++d) {
      Eigen::MatrixXd a = x, b = x;
      a(i, d) += h;
      b(i, d) -= h;
      const double fd = (tste_objective(a, ts, 1.0) - tste_objective(b, ts, 1.0)) / (2 * h);
      CHECK(g(i, d) == doctest::Approx(fd).epsilon(1e-5).scale(g.norm()));
    }
}

TEST_CASE("embedding is deterministic per seed") {
  const auto ts = synthetic_triplets(pairwise_distances(random_points(6, 2, 1)), 100, 0.0, 2);
  TsteOptions opt;
  opt.iterations = 200;
  opt.seed = 4;
  CHECK(tste_embed(ts, 6, 2, opt).points == tste_embed(ts, 6, 2, opt).points);
  CHECK_THROWS(tste_embed(std::vector<Triplet>{{0, 1, 7}}, 3, 2, opt));
  CHECK_THROWS(tste_embed(std::vector<Triplet>{}, 3, 2, opt));
}

TEST_CASE("synthetic triplets flip at the requested rate") {
  const auto d = pairwise_distances(random_points(15, 2, 20));
  const auto ts = synthetic_triplets(d, 5000, 0.13, 21);
  int flipped = 0;
  for (const auto& t : ts) {
    CHECK(t.reference != t.chosen);
    CHECK(t.reference != t.rejected);
    CHECK(t.chosen != t.rejected);
    flipped += d(t.reference, t.chosen) > d(t.reference, t.rejected);
  }
  // Binomial(5000, 0.13): std ~ 0.0048.
  CHECK(static_cast<double>(flipped) / ts.size() == doctest::Approx(0.13).epsilon(0.15));
}

TEST_CASE("rank correlation report") {
  const auto d = pairwise_distances(random_points(6, 3, 30));
  const auto same = rank_correlation_report(d, d);
  CHECK(same.included == 6);
  for (double r : same.per_material) CHECK(r == doctest::Approx(1.0));
  CHECK(same.mean == doctest::Approx(1.0));
  CHECK(same.stddev == doctest::Approx(0.0).scale(1.0));

  const Eigen::MatrixXd reversed = (-d).array() + 100.0;
  for (double r : rank_correlation_report(d, reversed).per_material) CHECK(r == doctest::Approx(-1.0));

  const auto other = pairwise_distances(random_points(6, 3, 31));
  const auto base = rank_correlation_report(d, other);
  const Eigen::MatrixXd transformed = other.array().exp() * 2.0 + 1.0;
  const auto mono = rank_correlation_report(d.array().sqrt().matrix(), transformed);
  for (int i = 0; i < 6; ++i) CHECK(mono.per_material[i] == doctest::Approx(base.per_material[i]));

  Eigen::MatrixXd flat = d;
  flat.row(2).setConstant(0.5);
  const auto flagged = rank_correlation_report(flat, d);
  CHECK(flagged.flagged[2]);
  CHECK(std::isnan(flagged.per_material[2]));
  CHECK(flagged.included == 5);

  CHECK_THROWS_AS(rank_correlation_report(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)), ConfigError);
}

TEST_CASE("correlation table layout") {
  CorrelationTable t;
  RankCorrelationReport r;
  r.mean = 0.893;
  r.stddev = 0.05;
  t.gt_metric = r;
  const auto md = correlation_table_markdown(t);
  CHECK(md.find("| Parameters | Parameter distance | Similarity metric |") != std::string::npos);
  CHECK(md.find("| Ground truth | n/a | 0.893 ± 0.05 |") != std::string::npos);
  CHECK(md.find("| Estimated | n/a | n/a |") != std::string::npos);
}

TEST_CASE("CSV round trips") {
  const std::vector<Triplet> ts = {{0, 1, 2}, {3, 2, 1}};
  std::stringstream ss;
  write_triplets_csv(ss, ts);
  CHECK(ss.str() == "ref,chosen,rejected\n0,1,2\n3,2,1\n");
  CHECK(read_triplets_csv(ss) == ts);
  std::istringstream bad("a,b,c\n1,2,3\n");
  CHECK_THROWS_AS(read_triplets_csv(bad), ConfigError);
  std::istringstream garbage("ref,chosen,rejected\n1,x,3\n");
  CHECK_THROWS_AS(read_triplets_csv(garbage), ConfigError);

  Embedding e;
  e.points = Eigen::MatrixXd(2, 2);
  e.points << 0.5, -1, 2, 3;
  std::ostringstream out;
  write_embedding_csv(out, e, {"silk", "denim"});
  const auto text = out.str();
  CHECK(text.find("silk") != std::string::npos);
  CHECK(text.find("denim") != std::string::npos);
}
