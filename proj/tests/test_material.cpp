#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "drape/error.hpp"
#include "drape/material.hpp"

using namespace drape;

namespace {

// Rank by counting: 1 + #smaller + (#equal - 1) / 2.
std::vector<double> count_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

double naive_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

std::vector<double> column(const std::vector<MaterialParams>& ps, std::size_t c) {
  std::vector<double> out;
  for (const auto& p : ps) out.push_back(p.values[c]);
  return out;
}

std::vector<MaterialParams> draw(const SamplerConfig& cfg, int n) {
  std::vector<MaterialParams> out;
  for (int i = 0; i < n; ++i) out.push_back(sample_params(cfg, i));
  return out;
}

double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    d = std::max({d, (i + 1) / n - u[i], u[i] - i / n});
  return d;
}

}  // namespace

TEST_CASE("spearman on monotone and reversed data") {
  std::vector<double> x{1, 2, 3}, y{10, 20, 30}, z{3, 2, 1};
  CHECK(spearman(x, y) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(spearman(x, z) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("spearman with ties matches rank-then-pearson oracle") {
  std::vector<double> x{1, 2, 2, 4}, y{1, 3, 2, 4};
  const double expected = naive_pearson(count_ranks(x), count_ranks(y));
  CHECK(spearman(x, y) == doctest::Approx(expected).epsilon(1e-12));
  // ranks: x = 1, 2.5, 2.5, 4 ; y = 1, 3, 2, 4
  CHECK(expected == doctest::Approx(0.9486832980505138).epsilon(1e-12));
}

TEST_CASE("spearman rejects bad input") {
  std::vector<double> a{1, 2, 3}, b{1, 2}, c{5, 5, 5};
  CHECK_THROWS_AS(spearman(a, b), std::invalid_argument);
  CHECK_THROWS_AS(spearman(b, b), std::invalid_argument);
  CHECK_THROWS_AS(spearman(a, c), std::domain_error);
}

TEST_CASE("spearman is invariant under monotone transforms") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(30), y(30);
    for (int i = 0; i < 30; ++i) {
      x[i] = n01(rng);
      y[i] = x[i] + n01(rng);
    }
    std::vector<double> ex(30), ay(30);
    for (int i = 0; i < 30; ++i) {
      ex[i] = std::exp(x[i]);
      ay[i] = -3.0 + 0.5 * y[i];
    }
    CHECK(spearman(ex, ay) == doctest::Approx(spearman(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("sampler is deterministic and stays in bounds") {
  SamplerConfig cfg;
  cfg.seed = 42;
  CHECK(sample_params(cfg, 17) == sample_params(cfg, 17));
  CHECK_FALSE(sample_params(cfg, 17) == sample_params(cfg, 18));
  const auto b = ParameterBounds::defaults();
  for (const auto& p : draw(cfg, 2000))
    for (std::size_t c = 0; c < kNumCoefficients; ++c) {
      CHECK(p.values[c] >= b.min[c]);
      CHECK(p.values[c] <= b.max[c]);
    }
}

TEST_CASE("uncoupled stretch draws are rank independent") {
  SamplerConfig cfg;
  cfg.stretch_coupling = 0.0;
  cfg.bias_density_coupling = 0.0;
  cfg.seed = 3;
  const auto ps = draw(cfg, 10000);
  for (auto [a, b] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}})
    CHECK(std::abs(spearman(column(ps, a), column(ps, b))) < 0.05);
}

TEST_CASE("coupled draws follow the Gaussian copula rank correlation") {
  SamplerConfig cfg;
  cfg.stretch_coupling = 0.8;
  cfg.seed = 11;
  const auto ps = draw(cfg, 10000);
  // Spearman of a Gaussian copula with correlation rho: (6/pi) asin(rho/2).
  const double stretch_rs = 6.0 / std::numbers::pi * std::asin(0.8 / 2.0);
  for (auto [a, b] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}}) {
    const double r = spearman(column(ps, a), column(ps, b));
    CHECK(r > 0.6);
    CHECK(r == doctest::Approx(stretch_rs).epsilon(0.04));
  }
  const double bias_rs = 6.0 / std::numbers::pi * std::asin(cfg.bias_density_coupling / 2.0);
  CHECK(spearman(column(ps, 5), column(ps, 6)) == doctest::Approx(bias_rs).epsilon(0.1));
  CHECK(std::abs(spearman(column(ps, 3), column(ps, 4))) < 0.05);
}

TEST_CASE("log-uniform marginals pass Kolmogorov-Smirnov at alpha 0.01") {
  SamplerConfig cfg;
  cfg.seed = 5;
  const int n = 10000;
  const auto ps = draw(cfg, n);
  const double critical = 1.628 / std::sqrt(static_cast<double>(n));
  for (std::size_t c = 0; c < kNumCoefficients; ++c) {
    std::vector<double> u;
    const double lo = cfg.bounds.min[c], hi = cfg.bounds.max[c];
    for (double v : column(ps, c))
      u.push_back(cfg.log_uniform[c] ? std::log(v / lo) / std::log(hi / lo) : (v - lo) / (hi - lo));
    CAPTURE(c);
    CHECK(ks_uniform(u) < critical);
  }
}

TEST_CASE("sampler rejects invalid configuration") {
  SamplerConfig cfg;
  cfg.stretch_coupling = 1.0;
  CHECK_THROWS_AS(sample_params(cfg, 0), ConfigError);
  cfg = SamplerConfig{};
  cfg.bounds.min[2] = cfg.bounds.max[2];
  CHECK_THROWS_AS(sample_params(cfg, 0), ConfigError);
}

TEST_CASE("normalize endpoints, midpoint and clipping") {
  const auto b = ParameterBounds::defaults();
  MaterialParams lo{b.min}, hi{b.max}, mid;
  for (std::size_t c = 0; c < kNumCoefficients; ++c) mid.values[c] = 0.5 * (b.min[c] + b.max[c]);
  for (std::size_t c = 0; c < kNumCoefficients; ++c) {
    CHECK(normalize_params(lo, b).values[c] == 0.0);
    CHECK(normalize_params(hi, b).values[c] == 1.0);
    CHECK(normalize_params(mid, b).values[c] == doctest::Approx(0.5).epsilon(1e-15));
  }
  CHECK_FALSE(normalize_params(mid, b).any_clipped());

  MaterialParams over = mid;
  over.values[0] = 2.0 * b.max[0];
  const auto n = normalize_params(over, b);
  CHECK(n.values[0] == 1.0);
  CHECK(n.clipped[0]);
  CHECK(n.any_clipped());

  ParameterBounds bad = b;
  bad.max[4] = bad.min[4];
  CHECK_THROWS_AS(normalize_params(mid, bad), ConfigError);
}

TEST_CASE("normalize then denormalize round-trips") {
  SamplerConfig cfg;
  for (int i = 0; i < 200; ++i) {
    const auto p = sample_params(cfg, i);
    const auto back = denormalize_params(normalize_params(p, cfg.bounds).values, cfg.bounds);
    for (std::size_t c = 0; c < kNumCoefficients; ++c)
      CHECK(std::abs(back.values[c] - p.values[c]) <= 1e-12 * std::abs(p.values[c]));
  }
}

TEST_CASE("z-score distance of a two-point population") {
  MaterialParams a = MaterialParams::uniform(100, 1e-5, 0.2);
  MaterialParams b{{300, 50, 900, 3e-5, 2e-6, 1e-4, 0.5}};
  std::vector<MaterialParams> pop{a, b};
  // Brute-force oracle: per coefficient mean and (n-1) std, then Euclidean norm.
  double s = 0.0;
  for (std::size_t c = 0; c < kNumCoefficients; ++c) {
    const double m = 0.5 * (a.values[c] + b.values[c]);
    const double sd = std::sqrt(((a.values[c] - m) * (a.values[c] - m) + (b.values[c] - m) * (b.values[c] - m)) / 1.0);
    const double gap = (a.values[c] - b.values[c]) / sd;
    s += gap * gap;
  }
  CHECK(param_distance(a, b, pop) == doctest::Approx(std::sqrt(s)).epsilon(1e-12));
  CHECK(param_distance(a, b, pop) == doctest::Approx(std::sqrt(14.0)).epsilon(1e-12));
  CHECK(param_distance(a, a, pop) == 0.0);
}

TEST_CASE("z-score distance is a metric") {
  SamplerConfig cfg;
  std::vector<MaterialParams> pop;
  for (int i = 0; i < 50; ++i) pop.push_back(sample_params(cfg, i));
  const ZScoreScaler z(pop);
  for (int i = 0; i + 2 < 50; ++i) {
    const auto &a = pop[i], &b = pop[i + 1], &c = pop[i + 2];
    CHECK(z.distance(a, b) == z.distance(b, a));
    CHECK(z.distance(a, c) <= z.distance(a, b) + z.distance(b, c) + 1e-12);
  }
}

TEST_CASE("zero variance names the coefficient") {
  MaterialParams a = MaterialParams::uniform(100, 1e-5, 0.2);
  MaterialParams b = MaterialParams::uniform(200, 2e-5, 0.2);
  std::vector<MaterialParams> pop{a, b};
  try {
    ZScoreScaler z(pop);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("density") != std::string::npos);
  }
}

TEST_CASE("parameter JSON uses the coefficient names") {
  const MaterialParams p{{1, 2, 3, 4e-6, 5e-6, 6e-6, 0.3}};
  const nlohmann::json j = p;
  CHECK(j.at("kStretchBias") == 3.0);
  CHECK(j.at("density") == 0.3);
  CHECK(j.get<MaterialParams>() == p);
  nlohmann::json missing = j;
  missing.erase("kBendingWeft");
  CHECK_THROWS_AS(missing.get<MaterialParams>(), ConfigError);
  nlohmann::json negative = j;
  negative["density"] = -1.0;
  CHECK_THROWS_AS(negative.get<MaterialParams>(), ConfigError);

  const auto b = ParameterBounds::defaults();
  const nlohmann::json jb = b;
  const auto b2 = jb.get<ParameterBounds>();
  CHECK(b2.min == b.min);
  CHECK(b2.max == b.max);
  CHECK(coefficient_index("kBendingBias") == 5);
  CHECK_THROWS_AS(coefficient_index("kShear"), ConfigError);
}
