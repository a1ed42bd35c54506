#include "drape/material.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "drape/error.hpp"
#include "drape/rng.hpp"

namespace drape {

std::string_view coefficient_name(std::size_t index) {
  if (index >= kNumCoefficients) throw std::out_of_range("coefficient index");
  return kCoefficientNames[index];
}

std::size_t coefficient_index(std::string_view name) {
  for (std::size_t i = 0; i < kNumCoefficients; ++i)
    if (kCoefficientNames[i] == name) return i;
  throw ConfigError("unknown material coefficient '" + std::string(name) + "'");
}

MaterialParams MaterialParams::uniform(double stretch, double bending, double density) {
  return MaterialParams{{stretch, stretch, stretch, bending, bending, bending, density}};
}

void MaterialParams::validate() const {
  for (std::size_t i = 0; i < kNumCoefficients; ++i) {
    if (!std::isfinite(values[i]) || values[i] <= 0.0)
      throw ConfigError("material coefficient " + std::string(kCoefficientNames[i]) +
                        " must be finite and positive");
  }
}

ParameterBounds ParameterBounds::defaults() {
  return ParameterBounds{
      {20.0, 20.0, 20.0, 1e-7, 1e-7, 1e-7, 0.05},
      {5000.0, 5000.0, 5000.0, 1e-3, 1e-3, 1e-3, 0.6},
  };
}

void ParameterBounds::validate() const {
  for (std::size_t i = 0; i < kNumCoefficients; ++i) {
    const auto name = std::string(kCoefficientNames[i]);
    if (!(min[i] > 0.0) || !std::isfinite(max[i]))
      throw ConfigError("bounds for " + name + " must be positive and finite");
    if (!(min[i] < max[i])) throw ConfigError("degenerate bounds for " + name);
  }
}

void SamplerConfig::validate() const {
  bounds.validate();
  if (!(stretch_coupling >= 0.0 && stretch_coupling < 1.0))
    throw ConfigError("stretch_coupling must lie in [0,1)");
  if (!(bias_density_coupling >= 0.0 && bias_density_coupling < 1.0))
    throw ConfigError("bias_density_coupling must lie in [0,1)");
}

namespace {

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

MaterialParams sample_params(const SamplerConfig& cfg, std::uint64_t index) {
  cfg.validate();
  auto rng = make_rng({cfg.seed, index, 0x5a4d504cULL});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<double, 9> e{};
  for (auto& x : e) x = normal(rng);

  // Equicorrelated stretch triple: corr(z_i, z_j) = stretch_coupling.
  ParamVector z{};
  const double c = cfg.stretch_coupling;
  for (std::size_t i = 0; i < 3; ++i) z[i] = std::sqrt(c) * e[0] + std::sqrt(1.0 - c) * e[1 + i];
  z[3] = e[4];
  z[4] = e[5];
  z[5] = e[6];
  const double r = cfg.bias_density_coupling;
  z[6] = r * z[5] + std::sqrt(1.0 - r * r) * e[7];

  MaterialParams p;
  for (std::size_t i = 0; i < kNumCoefficients; ++i) {
    const double u = standard_normal_cdf(z[i]);
    const double lo = cfg.bounds.min[i];
    const double hi = cfg.bounds.max[i];
    double x;
    if (cfg.log_uniform[i]) {
      x = std::exp(std::log(lo) + u * (std::log(hi) - std::log(lo)));
    } else {
      x = lo + u * (hi - lo);
    }
    p.values[i] = std::clamp(x, lo, hi);
  }
  return p;
}

bool NormalizedParams::any_clipped() const {
  return std::any_of(clipped.begin(), clipped.end(), [](bool b) { return b; });
}

NormalizedParams normalize_params(const MaterialParams& p, const ParameterBounds& b) {
  b.validate();
  NormalizedParams out;
  for (std::size_t i = 0; i < kNumCoefficients; ++i) {
    const double t = (p.values[i] - b.min[i]) / (b.max[i] - b.min[i]);
    out.clipped[i] = t < 0.0 || t > 1.0;
    out.values[i] = std::clamp(t, 0.0, 1.0);
  }
  return out;
}

MaterialParams denormalize_params(const ParamVector& normalized, const ParameterBounds& b) {
  b.validate();
  MaterialParams p;
  for (std::size_t i = 0; i < kNumCoefficients; ++i)
    p.values[i] = b.min[i] + normalized[i] * (b.max[i] - b.min[i]);
  return p;
}

ZScoreScaler::ZScoreScaler(std::span<const MaterialParams> population) {
  if (population.size() < 2) throw ConfigError("z-score population needs at least 2 members");
  const double n = static_cast<double>(population.size());
  for (std::size_t i = 0; i < kNumCoefficients; ++i) {
    double sum = 0.0;
    for (const auto& p : population) sum += p.values[i];
    mean_[i] = sum / n;
    double ss = 0.0;
    for (const auto& p : population) ss += (p.values[i] - mean_[i]) * (p.values[i] - mean_[i]);
    std_[i] = std::sqrt(ss / (n - 1.0));
    if (!(std_[i] > 0.0))
      throw ConfigError("zero variance in coefficient " + std::string(kCoefficientNames[i]));
  }
}

ParamVector ZScoreScaler::transform(const MaterialParams& p) const {
  ParamVector z{};
  for (std::size_t i = 0; i < kNumCoefficients; ++i) z[i] = (p.values[i] - mean_[i]) / std_[i];
  return z;
}

double ZScoreScaler::distance(const MaterialParams& a, const MaterialParams& b) const {
  double s = 0.0;
  for (std::size_t i = 0; i < kNumCoefficients; ++i) {
    const double d = (a.values[i] - b.values[i]) / std_[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double param_distance(const MaterialParams& a, const MaterialParams& b,
                      std::span<const MaterialParams> population) {
  return ZScoreScaler(population).distance(a, b);
}

std::vector<double> fractional_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 share the average of 1-based ranks i+1..j.
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw std::domain_error("pearson: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 3) throw std::invalid_argument("spearman: need at least 3 observations");
  const auto rx = fractional_ranks(x);
  const auto ry = fractional_ranks(y);
  try {
    return pearson(rx, ry);
  } catch (const std::domain_error&) {
    throw std::domain_error("spearman: constant input, correlation undefined");
  }
}

void to_json(nlohmann::json& j, const MaterialParams& p) {
  j = nlohmann::json::object();
  for (std::size_t i = 0; i < kNumCoefficients; ++i) j[std::string(kCoefficientNames[i])] = p.values[i];
}

void from_json(const nlohmann::json& j, MaterialParams& p) {
  for (std::size_t i = 0; i < kNumCoefficients; ++i) {
    const std::string key(kCoefficientNames[i]);
    if (!j.contains(key)) throw ConfigError("material parameters missing field '" + key + "'");
    p.values[i] = j.at(key).get<double>();
  }
  p.validate();
}

void to_json(nlohmann::json& j, const ParameterBounds& b) {
  j = nlohmann::json{{"min", b.min}, {"max", b.max}};
}

void from_json(const nlohmann::json& j, ParameterBounds& b) {
  if (!j.contains("min") || !j.contains("max")) throw ConfigError("bounds need 'min' and 'max'");
  const auto lo = j.at("min").get<std::vector<double>>();
  const auto hi = j.at("max").get<std::vector<double>>();
  if (lo.size() != kNumCoefficients || hi.size() != kNumCoefficients)
    throw ConfigError("bounds arrays must have 7 entries");
  std::copy(lo.begin(), lo.end(), b.min.begin());
  std::copy(hi.begin(), hi.end(), b.max.begin());
  b.validate();
}

void to_json(nlohmann::json& j, const SamplerConfig& c) {
  j = nlohmann::json{{"bounds", c.bounds},
                     {"log_uniform", c.log_uniform},
                     {"stretch_coupling", c.stretch_coupling},
                     {"bias_density_coupling", c.bias_density_coupling},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SamplerConfig& c) {
  c = SamplerConfig{};
  if (j.contains("bounds")) c.bounds = j.at("bounds").get<ParameterBounds>();
  if (j.contains("log_uniform")) {
    const auto flags = j.at("log_uniform").get<std::vector<bool>>();
    if (flags.size() != kNumCoefficients) throw ConfigError("log_uniform must have 7 entries");
    std::copy(flags.begin(), flags.end(), c.log_uniform.begin());
  }
  c.stretch_coupling = j.value("stretch_coupling", c.stretch_coupling);
  c.bias_density_coupling = j.value("bias_density_coupling", c.bias_density_coupling);
  c.seed = j.value("seed", c.seed);
  c.validate();
}

}  // namespace drape
