#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace drape {

inline constexpr std::size_t kNumCoefficients = 7;

enum class Coefficient : std::size_t {
  kStretchWarp = 0,
  kStretchWeft,
  kStretchBias,
  kBendingWarp,
  kBendingWeft,
  kBendingBias,
  kDensity,
};

// Serialized field names, in vector order.
inline constexpr std::array<std::string_view, kNumCoefficients> kCoefficientNames = {
    "kStretchWarp", "kStretchWeft", "kStretchBias", "kBendingWarp",
    "kBendingWeft", "kBendingBias", "density"};

std::string_view coefficient_name(std::size_t index);
// Throws ConfigError for unknown names.
std::size_t coefficient_index(std::string_view name);

using ParamVector = std::array<double, kNumCoefficients>;

/// Membrane stiffness (N/m), bending stiffness (N m) per warp/weft/bias
/// direction, plus area density (kg/m^2).
struct MaterialParams {
  ParamVector values{};

  static MaterialParams uniform(double stretch, double bending, double density);

  double& operator[](Coefficient c) { return values[static_cast<std::size_t>(c)]; }
  double operator[](Coefficient c) const { return values[static_cast<std::size_t>(c)]; }

  double k_stretch_warp() const { return values[0]; }
  double k_stretch_weft() const { return values[1]; }
  double k_stretch_bias() const { return values[2]; }
  double k_bending_warp() const { return values[3]; }
  double k_bending_weft() const { return values[4]; }
  double k_bending_bias() const { return values[5]; }
  double density() const { return values[6]; }

  // Throws ConfigError unless every value is finite and strictly positive.
  void validate() const;

  friend bool operator==(const MaterialParams&, const MaterialParams&) = default;
};

struct ParameterBounds {
  ParamVector min{};
  ParamVector max{};

  // Stiffness ranges span limp knits to coated wovens.
  static ParameterBounds defaults();
  void validate() const;
};

struct SamplerConfig {
  ParameterBounds bounds = ParameterBounds::defaults();
  std::array<bool, kNumCoefficients> log_uniform = {true, true, true, true, true, true, false};
  double stretch_coupling = 0.7;
  double bias_density_coupling = 0.4;
  std::uint64_t seed = 0;

  void validate() const;
};

// Gaussian copula draw; depends only on (cfg.seed, index).
MaterialParams sample_params(const SamplerConfig& cfg, std::uint64_t index);

struct NormalizedParams {
  ParamVector values{};
  std::array<bool, kNumCoefficients> clipped{};

  bool any_clipped() const;
};

// Min-max normalization; out-of-range inputs clip to [0,1] and are flagged.
NormalizedParams normalize_params(const MaterialParams& p, const ParameterBounds& b);
MaterialParams denormalize_params(const ParamVector& normalized, const ParameterBounds& b);

/// Per-coefficient mean and sample standard deviation of a population.
/// Distances are Euclidean norms of z-score differences.
class ZScoreScaler {
 public:
  explicit ZScoreScaler(std::span<const MaterialParams> population);

  ParamVector transform(const MaterialParams& p) const;
  double distance(const MaterialParams& a, const MaterialParams& b) const;

  const ParamVector& mean() const { return mean_; }
  const ParamVector& stddev() const { return std_; }

 private:
  ParamVector mean_{};
  ParamVector std_{};
};

double param_distance(const MaterialParams& a, const MaterialParams& b,
                      std::span<const MaterialParams> population);

// Fractional ranks (1-based, ties share the average rank).
std::vector<double> fractional_ranks(std::span<const double> values);
double pearson(std::span<const double> x, std::span<const double> y);
// Throws std::invalid_argument on size mismatch or n < 3, std::domain_error
// when either input is constant.
double spearman(std::span<const double> x, std::span<const double> y);

void to_json(nlohmann::json& j, const MaterialParams& p);
void from_json(const nlohmann::json& j, MaterialParams& p);
void to_json(nlohmann::json& j, const ParameterBounds& b);
void from_json(const nlohmann::json& j, ParameterBounds& b);
void to_json(nlohmann::json& j, const SamplerConfig& c);
void from_json(const nlohmann::json& j, SamplerConfig& c);

}  // namespace drape
