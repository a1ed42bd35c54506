#include "drape/augment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "drape/error.hpp"
#include "drape/rng.hpp"

namespace drape {

namespace {

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + ": probability must lie in [0,1]");
}

void check_range(const Range& r, const char* name, double min_allowed) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi || r.lo < min_allowed)
    throw ConfigError(std::string(name) + ": invalid range");
}

void clamp_unit(Image& img) {
  for (double& v : img.values) v = std::clamp(v, 0.0, 1.0);
}

// Bilinear lookup in pixel-index coordinates; outside samples read background.
double sample(const Image& img, double fx, double fy) {
  const double x0f = std::floor(fx), y0f = std::floor(fy);
  const double tx = fx - x0f, ty = fy - y0f;
  const int x0 = static_cast<int>(x0f), y0 = static_cast<int>(y0f);
  auto px = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return kBackgroundDepth;
    return img.at(x, y);
  };
  double v = 0.0;
  if ((1 - tx) * (1 - ty) != 0.0) v += (1 - tx) * (1 - ty) * px(x0, y0);
  if (tx * (1 - ty) != 0.0) v += tx * (1 - ty) * px(x0 + 1, y0);
  if ((1 - tx) * ty != 0.0) v += (1 - tx) * ty * px(x0, y0 + 1);
  if (tx * ty != 0.0) v += tx * ty * px(x0 + 1, y0 + 1);
  return v;
}

template <typename Map>
Image remap(const Image& img, Map&& source_of) {
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const auto [sx, sy] = source_of(static_cast<double>(x), static_cast<double>(y));
      out.at(x, y) = sample(img, sx, sy);
    }
  return out;
}

double tps_kernel(double r2) { return r2 > 0.0 ? 0.5 * r2 * std::log(r2) : 0.0; }  // r^2 log r

std::mt19937_64 stage_rng(const AugmentPolicy& policy, std::uint64_t sample_seed, std::uint64_t stage) {
  return make_rng({policy.seed, sample_seed, 0x41554741ULL, stage});
}

}  // namespace

void AugmentPolicy::validate() const {
  check_probability(perspective.p, "perspective");
  check_probability(rescale.p, "rescale");
  check_probability(thin_plate.p, "thin_plate");
  check_probability(blur.p, "blur");
  check_probability(noise.p, "noise");
  check_probability(posterize.p, "posterize");
  check_probability(erase.p, "erase");
  if (!(perspective.max_shift >= 0.0 && perspective.max_shift < 0.5))
    throw ConfigError("perspective: max_shift must lie in [0, 0.5)");
  check_range(rescale.factor, "rescale.factor", 1e-3);
  if (thin_plate.grid < 2) throw ConfigError("thin_plate: grid must be >= 2");
  if (!(thin_plate.sigma_px >= 0.0)) throw ConfigError("thin_plate: sigma must be >= 0");
  check_range(blur.sigma_px, "blur.sigma_px", 0.0);
  check_range(noise.sigma, "noise.sigma", 0.0);
  check_range(posterize.levels, "posterize.levels", 2.0);
  check_range(erase.count, "erase.count", 0.0);
  check_range(erase.area_fraction, "erase.area_fraction", 0.0);
  if (erase.area_fraction.hi > 1.0) throw ConfigError("erase.area_fraction must be <= 1");
}

AugmentPolicy AugmentPolicy::disabled() {
  AugmentPolicy p;
  p.perspective.p = p.rescale.p = p.thin_plate.p = p.blur.p = 0.0;
  p.noise.p = p.posterize.p = p.erase.p = 0.0;
  return p;
}

Image warp_perspective(const Image& img, const std::array<Offset2, 4>& corner_shift) {
  const double w = img.width - 1.0, h = img.height - 1.0;
  const std::array<Offset2, 4> src = {{{0, 0}, {w, 0}, {w, h}, {0, h}}};
  // Homography taking displaced (output) corners back to the source corners.
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int k = 0; k < 4; ++k) {
    const double x = src[k][0] + corner_shift[k][0], y = src[k][1] + corner_shift[k][1];
    const double u = src[k][0], v = src[k][1];
    a.row(2 * k) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * k + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * k) = u;
    b(2 * k + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> hv = a.fullPivLu().solve(b);
  Image out = remap(img, [&](double x, double y) {
    const double d = hv(6) * x + hv(7) * y + 1.0;
    return std::pair{(hv(0) * x + hv(1) * y + hv(2)) / d, (hv(3) * x + hv(4) * y + hv(5)) / d};
  });
  clamp_unit(out);
  return out;
}

Image rescale(const Image& img, double factor) {
  if (!(factor > 0.0)) throw ConfigError("rescale factor must be positive");
  const double cx = 0.5 * (img.width - 1), cy = 0.5 * (img.height - 1);
  Image out = remap(img, [&](double x, double y) {
    return std::pair{cx + (x - cx) / factor, cy + (y - cy) / factor};
  });
  clamp_unit(out);
  return out;
}

Image thin_plate_warp(const Image& img, int grid, const std::vector<Offset2>& displacements) {
  if (grid < 2) throw ConfigError("thin-plate grid must be >= 2");
  const int n = grid * grid;
  if (static_cast<int>(displacements.size()) != n) throw ConfigError("thin-plate displacement count mismatch");
  // Work in [0,1]^2 for conditioning.
  const double sx = std::max(1, img.width - 1), sy = std::max(1, img.height - 1);
  std::vector<Offset2> ctrl(n);
  for (int j = 0; j < grid; ++j)
    for (int i = 0; i < grid; ++i) ctrl[j * grid + i] = {static_cast<double>(i) / (grid - 1), static_cast<double>(j) / (grid - 1)};

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 3, n + 3);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double dx = ctrl[r][0] - ctrl[c][0], dy = ctrl[r][1] - ctrl[c][1];
      a(r, c) = tps_kernel(dx * dx + dy * dy);
    }
    a(r, n) = a(n, r) = 1.0;
    a(r, n + 1) = a(n + 1, r) = ctrl[r][0];
    a(r, n + 2) = a(n + 2, r) = ctrl[r][1];
    rhs(r, 0) = displacements[r][0];
    rhs(r, 1) = displacements[r][1];
  }
  const Eigen::MatrixXd coef = a.colPivHouseholderQr().solve(rhs);

  Image out = remap(img, [&](double x, double y) {
    const double u = x / sx, v = y / sy;
    double fx = coef(n, 0) + coef(n + 1, 0) * u + coef(n + 2, 0) * v;
    double fy = coef(n, 1) + coef(n + 1, 1) * u + coef(n + 2, 1) * v;
    for (int k = 0; k < n; ++k) {
      const double du = u - ctrl[k][0], dv = v - ctrl[k][1];
      const double kern = tps_kernel(du * du + dv * dv);
      fx += coef(k, 0) * kern;
      fy += coef(k, 1) * kern;
    }
    return std::pair{x + fx, y + fy};
  });
  clamp_unit(out);
  return out;
}

Image gaussian_blur(const Image& img, double sigma_px) {
  if (!(sigma_px > 0.0)) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma_px));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) sum += kernel[k + radius] = std::exp(-0.5 * k * k / (sigma_px * sigma_px));
  for (double& k : kernel) k /= sum;

  Image tmp(img.width, img.height), out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * img.at(std::clamp(x + k, 0, img.width - 1), y);
      tmp.at(x, y) = acc;
    }
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp.at(x, std::clamp(y + k, 0, img.height - 1));
      out.at(x, y) = acc;
    }
  clamp_unit(out);
  return out;
}

Image posterize(const Image& img, int levels) {
  if (levels < 2) throw ConfigError("posterize needs at least 2 levels");
  Image out = img;
  const double steps = levels - 1.0;
  for (double& v : out.values) v = std::round(std::clamp(v, 0.0, 1.0) * steps) / steps;
  return out;
}

Image augment(const Image& input, const AugmentPolicy& policy, std::uint64_t sample_seed) {
  policy.validate();
  Image img = input;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform = [&](auto& rng, const Range& r) { return r.lo + (r.hi - r.lo) * unit(rng); };
  auto uniform_int = [&](auto& rng, const Range& r) {
    return std::uniform_int_distribution<int>(static_cast<int>(std::ceil(r.lo)), static_cast<int>(std::floor(r.hi)))(rng);
  };

  if (auto rng = stage_rng(policy, sample_seed, 0); unit(rng) < policy.perspective.p) {
    std::array<Offset2, 4> shift{};
    for (auto& s : shift) {
      s[0] = (2.0 * unit(rng) - 1.0) * policy.perspective.max_shift * img.width;
      s[1] = (2.0 * unit(rng) - 1.0) * policy.perspective.max_shift * img.height;
    }
    img = warp_perspective(img, shift);
  }
  if (auto rng = stage_rng(policy, sample_seed, 1); unit(rng) < policy.rescale.p) {
    img = rescale(img, uniform(rng, policy.rescale.factor));
  }
  if (auto rng = stage_rng(policy, sample_seed, 2); unit(rng) < policy.thin_plate.p) {
    const int g = policy.thin_plate.grid;
    std::vector<Offset2> d(static_cast<std::size_t>(g * g));
    for (auto& o : d) o = {policy.thin_plate.sigma_px * normal(rng), policy.thin_plate.sigma_px * normal(rng)};
    img = thin_plate_warp(img, g, d);
  }
  if (auto rng = stage_rng(policy, sample_seed, 3); unit(rng) < policy.blur.p) {
    img = gaussian_blur(img, uniform(rng, policy.blur.sigma_px));
  }
  if (auto rng = stage_rng(policy, sample_seed, 4); unit(rng) < policy.noise.p) {
    const double sigma = uniform(rng, policy.noise.sigma);
    for (double& v : img.values)
      if (v < kBackgroundDepth) v = std::clamp(v + sigma * normal(rng), 0.0, 1.0);
  }
  if (auto rng = stage_rng(policy, sample_seed, 5); unit(rng) < policy.posterize.p) {
    img = posterize(img, uniform_int(rng, policy.posterize.levels));
  }
  if (auto rng = stage_rng(policy, sample_seed, 6); unit(rng) < policy.erase.p && !img.empty()) {
    const int count = uniform_int(rng, policy.erase.count);
    for (int k = 0; k < count; ++k) {
      const double area = uniform(rng, policy.erase.area_fraction) * img.width * img.height;
      const double aspect = std::exp(std::log(0.5) + unit(rng) * std::log(4.0));
      const int rw = std::clamp(static_cast<int>(std::lround(std::sqrt(area * aspect))), 1, img.width);
      const int rh = std::clamp(static_cast<int>(std::lround(std::sqrt(area / aspect))), 1, img.height);
      const int x0 = std::uniform_int_distribution<int>(0, img.width - rw)(rng);
      const int y0 = std::uniform_int_distribution<int>(0, img.height - rh)(rng);
      for (int y = y0; y < y0 + rh; ++y)
        for (int x = x0; x < x0 + rw; ++x) img.at(x, y) = kBackgroundDepth;
    }
  }
  clamp_unit(img);
  return img;
}

DepthImage augment(const DepthImage& img, const AugmentPolicy& policy, std::uint64_t sample_seed) {
  return {augment(img.image, policy, sample_seed), img.near_plane, img.far_plane};
}

Image equalize(const Image& img) {
  constexpr int kBins = 256;
  std::array<long, kBins> hist{};
  long total = 0;
  auto bin_of = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * (kBins - 1))); };
  for (double v : img.values)
    if (v < kBackgroundDepth) {
      ++hist[bin_of(v)];
      ++total;
    }
  if (total == 0) return img;
  std::array<long, kBins> cdf{};
  long run = 0, cdf_min = 0;
  for (int b = 0; b < kBins; ++b) {
    run += hist[b];
    cdf[b] = run;
    if (cdf_min == 0 && run > 0) cdf_min = run;
  }
  if (total == cdf_min) return img;  // one occupied bin

  // Scale by 255/256 so equalized foreground never reaches the background value.
  const double scale = (kBins - 1.0) / kBins / static_cast<double>(total - cdf_min);
  Image out = img;
  for (double& v : out.values)
    if (v < kBackgroundDepth) v = static_cast<double>(cdf[bin_of(v)] - cdf_min) * scale;
  return out;
}

void to_json(nlohmann::json& j, const AugmentPolicy& p) {
  auto range = [](const Range& r) { return nlohmann::json::array({r.lo, r.hi}); };
  j = nlohmann::json{
      {"order", {"perspective", "rescale", "thin_plate", "blur", "noise", "posterize", "erase"}},
      {"perspective", {{"p", p.perspective.p}, {"max_shift", p.perspective.max_shift}}},
      {"rescale", {{"p", p.rescale.p}, {"factor", range(p.rescale.factor)}}},
      {"thin_plate", {{"p", p.thin_plate.p}, {"grid", p.thin_plate.grid}, {"sigma_px", p.thin_plate.sigma_px}}},
      {"blur", {{"p", p.blur.p}, {"sigma_px", range(p.blur.sigma_px)}}},
      {"noise", {{"p", p.noise.p}, {"sigma", range(p.noise.sigma)}}},
      {"posterize", {{"p", p.posterize.p}, {"levels", range(p.posterize.levels)}}},
      {"erase", {{"p", p.erase.p}, {"count", range(p.erase.count)}, {"area_fraction", range(p.erase.area_fraction)}}},
      {"seed", p.seed}};
}

namespace {

void read_range(const nlohmann::json& j, const char* key, Range& r) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (v.is_number()) {
    r.lo = r.hi = v.get<double>();
    return;
  }
  const auto a = v.get<std::vector<double>>();
  if (a.size() != 2) throw ConfigError(std::string(key) + " must be [lo, hi] or a number");
  r = {a[0], a[1]};
}

}  // namespace

void from_json(const nlohmann::json& j, AugmentPolicy& p) {
  p = AugmentPolicy{};
  if (j.contains("order")) {
    const auto order = j.at("order").get<std::vector<std::string>>();
    const std::vector<std::string> fixed = {"perspective", "rescale", "thin_plate", "blur", "noise", "posterize", "erase"};
    if (order != fixed) throw ConfigError("augment order is fixed: perspective, rescale, thin_plate, blur, noise, posterize, erase");
  }
  if (j.contains("perspective")) {
    const auto& s = j.at("perspective");
    p.perspective.p = s.value("p", p.perspective.p);
    p.perspective.max_shift = s.value("max_shift", p.perspective.max_shift);
  }
  if (j.contains("rescale")) {
    const auto& s = j.at("rescale");
    p.rescale.p = s.value("p", p.rescale.p);
    read_range(s, "factor", p.rescale.factor);
  }
  if (j.contains("thin_plate")) {
    const auto& s = j.at("thin_plate");
    p.thin_plate.p = s.value("p", p.thin_plate.p);
    p.thin_plate.grid = s.value("grid", p.thin_plate.grid);
    p.thin_plate.sigma_px = s.value("sigma_px", p.thin_plate.sigma_px);
  }
  if (j.contains("blur")) {
    const auto& s = j.at("blur");
    p.blur.p = s.value("p", p.blur.p);
    read_range(s, "sigma_px", p.blur.sigma_px);
  }
  if (j.contains("noise")) {
    const auto& s = j.at("noise");
    p.noise.p = s.value("p", p.noise.p);
    read_range(s, "sigma", p.noise.sigma);
  }
  if (j.contains("posterize")) {
    const auto& s = j.at("posterize");
    p.posterize.p = s.value("p", p.posterize.p);
    read_range(s, "levels", p.posterize.levels);
  }
  if (j.contains("erase")) {
    const auto& s = j.at("erase");
    p.erase.p = s.value("p", p.erase.p);
    read_range(s, "count", p.erase.count);
    read_range(s, "area_fraction", p.erase.area_fraction);
  }
  p.seed = j.value("seed", p.seed);
  p.validate();
}

}  // namespace drape
