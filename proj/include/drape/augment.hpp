#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "json.hpp"

#include "drape/image.hpp"

namespace drape {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Depth-sensor style augmentation. Transforms run in this order:
/// perspective, rescale, thin-plate, blur, noise, posterize, erase.
/// Each is applied with its own probability p.
struct AugmentPolicy {
  struct Perspective {
    double p = 0.5;
    double max_shift = 0.03;  // corner displacement, fraction of width/height
  } perspective;
  struct Rescale {
    double p = 0.5;
    Range factor{0.9, 1.1};
  } rescale;
  struct ThinPlate {
    double p = 0.5;
    int grid = 4;           // control points per side
    double sigma_px = 2.0;  // displacement std-dev
  } thin_plate;
  struct Blur {
    double p = 0.5;
    Range sigma_px{0.5, 1.5};
  } blur;
  struct Noise {
    double p = 0.8;
    Range sigma{0.003, 0.02};  // value units, foreground pixels only
  } noise;
  struct Posterize {
    double p = 0.3;
    Range levels{64, 256};
  } posterize;
  struct Erase {
    double p = 0.3;
    Range count{0, 3};
    Range area_fraction{0.02, 0.10};
  } erase;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
  static AugmentPolicy disabled();
};

Image augment(const Image& img, const AugmentPolicy& policy, std::uint64_t sample_seed);
DepthImage augment(const DepthImage& img, const AugmentPolicy& policy, std::uint64_t sample_seed);

// Individual transforms. Geometric ones resample bilinearly and fill
// uncovered pixels with the background value 1.
using Offset2 = std::array<double, 2>;
// Moves the image corners (tl, tr, br, bl) by the given pixel offsets.
Image warp_perspective(const Image& img, const std::array<Offset2, 4>& corner_shift);
Image rescale(const Image& img, double factor);
Image thin_plate_warp(const Image& img, int grid, const std::vector<Offset2>& displacements);
Image gaussian_blur(const Image& img, double sigma_px);
Image posterize(const Image& img, int levels);

/// Histogram equalization over 256 bins of the foreground (values < 1).
/// Background pixels stay exactly 1 and equalized foreground stays below
/// 1. A foreground occupying a single bin is returned unchanged.
Image equalize(const Image& img);

void to_json(nlohmann::json& j, const AugmentPolicy& p);
void from_json(const nlohmann::json& j, AugmentPolicy& p);

}  // namespace drape
