#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace drape {

/// Single-channel raster, row-major, y down. Values are nominally in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Image() = default;
  Image(int w, int h, double fill = 0.0);

  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }

  friend bool operator==(const Image&, const Image&) = default;
};

using GrayImage = Image;

// Depth normalized so 0 is the near plane and 1 the far plane; background is 1.
struct DepthImage {
  Image image;
  double near_plane = 0.0;
  double far_plane = 1.0;

  friend bool operator==(const DepthImage&, const DepthImage&) = default;
};

inline constexpr double kBackgroundDepth = 1.0;

// 16-bit grayscale PNG storing round(clamp(v,0,1) * 65535).
void write_png16(const std::filesystem::path& path, const Image& img);
Image read_png16(const std::filesystem::path& path);

// 8-bit variant for previews and report grids.
void write_png8(const std::filesystem::path& path, const Image& img);

// <path>.json next to the PNG.
std::filesystem::path sidecar_path(const std::filesystem::path& png);
void write_sidecar(const std::filesystem::path& png, const nlohmann::json& meta);

// Tiles equally sized images into a rows x cols grid; missing cells use fill.
Image tile_images(const std::vector<Image>& cells, int rows, int cols, double fill, int gap = 2);

}  // namespace drape
