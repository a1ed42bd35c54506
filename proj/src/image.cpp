#include "drape/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "drape/error.hpp"

namespace drape {

Image::Image(int w, int h, double fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw ConfigError("image dimensions must be non-negative");
  values.assign(static_cast<std::size_t>(w) * h, fill);
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png(const std::filesystem::path& path, const Image& img, int bit_depth) {
  if (img.width <= 0 || img.height <= 0) throw IoError("cannot write an empty image: " + path.string());
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  const int bytes = bit_depth / 8;
  const double scale = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<png_byte> row(static_cast<std::size_t>(img.width) * bytes);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double v = std::clamp(img.at(x, y), 0.0, 1.0);
      const auto q = static_cast<unsigned>(std::lround(v * scale));
      if (bytes == 2) {
        row[2 * x] = static_cast<png_byte>(q >> 8);  // PNG is big-endian
        row[2 * x + 1] = static_cast<png_byte>(q & 0xff);
      } else {
        row[x] = static_cast<png_byte>(q);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png16(const std::filesystem::path& path, const Image& img) { write_png(path, img, 16); }
void write_png8(const std::filesystem::path& path, const Image& img) { write_png(path, img, 8); }

Image read_png16(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw IoError(path.string() + " is not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed");
  }
  Image img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng failed reading " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);

  // Normalise everything to 16-bit gray.
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth < 16) png_set_expand_16(png);
  png_read_update_info(png, info);

  img = Image(w, h);
  std::vector<png_byte> row(png_get_rowbytes(png, info));
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      img.at(x, y) = static_cast<double>((row[2 * x] << 8) | row[2 * x + 1]) / 65535.0;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

std::filesystem::path sidecar_path(const std::filesystem::path& png) {
  auto p = png;
  p += ".json";
  return p;
}

void write_sidecar(const std::filesystem::path& png, const nlohmann::json& meta) {
  std::ofstream out(sidecar_path(png));
  if (!out) throw IoError("cannot write sidecar for " + png.string());
  out << meta.dump(2) << '\n';
}

Image tile_images(const std::vector<Image>& cells, int rows, int cols, double fill, int gap) {
  int cw = 0, ch = 0;
  for (const auto& c : cells) {
    cw = std::max(cw, c.width);
    ch = std::max(ch, c.height);
  }
  if (rows <= 0 || cols <= 0 || cw == 0) return {};
  Image out(cols * cw + (cols - 1) * gap, rows * ch + (rows - 1) * gap, fill);
  for (std::size_t k = 0; k < cells.size() && static_cast<int>(k) < rows * cols; ++k) {
    const int r = static_cast<int>(k) / cols, c = static_cast<int>(k) % cols;
    const Image& cell = cells[k];
    for (int y = 0; y < cell.height; ++y)
      for (int x = 0; x < cell.width; ++x) out.at(c * (cw + gap) + x, r * (ch + gap) + y) = cell.at(x, y);
  }
  return out;
}

}  // namespace drape
