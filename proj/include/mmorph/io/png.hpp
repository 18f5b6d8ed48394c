#pragma once

// 8-bit grayscale PNG export for 2D images and determinant maps.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include <png.h>

#include "mmorph/error.hpp"
#include "mmorph/grid.hpp"

namespace mmorph::io {

inline constexpr double kImageWindowLo = 0.0, kImageWindowHi = 1.0;
inline constexpr double kDetWindowLo = 0.5, kDetWindowHi = 1.5;

/// Rows follow axis 0, columns axis 1.
inline void write_png_gray8(const std::filesystem::path& path, int rows, int cols, const std::vector<unsigned char>& px) {
  if (px.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw DataError("png: pixel count mismatch");
  }
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw DataError("cannot open '" + path.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw DataError("png: write failed for '" + path.string() + "'");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < rows; ++r) {
    png_write_row(png, const_cast<png_bytep>(px.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

inline std::vector<unsigned char> window8(const std::vector<double>& values, double lo, double hi) {
  std::vector<unsigned char> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double t = std::clamp((values[i] - lo) / (hi - lo), 0.0, 1.0);
    out[i] = static_cast<unsigned char>(std::lround(255.0 * t));
  }
  return out;
}

inline void export_channel_png(const ScalarImage<2>& img, int channel, const std::filesystem::path& path) {
  std::vector<double> v(img.nodes());
  for (std::size_t n = 0; n < v.size(); ++n) v[n] = img(n, channel);
  write_png_gray8(path, img.shape().dims[0], img.shape().dims[1], window8(v, kImageWindowLo, kImageWindowHi));
}

inline void export_det_png(const GridShape<2>& shape, const std::vector<double>& dets,
                           const std::filesystem::path& path) {
  write_png_gray8(path, shape.dims[0], shape.dims[1], window8(dets, kDetWindowLo, kDetWindowHi));
}

}  // namespace mmorph::io
