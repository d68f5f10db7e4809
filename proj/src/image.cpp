#include "noiseforge/image.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "noiseforge/errors.hpp"

namespace noiseforge {
namespace {

void check_extent(Extent extent, std::size_t length) {
  if (extent.height == 0 || extent.width == 0) {
    throw DimensionError(fmt::format("image has zero area ({}x{})", extent.height, extent.width));
  }
  if (length != extent.area()) {
    throw DimensionError(fmt::format("pixel count {} does not match {}x{}", length, extent.height,
                                     extent.width));
  }
}

// Source coordinate for output index i under align-corners.
double source_coord(std::size_t i, std::size_t in_size, std::size_t out_size) {
  if (out_size == 1 || in_size == 1) return 0.0;
  return static_cast<double>(i) * static_cast<double>(in_size - 1) /
         static_cast<double>(out_size - 1);
}

std::uint8_t quantize_value(double p) {
  if (!std::isfinite(p)) throw NumericError("non-finite pixel value cannot be quantized");
  // std::round rounds halfway cases away from zero.
  return static_cast<std::uint8_t>(std::round(std::clamp(p, 0.0, 1.0) * 255.0));
}

}  // namespace

NormalizedImage::NormalizedImage(Extent extent, std::vector<double> pixels)
    : extent_(extent), pixels_(std::move(pixels)) {
  check_extent(extent_, pixels_.size());
  for (double p : pixels_) {
    if (!std::isfinite(p)) throw NumericError("non-finite pixel in normalized image");
    if (p < 0.0 || p > 1.0) {
      throw NumericError(fmt::format("pixel {} outside [0, 1] in normalized image", p));
    }
  }
}

NormalizedImage NormalizedImage::filled(Extent extent, double value) {
  return NormalizedImage(extent, std::vector<double>(extent.area(), value));
}

QuantizedImage::QuantizedImage(Extent extent, std::vector<std::uint8_t> pixels)
    : extent_(extent), pixels_(std::move(pixels)) {
  check_extent(extent_, pixels_.size());
}

NormalizedImage normalize(const QuantizedImage& raw) {
  std::vector<double> out(raw.pixels().size());
  std::transform(raw.pixels().begin(), raw.pixels().end(), out.begin(),
                 [](std::uint8_t level) { return static_cast<double>(level) / 255.0; });
  return NormalizedImage(raw.extent(), std::move(out));
}

QuantizedImage quantize(const NormalizedImage& img) {
  std::vector<std::uint8_t> out(img.pixels().size());
  std::transform(img.pixels().begin(), img.pixels().end(), out.begin(), quantize_value);
  return QuantizedImage(img.extent(), std::move(out));
}

QuantizedImage quantize(const IntensityField& field) {
  std::vector<std::uint8_t> out(field.values.size());
  std::transform(field.values.begin(), field.values.end(), out.begin(), quantize_value);
  return QuantizedImage(field.extent, std::move(out));
}

NormalizedImage clamp_to_unit(const IntensityField& field) {
  std::vector<double> out(field.values.size());
  std::transform(field.values.begin(), field.values.end(), out.begin(), [](double v) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in intensity field");
    return std::clamp(v, 0.0, 1.0);
  });
  return NormalizedImage(field.extent, std::move(out));
}

NormalizedImage resample(const NormalizedImage& img, Extent target) {
  if (target.height == 0 || target.width == 0) {
    throw DimensionError(
        fmt::format("resample target has zero area ({}x{})", target.height, target.width));
  }
  if (target == img.extent()) return img;

  const std::size_t in_h = img.height();
  const std::size_t in_w = img.width();
  std::vector<double> out(target.area());
  for (std::size_t r = 0; r < target.height; ++r) {
    const double y = source_coord(r, in_h, target.height);
    const auto y0 = static_cast<std::size_t>(std::floor(y));
    const std::size_t y1 = std::min(y0 + 1, in_h - 1);
    const double fy = y - static_cast<double>(y0);
    for (std::size_t c = 0; c < target.width; ++c) {
      const double x = source_coord(c, in_w, target.width);
      const auto x0 = static_cast<std::size_t>(std::floor(x));
      const std::size_t x1 = std::min(x0 + 1, in_w - 1);
      const double fx = x - static_cast<double>(x0);
      const double top = img.at(y0, x0) * (1.0 - fx) + img.at(y0, x1) * fx;
      const double bottom = img.at(y1, x0) * (1.0 - fx) + img.at(y1, x1) * fx;
      // Convex combination; the clamp only absorbs last-ulp overshoot.
      out[r * target.width + c] = std::clamp(top * (1.0 - fy) + bottom * fy, 0.0, 1.0);
    }
  }
  return NormalizedImage(target, std::move(out));
}

QuantizedImage resample_nearest(const QuantizedImage& labels, Extent target) {
  if (target.height == 0 || target.width == 0) {
    throw DimensionError(
        fmt::format("resample target has zero area ({}x{})", target.height, target.width));
  }
  if (target == labels.extent()) return labels;

  std::vector<std::uint8_t> out(target.area());
  for (std::size_t r = 0; r < target.height; ++r) {
    const auto y = static_cast<std::size_t>(
        std::round(source_coord(r, labels.height(), target.height)));
    for (std::size_t c = 0; c < target.width; ++c) {
      const auto x = static_cast<std::size_t>(
          std::round(source_coord(c, labels.width(), target.width)));
      out[r * target.width + c] = labels.at(y, x);
    }
  }
  return QuantizedImage(target, std::move(out));
}

}  // namespace noiseforge
