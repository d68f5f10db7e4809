#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace noiseforge {

/// Image extent in pixels. Both sides are positive for any constructed image.
struct Extent {
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t area() const { return height * width; }
  friend bool operator==(const Extent&, const Extent&) = default;
};

/// Grayscale image with row-major intensities in [0, 1].
class NormalizedImage {
 public:
  /// Throws DimensionError on zero area or length mismatch, NumericError on
  /// non-finite or out-of-range pixels.
  NormalizedImage(Extent extent, std::vector<double> pixels);

  /// Constant-valued image.
  static NormalizedImage filled(Extent extent, double value);

  const Extent& extent() const { return extent_; }
  std::size_t height() const { return extent_.height; }
  std::size_t width() const { return extent_.width; }
  std::span<const double> pixels() const { return pixels_; }
  double at(std::size_t row, std::size_t col) const { return pixels_[row * extent_.width + col]; }

  friend bool operator==(const NormalizedImage&, const NormalizedImage&) = default;

 private:
  Extent extent_;
  std::vector<double> pixels_;
};

/// Grayscale image with row-major 8-bit levels.
class QuantizedImage {
 public:
  QuantizedImage(Extent extent, std::vector<std::uint8_t> pixels);

  const Extent& extent() const { return extent_; }
  std::size_t height() const { return extent_.height; }
  std::size_t width() const { return extent_.width; }
  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::uint8_t at(std::size_t row, std::size_t col) const { return pixels_[row * extent_.width + col]; }

  friend bool operator==(const QuantizedImage&, const QuantizedImage&) = default;

 private:
  Extent extent_;
  std::vector<std::uint8_t> pixels_;
};

/// Unconstrained real-valued field, e.g. a noise stage output before clamping.
struct IntensityField {
  Extent extent;
  std::vector<double> values;
};

/// level / 255 per pixel.
NormalizedImage normalize(const QuantizedImage& raw);

/// round(clamp(p, 0, 1) * 255), half away from zero.
QuantizedImage quantize(const NormalizedImage& img);

/// Clamps each value into [0, 1] before quantizing. Throws NumericError on
/// non-finite values.
QuantizedImage quantize(const IntensityField& field);

/// Clamp every value into [0, 1]. Throws NumericError on non-finite values.
NormalizedImage clamp_to_unit(const IntensityField& field);

/// Bilinear resampling with the align-corners convention: the corner pixel
/// centers of input and output coincide. The image is stretched, not padded,
/// when the aspect ratio changes.
NormalizedImage resample(const NormalizedImage& img, Extent target);

/// Nearest-neighbour resampling for label images, same coordinate mapping as
/// resample(). Never produces a label absent from the input.
QuantizedImage resample_nearest(const QuantizedImage& labels, Extent target);

}  // namespace noiseforge
