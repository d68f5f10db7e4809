#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

#include "noiseforge/image.hpp"
#include "noiseforge/image_io.hpp"
#include "noiseforge/metrics.hpp"

namespace noiseforge::testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("noiseforge_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Synthetic radiograph: bright background with a vertical gradient and two
/// dark elliptical "lung fields" whose geometry varies with `variant`.
inline QuantizedImage synthetic_radiograph(std::size_t size, int variant) {
  std::vector<std::uint8_t> px(size * size);
  const double s = static_cast<double>(size);
  const double dx = 0.02 * (variant % 5);
  const double dy = 0.015 * (variant % 3);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double y = static_cast<double>(r) / s;
      const double x = static_cast<double>(c) / s;
      double v = 0.75 + 0.15 * y;
      const auto inside = [&](double cx, double cy, double rx, double ry) {
        const double ux = (x - cx) / rx;
        const double uy = (y - cy) / ry;
        return ux * ux + uy * uy <= 1.0;
      };
      if (inside(0.30 + dx, 0.50 + dy, 0.14, 0.30) || inside(0.70 - dx, 0.50 + dy, 0.14, 0.30)) {
        v = 0.25 + 0.05 * x;
      }
      px[r * size + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return QuantizedImage({size, size}, std::move(px));
}

/// Lung-field ground truth matching synthetic_radiograph().
inline QuantizedImage synthetic_mask(std::size_t size, int variant) {
  const auto img = synthetic_radiograph(size, variant);
  std::vector<std::uint8_t> px(img.pixels().size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = img.pixels()[i] < 128 ? 255 : 0;
  return QuantizedImage(img.extent(), std::move(px));
}

/// Writes `count` synthetic images + masks and a segmentation manifest.
/// Returns the manifest path.
inline fs::path write_segmentation_corpus(const fs::path& dir, int count, std::size_t size = 32) {
  std::string manifest = "image_id,patient_id,image_path,mask_path,label,source_tag\n";
  for (int i = 0; i < count; ++i) {
    const std::string id = "img" + std::to_string(i);
    write_image(dir / "images" / (id + ".png"), synthetic_radiograph(size, i));
    write_image(dir / "masks" / (id + ".png"), synthetic_mask(size, i));
    manifest += id + ",p" + std::to_string(i / 2) + ",images/" + id + ".png,masks/" + id +
                ".png,,synthetic\n";
  }
  write_text_file(dir / "manifest.csv", manifest);
  return dir / "manifest.csv";
}

/// Mask of `extent` with the first `n` pixels (raster order) set, starting at `offset`.
inline BinaryMask run_mask(Extent extent, std::size_t offset, std::size_t n) {
  std::vector<std::uint8_t> bits(extent.area(), 0);
  for (std::size_t i = offset; i < offset + n; ++i) bits[i] = 1;
  return BinaryMask(extent, std::move(bits));
}

}  // namespace noiseforge::testing
