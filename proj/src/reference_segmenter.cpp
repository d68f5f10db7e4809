#include "noiseforge/reference_segmenter.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <vector>

namespace noiseforge {

std::optional<std::uint8_t> otsu_threshold(const QuantizedImage& img) {
  std::array<double, 256> hist{};
  for (auto level : img.pixels()) hist[level] += 1.0;
  const auto total = static_cast<double>(img.pixels().size());
  double total_moment = 0.0;
  for (std::size_t l = 0; l < hist.size(); ++l) total_moment += static_cast<double>(l) * hist[l];

  std::optional<std::uint8_t> best;
  double best_var = -1.0;
  double w0 = 0.0;
  double m0 = 0.0;
  for (std::size_t t = 0; t < 255; ++t) {
    w0 += hist[t];
    m0 += static_cast<double>(t) * hist[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = m0 / w0;
    const double mu1 = (total_moment - m0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best_var) {
      best_var = between;
      best = static_cast<std::uint8_t>(t);
    }
  }
  return best;
}

ReferenceSegmentation reference_segmenter(const NormalizedImage& img) {
  const QuantizedImage levels = quantize(img);
  const Extent extent = img.extent();
  const auto threshold = otsu_threshold(levels);
  if (!threshold) {
    return {BinaryMask(extent, std::vector<std::uint8_t>(extent.area(), 0)), true};
  }

  const auto px = levels.pixels();
  std::vector<std::int32_t> component(px.size(), -1);
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> queue;
  for (std::size_t seed = 0; seed < px.size(); ++seed) {
    if (px[seed] > *threshold || component[seed] >= 0) continue;
    const auto id = static_cast<std::int32_t>(sizes.size());
    std::size_t size = 0;
    queue.assign(1, seed);
    component[seed] = id;
    while (!queue.empty()) {
      const std::size_t i = queue.back();
      queue.pop_back();
      ++size;
      const std::size_t r = i / extent.width;
      const std::size_t c = i % extent.width;
      auto visit = [&](std::size_t j) {
        if (px[j] <= *threshold && component[j] < 0) {
          component[j] = id;
          queue.push_back(j);
        }
      };
      if (r > 0) visit(i - extent.width);
      if (r + 1 < extent.height) visit(i + extent.width);
      if (c > 0) visit(i - 1);
      if (c + 1 < extent.width) visit(i + 1);
    }
    sizes.push_back(size);
  }

  // Two largest; equal sizes resolve to the component found first in raster order.
  std::vector<std::int32_t> order(sizes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int32_t>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int32_t a, std::int32_t b) { return sizes[a] > sizes[b]; });
  order.resize(std::min<std::size_t>(order.size(), 2));

  std::vector<std::uint8_t> bits(px.size(), 0);
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (component[i] >= 0 && std::find(order.begin(), order.end(), component[i]) != order.end()) {
      bits[i] = 1;
    }
  }
  return {BinaryMask(extent, std::move(bits)), false};
}

}  // namespace noiseforge
