#pragma once

#include <cstdint>
#include <optional>

#include "noiseforge/image.hpp"
#include "noiseforge/metrics.hpp"

namespace noiseforge {

/// Tag carried by every metric computed from reference_segmenter output.
inline constexpr const char* kReferencePredictorTag = "reference-predictor";

/// Level maximizing Otsu's between-class variance over a 256-bin histogram;
/// the dark class is levels <= threshold. Empty when fewer than two levels
/// occur.
std::optional<std::uint8_t> otsu_threshold(const QuantizedImage& img);

struct ReferenceSegmentation {
  BinaryMask mask;
  /// Set when the image is constant and no threshold exists.
  bool degenerate = false;
};

/// Deterministic stand-in predictor: Otsu dark-region mask, keeping the two
/// largest 4-connected components. Lets a sweep run end to end without any
/// trained model; its scores say nothing about real model robustness.
ReferenceSegmentation reference_segmenter(const NormalizedImage& img);

}  // namespace noiseforge
