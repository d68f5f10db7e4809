#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "noiseforge/image.hpp"

namespace noiseforge {

class BinaryMask {
 public:
  BinaryMask(Extent extent, std::vector<std::uint8_t> bits);

  /// Foreground = any nonzero level.
  static BinaryMask from_labels(const QuantizedImage& labels);
  /// Foreground = pixels equal to `label`.
  static BinaryMask from_label(const QuantizedImage& labels, std::uint8_t label);

  const Extent& extent() const { return extent_; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  bool at(std::size_t row, std::size_t col) const { return bits_[row * extent_.width + col] != 0; }
  std::size_t count() const;

  /// 0/255 levels, suitable for writing as an image.
  QuantizedImage to_image() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  Extent extent_;
  std::vector<std::uint8_t> bits_;  // 0 or 1
};

class MultiClassMask {
 public:
  /// Throws ShapeError if any label >= class_count.
  MultiClassMask(Extent extent, std::vector<std::uint8_t> labels, std::size_t class_count);

  const Extent& extent() const { return extent_; }
  std::span<const std::uint8_t> labels() const { return labels_; }
  std::size_t class_count() const { return class_count_; }

 private:
  Extent extent_;
  std::vector<std::uint8_t> labels_;
  std::size_t class_count_;
};

struct ScoredSample {
  double score = 0.0;
  bool positive = false;
};

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct OverlapCounts {
  std::size_t pred = 0;
  std::size_t truth = 0;
  std::size_t intersection = 0;

  std::size_t union_size() const { return pred + truth - intersection; }
  bool both_empty() const { return pred == 0 && truth == 0; }
};

OverlapCounts overlap(const BinaryMask& pred, const BinaryMask& truth);

// Both-empty masks score 1.0 for dice and iou.
double dice(const OverlapCounts& counts);
double iou(const OverlapCounts& counts);
double dice(const BinaryMask& pred, const BinaryMask& truth);
double iou(const BinaryMask& pred, const BinaryMask& truth);

struct ClassScore {
  std::size_t label = 0;
  double dice = 0.0;
  double iou = 0.0;
};

struct PerClassScores {
  /// One entry per foreground class, ascending label order.
  std::vector<ClassScore> classes;
  double macro_dice = 0.0;
  double macro_iou = 0.0;
};

/// One-vs-rest scores for every foreground class (label 0 is background),
/// with unweighted macro averages.
PerClassScores per_class_scores(const MultiClassMask& pred, const MultiClassMask& truth);

/// Mann-Whitney AUROC with half credit for ties, computed from midranks.
double auroc(std::span<const ScoredSample> samples);

/// Step-wise average precision. Samples sharing a score form one cut point.
double auprc(std::span<const ScoredSample> samples);

/// 2 tp / (2 tp + fp + fn).
double f1(const ConfusionCounts& counts);

/// score >= threshold predicts positive.
ConfusionCounts binarize(std::span<const ScoredSample> samples, double threshold);

struct ThresholdChoice {
  double threshold = 0.5;
  double f1 = 0.0;
};

/// Threshold among the observed scores that maximizes F1; ties go to the
/// higher threshold.
ThresholdChoice best_f1_threshold(std::span<const ScoredSample> samples);

}  // namespace noiseforge
