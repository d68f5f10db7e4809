#include "noiseforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "noiseforge/errors.hpp"

namespace noiseforge {
namespace {

void require_same_extent(const Extent& a, const Extent& b) {
  if (!(a == b)) {
    throw ShapeError(fmt::format("mask shapes differ: {}x{} vs {}x{}", a.height, a.width, b.height,
                                 b.width));
  }
}

void require_finite_scores(std::span<const ScoredSample> samples) {
  for (const auto& s : samples) {
    if (!std::isfinite(s.score)) throw NumericError("non-finite classification score");
  }
}

// Indices sorted by descending score; stable so ties keep input order.
std::vector<std::size_t> descending_order(std::span<const ScoredSample> samples) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].score > samples[b].score;
  });
  return order;
}

}  // namespace

BinaryMask::BinaryMask(Extent extent, std::vector<std::uint8_t> bits)
    : extent_(extent), bits_(std::move(bits)) {
  if (extent_.area() == 0) throw DimensionError("mask has zero area");
  if (bits_.size() != extent_.area()) {
    throw DimensionError(fmt::format("mask has {} bits for {}x{}", bits_.size(), extent_.height,
                                     extent_.width));
  }
  for (auto& b : bits_) b = b != 0 ? 1 : 0;
}

BinaryMask BinaryMask::from_labels(const QuantizedImage& labels) {
  return BinaryMask(labels.extent(), {labels.pixels().begin(), labels.pixels().end()});
}

BinaryMask BinaryMask::from_label(const QuantizedImage& labels, std::uint8_t label) {
  std::vector<std::uint8_t> bits(labels.pixels().size());
  std::transform(labels.pixels().begin(), labels.pixels().end(), bits.begin(),
                 [label](std::uint8_t v) { return v == label ? 1 : 0; });
  return BinaryMask(labels.extent(), std::move(bits));
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

QuantizedImage BinaryMask::to_image() const {
  std::vector<std::uint8_t> levels(bits_.size());
  std::transform(bits_.begin(), bits_.end(), levels.begin(),
                 [](std::uint8_t b) { return b != 0 ? 255 : 0; });
  return QuantizedImage(extent_, std::move(levels));
}

MultiClassMask::MultiClassMask(Extent extent, std::vector<std::uint8_t> labels,
                               std::size_t class_count)
    : extent_(extent), labels_(std::move(labels)), class_count_(class_count) {
  if (extent_.area() == 0) throw DimensionError("mask has zero area");
  if (labels_.size() != extent_.area()) throw DimensionError("label count does not match extent");
  if (class_count_ < 2) throw ShapeError("a multi-class mask needs at least background + 1 class");
  for (auto label : labels_) {
    if (label >= class_count_) {
      throw ShapeError(fmt::format("label {} outside [0, {})", label, class_count_));
    }
  }
}

OverlapCounts overlap(const BinaryMask& pred, const BinaryMask& truth) {
  require_same_extent(pred.extent(), truth.extent());
  OverlapCounts c;
  const auto p = pred.bits();
  const auto t = truth.bits();
  for (std::size_t i = 0; i < p.size(); ++i) {
    c.pred += p[i];
    c.truth += t[i];
    c.intersection += p[i] & t[i];
  }
  return c;
}

double dice(const OverlapCounts& counts) {
  if (counts.both_empty()) return 1.0;
  return 2.0 * static_cast<double>(counts.intersection) /
         static_cast<double>(counts.pred + counts.truth);
}

double iou(const OverlapCounts& counts) {
  if (counts.both_empty()) return 1.0;
  return static_cast<double>(counts.intersection) / static_cast<double>(counts.union_size());
}

double dice(const BinaryMask& pred, const BinaryMask& truth) { return dice(overlap(pred, truth)); }

double iou(const BinaryMask& pred, const BinaryMask& truth) { return iou(overlap(pred, truth)); }

PerClassScores per_class_scores(const MultiClassMask& pred, const MultiClassMask& truth) {
  require_same_extent(pred.extent(), truth.extent());
  if (pred.class_count() != truth.class_count()) {
    throw ShapeError(fmt::format("class counts differ: {} vs {}", pred.class_count(),
                                 truth.class_count()));
  }
  const std::size_t classes = pred.class_count();
  std::vector<OverlapCounts> counts(classes);
  const auto p = pred.labels();
  const auto t = truth.labels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    ++counts[p[i]].pred;
    ++counts[t[i]].truth;
    if (p[i] == t[i]) ++counts[p[i]].intersection;
  }

  PerClassScores out;
  for (std::size_t label = 1; label < classes; ++label) {
    out.classes.push_back({label, dice(counts[label]), iou(counts[label])});
    out.macro_dice += out.classes.back().dice;
    out.macro_iou += out.classes.back().iou;
  }
  const auto foreground = static_cast<double>(out.classes.size());
  out.macro_dice /= foreground;
  out.macro_iou /= foreground;
  return out;
}

double auroc(std::span<const ScoredSample> samples) {
  require_finite_scores(samples);
  const auto positives = static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const ScoredSample& s) { return s.positive; }));
  const std::size_t negatives = samples.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw DegenerateInputError("AUROC needs at least one positive and one negative sample");
  }

  // Ascending order; each tie block gets the block's midrank. Ranks are kept
  // doubled so they stay integral.
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return samples[a].score < samples[b].score; });
  std::uint64_t doubled_rank_sum = 0;
  for (std::size_t begin = 0; begin < order.size();) {
    std::size_t end = begin;
    while (end < order.size() && samples[order[end]].score == samples[order[begin]].score) ++end;
    // 1-based ranks begin+1 .. end; doubled midrank = begin + 1 + end.
    const std::uint64_t doubled_midrank = begin + 1 + end;
    for (std::size_t i = begin; i < end; ++i) {
      if (samples[order[i]].positive) doubled_rank_sum += doubled_midrank;
    }
    begin = end;
  }
  // U = R_pos - P(P+1)/2, all doubled.
  const std::uint64_t doubled_u =
      doubled_rank_sum - static_cast<std::uint64_t>(positives) * (positives + 1);
  return static_cast<double>(doubled_u) /
         (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

double auprc(std::span<const ScoredSample> samples) {
  require_finite_scores(samples);
  const auto positives = static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const ScoredSample& s) { return s.positive; }));
  if (positives == 0) throw DegenerateInputError("AUPRC needs at least one positive sample");

  const auto order = descending_order(samples);
  std::size_t tp = 0;
  long double weighted = 0.0L;
  for (std::size_t begin = 0; begin < order.size();) {
    std::size_t end = begin;
    std::size_t block_tp = 0;
    while (end < order.size() && samples[order[end]].score == samples[order[begin]].score) {
      block_tp += samples[order[end]].positive ? 1 : 0;
      ++end;
    }
    tp += block_tp;
    if (block_tp > 0) {
      weighted += static_cast<long double>(tp) * static_cast<long double>(block_tp) /
                  static_cast<long double>(end);
    }
    begin = end;
  }
  return static_cast<double>(weighted / static_cast<long double>(positives));
}

double f1(const ConfusionCounts& counts) {
  const std::size_t denom = 2 * counts.tp + counts.fp + counts.fn;
  if (denom == 0) throw DegenerateInputError("F1 is undefined when tp = fp = fn = 0");
  return 2.0 * static_cast<double>(counts.tp) / static_cast<double>(denom);
}

ConfusionCounts binarize(std::span<const ScoredSample> samples, double threshold) {
  if (!std::isfinite(threshold)) throw NumericError("threshold must be finite");
  ConfusionCounts c;
  for (const auto& s : samples) {
    const bool predicted = s.score >= threshold;
    if (predicted && s.positive) ++c.tp;
    else if (predicted) ++c.fp;
    else if (s.positive) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ThresholdChoice best_f1_threshold(std::span<const ScoredSample> samples) {
  require_finite_scores(samples);
  const bool any_positive =
      std::any_of(samples.begin(), samples.end(), [](const ScoredSample& s) { return s.positive; });
  if (!any_positive) throw DegenerateInputError("threshold selection needs a positive sample");

  std::vector<double> candidates;
  candidates.reserve(samples.size());
  for (const auto& s : samples) candidates.push_back(s.score);
  std::sort(candidates.begin(), candidates.end(), std::greater<>());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  ThresholdChoice best{candidates.front(), -1.0};
  for (double t : candidates) {
    const double score = f1(binarize(samples, t));
    if (score > best.f1) best = {t, score};
  }
  return best;
}

}  // namespace noiseforge
