#include "noiseforge/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "csv.hpp"
#include "noiseforge/errors.hpp"
#include "noiseforge/image_io.hpp"
#include "noiseforge/random.hpp"

namespace noiseforge {
namespace {

constexpr std::string_view kSplitHeader = "patient_id,split";

std::optional<bool> parse_label(std::string_view field, std::string_view source, std::size_t line) {
  if (field.empty()) return std::nullopt;
  if (field == "0") return false;
  if (field == "1") return true;
  throw ParseError(fmt::format("{}:{}: label must be 0 or 1, got '{}'", source, line, field));
}

std::uint64_t bounded(CounterStream& stream, std::uint64_t n) {
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = (0 - n) % n;
  while (true) {
    const std::uint64_t x = stream.next_u64();
    if (x >= limit) return x % n;
  }
}

void seeded_shuffle(std::vector<std::string>& items, std::uint64_t key) {
  CounterStream stream(key);
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[bounded(stream, i)]);
  }
}

}  // namespace

const CorpusEntry* CorpusManifest::find(std::string_view image_id) const {
  for (const auto& e : entries) {
    if (e.image_id == image_id) return &e;
  }
  return nullptr;
}

std::vector<std::string> CorpusManifest::patients() const {
  std::set<std::string> ids;
  for (const auto& e : entries) ids.insert(e.patient_id);
  return {ids.begin(), ids.end()};
}

CorpusManifest parse_manifest(std::string_view text, TaskKind task,
                              const std::filesystem::path& base_dir, std::string_view source_name) {
  const auto rows = csv::lines(text);
  if (rows.empty() || rows.front() != kManifestHeader) {
    throw ParseError(fmt::format("{}:1: expected header '{}'", source_name, kManifestHeader));
  }
  CorpusManifest manifest;
  manifest.task_kind = task;
  manifest.class_names = task == TaskKind::segmentation
                             ? std::vector<std::string>{"background", "foreground"}
                             : std::vector<std::string>{"negative", "positive"};
  std::set<std::string> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::size_t line = i + 1;
    if (rows[i].empty()) continue;
    const auto f = csv::split_fields(rows[i]);
    if (f.size() != 6) {
      throw ParseError(fmt::format("{}:{}: expected 6 fields, got {}", source_name, line, f.size()));
    }
    if (f[0].empty() || f[1].empty() || f[2].empty()) {
      throw ParseError(fmt::format("{}:{}: image_id, patient_id and image_path are required",
                                   source_name, line));
    }
    if (!seen.insert(f[0]).second) {
      throw ParseError(fmt::format("{}:{}: duplicate image_id '{}'", source_name, line, f[0]));
    }
    CorpusEntry entry{f[0], f[1], base_dir / f[2], std::nullopt, parse_label(f[4], source_name, line),
                      f[5]};
    if (!f[3].empty()) entry.mask_path = base_dir / f[3];
    if (task == TaskKind::segmentation && !entry.mask_path) {
      throw ParseError(fmt::format("{}:{}: segmentation entry '{}' has no mask_path", source_name,
                                   line, entry.image_id));
    }
    if (task == TaskKind::binary_classification && !entry.label) {
      throw ParseError(fmt::format("{}:{}: classification entry '{}' has no label", source_name,
                                   line, entry.image_id));
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

CorpusManifest read_manifest(const std::filesystem::path& path, TaskKind task) {
  const auto bytes = read_file_bytes(path);
  return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                        task, path.parent_path(), path.string());
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights) {
  std::vector<std::size_t> counts(weights.size());
  std::vector<double> remainders(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = weights[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    remainders[i] = quota - std::floor(quota);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[order[i % order.size()]];
  // Floating error can overshoot by one when a quota sits just above an integer.
  for (std::size_t i = order.size(); assigned > total && i > 0; --i) {
    auto& c = counts[order[i - 1]];
    if (c > 0) {
      --c;
      --assigned;
    }
  }
  return counts;
}

void SplitFractions::validate() const {
  double sum = 0.0;
  for (double w : as_array()) {
    if (!std::isfinite(w) || w < 0.0) throw DomainError("split fractions must be finite and >= 0");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw DomainError(fmt::format("split fractions sum to {}, expected 1", sum));
  }
}

SplitAssignment split_corpus(const CorpusManifest& manifest, const SplitFractions& fractions,
                             std::uint64_t seed, bool stratify_by_label) {
  fractions.validate();
  const auto weights = fractions.as_array();

  std::vector<std::string> patients = manifest.patients();
  if (patients.size() < weights.size()) {
    throw InfeasibleSplitError(fmt::format("{} patient(s) cannot fill {} splits", patients.size(),
                                           weights.size()));
  }

  const auto totals = apportion(patients.size(), weights);
  const std::array<Split, 3> splits{Split::train, Split::val, Split::test};
  SplitAssignment assignment;

  if (!stratify_by_label) {
    seeded_shuffle(patients, combine_keys(seed, hash_string("split")));
    std::size_t next = 0;
    for (std::size_t s = 0; s < splits.size(); ++s) {
      for (std::size_t i = 0; i < totals[s]; ++i) assignment[patients[next++]] = splits[s];
    }
    return assignment;
  }

  std::set<std::string> positive_patients;
  for (const auto& e : manifest.entries) {
    if (!e.label) {
      throw DomainError(fmt::format("stratified split needs a label on every entry; '{}' has none",
                                    e.image_id));
    }
    if (*e.label) positive_patients.insert(e.patient_id);
  }
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
  for (const auto& p : patients) (positive_patients.count(p) != 0 ? positives : negatives).push_back(p);
  seeded_shuffle(positives, combine_keys(seed, hash_string("split/positive")));
  seeded_shuffle(negatives, combine_keys(seed, hash_string("split/negative")));

  std::array<double, 3> size_weights{};
  for (std::size_t s = 0; s < splits.size(); ++s) {
    size_weights[s] = static_cast<double>(totals[s]) / static_cast<double>(patients.size());
  }
  const auto positive_counts = apportion(positives.size(), size_weights);
  std::size_t next_pos = 0;
  std::size_t next_neg = 0;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    for (std::size_t i = 0; i < positive_counts[s]; ++i) assignment[positives[next_pos++]] = splits[s];
    for (std::size_t i = positive_counts[s]; i < totals[s]; ++i) {
      assignment[negatives[next_neg++]] = splits[s];
    }
  }
  return assignment;
}

std::string format_split(const SplitAssignment& assignment) {
  std::string out(kSplitHeader);
  out += '\n';
  for (const auto& [patient, split] : assignment) out += fmt::format("{},{}\n", patient, split_name(split));
  return out;
}

SplitAssignment parse_split(std::string_view text, std::string_view source_name) {
  const auto rows = csv::lines(text);
  if (rows.empty() || rows.front() != kSplitHeader) {
    throw ParseError(fmt::format("{}:1: expected header '{}'", source_name, kSplitHeader));
  }
  SplitAssignment out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto f = csv::split_fields(rows[i]);
    if (f.size() != 2) throw ParseError(fmt::format("{}:{}: expected 2 fields", source_name, i + 1));
    Split split{};
    if (f[1] == "train") split = Split::train;
    else if (f[1] == "val") split = Split::val;
    else if (f[1] == "test") split = Split::test;
    else throw ParseError(fmt::format("{}:{}: unknown split '{}'", source_name, i + 1, f[1]));
    if (!out.emplace(f[0], split).second) {
      throw ParseError(fmt::format("{}:{}: patient '{}' listed twice", source_name, i + 1, f[0]));
    }
  }
  return out;
}

std::vector<std::string> entries_in_split(const CorpusManifest& manifest,
                                          const SplitAssignment& assignment, Split split) {
  std::vector<std::string> ids;
  for (const auto& e : manifest.entries) {
    if (assignment.empty()) {
      ids.push_back(e.image_id);
      continue;
    }
    const auto it = assignment.find(e.patient_id);
    if (it == assignment.end()) {
      throw ParseError(fmt::format("patient '{}' has no split assignment", e.patient_id));
    }
    if (it->second == split) ids.push_back(e.image_id);
  }
  return ids;
}

GroundTruth load_ground_truth(const CorpusManifest& manifest, const std::vector<std::string>& ids,
                              std::optional<Extent> target) {
  GroundTruth truth;
  for (const auto& id : ids) {
    const CorpusEntry* entry = manifest.find(id);
    if (entry == nullptr) throw ParseError(fmt::format("unknown image id '{}'", id));
    if (manifest.task_kind == TaskKind::segmentation) {
      auto labels = read_image(*entry->mask_path);
      if (target) labels = resample_nearest(labels, *target);
      truth.masks.emplace(id, BinaryMask::from_labels(labels));
    } else {
      truth.labels.emplace(id, *entry->label);
    }
  }
  return truth;
}

ScoreRow parse_score_row(std::string_view line, std::string_view source_name, std::size_t line_no) {
  const auto f = csv::split_fields(line);
  if (f.size() != 3) {
    throw ParseError(fmt::format("{}:{}: expected 'sample_id,score,label'", source_name, line_no));
  }
  double score = 0.0;
  const auto [ptr, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), score);
  if (f[1].empty() || ec != std::errc{} || ptr != f[1].data() + f[1].size()) {
    throw ParseError(fmt::format("{}:{}: malformed score '{}'", source_name, line_no, f[1]));
  }
  if (!(score >= 0.0 && score <= 1.0)) {
    throw ParseError(fmt::format("{}:{}: score {} outside [0, 1]", source_name, line_no, f[1]));
  }
  const auto label = parse_label(f[2], source_name, line_no);
  if (!label) throw ParseError(fmt::format("{}:{}: missing label", source_name, line_no));
  return ScoreRow{f[0], ScoredSample{score, *label}};
}

PredictionLoad load_predictions(const CorpusManifest& manifest,
                                const std::filesystem::path& pred_dir,
                                const std::vector<std::string>& ids, const GroundTruth& truth) {
  PredictionLoad load;
  if (manifest.task_kind == TaskKind::segmentation) {
    for (const auto& id : ids) {
      std::filesystem::path file = pred_dir / (id + ".png");
      if (!std::filesystem::exists(file)) file = pred_dir / (id + ".pgm");
      if (!std::filesystem::exists(file)) {
        load.missing.push_back(id);
        continue;
      }
      auto mask = BinaryMask::from_labels(read_image(file));
      const auto it = truth.masks.find(id);
      if (it != truth.masks.end() && !(it->second.extent() == mask.extent())) {
        throw ShapeError(fmt::format(
            "prediction for '{}' is {}x{} but its ground truth is {}x{}", id,
            mask.extent().height, mask.extent().width, it->second.extent().height,
            it->second.extent().width));
      }
      load.masks.emplace(id, std::move(mask));
    }
    return load;
  }

  const auto scores_path = pred_dir / kScoresFileName;
  std::map<std::string, ScoredSample> rows;
  if (std::filesystem::exists(scores_path)) {
    const auto bytes = read_file_bytes(scores_path);
    const auto lines =
        csv::lines(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    const std::string source = scores_path.string();
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      if (i == 0 && lines[i].rfind("sample_id", 0) == 0) continue;
      auto row = parse_score_row(lines[i], source, i + 1);
      const auto expected = truth.labels.find(row.sample_id);
      if (expected != truth.labels.end() && expected->second != row.sample.positive) {
        throw ParseError(fmt::format("{}:{}: label for '{}' disagrees with the manifest", source,
                                     i + 1, row.sample_id));
      }
      if (!rows.emplace(row.sample_id, row.sample).second) {
        throw ParseError(fmt::format("{}:{}: duplicate sample '{}'", source, i + 1, row.sample_id));
      }
    }
  }
  for (const auto& id : ids) {
    const auto it = rows.find(id);
    if (it == rows.end()) {
      load.missing.push_back(id);
    } else {
      load.scores.emplace(id, it->second);
    }
  }
  return load;
}

}  // namespace noiseforge
