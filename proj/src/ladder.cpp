#include "noiseforge/ladder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "noiseforge/errors.hpp"
#include "noiseforge/image_io.hpp"
#include "noiseforge/random.hpp"
#include "parallel.hpp"

namespace noiseforge {
namespace {

void validate_axis(const std::vector<double>& levels, const char* axis) {
  if (levels.empty()) throw DomainError(fmt::format("{} ladder has no levels", axis));
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!std::isfinite(levels[i]) || levels[i] < 0.0) {
      throw DomainError(fmt::format("{} level {} must be finite and >= 0", axis, levels[i]));
    }
    if (i > 0 && !(levels[i] > levels[i - 1])) {
      throw DomainError(fmt::format("{} levels must be strictly ascending", axis));
    }
  }
  if (levels.front() != 0.0) throw DomainError(fmt::format("{} ladder must contain 0", axis));
}

std::uint64_t severity_bits(double s) {
  // -0.0 and 0.0 denote the same point.
  return std::bit_cast<std::uint64_t>(s == 0.0 ? 0.0 : s);
}

const char* const kBothEmptyFlag = "both-empty";

std::string count_flag(std::string_view name, std::size_t n) { return fmt::format("{}={}", name, n); }

}  // namespace

void SeverityLadder::validate() const {
  validate_axis(quantum_levels, "quantum");
  validate_axis(electronic_levels, "electronic");
  for (double q : quantum_levels) {
    if (q > 0.0 && q < 1.0) {
      throw DomainError(fmt::format("quantum level {} lies in (0, 1), below the calibration anchor", q));
    }
  }
}

std::vector<LadderPoint> SeverityLadder::points() const {
  validate();
  std::set<LadderPoint> pts;
  if (pairing == Pairing::full) {
    for (double q : quantum_levels) {
      for (double e : electronic_levels) pts.insert({q, e});
    }
  } else {
    for (double q : quantum_levels) pts.insert({q, 0.0});
    for (double e : electronic_levels) pts.insert({0.0, e});
    const auto has_one = [](const std::vector<double>& v) {
      return std::find(v.begin(), v.end(), 1.0) != v.end();
    };
    if (include_joint_unit && has_one(quantum_levels) && has_one(electronic_levels)) {
      pts.insert({1.0, 1.0});
    }
  }
  return {pts.begin(), pts.end()};
}

std::string point_dir_name(const LadderPoint& point) {
  return fmt::format("sq{:.2f}_se{:.2f}", point.s_q, point.s_e);
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view image_id,
                          const LadderPoint& point) {
  std::uint64_t key = combine_keys(global_seed, hash_string(image_id));
  key = combine_keys(key, severity_bits(point.s_q));
  return combine_keys(key, severity_bits(point.s_e));
}

GenerationResult generate_corrupted_corpus(const CorpusManifest& manifest,
                                           const SeverityLadder& ladder, const NoiseSpec& spec_base,
                                           const std::filesystem::path& out_dir,
                                           const GenerationOptions& options) {
  const auto points = ladder.points();
  for (const auto& p : points) {
    NoiseSpec probe = spec_base;
    probe.s_q = p.s_q;
    probe.s_e = p.s_e;
    probe.validate();
  }

  std::vector<const CorpusEntry*> entries;
  for (const auto& e : manifest.entries) entries.push_back(&e);
  std::sort(entries.begin(), entries.end(),
            [](const CorpusEntry* a, const CorpusEntry* b) { return a->image_id < b->image_id; });

  struct ImageOutcome {
    std::vector<SweepIndexEntry> index;
    std::size_t written = 0;
    std::size_t unchanged = 0;
    std::optional<std::string> error;
  };
  std::vector<ImageOutcome> outcomes(entries.size());

  std::filesystem::create_directories(out_dir);
  for (const auto& p : points) std::filesystem::create_directories(out_dir / point_dir_name(p));

  detail::parallel_for(entries.size(), options.jobs, [&](std::size_t i) {
    const CorpusEntry& entry = *entries[i];
    ImageOutcome& outcome = outcomes[i];
    try {
      NormalizedImage clean = normalize(read_image(entry.image_path));
      if (options.resample) clean = resample(clean, *options.resample);
      for (const auto& p : points) {
        NoiseSpec spec = spec_base;
        spec.s_q = p.s_q;
        spec.s_e = p.s_e;
        spec.seed = derive_seed(spec_base.seed, entry.image_id, p);
        const auto realization = inject(clean, spec, entry.image_id);
        const auto bytes = encode_image(quantize(realization.corrupted), ImageFormat::png);
        const std::string rel = point_dir_name(p) + "/" + entry.image_id + ".png";
        if (write_file_if_changed(out_dir / rel, bytes)) {
          ++outcome.written;
        } else {
          ++outcome.unchanged;
        }
        outcome.index.push_back({entry.image_id, p, spec.seed, rel});
      }
    } catch (const std::exception& e) {
      outcome.index.clear();
      outcome.error = e.what();
    }
  });

  GenerationResult result;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& o = outcomes[i];
    if (o.error) {
      result.failures.push_back({entries[i]->image_id, *o.error});
      continue;
    }
    result.files_written += o.written;
    result.files_unchanged += o.unchanged;
    result.index.insert(result.index.end(), o.index.begin(), o.index.end());
  }
  std::sort(result.index.begin(), result.index.end(),
            [](const SweepIndexEntry& a, const SweepIndexEntry& b) {
              return std::tie(a.point, a.image_id) < std::tie(b.point, b.image_id);
            });

  const std::string index_text = format_sweep_index(result.index);
  write_file_if_changed(out_dir / kSweepIndexFileName,
                        std::span(reinterpret_cast<const std::uint8_t*>(index_text.data()),
                                  index_text.size()));
  return result;
}

std::string format_sweep_index(const std::vector<SweepIndexEntry>& index) {
  std::string out = "image_id,s_q,s_e,derived_seed,output_path\n";
  for (const auto& e : index) {
    out += fmt::format("{},{:.2f},{:.2f},{},{}\n", e.image_id, e.point.s_q, e.point.s_e,
                       e.derived_seed, e.output_path);
  }
  return out;
}

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::dice: return "dice";
    case Metric::iou: return "iou";
    case Metric::auroc: return "auroc";
    case Metric::auprc: return "auprc";
    case Metric::f1: return "f1";
  }
  return "?";
}

std::string_view axis_name(Axis axis) { return axis == Axis::quantum ? "quantum" : "electronic"; }

std::vector<EvalRecord> make_records(std::string_view task_id, std::vector<PointValue> values) {
  std::map<Metric, double> baseline;
  for (const auto& v : values) {
    if (v.point.is_baseline()) baseline[v.metric] = v.value;
  }
  std::vector<EvalRecord> records;
  records.reserve(values.size());
  for (auto& v : values) {
    const auto it = baseline.find(v.metric);
    if (it == baseline.end()) {
      throw DegenerateInputError(
          fmt::format("no baseline value for metric {}; deltas are undefined", metric_name(v.metric)));
    }
    records.push_back(EvalRecord{std::string(task_id), v.point, v.metric, v.value,
                                 v.value - it->second, v.n_samples, std::move(v.flags)});
  }
  std::sort(records.begin(), records.end(), [](const EvalRecord& a, const EvalRecord& b) {
    return std::tie(a.task_id, a.point, a.metric) < std::tie(b.task_id, b.point, b.metric);
  });
  return records;
}

EvalResult evaluate_sweep(const CorpusManifest& manifest, const SeverityLadder& ladder,
                          const std::filesystem::path& predictions_root,
                          const EvalOptions& options) {
  const auto points = ladder.points();
  const auto test_ids = entries_in_split(manifest, options.split, Split::test);
  if (test_ids.empty()) throw DegenerateInputError("the test split has no entries");
  const GroundTruth truth = load_ground_truth(manifest, test_ids, options.resample);

  EvalResult result;
  std::vector<PointValue> values;
  for (const auto& point : points) {
    const auto dir = predictions_root / point_dir_name(point);
    if (!std::filesystem::is_directory(dir)) {
      if (point.is_baseline()) {
        throw IoError(fmt::format("baseline predictions missing: {} does not exist", dir.string()));
      }
      result.warnings.push_back(
          fmt::format("skipping {}: no prediction directory", point_dir_name(point)));
      continue;
    }
    const PredictionLoad load = load_predictions(manifest, dir, test_ids, truth);
    if (load.loaded() == 0) {
      if (point.is_baseline()) {
        throw IoError(fmt::format("baseline predictions missing: no prediction in {} for any test entry",
                                  dir.string()));
      }
      result.warnings.push_back(
          fmt::format("skipping {}: no predictions for any test entry", point_dir_name(point)));
      continue;
    }

    std::vector<std::string> flags = options.extra_flags;
    if (!load.missing.empty()) {
      flags.push_back(count_flag("missing", load.missing.size()));
      result.warnings.push_back(fmt::format("{}: {} test entr{} without prediction",
                                            point_dir_name(point), load.missing.size(),
                                            load.missing.size() == 1 ? "y" : "ies"));
    }

    if (manifest.task_kind == TaskKind::segmentation) {
      double dice_sum = 0.0;
      double iou_sum = 0.0;
      std::size_t both_empty = 0;
      // std::map iteration fixes the summation order.
      for (const auto& [id, pred] : load.masks) {
        const auto counts = overlap(pred, truth.masks.at(id));
        if (counts.both_empty()) ++both_empty;
        dice_sum += dice(counts);
        iou_sum += iou(counts);
      }
      if (both_empty > 0) flags.push_back(count_flag(kBothEmptyFlag, both_empty));
      const std::size_t n = load.masks.size();
      values.push_back({point, Metric::dice, dice_sum / static_cast<double>(n), n, flags});
      values.push_back({point, Metric::iou, iou_sum / static_cast<double>(n), n, flags});
    } else {
      std::vector<ScoredSample> samples;
      for (const auto& [id, s] : load.scores) samples.push_back(s);
      const std::size_t n = samples.size();
      values.push_back({point, Metric::auroc, auroc(samples), n, flags});
      values.push_back({point, Metric::auprc, auprc(samples), n, flags});
      const auto counts = binarize(samples, options.threshold);
      values.push_back({point, Metric::f1, f1(counts), n, flags});
    }
  }
  result.records = make_records(options.task_id, std::move(values));
  return result;
}

std::vector<RobustnessCurve> build_curves(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw DegenerateInputError("no records to build curves from");

  using Key = std::tuple<std::string, Axis, Metric>;
  std::map<Key, std::vector<CurvePoint>> grouped;
  std::set<std::pair<std::string, Metric>> have_baseline;
  for (const auto& r : records) {
    if (r.point.is_baseline()) {
      have_baseline.insert({r.task_id, r.metric});
      grouped[{r.task_id, Axis::quantum, r.metric}].push_back({0.0, r.value, r.delta});
      grouped[{r.task_id, Axis::electronic, r.metric}].push_back({0.0, r.value, r.delta});
    } else if (r.point.s_e == 0.0) {
      grouped[{r.task_id, Axis::quantum, r.metric}].push_back({r.point.s_q, r.value, r.delta});
    } else if (r.point.s_q == 0.0) {
      grouped[{r.task_id, Axis::electronic, r.metric}].push_back({r.point.s_e, r.value, r.delta});
    }
  }

  std::vector<RobustnessCurve> curves;
  for (auto& [key, pts] : grouped) {
    const auto& [task, axis, metric] = key;
    if (have_baseline.count({task, metric}) == 0) {
      throw DegenerateInputError(fmt::format("task '{}' has no baseline {} record", task,
                                             metric_name(metric)));
    }
    std::sort(pts.begin(), pts.end(),
              [](const CurvePoint& a, const CurvePoint& b) { return a.severity < b.severity; });
    bool non_increasing = true;
    for (std::size_t i = 1; i < pts.size(); ++i) non_increasing &= pts[i].value <= pts[i - 1].value;
    const bool degrading = pts.size() > 1 && non_increasing && pts.back().value < pts.front().value;
    curves.push_back(RobustnessCurve{task, axis, metric, std::move(pts), degrading});
  }
  return curves;
}

}  // namespace noiseforge
