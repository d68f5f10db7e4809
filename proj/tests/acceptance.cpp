// Acceptance suite: one PASS/FAIL line per criterion, every tolerance and
// runtime budget pinned below. Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "fixtures.hpp"
#include "noiseforge/cli.hpp"
#include "noiseforge/corpus.hpp"
#include "noiseforge/ladder.hpp"
#include "noiseforge/metrics.hpp"
#include "noiseforge/noise.hpp"
#include "noiseforge/noise_validation.hpp"
#include "noiseforge/report.hpp"
#include "oracles.hpp"

namespace nf = noiseforge;
namespace fs = std::filesystem;

namespace {

constexpr double kN0 = 1000.0;
constexpr double kSigma0 = 0.1;
constexpr double kIntensity = 0.5;
constexpr std::size_t kMonteCarloPixels = 1'000'000;
constexpr double kMeanSigmas = 3.0;
constexpr double kVarianceRelTol = 0.02;
constexpr double kSnrRelTol = 0.03;
constexpr double kStdRelTol = 0.01;
constexpr std::size_t kPoissonDraws = 100'000;
constexpr double kPoissonPFloor = 1e-3;
constexpr double kDiceJaccardTol = 1e-12;
constexpr std::uint64_t kSeed = 20240601;

struct Outcome {
  bool passed;
  std::string detail;
};

class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && first_failure_.empty()) first_failure_ = what;
    all_ &= ok;
    ++count_;
  }
  Outcome outcome(const std::string& summary) const {
    return {all_, all_ ? fmt::format("{} ({} checks)", summary, count_) : first_failure_};
  }

 private:
  bool all_ = true;
  std::size_t count_ = 0;
  std::string first_failure_;
};

std::string trim_print(double v) {
  auto s = fmt::format("{:.1f}", v);
  if (s.ends_with(".0")) s.resize(s.size() - 2);
  return s;
}

nf::NormalizedImage constant_field(double value) {
  return nf::NormalizedImage::filled({1, kMonteCarloPixels}, value);
}

double snr(std::span<const double> values) {
  const auto m = nf::sample_moments(values);
  return m.mean / std::sqrt(m.variance);
}

std::vector<double> electronic_field(double s_e) {
  const auto e = nf::inject_electronic(constant_field(kIntensity),
                                       nf::NoiseSpec{.s_e = s_e, .seed = kSeed}, "acceptance");
  return e.values;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = nf::testing::read_text_file(e.path());
  }
  return files;
}

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = nf::run_cli(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

Outcome photon_budget_table() {
  Checker c;
  const double levels[] = {1, 2, 4, 6, 8, 10};
  const double exact[] = {1000.0, 250.0, 62.5, 1000.0 / 36.0, 15.625, 10.0};
  const char* printed[] = {"1000", "250", "62.5", "27.8", "15.6", "10"};
  for (int i = 0; i < 6; ++i) {
    const double n = nf::photon_budget(levels[i], kN0);
    c.expect(n == exact[i], fmt::format("s_q={} gave {} photons", levels[i], n));
    c.expect(trim_print(n) == printed[i], fmt::format("s_q={} prints {}", levels[i], trim_print(n)));
  }
  return c.outcome("N_ph = 1000, 250, 62.5, 27.8, 15.6, 10");
}

Outcome electronic_ladder() {
  Checker c;
  const double levels[] = {0, 1, 2, 4, 6, 8, 10};
  const double expected[] = {0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0};
  for (int i = 0; i < 7; ++i) {
    const double s = nf::sigma_e(levels[i], kSigma0);
    // Binary 6 * 0.1 lands one ulp above the literal 0.6; all other levels are bit-equal.
    const bool within_ulp = s == expected[i] || std::nextafter(expected[i], s) == s;
    c.expect(within_ulp, fmt::format("s_e={} gave sigma {:.17g}", levels[i], s));
  }
  return c.outcome("sigma_e = 0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0 (each within 1 ulp)");
}

Outcome quantum_moments() {
  Checker c;
  std::string summary;
  for (double s_q : {1.0, 2.0, 4.0}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto f = nf::inject_quantum(constant_field(kIntensity), nf::NoiseSpec{.s_q = s_q, .seed = kSeed}, "acceptance");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto m = nf::sample_moments(f.values);
    const double var = kIntensity * s_q * s_q / kN0;
    const double mean_tol = kMeanSigmas * std::sqrt(var / kMonteCarloPixels);
    c.expect(std::fabs(m.mean - kIntensity) <= mean_tol,
             fmt::format("s_q={} mean {} outside 0.5 +/- {}", s_q, m.mean, mean_tol));
    c.expect(std::fabs(m.variance - var) <= kVarianceRelTol * var,
             fmt::format("s_q={} variance {} vs {}", s_q, m.variance, var));
    c.expect(seconds < 10.0, fmt::format("s_q={} took {:.2f} s", s_q, seconds));
    summary += fmt::format("s_q={}: var/expected={:.4f} ", s_q, m.variance / var);
  }
  summary.pop_back();
  return c.outcome(summary);
}

Outcome snr_scaling() {
  Checker c;
  const auto q1 = nf::inject_quantum(constant_field(kIntensity), nf::NoiseSpec{.s_q = 1, .seed = kSeed}, "acceptance");
  const auto q2 = nf::inject_quantum(constant_field(kIntensity), nf::NoiseSpec{.s_q = 2, .seed = kSeed}, "acceptance");
  const double q_ratio = snr(q2.values) / snr(q1.values);
  c.expect(std::fabs(q_ratio - 0.5) <= kSnrRelTol * 0.5, fmt::format("quantum SNR ratio {}", q_ratio));
  const double e_ratio = snr(electronic_field(4)) / snr(electronic_field(2));
  c.expect(std::fabs(e_ratio - 0.5) <= kSnrRelTol * 0.5, fmt::format("electronic SNR ratio {}", e_ratio));
  return c.outcome(fmt::format("quantum {:.4f}, electronic {:.4f}", q_ratio, e_ratio));
}

Outcome electronic_moments() {
  Checker c;
  auto e = electronic_field(2);
  const double mean = nf::sample_moments(e).mean;
  for (auto& v : e) v -= kIntensity;
  const double sd = std::sqrt(nf::sample_moments(e).variance);
  const double sigma = 0.2;
  c.expect(std::fabs(sd - sigma) <= kStdRelTol * sigma, fmt::format("std {} vs 0.2", sd));
  const double mean_tol = kMeanSigmas * sigma / std::sqrt(static_cast<double>(kMonteCarloPixels));
  c.expect(std::fabs(mean - kIntensity) <= mean_tol, fmt::format("mean {} outside 0.5 +/- {}", mean, mean_tol));
  return c.outcome(fmt::format("std {:.5f}, mean {:.5f}", sd, mean));
}

Outcome poisson_exactness() {
  Checker c;
  std::string summary;
  for (double lambda : {0.5, 5.0, 50.0, 500.0}) {
    const auto g = nf::poisson_goodness_of_fit(lambda, kPoissonDraws, kSeed);
    c.expect(g.p_value > kPoissonPFloor, fmt::format("lambda={} p={}", lambda, g.p_value));
    summary += fmt::format("p({})={:.3f} ", lambda, g.p_value);
  }
  summary.pop_back();
  return c.outcome(summary);
}

Outcome metric_oracles() {
  Checker c;
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double da = unit(rng), db = unit(rng);
    std::vector<std::uint8_t> a(256), b(256);
    for (auto& x : a) x = unit(rng) < da;
    for (auto& x : b) x = unit(rng) < db;
    const nf::BinaryMask ma({16, 16}, a), mb({16, 16}, b);
    const double d = nf::dice(ma, mb), j = nf::iou(ma, mb);
    c.expect(d == nf::oracle::dice(ma, mb), fmt::format("dice mismatch in trial {}", trial));
    c.expect(j == nf::oracle::iou(ma, mb), fmt::format("iou mismatch in trial {}", trial));
    c.expect(std::fabs(d - 2.0 * j / (1.0 + j)) <= kDiceJaccardTol, fmt::format("identity broken in trial {}", trial));
  }
  std::uniform_int_distribution<std::size_t> size(2, 100);
  std::uniform_int_distribution<int> levels(1, 25);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = size(rng);
    const int distinct = levels(rng);
    std::uniform_int_distribution<int> level(0, distinct - 1);
    std::vector<nf::ScoredSample> s(n);
    for (auto& x : s) x = {static_cast<double>(level(rng)) / distinct, unit(rng) < 0.5};
    s[0].positive = true;
    s[1].positive = false;
    c.expect(nf::auroc(s) == nf::oracle::auroc(s), fmt::format("auroc mismatch in trial {}", trial));
  }
  return c.outcome("1000 mask pairs and 1000 score sets match their oracles");
}

Outcome worked_metrics() {
  Checker c;
  const std::vector<nf::ScoredSample> roc{{0.1, false}, {0.4, false}, {0.35, true}, {0.8, true}};
  const std::vector<nf::ScoredSample> pr{{0.9, true}, {0.8, false}, {0.7, true}};
  const double a = nf::auroc(roc), p = nf::auprc(pr), f = nf::f1({.tp = 2, .fp = 1, .fn = 1});
  c.expect(a == 0.75, fmt::format("auroc {}", a));
  c.expect(p == 5.0 / 6.0, fmt::format("auprc {:.17g}", p));
  c.expect(f == 2.0 / 3.0, fmt::format("f1 {:.17g}", f));
  return c.outcome("auroc 0.75, auprc 5/6, f1 2/3");
}

Outcome table_delta() {
  Checker c;
  nf::testing::TempDir dir;
  nf::write_image(dir / "images" / "heart.png", nf::QuantizedImage({16, 16}, std::vector<std::uint8_t>(256, 128)));
  nf::write_image(dir / "masks" / "heart.png", nf::testing::run_mask({16, 16}, 0, 100).to_image());
  nf::testing::write_text_file(dir / "manifest.csv",
                               "image_id,patient_id,image_path,mask_path,label,source_tag\n"
                               "heart,p0,images/heart.png,masks/heart.png,,fixture\n");
  // |truth| = |pred| = 100; overlaps of 86 and 59 pixels give dice 0.86 and 0.59.
  nf::write_image(dir / "preds" / "sq0.00_se0.00" / "heart.png", nf::testing::run_mask({16, 16}, 14, 100).to_image());
  nf::write_image(dir / "preds" / "sq0.00_se10.00" / "heart.png", nf::testing::run_mask({16, 16}, 41, 100).to_image());
  const auto manifest = nf::read_manifest(dir / "manifest.csv", nf::TaskKind::segmentation);
  const nf::SeverityLadder ladder{.quantum_levels = {0}, .electronic_levels = {0, 10}};
  const auto result = nf::evaluate_sweep(manifest, ladder, dir / "preds", {.task_id = "heart"});
  const auto text = nf::format_records(result.records);
  c.expect(text.find("heart,0.00,0.00,dice,0.860000,0.000000,1,") != std::string::npos, "baseline row missing");
  c.expect(text.find("heart,0.00,10.00,dice,0.590000,-0.270000,1,") != std::string::npos,
           "(0,10) row does not print delta -0.270000");
  return c.outcome("dice 0.86 -> 0.59 prints delta -0.270000");
}

Outcome determinism() {
  Checker c;
  nf::testing::TempDir dir;
  const auto manifest = nf::testing::write_segmentation_corpus(dir / "corpus", 10, 96).string();
  const auto sweep = [&](const fs::path& out, const char* jobs) {
    return cli({"-q", "sweep", "--manifest", manifest, "--out", out.string(), "--jobs", jobs, "--seed", "7"});
  };
  c.expect(sweep(dir / "j1", "1") == 0, "sweep --jobs 1 failed");
  c.expect(sweep(dir / "j8", "8") == 0, "sweep --jobs 8 failed");
  const auto first = tree(dir / "j1");
  c.expect(first.size() == 14 * 10 + 2, fmt::format("expected 142 files, got {}", first.size()));
  c.expect(first == tree(dir / "j8"), "--jobs 1 and --jobs 8 trees differ");
  c.expect(sweep(dir / "j1", "1") == 0, "rerun failed");
  c.expect(first == tree(dir / "j1"), "rerun changed the tree");
  return c.outcome(fmt::format("{} files identical across jobs 1/8 and rerun", first.size()));
}

Outcome split_contract() {
  Checker c;
  std::mt19937_64 rng(kSeed);
  std::uniform_int_distribution<int> images(1, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t sizes[] = {10, 11, 17, 50, 99, 100, 333, 1000, 2500, 10000};
  for (std::size_t trial = 0; trial < std::size(sizes); ++trial) {
    const std::size_t patients = sizes[trial];
    const double prevalence = 0.05 + 0.5 * unit(rng);
    nf::CorpusManifest m;
    m.task_kind = nf::TaskKind::binary_classification;
    std::set<std::string> positives;
    for (std::size_t p = 0; p < patients; ++p) {
      const auto pid = fmt::format("patient{:05}", p);
      const bool label = unit(rng) < prevalence;
      if (label) positives.insert(pid);
      for (int i = images(rng); i > 0; --i) {
        m.entries.push_back({fmt::format("{}_{}", pid, i), pid, "x.png", std::nullopt, label, "synthetic"});
      }
    }
    std::shuffle(m.entries.begin(), m.entries.end(), rng);
    const double train = 0.5 + 0.3 * unit(rng);
    const double val = (1.0 - train) * (0.2 + 0.6 * unit(rng));
    const nf::SplitFractions f{train, val, 1.0 - train - val};
    for (bool stratify : {false, true}) {
      const auto a = nf::split_corpus(m, f, rng(), stratify);
      c.expect(a.size() == patients, "not every patient assigned");
      std::map<std::string, std::set<nf::Split>> seen;
      for (const auto& e : m.entries) {
        for (nf::Split s : {nf::Split::train, nf::Split::val, nf::Split::test}) {
          if (a.at(e.patient_id) == s) seen[e.patient_id].insert(s);
        }
      }
      for (const auto& [pid, splits] : seen) c.expect(splits.size() == 1, pid + " spans splits");
      std::array<double, 3> counts{}, pos{};
      for (const auto& [pid, s] : a) {
        counts[static_cast<int>(s)] += 1;
        pos[static_cast<int>(s)] += positives.count(pid);
      }
      const double global = static_cast<double>(positives.size()) / patients;
      const auto w = f.as_array();
      for (int s = 0; s < 3; ++s) {
        c.expect(std::fabs(counts[s] - w[s] * patients) <= 1.0,
                 fmt::format("{} patients: split {} has {} vs {:.2f}", patients, s, counts[s], w[s] * patients));
        if (stratify) {
          c.expect(std::fabs(pos[s] - global * counts[s]) <= 1.0,
                   fmt::format("{} patients: split {} has {} positives vs {:.2f}", patients, s, pos[s],
                               global * counts[s]));
        }
      }
    }
  }
  return c.outcome("10 manifests from 10 to 10000 patients, plain and stratified");
}

Outcome end_to_end() {
  Checker c;
  nf::testing::TempDir dir;
  const auto manifest = nf::testing::write_segmentation_corpus(dir / "corpus", 10, 128).string();
  c.expect(cli({"-q", "sweep", "--manifest", manifest, "--out", (dir / "sweep").string()}) == 0, "sweep failed");
  c.expect(cli({"-q", "reference-segment", "--sweep", (dir / "sweep").string(), "--out", (dir / "preds").string()}) == 0,
           "reference-segment failed");
  c.expect(cli({"-q", "eval", "--manifest", manifest, "--predictions", (dir / "preds").string(), "--out",
                (dir / "report").string(), "--task-id", "lungs", "--tag", "reference-predictor"}) == 0,
           "eval failed");
  const auto records = nf::parse_records(nf::testing::read_text_file(dir / "report" / "records.csv"));
  std::set<nf::LadderPoint> points;
  std::set<nf::Metric> metrics;
  for (const auto& r : records) {
    points.insert(r.point);
    metrics.insert(r.metric);
    if (r.point.is_baseline()) c.expect(r.delta == 0.0, "baseline delta is not 0");
    c.expect(r.n_samples == 10, "record does not cover all 10 images");
  }
  c.expect(records.size() == 28, fmt::format("expected 28 records, got {}", records.size()));
  c.expect(points.size() == 14, fmt::format("expected 14 ladder points, got {}", points.size()));
  c.expect(metrics == std::set<nf::Metric>{nf::Metric::dice, nf::Metric::iou}, "expected dice and iou");
  return c.outcome(fmt::format("{} records over {} points", records.size(), points.size()));
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "photon budget table", 1.0, photon_budget_table},
      {2, "electronic ladder", 1.0, electronic_ladder},
      {3, "quantum moment law", 30.0, quantum_moments},
      {4, "SNR scaling", 20.0, snr_scaling},
      {5, "electronic moment law", 5.0, electronic_moments},
      {6, "Poisson sampler exactness", 10.0, poisson_exactness},
      {7, "metric oracle equivalence", 10.0, metric_oracles},
      {8, "worked metric fixtures", 1.0, worked_metrics},
      {9, "baseline delta fixture", 1.0, table_delta},
      {10, "determinism and parallelism", 30.0, determinism},
      {11, "split contract", 10.0, split_contract},
      {12, "end-to-end smoke", 60.0, end_to_end},
  };

  int failures = 0;
  for (const auto& crit : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = crit.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.passed && seconds >= crit.budget_seconds) {
      o = {false, fmt::format("over budget ({:.2f} s >= {:.0f} s)", seconds, crit.budget_seconds)};
    }
    failures += o.passed ? 0 : 1;
    std::cout << fmt::format("{} criterion {:>2} {}: {} [{:.2f} s]", o.passed ? "PASS" : "FAIL", crit.id,
                             crit.name, o.detail, seconds)
              << std::endl;
  }
  std::cout << fmt::format("{} of {} criteria passed", criteria.size() - failures, criteria.size()) << std::endl;
  return failures == 0 ? 0 : 1;
}
