#include "noiseforge/report.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "csv.hpp"
#include "noiseforge/errors.hpp"

namespace noiseforge {
namespace {

std::string join_flags(const std::vector<std::string>& flags) {
  std::string out;
  for (const auto& f : flags) {
    if (!out.empty()) out += ';';
    out += f;
  }
  return out;
}

double parse_number(const std::string& field, std::string_view source, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError(fmt::format("{}:{}: malformed number '{}'", source, line, field));
  }
  return v;
}

Metric parse_metric(const std::string& name, std::string_view source, std::size_t line) {
  for (Metric m : {Metric::dice, Metric::iou, Metric::auroc, Metric::auprc, Metric::f1}) {
    if (metric_name(m) == name) return m;
  }
  throw ParseError(fmt::format("{}:{}: unknown metric '{}'", source, line, name));
}

}  // namespace

std::string format_records(const std::vector<EvalRecord>& records) {
  std::string out(kRecordHeader);
  out += '\n';
  for (const auto& r : records) {
    out += fmt::format("{},{:.2f},{:.2f},{},{:.6f},{:.6f},{},{}\n", r.task_id, r.point.s_q,
                       r.point.s_e, metric_name(r.metric), r.value, r.delta, r.n_samples,
                       join_flags(r.flags));
  }
  return out;
}

std::vector<EvalRecord> parse_records(std::string_view text, std::string_view source_name) {
  const auto rows = csv::lines(text);
  if (rows.empty() || rows.front() != kRecordHeader) {
    throw ParseError(fmt::format("{}:1: expected header '{}'", source_name, kRecordHeader));
  }
  std::vector<EvalRecord> records;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto f = csv::split_fields(rows[i]);
    if (f.size() != 8) throw ParseError(fmt::format("{}:{}: expected 8 fields", source_name, i + 1));
    EvalRecord r;
    r.task_id = f[0];
    r.point = {parse_number(f[1], source_name, i + 1), parse_number(f[2], source_name, i + 1)};
    r.metric = parse_metric(f[3], source_name, i + 1);
    r.value = parse_number(f[4], source_name, i + 1);
    r.delta = parse_number(f[5], source_name, i + 1);
    r.n_samples = static_cast<std::size_t>(parse_number(f[6], source_name, i + 1));
    for (std::size_t start = 0; start < f[7].size();) {
      const auto semi = f[7].find(';', start);
      r.flags.push_back(f[7].substr(start, semi - start));
      if (semi == std::string::npos) break;
      start = semi + 1;
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::string format_curves_json(std::string_view task_id, const std::vector<RobustnessCurve>& curves) {
  nlohmann::ordered_json doc;
  doc["task_id"] = task_id;
  doc["axes"] = nlohmann::ordered_json::object();
  for (const auto& c : curves) {
    if (c.task_id != task_id) continue;
    nlohmann::ordered_json points = nlohmann::ordered_json::array();
    for (const auto& p : c.points) {
      points.push_back({{"severity", p.severity}, {"value", p.value}, {"delta", p.delta}});
    }
    doc["axes"][std::string(axis_name(c.axis))][std::string(metric_name(c.metric))] = {
        {"monotone_degrading", c.monotone_degrading}, {"points", std::move(points)}};
  }
  return doc.dump(2) + "\n";
}

std::string format_summary_table(std::string_view task_id, const std::vector<EvalRecord>& records) {
  std::set<Metric> metrics;
  std::map<LadderPoint, std::map<Metric, const EvalRecord*>> rows;
  for (const auto& r : records) {
    if (r.task_id != task_id) continue;
    metrics.insert(r.metric);
    rows[r.point][r.metric] = &r;
  }

  std::string out = fmt::format("# task: {}\n", task_id);
  if (metrics.count(Metric::auprc) != 0) {
    out += "# auprc: step-wise average precision, tied scores form one cut point\n";
  }
  out += fmt::format("{:>9} {:>10}", "Quantum", "Electronic");
  for (Metric m : metrics) {
    out += fmt::format(" {:>8} {:>8}", metric_name(m), fmt::format("{} diff", metric_name(m)));
  }
  out += '\n';
  for (const auto& [point, by_metric] : rows) {
    out += fmt::format("{:>9.2f} {:>10.2f}", point.s_q, point.s_e);
    for (Metric m : metrics) {
      const auto it = by_metric.find(m);
      if (it == by_metric.end()) {
        out += fmt::format(" {:>8} {:>8}", "-", "-");
      } else {
        out += fmt::format(" {:>8.2f} {:>8.2f}", it->second->value, it->second->delta);
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace noiseforge
