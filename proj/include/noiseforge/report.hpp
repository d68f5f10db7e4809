#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "noiseforge/ladder.hpp"

namespace noiseforge {

inline constexpr std::string_view kRecordHeader =
    "task_id,s_q,s_e,metric,value,delta,n_samples,flags";

/// EvalRecord table: header plus one row per record, values and deltas with
/// six decimals, flags joined with ';'.
std::string format_records(const std::vector<EvalRecord>& records);

/// Inverse of format_records(). Values come back rounded to six decimals.
std::vector<EvalRecord> parse_records(std::string_view text, std::string_view source_name = "records");

/// JSON document with every curve of one task, grouped by axis then metric:
/// {"task_id": ..., "axes": {"quantum": {"dice": {"monotone_degrading": ...,
/// "points": [{"severity", "value", "delta"}, ...]}}}}
std::string format_curves_json(std::string_view task_id, const std::vector<RobustnessCurve>& curves);

/// Aligned-column table with one row per ladder point and a value/diff
/// column pair per metric.
std::string format_summary_table(std::string_view task_id, const std::vector<EvalRecord>& records);

}  // namespace noiseforge
