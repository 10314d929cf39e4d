// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "distilkit/metrics.hpp"
#include "distilkit/trainer.hpp"

namespace distilkit {

enum class ReportFormat { table, machine };

/// value * 100 with two decimals, always '.' as separator.
std::string format_percent(double value);

nlohmann::json to_json(const MetricsReport& m);
MetricsReport metrics_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const RunRecord& record);
RunRecord record_from_json(const nlohmann::json& doc);

/// Table: Acc/F1/P/R x100 for the main task and each task, then per-epoch
/// rows. Machine: JSON with full precision.
std::string render_report(const RunRecord& record, ReportFormat format);
/// Inverse of the machine format.
RunRecord parse_report(const std::string& text);

std::string render_metrics(const std::string& label, const MetricsReport& m, ReportFormat format);

/// Rows keyed by subset label, one F1 column per pipeline. Wall-clock time is
/// left out so equal seeds give byte-equal output.
std::string render_ablation(const AblationResult& result, ReportFormat format);

}  // namespace distilkit
