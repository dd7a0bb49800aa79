#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "fusionkit/experiment.hpp"

namespace fusionkit {

enum class ReportFormat { kJson, kCsv, kMarkdown };

std::string to_string(ReportFormat format);
ReportFormat report_format_from_string(std::string_view name);

inline constexpr std::string_view kReportSchema = "fusionkit.report/1";

/// Schema-versioned JSON; docs/reports.md lists the fields.
std::string report_to_json(const EvalReport& report);
/// Throws kMalformedFile.
EvalReport report_from_json(std::string_view text);

/// Long format, one value per row: method,field,index,label,value. Values
/// use the shortest text that reads back to the same double.
std::string report_to_csv(const EvalReport& report);

/// Tables in percent with two decimals: methods as rows and the prompt
/// strategy as the column; per-class accuracies with one column per class.
std::string report_to_markdown(const EvalReport& report);

std::string format_report(const EvalReport& report, ReportFormat format);

/// Writes atomically; throws kIoError.
void emit_report(const EvalReport& report, ReportFormat format,
                 const std::filesystem::path& path);

/// Column label for a report's prompt strategy ("cupl_single",
/// "d3g_templates (race7 + profession)").
std::string strategy_label(const ExperimentConfig& cfg);

/// Several reports side by side: one row per method, one column per prompt
/// strategy, plus the chosen (text, image) weights of the fused methods.
std::string comparison_markdown(std::span<const EvalReport> reports);

}  // namespace fusionkit
