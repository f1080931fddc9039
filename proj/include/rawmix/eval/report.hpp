#pragma once

#include "rawmix/eval/experiment.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace rawmix {

enum class ReportFormat { csv, json, svg };

ReportFormat report_format_from_string(std::string_view s);
std::string_view to_string(ReportFormat f);

/// CSV: one row per report, columns descriptor, msfa, patch_size and one
/// accuracy column per distinct test illuminant (in first-seen order).
std::string report_csv(std::span<const EvalReport> reports);
/// A single report serializes as an object, several as an array.
std::string report_json(std::span<const EvalReport> reports);
/// Scatter of accuracy against test-set extraction time.
std::string report_svg(std::span<const EvalReport> reports);

/// Data error for an incomplete report (no per-class entries), io error
/// when the file cannot be written.
void emit_report(std::span<const EvalReport> reports, ReportFormat format,
                 const std::filesystem::path& path);
inline void emit_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& path)
{
    emit_report(std::span<const EvalReport>(&report, 1), format, path);
}

std::vector<EvalReport> load_reports(const std::filesystem::path& json_path);

} // namespace rawmix
