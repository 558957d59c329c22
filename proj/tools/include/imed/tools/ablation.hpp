#pragma once

// One-factor ablation plans, their summary table and line plots.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imed/config.hpp"

namespace imed::tools {

enum class AblationAxis { instance_aware, fusion_kind, h, fusion_depth, mu_factors, alpha, distill };

std::string_view to_string(AblationAxis axis);
AblationAxis parse_axis(std::string_view s);

struct AblationPlan {
  RunConfig base;
  std::vector<DatasetSpec> transfers;  // defaults to the base config's dataset
  AblationAxis axis = AblationAxis::h;
  std::vector<nlohmann::json> values;

  /// {"schema_version":1, "base_config": path-or-object, "transfers": [...],
  ///  "axis": "...", "values": [...]}. Relative paths resolve against `origin`.
  static AblationPlan from_json(const nlohmann::json& j, const std::filesystem::path& origin = {});
  static AblationPlan load(const std::filesystem::path& path);
};

/// Display label of an axis value ("0.5-1-1" for mu factors, "on" for distill, ...).
std::string value_label(const nlohmann::json& value);

/// Base config with the axis set to `value`. The distill axis leaves the
/// config untouched; `distill` reports whether the student phase runs.
RunConfig apply_axis(const RunConfig& base, AblationAxis axis, const nlohmann::json& value,
                     bool* distill = nullptr);

/// Short stable name of a transfer ("moons-30").
std::string transfer_name(const DatasetSpec& spec);

struct SummaryRow {
  std::string axis;
  std::string value;
  std::string transfer;
  std::string status = "ok";  // ok | failed
  std::string model;          // student | teacher (the deployed model)
  double source_acc = 0.0;
  double target_acc = 0.0;
  double teacher_target_acc = 0.0;
  double component_mean_target_acc = 0.0;
  double component_max_target_acc = 0.0;
  std::size_t params_component = 0;
  std::size_t params_teacher = 0;
  std::size_t params_student = 0;
  std::string error;
};

/// Fixed column order of summary.csv.
const std::vector<std::string>& summary_columns();
std::string summary_header();
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> parse_summary_csv(const std::string& text);

/// Appends one "avg" row per axis value, averaging the successful transfers;
/// the avg row fails if any transfer of that value failed.
std::vector<SummaryRow> with_average_rows(const std::vector<SummaryRow>& rows);

/// Line plot of `metric` (target_acc or source_acc) against the axis value,
/// one polyline per transfer. Failed runs are left as gaps.
std::string accuracy_plot_svg(const std::vector<SummaryRow>& rows, const std::string& metric);

}  // namespace imed::tools
