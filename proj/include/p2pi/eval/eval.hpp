#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "p2pi/common/json_util.hpp"
#include "p2pi/core/series.hpp"
#include "p2pi/core/types.hpp"

namespace p2pi::eval {

/// Per-frame, per-joint Euclidean distances between predicted and true joint
/// positions, in millimeters.
struct JointErrorMatrix {
  std::size_t frames = 0;
  int joints = core::kJointCount;
  std::vector<double> values;  // row-major frames x joints

  double at(std::size_t f, int j) const { return values[f * joints + j]; }
  double& at(std::size_t f, int j) { return values[f * joints + j]; }
};

JointErrorMatrix joint_errors(const core::SkeletonSeries& pred,
                              const core::SkeletonSeries& truth);

/// Restriction of an error matrix to a joint subset and/or frame subset.
/// Empty vectors select everything.
struct Selection {
  std::vector<int> joints;
  std::vector<std::size_t> frames;
};

/// sqrt(mean of squared selected errors).
double rmse(const JointErrorMatrix& m, const Selection& sel = {});

/// (median, population standard deviation) of the selected errors. Median of
/// an even count is the midpoint of the two central values.
std::pair<double, double> median_std(const JointErrorMatrix& m, const Selection& sel = {});

/// Task column order used by every report: the order of the published summary
/// (Tilt, Bow, Stand and Sit, Squat) followed by the remaining labels.
std::vector<core::TaskLabel> report_task_order();

struct TaskColumn {
  core::TaskLabel task = core::TaskLabel::Unknown;
  std::size_t frames = 0;
  double rmse = 0;
  double median = 0;
  double stddev = 0;
};

/// One column per task present in the labels (Unknown excluded), in report
/// order, with the all-joint RMSE / median / std over that task's frames.
struct TaskReport {
  std::vector<TaskColumn> columns;
  double overall_rmse = 0;  // pooled over every labeled frame

  json to_json() const;
  static TaskReport from_json(const json& j);
  /// Row layout: header "Task,<names...>" then rows "RMSE", "Median_error",
  /// "Std. Dev. Error".
  std::string csv() const;
};

struct PartRow {
  core::BodyPart part = core::BodyPart::Head;
  core::TaskLabel task = core::TaskLabel::Unknown;
  double median = 0;
  double stddev = 0;
  double rmse = 0;  // kept internally; the csv prints median/std only
};

struct PartAverage {
  core::BodyPart part = core::BodyPart::Head;
  double median = 0;
  double stddev = 0;
  double rmse = 0;
};

/// Per body part and task {median, std} plus an unweighted per-part Average
/// row over its task rows.
struct PartReport {
  std::vector<PartRow> rows;          // grouped by part, tasks in report order
  std::vector<PartAverage> averages;  // one per part, same part order

  json to_json() const;
  /// Columns "Part,Task,Median Error,Std. Dev. Error"; every part block ends
  /// with its Average line.
  std::string csv() const;
};

TaskReport per_task_report(const JointErrorMatrix& m,
                           const std::vector<core::TaskLabel>& labels);
PartReport per_part_report(const JointErrorMatrix& m,
                           const std::vector<core::TaskLabel>& labels);

/// Everything derived from one prediction/truth pair.
struct ErrorReport {
  TaskReport tasks;
  PartReport parts;

  json to_json() const;
  /// Grouped bar chart of RMSE / median / std per task.
  std::string svg() const;
};

ErrorReport build_report(const JointErrorMatrix& m,
                         const std::vector<core::TaskLabel>& labels);

struct AblationRow {
  core::TaskLabel task = core::TaskLabel::Unknown;
  double rmse_a = 0;
  double rmse_b = 0;
  double delta = 0;  // b - a
};

/// Side-by-side per-task RMSE of two runs (conventionally A = without
/// derivative features, B = with). Requires identical task sets.
struct AblationTable {
  std::string label_a = "without_derivatives";
  std::string label_b = "with_derivatives";
  std::vector<AblationRow> rows;

  json to_json() const;
  std::string csv() const;
  std::string svg() const;  // paired bar chart
};

AblationTable ablation_compare(const TaskReport& a, const TaskReport& b);

/// Minimal grouped bar chart; one bar group per entry of `groups`, one color
/// per series. values[s][g] pairs series s with group g. Deterministic text
/// output so identical inputs yield identical files.
std::string bar_chart_svg(const std::string& title, const std::string& unit,
                          const std::vector<std::string>& groups,
                          const std::vector<std::string>& series,
                          const std::vector<std::vector<double>>& values);

}  // namespace p2pi::eval
