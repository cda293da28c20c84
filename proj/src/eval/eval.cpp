#include "p2pi/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "p2pi/common/csv.hpp"
#include "p2pi/common/error.hpp"

namespace p2pi::eval {

using core::BodyPart;
using core::TaskLabel;

JointErrorMatrix joint_errors(const core::SkeletonSeries& pred,
                              const core::SkeletonSeries& truth) {
  if (pred.width() != core::kSkeletonWidth || truth.width() != core::kSkeletonWidth) {
    throw ShapeError("joint errors need full " +
                     std::to_string(core::kSkeletonWidth) + "-wide skeleton series");
  }
  if (pred.frames() != truth.frames()) {
    throw AlignmentError("prediction has " + std::to_string(pred.frames()) +
                         " frames, ground truth " + std::to_string(truth.frames()));
  }
  JointErrorMatrix m;
  m.frames = pred.frames();
  m.values.resize(m.frames * static_cast<std::size_t>(m.joints));
  for (std::size_t f = 0; f < m.frames; ++f) {
    if (pred.time(f) != truth.time(f)) {
      throw AlignmentError("timestamp mismatch at frame " + std::to_string(f));
    }
    auto p = pred.row(f);
    auto t = truth.row(f);
    for (int j = 0; j < m.joints; ++j) {
      const double dx = p[3 * j] - t[3 * j];
      const double dy = p[3 * j + 1] - t[3 * j + 1];
      const double dz = p[3 * j + 2] - t[3 * j + 2];
      m.at(f, j) = std::sqrt(dx * dx + dy * dy + dz * dz);
    }
  }
  return m;
}

namespace {

std::vector<double> select(const JointErrorMatrix& m, const Selection& sel) {
  std::vector<int> joints = sel.joints;
  if (joints.empty()) {
    joints.resize(static_cast<std::size_t>(m.joints));
    for (int j = 0; j < m.joints; ++j) joints[static_cast<std::size_t>(j)] = j;
  }
  std::vector<std::size_t> frames = sel.frames;
  if (frames.empty()) {
    frames.resize(m.frames);
    for (std::size_t f = 0; f < m.frames; ++f) frames[f] = f;
  }
  for (int j : joints) {
    if (j < 0 || j >= m.joints) {
      throw ParameterError("joint index " + std::to_string(j) + " out of range");
    }
  }
  for (std::size_t f : frames) {
    if (f >= m.frames) {
      throw ParameterError("frame index " + std::to_string(f) + " out of range");
    }
  }
  std::vector<double> out;
  out.reserve(frames.size() * joints.size());
  for (std::size_t f : frames) {
    for (int j : joints) out.push_back(m.at(f, j));
  }
  if (out.empty()) throw ParameterError("empty error selection");
  return out;
}

}  // namespace

double rmse(const JointErrorMatrix& m, const Selection& sel) {
  const std::vector<double> e = select(m, sel);
  double sq = 0;
  for (double v : e) sq += v * v;
  return std::sqrt(sq / static_cast<double>(e.size()));
}

std::pair<double, double> median_std(const JointErrorMatrix& m, const Selection& sel) {
  std::vector<double> e = select(m, sel);
  std::sort(e.begin(), e.end());
  const std::size_t n = e.size();
  const double median =
      (n % 2 == 1) ? e[n / 2] : 0.5 * (e[n / 2 - 1] + e[n / 2]);
  double mean = 0;
  for (double v : e) mean += v;
  mean /= static_cast<double>(n);
  double var = 0;
  for (double v : e) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  return {median, std::sqrt(var)};
}

std::vector<TaskLabel> report_task_order() {
  return {TaskLabel::TiltLeftRight, TaskLabel::Bow,  TaskLabel::StandAndSit,
          TaskLabel::Squat,         TaskLabel::OneLegStand, TaskLabel::Walk,
          TaskLabel::Jump,          TaskLabel::OneLegHop,   TaskLabel::Free};
}

namespace {

std::vector<std::pair<TaskLabel, std::vector<std::size_t>>> frames_by_task(
    const JointErrorMatrix& m, const std::vector<TaskLabel>& labels) {
  if (labels.size() != m.frames) {
    throw ShapeError("label count " + std::to_string(labels.size()) +
                     " does not match " + std::to_string(m.frames) + " frames");
  }
  std::vector<std::pair<TaskLabel, std::vector<std::size_t>>> out;
  for (TaskLabel t : report_task_order()) {
    std::vector<std::size_t> frames;
    for (std::size_t f = 0; f < labels.size(); ++f) {
      if (labels[f] == t) frames.push_back(f);
    }
    if (!frames.empty()) out.emplace_back(t, std::move(frames));
  }
  if (out.empty()) throw DataError("no labeled frames to evaluate");
  return out;
}

}  // namespace

TaskReport per_task_report(const JointErrorMatrix& m,
                           const std::vector<TaskLabel>& labels) {
  TaskReport report;
  std::vector<std::size_t> all_labeled;
  for (const auto& [task, frames] : frames_by_task(m, labels)) {
    TaskColumn col;
    col.task = task;
    col.frames = frames.size();
    Selection sel;
    sel.frames = frames;
    col.rmse = rmse(m, sel);
    std::tie(col.median, col.stddev) = median_std(m, sel);
    report.columns.push_back(col);
    all_labeled.insert(all_labeled.end(), frames.begin(), frames.end());
  }
  std::sort(all_labeled.begin(), all_labeled.end());
  Selection pooled;
  pooled.frames = all_labeled;
  report.overall_rmse = rmse(m, pooled);
  return report;
}

PartReport per_part_report(const JointErrorMatrix& m,
                           const std::vector<TaskLabel>& labels) {
  PartReport report;
  const auto tasks = frames_by_task(m, labels);
  for (int p = 0; p < core::kBodyPartCount; ++p) {
    const BodyPart part = static_cast<BodyPart>(p);
    Selection sel;
    for (core::JointId j : core::joints_of(part)) {
      sel.joints.push_back(static_cast<int>(j));
    }
    PartAverage avg;
    avg.part = part;
    for (const auto& [task, frames] : tasks) {
      sel.frames = frames;
      PartRow row;
      row.part = part;
      row.task = task;
      std::tie(row.median, row.stddev) = median_std(m, sel);
      row.rmse = rmse(m, sel);
      report.rows.push_back(row);
      avg.median += row.median;
      avg.stddev += row.stddev;
      avg.rmse += row.rmse;
    }
    const double n = static_cast<double>(tasks.size());
    avg.median /= n;
    avg.stddev /= n;
    avg.rmse /= n;
    report.averages.push_back(avg);
  }
  return report;
}

ErrorReport build_report(const JointErrorMatrix& m,
                         const std::vector<TaskLabel>& labels) {
  ErrorReport r;
  r.tasks = per_task_report(m, labels);
  r.parts = per_part_report(m, labels);
  return r;
}

json TaskReport::to_json() const {
  json cols = json::array();
  for (const TaskColumn& c : columns) {
    cols.push_back({{"task", std::string(core::task_id(c.task))},
                    {"frames", c.frames},
                    {"rmse", c.rmse},
                    {"median", c.median},
                    {"std", c.stddev}});
  }
  return {{"columns", cols}, {"overall_rmse", overall_rmse}};
}

TaskReport TaskReport::from_json(const json& j) {
  TaskReport r;
  for (const json& c : j.at("columns")) {
    TaskColumn col;
    col.task = core::task_from_id(c.at("task").get<std::string>());
    col.frames = c.at("frames").get<std::size_t>();
    col.rmse = c.at("rmse").get<double>();
    col.median = c.at("median").get<double>();
    col.stddev = c.at("std").get<double>();
    r.columns.push_back(col);
  }
  r.overall_rmse = json_get<double>(j, "overall_rmse", 0.0);
  return r;
}

std::string TaskReport::csv() const {
  std::string header = "Task";
  std::string r1 = "RMSE";
  std::string r2 = "Median_error";
  std::string r3 = "Std. Dev. Error";
  for (const TaskColumn& c : columns) {
    header += ',';
    header += core::task_display_name(c.task);
    r1 += ',' + format_double(c.rmse);
    r2 += ',' + format_double(c.median);
    r3 += ',' + format_double(c.stddev);
  }
  return header + '\n' + r1 + '\n' + r2 + '\n' + r3 + '\n';
}

json PartReport::to_json() const {
  json rows_j = json::array();
  for (const PartRow& r : rows) {
    rows_j.push_back({{"part", std::string(core::part_name(r.part))},
                      {"task", std::string(core::task_id(r.task))},
                      {"median", r.median},
                      {"std", r.stddev},
                      {"rmse", r.rmse}});
  }
  json avgs = json::array();
  for (const PartAverage& a : averages) {
    avgs.push_back({{"part", std::string(core::part_name(a.part))},
                    {"median", a.median},
                    {"std", a.stddev},
                    {"rmse", a.rmse}});
  }
  return {{"rows", rows_j}, {"averages", avgs}};
}

std::string PartReport::csv() const {
  std::string out = "Part,Task,Median Error,Std. Dev. Error\n";
  for (const PartAverage& a : averages) {
    for (const PartRow& r : rows) {
      if (r.part != a.part) continue;
      out += core::part_name(r.part);
      out += ',';
      out += core::task_display_name(r.task);
      out += ',' + format_double(r.median) + ',' + format_double(r.stddev) + '\n';
    }
    out += core::part_name(a.part);
    out += ",Average," + format_double(a.median) + ',' + format_double(a.stddev) + '\n';
  }
  return out;
}

json ErrorReport::to_json() const {
  return {{"tasks", tasks.to_json()}, {"parts", parts.to_json()}};
}

std::string ErrorReport::svg() const {
  std::vector<std::string> groups;
  std::vector<std::vector<double>> values(3);
  for (const TaskColumn& c : tasks.columns) {
    groups.emplace_back(core::task_display_name(c.task));
    values[0].push_back(c.rmse);
    values[1].push_back(c.median);
    values[2].push_back(c.stddev);
  }
  return bar_chart_svg("Error summary by task", "mm", groups,
                       {"RMSE", "Median_error", "Std. Dev. Error"}, values);
}

AblationTable ablation_compare(const TaskReport& a, const TaskReport& b) {
  std::set<TaskLabel> in_a, in_b;
  for (const TaskColumn& c : a.columns) in_a.insert(c.task);
  for (const TaskColumn& c : b.columns) in_b.insert(c.task);
  if (in_a != in_b) {
    std::string only_a, only_b;
    for (TaskLabel t : in_a) {
      if (!in_b.count(t)) only_a += std::string(only_a.empty() ? "" : " ") +
                                    std::string(core::task_id(t));
    }
    for (TaskLabel t : in_b) {
      if (!in_a.count(t)) only_b += std::string(only_b.empty() ? "" : " ") +
                                    std::string(core::task_id(t));
    }
    std::string msg = "ablation reports cover different tasks;";
    if (!only_a.empty()) msg += " only in first: " + only_a + ";";
    if (!only_b.empty()) msg += " only in second: " + only_b + ";";
    throw DataError(msg);
  }

  AblationTable table;
  for (const TaskColumn& ca : a.columns) {
    const TaskColumn* cb = nullptr;
    for (const TaskColumn& c : b.columns) {
      if (c.task == ca.task) cb = &c;
    }
    AblationRow row;
    row.task = ca.task;
    row.rmse_a = ca.rmse;
    row.rmse_b = cb->rmse;
    row.delta = cb->rmse - ca.rmse;
    table.rows.push_back(row);
  }
  return table;
}

json AblationTable::to_json() const {
  json rows_j = json::array();
  for (const AblationRow& r : rows) {
    rows_j.push_back({{"task", std::string(core::task_id(r.task))},
                      {"rmse_a", r.rmse_a},
                      {"rmse_b", r.rmse_b},
                      {"delta", r.delta}});
  }
  return {{"label_a", label_a}, {"label_b", label_b}, {"rows", rows_j}};
}

std::string AblationTable::csv() const {
  std::string out = "Task," + label_a + ',' + label_b + ",delta\n";
  for (const AblationRow& r : rows) {
    out += core::task_display_name(r.task);
    out += ',' + format_double(r.rmse_a) + ',' + format_double(r.rmse_b) + ',' +
           format_double(r.delta) + '\n';
  }
  return out;
}

std::string AblationTable::svg() const {
  std::vector<std::string> groups;
  std::vector<std::vector<double>> values(2);
  for (const AblationRow& r : rows) {
    groups.emplace_back(core::task_display_name(r.task));
    values[0].push_back(r.rmse_a);
    values[1].push_back(r.rmse_b);
  }
  return bar_chart_svg("RMSE with and without derivative features", "mm", groups,
                       {label_a, label_b}, values);
}

std::string bar_chart_svg(const std::string& title, const std::string& unit,
                          const std::vector<std::string>& groups,
                          const std::vector<std::string>& series,
                          const std::vector<std::vector<double>>& values) {
  if (groups.empty() || series.empty()) {
    throw ParameterError("bar chart needs at least one group and one series");
  }
  if (values.size() != series.size()) {
    throw ShapeError("bar chart needs one value row per series");
  }
  for (const auto& row : values) {
    if (row.size() != groups.size()) {
      throw ShapeError("bar chart value row length does not match group count");
    }
  }

  static const char* kPalette[] = {"#4878cf", "#ee854a", "#6acc65",
                                   "#d65f5f", "#956cb4", "#8c613c"};
  const int bar_w = 18;
  const int gap = 24;
  const int plot_h = 220;
  const int left = 70;
  const int top = 50;
  const int group_w = bar_w * static_cast<int>(series.size()) + gap;
  const int width = left + group_w * static_cast<int>(groups.size()) + 40;
  const int height = top + plot_h + 70;

  double peak = 0;
  for (const auto& row : values) {
    for (double v : row) peak = std::max(peak, v);
  }
  const double scale = peak > 0 ? plot_h / peak : 0.0;

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
       "\" height=\"" + std::to_string(height) + "\">\n";
  s += "<text x=\"" + std::to_string(left) + "\" y=\"24\" font-size=\"15\">" + title +
       "</text>\n";
  s += "<text x=\"12\" y=\"" + std::to_string(top + plot_h / 2) +
       "\" font-size=\"12\">" + unit + "</text>\n";
  // axes
  s += "<line x1=\"" + std::to_string(left) + "\" y1=\"" + std::to_string(top) +
       "\" x2=\"" + std::to_string(left) + "\" y2=\"" + std::to_string(top + plot_h) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + std::to_string(left) + "\" y1=\"" + std::to_string(top + plot_h) +
       "\" x2=\"" + std::to_string(width - 20) + "\" y2=\"" +
       std::to_string(top + plot_h) + "\" stroke=\"black\"/>\n";
  s += "<text x=\"" + std::to_string(left - 6) + "\" y=\"" + std::to_string(top + 4) +
       "\" font-size=\"11\" text-anchor=\"end\">" + format_double(peak) + "</text>\n";

  for (std::size_t g = 0; g < groups.size(); ++g) {
    const int gx = left + static_cast<int>(g) * group_w + gap / 2;
    for (std::size_t se = 0; se < series.size(); ++se) {
      const double v = values[se][g];
      const int h = static_cast<int>(std::lround(v * scale));
      const int x = gx + static_cast<int>(se) * bar_w;
      const int y = top + plot_h - h;
      s += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
           "\" width=\"" + std::to_string(bar_w - 3) + "\" height=\"" +
           std::to_string(h) + "\" fill=\"" + kPalette[se % 6] + "\"><title>" +
           series[se] + " " + groups[g] + ": " + format_double(v) + "</title></rect>\n";
    }
    s += "<text x=\"" + std::to_string(gx + group_w / 2 - gap / 2) + "\" y=\"" +
         std::to_string(top + plot_h + 18) +
         "\" font-size=\"11\" text-anchor=\"middle\">" + groups[g] + "</text>\n";
  }
  for (std::size_t se = 0; se < series.size(); ++se) {
    const int y = top + plot_h + 36 + static_cast<int>(se) * 16;
    s += "<rect x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(y - 10) +
         "\" width=\"12\" height=\"12\" fill=\"" + kPalette[se % 6] + "\"/>\n";
    s += "<text x=\"" + std::to_string(left + 18) + "\" y=\"" + std::to_string(y) +
         "\" font-size=\"11\">" + series[se] + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace p2pi::eval
