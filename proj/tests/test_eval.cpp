#include "p2pi/eval/eval.hpp"

#include <cmath>

#include "doctest.h"
#include "p2pi/common/error.hpp"
#include "p2pi/numerics/rng.hpp"

using namespace p2pi;
using core::BodyPart;
using core::TaskLabel;
using eval::JointErrorMatrix;
using eval::Selection;

namespace {

core::SkeletonSeries random_skeleton(int frames, std::uint64_t seed) {
  numerics::RngStream rng(seed, 0);
  core::SkeletonSeries s(core::kSkeletonWidth);
  std::vector<double> row(core::kSkeletonWidth);
  for (int f = 0; f < frames; ++f) {
    for (double& v : row) v = rng.uniform(-500.0, 500.0);
    s.push_back(f * 0.01, row);
  }
  return s;
}

JointErrorMatrix constant_matrix(std::size_t frames, double value) {
  JointErrorMatrix m;
  m.frames = frames;
  m.values.assign(frames * core::kJointCount, value);
  return m;
}

}  // namespace

TEST_CASE("joint errors from skeleton pairs") {
  core::SkeletonSeries truth = random_skeleton(10, 3);

  SUBCASE("identical series give all zeros") {
    JointErrorMatrix m = eval::joint_errors(truth, truth);
    CHECK(m.frames == 10);
    CHECK(m.joints == 21);
    for (double v : m.values) CHECK(v == 0.0);
  }

  SUBCASE("a 3-4-0 offset on one joint reads exactly 5 mm") {
    core::SkeletonSeries pred = truth;
    const int j = static_cast<int>(core::JointId::Head);
    for (std::size_t f = 0; f < pred.frames(); ++f) {
      pred.at(f, 3 * j) += 3.0;
      pred.at(f, 3 * j + 1) += 4.0;
    }
    JointErrorMatrix m = eval::joint_errors(pred, truth);
    for (std::size_t f = 0; f < m.frames; ++f) {
      for (int k = 0; k < m.joints; ++k) {
        CHECK(m.at(f, k) == (k == j ? 5.0 : 0.0));
      }
    }
  }

  SUBCASE("random pair matches a brute-force recomputation") {
    core::SkeletonSeries pred = random_skeleton(10, 4);
    JointErrorMatrix m = eval::joint_errors(pred, truth);
    for (std::size_t f = 0; f < 10; ++f) {
      for (int j = 0; j < 21; ++j) {
        const double e = std::hypot(pred.at(f, 3 * j) - truth.at(f, 3 * j),
                                     pred.at(f, 3 * j + 1) - truth.at(f, 3 * j + 1),
                                     pred.at(f, 3 * j + 2) - truth.at(f, 3 * j + 2));
        CHECK(m.at(f, j) == doctest::Approx(e).epsilon(1e-12));
        CHECK(m.at(f, j) >= 0.0);
      }
    }
  }

  SUBCASE("frame count mismatch") {
    core::SkeletonSeries shorter = random_skeleton(9, 3);
    CHECK_THROWS_AS(eval::joint_errors(shorter, truth), AlignmentError);
  }

  SUBCASE("timestamp mismatch") {
    core::SkeletonSeries shifted(core::kSkeletonWidth);
    std::vector<double> row(core::kSkeletonWidth, 0.0);
    for (int f = 0; f < 10; ++f) shifted.push_back(0.005 + f * 0.01, row);
    CHECK_THROWS_AS(eval::joint_errors(shifted, truth), AlignmentError);
  }

  SUBCASE("wrong width") {
    core::SkeletonSeries narrow(6);
    std::vector<double> row(6, 0.0);
    for (int f = 0; f < 10; ++f) narrow.push_back(f * 0.01, row);
    CHECK_THROWS_AS(eval::joint_errors(narrow, truth), ShapeError);
  }
}

TEST_CASE("rmse oracles") {
  SUBCASE("constant errors") {
    CHECK(eval::rmse(constant_matrix(7, 10.0)) == 10.0);
  }

  SUBCASE("hand arithmetic on {0, 10}") {
    JointErrorMatrix m;
    m.frames = 1;
    m.joints = 21;
    m.values.assign(21, 0.0);
    // Restrict to two joints with errors 0 and 10.
    m.at(0, 3) = 10.0;
    Selection sel;
    sel.joints = {2, 3};
    CHECK(eval::rmse(m, sel) == doctest::Approx(std::sqrt(50.0)).epsilon(1e-12));
  }

  SUBCASE("rmse dominates the mean on random data") {
    numerics::RngStream rng(8, 0);
    JointErrorMatrix m;
    m.frames = 6;
    m.values.resize(6 * 21);
    for (double& v : m.values) v = rng.uniform(0.0, 50.0);
    const double r = eval::rmse(m);
    double mean = 0;
    for (double v : m.values) mean += v;
    mean /= static_cast<double>(m.values.size());
    CHECK(r >= mean);
  }

  SUBCASE("pooling identity over disjoint equal halves") {
    numerics::RngStream rng(9, 0);
    JointErrorMatrix m;
    m.frames = 4;
    m.values.resize(4 * 21);
    for (double& v : m.values) v = rng.uniform(0.0, 50.0);
    Selection a, b;
    a.frames = {0, 1};
    b.frames = {2, 3};
    const double ra = eval::rmse(m, a), rb = eval::rmse(m, b);
    CHECK(eval::rmse(m) ==
          doctest::Approx(std::sqrt(0.5 * (ra * ra + rb * rb))).epsilon(1e-12));
  }

  SUBCASE("empty and invalid selections") {
    JointErrorMatrix empty;
    CHECK_THROWS_AS(eval::rmse(empty), ParameterError);
    JointErrorMatrix m = constant_matrix(2, 1.0);
    Selection bad;
    bad.joints = {21};
    CHECK_THROWS_AS(eval::rmse(m, bad), ParameterError);
    bad.joints = {0};
    bad.frames = {5};
    CHECK_THROWS_AS(eval::rmse(m, bad), ParameterError);
  }
}

TEST_CASE("median and standard deviation oracles") {
  SUBCASE("constant errors") {
    auto [med, sd] = eval::median_std(constant_matrix(3, 4.25));
    CHECK(med == 4.25);
    CHECK(sd == 0.0);
  }

  SUBCASE("even count takes the midpoint of the central pair") {
    JointErrorMatrix m;
    m.frames = 1;
    m.joints = 21;
    m.values.assign(21, 0.0);
    m.at(0, 0) = 1.0;
    m.at(0, 1) = 2.0;
    m.at(0, 2) = 3.0;
    m.at(0, 3) = 4.0;
    Selection sel;
    sel.joints = {0, 1, 2, 3};
    auto [med, sd] = eval::median_std(m, sel);
    CHECK(med == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(sd == doctest::Approx(std::sqrt(1.25)).epsilon(1e-12));
  }

  SUBCASE("odd count picks the middle value") {
    JointErrorMatrix m;
    m.frames = 1;
    m.joints = 21;
    m.values.assign(21, 0.0);
    m.at(0, 0) = 9.0;
    m.at(0, 1) = 1.0;
    m.at(0, 2) = 5.0;
    Selection sel;
    sel.joints = {0, 1, 2};
    CHECK(eval::median_std(m, sel).first == 5.0);
  }

  SUBCASE("median bounded by the extremes") {
    numerics::RngStream rng(10, 0);
    JointErrorMatrix m;
    m.frames = 5;
    m.values.resize(5 * 21);
    double lo = 1e9, hi = -1e9;
    for (double& v : m.values) {
      v = rng.uniform(0.0, 80.0);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    auto [med, sd] = eval::median_std(m);
    CHECK(med >= lo);
    CHECK(med <= hi);
    CHECK(sd >= 0.0);
  }
}

TEST_CASE("per-task report") {
  SUBCASE("single task column equals the pooled statistics") {
    JointErrorMatrix m = constant_matrix(6, 5.0);
    std::vector<TaskLabel> labels(6, TaskLabel::TiltLeftRight);
    eval::TaskReport r = eval::per_task_report(m, labels);
    REQUIRE(r.columns.size() == 1);
    CHECK(r.columns[0].task == TaskLabel::TiltLeftRight);
    CHECK(r.columns[0].frames == 6);
    CHECK(r.columns[0].rmse == eval::rmse(m));
    CHECK(r.columns[0].median == 5.0);
    CHECK(r.columns[0].stddev == 0.0);
    CHECK(r.overall_rmse == 5.0);
  }

  SUBCASE("identical error blocks give identical columns") {
    numerics::RngStream rng(11, 0);
    JointErrorMatrix m;
    m.frames = 8;
    m.values.resize(8 * 21);
    for (std::size_t f = 0; f < 4; ++f) {
      for (int j = 0; j < 21; ++j) {
        const double v = rng.uniform(0.0, 30.0);
        m.at(f, j) = v;
        m.at(f + 4, j) = v;  // mirror the block into the second task
      }
    }
    std::vector<TaskLabel> labels(8, TaskLabel::Bow);
    for (std::size_t f = 4; f < 8; ++f) labels[f] = TaskLabel::Walk;
    eval::TaskReport r = eval::per_task_report(m, labels);
    REQUIRE(r.columns.size() == 2);
    CHECK(r.columns[0].rmse == r.columns[1].rmse);
    CHECK(r.columns[0].median == r.columns[1].median);
    CHECK(r.columns[0].stddev == r.columns[1].stddev);
  }

  SUBCASE("doubling the errors doubles the reported statistics") {
    numerics::RngStream rng(12, 0);
    JointErrorMatrix m;
    m.frames = 10;
    m.values.resize(10 * 21);
    for (std::size_t f = 0; f < 5; ++f) {
      for (int j = 0; j < 21; ++j) {
        const double v = rng.uniform(1.0, 20.0);
        m.at(f, j) = v;        // task B block
        m.at(f + 5, j) = 2 * v;  // task A block, exactly twice the error
      }
    }
    std::vector<TaskLabel> labels(10, TaskLabel::Bow);
    for (std::size_t f = 5; f < 10; ++f) labels[f] = TaskLabel::Squat;
    eval::TaskReport r = eval::per_task_report(m, labels);
    REQUIRE(r.columns.size() == 2);
    CHECK(r.columns[1].rmse / r.columns[0].rmse == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(r.columns[1].median / r.columns[0].median == doctest::Approx(2.0).epsilon(1e-9));
  }

  SUBCASE("columns follow the published task order") {
    JointErrorMatrix m = constant_matrix(3, 1.0);
    // Deliberately feed tasks whose enum order differs from report order.
    std::vector<TaskLabel> labels = {TaskLabel::Squat, TaskLabel::StandAndSit,
                                     TaskLabel::TiltLeftRight};
    eval::TaskReport r = eval::per_task_report(m, labels);
    REQUIRE(r.columns.size() == 3);
    CHECK(r.columns[0].task == TaskLabel::TiltLeftRight);
    CHECK(r.columns[1].task == TaskLabel::StandAndSit);
    CHECK(r.columns[2].task == TaskLabel::Squat);
  }

  SUBCASE("unknown-only labels are an error") {
    JointErrorMatrix m = constant_matrix(3, 1.0);
    std::vector<TaskLabel> labels(3, TaskLabel::Unknown);
    CHECK_THROWS_AS(eval::per_task_report(m, labels), DataError);
  }

  SUBCASE("label count must match frames") {
    JointErrorMatrix m = constant_matrix(3, 1.0);
    std::vector<TaskLabel> labels(2, TaskLabel::Bow);
    CHECK_THROWS_AS(eval::per_task_report(m, labels), ShapeError);
  }

  SUBCASE("json round trip") {
    JointErrorMatrix m = constant_matrix(4, 3.0);
    std::vector<TaskLabel> labels(4, TaskLabel::Jump);
    eval::TaskReport r = eval::per_task_report(m, labels);
    eval::TaskReport back = eval::TaskReport::from_json(r.to_json());
    REQUIRE(back.columns.size() == 1);
    CHECK(back.columns[0].task == TaskLabel::Jump);
    CHECK(back.columns[0].rmse == r.columns[0].rmse);
    CHECK(back.overall_rmse == r.overall_rmse);
  }
}

TEST_CASE("per-part report") {
  SUBCASE("errors confined to the head leave other parts at zero") {
    JointErrorMatrix m = constant_matrix(4, 0.0);
    for (std::size_t f = 0; f < 4; ++f) {
      for (core::JointId j : core::joints_of(BodyPart::Head)) {
        m.at(f, static_cast<int>(j)) = 7.0;
      }
    }
    std::vector<TaskLabel> labels(4, TaskLabel::Bow);
    eval::PartReport r = eval::per_part_report(m, labels);
    REQUIRE(r.rows.size() == 4);  // one task row per part
    for (const eval::PartRow& row : r.rows) {
      if (row.part == BodyPart::Head) {
        CHECK(row.median == 7.0);
        CHECK(row.stddev == 0.0);
      } else {
        CHECK(row.median == 0.0);
        CHECK(row.stddev == 0.0);
        CHECK(row.rmse == 0.0);
      }
    }
  }

  SUBCASE("average of identical task rows equals the row") {
    numerics::RngStream rng(13, 0);
    JointErrorMatrix m;
    m.frames = 6;
    m.values.resize(6 * 21);
    for (std::size_t f = 0; f < 3; ++f) {
      for (int j = 0; j < 21; ++j) {
        const double v = rng.uniform(0.0, 40.0);
        m.at(f, j) = v;
        m.at(f + 3, j) = v;
      }
    }
    std::vector<TaskLabel> labels(6, TaskLabel::Walk);
    for (std::size_t f = 3; f < 6; ++f) labels[f] = TaskLabel::Jump;
    eval::PartReport r = eval::per_part_report(m, labels);
    REQUIRE(r.averages.size() == 4);
    for (const eval::PartAverage& avg : r.averages) {
      for (const eval::PartRow& row : r.rows) {
        if (row.part != avg.part) continue;
        CHECK(avg.median == doctest::Approx(row.median).epsilon(1e-12));
        CHECK(avg.stddev == doctest::Approx(row.stddev).epsilon(1e-12));
      }
    }
  }

  SUBCASE("per-part pooled squares recombine to the all-joint rmse") {
    numerics::RngStream rng(14, 0);
    JointErrorMatrix m;
    m.frames = 5;
    m.values.resize(5 * 21);
    for (double& v : m.values) v = rng.uniform(0.0, 60.0);
    std::vector<TaskLabel> labels(5, TaskLabel::Squat);
    eval::PartReport r = eval::per_part_report(m, labels);
    double weighted_sq = 0;
    for (const eval::PartRow& row : r.rows) {
      const double nj = static_cast<double>(core::joints_of(row.part).size());
      weighted_sq += nj * row.rmse * row.rmse;
    }
    CHECK(std::sqrt(weighted_sq / 21.0) == doctest::Approx(eval::rmse(m)).epsilon(1e-9));
  }

  SUBCASE("part rows cover all four parts for every present task") {
    JointErrorMatrix m = constant_matrix(4, 2.0);
    std::vector<TaskLabel> labels = {TaskLabel::Bow, TaskLabel::Bow, TaskLabel::Walk,
                                     TaskLabel::Walk};
    eval::PartReport r = eval::per_part_report(m, labels);
    CHECK(r.rows.size() == 8);  // 4 parts x 2 tasks
    CHECK(r.averages.size() == 4);
    CHECK(r.rows[0].part == BodyPart::Head);
    CHECK(r.rows[2].part == BodyPart::Spine);
    CHECK(r.averages[3].part == BodyPart::Legs);
  }
}

TEST_CASE("report csv layouts") {
  SUBCASE("task summary rows carry the published names") {
    JointErrorMatrix m = constant_matrix(4, 5.0);
    std::vector<TaskLabel> labels(4, TaskLabel::TiltLeftRight);
    eval::TaskReport r = eval::per_task_report(m, labels);
    CHECK(r.csv() == "Task,Tilt\n"
                     "RMSE,5\n"
                     "Median_error,5\n"
                     "Std. Dev. Error,0\n");
  }

  SUBCASE("task columns in published order") {
    JointErrorMatrix m = constant_matrix(2, 1.0);
    std::vector<TaskLabel> labels = {TaskLabel::Squat, TaskLabel::StandAndSit};
    eval::TaskReport r = eval::per_task_report(m, labels);
    CHECK(r.csv().substr(0, r.csv().find('\n')) == "Task,Stand and Sit,Squat");
  }

  SUBCASE("part table blocks end with Average lines") {
    JointErrorMatrix m = constant_matrix(2, 0.0);
    for (std::size_t f = 0; f < 2; ++f) {
      for (core::JointId j : core::joints_of(BodyPart::Head)) {
        m.at(f, static_cast<int>(j)) = 2.0;
      }
      for (core::JointId j : core::joints_of(BodyPart::Spine)) {
        m.at(f, static_cast<int>(j)) = 4.0;
      }
      for (core::JointId j : core::joints_of(BodyPart::Arms)) {
        m.at(f, static_cast<int>(j)) = 6.0;
      }
      for (core::JointId j : core::joints_of(BodyPart::Legs)) {
        m.at(f, static_cast<int>(j)) = 8.0;
      }
    }
    std::vector<TaskLabel> labels(2, TaskLabel::TiltLeftRight);
    eval::PartReport r = eval::per_part_report(m, labels);
    CHECK(r.csv() == "Part,Task,Median Error,Std. Dev. Error\n"
                     "Head,Tilt,2,0\n"
                     "Head,Average,2,0\n"
                     "Spine,Tilt,4,0\n"
                     "Spine,Average,4,0\n"
                     "Arms,Tilt,6,0\n"
                     "Arms,Average,6,0\n"
                     "Legs,Tilt,8,0\n"
                     "Legs,Average,8,0\n");
  }
}

TEST_CASE("ablation comparison") {
  JointErrorMatrix base = constant_matrix(6, 10.0);
  std::vector<TaskLabel> labels(6, TaskLabel::Bow);
  for (std::size_t f = 3; f < 6; ++f) labels[f] = TaskLabel::Squat;
  eval::TaskReport a = eval::per_task_report(base, labels);

  SUBCASE("identical reports give exact zero deltas") {
    eval::AblationTable t = eval::ablation_compare(a, a);
    REQUIRE(t.rows.size() == 2);
    for (const eval::AblationRow& r : t.rows) {
      CHECK(r.delta == 0.0);
      CHECK(r.rmse_a == r.rmse_b);
    }
  }

  SUBCASE("a uniform 10 percent regression shows up in every delta") {
    JointErrorMatrix worse = constant_matrix(6, 11.0);
    eval::TaskReport b = eval::per_task_report(worse, labels);
    eval::AblationTable t = eval::ablation_compare(a, b);
    for (const eval::AblationRow& r : t.rows) {
      CHECK(r.delta / r.rmse_a == doctest::Approx(0.1).epsilon(1e-9));
    }
  }

  SUBCASE("rows follow the published task order") {
    eval::AblationTable t = eval::ablation_compare(a, a);
    CHECK(t.rows[0].task == TaskLabel::Bow);
    CHECK(t.rows[1].task == TaskLabel::Squat);
    const std::string csv = t.csv();
    CHECK(csv.substr(0, csv.find('\n')) ==
          "Task,without_derivatives,with_derivatives,delta");
  }

  SUBCASE("mismatched task sets are refused with the difference named") {
    std::vector<TaskLabel> other(6, TaskLabel::Walk);
    eval::TaskReport b = eval::per_task_report(base, other);
    try {
      eval::ablation_compare(a, b);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("walk") != std::string::npos);
      CHECK(msg.find("bow") != std::string::npos);
    }
  }

  SUBCASE("svg emits one pair of bars per task") {
    eval::AblationTable t = eval::ablation_compare(a, a);
    const std::string svg = t.svg();
    CHECK(svg.find("<svg") == 0);
    std::size_t bars = 0, pos = 0;
    while ((pos = svg.find("<rect", pos)) != std::string::npos) {
      ++bars;
      pos += 5;
    }
    // 2 tasks x 2 series + 2 legend swatches.
    CHECK(bars == 6);
    CHECK(svg.find("Bow") != std::string::npos);
    CHECK(svg.find("Squat") != std::string::npos);
  }
}

TEST_CASE("bar chart generator") {
  SUBCASE("deterministic output") {
    const std::string s1 = eval::bar_chart_svg("t", "mm", {"a", "b"}, {"x"}, {{1.0, 2.0}});
    const std::string s2 = eval::bar_chart_svg("t", "mm", {"a", "b"}, {"x"}, {{1.0, 2.0}});
    CHECK(s1 == s2);
    CHECK(s1.find("</svg>") != std::string::npos);
  }

  SUBCASE("validates dimensions") {
    CHECK_THROWS_AS(eval::bar_chart_svg("t", "mm", {}, {"x"}, {}), ParameterError);
    CHECK_THROWS_AS(eval::bar_chart_svg("t", "mm", {"a"}, {"x"}, {}), ShapeError);
    CHECK_THROWS_AS(eval::bar_chart_svg("t", "mm", {"a"}, {"x"}, {{1.0, 2.0}}),
                    ShapeError);
  }

  SUBCASE("all-zero values do not divide by zero") {
    const std::string s = eval::bar_chart_svg("t", "mm", {"a"}, {"x"}, {{0.0}});
    CHECK(s.find("</svg>") != std::string::npos);
  }
}

TEST_CASE("full report bundle") {
  numerics::RngStream rng(15, 0);
  JointErrorMatrix m;
  m.frames = 12;
  m.values.resize(12 * 21);
  for (double& v : m.values) v = rng.uniform(0.0, 90.0);
  std::vector<TaskLabel> labels(12, TaskLabel::Bow);
  for (std::size_t f = 6; f < 12; ++f) labels[f] = TaskLabel::Walk;

  eval::ErrorReport r = eval::build_report(m, labels);
  CHECK(r.tasks.columns.size() == 2);
  CHECK(r.parts.rows.size() == 8);
  CHECK(r.tasks.overall_rmse == doctest::Approx(eval::rmse(m)).epsilon(1e-12));

  const json j = r.to_json();
  CHECK(j.contains("tasks"));
  CHECK(j.contains("parts"));
  CHECK(r.svg().find("Error summary by task") != std::string::npos);
}
