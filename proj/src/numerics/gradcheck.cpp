#include "p2pi/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "p2pi/numerics/rng.hpp"

namespace p2pi::numerics {

namespace {

double eval(const std::vector<Tensor<double>>& params, const ScalarFn& f) {
  Tape<double> tape;
  std::vector<Tape<double>::Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.param(p));
  Tape<double>::Var out = f(tape, vars);
  return tape.value(out)[0];
}

}  // namespace

GradCheckReport check_gradients(const std::vector<Tensor<double>>& params, const ScalarFn& f,
                                double h, int samples, std::uint64_t seed, double floor) {
  // One reverse sweep gives every analytic derivative.
  Tape<double> tape;
  std::vector<Tape<double>::Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.param(p));
  Tape<double>::Var out = f(tape, vars);
  tape.backward(out);

  std::int64_t total = 0;
  for (const auto& p : params) total += p.size();

  // Pick coordinates: exhaustive when small, else uniform without concern
  // for duplicates (harmless, just rechecks).
  std::vector<std::pair<std::size_t, std::int64_t>> coords;
  if (total <= samples) {
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      for (std::int64_t i = 0; i < params[pi].size(); ++i) coords.emplace_back(pi, i);
    }
  } else {
    RngStream rng(seed, 77);
    for (int s = 0; s < samples; ++s) {
      std::int64_t flat = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(total)));
      std::size_t pi = 0;
      while (flat >= params[pi].size()) {
        flat -= params[pi].size();
        ++pi;
      }
      coords.emplace_back(pi, flat);
    }
  }

  GradCheckReport report;
  std::vector<Tensor<double>> work = params;
  for (auto [pi, i] : coords) {
    const double saved = work[pi][i];
    work[pi][i] = saved + h;
    const double fp = eval(work, f);
    work[pi][i] = saved - h;
    const double fm = eval(work, f);
    work[pi][i] = saved;
    const double fd = (fp - fm) / (2.0 * h);
    const double ad = tape.grad(vars[pi])[i];
    const double rel = std::abs(fd - ad) / std::max(std::abs(fd) + std::abs(ad), floor);
    report.max_rel_error = std::max(report.max_rel_error, rel);
    ++report.coords_checked;
  }
  return report;
}

}  // namespace p2pi::numerics
