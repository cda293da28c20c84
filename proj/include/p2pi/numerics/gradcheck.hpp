#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "p2pi/numerics/tape.hpp"

namespace p2pi::numerics {

/// Builds a scalar-valued computation from parameter leaves.
using ScalarFn =
    std::function<Tape<double>::Var(Tape<double>&, const std::vector<Tape<double>::Var>&)>;

struct GradCheckReport {
  double max_rel_error = 0;
  int coords_checked = 0;
};

/// Central finite differences vs reverse-mode gradients, 64-bit only.
/// Samples up to `samples` coordinates across all parameters (all of them if
/// they fit) and reports rel = |fd - ad| / max(|fd| + |ad|, floor).
GradCheckReport check_gradients(const std::vector<Tensor<double>>& params, const ScalarFn& f,
                                double h = 1e-5, int samples = 200,
                                std::uint64_t seed = 0x5eed, double floor = 1e-5);

}  // namespace p2pi::numerics
