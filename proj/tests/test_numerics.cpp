#include <doctest.h>

#include <cmath>
#include <vector>

#include "p2pi/numerics/gradcheck.hpp"
#include "p2pi/numerics/rng.hpp"
#include "p2pi/numerics/tape.hpp"
#include "p2pi/numerics/tensor.hpp"

using p2pi::numerics::check_gradients;
using p2pi::numerics::RngStream;
using p2pi::numerics::ScalarFn;
using p2pi::numerics::Shape;
using p2pi::numerics::Tape;
using p2pi::numerics::Tensor;
using DVar = Tape<double>::Var;

namespace {

Tensor<double> random_tensor(Shape s, RngStream& rng, double scale = 1.0) {
  Tensor<double> t(s);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
  return t;
}

// Scalar readout that weights every output coordinate differently, so a
// gradient error anywhere in the op shows up in d(loss)/d(param).
ScalarFn weighted(Tensor<double> w,
                  std::function<DVar(Tape<double>&, const std::vector<DVar>&)> op) {
  return [w = std::move(w), op = std::move(op)](Tape<double>& t,
                                                const std::vector<DVar>& p) -> DVar {
    return t.sum_all(t.mul(op(t, p), t.input(w)));
  };
}

double gradcheck_rel(const std::vector<Tensor<double>>& params, const ScalarFn& f) {
  return check_gradients(params, f).max_rel_error;
}

}  // namespace

TEST_CASE("rng streams are deterministic and independent") {
  RngStream a(42, 0);
  RngStream b(42, 0);
  RngStream c(42, 1);
  bool all_equal = true;
  bool any_diff_stream = false;
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t va = a.next_u64();
    all_equal = all_equal && (va == b.next_u64());
    any_diff_stream = any_diff_stream || (va != c.next_u64());
  }
  CHECK(all_equal);
  CHECK(any_diff_stream);
}

TEST_CASE("rng counter replays from a saved position") {
  RngStream r(7, 3);
  for (int i = 0; i < 5; ++i) r.next_u64();
  const std::uint64_t mark = r.counter();
  const std::uint64_t next = r.next_u64();
  r.set_counter(mark);
  CHECK(r.next_u64() == next);
}

TEST_CASE("rng uniform stays in [0,1) and normal consumes two draws") {
  RngStream r(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  const std::uint64_t before = r.counter();
  (void)r.normal();
  CHECK(r.counter() == before + 2);
}

TEST_CASE("rng normal has roughly standard moments") {
  RngStream r(2026, 5);
  const int n = 20000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("rng uniform_int covers its range") {
  RngStream r(9, 0);
  bool seen[5] = {false, false, false, false, false};
  for (int i = 0; i < 200; ++i) {
    const std::uint64_t v = r.uniform_int(5);
    REQUIRE(v < 5);
    seen[v] = true;
  }
  for (bool s : seen) CHECK(s);
}

TEST_CASE("tensor shape bookkeeping") {
  Tensor<double> t({2, 3});
  CHECK(t.size() == 6);
  t.at(1, 2) = 7.0;
  CHECK(t[5] == 7.0);
  CHECK_THROWS_AS(t.reshaped({4, 2}), p2pi::ShapeError);
  Tensor<float> f = t.cast<float>();
  CHECK(f[5] == 7.0f);
  t[0] = std::nan("");
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("matmul forward matches a hand example") {
  Tape<double> t;
  DVar a = t.input(Tensor<double>({2, 2}, {1, 2, 3, 4}));
  DVar b = t.input(Tensor<double>({2, 2}, {5, 6, 7, 8}));
  const Tensor<double>& c = t.value(t.matmul(a, b));
  CHECK(c[0] == 19.0);
  CHECK(c[1] == 22.0);
  CHECK(c[2] == 43.0);
  CHECK(c[3] == 50.0);
}

TEST_CASE("matmul and bmm reject mismatched shapes") {
  Tape<double> t;
  DVar a = t.input(Tensor<double>({2, 3}));
  DVar b = t.input(Tensor<double>({2, 2}));
  CHECK_THROWS_AS(t.matmul(a, b), p2pi::ShapeError);
  DVar c = t.input(Tensor<double>({2, 2, 3}));
  DVar d = t.input(Tensor<double>({3, 3, 2}));
  CHECK_THROWS_AS(t.bmm(c, d), p2pi::ShapeError);
}

TEST_CASE("softmax normalizes rows and survives large inputs") {
  Tape<double> t;
  DVar x = t.input(Tensor<double>({2, 3}, {0, 0, 0, 1000, 1000, 1001}));
  const Tensor<double>& y = t.value(t.softmax(x));
  CHECK(y[0] == doctest::Approx(1.0 / 3));
  CHECK(y[3] + y[4] + y[5] == doctest::Approx(1.0));
  CHECK(y.all_finite());
  // -inf rows: masked entries get exactly zero weight.
  Tape<double> t2;
  const double ninf = -std::numeric_limits<double>::infinity();
  DVar m = t2.input(Tensor<double>({1, 3}, {0.5, ninf, 0.5}));
  const Tensor<double>& ym = t2.value(t2.softmax(m));
  CHECK(ym[1] == 0.0);
  CHECK(ym[0] == doctest::Approx(0.5));
}

TEST_CASE("layer_norm output has zero mean and unit variance per row") {
  Tape<double> t;
  DVar x = t.input(Tensor<double>({1, 4}, {1, 2, 3, 10}));
  DVar g = t.input(Tensor<double>({4}, {1, 1, 1, 1}));
  DVar b = t.input(Tensor<double>({4}, {0, 0, 0, 0}));
  const Tensor<double>& y = t.value(t.layer_norm(x, g, b));
  double mean = 0, var = 0;
  for (int i = 0; i < 4; ++i) mean += y[i];
  mean /= 4;
  for (int i = 0; i < 4; ++i) var += (y[i] - mean) * (y[i] - mean);
  var /= 4;
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("gelu matches the erf form at a few points") {
  Tape<double> t;
  DVar x = t.input(Tensor<double>({3}, {0.0, 3.0, -3.0}));
  const Tensor<double>& y = t.value(t.gelu(x));
  CHECK(y[0] == 0.0);
  CHECK(y[1] == doctest::Approx(0.5 * 3.0 * (1.0 + std::erf(3.0 / std::sqrt(2.0)))));
  CHECK(y[2] == doctest::Approx(0.5 * -3.0 * (1.0 + std::erf(-3.0 / std::sqrt(2.0)))));
}

TEST_CASE("mean of squared difference reproduces the mse example") {
  Tape<double> t;
  DVar a = t.input(Tensor<double>({2}, {1, 2}));
  DVar b = t.input(Tensor<double>({2}, {0, 0}));
  const Tensor<double>& loss = t.value(t.mean_all(t.square(t.sub(a, b))));
  CHECK(loss[0] == 2.5);
}

TEST_CASE("dropout keeps expectation and is identity at inference") {
  RngStream rng(5, 0);
  Tape<double> t;
  DVar x = t.input(Tensor<double>::full({10000}, 1.0));
  const Tensor<double>& y = t.value(t.dropout(x, 0.3, rng, true));
  double sum = 0;
  int zeros = 0;
  for (std::int64_t i = 0; i < y.size(); ++i) {
    sum += y[i];
    if (y[i] == 0.0) ++zeros;
  }
  CHECK(std::abs(sum / y.size() - 1.0) < 0.05);
  CHECK(std::abs(zeros / 10000.0 - 0.3) < 0.03);
  // Survivors are scaled by 1/(1-rate).
  for (std::int64_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0) {
      CHECK(y[i] == doctest::Approx(1.0 / 0.7));
      break;
    }
  }
  DVar same = t.dropout(x, 0.3, rng, false);
  CHECK(same.id == x.id);
  CHECK_THROWS_AS(t.dropout(x, 1.0, rng, true), p2pi::ParameterError);
}

TEST_CASE("permute transposes a small matrix") {
  Tape<double> t;
  DVar x = t.input(Tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6}));
  const Tensor<double>& y = t.value(t.permute(x, {1, 0, 2, 3}));
  CHECK(y.shape() == Shape{3, 2});
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 4.0);
  CHECK(y[2] == 2.0);
  CHECK(y[5] == 6.0);
}

TEST_CASE("using a parameter twice accumulates its gradient") {
  Tape<double> t;
  DVar a = t.param(Tensor<double>({2}, {1, 2}));
  DVar s = t.sum_all(t.add(a, a));
  t.backward(s);
  CHECK(t.grad(a)[0] == 2.0);
  CHECK(t.grad(a)[1] == 2.0);
}

TEST_CASE("backward_seed runs a vector-jacobian product") {
  Tape<double> t;
  DVar a = t.param(Tensor<double>({2}, {3, 4}));
  DVar y = t.square(a);
  t.backward_seed(y, Tensor<double>({2}, {1.0, 10.0}));
  CHECK(t.grad(a)[0] == 6.0);    // 2*3*1
  CHECK(t.grad(a)[1] == 80.0);   // 2*4*10
}

TEST_CASE("gradients of every op match central finite differences") {
  RngStream rng(0xfeed, 0);
  const double tol = 1e-4;

  SUBCASE("matmul") {
    std::vector<Tensor<double>> p = {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)};
    auto f = weighted(random_tensor({3, 2}, rng),
                      [](Tape<double>& t, const std::vector<DVar>& v) {
                        return t.matmul(v[0], v[1]);
                      });
    CHECK(gradcheck_rel(p, f) < tol);
  }
  SUBCASE("bmm") {
    std::vector<Tensor<double>> p = {random_tensor({2, 3, 4}, rng),
                                     random_tensor({2, 4, 2}, rng)};
    auto f = weighted(random_tensor({2, 3, 2}, rng),
                      [](Tape<double>& t, const std::vector<DVar>& v) {
                        return t.bmm(v[0], v[1]);
                      });
    CHECK(gradcheck_rel(p, f) < tol);
  }
  SUBCASE("add sub mul") {
    std::vector<Tensor<double>> p = {random_tensor({3, 5}, rng), random_tensor({3, 5}, rng)};
    auto f = weighted(random_tensor({3, 5}, rng),
                      [](Tape<double>& t, const std::vector<DVar>& v) {
                        return t.mul(t.add(v[0], v[1]), t.sub(v[0], v[1]));
                      });
    CHECK(gradcheck_rel(p, f) < tol);
  }
  SUBCASE("add_bcast") {
    std::vector<Tensor<double>> p = {random_tensor({4, 3, 6}, rng), random_tensor({6}, rng)};
    auto f = weighted(random_tensor({4, 3, 6}, rng),
                      [](Tape<double>& t, const std::vector<DVar>& v) {
                        return t.add_bcast(v[0], v[1]);
                      });
    CHECK(gradcheck_rel(p, f) < tol);
  }
  SUBCASE("scale reshape permute") {
    std::vector<Tensor<double>> p = {random_tensor({2, 3, 4}, rng)};
    auto f = weighted(random_tensor({4, 6}, rng),
                      [](Tape<double>& t, const std::vector<DVar>& v) {
                        DVar perm = t.permute(v[0], {2, 0, 1, 3});  // [4,2,3]
                        return t.reshape(t.scale(perm, 1.7), {4, 6});
                      });
    CHECK(gradcheck_rel(p, f) < tol);
  }
  SUBCASE("softmax") {
    std::vector<Tensor<double>> p = {random_tensor({3, 7}, rng)};
    auto f = weighted(random_tensor({3, 7}, rng),
                      [](Tape<double>& t, const std::vector<DVar>& v) {
                        return t.softmax(v[0]);
                      });
    CHECK(gradcheck_rel(p, f) < tol);
  }
  SUBCASE("layer_norm") {
    std::vector<Tensor<double>> p = {random_tensor({4, 6}, rng),
                                     random_tensor({6}, rng, 0.5),
                                     random_tensor({6}, rng, 0.5)};
    auto f = weighted(random_tensor({4, 6}, rng),
                      [](Tape<double>& t, const std::vector<DVar>& v) {
                        return t.layer_norm(v[0], v[1], v[2]);
                      });
    CHECK(gradcheck_rel(p, f) < tol);
  }
  SUBCASE("gelu") {
    std::vector<Tensor<double>> p = {random_tensor({5, 5}, rng)};
    auto f = weighted(random_tensor({5, 5}, rng),
                      [](Tape<double>& t, const std::vector<DVar>& v) {
                        return t.gelu(v[0]);
                      });
    CHECK(gradcheck_rel(p, f) < tol);
  }
  SUBCASE("square and mean") {
    std::vector<Tensor<double>> p = {random_tensor({3, 4}, rng)};
    ScalarFn f = [](Tape<double>& t, const std::vector<DVar>& v) {
      return t.mean_all(t.square(v[0]));
    };
    CHECK(gradcheck_rel(p, f) < tol);
  }
  SUBCASE("dropout with a replayed mask") {
    std::vector<Tensor<double>> p = {random_tensor({4, 4}, rng)};
    auto f = weighted(random_tensor({4, 4}, rng),
                      [](Tape<double>& t, const std::vector<DVar>& v) {
                        RngStream mask_rng(99, 0);  // same mask every build
                        return t.dropout(v[0], 0.4, mask_rng, true);
                      });
    CHECK(gradcheck_rel(p, f) < tol);
  }
  SUBCASE("attention-shaped composite") {
    // Mimics one attention head end to end.
    std::vector<Tensor<double>> p = {random_tensor({4, 6}, rng, 0.4),
                                     random_tensor({6, 6}, rng, 0.4),
                                     random_tensor({6, 6}, rng, 0.4),
                                     random_tensor({6, 6}, rng, 0.4)};
    auto f = weighted(random_tensor({4, 6}, rng),
                      [](Tape<double>& t, const std::vector<DVar>& v) {
                        DVar q = t.matmul(v[0], v[1]);
                        DVar k = t.matmul(v[0], v[2]);
                        DVar val = t.matmul(v[0], v[3]);
                        DVar scores = t.scale(
                            t.matmul(q, t.permute(k, {1, 0, 2, 3})), 1.0 / std::sqrt(6.0));
                        return t.matmul(t.softmax(scores), val);
                      });
    CHECK(gradcheck_rel(p, f) < tol);
  }
}
