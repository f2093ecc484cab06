#include <cmath>
#include <set>

#include "doctest.h"
#include "ian/random.hpp"
#include "ian/tensor.hpp"

using namespace ian;

namespace {

Tensor64 rand64(const Shape& s, Rng& rng, bool grad = true) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(s)));
  for (auto& e : v) e = rng.uniform(-1, 1);
  return Tensor64(s, v, grad);
}

// Central differences of f around t, checked against t.grad().
void expect_grad_matches(const std::function<Tensor64(const Tensor64&)>& f, Tensor64 t, double tol = 1e-7) {
  t.zero_grad();
  f(t).backward();
  const auto num = finite_diff_grad([&](const Tensor64& p) { return f(p).item(); }, t, 1e-5);
  for (std::size_t i = 0; i < t.numel(); ++i) CHECK(t.grad()[i] == doctest::Approx(num.data()[i]).epsilon(tol).scale(1));
}

}  // namespace

TEST_CASE("elementwise values and per-channel broadcast") {
  const Tensor a({1, 2, 1, 2}, {1, 2, 3, 4});
  const Tensor c({1, 2, 1, 1}, {10, 100});
  const auto s = add(a, c);
  CHECK(std::vector<float>(s.data().begin(), s.data().end()) == std::vector<float>{11, 12, 103, 104});
  const auto m = mul(a, Tensor::scalar(2));
  CHECK(m.at({0, 1, 0, 1}) == 8);
  CHECK(div(a, a).at({0, 0, 0, 1}) == 1);
  CHECK_THROWS_AS(add(a, Tensor({3}, {1, 2, 3})), Error);
}

TEST_CASE("reductions drop reduced axes") {
  const Tensor64 t({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto r0 = reduce(ReduceOp::sum, t, {0});
  CHECK(r0.shape() == Shape{3});
  CHECK(r0.at({2}) == 9);
  const auto r1 = reduce(ReduceOp::mean, t, {1});
  CHECK(r1.at({1}) == 5);
  CHECK(sum_all(t).item() == 21);
  CHECK(mean_all(t).item() == 3.5);
}

TEST_CASE("matmul against a naive product") {
  Rng rng(3);
  const auto a = rand64({4, 5}, rng, false);
  const auto b = rand64({5, 3}, rng, false);
  const auto c = matmul(a, b);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0;
      for (int k = 0; k < 5; ++k) acc += a.at({i, k}) * b.at({k, j});
      CHECK(c.at({i, j}) == doctest::Approx(acc).epsilon(1e-14));
    }
}

TEST_CASE("narrow and concat invert each other") {
  Rng rng(5);
  const auto t = rand64({2, 5, 3}, rng, false);
  const auto a = narrow(t, 1, 0, 2);
  const auto b = narrow(t, 1, 2, 3);
  const auto back = concat<double>({a, b}, 1);
  CHECK(back.shape() == t.shape());
  CHECK(std::equal(back.data().begin(), back.data().end(), t.data().begin()));
  CHECK_THROWS_AS(narrow(t, 1, 4, 2), Error);
}

TEST_CASE("gradients of core operations match central differences") {
  Rng rng(11);
  const auto other = rand64({2, 3, 2, 2}, rng, false);
  const auto chan = rand64({1, 3, 1, 1}, rng, false);
  const auto w = rand64({3, 4}, rng, false);
  const auto probe = rand64({2, 6}, rng, false);
  expect_grad_matches([&](const Tensor64& x) { return sum_all(mul(add(x, other), sub(x, chan))); },
                      rand64({2, 3, 2, 2}, rng));
  expect_grad_matches([&](const Tensor64& x) { return sum_all(div(other, add_scalar(square(x), 1.0))); },
                      rand64({2, 3, 2, 2}, rng));
  expect_grad_matches([&](const Tensor64& x) { return sum_all(square(matmul(x, w))); }, rand64({2, 3}, rng));
  expect_grad_matches(
      [&](const Tensor64& x) {
        return sum_all(mul(concat<double>({narrow(x, 1, 1, 2), mul_scalar(x, 3.0)}, 1), probe));
      },
      rand64({2, 4}, rng));
  expect_grad_matches([&](const Tensor64& x) { return mean_all(reduce(ReduceOp::mean, square(x), {0, 2})); },
                      rand64({3, 2, 4}, rng));
}

TEST_CASE("shared subexpressions accumulate gradient") {
  Tensor64 x({1}, {3.0}, true);
  const auto y = add(mul(x, x), x);  // dy/dx = 2x + 1
  y.backward();
  CHECK(x.grad()[0] == 7.0);
  y.backward();  // leaves accumulate
  CHECK(x.grad()[0] == 14.0);
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("tape orders every node after its inputs") {
  Rng rng(2);
  const auto x = rand64({3}, rng);
  const auto a = square(x);
  const auto b = mul(a, x);
  const auto root = sum_all(add(b, a));
  const auto tape = Tape<double>::record(root);
  std::set<const detail::Node<double>*> seen;
  for (const auto* n : tape.order()) {
    for (const auto& p : n->parents) CHECK(seen.count(p.get()) == 1);
    seen.insert(n);
  }
  CHECK(seen.count(root.node().get()) == 1);
}

TEST_CASE("no-grad guard records nothing") {
  Tensor64 x({2}, {1, 2}, true);
  {
    NoGradGuard g;
    CHECK_FALSE(grad_enabled());
    const auto y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(grad_enabled());
  CHECK(mul(x, x).requires_grad());
}

TEST_CASE("finite differences of a quadratic are exact to rounding") {
  const Tensor64 t({3}, {1, -2, 0.5});
  const auto g = finite_diff_grad(
      [](const Tensor64& p) {
        double s = 0;
        for (double v : p.data()) s += v * v;
        return s;
      },
      t, 1e-3);
  CHECK(g.data()[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(g.data()[1] == doctest::Approx(-4.0).epsilon(1e-9));
  CHECK(t.data()[1] == -2);
}

TEST_CASE("rng state round trip") {
  Rng a(42);
  a.next_u64();
  const auto s = a.state();
  const auto v1 = a.uniform();
  Rng b(0);
  b.set_state(s);
  CHECK(b.uniform() == v1);
  for (int i = 0; i < 1000; ++i) {
    const auto k = a.below(7);
    CHECK(k < 7);
  }
}
