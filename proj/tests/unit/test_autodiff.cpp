#include <doctest.h>

#include <cmath>
#include <map>

#include "../support/gradcheck.hpp"
#include "adsm/errors.hpp"

using namespace adsm;
using adsm::testing::run_gradchecks;

TEST_CASE("every op passes a finite-difference check") {
  const auto results = run_gradchecks(120, 11);
  std::map<std::string, double> worst;
  for (const auto& r : results) worst[r.name] = std::max(worst[r.name], r.rel_error);
  CHECK(worst.size() == 24);
  for (const auto& [name, err] : worst) {
    INFO(name);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("parameter gradients accumulate across uses") {
  Parameter w{"w", Tensor::from({2.0, -1.0})};
  Tape tape;
  Var x = param(w, &tape);
  Var loss = sum(add(mul(x, x), scale(x, 3.0)));
  auto g = tape.grad(loss, std::span<const Parameter>(&w, 1));
  CHECK(g[0][0] == doctest::Approx(2 * 2.0 + 3.0));
  CHECK(g[0][1] == doctest::Approx(2 * -1.0 + 3.0));
}

TEST_CASE("unused parameters receive zero gradient") {
  std::vector<Parameter> ps{{"a", Tensor::from({1.0})}, {"b", Tensor::from({5.0, 6.0})}};
  Tape tape;
  Var loss = sum(mul(param(ps[0], &tape), param(ps[0], &tape)));
  auto g = tape.grad(loss, std::span<const Parameter>(ps));
  CHECK(g[0][0] == doctest::Approx(2.0));
  CHECK(g[1] == Tensor::zeros({2}));
}

TEST_CASE("backward visits each recorded node once") {
  Tape tape;
  Var x = tape.variable(Tensor::from({0.5, 0.25}));
  Var y = x;
  for (int i = 0; i < 30; ++i) y = add(y, mul(y, x));  // shared subexpressions
  const Var loss = sum(y);
  const std::size_t recorded = tape.size();
  tape.backward(loss);
  CHECK(tape.last_backward_visits() == recorded);
}

TEST_CASE("detached values record nothing") {
  Var a = Var::constant(Tensor::from({1, 2}));
  Var b = add(a, a);
  CHECK(b.tape() == nullptr);
  CHECK(b.value() == Tensor::from({2, 4}));
}

TEST_CASE("shape contracts") {
  Var a = Var::constant(Tensor(Shape{2, 3}));
  Var b = Var::constant(Tensor(Shape{3, 2}));
  CHECK_THROWS_AS(add(a, b), ContractViolation);
  CHECK_THROWS_AS(matmul(a, a), ContractViolation);
  CHECK(matmul(a, b).shape() == Shape{2, 2});
  CHECK_THROWS_AS(reshape(a, {4}), ContractViolation);
}

TEST_CASE("non-finite results raise a numeric fault") {
  Var a = Var::constant(Tensor::from({-1.0}));
  CHECK_THROWS_AS(log(a), NumericFault);
  CHECK_THROWS_AS(exp(Var::constant(Tensor::from({1000.0}))), NumericFault);
}

TEST_CASE("softmax rows sum to one and layer norm standardizes") {
  Var x = Var::constant(Tensor(Shape{2, 4}, std::vector<double>{1, 2, 3, 4, -5, 0, 5, 10}));
  Tensor s = softmax(x).value();
  CHECK(s[0] + s[1] + s[2] + s[3] == doctest::Approx(1.0));
  Tensor n = layer_norm(x).value();
  double m = 0, v = 0;
  for (int i = 4; i < 8; ++i) m += n[i] / 4;
  for (int i = 4; i < 8; ++i) v += (n[i] - m) * (n[i] - m) / 4;
  CHECK(m == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("gelu matches the erf form") {
  Tensor g = gelu(Var::constant(Tensor::from({-1.0, 0.0, 2.0}))).value();
  for (int i = 0; i < 3; ++i) {
    const double x = std::vector<double>{-1.0, 0.0, 2.0}[i];
    CHECK(g[i] == doctest::Approx(0.5 * x * (1 + std::erf(x / std::sqrt(2.0)))));
  }
}
