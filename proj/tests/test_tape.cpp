#include <doctest.h>

#include <cmath>
#include <string>

#include "icvae/error.hpp"
#include "icvae/gradcheck.hpp"
#include "icvae/model.hpp"
#include "icvae/objective.hpp"
#include "icvae/rng.hpp"
#include "icvae/tape.hpp"

using namespace icvae;

TEST_CASE("forward ops on small literals") {
  Tape t;
  Tensor m = t.matmul(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{1}, {1}}));
  CHECK(m.shape() == Shape{2, 1});
  CHECK(m.at(0) == 3);
  CHECK(m.at(1) == 7);

  Tensor s = t.softmax_rows(Tensor::matrix({{0, 0}}));
  CHECK(s.at(0) == doctest::Approx(0.5));
  CHECK(s.at(1) == doctest::Approx(0.5));

  Tensor r = t.relu(Tensor({2}, {-1, 2}));
  CHECK(r.at(0) == 0);
  CHECK(r.at(1) == 2);

  Tensor c = t.concat_cols(Tensor::matrix({{1}, {2}}), Tensor::matrix({{3, 4}, {5, 6}}));
  CHECK(c.shape() == Shape{2, 3});
  CHECK(c.at(1, 2) == 6);
  Tensor sl = t.slice_cols(c, 1, 3);
  CHECK(sl.at(0, 0) == 3);
  CHECK(t.sum_rows(c).at(1) == 13);
  CHECK(t.mean(c).item() == doctest::Approx(21.0 / 6.0));
  CHECK(t.add_bias(Tensor::matrix({{1, 2}, {3, 4}}), Tensor({2}, {10, 20})).at(1, 1) == 24);
  CHECK(t.size() == 0);  // nothing requires grad, nothing recorded
}

TEST_CASE("shape mismatch names the op and both shapes") {
  Tape t;
  try {
    t.add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("add") != std::string::npos);
    CHECK(msg.find("(2, 3)") != std::string::npos);
    CHECK(msg.find("(3, 2)") != std::string::npos);
  }
  CHECK_THROWS_AS(t.matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
  CHECK_THROWS_AS(t.slice_cols(Tensor::zeros({2, 3}), 2, 5), ShapeError);
  CHECK_THROWS_AS(t.concat_cols(Tensor::zeros({2, 3}), Tensor::zeros({3, 3})), ShapeError);
}

TEST_CASE("domain violations raise instead of producing NaN") {
  Tape t;
  CHECK_THROWS_AS(t.log(Tensor({2}, {1.0, 0.0})), DomainError);
  CHECK_THROWS_AS(t.log(Tensor({1}, {-3.0})), DomainError);
  CHECK_THROWS_AS(t.exp(Tensor({1}, {1000.0})), DomainError);
}

TEST_CASE("backward examples") {
  SUBCASE("sum of squares") {
    Tape t;
    Tensor x({1}, {3}, true);
    t.backward(t.sum(t.square(x)));
    CHECK(x.grad()[0] == doctest::Approx(6));
  }
  SUBCASE("fan-out accumulates") {
    Tape t;
    Tensor x({1}, {1}, true);
    t.backward(t.sum(t.add(x, x)));
    CHECK(x.grad()[0] == doctest::Approx(2));
  }
  SUBCASE("sigmoid at zero") {
    Tape t;
    Tensor x({1}, {0}, true);
    t.backward(t.sum(t.sigmoid(x)));
    CHECK(x.grad()[0] == doctest::Approx(0.25));
  }
}

TEST_CASE("backward errors and tape reuse") {
  Tape t;
  Tensor x({2}, {1, 2}, true);
  CHECK_THROWS_AS(t.backward(Tensor::scalar(1.0)), ValueError);  // nothing recorded
  Tensor y = t.square(x);
  CHECK_THROWS_AS(t.backward(y), ShapeError);
  Tape other;
  Tensor z = other.sum(other.square(x));
  CHECK_THROWS_AS(t.backward(z), ValueError);

  Tensor root = t.sum(y);
  t.backward(root);
  CHECK(t.size() == 0);
  CHECK(x.grad()[1] == doctest::Approx(4));
  // the cleared tape records the next pass
  t.backward(t.sum(t.scalar_mul(x, 3.0)));
  CHECK(x.grad()[1] == doctest::Approx(7));
}

TEST_CASE("non-recording tape records nothing") {
  Tape t(false);
  Tensor x({2}, {1, 2}, true);
  Tensor y = t.sum(t.square(x));
  CHECK(t.size() == 0);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("detach cuts the gradient path") {
  Tape t;
  Tensor x({2}, {1, 2}, true);
  t.backward(t.sum(t.mul(x, t.detach(x))));
  CHECK(x.grad()[0] == doctest::Approx(1));
  CHECK(x.grad()[1] == doctest::Approx(2));
}

TEST_CASE("softmax rows lie on the simplex even for large logits") {
  Rng rng(5);
  Tape t;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits = rng.normal_tensor({4, 7});
    for (auto& v : logits.mutable_data()) v *= 300.0;
    Tensor s = t.softmax_rows(logits);
    Tensor ls = t.log_softmax_rows(logits);
    for (std::size_t r = 0; r < 4; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        CHECK(s.at(r, c) >= 0.0);
        CHECK(std::isfinite(ls.at(r, c)));
        sum += s.at(r, c);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  Tensor moderate = t.softmax_rows(Tensor::matrix({{1, -2, 0.5}}));
  for (double v : moderate.data()) CHECK(v > 0.0);
}

TEST_CASE("independent subgraphs get the same gradients as separately") {
  Rng rng(9);
  Tensor a = rng.normal_tensor({3});
  Tensor b = rng.normal_tensor({4});
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  Tape t;
  t.backward(t.add(t.sum(t.square(a)), t.sum(t.exp(b))));
  const std::vector<double> ga(a.grad().begin(), a.grad().end());
  const std::vector<double> gb(b.grad().begin(), b.grad().end());

  Tensor a2 = a.clone();
  Tensor b2 = b.clone();
  a2.set_requires_grad(true);
  b2.set_requires_grad(true);
  t.backward(t.sum(t.square(a2)));
  t.backward(t.sum(t.exp(b2)));
  for (std::size_t i = 0; i < 3; ++i) CHECK(a2.grad()[i] == ga[i]);
  for (std::size_t i = 0; i < 4; ++i) CHECK(b2.grad()[i] == gb[i]);
}

TEST_CASE("finite difference check") {
  Rng rng(1);
  Tensor x = rng.uniform_tensor({8});
  for (auto& v : x.mutable_data()) v = 2 * v - 1;

  SUBCASE("sum of squares") {
    const double err = finite_difference_check([](Tape& t, const Tensor& v) { return t.sum(t.square(v)); }, x);
    CHECK(err <= 1e-6);
  }
  SUBCASE("constant function") {
    const double err = finite_difference_check([](Tape&, const Tensor&) { return Tensor::scalar(3.0); }, x);
    CHECK(err == 0.0);
  }
  SUBCASE("categorical KL of softmax logits") {
    Tensor logits = rng.normal_tensor({5, 10});
    const double err = finite_difference_check(
        [](Tape& t, const Tensor& l) { return categorical_kl(t, categorical_posterior(t, l)); }, logits);
    CHECK(err <= 1e-4);
  }
  SUBCASE("non-finite value") {
    CHECK_THROWS_AS(finite_difference_check(
                        [](Tape& t, const Tensor& v) { return t.scalar_mul(t.sum(v), std::nan("")); }, x),
                    DomainError);
  }
  SUBCASE("step outside the allowed range") {
    auto f = [](Tape& t, const Tensor& v) { return t.sum(v); };
    CHECK_THROWS_AS(finite_difference_check(f, x, 1e-3), ValueError);
    CHECK_THROWS_AS(finite_difference_check(f, x, 1e-8), ValueError);
  }
}
