#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "sff/adam.hpp"
#include "sff/errors.hpp"
#include "sff/gradcheck.hpp"
#include "sff/ops.hpp"
#include "sff/params.hpp"
#include "sff/random.hpp"
#include "test_support.hpp"

using namespace sff;
namespace o = sff::ops;

TEST_CASE("primitive forward values") {
  CHECK(o::tanh(Tensor::vector({0.0f})).item() == 0.0f);

  auto s = o::softmax(Tensor::vector({0.0f, std::numbers::ln2_v<float>}));
  CHECK(s.data()[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  CHECK(s.data()[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-6));

  auto n = o::l2_normalize(Tensor::vector({3.0f, 4.0f}));
  CHECK(n.data()[0] == doctest::Approx(0.6).epsilon(1e-7));
  CHECK(n.data()[1] == doctest::Approx(0.8).epsilon(1e-7));

  auto m = o::matmul(Tensor::from({2, 2}, {1, 2, 3, 4}), Tensor::vector({1, 1}));
  CHECK(m.values() == std::vector<float>{3, 7});
  auto r = o::matmul(Tensor::vector({1, 1}), Tensor::from({2, 2}, {1, 2, 3, 4}));
  CHECK(r.values() == std::vector<float>{4, 6});
  CHECK(o::maximum(Tensor::vector({-1, 2}), 0.0f).values() == std::vector<float>{0, 2});
}

TEST_CASE("shape mismatches name the primitive and shapes") {
  auto a = Tensor::vector({1, 2, 3});
  auto b = Tensor::vector({1, 2});
  try {
    o::add(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    CHECK(msg.find("add") != std::string::npos);
    CHECK(msg.find("[3]") != std::string::npos);
    CHECK(msg.find("[2]") != std::string::npos);
  }
  CHECK_THROWS_AS(o::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2})), ShapeError);
  CHECK_THROWS_AS(o::softmax(Tensor::zeros({2, 2})), ShapeError);
  CHECK_THROWS_AS(o::l2_normalize(Tensor::zeros({3})), NumericError);
  CHECK_THROWS_AS(o::log(Tensor::vector({0.0f})), NumericError);
}

TEST_CASE("backward on closed-form cases") {
  SUBCASE("x squared at 3") {
    auto x = Tensor::scalar(3.0f, true);
    Tape tape;
    TapeScope scope(tape);
    auto loss = o::square(x);
    backward(tape, loss);
    CHECK(x.grad()[0] == 6.0f);
  }
  SUBCASE("tanh at 0") {
    auto x = Tensor::scalar(0.0f, true);
    Tape tape;
    TapeScope scope(tape);
    backward(tape, o::tanh(x));
    CHECK(x.grad()[0] == 1.0f);
  }
  SUBCASE("node visited once") {
    auto x = Tensor::vector({1, 2}, true);
    Tape tape;
    TapeScope scope(tape);
    auto y = o::mul(x, x);
    auto loss = o::sum(o::add(y, y));
    backward(tape, loss);
    CHECK(tape.last_backward_visits() == tape.size());
    CHECK(x.grad()[0] == doctest::Approx(4.0f));
    CHECK(x.grad()[1] == doctest::Approx(8.0f));
  }
}

TEST_CASE("backward rejects bad losses") {
  auto x = Tensor::vector({1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  auto y = o::tanh(x);
  CHECK_THROWS_AS(backward(tape, y), ShapeError);
  Tape other;
  CHECK_THROWS_AS(backward(other, o::sum(y)), std::invalid_argument);
  CHECK_THROWS_AS(backward(tape, Tensor::scalar(1.0f)), std::invalid_argument);
}

TEST_CASE("no recording without a tape or without grad-requiring inputs") {
  Tape tape;
  {
    TapeScope scope(tape);
    auto y = o::tanh(Tensor::vector({1.0f}));
    CHECK_FALSE(y.requires_grad());
    CHECK(tape.size() == 0);
    {
      NoGradScope ng;
      auto z = o::tanh(Tensor::vector({1.0f}, true));
      CHECK(tape.size() == 0);
    }
    auto w = o::tanh(Tensor::vector({1.0f}, true));
    CHECK(tape.size() == 1);
  }
  CHECK(active_tape() == nullptr);
}

TEST_CASE("gradient accumulation is additive across backward calls") {
  Rng rng(5);
  auto x = uniform_tensor({4}, 2.0f, rng, true);
  auto w = uniform_tensor({4}, 1.0f, rng);
  auto build = [&] { return o::dot(o::tanh(x), w); };

  Tape t1;
  {
    TapeScope s(t1);
    backward(t1, build());
  }
  std::vector<float> single(x.grad().begin(), x.grad().end());
  Tape t2;
  {
    TapeScope s(t2);
    backward(t2, build());
  }
  for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == single[i] + single[i]);

  // Re-running backward on the same tape also adds.
  backward(t2, t2.nodes().back().output);
  for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == doctest::Approx(3 * single[i]));
}

TEST_CASE("every primitive matches central differences") {
  Rng rng(2024);
  for (auto p : o::all_primitives()) {
    CAPTURE(o::primitive_name(p));
    for (int trial = 0; trial < 5; ++trial) {
      auto setup = test_support::primitive_case(p, rng);
      double err = grad_check(setup.fn, setup.inputs, test_support::kPrimitiveCheck);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("two-layer perceptron gradient check") {
  Rng rng(7);
  auto x = uniform_tensor({10}, 1.0f, rng);
  auto w1 = uniform_tensor({8, 10}, 0.5f, rng);
  auto b1 = uniform_tensor({8}, 0.5f, rng);
  auto w2 = uniform_tensor({3, 8}, 0.5f, rng);
  auto b2 = uniform_tensor({3}, 0.5f, rng);
  auto fn = [&] {
    auto h = o::tanh(o::add(o::matmul(w1, x), b1));
    auto logits = o::add(o::matmul(w2, h), b2);
    return o::pick(o::log_softmax(logits), 1);
  };
  std::vector<Tensor> params{w1, b1, w2, b2};
  CHECK(grad_check(fn, params, {1e-3f, 1.0}) < 1e-4);
}

TEST_CASE("grad_check on closed forms") {
  Rng rng(9);
  // Random points on a dyadic grid: x +- step, the squares and their sums
  // are all exact in float, so the difference quotient is exact too.
  auto x = Tensor::zeros({6});
  for (auto& v : x.data()) v = static_cast<float>(static_cast<int>(rng() % 257) - 128) / 64.0f;
  std::vector<Tensor> in{x};
  CHECK(grad_check([&] { return o::sum(o::square(x)); }, in, {1.0f / 64.0f, 1.0}) < 1e-6);
  CHECK(grad_check([] { return Tensor::scalar(4.0f); }, in) == 0.0);
  CHECK_THROWS_AS(grad_check([&] { return o::tanh(x); }, in), ShapeError);
  CHECK_THROWS(grad_check([&] { return o::sum(x); }, in, {0.0f, 1.0}));
}

TEST_CASE("softmax and l2_normalize invariants on random inputs") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    std::size_t n = 1 + rng() % 12;
    auto x = uniform_tensor({n}, 20.0f, rng);
    auto s = o::softmax(x);
    double total = 0.0;
    for (float v : s.data()) {
      CHECK(v >= 0.0f);
      total += v;
    }
    CHECK(std::fabs(total - 1.0) < 1e-6);
    auto u = o::l2_normalize(x);
    double norm = 0.0;
    for (float v : u.data()) norm += double(v) * v;
    CHECK(std::fabs(std::sqrt(norm) - 1.0) < 1e-6);
  }
}

TEST_CASE("adam first step matches the bias-corrected hand computation") {
  auto p = Tensor::scalar(1.0f, true);
  p.mutable_grad()[0] = 0.5f;
  AdamState st(AdamConfig{0.001f});
  std::vector<Tensor> ps{p};
  adam_step(ps, st);
  // m = 0.05, v = 0.00025, m_hat = 0.5, v_hat = 0.25 -> step = lr * 0.5 / 0.5.
  CHECK(p.item() == doctest::Approx(0.999).epsilon(1e-7));
  CHECK(st.step == 1);
  CHECK(p.grad()[0] == 0.5f);

  adam_step(ps, st);
  CHECK(st.step == 2);
  CHECK(st.first_moment[0][0] == doctest::Approx(0.095).epsilon(1e-6));
  CHECK(st.second_moment[0][0] == doctest::Approx(0.00049975).epsilon(1e-6));
  // m_hat = 0.095 / 0.19 = 0.5, v_hat = 0.00049975 / 0.001999 = 0.25.
  CHECK(p.item() == doctest::Approx(0.998).epsilon(1e-6));
}

TEST_CASE("adam is an identity under zero gradients") {
  Rng rng(3);
  auto p = uniform_tensor({5}, 1.0f, rng, true);
  auto before = p.values();
  p.zero_grad();
  AdamState st;
  std::vector<Tensor> ps{p};
  for (int i = 0; i < 10; ++i) adam_step(ps, st);
  CHECK(p.values() == before);
  CHECK(st.step == 10);
}

TEST_CASE("adam rejects parameters without gradients") {
  auto p = Tensor::scalar(1.0f, true);
  AdamState st;
  std::vector<Tensor> ps{p};
  CHECK_THROWS_AS(adam_step(ps, st), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<NamedTensor> items;
    const int count = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < count; ++i) {
      Shape shape;
      const std::size_t rank = 1 + rng() % 3;
      for (std::size_t r = 0; r < rank; ++r) shape.push_back(1 + rng() % 5);
      auto t = normal_tensor(shape, 3.0f, rng);
      items.push_back({"layer" + std::to_string(i) + ".w\xc3\xa9", t});
    }
    std::stringstream ss;
    write_checkpoint(ss, items);
    auto back = read_checkpoint(ss);
    REQUIRE(back.size() == items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      CHECK(back[i].name == items[i].name);
      CHECK(back[i].tensor.shape() == items[i].tensor.shape());
      CHECK(test_support::bit_equal(back[i].tensor.data(), items[i].tensor.data()));
    }
  }
}

TEST_CASE("checkpoint header layout") {
  std::stringstream ss;
  write_checkpoint(ss, {{"w", Tensor::from({1, 2}, {1.0f, -2.0f})}});
  const std::string bytes = ss.str();
  const std::string expected("SSKP\x01\x00\x00\x00"
                             "\x01\x00\x00\x00w"
                             "\x02\x00\x00\x00\x01\x00\x00\x00\x02\x00\x00\x00"
                             "\x00\x00\x80\x3f\x00\x00\x00\xc0",
                             4 + 4 + 5 + 12 + 8);
  CHECK(bytes == expected);
}

TEST_CASE("checkpoint rejects corruption") {
  std::stringstream bad("XXXX\x01\x00\x00\x00");
  CHECK_THROWS_AS(read_checkpoint(bad), DataError);

  std::stringstream ss;
  write_checkpoint(ss, {{"w", Tensor::from({2, 2}, {1, 2, 3, 4})}});
  std::string bytes = ss.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(truncated), DataError);
}

TEST_CASE("restore_checkpoint names both shapes on mismatch") {
  ParameterSet params;
  params.add("w", Tensor::zeros({3, 4}));
  std::vector<NamedTensor> saved{{"w", Tensor::zeros({3, 5})}};
  try {
    restore_checkpoint(saved, params);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[3, 5]") != std::string::npos);
    CHECK(msg.find("[3, 4]") != std::string::npos);
  }
  std::vector<NamedTensor> ok{{"w", Tensor::from({3, 4}, std::vector<float>(12, 2.0f))}};
  restore_checkpoint(ok, params);
  CHECK(params.find("w").data()[7] == 2.0f);
}

TEST_CASE("derived streams are independent and reproducible") {
  CHECK(derive_seed(1, "init") == derive_seed(1, "init"));
  CHECK(derive_seed(1, "init") != derive_seed(1, "pairs"));
  CHECK(derive_seed(1, "init") != derive_seed(2, "init"));
}
