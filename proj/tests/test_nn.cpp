/*
 * Copyright 2026 The mmcae Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include "mmcae/nn/adam.hpp"
#include "mmcae/nn/gradcheck.hpp"
#include "mmcae/nn/stack.hpp"

#include <cmath>
#include <string>

using namespace mmcae;
using namespace mmcae::nn;

namespace {

Batch<double> random_batch(Index n, Index c, Index l, std::uint64_t seed) {
  Rng rng(seed);
  Batch<double> b(n, c, l);
  for (Index i = 0; i < b.data.size(); ++i) b.data.data()[i] = rng.uniform(-1.0, 1.0);
  return b;
}

struct Fixture {
  ParameterStore<double> store;
  Stack stack;
  Fixture(Shape in, std::vector<LayerSpec> layers, std::uint64_t seed = 3)
      : stack("s", in, std::move(layers), store) {
    Rng rng(seed);
    stack.initialize(store, rng);
    // Non-zero biases so bias paths are exercised.
    for (auto& b : store)
      if (b.name.ends_with(".bias"))
        for (Index i = 0; i < b.value.size(); ++i) b.value.data()[i] = rng.uniform(-0.2, 0.2);
    store.touch();
  }
};

}  // namespace

TEST_CASE("shape algebra: valid conv, pool, transposed conv, unpool") {
  CHECK(output_shape(LayerSpec::conv1d(11, 1, 1, 10), {1, 4800}) == Shape{10, 4790});
  CHECK(output_shape(LayerSpec::maxpool1d(2), {10, 4790}) == Shape{10, 2395});
  CHECK(output_shape(LayerSpec::maxpool1d(2), {100, 145}) == Shape{100, 72});
  CHECK(output_shape(LayerSpec::deconv1d(70, 1, 128, 100), {128, 1}) == Shape{100, 70});
  CHECK(output_shape(LayerSpec::unpool1d(2), {100, 70}) == Shape{100, 140});
  CHECK(output_shape(LayerSpec::conv1d(16, 8, 1, 8), {1, 4800}) == Shape{8, 599});
  CHECK(output_shape(LayerSpec::deconv1d(24, 8, 8, 1), {8, 598}) == Shape{1, 4800});
  CHECK(output_shape(LayerSpec::flatten(), {128, 1}) == Shape{128, 1});
  CHECK(output_shape(LayerSpec::flatten(), {4, 3}) == Shape{12, 1});
  CHECK(output_shape(LayerSpec::reshape(4, 3), {12, 1}) == Shape{4, 3});

  CHECK_THROWS_AS(output_shape(LayerSpec::conv1d(11, 1, 2, 10), {1, 4800}), ShapeError);
  CHECK_THROWS_AS(output_shape(LayerSpec::conv1d(11, 1, 1, 10), {1, 5}), ShapeError);
  CHECK_THROWS_AS(output_shape(LayerSpec::dense(4, 2), {4, 2}), ShapeError);
  CHECK_THROWS_AS(validate(LayerSpec::conv1d(0, 1, 1, 1)), ShapeError);
  CHECK_THROWS_AS(validate(LayerSpec::conv1d(3, 0, 1, 1)), ShapeError);
}

TEST_CASE("stack construction names the first violating layer") {
  ParameterStore<double> store;
  try {
    Stack s("enc", {1, 64}, {LayerSpec::conv1d(5, 1, 1, 3), LayerSpec::relu(), LayerSpec::conv1d(4, 1, 2, 4)}, store);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
  }
}

TEST_CASE("forward: conv then pool lengths, relu zeroes negatives, input mismatch rejected") {
  Fixture f({1, 4800}, {LayerSpec::conv1d(11, 1, 1, 10), LayerSpec::relu(), LayerSpec::maxpool1d(2)});
  const auto tr = forward(f.stack, f.store, random_batch(1, 1, 4800, 1));
  CHECK(tr.activations[1].shape() == Shape{10, 4790});
  CHECK(tr.output().shape() == Shape{10, 2395});

  Batch<double> neg(2, 3, 5);
  neg.data.setConstant(-0.5);
  CHECK(relu_forward(neg).data.isZero(0.0));

  CHECK_THROWS_AS(forward(f.stack, f.store, random_batch(1, 1, 4799, 1)), ShapeError);
}

TEST_CASE("forward is pure: repeated calls are bit-identical") {
  Fixture f({2, 20}, {LayerSpec::conv1d(3, 1, 2, 4), LayerSpec::relu(), LayerSpec::maxpool1d(2),
                      LayerSpec::flatten(), LayerSpec::dense(36, 5)});
  const auto x = random_batch(3, 2, 20, 9);
  const auto a = forward(f.stack, f.store, x).output().data;
  const auto b = forward(f.stack, f.store, x).output().data;
  CHECK((a.array() == b.array()).all());
}

TEST_CASE("dense bias gradient equals output gradient summed over the batch") {
  Fixture f({3, 1}, {LayerSpec::dense(3, 2)});
  const auto x = random_batch(4, 3, 1, 2);
  const auto g = random_batch(4, 2, 1, 5);
  f.store.zero_grad();
  const auto tr = forward(f.stack, f.store, x);
  backward(f.stack, f.store, tr, g);
  const auto& db = f.store[f.stack.bias_block(0)].grad;
  CHECK((db.col(0) - g.data.rowwise().sum()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("max-pool backward routes to argmax and conserves the gradient sum") {
  const auto x = random_batch(2, 3, 9, 11);
  ArgmaxMatrix arg;
  const auto y = maxpool1d_forward(x, 2, 4, arg);
  const auto g = random_batch(2, 3, 4, 12);
  const auto dx = maxpool1d_backward(x, g, 2, arg);
  CHECK(std::abs(dx.data.sum() - g.data.sum()) < 1e-12);
  for (Index n = 0; n < 2; ++n)
    for (Index c = 0; c < 3; ++c)
      for (Index t = 0; t < 4; ++t) {
        const Index base = n * 9 + 2 * t;
        const Index hit = x.data(c, base) >= x.data(c, base + 1) ? base : base + 1;
        const Index miss = hit == base ? base + 1 : base;
        CHECK(dx.data(c, hit) == g.data(c, n * 4 + t));
        CHECK(dx.data(c, miss) == 0.0);
        CHECK(y.data(c, n * 4 + t) == x.data(c, hit));
      }
  // The trailing odd sample never receives gradient.
  CHECK(dx.data.col(8).isZero(0.0));
}

TEST_CASE("finite-difference check per layer kind (8-element instances)") {
  struct Case {
    const char* name;
    Shape in;
    std::vector<LayerSpec> layers;
  };
  const std::vector<Case> cases = {
      {"conv1d", {1, 8}, {LayerSpec::conv1d(3, 1, 1, 2)}},
      {"conv1d strided", {2, 8}, {LayerSpec::conv1d(3, 2, 2, 2)}},
      {"deconv1d", {2, 4}, {LayerSpec::deconv1d(3, 1, 2, 2)}},
      {"deconv1d strided", {1, 8}, {LayerSpec::deconv1d(4, 2, 1, 2)}},
      {"dense", {8, 1}, {LayerSpec::dense(8, 3)}},
      {"relu", {8, 1}, {LayerSpec::dense(8, 8), LayerSpec::relu()}},
      {"maxpool1d", {2, 8}, {LayerSpec::conv1d(1, 1, 2, 2), LayerSpec::maxpool1d(2)}},
      {"unpool1d", {2, 4}, {LayerSpec::conv1d(1, 1, 2, 2), LayerSpec::unpool1d(2)}},
      {"flatten/reshape", {2, 4}, {LayerSpec::flatten(), LayerSpec::dense(8, 8), LayerSpec::reshape(2, 4),
                                   LayerSpec::conv1d(2, 1, 2, 1)}},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    Fixture f(c.in, c.layers, 21);
    const auto x = random_batch(2, c.in.channels, c.in.length, 33);
    const auto report = check_gradients(f.stack, f.store, x, 1e-3, 7);
    for (const auto& b : report.blocks) {
      CAPTURE(b.name);
      CHECK(b.max_relative_error < 1e-3);
    }
    CHECK(report.passed);
    CHECK(check_input_gradient(f.stack, f.store, x, 7) < 1e-3);
  }
}

TEST_CASE("gradient checker: passes a miniature encoder, flags a tampered block, exact on identity") {
  Fixture f({1, 64}, {LayerSpec::conv1d(5, 1, 1, 3), LayerSpec::relu(), LayerSpec::maxpool1d(2),
                      LayerSpec::conv1d(4, 1, 3, 4), LayerSpec::relu(), LayerSpec::maxpool1d(2),
                      LayerSpec::conv1d(13, 1, 4, 4), LayerSpec::flatten()});
  const auto x = random_batch(2, 1, 64, 4);
  const auto ok = check_gradients(f.stack, f.store, x, 1e-3, 5);
  CHECK(ok.passed);

  const std::string target = "s.3.weight";
  const auto bad = check_gradients(f.stack, f.store, x, 1e-3, 5,
                                   [&](ParameterStore<double>& s) { s[s.find(target)].grad *= 1.01; });
  CHECK_FALSE(bad.passed);
  for (const auto& b : bad.blocks) {
    CAPTURE(b.name);
    CHECK(b.passed == (b.name != target));
  }

  ParameterStore<double> store;
  Stack id("id", {4, 1}, {LayerSpec::dense(4, 4)}, store);
  store[id.weight_block(0)].value.setIdentity();
  store.touch();
  const auto exact = check_gradients(id, store, random_batch(3, 4, 1, 8), 1e-3, 2);
  for (const auto& b : exact.blocks) CHECK(b.max_relative_error < 1e-8);
}

TEST_CASE("backward rejects stale or foreign traces") {
  Fixture f({3, 1}, {LayerSpec::dense(3, 2)});
  const auto x = random_batch(2, 3, 1, 1);
  const auto tr = forward(f.stack, f.store, x);
  const auto g = random_batch(2, 2, 1, 2);
  f.store.touch();
  CHECK_THROWS_AS(backward(f.stack, f.store, tr, g), Error);

  Trace<double> empty;
  CHECK_THROWS_AS(backward(f.stack, f.store, empty, g), Error);
}

TEST_CASE("adam: zero gradient leaves parameters, bookkeeping advances") {
  ParameterStore<double> store;
  store.add("w", 2, 2);
  store[0].value << 1, -2, 3, 4;
  const MatrixXr before = store[0].value;
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  adam_update(store, cfg);
  CHECK((store[0].value.array() == before.array()).all());
  CHECK(store.step() == 1);
}

TEST_CASE("adam: one-step hand calculation") {
  ParameterStore<double> store;
  store.add("w", 1, 3);
  store[0].value << 0.5, -1.0, 2.0;
  store[0].grad << 0.2, -3.0, 1e-3;
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 0.0;
  adam_update(store, cfg);
  // m_hat = g, v_hat = g^2 after bias correction: step = lr * g / (|g| + eps).
  const double expect[] = {0.5 - 0.01 * 0.2 / (0.2 + 1e-8), -1.0 + 0.01 * 3.0 / (3.0 + 1e-8),
                           2.0 - 0.01 * 1e-3 / (1e-3 + 1e-8)};
  for (int i = 0; i < 3; ++i) CHECK(store[0].value(0, i) == doctest::Approx(expect[i]).epsilon(1e-14));
}

TEST_CASE("adam: two identical gradients follow the moment recursion") {
  const double g = 0.7, lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8, p0 = 1.25;
  // Scripted oracle.
  double m = 0, v = 0, p = p0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    p -= lr * mh / (std::sqrt(vh) + eps);
  }
  ParameterStore<double> store;
  store.add("w", 1, 1);
  store[0].value(0, 0) = p0;
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  for (int t = 0; t < 2; ++t) {
    store[0].grad(0, 0) = g;
    adam_update(store, cfg);
  }
  CHECK(std::abs(store[0].value(0, 0) - p) < 1e-10);
  CHECK(store.step() == 2);
}

TEST_CASE("adam: decoupled weight decay, zero learning rate, non-finite rejection") {
  ParameterStore<double> store;
  store.add("layer.weight", 1, 2);
  store[0].value << 2.0, -4.0;
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.5;
  adam_update(store, cfg);  // zero gradient: only decay acts
  CHECK(store[0].value(0, 0) == doctest::Approx(2.0 * (1 - 0.05)));
  CHECK(store[0].value(0, 1) == doctest::Approx(-4.0 * (1 - 0.05)));

  const MatrixXr before = store[0].value;
  cfg.learning_rate = 0.0;
  store[0].grad << 1.0, 2.0;
  adam_update(store, cfg);
  CHECK((store[0].value.array() == before.array()).all());

  store[0].grad(0, 1) = std::nan("");
  try {
    adam_update(store, cfg);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("layer.weight") != std::string::npos);
  }
  CHECK_THROWS_AS(validate(AdamConfig{1e-3, 1.0, 0.999, 1e-8, 0.0}), Error);
}
