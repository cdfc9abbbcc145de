// Copyright 2026 The UFDA Simulator Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "ufda/error.hpp"
#include "ufda/numkit.hpp"

using namespace ufda;
using namespace ufda::numkit;

TEST_SUITE("numkit") {

TEST_CASE("forward: zero network gives zero output") {
  Mlp net({{3, 4, Activation::kRelu}, {4, 2, Activation::kNone}});
  const Vec y = forward(net, Vec{0.3, -1.0, 2.0});
  CHECK(y == Vec{0.0, 0.0});
}

TEST_CASE("forward: identity layer") {
  Mlp net({{2, 2, Activation::kNone}});
  auto p = net.mutable_params();
  p[net.weight_offset(0) + 0] = 1.0;
  p[net.weight_offset(0) + 3] = 1.0;
  CHECK(forward(net, Vec{1.0, 2.0}) == Vec{1.0, 2.0});
}

TEST_CASE("forward: matches the dense oracle on random nets") {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    const std::vector<std::size_t> dims{5, 7, 3};
    Mlp net = Mlp::random(dims, Activation::kRelu, Activation::kNone, rng);
    std::normal_distribution<double> nd;
    Vec x(5);
    for (double& v : x) v = nd(rng);
    const Vec a = forward(net, x);
    const Vec b = oracle::dense_forward(net, x);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
}

TEST_CASE("forward: rejects a wrong input length") {
  Mlp net({{3, 1, Activation::kNone}});
  CHECK_THROWS_AS(forward(net, Vec{1.0}), ConfigError);
}

TEST_CASE("Mlp: dims must chain") {
  CHECK_THROWS_AS(Mlp({{3, 4, Activation::kRelu}, {5, 1, Activation::kNone}}), ConfigError);
}

TEST_CASE("backward: zero upstream gradient") {
  Rng rng(3);
  const std::vector<std::size_t> dims{4, 6, 2};
  Mlp net = Mlp::random(dims, Activation::kRelu, Activation::kNone, rng);
  ForwardCache cache;
  forward(net, Vec{1, 2, 3, 4}, &cache);
  Vec g(net.num_params(), 0.0);
  const Vec gin = backward(net, cache, Vec{0.0, 0.0}, g);
  for (double v : g) CHECK(v == 0.0);
  for (double v : gin) CHECK(v == 0.0);
}

TEST_CASE("backward: linear layer weight gradient is the outer product") {
  Rng rng(5);
  const std::vector<std::size_t> dims{3, 2};
  Mlp net = Mlp::random(dims, Activation::kNone, Activation::kNone, rng);
  const Vec x{0.5, -1.5, 2.0};
  const Vec v{3.0, -2.0};
  ForwardCache cache;
  forward(net, x, &cache);
  Vec g(net.num_params(), 0.0);
  backward(net, cache, v, g);
  for (std::size_t o = 0; o < 2; ++o) {
    for (std::size_t i = 0; i < 3; ++i) CHECK(g[net.weight_offset(0) + o * 3 + i] == v[o] * x[i]);
    CHECK(g[net.bias_offset(0) + o] == v[o]);
  }
}

TEST_CASE("backward: random nets match central differences") {
  Rng rng(21);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 20; ++t) {
    const std::vector<std::size_t> dims{4, 6, 5, 3};
    Mlp net = Mlp::random(dims, Activation::kRelu, Activation::kNone, rng);
    oracle::randomize_biases(net, rng);
    Vec x(4), v(3);
    for (double& e : x) e = nd(rng);
    for (double& e : v) e = nd(rng);
    auto loss = [&] {
      const Vec y = forward(net, x);
      return dot(y, v);
    };
    ForwardCache cache;
    forward(net, x, &cache);
    Vec g(net.num_params(), 0.0);
    backward(net, cache, v, g);
    Vec num(net.num_params());
    for (std::size_t i = 0; i < num.size(); ++i) {
      const double s = net.params()[i];
      net.mutable_params()[i] = s + 1e-5;
      const double up = loss();
      net.mutable_params()[i] = s - 1e-5;
      const double down = loss();
      net.mutable_params()[i] = s;
      num[i] = (up - down) / 2e-5;
    }
    CHECK(oracle::relative_error(g, num) < 1e-4);
  }
}

TEST_CASE("backward: stale cache is rejected") {
  Rng rng(1);
  const std::vector<std::size_t> dims{2, 2};
  Mlp net = Mlp::random(dims, Activation::kNone, Activation::kNone, rng);
  ForwardCache cache;
  forward(net, Vec{1, 1}, &cache);
  net.mutable_params()[0] += 1.0;
  Vec g(net.num_params(), 0.0);
  CHECK_THROWS_AS(backward(net, cache, Vec{1, 1}, g), InvariantError);
}

TEST_CASE("sgd_step: vanilla and momentum recurrences") {
  {
    OptimizerState s(1, 0.0, 0.1);
    Vec p{1.0};
    sgd_step(p, Vec{1.0}, s, 0.1);
    CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-15));
  }
  {
    OptimizerState s(1, 0.9, 1.0);
    Vec p{0.0};
    sgd_step(p, Vec{1.0}, s, 1.0);
    CHECK(p[0] == -1.0);
    sgd_step(p, Vec{1.0}, s, 1.0);
    CHECK(s.velocity[0] == doctest::Approx(1.9).epsilon(1e-15));
    CHECK(p[0] == doctest::Approx(-2.9).epsilon(1e-15));
  }
  {
    OptimizerState s(2, 0.9, 1.0);
    Vec p{0.25, -4.0};
    sgd_step(p, Vec{0.0, 0.0}, s, 0.5);
    CHECK(p == Vec{0.25, -4.0});
  }
}

TEST_CASE("sgd_step: non-finite gradient is a divergence") {
  OptimizerState s(1, 0.9, 1.0);
  Vec p{0.0};
  CHECK_THROWS_AS(sgd_step(p, Vec{NAN}, s, 1.0), DivergenceError);
}

TEST_CASE("cosine_lr: endpoints and midpoint") {
  CHECK(cosine_lr(0, 100, 0.005) == 0.005);
  CHECK(cosine_lr(100, 100, 0.005) == 0.0);
  CHECK(cosine_lr(50, 100, 0.005) == doctest::Approx(0.0025).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_lr(101, 100, 0.005), RangeError);
  CHECK_THROWS_AS(cosine_lr(0, 0, 0.005), RangeError);
}

TEST_CASE("cosine_lr: monotone non-increasing") {
  double prev = cosine_lr(0, 257, 1.0);
  for (std::size_t s = 1; s <= 257; ++s) {
    const double cur = cosine_lr(s, 257, 1.0);
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("softmax and cross entropy") {
  const auto p = softmax(Vec{0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const auto q = softmax(Vec{0.2, -1.0, 3.0});
  const auto hot = ProbVector::onehot(3, 2);
  CHECK(cross_entropy(hot, q) == doctest::Approx(-std::log(q[2])).epsilon(1e-15));

  const ProbVector half(Vec{0.5, 0.5});
  CHECK(cross_entropy(half, half) == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
}

TEST_CASE("softmax is stable for large logits") {
  const auto p = softmax(Vec{1000.0, 1000.0, -1000.0});
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[2] == 0.0);
  CHECK(ProbVector::is_valid(p.values()));
}

TEST_CASE("cross entropy clamps log(0)") {
  const double l = cross_entropy(Vec{1.0, 0.0}, Vec{0.0, 1.0});
  CHECK(std::isfinite(l));
  CHECK(l == doctest::Approx(-std::log(kLogClamp)));
}

TEST_CASE("ProbVector validates") {
  CHECK_THROWS_AS(ProbVector(Vec{0.5, 0.6}), InvariantError);
  CHECK_THROWS_AS(ProbVector(Vec{1.5, -0.5}), InvariantError);
  CHECK_THROWS_AS(ProbVector(Vec{}), InvariantError);
  CHECK_NOTHROW(ProbVector(Vec{0.25, 0.75}));
  CHECK(ProbVector::uniform(4)[3] == 0.25);
}

TEST_CASE("l2_normalize and its backward pass") {
  const Vec v{3.0, 4.0};
  const Vec u = l2_normalize(v);
  CHECK(u[0] == doctest::Approx(0.6));
  CHECK(u[1] == doctest::Approx(0.8));
  CHECK_THROWS_AS(l2_normalize(Vec{0.0, 0.0}), DegenerateInputError);

  Rng rng(8);
  std::normal_distribution<double> nd;
  Vec x(6), w(6);
  for (double& e : x) e = nd(rng);
  for (double& e : w) e = nd(rng);
  const Vec g = l2_normalize_backward(x, w);
  Vec num(6);
  for (std::size_t i = 0; i < 6; ++i) {
    Vec a = x, b = x;
    a[i] += 1e-6;
    b[i] -= 1e-6;
    num[i] = (dot(l2_normalize(a), w) - dot(l2_normalize(b), w)) / 2e-6;
  }
  CHECK(oracle::relative_error(g, num) < 1e-6);
}

TEST_CASE("ema_update") {
  Vec dst{1.0, 0.0};
  ema_update(dst, Vec{0.0, 1.0}, 0.75);
  CHECK(dst == Vec{0.75, 0.25});
}

TEST_CASE("argmax takes the first maximum") {
  CHECK(argmax(Vec{1.0, 3.0, 3.0}) == 1);
}

}  // TEST_SUITE
