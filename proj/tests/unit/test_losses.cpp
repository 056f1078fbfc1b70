// Copyright 2026  The smoothnce Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "sim/losses.hpp"
#include "sim/ops.hpp"
#include "sim/optim.hpp"

using namespace sim;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  RngStream r(seed, 7);
  Tensor t(std::move(shape));
  for (auto &x : t.data()) x = static_cast<float>(r.uniform(lo, hi));
  return t;
}

}  // namespace

TEST_CASE("kl of a few Gaussians") {
  // 1/2 (4 - 1 - ln 4)
  CHECK(kl_standard_normal(Tensor({1, 1}, 0.0f), Tensor({1, 1}, 2.0f)) ==
        doctest::Approx(0.8068528194).epsilon(1e-6));
  CHECK(kl_standard_normal(Tensor({1, 2}, 1.0f), Tensor({1, 2}, 1.0f)) == doctest::Approx(1.0));
  CHECK(kl_standard_normal(Tensor({3, 4}, 0.0f), Tensor({3, 4}, 1.0f)) == 0.0);
  // Averaged over positions, summed over the last axis.
  Tensor mu({2, 1}, std::vector<float>{0.0f, 2.0f});
  CHECK(kl_standard_normal(mu, Tensor({2, 1}, 1.0f)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(kl_standard_normal(Tensor({1, 1}, 0.0f), Tensor({1, 1}, 0.0f)), NumericError);
}

TEST_CASE("kl gradient") {
  Parameter mu = make_parameter("mu", random_tensor({2, 3, 4}, 1));
  Parameter sg = make_parameter("sigma", random_tensor({2, 3, 4}, 2, 0.5, 2.0));
  auto loss = [&] {
    NoGradGuard g;
    return static_cast<double>(kl_standard_normal(mu.var, sg.var).item());
  };
  auto grad = [&] {
    zero_grad({&mu, &sg});
    backward(kl_standard_normal(mu.var, sg.var));
  };
  CHECK(fd_check(loss, grad, {&mu, &sg}, 1e-2, 1e-2).flagged.empty());
}

TEST_CASE("negatives exclude the positive and cover the batch uniformly") {
  RngStream rng(5, 0);
  const std::size_t batch = 3, frames = 12, steps = 2;
  const CandidateSet cs = draw_negatives(batch, frames, steps, 15, rng);
  CHECK(cs.total_rows() == batch * (frames - 1) + batch * (frames - 2));
  std::vector<double> count(batch * frames, 0.0);
  std::size_t draws = 0;
  for (std::size_t k = 1; k <= steps; ++k)
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t + k < frames; ++t) {
        const auto c = cs.at(k, b, t);
        REQUIRE(c.size() == 16);
        CHECK(c[0] == b * frames + t + k);
        for (std::size_t n = 1; n < c.size(); ++n) {
          CHECK(c[n] != c[0]);
          ++count[c[n]];
          ++draws;
        }
      }
  // Drawn from B*T - 1 frames; every frame is excluded as positive in a
  // different number of rows, so compare each cell with its own expectation.
  std::vector<double> expect(batch * frames, 0.0);
  for (std::size_t k = 1; k <= steps; ++k)
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t + k < frames; ++t)
        for (std::size_t f = 0; f < batch * frames; ++f)
          if (f != b * frames + t + k) expect[f] += 15.0 / static_cast<double>(batch * frames - 1);
  double chi2 = 0.0;
  for (std::size_t f = 0; f < count.size(); ++f) chi2 += (count[f] - expect[f]) * (count[f] - expect[f]) / expect[f];
  // 35 dof, 99.9% quantile 66.6.
  CHECK(chi2 < 66.6);
  CHECK(draws == cs.total_rows() * 15);
  CHECK_THROWS(draw_negatives(1, 3, 3, 15, rng));
}

TEST_CASE("info_nce equals an enumerated softmax") {
  // T=4, K=1, D=2, N=3.
  const Tensor zt = random_tensor({1, 4, 2}, 3);
  const Tensor wt = random_tensor({2, 2}, 4);
  RngStream rng(9, 0);
  const CandidateSet cs = draw_negatives(1, 4, 1, 2, rng);
  const Var z = Var::constant(zt);
  const std::vector<Var> w{Var::constant(wt)};
  const NceResult r = info_nce(z, z, w, cs);

  double expect = 0.0;
  for (std::size_t t = 0; t < 3; ++t) {
    const auto c = cs.at(1, 0, t);
    std::vector<double> logit;
    for (auto f : c) {
      double s = 0.0;
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) s += zt.at(0, f, i) * wt.at(i, j) * zt.at(0, t, j);
      logit.push_back(s);
      CHECK(score(std::span<const float>(&zt.data()[f * 2], 2), std::span<const float>(&zt.data()[t * 2], 2), wt) ==
            doctest::Approx(s));
    }
    double den = 0.0;
    for (double l : logit) den += std::exp(l);
    expect += -std::log(std::exp(logit[0]) / den);
  }
  expect /= 3.0;
  CHECK(r.value == doctest::Approx(expect).epsilon(1e-6));
  CHECK(r.loss.item() == doctest::Approx(expect).epsilon(1e-5));
  REQUIRE(r.per_k.size() == 1);
  CHECK(r.per_k[0] == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("info_nce from logits and the mutual-information bound") {
  CHECK(info_nce_from_logits(Tensor({5, 16}, 0.0f)) == doctest::Approx(std::log(16.0)));
  Tensor confident({2, 4}, 0.0f);
  confident.at(0, 0) = 50.0f;
  confident.at(1, 0) = 50.0f;
  CHECK(info_nce_from_logits(confident) < 1e-12);
  CHECK(mi_lower_bound(std::log(16.0), 16) == doctest::Approx(0.0));
  CHECK(mi_lower_bound(0.0, 16) == doctest::Approx(std::log(16.0)));
  Tensor logits({2, 3}, std::vector<float>{0, 0, 0, 1, 2, 3});
  const std::vector<int> y{1, 2};
  const double row1 = -(3.0 - std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
  CHECK(cross_entropy(logits, y) == doctest::Approx((std::log(3.0) + row1) / 2.0));
}

TEST_CASE("info_nce gradient") {
  Parameter z = make_parameter("z", random_tensor({2, 6, 3}, 10));
  Parameter w1 = make_parameter("w1", random_tensor({3, 3}, 11));
  Parameter w2 = make_parameter("w2", random_tensor({3, 3}, 12));
  RngStream rng(2, 0);
  const CandidateSet cs = draw_negatives(2, 6, 2, 4, rng);
  auto build = [&] {
    const std::vector<Var> w{w1.var, w2.var};
    return info_nce(z.var, z.var, w, cs).loss;
  };
  auto loss = [&] {
    NoGradGuard g;
    return static_cast<double>(build().item());
  };
  auto grad = [&] {
    zero_grad({&z, &w1, &w2});
    backward(build());
  };
  CHECK(fd_check(loss, grad, {&z, &w1, &w2}, 1e-2, 2e-2).flagged.empty());
}

TEST_CASE("smooth loss adds beta times kl") {
  LatentFrames lf;
  lf.mu = Var::constant(random_tensor({1, 8, 2}, 13));
  lf.sigma = Var::constant(random_tensor({1, 8, 2}, 14, 0.5, 1.5));
  lf.z = lf.mu;
  lf.module = 1;
  const std::vector<Var> w{Var::constant(random_tensor({2, 2}, 15))};
  RngStream rng(1, 1);
  const CandidateSet cs = draw_negatives(1, 8, 1, 15, rng);
  const LossBreakdown out = smooth_info_nce(lf, w, 0.5, cs);
  const double kl = kl_standard_normal(lf.mu.value(), lf.sigma.value());
  CHECK(out.kl == doctest::Approx(kl));
  CHECK(out.kl_per_dim == doctest::Approx(kl / 2.0));
  CHECK(out.total_value == doctest::Approx(out.nce + 0.5 * kl));
  CHECK(out.total.item() == doctest::Approx(out.total_value).epsilon(1e-5));
  LatentFrames plain;
  plain.z = lf.z;
  CHECK_THROWS(smooth_info_nce(plain, w, 0.5, cs));
}

TEST_CASE("kl gradient is tight") {
  Parameter mu = make_parameter("mu", random_tensor({1, 4, 3}, 21));
  Parameter sg = make_parameter("sigma", random_tensor({1, 4, 3}, 22, 0.8, 1.6));
  zero_grad({&mu, &sg});
  backward(kl_standard_normal(mu.var, sg.var));

  // Double-precision oracle, differenced per coordinate.
  std::vector<double> m(mu.value().data().begin(), mu.value().data().end());
  std::vector<double> s(sg.value().data().begin(), sg.value().data().end());
  auto oracle = [&] {
    double acc = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i)
      acc += 0.5 * (m[i] * m[i] + s[i] * s[i] - 1.0 - std::log(s[i] * s[i]));
    return acc / 4.0;
  };
  const double h = 1e-5;
  double worst = 0.0;
  for (auto [vals, grad] : {std::pair{&m, mu.grad()}, std::pair{&s, sg.grad()}}) {
    for (std::size_t i = 0; i < vals->size(); ++i) {
      const double keep = (*vals)[i];
      (*vals)[i] = keep + h;
      const double up = oracle();
      (*vals)[i] = keep - h;
      const double down = oracle();
      (*vals)[i] = keep;
      const double num = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(grad[i] - num) / std::max({std::abs(num), std::abs(double(grad[i])), 1e-4}));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("score is a bilinear form") {
  const Tensor w = random_tensor({4, 4}, 23);
  const Tensor a = random_tensor({4}, 24), b = random_tensor({4}, 25);
  double expect = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) expect += a[i] * w.at(i, j) * b[j];
  CHECK(score(a.data(), b.data(), w) == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("two frames leave one possible negative") {
  RngStream rng(11, 0);
  const CandidateSet cs = draw_negatives(1, 2, 1, 15, rng);
  const auto c = cs.at(1, 0, 0);
  CHECK(c[0] == 1);
  for (std::size_t n = 1; n < c.size(); ++n) CHECK(c[n] == 0);

  // The positive is never drawn over 10^5 negatives.
  RngStream big(12, 0);
  const CandidateSet many = draw_negatives(2, 4, 1, 15000, big);
  std::size_t hits = 0;
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < 3; ++t) {
      const auto row = many.at(1, b, t);
      hits += static_cast<std::size_t>(std::count(row.begin() + 1, row.end(), row[0]));
    }
  CHECK(hits == 0);
}

TEST_CASE("bound and cross-entropy arithmetic") {
  CHECK(mi_lower_bound(1.2, 8) == doctest::Approx(std::log(8.0) - 1.2).epsilon(1e-9));
  CHECK(mi_lower_bound(1.2, 8) == doctest::Approx(0.87944).epsilon(1e-5));
  const std::vector<int> y{0, 2};
  CHECK(cross_entropy(Tensor({2, 3}, 0.0f), y) == doctest::Approx(std::log(3.0)));
  Tensor onehot({2, 3}, -40.0f);
  onehot.at(0, 0) = 40.0f;
  onehot.at(1, 2) = 40.0f;
  CHECK(cross_entropy(onehot, y) < 1e-15);
}
