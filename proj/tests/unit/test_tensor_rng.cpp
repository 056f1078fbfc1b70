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

#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"

#include "sim/rng.hpp"
#include "sim/tensor.hpp"

using namespace sim;

TEST_CASE("tensor construction checks numel") {
  Tensor t({2, 3}, 1.5f);
  CHECK(t.numel() == 6);
  CHECK(t.at(1, 2) == 1.5f);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>(3)), ShapeError);
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
  CHECK_THROWS_AS(t.dim(2), ShapeError);
}

TEST_CASE("non-finite values are reported") {
  Tensor t({3}, 0.0f);
  CHECK(t.all_finite());
  t[1] = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(t.check_finite("probe"), NumericError);
  CHECK_THROWS_AS(expect_shape(t, {2}, "x"), ShapeError);
}

TEST_CASE("streams are pure functions of key and position") {
  RngStream a = RngStream::named(7, "eps"), b = RngStream::named(7, "eps");
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  RngStream c = RngStream::named(7, "negatives");
  RngStream d = RngStream::named(7, "eps");
  CHECK(c.next_u64() != d.next_u64());
  CHECK(a.derive(3).next_u64() == b.derive(3).next_u64());
  CHECK(a.derive(3).next_u64() != a.derive(4).next_u64());
}

TEST_CASE("below is uniform") {
  // Chi-squared over 10 cells with 10^5 draws; 9 dof, 99.9% quantile 27.88.
  RngStream r(1, 2);
  const int cells = 10, draws = 100000;
  std::vector<int> count(cells, 0);
  for (int i = 0; i < draws; ++i) ++count[r.below(cells)];
  double chi2 = 0.0;
  const double expect = static_cast<double>(draws) / cells;
  for (int c : count) chi2 += (c - expect) * (c - expect) / expect;
  CHECK(chi2 < 27.88);
}

TEST_CASE("normal draws have unit moments") {
  RngStream r(3, 4);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::fabs(s / n) < 0.01);
  CHECK(std::fabs(s2 / n - 1.0) < 0.02);
  CHECK(r.uniform(2.0, 3.0) >= 2.0);
}
