// Copyright 2026 The wkselect Authors
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
#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "wks/action_barrier.hpp"
#include "wks/error.hpp"

using namespace wks;

namespace {

// Velocity spacing 0.125 and dt 0.25 put every foot point on a node of the
// 32-grid, so the dynamic programme is an exact min-plus recursion.
struct Aligned {
  PeriodicGrid grid{1, 32};
  VelocitySet vs = MakeVelocitySet(1, 2.0, 33);
  double dt = 0.25;
};

BarrierMatrix Steps(const Scheme& s, std::size_t k) {
  BarrierMatrix h = InitialAction(s.grid());
  for (std::size_t i = 0; i < k; ++i) h = MinActionStep(s, h);
  return h;
}

}  // namespace

TEST_CASE("initial action") {
  PeriodicGrid g(1, 8);
  BarrierMatrix a = InitialAction(g);
  CHECK(a(3, 3) == 0.0);
  CHECK(a(3, 4) == kBarrierBig);
  BarrierMatrix cone = InitialAction(g, 10.0);
  CHECK(cone(0, 7) == doctest::Approx(10.0 / 8));
  CHECK(cone(0, 4) == doctest::Approx(5.0));
}

TEST_CASE("free particle action is the kinetic cost of the straight path") {
  Aligned a;
  ControlModel free = BuiltinModel("mechanical", {});
  Scheme s(free, a.grid, a.vs, a.dt);
  BarrierMatrix h = Steps(s, 4);
  CHECK(h.t == doctest::Approx(1.0));
  for (int j = -8; j <= 8; ++j) {
    std::size_t y = a.grid.index(j);
    double dist = std::abs(j) / 32.0;
    double exact = dist * dist / 2.0;
    if (j % 4 == 0) {
      CHECK(h(0, y) == doctest::Approx(exact).epsilon(1e-12));
    } else {
      CHECK(h(0, y) >= exact - 1e-15);
    }
  }
  // Every entry is bounded below by t times the smallest lattice cost.
  ControlModel m = BuiltinModel("mechanical", {{"U.cos", "1"}});
  Scheme sm(m, a.grid, a.vs, a.dt);
  BarrierMatrix hm = Steps(sm, 6);
  double lmin = 1e300;
  for (std::size_t i = 0; i < sm.nodes(); ++i) {
    for (std::size_t k = 0; k < sm.velocities(); ++k) lmin = std::min(lmin, sm.dtL0(i, k) / a.dt);
  }
  for (double v : hm.values()) CHECK(v >= lmin * hm.t - 1e-12);
}

TEST_CASE("min-plus semigroup on an aligned lattice") {
  Aligned a;
  ControlModel m = BuiltinModel("mechanical", {{"U.cos", "1"}, {"U.sin", "0.3"}});
  Scheme s(m, a.grid, a.vs, a.dt);
  BarrierMatrix h2 = Steps(s, 2), h3 = Steps(s, 3), h5 = Steps(s, 5);
  const std::size_t n = h2.size();
  double worst = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t z = 0; z < n; ++z) {
      double best = kBarrierBig;
      for (std::size_t y = 0; y < n; ++y) best = std::min(best, h2(x, y) + h3(y, z));
      if (best >= 1e17) {
        CHECK(h5(x, z) >= 1e17);
        continue;
      }
      worst = std::max(worst, std::fabs(best - h5(x, z)));
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("Peierls barrier of mechanical systems") {
  Aligned a;
  ControlModel flat = BuiltinModel("mechanical", {});
  Scheme sf(flat, a.grid, a.vs, a.dt);
  BarrierMatrix hf = PeierlsBarrier(sf, 0.0);
  CHECK(hf.peierls);
  // Off the diagonal the only cost is the slowest nonzero lattice velocity,
  // one cell per step.
  const double cell = 0.5 * 0.125 * 0.125 * a.dt;
  for (std::size_t i = 0; i < hf.size(); ++i) {
    CHECK(hf(i, i) == 0.0);
    for (std::size_t j = 0; j < hf.size(); ++j) {
      CHECK(hf(i, j) == doctest::Approx(cell * a.grid.cell_distance(i, j)).epsilon(1e-12));
    }
  }
  CHECK(AubrySet(hf, 1e-6).size() == a.grid.node_count());

  ControlModel well = BuiltinModel("mechanical", {{"U.cos", "1"}});
  Scheme sw(well, a.grid, a.vs, a.dt);
  BarrierMatrix hw = PeierlsBarrier(sw, 1.0);
  CHECK(std::fabs(hw(0, 0)) <= 0.02);
  CHECK(hw(16, 16) >= 0.5);
  bool fallback = true;
  std::vector<std::size_t> aubry = AubrySet(hw, 1e-6, &fallback);
  CHECK_FALSE(fallback);
  REQUIRE(!aubry.empty());
  CHECK(aubry.front() == 0);
  CHECK(std::find(aubry.begin(), aubry.end(), std::size_t{16}) == aubry.end());

  // Barrier columns are critical solutions up to the discretisation error.
  GridField w = SolutionFromBarrier(hw, 0);
  CHECK(w[0] == hw(0, 0));
  CHECK(CriticalResidual(sw, w) * a.dt <= 1e-6 + hw.settle_gap);
  CHECK(TriangleViolation(hw, 2000, 3) <= 1e-9);
  CHECK_THROWS_AS(SolutionFromBarrier(hw, 99), Error);
}

TEST_CASE("Aubry fallback returns the minimising diagonal entries") {
  PeriodicGrid g(1, 4);
  BarrierMatrix h(g, 1.0);
  h(2, 2) = 0.5;
  bool fallback = false;
  auto set = AubrySet(h, 1e-6, &fallback);
  CHECK(fallback);
  REQUIRE(set.size() == 1);
  CHECK(set[0] == 2);
}

TEST_CASE("barrier of the golden drift stays near zero") {
  PeriodicGrid g(1, 64);
  VelocitySet vs = MakeVelocitySet(1, 3.0, 49);
  ControlModel sq = BuiltinModel("shifted_quadratic", {});
  Scheme s(sq, g, vs, 0.0613);
  CriticalData c = CriticalValue(s);
  CHECK(c.c == doctest::Approx(*sq.analytic_c).epsilon(0.02));
  BarrierMatrix h = PeierlsBarrier(s, c.c);
  double diag = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) diag = std::max(diag, std::fabs(h(i, i)));
  CHECK(diag <= 0.05);
  CHECK(AubrySet(h, 0.05).size() == g.node_count());
}

TEST_CASE("critical value methods agree") {
  Aligned a;
  ControlModel well = BuiltinModel("mechanical", {{"U.cos", "1"}});
  Scheme s(well, a.grid, a.vs, a.dt);
  CriticalOptions o;
  o.methods = {"lp", "discount", "longtime"};
  CriticalData c = CriticalValue(s, o);
  CHECK(c.method == "lp");
  CHECK(c.c == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.values.size() == 3);
  CHECK(c.spread <= 0.05);

  ControlModel flat = BuiltinModel("mechanical", {});
  Scheme sf(flat, a.grid, a.vs, a.dt);
  CHECK(std::fabs(CriticalValue(sf).c) <= 1e-6);

  o.methods = {};
  CHECK_THROWS_AS(CriticalValue(s, o), Error);
  o.methods = {"guess"};
  CHECK_THROWS_AS(CriticalValue(s, o), Error);
}

TEST_CASE("barrier files round trip") {
  Aligned a;
  ControlModel well = BuiltinModel("mechanical", {{"U.cos", "1"}});
  Scheme s(well, a.grid, a.vs, a.dt);
  BarrierMatrix h = PeierlsBarrier(s, 1.0);
  auto dir = std::filesystem::temp_directory_path() / "wks_barrier_test";
  std::filesystem::create_directories(dir);
  std::string path = (dir / "h.pbar").string();
  WriteBarrierBinary(h, path);
  BarrierMatrix back = ReadBarrierBinary(path);
  CHECK(back.peierls);
  CHECK(back.t == h.t);
  CHECK(back.values() == h.values());
  WriteBarrierCsv(h, (dir / "h.csv").string());
  CHECK(std::filesystem::file_size(dir / "h.csv") > 0);
  CHECK_THROWS_AS(ReadBarrierBinary((dir / "missing.pbar").string()), Error);
  std::filesystem::remove_all(dir);
}
