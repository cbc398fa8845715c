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
#include <memory>
#include <random>

#include "doctest.h"
#include "wks/error.hpp"
#include "wks/selection.hpp"

using namespace wks;

namespace {

// Aligned lattice: every foot point is a node.
struct Setup {
  PeriodicGrid grid{1, 32};
  VelocitySet vs = MakeVelocitySet(1, 2.0, 33);
  double dt = 0.25;
  ControlModel model;
  std::unique_ptr<Scheme> scheme;
  std::unique_ptr<MatherPolytope> poly;
  std::unique_ptr<BarrierMatrix> h;

  explicit Setup(const ParamMap& params) : model(BuiltinModel("mechanical", params)) {
    Scheme probe(model, grid, vs, dt);
    poly = std::make_unique<MatherPolytope>(BuildMatherPolytope(probe));
    model.c0 = poly->c;
    scheme = std::make_unique<Scheme>(model, grid, vs, dt);
    h = std::make_unique<BarrierMatrix>(PeierlsBarrier(*scheme, poly->c));
  }

  GridField Ones() const { return GridField(grid, 1.0); }
  GridField Wave(double a, double phase) const {
    return SampleField(grid, [&](const TorusPoint& x) { return a * std::cos(2 * M_PI * x.coords[0] + phase); });
  }
};

}  // namespace

TEST_CASE("selection without a potential is the barrier inf-convolution") {
  Setup s(ParamMap{});
  GridField phi = s.Wave(0.2, 0.7);
  SelectionResult r = ApplySelectionOperator(s.Ones(), phi, *s.h, *s.poly);
  for (std::size_t x = 0; x < s.grid.node_count(); ++x) {
    double best = 1e300;
    for (std::size_t y = 0; y < s.grid.node_count(); ++y) best = std::min(best, (*s.h)(y, x) + phi[y]);
    CHECK(r.field[x] == doctest::Approx(best).epsilon(1e-9));
    CHECK(r.field[x] >= phi.min() - 1e-12);
  }
}

TEST_CASE("pendulum selection reads the barrier from the top of the potential") {
  Setup s(ParamMap{{"U.cos", "1"}});
  GridField phi = s.Wave(0.3, 1.1);
  SelectionResult r = ApplySelectionOperator(s.Ones(), phi, *s.h, *s.poly, true);
  REQUIRE(r.per_x_optimizer.size() == s.grid.node_count());
  for (std::size_t x = 0; x < s.grid.node_count(); ++x) {
    CHECK(r.field[x] == doctest::Approx((*s.h)(0, x) + phi[0]).epsilon(1e-9));
    CHECK_FALSE(r.multiplicity[x]);
  }

  SUBCASE("constants commute and order is kept") {
    GridField shifted = phi;
    for (double& v : shifted.values()) v += 0.4;
    SelectionResult rs = ApplySelectionOperator(s.Ones(), shifted, *s.h, *s.poly);
    GridField larger = phi;
    larger[0] += 0.1;
    SelectionResult rl = ApplySelectionOperator(s.Ones(), larger, *s.h, *s.poly);
    for (std::size_t x = 0; x < s.grid.node_count(); ++x) {
      CHECK(rs.field[x] == doctest::Approx(r.field[x] + 0.4).epsilon(1e-9));
      CHECK(rl.field[x] >= r.field[x] - 1e-12);
    }
  }

  SUBCASE("images are fixed points and bumps are not") {
    CHECK(CheckFixedPoint(s.Ones(), r.field, *s.h, *s.poly, 1e-6).pass);
    GridField bumped = r.field;
    bumped[5] += 0.5;
    FixedPointCheck bad = CheckFixedPoint(s.Ones(), bumped, *s.h, *s.poly, 1e-6);
    CHECK_FALSE(bad.pass);
    CHECK(bad.distance == doctest::Approx(0.5).epsilon(1e-6));
  }

  SUBCASE("operator is 1-Lipschitz in the sup norm") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
      GridField a(s.grid), b(s.grid);
      for (std::size_t i = 0; i < s.grid.node_count(); ++i) {
        a[i] = u(rng);
        b[i] = u(rng);
      }
      LipschitzCheck lip = CheckOperatorLipschitz(s.Ones(), a, b, *s.h, *s.poly);
      CHECK(lip.pass);
      CHECK(lip.lhs <= lip.rhs + 1e-7);
    }
  }

  SUBCASE("measure comparison") {
    GridField above = r.field;
    for (double& v : above.values()) v += 0.1;
    ComparisonVerdict v = MeasureComparison(r.field, above, s.Ones(), *s.poly);
    CHECK(v.hypothesis);
    CHECK(v.conclusion);
    CHECK(v.min_integral == doctest::Approx(0.1).epsilon(1e-9));
    ComparisonVerdict w = MeasureComparison(above, r.field, s.Ones(), *s.poly);
    CHECK_FALSE(w.hypothesis);
    CHECK(w.implication_holds);
    // Raising u1 away from the Mather support leaves the hypothesis true but
    // breaks the order, which is the case the implication rules out for
    // fixed points.
    GridField raised = r.field;
    raised[16] += 0.2;
    ComparisonVerdict x = MeasureComparison(raised, r.field, s.Ones(), *s.poly);
    CHECK(x.hypothesis);
    CHECK_FALSE(x.conclusion);
    CHECK(x.max_excess == doctest::Approx(0.2).epsilon(1e-9));
  }
}

TEST_CASE("limit formula and largest subsolution") {
  Setup s(ParamMap{{"U.cos", "1"}});
  GridField V0(s.grid, 0.0);
  SelectionResult u0 = LimitSolutionFormula(V0, *s.h, *s.poly);
  for (std::size_t x = 0; x < s.grid.node_count(); ++x) {
    CHECK(u0.field[x] == doctest::Approx((*s.h)(0, x)).epsilon(1e-9));
  }
  GridField lower = u0.field, upper = u0.field;
  for (double& v : lower.values()) v -= 0.3;
  for (double& v : upper.values()) v += 0.3;
  LargestSubsolutionReport rep =
      CheckLargestSubsolution(u0.field, V0, *s.poly, *s.scheme, {{"minus", lower}, {"plus", upper}});
  CHECK(rep.pass());
  REQUIRE(rep.candidates.size() == 2);
  CHECK(rep.candidates[0].subsolution);
  CHECK(rep.candidates[0].member);
  CHECK(rep.candidates[0].dominated);
  CHECK(rep.candidates[1].subsolution);
  CHECK_FALSE(rep.candidates[1].member);
  CHECK_FALSE(rep.candidates[1].dominated);
}

TEST_CASE("equilibrium measures of a symmetric double well") {
  Setup s(ParamMap{{"U.cos", "1"}, {"U.freq", "2"}});
  GridField phi(s.grid, 0.0);
  EquilibriumResult mid = EquilibriumMeasures(phi, 8, *s.h, *s.poly);
  CHECK(mid.multiplicity);
  SelectionResult sel = ApplySelectionOperator(s.Ones(), phi, *s.h, *s.poly);
  CHECK(mid.value == doctest::Approx(sel.field[8]).epsilon(1e-9));
  CHECK(mid.witness.mass() == doctest::Approx(1.0).epsilon(1e-9));

  phi[0] = -0.1;
  EquilibriumResult tilted = EquilibriumMeasures(phi, 8, *s.h, *s.poly);
  CHECK_FALSE(tilted.multiplicity);
  CHECK(tilted.witness.at(0, s.vs.zero_index()) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(EquilibriumMeasures(phi, 999, *s.h, *s.poly), Error);
}

TEST_CASE("grid mismatches are rejected") {
  Setup s(ParamMap{{"U.cos", "1"}});
  GridField other(PeriodicGrid(1, 16), 0.0);
  CHECK_THROWS_AS(ApplySelectionOperator(s.Ones(), other, *s.h, *s.poly), Error);
  CHECK_THROWS_AS(MeasureComparison(other, other, other, *s.poly), Error);
}
