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
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "wks/curve_dynamics.hpp"
#include "wks/error.hpp"

using namespace wks;

namespace {

GridField Solve(const ControlModel& m, double lambda, const PeriodicGrid& g, const VelocitySet& vs, double dt) {
  SolveOptions o;
  o.dt = dt;
  o.tol = 1e-10;
  o.max_iter = 2000000;
  SolveResult r = SolvePerturbed(m, lambda, g, vs, o);
  REQUIRE(r.report.converged);
  return r.u;
}

TorusPoint At(double x) { return WrapPoint(Vec{x, 0.0}, 1); }

}  // namespace

TEST_CASE("free particle curves rest") {
  PeriodicGrid g(1, 32);
  VelocitySet vs = MakeVelocitySet(1, 2.0, 33);
  ControlModel free = BuiltinModel("mechanical", {});
  const double dt = 0.25, lambda = 0.1;
  Scheme s(free, g, vs, dt);
  GridField u = Solve(free, lambda, g, vs, dt);
  CurveTrace tr = BackwardCalibratedCurve(s, lambda, u, At(0.3125), 200.0);
  REQUIRE(tr.steps() == 800);
  for (const Vec& v : tr.velocities) CHECK(v[0] == 0.0);
  CHECK(tr.points.back().coords[0] == doctest::Approx(0.3125));
  for (std::size_t k = 1; k < tr.weights.size(); ++k) CHECK(tr.weights[k] < tr.weights[k - 1]);
  CHECK(tr.weights.front() == 1.0);

  DiscreteMeasure mu = OccupationMeasure(tr, g, vs);
  CHECK(mu.mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mu.at(10, vs.zero_index()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ClosednessDefect(mu, ClosednessOperator(g, vs, dt)) <= 1e-15);

  // sigma = 1, so the discounted mass identity holds up to the step size.
  CHECK(CheckMassIdentity(tr) <= lambda * dt);
  CHECK(TailMass(tr) <= 1e-4);
  CHECK(NormalizedAction(tr, s) == doctest::Approx(free.c0).epsilon(1e-12));
  SpeedCheck speed = SpeedBoundCheck(tr);
  CHECK(speed.pass);
  CHECK(speed.max_speed == 0.0);
}

TEST_CASE("pendulum curves drift to the top of the potential") {
  PeriodicGrid g(1, 64);
  VelocitySet vs = MakeVelocitySet(1, 2.0, 33);
  ControlModel m = BuiltinModel("mechanical", {{"U.cos", "1"}});
  const double lambda = 0.1, dt = DefaultDt(g, vs);
  Scheme s(m, g, vs, dt);
  GridField u = Solve(m, lambda, g, vs, dt);
  CurveTrace tr = BackwardCalibratedCurve(s, lambda, u, At(0.25), 20.0);
  CHECK(TorusDistance(tr.points.back(), At(0.0)) <= 2.0 * g.h());
  CalibrationCheck cal = CheckCalibration(tr, u, s);
  CHECK(cal.max_defect * dt <= tr.defect_threshold);
  CHECK(cal.telescoped <= tr.defect_threshold * static_cast<double>(tr.steps()) + 1e-9);
  CHECK(SpeedBoundCheck(tr).pass);
}

TEST_CASE("golden drift curves move at the drift speed") {
  PeriodicGrid g(1, 64);
  VelocitySet vs = MakeVelocitySet(1, 3.0, 49);
  ControlModel sq = BuiltinModel("shifted_quadratic", {});
  const double lambda = 0.1, dt = 0.0613;
  Scheme s(sq, g, vs, dt);
  GridField u = Solve(sq, lambda, g, vs, dt);
  CurveTrace tr = BackwardCalibratedCurve(s, lambda, u, At(0.0), 10.0);
  for (const Vec& v : tr.velocities) CHECK(std::fabs(v[0] - 0.6180339887498949) <= vs.step);

  SUBCASE("a lattice that stops short of the drift truncates the argmin") {
    VelocitySet slow = MakeVelocitySet(1, 0.5, 9);
    Scheme ss(sq, g, slow, dt);
    GridField us = Solve(sq, lambda, g, slow, dt);
    CurveTrace ts = BackwardCalibratedCurve(ss, lambda, us, At(0.0), 10.0);
    CHECK(ts.boundary_steps > 0);
    SpeedCheck sc = SpeedBoundCheck(ts);
    CHECK_FALSE(sc.pass);
    CHECK(sc.message == "velocity lattice truncates the argmin");
  }
}

TEST_CASE("degenerate traces") {
  PeriodicGrid g(1, 32);
  VelocitySet vs = MakeVelocitySet(1, 2.0, 33);
  ControlModel free = BuiltinModel("mechanical", {});
  Scheme s(free, g, vs, 0.25);
  GridField u(g, 0.0);
  CurveTrace empty = BackwardCalibratedCurve(s, 0.1, u, At(0.0), 0.1);
  CHECK(empty.steps() == 0);
  CHECK(empty.points.size() == 1);
  CHECK(TailMass(empty) == 0.0);
  CHECK_THROWS_AS(OccupationMeasure(empty, g, vs), Error);
  CHECK_THROWS_AS(CheckMassIdentity(empty), Error);

  CurveTrace shortt = BackwardCalibratedCurve(s, 0.1, u, At(0.0), 5.0);
  CHECK(TailMass(shortt) > 0.5);
  try {
    OccupationMeasure(shortt, g, vs);
    FAIL("short horizon accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumerical);
  }
  CHECK_THROWS_AS(BackwardCalibratedCurve(s, 0.0, u, At(0.0), 5.0), Error);
  CHECK_THROWS_AS(BackwardCalibratedCurve(s, 0.1, GridField(PeriodicGrid(1, 16)), At(0.0), 5.0), Error);
}

TEST_CASE("trace csv") {
  PeriodicGrid g(1, 32);
  VelocitySet vs = MakeVelocitySet(1, 2.0, 33);
  ControlModel free = BuiltinModel("mechanical", {});
  Scheme s(free, g, vs, 0.25);
  CurveTrace tr = BackwardCalibratedCurve(s, 0.1, GridField(g, 0.0), At(0.5), 2.0);
  auto path = std::filesystem::temp_directory_path() / "wks_trace_test.csv";
  WriteTraceCsv(tr, path.string());
  std::ifstream in(path);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows >= static_cast<int>(tr.steps()) + 1);
  std::filesystem::remove(path);
}
