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
#include <cstdio>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "wks/error.hpp"
#include "wks/torus_grid.hpp"

using namespace wks;

TEST_CASE("wrap_point reduces modulo one") {
  CHECK(WrapPoint(Vec{1.25, 0.0}, 1).coords[0] == doctest::Approx(0.25));
  CHECK(WrapPoint(Vec{-0.1, 0.0}, 1).coords[0] == doctest::Approx(0.9));
  TorusPoint p = WrapPoint(Vec{0.0, 2.0}, 2);
  CHECK(p.coords[0] == 0.0);
  CHECK(p.coords[1] == 0.0);
  CHECK(p.d == 2);
  for (double x : {-3.7, -1e-17, 0.999999999, 5.5, 123.456}) {
    TorusPoint once = WrapPoint(Vec{x, 0.0}, 1);
    CHECK(once.coords[0] >= 0.0);
    CHECK(once.coords[0] < 1.0);
    CHECK(WrapPoint(once.coords, 1).coords[0] == once.coords[0]);
  }
}

TEST_CASE("wrap_point rejects non-finite input") {
  CHECK_THROWS_AS(WrapPoint(Vec{std::nan(""), 0.0}, 1), Error);
  CHECK_THROWS_AS(WrapPoint(Vec{0.0, std::numeric_limits<double>::infinity()}, 2), Error);
}

TEST_CASE("grid construction") {
  PeriodicGrid g(1, 8);
  CHECK(g.node_count() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(g.node(i).coords[0] == doctest::Approx(0.125 * i));

  PeriodicGrid g2(2, 4);
  CHECK(g2.node_count() == 16);
  TorusPoint p = g2.node(g2.index(1, 3));
  CHECK(p.coords[0] == doctest::Approx(0.25));
  CHECK(p.coords[1] == doctest::Approx(0.75));
  CHECK(g2.index(1, 3) == 7);

  try {
    PeriodicGrid bad(3, 8);
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfiguration);
  }
  CHECK_THROWS_AS(PeriodicGrid(1, 3), Error);
}

TEST_CASE("torus distance and cell distance wrap around") {
  PeriodicGrid g(1, 16);
  CHECK(TorusDistance(g.node(0), g.node(15)) == doctest::Approx(1.0 / 16));
  CHECK(g.cell_distance(0, 15) == 1);
  CHECK(g.cell_distance(3, 11) == 8);
  CHECK(g.nearest_node(WrapPoint(Vec{0.99, 0.0}, 1)) == 0);
}

TEST_CASE("interpolation") {
  PeriodicGrid g(1, 4);
  GridField c(g, 2.5);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int k = 0; k < 20; ++k) CHECK(Interpolate(c, WrapPoint(Vec{u(rng), 0.0}, 1)) == doctest::Approx(2.5));

  GridField zigzag(g, std::vector<double>{0, 1, 0, 1});
  CHECK(Interpolate(zigzag, WrapPoint(Vec{0.125, 0.0}, 1)) == doctest::Approx(0.5));
  CHECK(Interpolate(zigzag, WrapPoint(Vec{0.875, 0.0}, 1)) == doctest::Approx(0.5));

  PeriodicGrid fine(1, 256);
  GridField s = SampleField(fine, [](const TorusPoint& x) { return std::sin(2 * M_PI * x.coords[0]); });
  CHECK(std::fabs(Interpolate(s, WrapPoint(Vec{0.3, 0.0}, 1)) - std::sin(0.6 * M_PI)) <= 1e-3);
}

TEST_CASE("interpolation is exact at nodes and 1-Lipschitz in node values") {
  PeriodicGrid g(2, 8);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GridField f(g);
  for (double& v : f.values()) v = u(rng);
  for (std::size_t i = 0; i < g.node_count(); ++i) CHECK(Interpolate(f, g.node(i)) == f[i]);

  GridField f2 = f;
  const double eps = 1e-3;
  for (double& v : f2.values()) v += eps * u(rng);
  for (int k = 0; k < 200; ++k) {
    TorusPoint x = WrapPoint(Vec{u(rng), u(rng)}, 2);
    CHECK(std::fabs(Interpolate(f, x) - Interpolate(f2, x)) <= eps + 1e-15);
  }
}

TEST_CASE("stencil weights form a partition of unity") {
  PeriodicGrid g(2, 6);
  Stencil s = MakeStencil(g, WrapPoint(Vec{0.41, 0.93}, 2));
  CHECK(s.size == 4);
  double sum = 0.0;
  for (int k = 0; k < s.size; ++k) {
    CHECK(s.weights[k] >= 0.0);
    sum += s.weights[k];
  }
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("field csv round trip is bit exact") {
  PeriodicGrid g(2, 5);
  GridField f = SampleField(g, [](const TorusPoint& x) { return std::exp(x.coords[0]) / 3.0 - x.coords[1]; });
  std::ostringstream os;
  WriteFieldCsv(f, os);
  CHECK(os.str().rfind("# 2,5\n0,0,0,", 0) == 0);
  auto path = std::filesystem::temp_directory_path() / "wks_field_roundtrip.csv";
  WriteFieldCsv(f, path.string());
  GridField back = ReadFieldCsv(path.string());
  CHECK(back.grid() == g);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(back[i] == f[i]);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(ReadFieldCsv("/nonexistent/field.csv"), Error);
}

TEST_CASE("discrete lipschitz constant") {
  PeriodicGrid g(1, 10);
  GridField f = SampleField(g, [](const TorusPoint& x) { return x.coords[0] < 0.5 ? x.coords[0] : 1.0 - x.coords[0]; });
  CHECK(f.discrete_lipschitz() == doctest::Approx(1.0));
  CHECK(f.max() == doctest::Approx(0.5));
  CHECK(f.min() == doctest::Approx(0.0));
}
