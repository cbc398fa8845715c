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

#include "wks/action_barrier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "wks/error.hpp"
#include "wks/mather_lp.hpp"
#include "wks/parallel.hpp"

namespace wks {

namespace {

constexpr double kReachable = 0.5 * kBarrierBig;

}  // namespace

BarrierMatrix::BarrierMatrix(PeriodicGrid grid, double fill)
    : grid_(grid), values_(grid.node_count() * grid.node_count(), fill) {}

BarrierMatrix InitialAction(const PeriodicGrid& grid, double cone_slope) {
  BarrierMatrix h(grid);
  for (std::size_t i = 0; i < h.size(); ++i) {
    TorusPoint x = grid.node(i);
    for (std::size_t j = 0; j < h.size(); ++j) {
      if (i == j) {
        h(i, j) = 0.0;
      } else if (cone_slope > 0.0) {
        h(i, j) = cone_slope * TorusDistance(x, grid.node(j));
      }
    }
  }
  return h;
}

BarrierMatrix MinActionStep(const Scheme& scheme, const BarrierMatrix& a) {
  if (!(a.grid() == scheme.grid())) Fail(ErrorKind::kConfiguration, "barrier grid mismatch");
  const std::size_t n = a.size();
  const std::size_t m = scheme.velocities();
  BarrierMatrix out(a.grid());
  out.t = a.t + scheme.dt();
  ParallelFor(n, [&](std::size_t x) {
    const double* row = &a.values()[x * n];
    double* dst = &out.values()[x * n];
    for (std::size_t y = 0; y < n; ++y) {
      double best = kBarrierBig;
      for (std::size_t k = 0; k < m; ++k) {
        best = std::min(best, scheme.foot(y, k).apply(row) + scheme.dtL0(y, k));
      }
      dst[y] = std::min(best, kBarrierBig);
    }
  }, 4);
  return out;
}

BarrierMatrix PeierlsBarrier(const Scheme& scheme, double c, const PeierlsOptions& options) {
  const double dt = scheme.dt();
  if (!(options.Tmax > 0.0)) Fail(ErrorKind::kConfiguration, "Tmax must be positive");
  const double start = options.window_start < 0.0 ? 0.5 * options.Tmax : options.window_start;
  if (start > options.Tmax) Fail(ErrorKind::kConfiguration, "barrier window starts after Tmax");
  const std::size_t steps = static_cast<std::size_t>(std::llround(options.Tmax / dt));
  const std::size_t first = static_cast<std::size_t>(std::ceil(start / dt - 1e-9));
  const std::size_t middle = (first + steps) / 2;

  const PeriodicGrid& grid = scheme.grid();
  const std::size_t total = grid.node_count() * grid.node_count();
  BarrierMatrix ht = InitialAction(grid, options.cone_slope);
  std::vector<double> early(total, kBarrierBig), late(total, kBarrierBig);
  for (std::size_t k = 1; k <= steps; ++k) {
    ht = MinActionStep(scheme, ht);
    if (k < first) continue;
    const double shift = c * (k * dt);
    std::vector<double>& acc = k < middle ? early : late;
    for (std::size_t e = 0; e < total; ++e) {
      double v = ht.values()[e];
      if (v >= kReachable) continue;
      acc[e] = std::min(acc[e], v + shift);
    }
  }
  BarrierMatrix h(grid);
  h.peierls = true;
  h.t = steps * dt;
  double gap = 0.0;
  for (std::size_t e = 0; e < total; ++e) {
    h.values()[e] = std::min(early[e], late[e]);
    if (early[e] < kReachable && late[e] < kReachable) {
      gap = std::max(gap, std::fabs(early[e] - late[e]));
    }
  }
  h.settle_gap = gap;
  if (gap > options.drift_tol) {
    h.warnings.push_back("barrier window minimum still drifting (gap " + FormatDouble(gap) +
                         "); increase Tmax");
  }
  return h;
}

std::vector<std::size_t> AubrySet(const BarrierMatrix& h, double tol, bool* fallback) {
  std::vector<std::size_t> out;
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < h.size(); ++i) {
    lowest = std::min(lowest, h(i, i));
    if (h(i, i) <= tol) out.push_back(i);
  }
  if (fallback) *fallback = out.empty();
  if (out.empty()) {
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (h(i, i) == lowest) out.push_back(i);
    }
  }
  return out;
}

GridField SolutionFromBarrier(const BarrierMatrix& h, std::size_t y) {
  if (y >= h.size()) Fail(ErrorKind::kDomain, "barrier node index out of range");
  GridField f(h.grid());
  for (std::size_t x = 0; x < h.size(); ++x) f[x] = h(y, x);
  return f;
}

double CriticalResidual(const Scheme& scheme, const GridField& w) { return Residual(scheme, 0.0, w); }

double TriangleViolation(const BarrierMatrix& h, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = h.size();
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t x = rng() % n, y = rng() % n, z = rng() % n;
    if (h(x, y) >= kReachable || h(y, z) >= kReachable) continue;
    worst = std::max(worst, h(x, z) - h(x, y) - h(y, z));
  }
  return worst;
}

void WriteBarrierBinary(const BarrierMatrix& h, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  char header[16] = {'P', 'B', 'A', 'R'};
  const std::uint16_t d = static_cast<std::uint16_t>(h.grid().d());
  const std::uint16_t n = static_cast<std::uint16_t>(h.grid().n());
  // A negative time marks a Peierls matrix (window end |t|).
  const double t = h.peierls ? -h.t : h.t;
  std::memcpy(header + 4, &d, 2);
  std::memcpy(header + 6, &n, 2);
  std::memcpy(header + 8, &t, 8);
  out.write(header, 16);
  out.write(reinterpret_cast<const char*>(h.values().data()),
            static_cast<std::streamsize>(h.values().size() * sizeof(double)));
  if (!out) Fail(ErrorKind::kIo, "failed writing " + path);
}

BarrierMatrix ReadBarrierBinary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path);
  char header[16];
  in.read(header, 16);
  if (!in || std::memcmp(header, "PBAR", 4) != 0) Fail(ErrorKind::kIo, path + " is not a barrier file");
  std::uint16_t d, n;
  double t;
  std::memcpy(&d, header + 4, 2);
  std::memcpy(&n, header + 6, 2);
  std::memcpy(&t, header + 8, 8);
  BarrierMatrix h(PeriodicGrid(d, n));
  h.peierls = t < 0.0;
  h.t = std::fabs(t);
  in.read(reinterpret_cast<char*>(h.values().data()),
          static_cast<std::streamsize>(h.values().size() * sizeof(double)));
  if (!in) Fail(ErrorKind::kIo, path + " is truncated");
  return h;
}

void WriteBarrierCsv(const BarrierMatrix& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  out << "# d,n\n" << h.grid().d() << "," << h.grid().n() << "\n";
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (std::size_t j = 0; j < h.size(); ++j) {
      out << (j ? "," : "") << FormatDouble(h(i, j));
    }
    out << "\n";
  }
  if (!out) Fail(ErrorKind::kIo, "failed writing " + path);
}

namespace {

double DiscountCritical(const Scheme& scheme, const CriticalOptions& options) {
  ControlModel probe = scheme.model();
  probe.c0 = 0.0;
  probe.V = [](const TorusPoint&, double) { return 0.0; };
  probe.V0 = [](const TorusPoint&) { return 0.0; };
  Scheme local(probe, scheme.grid(), scheme.vset(), scheme.dt());
  std::optional<GridField> warm;
  double previous = 0.0;
  double lambda = 0.0;
  for (double l : options.discount_lambdas) {
    SolveOptions opts;
    opts.tol = options.discount_tol;
    opts.max_iter = options.discount_max_iter;
    GridField init(scheme.grid());
    if (warm) {
      init = *warm;
      for (double& v : init.values()) v *= previous / l;
      opts.init = &init;
    }
    SolveResult r = SolvePerturbed(local, l, opts);
    if (!r.report.converged) {
      Fail(ErrorKind::kNumerical, "discounted solve did not converge at lambda " + FormatDouble(l));
    }
    warm = r.u;
    previous = l;
    lambda = l;
  }
  if (!warm) Fail(ErrorKind::kConfiguration, "discount method needs at least one lambda");
  double mean = 0.0;
  for (double v : warm->values()) mean += lambda * v;
  return -mean / static_cast<double>(warm->size());
}

double LongtimeCritical(const Scheme& scheme, double Tmax) {
  const std::size_t steps = static_cast<std::size_t>(std::llround(Tmax / scheme.dt()));
  if (steps == 0) Fail(ErrorKind::kConfiguration, "Tmax shorter than one time step");
  BarrierMatrix h = InitialAction(scheme.grid(), 100.0);
  for (std::size_t k = 0; k < steps; ++k) h = MinActionStep(scheme, h);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < h.size(); ++i) best = std::min(best, h(i, i));
  return -best / h.t;
}

}  // namespace

CriticalData CriticalValue(const Scheme& scheme, const CriticalOptions& options) {
  if (options.methods.empty()) Fail(ErrorKind::kConfiguration, "no critical value method requested");
  CriticalData data;
  for (const std::string& method : options.methods) {
    double c = 0.0;
    if (method == "lp") {
      MatherPolytope poly = BuildMatherPolytope(scheme);
      c = poly.c;
    } else if (method == "discount") {
      c = DiscountCritical(scheme, options);
    } else if (method == "longtime") {
      c = LongtimeCritical(scheme, options.Tmax);
    } else {
      Fail(ErrorKind::kConfiguration, "unknown critical value method '" + method + "'");
    }
    data.values[method] = c;
  }
  data.method = options.methods.front();
  data.c = data.values[data.method];
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [name, v] : data.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  data.spread = hi - lo;
  return data;
}

}  // namespace wks
