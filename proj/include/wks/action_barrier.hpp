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

// Minimal action h_t(x, y) on node pairs, the Peierls barrier as a tail-window
// minimum of h_t + c t, the Aubry set and three estimates of the critical value.

#ifndef WKS_ACTION_BARRIER_HPP_
#define WKS_ACTION_BARRIER_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wks/hj_solve.hpp"

namespace wks {

inline constexpr double kBarrierBig = 1e18;

class BarrierMatrix {
 public:
  explicit BarrierMatrix(PeriodicGrid grid, double fill = kBarrierBig);

  const PeriodicGrid& grid() const { return grid_; }
  std::size_t size() const { return grid_.node_count(); }
  // Cost from node i to node j.
  double operator()(std::size_t i, std::size_t j) const { return values_[i * size() + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * size() + j]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double t = 0.0;
  bool peierls = false;
  // Largest decrease of the window minimum over the second half of the window.
  double settle_gap = 0.0;
  std::vector<std::string> warnings;

 private:
  PeriodicGrid grid_;
  std::vector<double> values_;
};

// h_0: zero on the diagonal, kBarrierBig elsewhere. With cone_slope > 0 the
// off-diagonal entries are cone_slope * dist(x, y) instead, which lets the
// interpolating scheme leave the diagonal.
BarrierMatrix InitialAction(const PeriodicGrid& grid, double cone_slope = 0.0);

// h_{t+dt}(x, y) = min_v dt L0(y, v) + h_t(x, y - v dt). Sentinel arithmetic
// saturates at kBarrierBig.
BarrierMatrix MinActionStep(const Scheme& scheme, const BarrierMatrix& a);

struct PeierlsOptions {
  double Tmax = 16.0;
  double window_start = -1.0;  // negative: Tmax / 2
  double drift_tol = 1e-3;
  double cone_slope = 100.0;
};

BarrierMatrix PeierlsBarrier(const Scheme& scheme, double c, const PeierlsOptions& options = {});

// {i : h(i,i) <= tol}; falls back to the argmin of the diagonal when empty.
std::vector<std::size_t> AubrySet(const BarrierMatrix& h, double tol, bool* fallback = nullptr);

// x -> h(y, x)
GridField SolutionFromBarrier(const BarrierMatrix& h, std::size_t y);

// Critical residual of a field: the solver residual at lambda = 0.
double CriticalResidual(const Scheme& scheme, const GridField& w);

// max over sampled triples of h(x,z) - h(x,y) - h(y,z).
double TriangleViolation(const BarrierMatrix& h, std::size_t samples, std::uint64_t seed);

void WriteBarrierBinary(const BarrierMatrix& h, const std::string& path);
BarrierMatrix ReadBarrierBinary(const std::string& path);
void WriteBarrierCsv(const BarrierMatrix& h, const std::string& path);

struct CriticalOptions {
  std::vector<std::string> methods{"lp"};
  std::vector<double> discount_lambdas{0.1, 0.03, 0.01};
  double discount_tol = 1e-8;
  std::size_t discount_max_iter = 1000000;
  double Tmax = 16.0;
};

struct CriticalData {
  double c = 0.0;
  std::string method;
  std::map<std::string, double> values;
  double spread = 0.0;
};

// The scheme's model provides L0; its c0 and V are ignored.
CriticalData CriticalValue(const Scheme& scheme, const CriticalOptions& options = {});

}  // namespace wks

#endif  // WKS_ACTION_BARRIER_HPP_
