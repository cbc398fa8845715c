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

// Periodic grids on the flat torus T^d (d = 1 or 2) with unit period, and the
// periodic multilinear interpolation shared by every solver in the library.
//
// Node indexing is lexicographic and row-major in 2-D: node (i0, i1) has index
// i0 * n + i1 and coordinates (i0 / n, i1 / n).

#ifndef WKS_TORUS_GRID_HPP_
#define WKS_TORUS_GRID_HPP_

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace wks {

// Position or velocity on T^d. Only the first `d` entries are meaningful;
// unused entries stay zero so arithmetic on them is harmless.
using Vec = std::array<double, 2>;

struct TorusPoint {
  Vec coords{0.0, 0.0};
  int d = 1;
};

// Reduces each coordinate modulo 1 into [0, 1). Throws a domain error on
// non-finite input.
TorusPoint WrapPoint(std::span<const double> x);
TorusPoint WrapPoint(const Vec& x, int d);

// Shortest periodic distance between two torus points.
double TorusDistance(const TorusPoint& a, const TorusPoint& b);

class PeriodicGrid {
 public:
  // Throws a configuration error unless d is 1 or 2 and n >= 4.
  PeriodicGrid(int d, int n);

  int d() const { return d_; }
  int n() const { return n_; }
  double h() const { return h_; }
  std::size_t node_count() const { return node_count_; }

  TorusPoint node(std::size_t index) const;
  // Node index from per-axis integer coordinates (taken modulo n).
  std::size_t index(int i0, int i1 = 0) const;
  // Nearest node to a point (ties go to the lower index).
  std::size_t nearest_node(const TorusPoint& x) const;
  // Periodic node distance measured in cells (max over axes).
  int cell_distance(std::size_t a, std::size_t b) const;

  bool operator==(const PeriodicGrid& other) const {
    return d_ == other.d_ && n_ == other.n_;
  }

 private:
  int d_;
  int n_;
  double h_;
  std::size_t node_count_;
};

// Interpolation weights of one point against the grid: value(x) =
// sum_k weights[k] * f[nodes[k]]. At most 2^d entries are used.
struct Stencil {
  std::array<std::size_t, 4> nodes{};
  std::array<double, 4> weights{};
  int size = 0;

  template <typename Values>
  double apply(const Values& f) const {
    double acc = 0.0;
    for (int k = 0; k < size; ++k) acc += weights[k] * f[nodes[k]];
    return acc;
  }
};

Stencil MakeStencil(const PeriodicGrid& grid, const TorusPoint& x);

// One real value per grid node.
class GridField {
 public:
  GridField(PeriodicGrid grid, double fill = 0.0);
  GridField(PeriodicGrid grid, std::vector<double> values);

  const PeriodicGrid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double max() const;
  double min() const;
  // Lipschitz estimate: max over axis-adjacent node pairs of |difference| / h.
  double discrete_lipschitz() const;

 private:
  PeriodicGrid grid_;
  std::vector<double> values_;
};

template <typename F>
GridField SampleField(const PeriodicGrid& grid, F&& f) {
  GridField out(grid);
  for (std::size_t i = 0; i < grid.node_count(); ++i) out[i] = f(grid.node(i));
  return out;
}

double Interpolate(const GridField& f, const TorusPoint& x);

double SupDistance(const GridField& a, const GridField& b);

// CSV: "# d,n" header then "index,coord...,value" rows with 17 significant
// digits.
void WriteFieldCsv(const GridField& f, std::ostream& out);
void WriteFieldCsv(const GridField& f, const std::string& path);
GridField ReadFieldCsv(const std::string& path);

std::string FormatDouble(double v);

}  // namespace wks

#endif  // WKS_TORUS_GRID_HPP_
