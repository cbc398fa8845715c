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

#include "wks/torus_grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wks/error.hpp"

namespace wks {

namespace {

double WrapScalar(double x) {
  double r = x - std::floor(x);
  // x slightly below an integer can round up to exactly 1.
  if (r >= 1.0) r = 0.0;
  return r;
}

}  // namespace

TorusPoint WrapPoint(std::span<const double> x) {
  if (x.empty() || x.size() > 2) {
    Fail(ErrorKind::kDomain, "torus points must have 1 or 2 coordinates");
  }
  TorusPoint p;
  p.d = static_cast<int>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) Fail(ErrorKind::kDomain, "non-finite coordinate");
    p.coords[i] = WrapScalar(x[i]);
  }
  return p;
}

TorusPoint WrapPoint(const Vec& x, int d) {
  return WrapPoint(std::span<const double>(x.data(), static_cast<std::size_t>(d)));
}

double TorusDistance(const TorusPoint& a, const TorusPoint& b) {
  double acc = 0.0;
  for (int i = 0; i < a.d; ++i) {
    double diff = std::fabs(a.coords[i] - b.coords[i]);
    diff = std::min(diff, 1.0 - diff);
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

PeriodicGrid::PeriodicGrid(int d, int n) : d_(d), n_(n), h_(0.0), node_count_(0) {
  if (d != 1 && d != 2) {
    Fail(ErrorKind::kConfiguration,
         "unsupported torus dimension " + std::to_string(d) + " (expected 1 or 2)");
  }
  if (n < 4) {
    Fail(ErrorKind::kConfiguration,
         "grid needs at least 4 nodes per axis, got " + std::to_string(n));
  }
  h_ = 1.0 / n;
  node_count_ = d == 1 ? static_cast<std::size_t>(n)
                       : static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
}

TorusPoint PeriodicGrid::node(std::size_t index) const {
  TorusPoint p;
  p.d = d_;
  if (d_ == 1) {
    p.coords[0] = static_cast<double>(index) * h_;
  } else {
    p.coords[0] = static_cast<double>(index / n_) * h_;
    p.coords[1] = static_cast<double>(index % n_) * h_;
  }
  return p;
}

std::size_t PeriodicGrid::index(int i0, int i1) const {
  auto wrap = [this](int i) { return ((i % n_) + n_) % n_; };
  if (d_ == 1) return static_cast<std::size_t>(wrap(i0));
  return static_cast<std::size_t>(wrap(i0)) * n_ + static_cast<std::size_t>(wrap(i1));
}

std::size_t PeriodicGrid::nearest_node(const TorusPoint& x) const {
  std::array<int, 2> ij{0, 0};
  for (int a = 0; a < d_; ++a) {
    ij[a] = static_cast<int>(std::floor(x.coords[a] * n_ + 0.5));
  }
  return index(ij[0], ij[1]);
}

int PeriodicGrid::cell_distance(std::size_t a, std::size_t b) const {
  auto axis = [this](int i, int j) {
    int diff = std::abs(i - j) % n_;
    return std::min(diff, n_ - diff);
  };
  if (d_ == 1) return axis(static_cast<int>(a), static_cast<int>(b));
  return std::max(axis(static_cast<int>(a / n_), static_cast<int>(b / n_)),
                  axis(static_cast<int>(a % n_), static_cast<int>(b % n_)));
}

Stencil MakeStencil(const PeriodicGrid& grid, const TorusPoint& x) {
  const int n = grid.n();
  std::array<int, 2> lo{0, 0};
  std::array<double, 2> frac{0.0, 0.0};
  for (int a = 0; a < grid.d(); ++a) {
    double s = WrapScalar(x.coords[a]) * n;
    double fl = std::floor(s);
    lo[a] = static_cast<int>(fl);
    frac[a] = s - fl;
    if (lo[a] >= n) {
      lo[a] -= n;
    }
  }
  Stencil st;
  if (grid.d() == 1) {
    st.nodes[0] = grid.index(lo[0]);
    st.nodes[1] = grid.index(lo[0] + 1);
    st.weights[0] = 1.0 - frac[0];
    st.weights[1] = frac[0];
    st.size = 2;
  } else {
    int k = 0;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        st.nodes[k] = grid.index(lo[0] + a, lo[1] + b);
        st.weights[k] = (a ? frac[0] : 1.0 - frac[0]) * (b ? frac[1] : 1.0 - frac[1]);
        ++k;
      }
    }
    st.size = 4;
  }
  return st;
}

GridField::GridField(PeriodicGrid grid, double fill)
    : grid_(grid), values_(grid.node_count(), fill) {}

GridField::GridField(PeriodicGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.node_count()) {
    Fail(ErrorKind::kDomain, "field size " + std::to_string(values_.size()) +
                                 " does not match node count " +
                                 std::to_string(grid_.node_count()));
  }
}

double GridField::max() const { return *std::max_element(values_.begin(), values_.end()); }
double GridField::min() const { return *std::min_element(values_.begin(), values_.end()); }

double GridField::discrete_lipschitz() const {
  const int n = grid_.n();
  double best = 0.0;
  if (grid_.d() == 1) {
    for (int i = 0; i < n; ++i) {
      best = std::max(best, std::fabs(values_[grid_.index(i + 1)] - values_[grid_.index(i)]));
    }
  } else {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double here = values_[grid_.index(i, j)];
        best = std::max(best, std::fabs(values_[grid_.index(i + 1, j)] - here));
        best = std::max(best, std::fabs(values_[grid_.index(i, j + 1)] - here));
      }
    }
  }
  return best / grid_.h();
}

double Interpolate(const GridField& f, const TorusPoint& x) {
  return MakeStencil(f.grid(), x).apply(f.values());
}

double SupDistance(const GridField& a, const GridField& b) {
  if (!(a.grid() == b.grid())) Fail(ErrorKind::kDomain, "fields live on different grids");
  double best = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, std::fabs(a[i] - b[i]));
  return best;
}

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void WriteFieldCsv(const GridField& f, std::ostream& out) {
  const PeriodicGrid& g = f.grid();
  out << "# " << g.d() << ',' << g.n() << '\n';
  for (std::size_t i = 0; i < f.size(); ++i) {
    TorusPoint p = g.node(i);
    out << i;
    for (int a = 0; a < g.d(); ++a) out << ',' << FormatDouble(p.coords[a]);
    out << ',' << FormatDouble(f[i]) << '\n';
  }
}

void WriteFieldCsv(const GridField& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  WriteFieldCsv(f, out);
  if (!out) Fail(ErrorKind::kIo, "failed writing " + path);
}

GridField ReadFieldCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path);
  std::string line;
  std::getline(in, line);
  int d = 0, n = 0;
  if (std::sscanf(line.c_str(), "# %d,%d", &d, &n) != 2) {
    Fail(ErrorKind::kIo, path + ": missing '# d,n' header");
  }
  PeriodicGrid grid(d, n);
  std::vector<double> values;
  values.reserve(grid.node_count());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto pos = line.find_last_of(',');
    if (pos == std::string::npos) Fail(ErrorKind::kIo, path + ": malformed row");
    values.push_back(std::stod(line.substr(pos + 1)));
  }
  return GridField(grid, std::move(values));
}

}  // namespace wks
