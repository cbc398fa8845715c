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

// Hamiltonian/Lagrangian pairs H(x,p,u), L(x,v,u) together with the data the
// perturbed equation needs: dL/du at u = 0, the weight sigma, the potential
// V(x, lambda) and the critical value of H(., ., 0).

#ifndef WKS_MODELS_HPP_
#define WKS_MODELS_HPP_

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wks/torus_grid.hpp"

namespace wks {

using ParamMap = std::map<std::string, std::string>;

// offset + sum over axes of (sin_coef sin(2 pi freq x_a) + cos_coef cos(2 pi freq x_a))
struct TrigField {
  double offset = 0.0;
  double sin_coef = 0.0;
  double cos_coef = 0.0;
  int freq = 1;

  double operator()(const TorusPoint& x) const;
  bool is_zero() const { return offset == 0.0 && sin_coef == 0.0 && cos_coef == 0.0; }
  double mean() const { return offset; }
  // Reads "<prefix>.offset", "<prefix>.sin", "<prefix>.cos", "<prefix>.freq".
  static TrigField FromParams(const ParamMap& params, const std::string& prefix);
  static TrigField FromParams(const ParamMap& params, const std::string& prefix,
                              TrigField fallback);
};

struct ControlModel {
  std::string name;
  int d = 1;

  std::function<double(const TorusPoint&, const Vec& p, double u)> H;
  std::function<double(const TorusPoint&, const Vec& v, double u)> L;
  // dL/du (x, v, 0); negative everywhere.
  std::function<double(const TorusPoint&, const Vec& v)> dLdu0;
  // dH/du (x, p, 0); positive everywhere.
  std::function<double(const TorusPoint&, const Vec& p)> dHdu0;
  std::function<double(const TorusPoint&)> sigma;
  std::function<double(const TorusPoint&, double lambda)> V;
  std::function<double(const TorusPoint&)> V0;

  // Optional split L(x,v,u) = L(x,v,0) + u_part(x,u). When u_part_slope is
  // also set the split is affine: u_part(x,u) = -u_part_slope(x) * u.
  std::function<double(const TorusPoint&, double u)> u_part;
  std::function<double(const TorusPoint&)> u_part_slope;

  // Analytic value of inf_u H(x, 0, u) when the infimum is only reached in a
  // limit (used by the nonexistence certificate).
  std::function<double(const TorusPoint&)> H0_u_infimum;

  // Critical value c(H^0) used by the solvers; builtins start from the
  // analytic value and pipelines overwrite it with the discrete one.
  double c0 = 0.0;
  std::optional<double> analytic_c;
  double p_box = 6.0;
  int fenchel_samples = 129;
  ParamMap params;

  double L0(const TorusPoint& x, const Vec& v) const { return L(x, v, 0.0); }
};

// max over the m^d momentum lattice in [-p_box, p_box]^d of <p,v> - H(x,p,u).
// Throws a numerical error when the maximiser sits on the lattice boundary.
double FenchelLagrangian(const ControlModel& model, const TorusPoint& x, const Vec& v,
                         double u, int samples_per_axis);

std::vector<std::string> BuiltinModelNames();

// Builtins: mechanical, shifted_quadratic, arctan_discount, sigma_discounted.
ControlModel BuiltinModel(const std::string& name, const ParamMap& params, int d = 1);

// User model from a Hamiltonian: L is the numeric conjugate. dLdu0 and dHdu0
// must be supplied analytically.
ControlModel CustomModel(int d, std::function<double(const TorusPoint&, const Vec&, double)> H,
                         std::function<double(const TorusPoint&, const Vec&)> dLdu0,
                         std::function<double(const TorusPoint&, const Vec&)> dHdu0,
                         std::function<double(const TorusPoint&, double)> V,
                         double c0);

struct VelocitySet {
  int d = 1;
  int per_axis = 0;
  double vmax = 0.0;
  double step = 0.0;
  std::vector<Vec> velocities;

  std::size_t size() const { return velocities.size(); }
  const Vec& operator[](std::size_t k) const { return velocities[k]; }
  std::size_t zero_index() const;
  // True when some component of velocity k equals +-vmax.
  bool on_boundary(std::size_t k) const;
  double speed(std::size_t k) const;
};

// Uniform symmetric lattice {-vmax, ..., vmax} per axis with an odd number of
// points per axis.
VelocitySet MakeVelocitySet(int d, double vmax, int per_axis);

struct ModelCheckReport {
  bool L_decreasing_in_u = true;
  bool dLdu0_negative = true;
  bool fenchel_young = true;
  bool potential_converges = true;
  double max_fenchel_young_violation = 0.0;
  std::vector<std::string> messages;
  bool ok() const {
    return L_decreasing_in_u && dLdu0_negative && fenchel_young && potential_converges;
  }
};

// Sampled checks of the structural assumptions on a grid and velocity set.
ModelCheckReport CheckModel(const ControlModel& model, const PeriodicGrid& grid,
                            const VelocitySet& vset);

double ParamDouble(const ParamMap& params, const std::string& key, double fallback);
int ParamInt(const ParamMap& params, const std::string& key, int fallback);
std::vector<double> ParamList(const ParamMap& params, const std::string& key,
                              std::vector<double> fallback);

}  // namespace wks

#endif  // WKS_MODELS_HPP_
