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

#include "wks/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "wks/error.hpp"

namespace wks {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double Dot(const Vec& a, const Vec& b, int d) {
  double acc = 0.0;
  for (int i = 0; i < d; ++i) acc += a[i] * b[i];
  return acc;
}

double Norm2(const Vec& a, int d) { return Dot(a, a, d); }

double SampledMax(const TrigField& f, int d) {
  const int samples = d == 1 ? 8192 : 512;
  double best = -std::numeric_limits<double>::infinity();
  TorusPoint p;
  p.d = d;
  for (int i = 0; i < samples; ++i) {
    p.coords[0] = static_cast<double>(i) / samples;
    if (d == 1) {
      best = std::max(best, f(p));
      continue;
    }
    for (int j = 0; j < samples; ++j) {
      p.coords[1] = static_cast<double>(j) / samples;
      best = std::max(best, f(p));
    }
  }
  return best;
}

double SampledMin(const TrigField& f, int d) {
  TrigField neg{-f.offset, -f.sin_coef, -f.cos_coef, f.freq};
  return -SampledMax(neg, d);
}

void CheckKeys(const ParamMap& params, const std::string& model,
               const std::set<std::string>& prefixes, const std::set<std::string>& plain) {
  for (const auto& [key, value] : params) {
    if (plain.count(key)) continue;
    auto dot = key.find('.');
    if (dot != std::string::npos && prefixes.count(key.substr(0, dot))) {
      static const std::set<std::string> kSuffixes{"offset", "sin", "cos", "freq", "slope"};
      if (kSuffixes.count(key.substr(dot + 1))) continue;
    }
    Fail(ErrorKind::kConfiguration, "model '" + model + "' does not accept parameter '" + key + "'");
  }
}

struct Potential {
  TrigField base;
  double slope = 0.0;
};

Potential ReadPotential(const ParamMap& params, const std::string& prefix, TrigField fallback) {
  Potential pot;
  pot.base = TrigField::FromParams(params, prefix, fallback);
  pot.slope = ParamDouble(params, prefix + ".slope", 0.0);
  return pot;
}

TrigField ReadSigma(const ParamMap& params, int d) {
  TrigField sigma = TrigField::FromParams(params, "sigma", TrigField{1.0, 0.0, 0.0, 1});
  if (SampledMin(sigma, d) <= 0.0) {
    Fail(ErrorKind::kConfiguration, "sigma must be strictly positive");
  }
  return sigma;
}

}  // namespace

double TrigField::operator()(const TorusPoint& x) const {
  double acc = offset;
  if (sin_coef == 0.0 && cos_coef == 0.0) return acc;
  for (int a = 0; a < x.d; ++a) {
    double arg = kTwoPi * freq * x.coords[a];
    acc += sin_coef * std::sin(arg) + cos_coef * std::cos(arg);
  }
  return acc;
}

TrigField TrigField::FromParams(const ParamMap& params, const std::string& prefix) {
  return FromParams(params, prefix, TrigField{});
}

TrigField TrigField::FromParams(const ParamMap& params, const std::string& prefix,
                                TrigField fallback) {
  TrigField f = fallback;
  f.offset = ParamDouble(params, prefix + ".offset", f.offset);
  f.sin_coef = ParamDouble(params, prefix + ".sin", f.sin_coef);
  f.cos_coef = ParamDouble(params, prefix + ".cos", f.cos_coef);
  f.freq = ParamInt(params, prefix + ".freq", f.freq);
  return f;
}

double ParamDouble(const ParamMap& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  try {
    std::size_t used = 0;
    double v = std::stod(it->second, &used);
    if (it->second.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    Fail(ErrorKind::kConfiguration, "parameter '" + key + "' is not a number: " + it->second);
  }
}

int ParamInt(const ParamMap& params, const std::string& key, int fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  double v = ParamDouble(params, key, fallback);
  if (v != std::floor(v)) {
    Fail(ErrorKind::kConfiguration, "parameter '" + key + "' must be an integer");
  }
  return static_cast<int>(v);
}

std::vector<double> ParamList(const ParamMap& params, const std::string& key,
                              std::vector<double> fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    ParamMap one{{key, item}};
    out.push_back(ParamDouble(one, key, 0.0));
  }
  return out;
}

double FenchelLagrangian(const ControlModel& model, const TorusPoint& x, const Vec& v,
                         double u, int samples_per_axis) {
  if (samples_per_axis < 33) {
    Fail(ErrorKind::kConfiguration, "Fenchel transform needs at least 33 samples per axis");
  }
  const int m = samples_per_axis;
  const double box = model.p_box;
  const double step = 2.0 * box / (m - 1);
  double best = -std::numeric_limits<double>::infinity();
  std::array<int, 2> arg{0, 0};
  const int m1 = model.d == 2 ? m : 1;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m1; ++j) {
      Vec p{-box + i * step, model.d == 2 ? -box + j * step : 0.0};
      double val = Dot(p, v, model.d) - model.H(x, p, u);
      if (val > best) {
        best = val;
        arg = {i, j};
      }
    }
  }
  bool boundary = arg[0] == 0 || arg[0] == m - 1 ||
                  (model.d == 2 && (arg[1] == 0 || arg[1] == m - 1));
  if (boundary) {
    Fail(ErrorKind::kNumerical, "p_box too small: Fenchel maximiser on the box boundary");
  }
  return best;
}

std::vector<std::string> BuiltinModelNames() {
  return {"mechanical", "shifted_quadratic", "arctan_discount", "sigma_discounted"};
}

ControlModel BuiltinModel(const std::string& name, const ParamMap& params, int d) {
  if (d != 1 && d != 2) Fail(ErrorKind::kConfiguration, "model dimension must be 1 or 2");
  ControlModel m;
  m.name = name;
  m.d = d;
  m.params = params;
  m.p_box = ParamDouble(params, "p_box", 6.0);
  m.fenchel_samples = ParamInt(params, "fenchel_samples", 129);

  if (name == "mechanical" || name == "sigma_discounted") {
    const bool discounted = name == "sigma_discounted";
    if (discounted) {
      CheckKeys(params, name, {"U", "sigma", "phi"}, {"p_box", "fenchel_samples"});
    } else {
      CheckKeys(params, name, {"U", "sigma", "V"}, {"p_box", "fenchel_samples"});
    }
    TrigField U = TrigField::FromParams(params, "U");
    TrigField sigma = ReadSigma(params, d);
    m.H = [=](const TorusPoint& x, const Vec& p, double u) {
      return sigma(x) * u + 0.5 * Norm2(p, d) + U(x);
    };
    m.L = [=](const TorusPoint& x, const Vec& v, double u) {
      return 0.5 * Norm2(v, d) - U(x) - sigma(x) * u;
    };
    m.dLdu0 = [=](const TorusPoint& x, const Vec&) { return -sigma(x); };
    m.dHdu0 = [=](const TorusPoint& x, const Vec&) { return sigma(x); };
    m.sigma = [=](const TorusPoint& x) { return sigma(x); };
    m.u_part = [=](const TorusPoint& x, double u) { return -sigma(x) * u; };
    m.u_part_slope = [=](const TorusPoint& x) { return sigma(x); };
    if (discounted) {
      // sigma lambda u + G(x, p) - lambda sigma phi = c(G)
      TrigField phi = TrigField::FromParams(params, "phi");
      double slope = ParamDouble(params, "phi.slope", 0.0);
      m.V0 = [=](const TorusPoint& x) { return -sigma(x) * phi(x); };
      m.V = [=](const TorusPoint& x, double lambda) {
        return -sigma(x) * phi(x) + lambda * slope;
      };
    } else {
      Potential pot = ReadPotential(params, "V", TrigField{});
      m.V0 = [=](const TorusPoint& x) { return pot.base(x); };
      m.V = [=](const TorusPoint& x, double lambda) { return pot.base(x) + lambda * pot.slope; };
    }
    m.analytic_c = SampledMax(U, d);
    m.c0 = *m.analytic_c;
    return m;
  }

  if (name == "shifted_quadratic") {
    CheckKeys(params, name, {"V"}, {"alpha", "p_box", "fenchel_samples"});
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    std::vector<double> alpha_list = ParamList(params, "alpha", {golden, golden});
    if (alpha_list.size() == 1) alpha_list.push_back(alpha_list[0]);
    if (alpha_list.size() != 2 && !(d == 1 && !alpha_list.empty())) {
      Fail(ErrorKind::kConfiguration, "alpha needs one entry per axis");
    }
    Vec alpha{alpha_list[0], d == 2 ? alpha_list[1] : 0.0};
    Potential pot = ReadPotential(params, "V", TrigField{});
    m.H = [=](const TorusPoint&, const Vec& p, double u) {
      Vec q{p[0] + alpha[0], p[1] + alpha[1]};
      return u + 0.5 * Norm2(q, d);
    };
    m.L = [=](const TorusPoint&, const Vec& v, double u) {
      return 0.5 * Norm2(v, d) - Dot(alpha, v, d) - u;
    };
    m.dLdu0 = [](const TorusPoint&, const Vec&) { return -1.0; };
    m.dHdu0 = [](const TorusPoint&, const Vec&) { return 1.0; };
    m.sigma = [](const TorusPoint&) { return 1.0; };
    m.u_part = [](const TorusPoint&, double u) { return -u; };
    m.u_part_slope = [](const TorusPoint&) { return 1.0; };
    m.V0 = [=](const TorusPoint& x) { return pot.base(x); };
    m.V = [=](const TorusPoint& x, double lambda) { return pot.base(x) + lambda * pot.slope; };
    m.analytic_c = 0.5 * Norm2(alpha, d);
    m.c0 = *m.analytic_c;
    return m;
  }

  if (name == "arctan_discount") {
    CheckKeys(params, name, {"V"}, {"p_box", "fenchel_samples"});
    Potential pot = ReadPotential(params, "V", TrigField{std::numbers::pi / 2.0, 0.0, 0.0, 1});
    m.H = [=](const TorusPoint&, const Vec& p, double u) { return std::atan(u) + Norm2(p, d); };
    m.L = [=](const TorusPoint&, const Vec& v, double u) {
      return 0.25 * Norm2(v, d) - std::atan(u);
    };
    m.dLdu0 = [](const TorusPoint&, const Vec&) { return -1.0; };
    m.dHdu0 = [](const TorusPoint&, const Vec&) { return 1.0; };
    m.sigma = [](const TorusPoint&) { return 1.0; };
    m.u_part = [](const TorusPoint&, double u) { return -std::atan(u); };
    m.H0_u_infimum = [](const TorusPoint&) { return -std::numbers::pi / 2.0; };
    m.V0 = [=](const TorusPoint& x) { return pot.base(x); };
    m.V = [=](const TorusPoint& x, double lambda) { return pot.base(x) + lambda * pot.slope; };
    m.analytic_c = 0.0;
    m.c0 = 0.0;
    return m;
  }

  Fail(ErrorKind::kConfiguration, "unknown model '" + name + "'");
}

ControlModel CustomModel(int d, std::function<double(const TorusPoint&, const Vec&, double)> H,
                         std::function<double(const TorusPoint&, const Vec&)> dLdu0,
                         std::function<double(const TorusPoint&, const Vec&)> dHdu0,
                         std::function<double(const TorusPoint&, double)> V, double c0) {
  ControlModel m;
  m.name = "custom";
  m.d = d;
  m.H = std::move(H);
  m.dLdu0 = std::move(dLdu0);
  m.dHdu0 = std::move(dHdu0);
  m.V = std::move(V);
  auto v_fn = m.V;
  m.V0 = [v_fn](const TorusPoint& x) { return v_fn(x, 0.0); };
  m.sigma = [](const TorusPoint&) { return 1.0; };
  m.c0 = c0;
  // The conjugate is evaluated against a copy holding only H, so the closure
  // does not refer back to the model being built.
  ControlModel h_only;
  h_only.d = d;
  h_only.H = m.H;
  m.L = [h_only](const TorusPoint& x, const Vec& v, double u) {
    return FenchelLagrangian(h_only, x, v, u, h_only.fenchel_samples);
  };
  return m;
}

std::size_t VelocitySet::zero_index() const {
  const std::size_t mid = static_cast<std::size_t>(per_axis / 2);
  return d == 1 ? mid : mid * per_axis + mid;
}

bool VelocitySet::on_boundary(std::size_t k) const {
  for (int a = 0; a < d; ++a) {
    if (std::fabs(std::fabs(velocities[k][a]) - vmax) <= 1e-12 * vmax) return true;
  }
  return false;
}

double VelocitySet::speed(std::size_t k) const { return std::sqrt(Norm2(velocities[k], d)); }

VelocitySet MakeVelocitySet(int d, double vmax, int per_axis) {
  if (d != 1 && d != 2) Fail(ErrorKind::kConfiguration, "velocity set dimension must be 1 or 2");
  if (!(vmax > 0.0) || !std::isfinite(vmax)) {
    Fail(ErrorKind::kConfiguration, "vmax must be positive");
  }
  if (per_axis < 3 || per_axis % 2 == 0) {
    Fail(ErrorKind::kConfiguration,
         "velocity lattice needs an odd number (>= 3) of points per axis, got " +
             std::to_string(per_axis));
  }
  VelocitySet vs;
  vs.d = d;
  vs.per_axis = per_axis;
  vs.vmax = vmax;
  vs.step = 2.0 * vmax / (per_axis - 1);
  const int half = per_axis / 2;
  auto coord = [&](int i) { return i == half ? 0.0 : (i - half) * vs.step; };
  for (int i = 0; i < per_axis; ++i) {
    if (d == 1) {
      vs.velocities.push_back(Vec{coord(i), 0.0});
      continue;
    }
    for (int j = 0; j < per_axis; ++j) vs.velocities.push_back(Vec{coord(i), coord(j)});
  }
  return vs;
}

ModelCheckReport CheckModel(const ControlModel& model, const PeriodicGrid& grid,
                            const VelocitySet& vset) {
  ModelCheckReport r;
  const std::size_t stride = std::max<std::size_t>(1, grid.node_count() / 32);
  const double us[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  const double p_step = 0.5;
  for (std::size_t i = 0; i < grid.node_count(); i += stride) {
    TorusPoint x = grid.node(i);
    for (std::size_t k = 0; k < vset.size(); ++k) {
      const Vec& v = vset[k];
      if (!(model.dLdu0(x, v) < 0.0)) {
        r.dLdu0_negative = false;
      }
      for (int a = 0; a + 1 < 5; ++a) {
        if (!(model.L(x, v, us[a]) > model.L(x, v, us[a + 1]))) r.L_decreasing_in_u = false;
      }
      for (double u : {-0.5, 0.0, 0.5}) {
        double lval = model.L(x, v, u);
        for (double p0 = -3.0; p0 <= 3.0; p0 += p_step) {
          Vec p{p0, model.d == 2 ? -p0 / 2 : 0.0};
          double gap = lval + model.H(x, p, u) - Dot(p, v, model.d);
          if (gap < -1e-9) {
            r.fenchel_young = false;
            r.max_fenchel_young_violation = std::max(r.max_fenchel_young_violation, -gap);
          }
        }
      }
    }
  }
  if (!r.dLdu0_negative) r.messages.push_back("dL/du(x,v,0) is not negative everywhere");
  if (!r.L_decreasing_in_u) r.messages.push_back("L is not strictly decreasing in u");
  if (!r.fenchel_young) r.messages.push_back("Fenchel-Young inequality violated");

  double previous = std::numeric_limits<double>::infinity();
  for (double lambda = 0.1; lambda > 1e-4; lambda /= 2.0) {
    double sup = 0.0;
    for (std::size_t i = 0; i < grid.node_count(); i += stride) {
      TorusPoint x = grid.node(i);
      sup = std::max(sup, std::fabs(model.V(x, lambda) - model.V0(x)));
    }
    if (sup > 2.0 * previous + 1e-15) r.potential_converges = false;
    previous = sup;
  }
  if (previous > 1e-2) r.potential_converges = false;
  if (!r.potential_converges) r.messages.push_back("V(., lambda) does not converge to V0");
  return r;
}

}  // namespace wks
