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

#include "wks/hj_solve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wks/error.hpp"
#include "wks/parallel.hpp"

namespace wks {

double DefaultDt(const PeriodicGrid& grid, const VelocitySet& vset) {
  return 0.4 * grid.h() / vset.vmax;
}

Scheme::Scheme(const ControlModel& model, const PeriodicGrid& grid, const VelocitySet& vset,
               double dt)
    : model_(&model), grid_(grid), vset_(vset), dt_(dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) Fail(ErrorKind::kConfiguration, "dt must be positive");
  if (vset.d != grid.d() || model.d != grid.d()) {
    Fail(ErrorKind::kConfiguration, "model, grid and velocity set dimensions differ");
  }
  separable_ = static_cast<bool>(model.u_part);
  affine_ = separable_ && static_cast<bool>(model.u_part_slope);
  const std::size_t n = grid.node_count();
  const std::size_t m = vset.size();
  foot_.resize(n * m);
  dt_l0_.resize(n * m);
  dldu0_.resize(n * m);
  slope_.assign(n, 0.0);
  points_.resize(n);
  ParallelFor(n, [&](std::size_t i) {
    TorusPoint x = grid.node(i);
    points_[i] = x;
    if (affine_) slope_[i] = model.u_part_slope(x);
    for (std::size_t k = 0; k < m; ++k) {
      const Vec& v = vset[k];
      Vec y{x.coords[0] - v[0] * dt, x.coords[1] - v[1] * dt};
      foot_[i * m + k] = MakeStencil(grid, WrapPoint(y, grid.d()));
      dt_l0_[i * m + k] = dt * model.L0(x, v);
      dldu0_[i * m + k] = model.dLdu0(x, v);
    }
  }, 8);
}

double Scheme::MinAction(const std::vector<double>& f, std::size_t i, std::size_t* argmin) const {
  const std::size_t m = vset_.size();
  const Stencil* st = &foot_[i * m];
  const double* l0 = &dt_l0_[i * m];
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t k = 0; k < m; ++k) {
    double val = l0[k] + st[k].apply(f);
    if (val < best) {
      best = val;
      arg = k;
    }
  }
  if (argmin) *argmin = arg;
  return best;
}

double Scheme::DtL(std::size_t i, std::size_t k, double w) const {
  if (separable_) return dtL0(i, k) + dt_ * model_->u_part(points_[i], w);
  return dt_ * model_->L(points_[i], vset_[k], w);
}

double Scheme::Apply(const std::vector<double>& u, std::size_t i, double lambda, double v_i,
                     std::size_t* argmin) const {
  const double w = lambda * u[i];
  const double tail = dt_ * (model_->c0 - lambda * v_i);
  if (separable_) {
    return MinAction(u, i, argmin) + dt_ * model_->u_part(points_[i], w) + tail;
  }
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t k = 0; k < vset_.size(); ++k) {
    double val = DtL(i, k, w) + foot(i, k).apply(u);
    if (val < best) {
      best = val;
      arg = k;
    }
  }
  if (argmin) *argmin = arg;
  return best + tail;
}

double Scheme::ImplicitUpdate(const std::vector<double>& u, std::size_t i, double lambda,
                              double v_i, double guess) const {
  const double tail = dt_ * (model_->c0 - lambda * v_i);
  if (affine_) {
    return (MinAction(u, i) + tail) / (1.0 + dt_ * lambda * slope_[i]);
  }
  // g is strictly increasing because L decreases in u.
  std::function<double(double)> g;
  if (separable_) {
    const double a = MinAction(u, i) + tail;
    g = [&, a](double w) { return w - dt_ * model_->u_part(points_[i], lambda * w) - a; };
  } else {
    g = [&, tail](double w) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < vset_.size(); ++k) {
        best = std::min(best, DtL(i, k, lambda * w) + foot(i, k).apply(u));
      }
      return w - best - tail;
    };
  }
  double g0 = g(guess);
  if (g0 == 0.0) return guess;
  double step = std::max(1e-3, 1e-3 * std::fabs(guess));
  double lo = guess, hi = guess;
  if (g0 > 0.0) {
    for (int it = 0; it < 200; ++it) {
      lo = guess - step;
      if (g(lo) <= 0.0) break;
      hi = lo;
      step *= 2.0;
    }
  } else {
    for (int it = 0; it < 200; ++it) {
      hi = guess + step;
      if (g(hi) >= 0.0) break;
      lo = hi;
      step *= 2.0;
    }
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (g(mid) > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> SamplePotential(const ControlModel& model, const PeriodicGrid& grid,
                                    double lambda) {
  std::vector<double> out(grid.node_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = model.V(grid.node(i), lambda);
  return out;
}

SolveResult SolvePerturbed(const ControlModel& model, double lambda, const PeriodicGrid& grid,
                           const VelocitySet& vset, const SolveOptions& options) {
  double dt = options.dt > 0.0 ? options.dt : DefaultDt(grid, vset);
  Scheme scheme(model, grid, vset, dt);
  return SolvePerturbed(scheme, lambda, options);
}

SolveResult SolvePerturbed(const Scheme& scheme, double lambda, const SolveOptions& options) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    Fail(ErrorKind::kConfiguration, "lambda must be positive");
  }
  if (!(options.tol > 0.0)) Fail(ErrorKind::kConfiguration, "tolerance must be positive");
  const PeriodicGrid& grid = scheme.grid();
  const std::size_t n = grid.node_count();
  const double dt = scheme.dt();
  const Bracket* br = options.bracket;
  if (br && !(br->lower.grid() == grid && br->upper.grid() == grid)) {
    Fail(ErrorKind::kConfiguration, "bracket lives on a different grid");
  }

  SolveResult out{GridField(grid), SolveReport{}};
  SolveReport& rep = out.report;
  rep.lambda = lambda;
  rep.dt = dt;
  rep.lambda_above_lambda0 = br && lambda > br->lambda0;

  std::vector<double> u(n, 0.0);
  if (options.init) {
    if (!(options.init->grid() == grid)) {
      Fail(ErrorKind::kConfiguration, "initial field lives on a different grid");
    }
    u = options.init->values();
  } else if (br) {
    for (std::size_t i = 0; i < n; ++i) u[i] = 0.5 * (br->lower[i] + br->upper[i]);
  }
  const std::vector<double> pot = SamplePotential(scheme.model(), grid, lambda);

  std::vector<double> next(n), defect(n);
  std::vector<char> clamped(n, 0);
  for (std::size_t iter = 0;; ++iter) {
    ParallelFor(n, [&](std::size_t i) {
      double explicit_value = scheme.Apply(u, i, lambda, pot[i]);
      defect[i] = std::fabs(u[i] - explicit_value) / dt;
      double w = scheme.ImplicitUpdate(u, i, lambda, pot[i], u[i]);
      clamped[i] = 0;
      if (br && options.clamp) {
        if (w < br->lower[i] - 1e-9 || w > br->upper[i] + 1e-9) clamped[i] = 1;
        w = std::clamp(w, br->lower[i], br->upper[i]);
      }
      next[i] = w;
    }, 64);
    double res = 0.0;
    for (double d : defect) res = std::max(res, d);
    if (!std::isfinite(res)) {
      rep.final_residual = res;
      rep.iterations = iter;
      break;
    }
    if (options.record_history) rep.residual_history.push_back(res);
    rep.final_residual = res;
    rep.iterations = iter;
    if (res <= options.tol) {
      rep.converged = true;
      break;
    }
    if (iter >= options.max_iter) break;
    u.swap(next);
  }
  if (br) {
    for (std::size_t i = 0; i < n; ++i) {
      if (clamped[i] || u[i] < br->lower[i] - 1e-9 || u[i] > br->upper[i] + 1e-9) {
        ++rep.bracket_violations;
      }
    }
  }
  out.u.values() = std::move(u);
  return out;
}

double Residual(const Scheme& scheme, double lambda, const GridField& u) {
  if (!(u.grid() == scheme.grid())) Fail(ErrorKind::kConfiguration, "field grid mismatch");
  const std::vector<double> pot = SamplePotential(scheme.model(), scheme.grid(), lambda);
  std::vector<double> defect(u.size());
  ParallelFor(u.size(), [&](std::size_t i) {
    defect[i] = std::fabs(u[i] - scheme.Apply(u.values(), i, lambda, pot[i])) / scheme.dt();
  }, 64);
  double res = 0.0;
  for (double d : defect) res = std::max(res, d);
  return res;
}

double Residual(const ControlModel& model, double lambda, const GridField& u,
                const VelocitySet& vset, double dt) {
  Scheme scheme(model, u.grid(), vset, dt);
  return Residual(scheme, lambda, u);
}

namespace {

std::vector<std::size_t> SampleNodes(const PeriodicGrid& grid, std::size_t target) {
  std::vector<std::size_t> nodes;
  std::size_t stride = std::max<std::size_t>(1, grid.node_count() / target);
  for (std::size_t i = 0; i < grid.node_count(); i += stride) nodes.push_back(i);
  return nodes;
}

std::vector<Vec> MomentumLattice(int d, double radius, int per_axis) {
  std::vector<Vec> out;
  double step = 2.0 * radius / (per_axis - 1);
  for (int i = 0; i < per_axis; ++i) {
    double a = -radius + i * step;
    if (d == 1) {
      out.push_back(Vec{a, 0.0});
      continue;
    }
    for (int j = 0; j < per_axis; ++j) out.push_back(Vec{a, -radius + j * step});
  }
  return out;
}

double Norm(const Vec& p, int d) { return d == 1 ? std::fabs(p[0]) : std::hypot(p[0], p[1]); }

}  // namespace

Bracket ComputeBracket(const ControlModel& model, const GridField& critical_solution) {
  const PeriodicGrid& grid = critical_solution.grid();
  const int d = grid.d();
  const auto nodes = SampleNodes(grid, d == 1 ? 128 : 256);
  Bracket b{GridField(grid), GridField(grid)};

  // K0 = sup{|p| : H(x,p,0) <= c0}
  const auto wide = MomentumLattice(d, model.p_box, d == 1 ? 1201 : 81);
  double k0 = 0.0;
  for (std::size_t i : nodes) {
    TorusPoint x = grid.node(i);
    for (const Vec& p : wide) {
      if (model.H(x, p, 0.0) <= model.c0 + 1e-12) k0 = std::max(k0, Norm(p, d));
    }
  }
  b.K0 = k0;

  const auto small = MomentumLattice(d, std::max(k0, 1e-9), d == 1 ? 41 : 21);
  double delta = std::numeric_limits<double>::infinity();
  for (std::size_t i : nodes) {
    TorusPoint x = grid.node(i);
    for (const Vec& p : small) {
      if (Norm(p, d) <= k0 + 1e-12) delta = std::min(delta, model.dHdu0(x, p));
    }
  }
  if (!(delta > 0.0)) {
    Fail(ErrorKind::kDomain, "dH/du(x,p,0) is not positive on S0; the model violates (H4)");
  }
  b.delta = delta;

  double vsup = 0.0;
  for (double lambda : {0.0, 1e-3, 1e-2, 0.1}) {
    for (std::size_t i : nodes) vsup = std::max(vsup, std::fabs(model.V(grid.node(i), lambda)));
  }
  b.kappa = 1.0 + vsup;
  const double diam = std::sqrt(static_cast<double>(d)) / 2.0;
  b.T = k0 * diam + b.kappa / delta;

  // Second-order remainder of L in u on |u| <= T.
  double c2 = 0.0;
  if (!static_cast<bool>(model.u_part_slope)) {
    const auto& vs = MakeVelocitySet(d, 1.0, 3);
    for (std::size_t i : nodes) {
      TorusPoint x = grid.node(i);
      for (const Vec& v : vs.velocities) {
        double l0 = model.L(x, v, 0.0);
        double dl = model.dLdu0(x, v);
        for (double frac : {0.05, 0.1, 0.25, 0.5, 1.0}) {
          for (double sgn : {-1.0, 1.0}) {
            double w = sgn * frac * b.T;
            c2 = std::max(c2, std::fabs(model.L(x, v, w) - l0 - w * dl) / (w * w));
          }
        }
      }
    }
  }
  b.C2 = c2;
  b.lambda0 = c2 > 0.0 ? std::min(0.1, delta / (2.0 * b.T * c2)) : 0.1;

  const double hi = critical_solution.max();
  const double lo = critical_solution.min();
  const double shift = b.kappa / delta;
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    b.lower[i] = critical_solution[i] - hi - shift;
    b.upper[i] = critical_solution[i] - lo + shift;
  }
  return b;
}

bool NonexistenceCertificate(const ControlModel& model, double lambda, const PeriodicGrid& grid,
                             double margin, NonexistenceDetail* detail) {
  const Vec zero{0.0, 0.0};
  double inf_all = std::numeric_limits<double>::infinity();
  std::size_t worst = 0;
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    TorusPoint x = grid.node(i);
    double inf_u = std::numeric_limits<double>::infinity();
    for (int e = -3; e <= 6; ++e) {
      for (double sgn : {-1.0, 1.0}) inf_u = std::min(inf_u, model.H(x, zero, sgn * std::pow(10.0, e)));
    }
    inf_u = std::min(inf_u, model.H(x, zero, 0.0));
    if (model.H0_u_infimum) inf_u = std::min(inf_u, model.H0_u_infimum(x));
    double val = inf_u + lambda * model.V(x, lambda);
    if (val < inf_all) {
      inf_all = val;
      worst = i;
    }
  }
  if (detail) {
    detail->infimum = inf_all;
    detail->threshold = model.c0 + margin;
    detail->worst_node = worst;
  }
  return inf_all > model.c0 + margin;
}

std::vector<SweepEntry> LambdaSweep(const ControlModel& model, const std::vector<double>& lambdas,
                                    const PeriodicGrid& grid, const VelocitySet& vset,
                                    const SolveOptions& options) {
  for (std::size_t k = 1; k < lambdas.size(); ++k) {
    if (!(lambdas[k] < lambdas[k - 1])) {
      Fail(ErrorKind::kConfiguration, "lambda schedule must be strictly descending");
    }
  }
  std::vector<SweepEntry> out;
  if (lambdas.empty()) return out;
  double dt = options.dt > 0.0 ? options.dt : DefaultDt(grid, vset);
  Scheme scheme(model, grid, vset, dt);
  std::optional<GridField> warm;
  if (options.init) warm = *options.init;
  for (double lambda : lambdas) {
    SweepEntry entry;
    entry.lambda = lambda;
    try {
      SolveOptions opts = options;
      opts.init = warm ? &*warm : nullptr;
      entry.result = SolvePerturbed(scheme, lambda, opts);
      warm = entry.result->u;
    } catch (const Error& e) {
      entry.error = e.what();
    }
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace wks
