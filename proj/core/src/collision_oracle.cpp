#include "condkin/collision_oracle.hpp"

#include <algorithm>
#include <cmath>

namespace condkin::oracle {

namespace {

struct ShellRange {
  double lo, hi, step;
  int count;
};

// midpoint mesh over [center - support*sigma, center + support*sigma] ∩ [0, u_max]
ShellRange shell_range(double center, double u_max, const MollifierOptions& opt) {
  ShellRange r{};
  const double half = opt.support * opt.sigma;
  r.lo = std::max(0.0, center - half);
  r.hi = std::min(u_max, center + half);
  r.step = opt.du_over_sigma * opt.sigma;
  r.count = r.hi > r.lo ? static_cast<int>(std::ceil((r.hi - r.lo) / r.step)) : 0;
  if (r.count > 0) r.step = (r.hi - r.lo) / r.count;
  return r;
}

inline double gauss(double x, double sigma) {
  return std::exp(-0.5 * (x / sigma) * (x / sigma)) /
         (sigma * std::sqrt(2.0 * M_PI));
}

}  // namespace

double role1_integral(const MomentumGrid& grid, double a, double E,
                      const RoleWeight& W, const MollifierOptions& opt) {
  const ModelParams& p = grid.params();
  const double shift = p.manifold_shift();
  const double u_max = p.p_max * p.p_max;
  const double da = 2.0 * p.p_max / opt.n_a;
  const double du = u_max / opt.n_u;
  double acc = 0.0;
  for (int ia = 0; ia < opt.n_a; ++ia) {
    const double a2 = -p.p_max + (ia + 0.5) * da;
    const double a3 = a - a2;
    for (int iu = 0; iu < opt.n_u; ++iu) {
      const double u2 = (iu + 0.5) * du;
      const double E2 = a2 * a2 + u2;
      if (!grid.admissible(a2, E2)) continue;
      // shell in u3: E - E2 - E3 - shift = 0 with E3 = a3^2 + u3
      const double center = E - E2 - shift - a3 * a3;
      const ShellRange r = shell_range(center, u_max, opt);
      double inner = 0.0;
      for (int k = 0; k < r.count; ++k) {
        const double u3 = r.lo + (k + 0.5) * r.step;
        const double E3 = a3 * a3 + u3;
        if (!grid.admissible(a3, E3)) continue;
        inner += W(a2, E2, a3, E3) * gauss(E - E2 - E3 - shift, opt.sigma);
      }
      acc += inner * r.step;
    }
  }
  return M_PI * M_PI * da * du * acc;
}

double role2_integral(const MomentumGrid& grid, double a, double E,
                      const RoleWeight& W, const MollifierOptions& opt) {
  const ModelParams& p = grid.params();
  const double shift = p.manifold_shift();
  const double u_max = p.p_max * p.p_max;
  const double da = 2.0 * p.p_max / opt.n_a;
  const double du = u_max / opt.n_u;
  double acc = 0.0;
  for (int ia = 0; ia < opt.n_a; ++ia) {
    const double a3 = -p.p_max + (ia + 0.5) * da;
    const double a1 = a + a3;
    for (int iu = 0; iu < opt.n_u; ++iu) {
      const double u3 = (iu + 0.5) * du;
      const double E3 = a3 * a3 + u3;
      if (!grid.admissible(a3, E3)) continue;
      // shell in u1: E1 - E - E3 - shift = 0 with E1 = a1^2 + u1
      const double center = E + E3 + shift - a1 * a1;
      const ShellRange r = shell_range(center, u_max, opt);
      double inner = 0.0;
      for (int k = 0; k < r.count; ++k) {
        const double u1 = r.lo + (k + 0.5) * r.step;
        const double E1 = a1 * a1 + u1;
        if (!grid.admissible(a1, E1)) continue;
        inner += W(a1, E1, a3, E3) * gauss(E1 - E - E3 - shift, opt.sigma);
      }
      acc += inner * r.step;
    }
  }
  return M_PI * M_PI * da * du * acc;
}

double nu_value(const MomentumGrid& grid, double a, double E,
                const MollifierOptions& opt) {
  const double t1 = role1_integral(
      grid, a, E,
      [&](double, double E2, double, double E3) {
        return 1.0 + grid.planck(E2) + grid.planck(E3);
      },
      opt);
  const double t2 = role2_integral(
      grid, a, E,
      [&](double, double E1, double, double E3) {
        return grid.planck(E3) - grid.planck(E1);
      },
      opt);
  return t1 + 2.0 * t2;
}

double K_value(const MomentumGrid& grid,
               const std::function<double(double, double)>& h, double a,
               double E, const MollifierOptions& opt) {
  const double P = grid.planck(E);
  const double gain = role1_integral(
      grid, a, E,
      [&](double a2, double E2, double, double E3) {
        return (grid.planck(E3) - P) * grid.planck(E2) * h(a2, E2);
      },
      opt);
  const double t_b = role2_integral(
      grid, a, E,
      [&](double a1, double E1, double, double E3) {
        return (1.0 + P + grid.planck(E3)) * grid.planck(E1) * h(a1, E1);
      },
      opt);
  const double t_c = role2_integral(
      grid, a, E,
      [&](double, double E1, double a3, double E3) {
        return (grid.planck(E1) - P) * grid.planck(E3) * h(a3, E3);
      },
      opt);
  return 2.0 / P * (gain + t_b + t_c);
}

}  // namespace condkin::oracle
