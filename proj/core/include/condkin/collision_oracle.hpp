#pragma once

#include <functional>

#include "condkin/grid.hpp"

namespace condkin::oracle {

// Brute-force quadrature of the reduced resonance integrals with the energy
// constraint replaced by a unit-mass Gaussian of width sigma and the axial
// constraint kept exact. Entirely independent of the pair-table code path.
struct MollifierOptions {
  double sigma = 0.2;
  int n_a = 200;      // mesh cells along the free axial variable
  int n_u = 200;      // mesh cells along the free squared-radial variable
  double du_over_sigma = 1.0 / 8.0;  // shell-variable step as a fraction of sigma
  double support = 8.0;              // half-width of the shell window in sigmas
};

// Integrand weights receive (a2, E2, a3, E3) resp. (a1, E1, a3, E3).
using RoleWeight = std::function<double(double, double, double, double)>;

// integral over (a2, u2, u3) of pi^2 * W(p2, p3) * G_sigma(E - E2 - E3 - shift)
// with p = (a, E) in role 1 and chi restricted to p2, p3 admissible.
double role1_integral(const MomentumGrid& grid, double a, double E,
                      const RoleWeight& W, const MollifierOptions& opt);

// integral over (a3, u3, u1) of pi^2 * W(p1, p3) * G_sigma(E1 - E - E3 - shift)
// with p = (a, E) in role 2 and chi restricted to p1, p3 admissible.
double role2_integral(const MomentumGrid& grid, double a, double E,
                      const RoleWeight& W, const MollifierOptions& opt);

// Collision frequency at (a, E).
double nu_value(const MomentumGrid& grid, double a, double E,
                const MollifierOptions& opt);

// Gain operator applied to a smooth test function h(a, E), evaluated at (a, E).
double K_value(const MomentumGrid& grid,
               const std::function<double(double, double)>& h, double a,
               double E, const MollifierOptions& opt);

}  // namespace condkin::oracle
