#pragma once

#include <cmath>
#include <stdexcept>

namespace condkin {

// Model and discretization constants.
//
// Momentum space is the truncated cylindrical domain
//   A = { (a, u) : u >= 0, 2*Lambda_cut^2 <= a^2 + u <= p_max^2 },
// where a = p_x is the axial momentum, u = p_r^2 the squared radial momentum,
// and the measure is dp = pi * da * du.
struct ModelParams {
  double g = 1.0;           // coupling constant, > 0
  double n0 = 0.1;          // equilibrium condensate density, > 0
  double gamma = 0.05;      // perturbation amplitude, in (0,1)
  double c_zeta = 0.25;     // decay-rate prefactor; zeta = c_zeta * gamma
  double Lambda_cut = 1.0;  // lower momentum cutoff, Lambda_cut > 2*sqrt(g*n0)
  double p_max = 3.0;       // outer truncation radius, p_max^2 > 2*Lambda_cut^2
  double e0 = -1.0;         // energy shift in the equilibrium occupancy; negative selects g*n0

  int n_axial = 48;         // cells along a
  int n_radial = 32;        // cells along E = |p|^2
  int n_modes = 4;          // x-Fourier modes k in {-n_modes, ..., n_modes}

  double lambda() const { return gamma * gamma; }
  double zeta() const { return c_zeta * gamma; }

  // Shift in the resonance-manifold constraint |p1|^2 = |p2|^2 + |p3|^2 + g*n0.
  double manifold_shift() const { return g * n0; }

  // Shift in the equilibrium occupancy 1/(exp(|p|^2 + e0) - 1).
  double energy_shift() const { return e0 < 0.0 ? g * n0 : e0; }

  void validate() const {
    if (!(g > 0.0)) throw std::invalid_argument("params: g must be > 0");
    if (!(n0 > 0.0)) throw std::invalid_argument("params: n0 must be > 0");
    if (!(gamma > 0.0 && gamma < 1.0))
      throw std::invalid_argument("params: gamma must lie in (0,1)");
    if (!(c_zeta > 0.0)) throw std::invalid_argument("params: c_zeta must be > 0");
    if (!(Lambda_cut > 2.0 * std::sqrt(g * n0)))
      throw std::invalid_argument("params: Lambda_cut must exceed 2*sqrt(g*n0)");
    if (!(p_max * p_max > 2.0 * Lambda_cut * Lambda_cut))
      throw std::invalid_argument("params: p_max^2 must exceed 2*Lambda_cut^2");
    if (n_axial < 2 || n_radial < 2)
      throw std::invalid_argument("params: momentum grid needs at least 2 cells per axis");
    if (n_modes < 0) throw std::invalid_argument("params: n_modes must be >= 0");
  }
};

}  // namespace condkin
