#pragma once

#include <cmath>
#include <stdexcept>

#include "condkin/fields.hpp"
#include "condkin/grid.hpp"

namespace condkin {

// Weighted momentum-space inner product (f, h) = sum_i w_i mu_i f_i conj(h_i)
// with mu = P/(1+P). Conjugate-linear in the second argument.
inline double inner_product(const ArrayXr& f, const ArrayXr& h, const MomentumGrid& grid) {
  if (f.size() != grid.size() || h.size() != grid.size())
    throw std::invalid_argument("inner_product: field/grid length mismatch");
  return grid.cell_weight() * (grid.mu() * f * h).sum();
}

inline Complex inner_product(const ArrayXc& f, const ArrayXc& h, const MomentumGrid& grid) {
  if (f.size() != grid.size() || h.size() != grid.size())
    throw std::invalid_argument("inner_product: field/grid length mismatch");
  return grid.cell_weight() * (grid.mu() * f * h.conjugate()).sum();
}

// Same metric with an extra real multiplier (nu, (1+|p|)^3, ...).
inline double weighted_sq(const ArrayXc& h, const ArrayXr& extra, const MomentumGrid& grid) {
  return grid.cell_weight() * (grid.mu() * extra * h.abs2()).sum();
}

inline double weighted_sq(const ArrayXr& h, const ArrayXr& extra, const MomentumGrid& grid) {
  return grid.cell_weight() * (grid.mu() * extra * h.square()).sum();
}

// Every norm used by the estimates. For kinetic fields l2 is the
// x-and-momentum L^2 norm in the P/(1+P) metric; for wave fields it is the
// plain L^2(0,2pi) norm. h1_sum = l2 + dx_l2; h1_quad = sqrt(l2^2 + dx_l2^2).
// The nu- and cubic-weight entries are zero unless a weight was supplied.
struct NormReport {
  double l2 = 0.0;
  double dx_l2 = 0.0;
  double h1_sum = 0.0;
  double h1_quad = 0.0;
  double nu_half = 0.0;
  double nu_minus_half = 0.0;
  double wcube = 0.0;  // sqrt(((1+|p|)^3 h, h))
};

namespace detail {
inline void finish(NormReport& r) {
  r.l2 = std::sqrt(r.l2);
  r.dx_l2 = std::sqrt(r.dx_l2);
  r.h1_quad = std::sqrt(r.l2 * r.l2 + r.dx_l2 * r.dx_l2);
  r.h1_sum = r.l2 + r.dx_l2;
  r.nu_half = std::sqrt(r.nu_half);
  r.nu_minus_half = std::sqrt(r.nu_minus_half);
  r.wcube = std::sqrt(r.wcube);
}
}  // namespace detail

inline NormReport norms(const KineticField& h, const MomentumGrid& grid,
                        const ArrayXr* nu = nullptr) {
  NormReport r;
  const double two_pi = 2.0 * M_PI;
  ArrayXr cube;
  if (nu) cube = (1.0 + grid.abs_p()).cube();
  for (int k = 0; k <= h.K; ++k) {
    const double mult = (k == 0) ? two_pi : 2.0 * two_pi;  // +/- k pairing
    const ArrayXc& m = h.mode(k);
    const double sq = grid.cell_weight() * (grid.mu() * m.abs2()).sum();
    r.l2 += mult * sq;
    r.dx_l2 += mult * static_cast<double>(k) * k * sq;
    if (nu) {
      r.nu_half += mult * weighted_sq(m, *nu, grid);
      r.nu_minus_half += mult * weighted_sq(m, nu->inverse(), grid);
      r.wcube += mult * weighted_sq(m, cube, grid);
    }
  }
  detail::finish(r);
  return r;
}

inline NormReport norms(const WaveField& phi) {
  NormReport r;
  const double two_pi = 2.0 * M_PI;
  for (int n = -phi.N; n <= phi.N; ++n) {
    const double sq = std::norm(phi.coeff(n));
    r.l2 += two_pi * sq;
    r.dx_l2 += two_pi * static_cast<double>(n) * n * sq;
  }
  detail::finish(r);
  return r;
}

}  // namespace condkin
