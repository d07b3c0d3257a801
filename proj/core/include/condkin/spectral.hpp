#pragma once

#include <string>

#include "condkin/collision.hpp"
#include "condkin/grid.hpp"

namespace condkin {

// Orthonormal basis of the kernel of the linearized collision operator in the
// occupancy-weighted metric: an odd direction along p_x(1+P) and an even one
// along (|p|^2 + g*n0)(1+P), plus the moment-coupling constant
// kappa = (p_x chi_2, chi_x).
struct KernelBasis {
  ArrayXr chi_x;
  ArrayXr chi_2;
  double kappa = 0.0;
};

// Throws std::runtime_error when the grid carries no odd direction (all axial
// momenta zero).
KernelBasis build_kernel_basis(const MomentumGrid& grid);

// Orthogonal splitting h = h_par + h_perp against the kernel basis, with the
// two kernel coefficients exposed.
struct Splitting {
  ArrayXr h_par;
  ArrayXr h_perp;
  double c_x = 0.0;
  double c_2 = 0.0;
};
struct SplittingC {
  ArrayXc h_par;
  ArrayXc h_perp;
  Complex c_x{0.0, 0.0};
  Complex c_2{0.0, 0.0};
};

Splitting project(const ArrayXr& h, const KernelBasis& basis,
                  const MomentumGrid& grid);
SplittingC project(const ArrayXc& h, const KernelBasis& basis,
                   const MomentumGrid& grid);

// Discrete coercivity constant of -L over the orthogonal complement of the
// kernel, measured against the cubic-weight metric ((1+|p|)^3 h, h), computed
// by a generalized eigenvalue analysis of the dense operator restricted to
// the complement.
//
// On the truncated domain the outer energy band E > p_max^2 - 2*Lambda_cut^2
// - g*n0 cannot act as a collision partner, so the resonance quadrature
// leaves near-null directions there whose quotients shrink like the mesh
// width; c_full (the literal minimum over the whole complement) and
// spurious_dim document that band. The grid-stable gap c_hat is taken over
// functions supported in the collisionally two-sided interior, a further
// 1.5*Lambda_cut^2 below the partner-closure threshold (E <= E_cut).
// `indefinite` flags a quotient below -tolerance anywhere, which would
// signal a broken discretization.
struct GapEstimate {
  double c_hat = 0.0;
  double c_full = 0.0;
  double E_cut = 0.0;
  int spurious_dim = 0;
  bool indefinite = false;
};
GapEstimate estimate_gap(const CollisionOperator& op, const KernelBasis& basis);

// Envelope constants of the collision frequency: bounds of nu / (1+|p|)^3
// over the grid. Throws std::runtime_error on nonpositive nu.
struct NuBounds {
  double nu0_hat = 0.0;
  double nu1_hat = 0.0;
};
NuBounds fit_nu_bounds(const MomentumGrid& grid, const ArrayXr& nu);

// Least-squares slope of log(nu) against log(1+|p|) over the outer half of
// the |p| range; the cubic envelope predicts a value near 3.
double fit_nu_exponent(const MomentumGrid& grid, const ArrayXr& nu);

// Leading singular values (descending) of the gain operator viewed as a map
// from the nu-weighted to the inverse-nu-weighted metric; their decay is the
// numerical signature of compactness.
ArrayXr k_singular_values(const CollisionOperator& op, int count);

// JSON document with the gap, frequency bounds, exponent fit, kappa, the
// leading singular values, and grid metadata.
std::string spectral_report_json(const CollisionOperator& op,
                                 const KernelBasis& basis,
                                 const GapEstimate& gap, int sv_count = 8);

}  // namespace condkin
