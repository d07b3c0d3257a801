#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "condkin/fields.hpp"
#include "condkin/grid.hpp"

namespace condkin {

// One admitted point of the reduced resonance quadrature. Nodes (n2, n3) act
// as roles 2 and 3; the role-1 partner p1 = (a2+a3, E2+E3+g*n0) is off-grid
// and carried as its bilinear stencil plus analytic equilibrium factors.
// F1..F3 are the linearized-kernel coefficients premultiplied by the entry
// weight omega = pi^3 (da dE)^2; when the occupancy shift matches the
// manifold shift all three collapse to the common detailed-balance weight
// omega * P1 (1+P2)(1+P3), which makes the assembled operator symmetric and
// nonpositive by construction.
struct PairEntry {
  int32_t n2, n3;
  int32_t s[4];
  double c[4];
  double P1;
  double one_plus_P1;
  double F1, F2, F3;
};

// Output of the fused per-slice pass used by the time steppers.
struct RhsSlice {
  ArrayXr Ls;     // L applied to the slice
  ArrayXr Qss;    // Q(slice, slice)
  double m_PLs;   // integral of P * Ls
  double m_Ps;    // integral of P * slice
  double m_Q;     // integral of Qss
};

// Everything derived from the grid that the operators need at apply time;
// serializable (see tables_io.hpp).
struct CollisionTables {
  double omega = 0.0;
  std::vector<PairEntry> pairs;
  ArrayXr nu;
};

class CollisionOperator {
 public:
  // subdiv refines the free-variable quadrature of the gather route (nu, K)
  // by subdiv x subdiv midpoints per grid cell; the deposit route is
  // node-resolved and unaffected.
  static constexpr int kDefaultSubdiv = 8;

  explicit CollisionOperator(const MomentumGrid& grid,
                             int subdiv = kDefaultSubdiv);
  CollisionOperator(const MomentumGrid& grid, CollisionTables tables,
                    int subdiv = kDefaultSubdiv);

  const MomentumGrid& grid() const { return *grid_; }
  const CollisionTables& tables() const { return t_; }
  const ArrayXr& nu() const { return t_.nu; }
  double omega() const { return t_.omega; }
  const std::vector<PairEntry>& pairs() const { return t_.pairs; }
  int subdiv() const { return subdiv_; }

  // Deposit route: one pass over the pair table.
  ArrayXr apply_L(const ArrayXr& h) const;
  ArrayXc apply_L(const ArrayXc& h) const;
  ArrayXr apply_Q(const ArrayXr& g, const ArrayXr& h) const;

  // Gather route: per-output-node partner loops.
  ArrayXr apply_K(const ArrayXr& h) const;
  ArrayXc apply_K(const ArrayXc& h) const;
  ArrayXr apply_L_split(const ArrayXr& h) const;  // K h - nu h

  // L, Q(s,s) and the three field moments in a single sweep.
  RhsSlice fused_apply(const ArrayXr& s) const;

  // Full nonlinear collision term for one x-slice of f (> 0 required).
  ArrayXr collision_rhs(const ArrayXr& f, double n_c) const;

  // Dense materializations for the diagnostic/spectral path.
  Eigen::MatrixXd dense_L() const;
  Eigen::MatrixXd dense_K() const;

 private:
  // One admissible midpoint of the refined free-variable mesh, with the
  // interpolation stencil used when the unknown is sampled there.
  struct FreePoint {
    double a, E, P, one_plus_P;
    InterpStencil st;
  };

  void build_pairs_();
  void compute_nu_();
  const std::vector<FreePoint>& free_points_() const;

  const MomentumGrid* grid_;
  CollisionTables t_;
  int subdiv_;
  mutable std::vector<FreePoint> fp_;
  mutable bool fp_built_ = false;
};

}  // namespace condkin
