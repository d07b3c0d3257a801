#pragma once

#include <Eigen/Core>
#include <vector>

#include "condkin/params.hpp"

namespace condkin {

using ArrayXr = Eigen::ArrayXd;
using ArrayXc = Eigen::ArrayXcd;

// Bilinear interpolation stencil over one momentum cell. `node[d]` are flat
// node indices, `w[d]` the corner weights; `valid` is false when the query
// point falls outside the grid or any corner node is inadmissible.
struct InterpStencil {
  int node[4] = {-1, -1, -1, -1};
  double w[4] = {0.0, 0.0, 0.0, 0.0};
  bool valid = false;
};

// Midpoint tensor grid in (a, E) with a = p_x and E = |p|^2, clipped to the
// admissible annulus 2*Lambda_cut^2 <= E <= p_max^2, a^2 <= E. Since
// u = E - a^2 this is an area-preserving change of variables from (a, u), and
// every node carries the same quadrature weight pi * da * dE.
class MomentumGrid {
 public:
  explicit MomentumGrid(const ModelParams& params);

  const ModelParams& params() const { return params_; }

  int size() const { return static_cast<int>(a_.size()); }
  double cell_weight() const { return cell_weight_; }
  double total_weight() const { return cell_weight_ * size(); }

  int n_axial() const { return n_axial_; }
  int n_radial() const { return n_radial_; }
  double da() const { return da_; }
  double dE() const { return dE_; }
  double a_min() const { return a_min_; }
  double E_min() const { return E_min_; }

  // Per-node tables, all of length size().
  const ArrayXr& a() const { return a_; }        // axial momentum p_x
  const ArrayXr& u() const { return u_; }        // squared radial momentum
  const ArrayXr& E() const { return E_; }        // |p|^2
  const ArrayXr& abs_p() const { return absp_; } // |p|
  const ArrayXr& P() const { return P_; }        // equilibrium occupancy
  const ArrayXr& mu() const { return mu_; }      // P/(1+P) = exp(-(E+e0))
  const ArrayXr& one_plus_P() const { return onep_; }
  const ArrayXr& inv_one_plus_P() const { return inv_onep_; }

  // Index bookkeeping.
  int node_at(int ia, int jE) const {
    if (ia < 0 || ia >= n_axial_ || jE < 0 || jE >= n_radial_) return -1;
    return node_index_[static_cast<std::size_t>(jE) * n_axial_ + ia];
  }
  int axial_index(int node) const { return axial_of_[node]; }
  int energy_index(int node) const { return energy_of_[node]; }

  bool admissible(double a, double E) const {
    const double lc2 = 2.0 * params_.Lambda_cut * params_.Lambda_cut;
    return E >= lc2 && E <= params_.p_max * params_.p_max && a * a <= E;
  }

  // Bilinear stencil for an arbitrary point (a, E); valid only when all four
  // surrounding nodes exist.
  InterpStencil locate(double a, double E) const;

  // Like locate, but shifts the cell to the nearest fully populated one in the
  // same column (unclamped fractional weights, so linear functions are still
  // reproduced exactly); invalid only when the column has no complete cell.
  InterpStencil locate_clamped(double a, double E) const;

  // Equilibrium occupancy at energy E.
  double planck(double E) const { return 1.0 / std::expm1(E + eshift_); }

  // Total mass of the equilibrium state: integral of P plus the condensate.
  double M0() const { return cell_weight_ * P_.sum() + params_.n0; }
  // External trap constant g*(n0 - 2*M0).
  double U_ext() const { return params_.g * (params_.n0 - 2.0 * M0()); }

 private:
  ModelParams params_;
  int n_axial_ = 0;
  int n_radial_ = 0;
  double da_ = 0.0, dE_ = 0.0;
  double a_min_ = 0.0, E_min_ = 0.0;
  double cell_weight_ = 0.0;
  double eshift_ = 0.0;

  ArrayXr a_, u_, E_, absp_, P_, mu_, onep_, inv_onep_;
  std::vector<int> node_index_;  // (jE * n_axial + ia) -> flat node or -1
  std::vector<int> axial_of_, energy_of_;
  std::vector<int> cell_jmin_;  // per cell column, first row with a full cell
};

}  // namespace condkin
