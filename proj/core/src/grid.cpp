#include "condkin/grid.hpp"

#include <cmath>

namespace condkin {

MomentumGrid::MomentumGrid(const ModelParams& params) : params_(params) {
  params_.validate();
  n_axial_ = params_.n_axial;
  n_radial_ = params_.n_radial;

  const double lc2 = 2.0 * params_.Lambda_cut * params_.Lambda_cut;
  const double pmax2 = params_.p_max * params_.p_max;
  a_min_ = -params_.p_max;
  E_min_ = lc2;
  da_ = 2.0 * params_.p_max / n_axial_;
  dE_ = (pmax2 - lc2) / n_radial_;
  cell_weight_ = M_PI * da_ * dE_;
  eshift_ = params_.energy_shift();

  node_index_.assign(static_cast<std::size_t>(n_axial_) * n_radial_, -1);
  std::vector<double> av, Ev;
  for (int jE = 0; jE < n_radial_; ++jE) {
    const double E = E_min_ + (jE + 0.5) * dE_;
    for (int ia = 0; ia < n_axial_; ++ia) {
      // (2*ia + 1 - n) * p_max/n: bitwise antisymmetric under ia -> n-1-ia
      const double a = (2 * ia + 1 - n_axial_) * (params_.p_max / n_axial_);
      if (a * a > E) continue;  // cell-center membership in the admissible set
      node_index_[static_cast<std::size_t>(jE) * n_axial_ + ia] =
          static_cast<int>(av.size());
      av.push_back(a);
      Ev.push_back(E);
      axial_of_.push_back(ia);
      energy_of_.push_back(jE);
    }
  }

  const int n = static_cast<int>(av.size());
  a_.resize(n);
  u_.resize(n);
  E_.resize(n);
  absp_.resize(n);
  P_.resize(n);
  mu_.resize(n);
  onep_.resize(n);
  inv_onep_.resize(n);
  for (int i = 0; i < n; ++i) {
    a_[i] = av[i];
    E_[i] = Ev[i];
    u_[i] = Ev[i] - av[i] * av[i];
    absp_[i] = std::sqrt(Ev[i]);
    P_[i] = planck(Ev[i]);
    mu_[i] = std::exp(-(Ev[i] + eshift_));
    inv_onep_[i] = -std::expm1(-(Ev[i] + eshift_));  // 1/(1+P) without cancellation
    onep_[i] = 1.0 / inv_onep_[i];
  }

  // lowest row at which each cell column has all four nodes (n_radial_ = none);
  // node existence is monotone in E, so one threshold per column suffices
  cell_jmin_.assign(n_axial_ > 1 ? n_axial_ - 1 : 0, n_radial_);
  for (int ci = 0; ci + 1 < n_axial_; ++ci)
    for (int j = 0; j < n_radial_; ++j)
      if (node_at(ci, j) >= 0 && node_at(ci + 1, j) >= 0) {
        cell_jmin_[ci] = j;
        break;
      }
}

InterpStencil MomentumGrid::locate_clamped(double a, double E) const {
  InterpStencil s;
  if (n_axial_ < 2 || n_radial_ < 2) return s;
  const double fa = (a - a_min_) / da_ - 0.5;
  const double fE = (E - E_min_) / dE_ - 0.5;
  int ci = static_cast<int>(std::floor(fa));
  if (ci < 0) ci = 0;
  if (ci > n_axial_ - 2) ci = n_axial_ - 2;
  // rows below cell_jmin_ have missing corners; shifting the cell upward keeps
  // all four nodes while the unclamped fractions still reproduce linears
  const int jlo = cell_jmin_[ci];
  if (jlo > n_radial_ - 2) return s;
  int cj = static_cast<int>(std::floor(fE));
  if (cj < jlo) cj = jlo;
  if (cj > n_radial_ - 2) cj = n_radial_ - 2;
  const double ta = fa - ci;
  const double tE = fE - cj;
  s.node[0] = node_at(ci, cj);
  s.node[1] = node_at(ci + 1, cj);
  s.node[2] = node_at(ci, cj + 1);
  s.node[3] = node_at(ci + 1, cj + 1);
  s.w[0] = (1.0 - ta) * (1.0 - tE);
  s.w[1] = ta * (1.0 - tE);
  s.w[2] = (1.0 - ta) * tE;
  s.w[3] = ta * tE;
  s.valid = true;
  return s;
}

InterpStencil MomentumGrid::locate(double a, double E) const {
  InterpStencil s;
  const double fa = (a - a_min_) / da_ - 0.5;
  const double fE = (E - E_min_) / dE_ - 0.5;
  const int ia = static_cast<int>(std::floor(fa));
  const int jE = static_cast<int>(std::floor(fE));
  if (ia < 0 || ia + 1 >= n_axial_ || jE < 0 || jE + 1 >= n_radial_) return s;
  const double ta = fa - ia;
  const double tE = fE - jE;
  const int n00 = node_at(ia, jE);
  const int n10 = node_at(ia + 1, jE);
  const int n01 = node_at(ia, jE + 1);
  const int n11 = node_at(ia + 1, jE + 1);
  if (n00 < 0 || n10 < 0 || n01 < 0 || n11 < 0) return s;
  s.node[0] = n00;
  s.node[1] = n10;
  s.node[2] = n01;
  s.node[3] = n11;
  s.w[0] = (1.0 - ta) * (1.0 - tE);
  s.w[1] = ta * (1.0 - tE);
  s.w[2] = (1.0 - ta) * tE;
  s.w[3] = ta * tE;
  s.valid = true;
  return s;
}

}  // namespace condkin
