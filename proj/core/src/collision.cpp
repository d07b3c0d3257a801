#include "condkin/collision.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace condkin {

namespace {

inline double interp(const PairEntry& e, const ArrayXr& v) {
  return e.c[0] * v(e.s[0]) + e.c[1] * v(e.s[1]) + e.c[2] * v(e.s[2]) +
         e.c[3] * v(e.s[3]);
}

}  // namespace

CollisionOperator::CollisionOperator(const MomentumGrid& grid, int subdiv)
    : grid_(&grid), subdiv_(subdiv) {
  if (subdiv < 1) throw std::invalid_argument("collision: subdiv must be >= 1");
  t_.omega = std::pow(M_PI, 3) * grid.da() * grid.da() * grid.dE() * grid.dE();
  build_pairs_();
  compute_nu_();
}

CollisionOperator::CollisionOperator(const MomentumGrid& grid, CollisionTables tables,
                                     int subdiv)
    : grid_(&grid), t_(std::move(tables)), subdiv_(subdiv) {
  if (subdiv < 1) throw std::invalid_argument("collision: subdiv must be >= 1");
}

void CollisionOperator::build_pairs_() {
  const MomentumGrid& g = *grid_;
  const double shift = g.params().manifold_shift();
  // Identical shifts make the occupancy product relation exact along the
  // manifold; the kernel coefficients then share one detailed-balance weight.
  const bool balanced = g.params().energy_shift() == shift;
  const int n = g.size();
  t_.pairs.reserve(static_cast<std::size_t>(n) * 8);
  for (int n2 = 0; n2 < n; ++n2) {
    const double a2 = g.a()(n2);
    const double E2 = g.E()(n2);
    const double P2 = g.P()(n2);
    const double onep2 = g.one_plus_P()(n2);
    for (int n3 = 0; n3 < n; ++n3) {
      const double a1 = a2 + g.a()(n3);
      const double E1 = E2 + g.E()(n3) + shift;
      if (!g.admissible(a1, E1)) continue;
      const InterpStencil st = g.locate_clamped(a1, E1);
      if (!st.valid) continue;
      PairEntry e;
      e.n2 = n2;
      e.n3 = n3;
      for (int d = 0; d < 4; ++d) {
        e.s[d] = st.node[d];
        e.c[d] = st.w[d];
      }
      e.P1 = g.planck(E1);
      e.one_plus_P1 = 1.0 + e.P1;
      const double P3 = g.P()(n3);
      const double onep3 = g.one_plus_P()(n3);
      if (balanced) {
        const double F = t_.omega * e.P1 * onep2 * onep3;
        e.F1 = e.F2 = e.F3 = F;
      } else {
        e.F1 = t_.omega * (1.0 + P2 + P3) * e.P1 * e.one_plus_P1;
        e.F2 = t_.omega * (P3 - e.P1) * P2 * onep2;
        e.F3 = t_.omega * (P2 - e.P1) * P3 * onep3;
      }
      t_.pairs.push_back(e);
    }
  }
  t_.pairs.shrink_to_fit();
}

const std::vector<CollisionOperator::FreePoint>& CollisionOperator::free_points_()
    const {
  if (fp_built_) return fp_;
  const MomentumGrid& g = *grid_;
  const ModelParams& p = g.params();
  const int na = p.n_axial * subdiv_;
  const int nE = p.n_radial * subdiv_;
  const double E_lo = 2.0 * p.Lambda_cut * p.Lambda_cut;
  const double da = 2.0 * p.p_max / na;
  const double dE = (p.p_max * p.p_max - E_lo) / nE;
  fp_.reserve(static_cast<std::size_t>(na) * nE / 2);
  for (int i = 0; i < na; ++i) {
    const double a = -p.p_max + (i + 0.5) * da;
    for (int j = 0; j < nE; ++j) {
      const double E = E_lo + (j + 0.5) * dE;
      if (!g.admissible(a, E)) continue;
      FreePoint fp;
      fp.a = a;
      fp.E = E;
      fp.P = g.planck(E);
      fp.one_plus_P = 1.0 + fp.P;
      fp.st = g.locate_clamped(a, E);
      fp_.push_back(fp);
    }
  }
  fp_.shrink_to_fit();
  fp_built_ = true;
  return fp_;
}

void CollisionOperator::compute_nu_() {
  const MomentumGrid& g = *grid_;
  const double shift = g.params().manifold_shift();
  const double w2 = M_PI * M_PI * g.da() * g.dE() / (subdiv_ * subdiv_);
  const int n = g.size();
  const std::vector<FreePoint>& fps = free_points_();
  t_.nu.resize(n);
  for (int i = 0; i < n; ++i) {
    const double a = g.a()(i);
    const double E = g.E()(i);
    double t1 = 0.0, t2 = 0.0;
    for (const FreePoint& fp : fps) {
      // role 1: partner p3 = p - p_m - shift
      const double a3 = a - fp.a;
      const double E3 = E - fp.E - shift;
      if (g.admissible(a3, E3)) t1 += 1.0 + fp.P + g.planck(E3);
      // role 2: partner p1 = p + p_m + shift
      const double a1 = a + fp.a;
      const double E1 = E + fp.E + shift;
      if (g.admissible(a1, E1)) t2 += fp.P - g.planck(E1);
    }
    t_.nu(i) = w2 * (t1 + 2.0 * t2);
  }
}

ArrayXr CollisionOperator::apply_L(const ArrayXr& h) const {
  const MomentumGrid& g = *grid_;
  const ArrayXr hb = h * g.inv_one_plus_P();
  ArrayXr acc = ArrayXr::Zero(g.size());
  for (const PairEntry& e : t_.pairs) {
    const double J = -e.F1 * interp(e, hb) + e.F2 * hb(e.n2) + e.F3 * hb(e.n3);
    for (int d = 0; d < 4; ++d) acc(e.s[d]) += J * e.c[d];
    acc(e.n2) -= J;
    acc(e.n3) -= J;
  }
  return acc / (g.cell_weight() * g.P());
}

ArrayXc CollisionOperator::apply_L(const ArrayXc& h) const {
  const ArrayXr re = apply_L(ArrayXr(h.real()));
  const ArrayXr im = apply_L(ArrayXr(h.imag()));
  ArrayXc out(re.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

ArrayXr CollisionOperator::apply_Q(const ArrayXr& gf, const ArrayXr& hf) const {
  const MomentumGrid& g = *grid_;
  const ArrayXr gb = gf * g.inv_one_plus_P();
  const ArrayXr hb = hf * g.inv_one_plus_P();
  ArrayXr acc = ArrayXr::Zero(g.size());
  for (const PairEntry& e : t_.pairs) {
    const double g1 = e.one_plus_P1 * interp(e, gb);
    const double h1 = e.one_plus_P1 * interp(e, hb);
    const double P2 = g.P()(e.n2), P3 = g.P()(e.n3);
    const double g2 = gf(e.n2), g3 = gf(e.n3);
    const double h2 = hf(e.n2), h3 = hf(e.n3);
    const double t1 = P2 * P3 * (g2 * h3 + g3 * h2);
    const double t2 = e.P1 * g1 * (P2 * h2 + P3 * h3);
    const double t3 = e.P1 * h1 * (P2 * g2 + P3 * g3);
    const double Qm = 0.5 * t_.omega * (t1 - (t2 + t3));
    for (int d = 0; d < 4; ++d) acc(e.s[d]) += Qm * e.c[d];
    acc(e.n2) -= Qm;
    acc(e.n3) -= Qm;
  }
  return acc / g.cell_weight();
}

ArrayXr CollisionOperator::apply_K(const ArrayXr& h) const {
  const MomentumGrid& g = *grid_;
  const double shift = g.params().manifold_shift();
  const double w2 = M_PI * M_PI * g.da() * g.dE() / (subdiv_ * subdiv_);
  const ArrayXr hb = h * g.inv_one_plus_P();
  const std::vector<FreePoint>& fps = free_points_();
  // the unknown sampled at each free point (zero where the stencil leaves A)
  ArrayXr hf(static_cast<Eigen::Index>(fps.size()));
  for (std::size_t m = 0; m < fps.size(); ++m) {
    const FreePoint& fp = fps[m];
    hf(m) = fp.st.valid ? fp.one_plus_P * (fp.st.w[0] * hb(fp.st.node[0]) +
                                           fp.st.w[1] * hb(fp.st.node[1]) +
                                           fp.st.w[2] * hb(fp.st.node[2]) +
                                           fp.st.w[3] * hb(fp.st.node[3]))
                        : 0.0;
  }
  const int n = g.size();
  ArrayXr out(n);
  for (int i = 0; i < n; ++i) {
    const double a = g.a()(i);
    const double E = g.E()(i);
    const double P = g.P()(i);
    double acc = 0.0;
    for (std::size_t m = 0; m < fps.size(); ++m) {
      const FreePoint& fp = fps[m];
      // role 1: gain from pairs (p_m, p3) with p3 = p - p_m - shift
      const double a3 = a - fp.a;
      const double E3 = E - fp.E - shift;
      if (g.admissible(a3, E3)) acc += (g.planck(E3) - P) * fp.P * hf(m);
      // role 2: partner p1 = p + p_m + shift feeds both remaining terms
      const double a1 = a + fp.a;
      const double E1 = E + fp.E + shift;
      if (g.admissible(a1, E1)) {
        const double P1 = g.planck(E1);
        acc += (P1 - P) * fp.P * hf(m);
        const InterpStencil st = g.locate_clamped(a1, E1);
        if (st.valid) {
          const double h1 = (1.0 + P1) * (st.w[0] * hb(st.node[0]) +
                                          st.w[1] * hb(st.node[1]) +
                                          st.w[2] * hb(st.node[2]) +
                                          st.w[3] * hb(st.node[3]));
          acc += (1.0 + P + fp.P) * P1 * h1;
        }
      }
    }
    out(i) = 2.0 * w2 * acc / P;
  }
  return out;
}

ArrayXc CollisionOperator::apply_K(const ArrayXc& h) const {
  const ArrayXr re = apply_K(ArrayXr(h.real()));
  const ArrayXr im = apply_K(ArrayXr(h.imag()));
  ArrayXc out(re.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

ArrayXr CollisionOperator::apply_L_split(const ArrayXr& h) const {
  return apply_K(h) - t_.nu * h;
}

RhsSlice CollisionOperator::fused_apply(const ArrayXr& s) const {
  const MomentumGrid& g = *grid_;
  const ArrayXr sb = s * g.inv_one_plus_P();
  ArrayXr accL = ArrayXr::Zero(g.size());
  ArrayXr accQ = ArrayXr::Zero(g.size());
  double sumJ = 0.0, sumQ = 0.0;
  for (const PairEntry& e : t_.pairs) {
    const double sb1 = interp(e, sb);
    const double s2 = s(e.n2), s3 = s(e.n3);
    const double P2 = g.P()(e.n2), P3 = g.P()(e.n3);
    const double J = -e.F1 * sb1 + e.F2 * sb(e.n2) + e.F3 * sb(e.n3);
    const double s1 = e.one_plus_P1 * sb1;
    const double t1 = P2 * P3 * (s2 * s3 + s3 * s2);
    const double t23 = e.P1 * s1 * (P2 * s2 + P3 * s3);
    const double Qm = 0.5 * t_.omega * (t1 - (t23 + t23));
    sumJ += J;
    sumQ += Qm;
    for (int d = 0; d < 4; ++d) {
      accL(e.s[d]) += J * e.c[d];
      accQ(e.s[d]) += Qm * e.c[d];
    }
    accL(e.n2) -= J;
    accL(e.n3) -= J;
    accQ(e.n2) -= Qm;
    accQ(e.n3) -= Qm;
  }
  RhsSlice r;
  r.Ls = accL / (g.cell_weight() * g.P());
  r.Qss = accQ / g.cell_weight();
  r.m_PLs = -sumJ;
  r.m_Q = -sumQ;
  r.m_Ps = g.cell_weight() * (g.P() * s).sum();
  return r;
}

ArrayXr CollisionOperator::collision_rhs(const ArrayXr& f, double n_c) const {
  const MomentumGrid& g = *grid_;
  if ((f <= 0.0).any())
    throw std::domain_error("collision_rhs: f must be strictly positive");
  if (n_c == 0.0) return ArrayXr::Zero(g.size());
  // deviation field in the interpolation convention r = (f - P)/(P (1+P))
  const ArrayXr r = (f - g.P()) * g.inv_one_plus_P() / g.P();
  ArrayXr acc = ArrayXr::Zero(g.size());
  for (const PairEntry& e : t_.pairs) {
    const double f1 = e.P1 * (1.0 + e.one_plus_P1 * interp(e, r));
    const double f2 = f(e.n2), f3 = f(e.n3);
    const double mass = t_.omega * (f2 * f3 - f1 * (1.0 + f2 + f3));
    for (int d = 0; d < 4; ++d) acc(e.s[d]) += mass * e.c[d];
    acc(e.n2) -= mass;
    acc(e.n3) -= mass;
  }
  const double pref = g.params().g * g.params().gamma * n_c / g.cell_weight();
  return pref * acc;
}

Eigen::MatrixXd CollisionOperator::dense_L() const {
  const MomentumGrid& g = *grid_;
  const int n = g.size();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  // per entry: six touched rows (deposit side), six touched columns (input side)
  int rows[6];
  double rw[6];
  int cols[6];
  double cw[6];
  for (const PairEntry& e : t_.pairs) {
    for (int d = 0; d < 4; ++d) {
      rows[d] = e.s[d];
      rw[d] = e.c[d];
      cols[d] = e.s[d];
      cw[d] = -e.F1 * e.c[d] * g.inv_one_plus_P()(e.s[d]);
    }
    rows[4] = e.n2;
    rw[4] = -1.0;
    rows[5] = e.n3;
    rw[5] = -1.0;
    cols[4] = e.n2;
    cw[4] = e.F2 * g.inv_one_plus_P()(e.n2);
    cols[5] = e.n3;
    cw[5] = e.F3 * g.inv_one_plus_P()(e.n3);
    for (int ri = 0; ri < 6; ++ri)
      for (int ci = 0; ci < 6; ++ci) M(rows[ri], cols[ci]) += rw[ri] * cw[ci];
  }
  const ArrayXr scale = 1.0 / (g.cell_weight() * g.P());
  return scale.matrix().asDiagonal() * M;
}

Eigen::MatrixXd CollisionOperator::dense_K() const {
  const MomentumGrid& g = *grid_;
  const double shift = g.params().manifold_shift();
  const double w2 = M_PI * M_PI * g.da() * g.dE() / (subdiv_ * subdiv_);
  const std::vector<FreePoint>& fps = free_points_();
  const int n = g.size();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double a = g.a()(i);
    const double E = g.E()(i);
    const double P = g.P()(i);
    const double pref = 2.0 * w2 / P;
    for (const FreePoint& fp : fps) {
      const double a3 = a - fp.a;
      const double E3 = E - fp.E - shift;
      double node_coef = 0.0;
      if (g.admissible(a3, E3)) node_coef += pref * (g.planck(E3) - P) * fp.P;
      const double a1 = a + fp.a;
      const double E1 = E + fp.E + shift;
      if (g.admissible(a1, E1)) {
        const double P1 = g.planck(E1);
        node_coef += pref * (P1 - P) * fp.P;
        const InterpStencil st = g.locate_clamped(a1, E1);
        if (st.valid) {
          const double c = pref * (1.0 + P + fp.P) * P1 * (1.0 + P1);
          for (int d = 0; d < 4; ++d)
            M(i, st.node[d]) += c * st.w[d] * g.inv_one_plus_P()(st.node[d]);
        }
      }
      if (node_coef != 0.0 && fp.st.valid) {
        const double c = node_coef * fp.one_plus_P;
        for (int d = 0; d < 4; ++d)
          M(i, fp.st.node[d]) += c * fp.st.w[d] * g.inv_one_plus_P()(fp.st.node[d]);
      }
    }
  }
  return M;
}

}  // namespace condkin
