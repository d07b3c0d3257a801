#include "condkin/kinetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "condkin/norms.hpp"

namespace condkin {

namespace {

ArrayXc mode_phase(const ArrayXr& a, int k, double tau) {
  const double f = -static_cast<double>(k) * tau;
  return (f * a).unaryExpr([](double th) { return std::polar(1.0, th); });
}

KineticField derivative_x(const KineticField& s) {
  KineticField d(s.K, s.nodes());
  for (int k = 1; k <= s.K; ++k) d.mode(k) = Complex(0.0, k) * s.mode(k);
  return d;
}

struct SplitField {
  KineticField par;
  KineticField perp;
};

SplitField split(const KineticField& s, const KernelBasis& basis,
                 const MomentumGrid& grid) {
  SplitField out{KineticField(s.K, s.nodes()), KineticField(s.K, s.nodes())};
  for (int k = 0; k <= s.K; ++k) {
    const SplittingC p = project(s.mode(k), basis, grid);
    out.par.mode(k) = p.h_par;
    out.perp.mode(k) = p.h_perp;
  }
  return out;
}

Complex weighted_moment(const ArrayXc& m, const ArrayXr& chi,
                        const MomentumGrid& grid) {
  return grid.cell_weight() * (grid.mu() * m * chi).sum();
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& v) {
  double acc = 0.0;
  for (std::size_t m = 1; m < t.size(); ++m)
    acc += 0.5 * (v[m - 1] + v[m]) * (t[m] - t[m - 1]);
  return acc;
}

double safe_ratio(double lhs, double rhs) { return rhs > 0.0 ? lhs / rhs : 0.0; }

}  // namespace

KineticField assemble_kinetic_rhs(const KineticField& s, const WaveField& phi,
                                  double t, const ModelParams& params,
                                  const CollisionOperator& op) {
  const MomentumGrid& grid = op.grid();
  if (s.nodes() != grid.size())
    throw std::invalid_argument("kinetic rhs: state/grid length mismatch");

  const int band = std::max(s.K, phi.N);
  const int M = 3 * band + 2;
  const SpectralX sp(M);

  const ArrayXc psi = std::sqrt(params.n0) + params.gamma * sp.synth(phi.c);
  const ArrayXr n_c = sp.truncate(ArrayXr(psi.abs2()), band);

  const Eigen::MatrixXd slices = sp.to_collocation(s);
  Eigen::MatrixXd ls(grid.size(), M), qp(grid.size(), M);
  for (int j = 0; j < M; ++j) {
    const RhsSlice r = op.fused_apply(slices.col(j).array());
    ls.col(j) = r.Ls.matrix();
    qp.col(j) = (r.Qss / grid.P()).matrix();
  }
  for (Eigen::Index i = 0; i < qp.rows(); ++i)
    qp.row(i) = sp.truncate(ArrayXr(qp.row(i).transpose().array()), band)
                    .matrix()
                    .transpose();

  const double gg = params.g * params.gamma;
  const double decay = params.gamma * std::exp(-params.zeta() * t);
  Eigen::MatrixXd vals(grid.size(), M);
  for (int j = 0; j < M; ++j)
    vals.col(j) = gg * n_c(j) * (ls.col(j).array() + decay * qp.col(j).array());

  KineticField out = sp.to_kinetic(vals, s.K);
  const double zeta = params.zeta();
  for (int k = 0; k <= s.K; ++k) out.mode(k) += zeta * s.mode(k);
  return out;
}

KineticField step_kinetic(const KineticField& s, const KineticRHS& rhs,
                          double t, double dt, const MomentumGrid& grid,
                          const ArrayXr& implicit_loss, KineticScheme scheme) {
  bool imex = false;
  const bool has_loss = implicit_loss.size() > 0;
  if (has_loss && implicit_loss.size() != grid.size())
    throw std::invalid_argument("kinetic step: loss/grid length mismatch");
  switch (scheme) {
    case KineticScheme::Explicit:
      break;
    case KineticScheme::IMEX:
      imex = has_loss;
      break;
    case KineticScheme::Auto:
      imex = has_loss && dt * implicit_loss.maxCoeff() >= 0.8;
      break;
  }

  const ArrayXr& a = grid.a();
  const KineticField f0 = rhs(s, t);
  KineticField mid(s.K, s.nodes());
  for (int k = 0; k <= s.K; ++k) {
    ArrayXc expl = s.mode(k) + (0.5 * dt) * f0.mode(k);
    if (imex) expl += (0.5 * dt) * (implicit_loss * s.mode(k));
    mid.mode(k) = mode_phase(a, k, 0.5 * dt) * expl;
    if (imex) mid.mode(k) /= (1.0 + 0.5 * dt * implicit_loss);
  }

  const KineticField fm = rhs(mid, t + 0.5 * dt);
  KineticField out(s.K, s.nodes());
  for (int k = 0; k <= s.K; ++k)
    out.mode(k) = mode_phase(a, k, dt) * s.mode(k) +
                  dt * (mode_phase(a, k, 0.5 * dt) * fm.mode(k));
  return out;
}

MomentResidualSeries moment_ode_residual(const KineticTrajectory& traj,
                                         const KernelBasis& basis,
                                         const MomentumGrid& grid,
                                         const KineticRHS& rhs) {
  const std::size_t n = traj.times.size();
  if (n < 3 || traj.states.size() != n)
    throw std::invalid_argument("moment residual: need at least three samples");
  const int K = traj.states.front().K;
  const ArrayXr px_chi2 = grid.a() * basis.chi_2;
  const ArrayXr px_chix = grid.a() * basis.chi_x;

  struct Row {
    std::vector<Complex> h2, hx, flux2, fluxx, g2, gx;
  };
  std::vector<Row> rows(n);
  for (std::size_t m = 0; m < n; ++m) {
    const KineticField& s = traj.states[m];
    const KineticField f = rhs(s, traj.times[m]);
    Row& r = rows[m];
    r.h2.resize(K + 1);
    r.hx.resize(K + 1);
    r.flux2.resize(K + 1);
    r.fluxx.resize(K + 1);
    r.g2.resize(K + 1);
    r.gx.resize(K + 1);
    for (int k = 0; k <= K; ++k) {
      const SplittingC p = project(s.mode(k), basis, grid);
      r.h2[k] = p.c_2;
      r.hx[k] = p.c_x;
      r.flux2[k] = weighted_moment(p.h_perp, px_chi2, grid);
      r.fluxx[k] = weighted_moment(p.h_perp, px_chix, grid);
      r.g2[k] = weighted_moment(f.mode(k), basis.chi_2, grid);
      r.gx[k] = weighted_moment(f.mode(k), basis.chi_x, grid);
    }
  }

  MomentResidualSeries out;
  out.times.assign(traj.times.begin() + 1, traj.times.end() - 1);
  out.chi2.resize(static_cast<Eigen::Index>(n) - 2, K + 1);
  out.chix.resize(static_cast<Eigen::Index>(n) - 2, K + 1);
  for (std::size_t m = 1; m + 1 < n; ++m) {
    const double span = traj.times[m + 1] - traj.times[m - 1];
    for (int k = 0; k <= K; ++k) {
      const Complex ik(0.0, static_cast<double>(k));
      const Complex d2 = (rows[m + 1].h2[k] - rows[m - 1].h2[k]) / span;
      const Complex dx = (rows[m + 1].hx[k] - rows[m - 1].hx[k]) / span;
      const Complex r2 =
          d2 + ik * (basis.kappa * rows[m].hx[k] + rows[m].flux2[k]) -
          rows[m].g2[k];
      const Complex rx =
          dx + ik * (basis.kappa * rows[m].h2[k] + rows[m].fluxx[k]) -
          rows[m].gx[k];
      out.chi2(static_cast<Eigen::Index>(m) - 1, k) = std::abs(r2);
      out.chix(static_cast<Eigen::Index>(m) - 1, k) = std::abs(rx);
    }
  }
  out.max_chi2 = out.chi2.size() ? out.chi2.maxCoeff() : 0.0;
  out.max_chix = out.chix.size() ? out.chix.maxCoeff() : 0.0;
  return out;
}

AprioriNormReport apriori_norm_report(const KineticTrajectory& traj,
                                      const KineticRHS& rhs,
                                      const ModelParams& params,
                                      const KernelBasis& basis,
                                      const MomentumGrid& grid,
                                      const CollisionOperator& op) {
  const std::size_t n = traj.times.size();
  if (n < 2 || traj.states.size() != n)
    throw std::invalid_argument("norm report: need at least two samples");
  const double gamma = params.gamma;
  const double gg2 = params.g * gamma * gamma;
  const double gn0 = params.g * params.gamma * params.n0;
  const ArrayXr& nu = op.nu();

  std::vector<double> sup_sq(2, 0.0);
  std::vector<std::vector<double>> nu_perp(2), par(2), g_perp(2), g_par(2),
      par_sq(2);
  for (int v = 0; v < 2; ++v) {
    nu_perp[v].resize(n);
    par[v].resize(n);
    g_perp[v].resize(n);
    g_par[v].resize(n);
    par_sq[v].resize(n);
  }

  for (std::size_t m = 0; m < n; ++m) {
    const KineticField& s = traj.states[m];
    KineticField g(s.K, s.nodes());
    const KineticField f = rhs(s, traj.times[m]);
    for (int k = 0; k <= s.K; ++k)
      g.mode(k) = (f.mode(k) - gn0 * op.apply_L(s.mode(k))) / gg2;

    for (int v = 0; v < 2; ++v) {
      const KineticField& sv = v ? derivative_x(s) : s;
      const KineticField& gv = v ? derivative_x(g) : g;
      const SplitField ss = split(sv, basis, grid);
      const SplitField gs = split(gv, basis, grid);
      sup_sq[v] = std::max(sup_sq[v], norms(sv, grid).l2);
      const NormReport np = norms(ss.perp, grid, &nu);
      nu_perp[v][m] = np.nu_half * np.nu_half;
      const double pl = norms(ss.par, grid).l2;
      par[v][m] = pl * pl;
      par_sq[v][m] = pl * pl;
      const NormReport gp = norms(gs.perp, grid, &nu);
      g_perp[v][m] = gp.nu_minus_half * gp.nu_minus_half;
      const double gl = norms(gs.par, grid).l2;
      g_par[v][m] = gl * gl;
    }
  }

  AprioriNormReport rep;
  const double sg = std::sqrt(gamma), g32 = gamma * sg;
  for (int v = 0; v < 2; ++v) {
    const double inu = trapezoid(traj.times, nu_perp[v]);
    const double ipar = trapezoid(traj.times, par[v]);
    const double igp = trapezoid(traj.times, g_perp[v]);
    const double igl = trapezoid(traj.times, g_par[v]);
    const double h0 =
        v ? norms(derivative_x(traj.states.front()), grid).l2
          : norms(traj.states.front(), grid).l2;
    EstimateRatio& r = v ? rep.dx_sum_form : rep.sum_form;
    r.lhs = sup_sq[v] + sg * (std::sqrt(inu) + std::sqrt(ipar));
    r.rhs = h0 + g32 * (std::sqrt(igp) + std::sqrt(igl));
    r.ratio = safe_ratio(r.lhs, r.rhs);
    if (v == 0) {
      rep.sq_form.lhs = sup_sq[0] * sup_sq[0] + gamma * inu;
      rep.sq_form.rhs = h0 * h0 + gamma * gamma * gamma * igp +
                        gamma * gamma * igl +
                        gamma * gamma * trapezoid(traj.times, par_sq[0]);
      rep.sq_form.ratio = safe_ratio(rep.sq_form.lhs, rep.sq_form.rhs);
    }
  }
  return rep;
}

void write_kinetic_csv(const KineticTrajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "t,k,node,re,im\n";
  char buf[160];
  for (std::size_t m = 0; m < traj.times.size(); ++m) {
    const KineticField& s = traj.states[m];
    for (int k = 0; k <= s.K; ++k)
      for (Eigen::Index i = 0; i < s.nodes(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%d,%lld,%.17g,%.17g\n",
                      traj.times[m], k, static_cast<long long>(i),
                      s.mode(k)(i).real(), s.mode(k)(i).imag());
        out << buf;
      }
  }
}

void write_kinetic_norms_csv(const KineticTrajectory& traj,
                             const MomentumGrid& grid,
                             const KernelBasis& basis, const ArrayXr& nu,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "t,name,value\n";
  char buf[96];
  for (std::size_t m = 0; m < traj.times.size(); ++m) {
    const KineticField& s = traj.states[m];
    const SplitField ss = split(s, basis, grid);
    const NormReport base = norms(s, grid);
    const NormReport perp = norms(ss.perp, grid, &nu);
    const double pl = norms(ss.par, grid).l2;
    const std::pair<const char*, double> vals[] = {
        {"l2", base.l2},
        {"dx_l2", base.dx_l2},
        {"nu_perp", perp.nu_half},
        {"par", pl}};
    for (const auto& [name, value] : vals) {
      std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g\n", traj.times[m], name,
                    value);
      out << buf;
    }
  }
}

}  // namespace condkin
