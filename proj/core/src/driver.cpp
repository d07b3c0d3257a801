#include "condkin/driver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "condkin/norms.hpp"

namespace condkin {

namespace {

const double kTwoPi = 2.0 * M_PI;

ArrayXc mode_phase(const ArrayXr& a, int k, double tau) {
  const double f = -static_cast<double>(k) * tau;
  return (f * a).unaryExpr([](double th) { return std::polar(1.0, th); });
}

Complex free_phase(int n, double tau) {
  return std::exp(Complex(0.0, -static_cast<double>(n) * n * tau));
}

WaveField real_series(const SpectralX& sp, const ArrayXr& values, int band) {
  const ArrayXc half = sp.analyze_real(values, band);
  WaveField w(band);
  for (int n = 0; n <= band; ++n) {
    w.coeff(n) = half(n);
    if (n > 0) w.coeff(-n) = std::conj(half(n));
  }
  return w;
}

ArrayXc series_derivative(const WaveField& w) {
  ArrayXc d(w.c.size());
  for (int n = -w.N; n <= w.N; ++n)
    d(n + w.N) = Complex(0.0, static_cast<double>(n)) * w.c(n + w.N);
  return d;
}

WaveField psi_series(const WaveField& phi, const ModelParams& params) {
  WaveField psi(phi.N);
  psi.c = params.gamma * phi.c;
  psi.coeff(0) += std::sqrt(params.n0);
  return psi;
}

// Diagnostics of one (s, phi) sample. Energies use a collocation grid fine
// enough for the quartic terms; the positivity scan covers the kinetic
// collocation points.
DiagnosticsSample sample_state(const KineticField& s, const WaveField& phi, double t,
                               const ModelParams& params, const CollisionOperator& op,
                               const KernelBasis& basis) {
  const MomentumGrid& grid = op.grid();
  const double g = params.g;
  const double n0 = params.n0;
  const double lam = params.lambda();
  const double gamma = params.gamma;
  const double e1 = std::exp(-params.zeta() * t);
  const double cw = grid.cell_weight();

  DiagnosticsSample d;
  d.t = t;

  const WaveField psi = psi_series(phi, params);
  const ArrayXr s0 = s.mode(0).real();
  const double p_mass = cw * grid.P().sum();
  d.mass =
      kTwoPi * (psi.c.abs2().sum() + p_mass + gamma * e1 * cw * (grid.P() * s0).sum());
  d.moment_x = kTwoPi * gamma * e1 * cw * (grid.P() * grid.a() * s0).sum();
  d.moment_2 =
      kTwoPi * gamma * e1 * cw * (grid.P() * (grid.E() + g * n0) * s0).sum();

  const SpectralX spe(4 * std::max(phi.N, 1) + 2);
  const ArrayXc psiv = spe.synth(psi.c);
  const ArrayXr nv = psiv.abs2();
  double ek = 0.0;
  for (int n = -psi.N; n <= psi.N; ++n)
    ek += static_cast<double>(n) * n * std::norm(psi.coeff(n));
  d.energy_kinetic = kTwoPi * ek;
  d.energy_internal = 0.5 * g * kTwoPi * nv.square().mean();
  d.energy_potential = g * (n0 - 2.0 * grid.M0()) * kTwoPi * nv.mean();
  d.alpha = d.energy_kinetic + 0.5 * g * kTwoPi * (nv - n0).square().mean();

  const int band = std::max(s.K, phi.N);
  const KineticMoments km = kinetic_moments(s, op, band);
  WaveField damp(band);
  damp.c = (g * lam) * (e1 * km.m_PLs.c + (params.gamma * e1 * e1) * km.m_Q.c);
  d.d_norm = norms(damp).l2;

  const NormReport nr = norms(s, grid);
  d.s_l2 = nr.l2;
  d.s_dx_l2 = nr.dx_l2;
  KineticField perp(s.K, s.nodes());
  for (int k = 0; k <= s.K; ++k)
    perp.mode(k) = project(s.mode(k), basis, grid).h_perp;
  d.s_nu_perp = norms(perp, grid, &op.nu()).nu_half;

  const SpectralX spk(3 * std::max(s.K, 1) + 2);
  const Eigen::MatrixXd sv = spk.to_collocation(s);
  double mn = std::numeric_limits<double>::infinity();
  for (int j = 0; j < spk.size(); ++j)
    mn = std::min(mn, (grid.P() * (1.0 + gamma * e1 * sv.col(j).array())).minCoeff());
  d.min_f = mn;
  return d;
}

struct Stage {
  KineticField F;
  WaveField W;
};

// Interleaved exponential-midpoint stepper for the coupled pair. Each stage
// runs one collision sweep per collocation column and feeds both the kinetic
// right side and the wave sources from it.
class CoStepper {
 public:
  CoStepper(const ModelParams& params, const CollisionOperator& op, int K, int N,
            double dt)
      : p_(params),
        op_(op),
        B_(std::max(K, N)),
        sp_(3 * B_ + 2),
        loss_(params.g * params.gamma * params.n0 * op.nu()),
        dt_(dt),
        imex_(dt * loss_.maxCoeff() >= 0.8) {}

  Stage stage(const KineticField& s, const WaveField& phi, double t) const {
    const MomentumGrid& grid = op_.grid();
    const int M = sp_.size();
    const double g = p_.g;
    const double n0 = p_.n0;
    const double gamma = p_.gamma;
    const double rn0 = std::sqrt(n0);
    const double zeta = p_.zeta();
    const double e1 = std::exp(-zeta * t);
    const double e2 = e1 * e1;
    const Complex I(0.0, 1.0);

    const Eigen::MatrixXd slices = sp_.to_collocation(s);
    Eigen::MatrixXd ls(grid.size(), M), qp(grid.size(), M);
    ArrayXr pls(M), ps(M), q(M);
    for (int j = 0; j < M; ++j) {
      const RhsSlice r = op_.fused_apply(slices.col(j).array());
      ls.col(j) = r.Ls.matrix();
      qp.col(j) = (r.Qss / grid.P()).matrix();
      pls(j) = r.m_PLs;
      ps(j) = r.m_Ps;
      q(j) = r.m_Q;
    }
    for (Eigen::Index i = 0; i < qp.rows(); ++i)
      qp.row(i) = sp_.truncate(ArrayXr(qp.row(i).transpose().array()), B_)
                      .matrix()
                      .transpose();

    const ArrayXc pv = sp_.synth(phi.c);
    const ArrayXc psiv = (gamma * pv) + Complex(rn0, 0.0);
    const ArrayXr nc = sp_.truncate(ArrayXr(psiv.abs2()), B_);

    const double gg = g * gamma;
    const double decay = gamma * e1;
    Eigen::MatrixXd vals(grid.size(), M);
    for (int j = 0; j < M; ++j)
      vals.col(j) = gg * nc(j) * (ls.col(j).array() + decay * qp.col(j).array());

    Stage st;
    st.F = sp_.to_kinetic(vals, s.K);
    for (int k = 0; k <= s.K; ++k) st.F.mode(k) += zeta * s.mode(k);

    const ArrayXc plsC = pls.cast<Complex>();
    const ArrayXc psC = ps.cast<Complex>();
    const ArrayXc qC = q.cast<Complex>();
    ArrayXc s1v = (-0.5 * g * gamma * gamma * e1) * plsC +
                  (-2.0 * I * g * gamma * e1) * psC +
                  (-0.5 * g * gamma * gamma * gamma * e2) * qC;
    s1v += Complex(0.0, -g * n0);
    ArrayXc uv = (-0.5 * rn0 * g * gamma * e1) * plsC +
                 (-2.0 * I * rn0 * g * e1) * psC +
                 (-0.5 * rn0 * g * gamma * gamma * e2) * qC;
    const ArrayXc abs2 = sp_.truncate(ArrayXc(pv * pv.conjugate()), B_);
    const ArrayXc sq = sp_.truncate(ArrayXc(pv * pv), B_);
    uv += (-I * rn0 * g * gamma) * (2.0 * abs2 + sq) +
          (-I * g * gamma * gamma) * (abs2 * pv);
    const ArrayXc w = s1v * pv + Complex(0.0, -g * n0) * pv.conjugate() + uv;
    st.W = sp_.to_wave(w, phi.N);
    return st;
  }

  void step(KineticField& s, WaveField& phi, double t) const {
    const ArrayXr& a = op_.grid().a();
    const Stage st0 = stage(s, phi, t);

    KineticField smid(s.K, s.nodes());
    for (int k = 0; k <= s.K; ++k) {
      ArrayXc expl = s.mode(k) + (0.5 * dt_) * st0.F.mode(k);
      if (imex_) expl += (0.5 * dt_) * (loss_ * s.mode(k));
      smid.mode(k) = mode_phase(a, k, 0.5 * dt_) * expl;
      if (imex_) smid.mode(k) /= (1.0 + 0.5 * dt_ * loss_);
    }
    WaveField pmid(phi.N);
    for (int n = -phi.N; n <= phi.N; ++n)
      pmid.coeff(n) =
          free_phase(n, 0.5 * dt_) * (phi.coeff(n) + 0.5 * dt_ * st0.W.coeff(n));

    const Stage stm = stage(smid, pmid, t + 0.5 * dt_);
    KineticField snew(s.K, s.nodes());
    for (int k = 0; k <= s.K; ++k)
      snew.mode(k) = mode_phase(a, k, dt_) * s.mode(k) +
                     dt_ * (mode_phase(a, k, 0.5 * dt_) * stm.F.mode(k));
    WaveField pnew(phi.N);
    for (int n = -phi.N; n <= phi.N; ++n)
      pnew.coeff(n) = free_phase(n, dt_) * phi.coeff(n) +
                      dt_ * (free_phase(n, 0.5 * dt_) * stm.W.coeff(n));
    s = std::move(snew);
    phi = pnew;
  }

 private:
  const ModelParams& p_;
  const CollisionOperator& op_;
  int B_;
  SpectralX sp_;
  ArrayXr loss_;
  double dt_;
  bool imex_;
};

}  // namespace

WaveField SimulationState::psi(const ModelParams& params) const {
  return psi_series(phi, params);
}

PreparedData prepare_initial_data(const KineticField& raw_R, const WaveField& raw_phi,
                                  const ModelParams& params, const KernelBasis& basis,
                                  const MomentumGrid& grid) {
  if (raw_R.nodes() != grid.size())
    throw std::invalid_argument("prepare: state/grid length mismatch");

  PreparedData out;
  out.R = raw_R;
  out.phi = raw_phi;

  const Splitting split = project(ArrayXr(raw_R.mode(0).real()), basis, grid);
  out.moment_x_correction = split.c_x;
  out.moment_2_correction = split.c_2;
  out.R.mode(0) = split.h_perp.cast<Complex>();

  const double m_R = grid.cell_weight() * (grid.P() * split.h_perp).sum();
  const double im0 = raw_phi.coeff(0).imag();
  double tail = im0 * im0;
  for (int n = -raw_phi.N; n <= raw_phi.N; ++n)
    if (n != 0) tail += std::norm(raw_phi.coeff(n));

  const double disc =
      params.n0 - params.lambda() * tail - params.gamma * m_R;
  if (disc < 0.0)
    throw std::runtime_error("prepare: no real condensate shift balances the mass");
  const double root = (-std::sqrt(params.n0) + std::sqrt(disc)) / params.gamma;
  out.phi0_shift = root - raw_phi.coeff(0).real();
  out.phi.coeff(0) = Complex(root, im0);
  return out;
}

PreparationCheck check_prepared(const KineticField& R, const WaveField& phi,
                                const ModelParams& params, const MomentumGrid& grid) {
  if (R.nodes() != grid.size())
    throw std::invalid_argument("check_prepared: state/grid length mismatch");
  const double cw = grid.cell_weight();
  const ArrayXr r0 = R.mode(0).real();

  PreparationCheck out;
  out.moment_x = kTwoPi * cw * (grid.P() * grid.a() * r0).sum();
  out.moment_2 =
      kTwoPi * cw * (grid.P() * (grid.E() + params.g * params.n0) * r0).sum();

  const double rn0 = std::sqrt(params.n0);
  const double re0 = phi.coeff(0).real();
  const double im0 = phi.coeff(0).imag();
  double tail = 0.0;
  for (int n = -phi.N; n <= phi.N; ++n)
    if (n != 0) tail += std::norm(phi.coeff(n));
  const double m_R = cw * (grid.P() * r0).sum();
  out.mass_balance =
      kTwoPi * (2.0 * rn0 * params.gamma * re0 +
                params.lambda() * (re0 * re0 + im0 * im0 + tail) +
                params.gamma * m_R);
  return out;
}

double default_dt(const ModelParams& params, const CollisionOperator& op,
                  int n_modes) {
  const double relax =
      0.1 / (params.g * params.gamma * params.n0 * op.nu().maxCoeff());
  const int nm = std::max(1, n_modes);
  const double wave = kTwoPi / (8.0 * nm * nm);
  return std::min(relax, wave);
}

SimulationRun simulate(const KineticField& R_i, const WaveField& phi_i,
                       const ModelParams& params, const CollisionOperator& op,
                       const SimulateOptions& opt) {
  const MomentumGrid& grid = op.grid();
  if (R_i.nodes() != grid.size())
    throw std::invalid_argument("simulate: state/grid length mismatch");
  if (!(opt.t_final > 0.0))
    throw std::invalid_argument("simulate: t_final must be positive");

  const KernelBasis basis = build_kernel_basis(grid);

  SimulationRun run;
  const double dt_req = opt.dt > 0.0 ? opt.dt : default_dt(params, op, phi_i.N);
  const int n_steps = std::max(1, static_cast<int>(std::lround(opt.t_final / dt_req)));
  const double dt = opt.t_final / n_steps;
  run.dt = dt;
  const int every =
      opt.sample_every > 0.0
          ? std::max(1, static_cast<int>(std::lround(opt.sample_every / dt)))
          : 1;

  run.diagnostics.small_data =
      norms(phi_i).h1_sum + norms(R_i, grid).h1_sum <= opt.eta_guard;

  auto record = [&](double t, const KineticField& s, const WaveField& phi) {
    run.s.times.push_back(t);
    run.s.states.push_back(s);
    run.phi.times.push_back(t);
    run.phi.states.push_back(phi);
    run.diagnostics.samples.push_back(sample_state(s, phi, t, params, op, basis));
  };

  KineticField s = R_i;
  WaveField phi = phi_i;
  record(0.0, s, phi);
  const double mass0 = run.diagnostics.samples.front().mass;

  auto healthy = [&](const DiagnosticsSample& d) {
    if (!std::isfinite(d.mass) || !std::isfinite(d.alpha) || !std::isfinite(d.s_l2)) {
      run.note = "non-finite diagnostics at t=" + std::to_string(d.t);
      return false;
    }
    if (std::abs(d.mass - mass0) > opt.mass_tolerance * std::abs(mass0)) {
      run.note = "mass drift beyond tolerance at t=" + std::to_string(d.t);
      return false;
    }
    if (d.min_f <= 0.0) {
      run.note = "positivity lost at t=" + std::to_string(d.t);
      return false;
    }
    return true;
  };
  if (!healthy(run.diagnostics.samples.front())) return run;

  if (opt.mode == SimulateMode::Direct) {
    const CoStepper stepper(params, op, R_i.K, phi_i.N, dt);
    for (int m = 0; m < n_steps; ++m) {
      stepper.step(s, phi, dt * m);
      if ((m + 1) % every == 0 || m + 1 == n_steps) {
        record(dt * (m + 1), s, phi);
        if (!healthy(run.diagnostics.samples.back())) return run;
      }
    }
  } else {
    const double window = 1.0 / (10.0 * params.g * params.n0);
    int done = 0;
    while (done < n_steps) {
      const int left = n_steps - done;
      int wsteps = std::max(1, static_cast<int>(std::lround(window / dt)));
      wsteps = std::min(wsteps, left);
      const PicardResult pr =
          picard_solve(s, phi, wsteps * dt, params, op, dt, opt.picard_tol,
                       opt.picard_max_iterations, 4, done * dt);
      for (std::size_t m = 1; m < pr.s.times.size(); ++m) {
        const int gidx = static_cast<int>(std::lround(pr.s.times[m] / dt));
        if (gidx % every == 0 || gidx == n_steps) {
          record(pr.s.times[m], pr.s.states[m], pr.phi.states[m]);
          if (!healthy(run.diagnostics.samples.back())) return run;
        }
      }
      s = pr.s.states.back();
      phi = pr.phi.states.back();
      done += wsteps;
    }
  }
  run.completed = true;
  return run;
}

namespace {

// Frozen per-sample data of one fixed-point iterate.
struct FrozenSample {
  WaveField S1;      // series multiplying phi in the linear wave equation
  WaveField U;       // inhomogeneity series
  ArrayXr nc;        // collocation values of the band-limited condensate density
  KineticField inh;  // quadratic collision inhomogeneity of the kinetic update
};

}  // namespace

PicardResult picard_solve(const KineticField& R_i, const WaveField& phi_i, double T,
                          const ModelParams& params, const CollisionOperator& op,
                          double dt, double tol, int max_iterations, int max_splits,
                          double t0) {
  if (T <= 0.0 || dt <= 0.0)
    throw std::invalid_argument("picard: window and step must be positive");
  const MomentumGrid& grid = op.grid();
  if (R_i.nodes() != grid.size())
    throw std::invalid_argument("picard: state/grid length mismatch");

  const int n = std::max(1, static_cast<int>(std::lround(T / dt)));
  const double h = T / n;
  const int K = R_i.K;
  const int N = phi_i.N;
  const int B = std::max(K, N);
  const SpectralX sp(3 * B + 2);
  const int M = sp.size();

  const double g = params.g;
  const double n0 = params.n0;
  const double gamma = params.gamma;
  const double rn0 = std::sqrt(n0);
  const double zeta = params.zeta();
  const Complex I(0.0, 1.0);
  const ArrayXr loss = g * gamma * n0 * op.nu();

  std::vector<double> rel(static_cast<std::size_t>(n) + 1);
  for (int m = 0; m <= n; ++m) rel[static_cast<std::size_t>(m)] = h * m;

  std::vector<KineticField> ss(rel.size(), KineticField(K, grid.size()));
  std::vector<WaveField> ph(rel.size(), WaveField(N));

  PicardReport rep;
  double last_diff = -1.0;
  bool stalled = false;

  for (int it = 1; it <= max_iterations && !stalled; ++it) {
    std::vector<FrozenSample> fr(rel.size());
    for (int m = 0; m <= n; ++m) {
      FrozenSample& f = fr[static_cast<std::size_t>(m)];
      const double e1 = std::exp(-zeta * (t0 + rel[static_cast<std::size_t>(m)]));
      const double e2 = e1 * e1;

      const Eigen::MatrixXd slices = sp.to_collocation(ss[static_cast<std::size_t>(m)]);
      Eigen::MatrixXd qp(grid.size(), M);
      ArrayXr pls(M), ps(M), q(M);
      for (int j = 0; j < M; ++j) {
        const RhsSlice r = op.fused_apply(slices.col(j).array());
        qp.col(j) = (r.Qss / grid.P()).matrix();
        pls(j) = r.m_PLs;
        ps(j) = r.m_Ps;
        q(j) = r.m_Q;
      }
      for (Eigen::Index i = 0; i < qp.rows(); ++i)
        qp.row(i) = sp.truncate(ArrayXr(qp.row(i).transpose().array()), B)
                        .matrix()
                        .transpose();

      const WaveField mpls = real_series(sp, pls, B);
      const WaveField mps = real_series(sp, ps, B);
      const WaveField mq = real_series(sp, q, B);

      const ArrayXc pv = sp.synth(ph[static_cast<std::size_t>(m)].c);
      const ArrayXc psiv = (gamma * pv) + Complex(rn0, 0.0);
      f.nc = sp.truncate(ArrayXr(psiv.abs2()), B);
      const ArrayXc abs2 = sp.truncate(ArrayXc(pv * pv.conjugate()), B);
      const ArrayXc sq = sp.truncate(ArrayXc(pv * pv), B);
      const WaveField nl2 = sp.to_wave(ArrayXc(2.0 * abs2 + sq), B);
      const WaveField nl3 = sp.to_wave(ArrayXc(abs2 * pv), B);

      f.S1 = WaveField(B);
      f.S1.c = (-0.5 * g * gamma * gamma * e1) * mpls.c +
               (-2.0 * I * g * gamma * e1) * mps.c +
               (-0.5 * g * gamma * gamma * gamma * e2) * mq.c;
      f.S1.coeff(0) += -I * g * n0;

      f.U = WaveField(B);
      f.U.c = (-0.5 * rn0 * g * gamma * e1) * mpls.c +
              (-2.0 * I * rn0 * g * e1) * mps.c +
              (-0.5 * rn0 * g * gamma * gamma * e2) * mq.c +
              (-I * rn0 * g * gamma) * nl2.c + (-I * g * gamma * gamma) * nl3.c;

      Eigen::MatrixXd iv(grid.size(), M);
      const double pre = g * gamma * gamma * e1;
      for (int j = 0; j < M; ++j) iv.col(j) = pre * f.nc(j) * qp.col(j).array();
      f.inh = sp.to_kinetic(iv, K);
    }

    // linear wave solve against the frozen kinetic data; sources are sampled
    // at the window grid and blended linearly off-grid
    auto pick = [h, n](double tau) {
      double x = tau / h;
      int i = static_cast<int>(std::floor(x));
      double w = x - i;
      if (i < 0) {
        i = 0;
        w = 0.0;
      }
      if (i >= n) {
        i = n;
        w = 0.0;
      }
      return std::pair<int, double>(i, w);
    };
    WaveSources src;
    src.S2 = -I * g * n0;
    src.S1 = [&fr, pick](double tau) {
      const auto [i, w] = pick(tau);
      if (w < 1e-9) return fr[static_cast<std::size_t>(i)].S1;
      WaveField out(fr[static_cast<std::size_t>(i)].S1.N);
      out.c = (1.0 - w) * fr[static_cast<std::size_t>(i)].S1.c +
              w * fr[static_cast<std::size_t>(i) + 1].S1.c;
      return out;
    };
    src.U = [&fr, pick](double tau) {
      const auto [i, w] = pick(tau);
      if (w < 1e-9) return fr[static_cast<std::size_t>(i)].U;
      WaveField out(fr[static_cast<std::size_t>(i)].U.N);
      out.c = (1.0 - w) * fr[static_cast<std::size_t>(i)].U.c +
              w * fr[static_cast<std::size_t>(i) + 1].U.c;
      return out;
    };

    const WaveTrajectory wt = solve_linear_wave(phi_i, src, T, h);
    bool uniform = wt.times.size() == rel.size();
    if (uniform)
      for (std::size_t m = 0; m < rel.size(); ++m)
        if (std::abs(wt.times[m] - rel[m]) > 1e-12 * std::max(1.0, T)) {
          uniform = false;
          break;
        }
    if (!uniform) {
      stalled = true;
      break;
    }

    // linear kinetic stepping against the frozen condensate density
    std::vector<KineticField> snew(rel.size(), KineticField(K, grid.size()));
    snew[0] = R_i;
    const KineticRHS krhs = [&](const KineticField& qf, double tau) {
      const auto [i, w] = pick(tau);
      const std::size_t iu = static_cast<std::size_t>(i);
      KineticField lq(qf.K, qf.nodes());
      for (int k = 0; k <= qf.K; ++k) lq.mode(k) = op.apply_L(qf.mode(k));
      const Eigen::MatrixXd lv = sp.to_collocation(lq);
      ArrayXr nc = fr[iu].nc;
      if (w >= 1e-9) nc = (1.0 - w) * fr[iu].nc + w * fr[iu + 1].nc;
      Eigen::MatrixXd vals(grid.size(), M);
      for (int j = 0; j < M; ++j) vals.col(j) = (g * gamma * nc(j)) * lv.col(j).array();
      KineticField out = sp.to_kinetic(vals, qf.K);
      for (int k = 0; k <= qf.K; ++k) {
        out.mode(k) += zeta * qf.mode(k);
        if (w < 1e-9)
          out.mode(k) += fr[iu].inh.mode(k);
        else
          out.mode(k) += (1.0 - w) * fr[iu].inh.mode(k) + w * fr[iu + 1].inh.mode(k);
      }
      return out;
    };
    for (int m = 0; m < n; ++m)
      snew[static_cast<std::size_t>(m) + 1] =
          step_kinetic(snew[static_cast<std::size_t>(m)], krhs,
                       rel[static_cast<std::size_t>(m)], h, grid, loss);

    // composite contraction norm of the update
    double sup_phi = 0.0;
    double sup_s = 0.0;
    std::vector<double> flux(rel.size(), 0.0);
    for (std::size_t m = 0; m < rel.size(); ++m) {
      WaveField dphi(N);
      dphi.c = wt.states[m].c - ph[m].c;
      sup_phi = std::max(sup_phi, norms(dphi).h1_sum);
      KineticField ds(K, grid.size());
      for (int k = 0; k <= K; ++k) ds.mode(k) = snew[m].mode(k) - ss[m].mode(k);
      sup_s = std::max(sup_s, norms(ds, grid).h1_sum);
      for (int k = 0; k <= K; ++k) {
        const double mult = (k == 0) ? kTwoPi : 2.0 * kTwoPi;
        flux[m] +=
            mult * (1.0 + static_cast<double>(k) * k) *
            weighted_sq(ds.mode(k), op.nu(), grid);
      }
    }
    double flux_t = 0.0;
    for (std::size_t m = 0; m + 1 < rel.size(); ++m)
      flux_t += 0.5 * (flux[m] + flux[m + 1]) * h;
    const double diff = sup_phi + sup_s + std::sqrt(gamma) * std::sqrt(flux_t);

    ++rep.iterations;
    if (last_diff > 0.0) rep.factors.push_back(diff / last_diff);

    for (std::size_t m = 0; m < rel.size(); ++m) ph[m] = wt.states[m];
    ss = std::move(snew);

    if (diff < tol) {
      rep.converged = true;
      break;
    }
    if (last_diff > 0.0 && diff >= last_diff && it >= 3) stalled = true;
    last_diff = diff;
  }

  if (rep.converged) {
    PicardResult out;
    out.report = rep;
    out.s.times.resize(rel.size());
    out.phi.times.resize(rel.size());
    for (std::size_t m = 0; m < rel.size(); ++m) {
      out.s.times[m] = t0 + rel[m];
      out.phi.times[m] = t0 + rel[m];
    }
    out.s.states = std::move(ss);
    out.phi.states = std::move(ph);
    return out;
  }

  if (max_splits <= 0 || n < 2)
    throw std::runtime_error("picard: no contraction after maximal window splitting");
  const int nl = n / 2;
  PicardResult left = picard_solve(R_i, phi_i, nl * h, params, op, h, tol,
                                   max_iterations, max_splits - 1, t0);
  PicardResult right =
      picard_solve(left.s.states.back(), left.phi.states.back(), T - nl * h, params,
                   op, h, tol, max_iterations, max_splits - 1, t0 + nl * h);

  PicardResult out;
  out.s = std::move(left.s);
  out.phi = std::move(left.phi);
  for (std::size_t m = 1; m < right.s.times.size(); ++m) {
    out.s.times.push_back(right.s.times[m]);
    out.s.states.push_back(std::move(right.s.states[m]));
    out.phi.times.push_back(right.phi.times[m]);
    out.phi.states.push_back(std::move(right.phi.states[m]));
  }
  out.report.iterations =
      rep.iterations + left.report.iterations + right.report.iterations;
  out.report.converged = left.report.converged && right.report.converged;
  out.report.window_splits =
      1 + left.report.window_splits + right.report.window_splits;
  out.report.factors = std::move(left.report.factors);
  out.report.factors.insert(out.report.factors.end(), right.report.factors.begin(),
                            right.report.factors.end());
  return out;
}

EnergyAudit energy_identity_check(const SimulationRun& run, const ModelParams& params,
                                  const CollisionOperator& op) {
  const std::size_t n = run.s.times.size();
  if (n < 3 || run.phi.states.size() != n || run.s.states.size() != n)
    throw std::invalid_argument("energy audit: need at least three samples");
  const MomentumGrid& grid = op.grid();
  const double g = params.g;
  const double n0 = params.n0;
  const double gamma = params.gamma;
  const double lam = params.lambda();
  const double zeta = params.zeta();
  const int K = run.s.states.front().K;
  const int N = run.phi.states.front().N;
  const int B = std::max(K, N);
  const SpectralX sp(6 * B + 4);
  const double cw = grid.cell_weight();
  const double p_mass = cw * grid.P().sum();

  std::vector<KineticMoments> km(n);
  std::vector<WaveField> psi(n, WaveField(N));
  std::vector<double> alpha(n), etot(n), mass(n);
  for (std::size_t m = 0; m < n; ++m) {
    psi[m] = psi_series(run.phi.states[m], params);
    km[m] = kinetic_moments(run.s.states[m], op, B);
    const ArrayXc psiv = sp.synth(psi[m].c);
    const ArrayXr nv = psiv.abs2();
    double ek = 0.0;
    for (int k = -N; k <= N; ++k)
      ek += static_cast<double>(k) * k * std::norm(psi[m].coeff(k));
    const double e_k = kTwoPi * ek;
    const double e_i = 0.5 * g * kTwoPi * nv.square().mean();
    const double e_p = g * (n0 - 2.0 * grid.M0()) * kTwoPi * nv.mean();
    etot[m] = e_k + e_i + e_p;
    alpha[m] = e_k + 0.5 * g * kTwoPi * (nv - n0).square().mean();
    const double e1 = std::exp(-zeta * run.s.times[m]);
    mass[m] = kTwoPi * (psi[m].c.abs2().sum() + p_mass +
                        gamma * e1 * cw *
                            (grid.P() * run.s.states[m].mode(0).real()).sum());
  }

  EnergyAudit audit;
  for (std::size_t m = 1; m + 1 < n; ++m) {
    const double span = run.s.times[m + 1] - run.s.times[m - 1];
    const double t = run.s.times[m];
    const double e1 = std::exp(-zeta * t);
    const double e2 = e1 * e1;

    const ArrayXc psiv = sp.synth(psi[m].c);
    const ArrayXc dpsiv = sp.synth(series_derivative(psi[m]));
    const ArrayXr mps_d = sp.synth(series_derivative(km[m].m_Ps)).real();
    const ArrayXr mpls_d = sp.synth(series_derivative(km[m].m_PLs)).real();
    const ArrayXr mq_d = sp.synth(series_derivative(km[m].m_Q)).real();
    const ArrayXr mpls_v = sp.synth(km[m].m_PLs.c).real();
    const ArrayXr mps_v = sp.synth(km[m].m_Ps.c).real();
    const ArrayXr mq_v = sp.synth(km[m].m_Q.c).real();
    const ArrayXr fv = e1 * mpls_v + gamma * e2 * mq_v;

    const ArrayXc grad = psiv.conjugate() * dpsiv;
    const double t1 = -4.0 * g * gamma * e1 * kTwoPi * (grad.imag() * mps_d).mean();
    const double t2 =
        -g * lam * kTwoPi * (grad.real() * (e1 * mpls_d + gamma * e2 * mq_d)).mean();
    const double t3 = -g * lam * kTwoPi * (dpsiv.abs2() * fv).mean();
    const double t4 =
        -g * g * lam * kTwoPi * (psiv.abs2() * (psiv.abs2() - n0) * fv).mean();

    const double dalpha = (alpha[m + 1] - alpha[m - 1]) / span;
    audit.times.push_back(t);
    audit.alpha_residual.push_back(std::abs(dalpha - (t1 + t2 + t3 + t4)));
    audit.alpha_scale = std::max(audit.alpha_scale, std::abs(dalpha));

    ArrayXc pdot_c = (psi[m + 1].c - psi[m - 1].c) / span;
    const ArrayXc pdot = sp.synth(pdot_c);
    const ArrayXc pair = psiv.conjugate() * pdot;
    const ArrayXr damp = g * lam * fv;
    const ArrayXr fint = p_mass + gamma * e1 * mps_v;
    const double rhs = kTwoPi * (damp * pair.imag()).mean() -
                       4.0 * g * kTwoPi * (pair.real() * fint).mean();
    const double de = (etot[m + 1] - etot[m - 1]) / span;
    audit.balance_residual.push_back(std::abs(de - rhs));
    audit.mass_rate.push_back(std::abs(mass[m + 1] - mass[m - 1]) / span /
                              std::abs(mass[0]));
  }
  for (double r : audit.alpha_residual)
    audit.max_alpha_residual = std::max(audit.max_alpha_residual, r);
  for (double r : audit.balance_residual)
    audit.max_balance_residual = std::max(audit.max_balance_residual, r);
  for (double r : audit.mass_rate)
    audit.max_mass_rate = std::max(audit.max_mass_rate, r);
  return audit;
}

MomentAudit moment_identity_check(const SimulationRun& run, const ModelParams& params,
                                  const CollisionOperator& op,
                                  const KernelBasis& basis) {
  const std::size_t n = run.s.times.size();
  if (n < 3 || run.phi.states.size() != n || run.s.states.size() != n)
    throw std::invalid_argument("moment audit: need at least three samples");
  const MomentumGrid& grid = op.grid();
  if (basis.chi_x.size() != grid.size())
    throw std::invalid_argument("moment audit: basis/grid length mismatch");
  const double g = params.g;
  const double n0 = params.n0;
  const double gamma = params.gamma;
  const double zeta = params.zeta();
  const double rn0 = std::sqrt(n0);
  const int K = run.s.states.front().K;
  const int N = run.phi.states.front().N;
  const int B = std::max(K, N);
  const SpectralX sp(3 * B + 2);
  const int M = sp.size();
  const double cw = grid.cell_weight();

  const ArrayXc w2 = (grid.mu() * basis.chi_2).cast<Complex>();
  const ArrayXc wx = (grid.mu() * basis.chi_x).cast<Complex>();
  const ArrayXc aw2 = (grid.a() * grid.mu() * basis.chi_2).cast<Complex>();
  const ArrayXc awx = (grid.a() * grid.mu() * basis.chi_x).cast<Complex>();

  struct Row {
    ArrayXc c2, cx, a2, ax, g2, gx;
  };
  std::vector<Row> rows(n);
  MomentAudit audit;
  audit.kappa = basis.kappa;
  for (std::size_t m = 0; m < n; ++m) {
    const KineticField& s = run.s.states[m];
    const double e1 = std::exp(-zeta * run.s.times[m]);
    Row& row = rows[m];
    row.c2.resize(K + 1);
    row.cx.resize(K + 1);
    row.a2.resize(K + 1);
    row.ax.resize(K + 1);
    for (int k = 0; k <= K; ++k) {
      row.c2(k) = e1 * cw * (s.mode(k) * w2).sum();
      row.cx(k) = e1 * cw * (s.mode(k) * wx).sum();
      row.a2(k) = e1 * cw * (s.mode(k) * aw2).sum();
      row.ax(k) = e1 * cw * (s.mode(k) * awx).sum();
      audit.scale = std::max({audit.scale, std::abs(row.c2(k)), std::abs(row.cx(k))});
    }

    const Eigen::MatrixXd slices = sp.to_collocation(s);
    Eigen::MatrixXd ls(grid.size(), M), qp(grid.size(), M);
    for (int j = 0; j < M; ++j) {
      const RhsSlice r = op.fused_apply(slices.col(j).array());
      ls.col(j) = r.Ls.matrix();
      qp.col(j) = (r.Qss / grid.P()).matrix();
    }
    for (Eigen::Index i = 0; i < qp.rows(); ++i)
      qp.row(i) = sp.truncate(ArrayXr(qp.row(i).transpose().array()), B)
                      .matrix()
                      .transpose();
    const ArrayXc pv = sp.synth(run.phi.states[m].c);
    const ArrayXc psiv = (gamma * pv) + Complex(rn0, 0.0);
    const ArrayXr nc = sp.truncate(ArrayXr(psiv.abs2()), B);

    ArrayXr m2v(M), mxv(M);
    const double decay = gamma * e1;
    for (int j = 0; j < M; ++j) {
      const ArrayXr col = (g * gamma) * ((nc(j) - n0) * ls.col(j).array() +
                                         (decay * nc(j)) * qp.col(j).array());
      m2v(j) = cw * (col * w2.real()).sum();
      mxv(j) = cw * (col * wx.real()).sum();
    }
    const WaveField g2 = sp.to_wave(m2v.cast<Complex>(), K);
    const WaveField gx = sp.to_wave(mxv.cast<Complex>(), K);
    row.g2.resize(K + 1);
    row.gx.resize(K + 1);
    for (int k = 0; k <= K; ++k) {
      row.g2(k) = e1 * g2.coeff(k);
      row.gx(k) = e1 * gx.coeff(k);
    }
  }

  const Complex I(0.0, 1.0);
  for (std::size_t m = 1; m + 1 < n; ++m) {
    const double span = run.s.times[m + 1] - run.s.times[m - 1];
    double r2 = 0.0, rx = 0.0;
    for (int k = 0; k <= K; ++k) {
      const Complex d2 = (rows[m + 1].c2(k) - rows[m - 1].c2(k)) / span;
      const Complex dx = (rows[m + 1].cx(k) - rows[m - 1].cx(k)) / span;
      r2 = std::max(r2,
                    std::abs(d2 + I * double(k) * rows[m].a2(k) - rows[m].g2(k)));
      rx = std::max(rx,
                    std::abs(dx + I * double(k) * rows[m].ax(k) - rows[m].gx(k)));
    }
    audit.times.push_back(run.s.times[m]);
    audit.residual_2.push_back(r2);
    audit.residual_x.push_back(rx);
    audit.max_residual_2 = std::max(audit.max_residual_2, r2);
    audit.max_residual_x = std::max(audit.max_residual_x, rx);
  }
  return audit;
}

DecayFit decay_fit(const std::vector<double>& t, const std::vector<double>& values,
                   double t_min, double t_max) {
  if (t.size() != values.size())
    throw std::invalid_argument("decay_fit: time/value length mismatch");
  std::vector<double> xs, ys;
  double run_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_min || t[i] > t_max) continue;
    if (!(values[i] > 0.0)) continue;
    if (values[i] > 1.5 * run_min) break;
    run_min = std::min(run_min, values[i]);
    xs.push_back(t[i]);
    ys.push_back(std::log(values[i]));
  }

  DecayFit fit;
  fit.used = xs.size();
  if (xs.size() < 2) return fit;

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= ys.size();
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0.0) return fit;
  const double slope = sxy / sxx;
  fit.rate = -slope;
  fit.intercept = my - slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + slope * xs[i]);
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

void write_diagnostics_csv(const DiagnosticsSeries& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_diagnostics_csv: cannot open " + path);
  out << "t,mass,moment_x,moment_2,alpha,energy_kinetic,energy_internal,"
         "energy_potential,d_norm,s_l2,s_dx_l2,s_nu_perp,min_f\n";
  char buf[400];
  for (const DiagnosticsSample& s : d.samples) {
    std::snprintf(buf, sizeof(buf),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%.17g,%.17g\n",
                  s.t, s.mass, s.moment_x, s.moment_2, s.alpha, s.energy_kinetic,
                  s.energy_internal, s.energy_potential, s.d_norm, s.s_l2,
                  s.s_dx_l2, s.s_nu_perp, s.min_f);
    out << buf;
  }
}

std::string run_summary_json(const SimulationRun& run, const ModelParams& params,
                             const DecayFit& fit) {
  const auto& samples = run.diagnostics.samples;
  double mass0 = samples.empty() ? 0.0 : samples.front().mass;
  double drift = 0.0;
  double min_f = samples.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  double max_mx = 0.0, max_m2 = 0.0;
  for (const DiagnosticsSample& s : samples) {
    if (mass0 != 0.0) drift = std::max(drift, std::abs(s.mass - mass0) / std::abs(mass0));
    min_f = std::min(min_f, s.min_f);
    max_mx = std::max(max_mx, std::abs(s.moment_x));
    max_m2 = std::max(max_m2, std::abs(s.moment_2));
  }
  nlohmann::json j{
      {"completed", run.completed},
      {"note", run.note},
      {"dt", run.dt},
      {"t_final", samples.empty() ? 0.0 : samples.back().t},
      {"gamma", params.gamma},
      {"zeta", params.zeta()},
      {"zeta_hat", fit.rate},
      {"fit",
       {{"rate", fit.rate},
        {"intercept", fit.intercept},
        {"r_squared", fit.r_squared},
        {"samples_used", fit.used}}},
      {"small_data", run.diagnostics.small_data},
      {"mass_drift_rel", drift},
      {"min_f", min_f},
      {"max_moment_x", max_mx},
      {"max_moment_2", max_m2},
      {"alpha_final", samples.empty() ? 0.0 : samples.back().alpha},
  };
  return j.dump(2);
}

}  // namespace condkin
