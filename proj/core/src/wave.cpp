#include "condkin/wave.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "condkin/norms.hpp"

namespace condkin {

namespace {

WaveField real_series(const SpectralX& sp, const ArrayXr& values, int band) {
  const ArrayXc half = sp.analyze_real(values, band);
  WaveField w(band);
  for (int n = 0; n <= band; ++n) {
    w.coeff(n) = half(n);
    if (n > 0) w.coeff(-n) = std::conj(half(n));
  }
  return w;
}

Complex free_phase(int n, double dt) {
  return std::exp(Complex(0.0, -static_cast<double>(n) * n * dt));
}

double two_pi() { return 2.0 * M_PI; }

}  // namespace

KineticMoments kinetic_moments(const KineticField& s, const CollisionOperator& op,
                               int band) {
  const int M = 3 * std::max(band, s.K) + 2;
  SpectralX sp(M);
  const Eigen::MatrixXd slices = sp.to_collocation(s);
  ArrayXr pls(M), ps(M), q(M);
  for (int j = 0; j < M; ++j) {
    const RhsSlice r = op.fused_apply(slices.col(j).array());
    pls(j) = r.m_PLs;
    ps(j) = r.m_Ps;
    q(j) = r.m_Q;
  }
  return {real_series(sp, pls, band), real_series(sp, ps, band),
          real_series(sp, q, band)};
}

WaveSources assemble_sources(const KineticField& s, const WaveField& phi,
                             const ModelParams& params, const CollisionOperator& op) {
  const int band = std::max(s.K, phi.N);
  const double g = params.g;
  const double n0 = params.n0;
  const double gamma = params.gamma;
  const double zeta = params.zeta();
  const double rn0 = std::sqrt(n0);
  const Complex I(0.0, 1.0);

  const KineticMoments mom = kinetic_moments(s, op, band);

  // Nonlinear terms of the frozen phi, each binary product dealiased.
  SpectralX sp(3 * band + 2);
  const ArrayXc pv = sp.synth(phi.c);
  const ArrayXc abs2 = sp.truncate(ArrayXc(pv * pv.conjugate()), band);
  const ArrayXc sq = sp.truncate(ArrayXc(pv * pv), band);
  const WaveField nl2 = sp.to_wave(ArrayXc(2.0 * abs2 + sq), band);
  const WaveField nl3 = sp.to_wave(ArrayXc(abs2 * pv), band);

  WaveSources src;
  src.S2 = -I * g * n0;
  src.S1 = [=](double t) {
    const double e1 = std::exp(-zeta * t);
    const double e2 = e1 * e1;
    WaveField out(band);
    out.c = (-0.5 * g * gamma * gamma * e1) * mom.m_PLs.c +
            (-2.0 * I * g * gamma * e1) * mom.m_Ps.c +
            (-0.5 * g * gamma * gamma * gamma * e2) * mom.m_Q.c;
    out.coeff(0) += -I * g * n0;
    return out;
  };
  src.U = [=](double t) {
    const double e1 = std::exp(-zeta * t);
    const double e2 = e1 * e1;
    WaveField out(band);
    out.c = (-0.5 * rn0 * g * gamma * e1) * mom.m_PLs.c +
            (-2.0 * I * rn0 * g * e1) * mom.m_Ps.c +
            (-0.5 * rn0 * g * gamma * gamma * e2) * mom.m_Q.c +
            (-I * rn0 * g * gamma) * nl2.c + (-I * g * gamma * gamma) * nl3.c;
    return out;
  };
  return src;
}

WaveField wave_rhs(const WaveField& phi, const WaveSources& src, double t) {
  const WaveField s1 = src.S1 ? src.S1(t) : WaveField(0);
  const WaveField u = src.U ? src.U(t) : WaveField(0);
  const int band = std::max({phi.N, s1.N, u.N});
  SpectralX sp(3 * band + 2);
  const ArrayXc pv = sp.synth(phi.c);
  ArrayXc w = src.S2 * pv.conjugate();
  if (src.S1) w += sp.synth(s1.c) * pv;
  if (src.U) w += sp.synth(u.c);
  return sp.to_wave(w, phi.N);
}

WaveField step_wave(const WaveField& phi, const WaveSources& src, double t, double dt) {
  const WaveField w0 = wave_rhs(phi, src, t);
  WaveField pred(phi.N);
  for (int n = -phi.N; n <= phi.N; ++n)
    pred.coeff(n) = free_phase(n, 0.5 * dt) * (phi.coeff(n) + 0.5 * dt * w0.coeff(n));
  const WaveField wm = wave_rhs(pred, src, t + 0.5 * dt);
  WaveField out(phi.N);
  for (int n = -phi.N; n <= phi.N; ++n)
    out.coeff(n) =
        free_phase(n, dt) * phi.coeff(n) + dt * free_phase(n, 0.5 * dt) * wm.coeff(n);
  return out;
}

namespace {

// One pass of the Duhamel map along the window: exponential-trapezoid
// quadrature with the source argument taken from the previous iterate.
std::vector<WaveField> duhamel_pass(const WaveField& phi_i, const WaveSources& src,
                                    const std::vector<double>& times,
                                    const std::vector<WaveField>& prev) {
  const std::size_t n = times.size();
  std::vector<WaveField> w(n);
  for (std::size_t m = 0; m < n; ++m) w[m] = wave_rhs(prev[m], src, times[m]);
  std::vector<WaveField> out;
  out.reserve(n);
  out.push_back(phi_i);
  for (std::size_t m = 0; m + 1 < n; ++m) {
    const double h = times[m + 1] - times[m];
    WaveField nx(phi_i.N);
    for (int k = -phi_i.N; k <= phi_i.N; ++k) {
      const Complex ph = free_phase(k, h);
      nx.coeff(k) = ph * out[m].coeff(k) +
                    0.5 * h * (ph * w[m].coeff(k) + w[m + 1].coeff(k));
    }
    out.push_back(nx);
  }
  return out;
}

double sup_h1_diff(const std::vector<WaveField>& a, const std::vector<WaveField>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    WaveField d(a[i].N);
    d.c = a[i].c - b[i].c;
    m = std::max(m, norms(d).h1_sum);
  }
  return m;
}

WaveTrajectory solve_window(const WaveField& phi_i, const WaveSources& src,
                            double t0, double T, double dt, FixedPointReport* report,
                            double tol, int max_iterations, int splits_left) {
  const int n_steps = std::max(1, static_cast<int>(std::lround((T - t0) / dt)));
  std::vector<double> times(static_cast<std::size_t>(n_steps) + 1);
  for (int m = 0; m <= n_steps; ++m)
    times[static_cast<std::size_t>(m)] = t0 + (T - t0) * m / n_steps;

  std::vector<WaveField> prev(times.size(), WaveField(phi_i.N));
  for (std::size_t m = 0; m < times.size(); ++m)
    for (int k = -phi_i.N; k <= phi_i.N; ++k)
      prev[m].coeff(k) = free_phase(k, times[m] - t0) * phi_i.coeff(k);

  double last_diff = -1.0;
  for (int it = 1; it <= max_iterations; ++it) {
    std::vector<WaveField> cur = duhamel_pass(phi_i, src, times, prev);
    const double diff = sup_h1_diff(cur, prev);
    if (report) {
      ++report->iterations;
      if (last_diff > 0.0) report->factors.push_back(diff / last_diff);
    }
    prev = std::move(cur);
    if (diff < tol) {
      if (report) report->converged = true;
      WaveTrajectory traj;
      traj.times = std::move(times);
      traj.states = std::move(prev);
      return traj;
    }
    const bool stalled = last_diff > 0.0 && diff >= last_diff && it >= 3;
    if (stalled || it == max_iterations) {
      if (splits_left == 0)
        throw std::runtime_error(
            "solve_linear_wave: no contraction after maximal window splitting");
      if (report) ++report->window_splits;
      const double tm = 0.5 * (t0 + T);
      WaveTrajectory left = solve_window(phi_i, src, t0, tm, dt, report, tol,
                                         max_iterations, splits_left - 1);
      WaveTrajectory right = solve_window(left.states.back(), src, tm, T, dt, report,
                                          tol, max_iterations, splits_left - 1);
      left.times.insert(left.times.end(), right.times.begin() + 1, right.times.end());
      left.states.insert(left.states.end(), right.states.begin() + 1,
                         right.states.end());
      return left;
    }
    last_diff = diff;
  }
  throw std::runtime_error("solve_linear_wave: iteration limit");
}

}  // namespace

WaveTrajectory solve_linear_wave(const WaveField& phi_i, const WaveSources& src,
                                 double T, double dt, FixedPointReport* report,
                                 double tol, int max_iterations, int max_splits) {
  if (T <= 0.0 || dt <= 0.0)
    throw std::invalid_argument("solve_linear_wave: window and step must be positive");
  return solve_window(phi_i, src, 0.0, T, dt, report, tol, max_iterations, max_splits);
}

double wave_bound_ratio(const WaveTrajectory& traj, const WaveSources& src) {
  const double s2 = std::norm(src.S2) * two_pi();
  const double h1_i = norms(traj.states.front()).h1_sum;
  const double h1_i_sq = h1_i * h1_i;
  double iu = 0.0, is = 0.0;
  double prev_u = 0.0, prev_s = 0.0, prev_t = 0.0;
  double worst = 0.0;
  for (std::size_t m = 0; m < traj.times.size(); ++m) {
    const double t = traj.times[m];
    const double u = src.U ? norms(src.U(t)).h1_sum : 0.0;
    const double s1 = src.S1 ? norms(src.S1(t)).h1_sum : 0.0;
    const double uu = u * u;
    const double ss = s1 * s1 + s2;
    if (m > 0) {
      iu += 0.5 * (prev_u + uu) * (t - prev_t);
      is += 0.5 * (prev_s + ss) * (t - prev_t);
    }
    prev_u = uu;
    prev_s = ss;
    prev_t = t;
    const double lhs_r = norms(traj.states[m]).h1_sum;
    const double rhs = (2.0 * h1_i_sq + 6.0 * t * iu) * std::exp(6.0 * t * is);
    if (rhs > 0.0) worst = std::max(worst, lhs_r * lhs_r / rhs);
  }
  return worst;
}

WaveField step_full_psi(const WaveField& psi,
                        const std::function<PsiMoments(double)>& moments,
                        double t, double dt, const ModelParams& params) {
  const double g = params.g;
  const double n0 = params.n0;
  const Complex I(0.0, 1.0);
  auto rhs = [&](const WaveField& p, double tt) {
    const PsiMoments mm = moments(tt);
    const int band = std::max({p.N, mm.D.N, mm.f_int.N});
    SpectralX sp(3 * band + 2);
    const ArrayXc pv = sp.synth(p.c);
    const ArrayXc dv = sp.synth(mm.D.c);
    const ArrayXc fv = sp.synth(mm.f_int.c);
    const ArrayXc a2 = sp.truncate(ArrayXc(pv * pv.conjugate()), band);
    const Complex shift(n0 - 2.0 * mm.M0, 0.0);
    const ArrayXc w = pv * (-0.5 * dv - I * g * (a2 + 2.0 * fv + shift));
    return sp.to_wave(w, p.N);
  };
  const WaveField w0 = rhs(psi, t);
  WaveField pred(psi.N);
  for (int n = -psi.N; n <= psi.N; ++n)
    pred.coeff(n) = free_phase(n, 0.5 * dt) * (psi.coeff(n) + 0.5 * dt * w0.coeff(n));
  const WaveField wm = rhs(pred, t + 0.5 * dt);
  WaveField out(psi.N);
  for (int n = -psi.N; n <= psi.N; ++n)
    out.coeff(n) =
        free_phase(n, dt) * psi.coeff(n) + dt * free_phase(n, 0.5 * dt) * wm.coeff(n);
  return out;
}

void write_wave_csv(const WaveTrajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_wave_csv: cannot open " + path);
  out << "t,n,re,im\n";
  char buf[96];
  for (std::size_t m = 0; m < traj.times.size(); ++m) {
    const WaveField& w = traj.states[m];
    for (int n = -w.N; n <= w.N; ++n) {
      std::snprintf(buf, sizeof(buf), "%.17g,%d,%.17g,%.17g\n", traj.times[m], n,
                    w.coeff(n).real(), w.coeff(n).imag());
      out << buf;
    }
  }
}

std::string wave_norms_json(const WaveTrajectory& traj) {
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t m = 0; m < traj.times.size(); ++m) {
    const NormReport r = norms(traj.states[m]);
    samples.push_back({{"t", traj.times[m]},
                       {"l2", r.l2},
                       {"dx_l2", r.dx_l2},
                       {"h1", r.h1_sum}});
  }
  return nlohmann::json{{"samples", samples}}.dump(2);
}

}  // namespace condkin
