#pragma once

#include <functional>
#include <string>
#include <vector>

#include "condkin/collision.hpp"
#include "condkin/fields.hpp"
#include "condkin/params.hpp"

namespace condkin {

// Coefficients of the linearized condensate equation
//   d/dt Phi - i d^2/dx^2 Phi = S1*Phi + S2*conj(Phi) + U.
// S1 and U are time samplers: the kinetic moments and the nonlinear terms
// they carry are frozen at assembly, only the explicit exponential decay
// prefactors move with t. S2 is the constant conjugate coupling -i*g*n0.
struct WaveSources {
  std::function<WaveField(double)> S1;
  Complex S2{0.0, 0.0};
  std::function<WaveField(double)> U;
};

// x-Fourier series of the three kinetic moment fields of a frozen state:
// integral of P*(L s) dp, of P*s dp, and of Q(s,s) dp per collocation point.
struct KineticMoments {
  WaveField m_PLs;
  WaveField m_Ps;
  WaveField m_Q;
};

KineticMoments kinetic_moments(const KineticField& s, const CollisionOperator& op,
                               int band);

WaveSources assemble_sources(const KineticField& s, const WaveField& phi,
                             const ModelParams& params, const CollisionOperator& op);

// Fourier coefficients (band phi.N) of S1*phi + S2*conj(phi) + U at time t.
WaveField wave_rhs(const WaveField& phi, const WaveSources& src, double t);

// One exponential-midpoint step: exact free flight per mode, midpoint source
// value from a predictor substep.
WaveField step_wave(const WaveField& phi, const WaveSources& src, double t, double dt);

struct WaveTrajectory {
  std::vector<double> times;
  std::vector<WaveField> states;
};

struct FixedPointReport {
  std::vector<double> factors;  // successive-difference contraction ratios
  int iterations = 0;
  bool converged = false;
  int window_splits = 0;
};

// Fixed-point resolution of the Duhamel form of the linear equation with
// frozen sources. On non-contraction the window is halved and the halves are
// chained; throws std::runtime_error once max_splits is exhausted.
WaveTrajectory solve_linear_wave(const WaveField& phi_i, const WaveSources& src,
                                 double T, double dt,
                                 FixedPointReport* report = nullptr,
                                 double tol = 1e-11, int max_iterations = 60,
                                 int max_splits = 6);

// Largest ratio of ||Phi(t)||_H1^2 to its a-priori growth bound along the
// trajectory; at most 1 when the bound holds.
double wave_bound_ratio(const WaveTrajectory& traj, const WaveSources& src);

// Exchange data entering the full condensate equation, as band-limited
// series: D is the dissipation field g*gamma^2 * integral of
// (P*L R + gamma*Q(R,R)) dp, f_int the momentum integral of f, M0 the
// conserved total mass density. The multiplier applied to psi is
// -D/2 - i*g*(|psi|^2 + n0 - 2*M0 + 2*f_int).
struct PsiMoments {
  WaveField D;
  WaveField f_int;
  double M0 = 0.0;
};

WaveField step_full_psi(const WaveField& psi,
                        const std::function<PsiMoments(double)>& moments,
                        double t, double dt, const ModelParams& params);

// Trajectory export: flat CSV (t, n, re, im) and per-sample norm summaries.
void write_wave_csv(const WaveTrajectory& traj, const std::string& path);
std::string wave_norms_json(const WaveTrajectory& traj);

}  // namespace condkin
