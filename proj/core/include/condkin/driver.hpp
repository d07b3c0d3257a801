#pragma once

#include <limits>
#include <string>
#include <vector>

#include "condkin/collision.hpp"
#include "condkin/fields.hpp"
#include "condkin/kinetic.hpp"
#include "condkin/params.hpp"
#include "condkin/spectral.hpp"
#include "condkin/wave.hpp"

namespace condkin {

// Admissible initial data: the zero mode of the kinetic perturbation loses
// its kernel components (zero axial-momentum and energy moments), and the
// real part of the condensate zero mode is shifted so the total mass equals
// the equilibrium value 2*pi*M0. Throws std::runtime_error when no real
// shift can balance the mass (the discriminant n0 - gamma^2*c turns
// negative).
struct PreparedData {
  KineticField R;
  WaveField phi;
  double moment_x_correction = 0.0;  // kernel coefficients removed from mode 0
  double moment_2_correction = 0.0;
  double phi0_shift = 0.0;  // change applied to Re phi(0)
};
PreparedData prepare_initial_data(const KineticField& raw_R,
                                  const WaveField& raw_phi,
                                  const ModelParams& params,
                                  const KernelBasis& basis,
                                  const MomentumGrid& grid);

// Post-hoc admissibility residuals, evaluated as plain quadrature sums
// rather than through the kernel projection: the two weighted moments of the
// kinetic zero mode and the integrated mass balance, all of which
// preparation drives to round-off.
struct PreparationCheck {
  double moment_x = 0.0;
  double moment_2 = 0.0;
  double mass_balance = 0.0;
};
PreparationCheck check_prepared(const KineticField& R, const WaveField& phi,
                                const ModelParams& params,
                                const MomentumGrid& grid);

struct DiagnosticsSample {
  double t = 0.0;
  double mass = 0.0;      // condensate + excitation mass
  double moment_x = 0.0;  // axial-momentum moment of the excitation density
  double moment_2 = 0.0;  // shifted-energy moment
  double alpha = 0.0;     // gradient + compression energy of the condensate
  double energy_kinetic = 0.0;
  double energy_internal = 0.0;
  double energy_potential = 0.0;
  double d_norm = 0.0;  // L2(dx) size of the damping field
  double s_l2 = 0.0;
  double s_dx_l2 = 0.0;
  double s_nu_perp = 0.0;
  double min_f = 0.0;  // positivity monitor over nodes and collocation points
};
struct DiagnosticsSeries {
  std::vector<DiagnosticsSample> samples;
  double zeta_hat = 0.0;  // filled by decay_fit consumers
  bool small_data = true; // composite data norm within the guard threshold
};

struct SimulationState {
  double t = 0.0;
  KineticField s;
  WaveField phi;
  DiagnosticsSeries diagnostics;
  WaveField psi(const ModelParams& params) const;  // sqrt(n0) + gamma*phi
};

enum class SimulateMode { Direct, PicardWindows };

struct SimulateOptions {
  double dt = 0.0;            // <= 0 selects the default step rule
  double t_final = 1.0;
  double sample_every = 0.0;  // <= 0 records every step
  SimulateMode mode = SimulateMode::Direct;
  double mass_tolerance = 1e-4;  // relative drift that aborts the run
  double eta_guard = 0.1;        // small-data threshold (warning only)
  double picard_tol = 1e-10;
  int picard_max_iterations = 25;
};

// Accuracy-driven default step: min of the relaxation scale
// 0.1/(g*gamma*n0*max nu) and an eighth of the fastest retained wave period.
double default_dt(const ModelParams& params, const CollisionOperator& op,
                  int n_modes);

struct SimulationRun {
  KineticTrajectory s;  // sampled at the diagnostics cadence
  WaveTrajectory phi;
  DiagnosticsSeries diagnostics;
  double dt = 0.0;
  bool completed = false;
  std::string note;  // abort reason when not completed
};

// Coupled evolution of (s, phi) from prepared data. Direct mode interleaves
// the two exponential-midpoint steps, sharing one collision sweep per stage
// between the kinetic right side and the wave sources; picard-windows mode
// chains fixed-point windows of length at most 1/(10*g*n0) and continues
// from each terminal state. Aborts (completed = false) on mass drift beyond
// tolerance or loss of positivity.
SimulationRun simulate(const KineticField& R_i, const WaveField& phi_i,
                       const ModelParams& params, const CollisionOperator& op,
                       const SimulateOptions& opt);

struct PicardReport {
  std::vector<double> factors;  // successive-difference contraction ratios
  int iterations = 0;
  bool converged = false;
  int window_splits = 0;
};
struct PicardResult {
  KineticTrajectory s;
  WaveTrajectory phi;
  PicardReport report;
};

// Local fixed-point solver: alternates a linear wave solve against the
// frozen kinetic iterate with a linear kinetic solve against the frozen
// condensate iterate, until the composite difference norm
//   sup_t |delta phi|_H1 + sup_t |delta s|_{2,H1} + sqrt(gamma)*nu-flux
// falls below tol. Windows without contraction are halved recursively;
// throws std::runtime_error when max_splits is exhausted. t0 anchors the
// window in absolute time (the decay factors are not autonomous); reported
// times are absolute.
PicardResult picard_solve(const KineticField& R_i, const WaveField& phi_i,
                          double T, const ModelParams& params,
                          const CollisionOperator& op, double dt,
                          double tol = 1e-10, int max_iterations = 25,
                          int max_splits = 4, double t0 = 0.0);

// Residuals of the energy identities along a sampled run, by central
// differences in time: the balance of the Lyapunov energy alpha against its
// four assembled flux terms, the balance of the combined condensate energy
// against the damping and exchange pairing, and the drift rate of the total
// mass (relative, per unit time).
struct EnergyAudit {
  std::vector<double> times;
  std::vector<double> alpha_residual;
  std::vector<double> balance_residual;
  std::vector<double> mass_rate;
  double max_alpha_residual = 0.0;
  double max_balance_residual = 0.0;
  double max_mass_rate = 0.0;
  double alpha_scale = 0.0;  // largest |d alpha/dt| seen, for relative reads
};
EnergyAudit energy_identity_check(const SimulationRun& run,
                                  const ModelParams& params,
                                  const CollisionOperator& op);

// Residuals of the per-mode hydrodynamic moment equations along a sampled
// run: for each axial mode k, the kernel moments (h_k, chi_x) and
// (h_k, chi_2) of the decaying perturbation h obey first-order ODEs whose
// transport part couples them through kappa = (a*chi_2, chi_x) plus
// non-hydrodynamic remainders, and whose source is the quadratic part of the
// collision right side. Residuals are sups over modes of the central
// difference against the assembled right side.
struct MomentAudit {
  std::vector<double> times;
  std::vector<double> residual_x;
  std::vector<double> residual_2;
  double max_residual_x = 0.0;
  double max_residual_2 = 0.0;
  double kappa = 0.0;
  double scale = 0.0;  // largest kernel-moment magnitude seen
};
MomentAudit moment_identity_check(const SimulationRun& run,
                                  const ModelParams& params,
                                  const CollisionOperator& op,
                                  const KernelBasis& basis);

// Least-squares exponential fit of a positive series on [t_min, t_max]:
// log(values) against t, slope reported as a positive decay rate. A
// non-monotone tail (rebound above 1.5x the running minimum) is truncated
// before fitting.
struct DecayFit {
  double rate = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t used = 0;
};
DecayFit decay_fit(const std::vector<double>& t,
                   const std::vector<double>& values, double t_min = 0.0,
                   double t_max = std::numeric_limits<double>::infinity());

void write_diagnostics_csv(const DiagnosticsSeries& d, const std::string& path);

// JSON block with the run's fitted constants and monitor outcomes.
std::string run_summary_json(const SimulationRun& run,
                             const ModelParams& params, const DecayFit& fit);

}  // namespace condkin
