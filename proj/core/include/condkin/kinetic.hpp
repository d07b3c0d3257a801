#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "condkin/collision.hpp"
#include "condkin/fields.hpp"
#include "condkin/params.hpp"
#include "condkin/spectral.hpp"

namespace condkin {

// Right side of the thermal-perturbation equation in mode space:
//   g*gamma*n_c(x)*(L s + gamma*e^{-zeta t} Q(s,s)/P) + zeta*s,
// with the local condensate density n_c = |sqrt(n0) + gamma*phi|^2. The
// collision operators act per x-collocation slice; products are dealiased
// stage-wise on 3*max(K, N)+2 points.
KineticField assemble_kinetic_rhs(const KineticField& s, const WaveField& phi,
                                  double t, const ModelParams& params,
                                  const CollisionOperator& op);

using KineticRHS = std::function<KineticField(const KineticField&, double)>;

enum class KineticScheme { Explicit, IMEX, Auto };

// One step of the exponential midpoint rule with the advection term
// integrated exactly by per-mode/node phases e^{-i k a dt}. Under IMEX the
// node-diagonal rates `implicit_loss` (e.g. g*gamma*n0*nu) are absorbed by a
// damped division at the predictor stage, which keeps the step stable for
// dt*loss >> 1 while the gain and nonlinear parts stay explicit; Auto uses
// the plain explicit rule while dt*max(loss) < 0.8. An empty loss array
// always steps explicitly.
KineticField step_kinetic(const KineticField& s, const KineticRHS& rhs,
                          double t, double dt, const MomentumGrid& grid,
                          const ArrayXr& implicit_loss,
                          KineticScheme scheme = KineticScheme::Auto);

struct KineticTrajectory {
  std::vector<double> times;
  std::vector<KineticField> states;
};

// Balance check for the kernel moments of a sampled trajectory: per mode k,
// the central-difference time derivative of the moment pair is compared with
// the advective coupling ik(kappa*partner + off-kernel flux) and the
// projected right side. Rows are interior sample times, columns modes 0..K;
// entries are residual magnitudes.
struct MomentResidualSeries {
  std::vector<double> times;
  Eigen::MatrixXd chi2;
  Eigen::MatrixXd chix;
  double max_chi2 = 0.0;
  double max_chix = 0.0;
};
MomentResidualSeries moment_ode_residual(const KineticTrajectory& traj,
                                         const KernelBasis& basis,
                                         const MomentumGrid& grid,
                                         const KineticRHS& rhs);

// Measured constants of the damping estimates. The inhomogeneity is
// recovered from the trajectory as G = (rhs - g*gamma*n0*L s)/(g*gamma^2),
// so it collects the density modulation, the quadratic collision term and
// the zeta counter-term. Time integrals are trapezoidal over the samples;
// the squared form weights the parallel data with eta = 1.
struct EstimateRatio {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
};
struct AprioriNormReport {
  EstimateRatio sum_form;     // sup-norm + sqrt(gamma)*(nu-perp + parallel) flows
  EstimateRatio dx_sum_form;  // same estimate applied to the x-derivative
  EstimateRatio sq_form;      // squared form, parallel part on the right side
};
AprioriNormReport apriori_norm_report(const KineticTrajectory& traj,
                                      const KineticRHS& rhs,
                                      const ModelParams& params,
                                      const KernelBasis& basis,
                                      const MomentumGrid& grid,
                                      const CollisionOperator& op);

// Flat snapshot export, one row per (t, mode, node): "t,k,node,re,im".
void write_kinetic_csv(const KineticTrajectory& traj, const std::string& path);

// Norm time series, one row per (t, name): "t,name,value" with names
// l2, dx_l2, nu_perp, par.
void write_kinetic_norms_csv(const KineticTrajectory& traj,
                             const MomentumGrid& grid,
                             const KernelBasis& basis, const ArrayXr& nu,
                             const std::string& path);

}  // namespace condkin
