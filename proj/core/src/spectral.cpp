#include "condkin/spectral.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "condkin/norms.hpp"
#include "json.hpp"

namespace condkin {

KernelBasis build_kernel_basis(const MomentumGrid& grid) {
  ArrayXr chi_x = grid.a() * grid.one_plus_P();
  ArrayXr chi_2 = (grid.E() + grid.params().g * grid.params().n0) *
                  grid.one_plus_P();

  const double nx2 = inner_product(chi_x, chi_x, grid);
  if (!(nx2 > 0.0))
    throw std::runtime_error("kernel basis: grid has no odd direction");
  chi_x /= std::sqrt(nx2);

  // orthogonal by parity already; one Gram-Schmidt pass guards asymmetric grids
  chi_2 -= inner_product(chi_2, chi_x, grid) * chi_x;
  chi_2 /= std::sqrt(inner_product(chi_2, chi_2, grid));

  KernelBasis b;
  b.chi_x = std::move(chi_x);
  b.chi_2 = std::move(chi_2);
  b.kappa = inner_product(ArrayXr(grid.a() * b.chi_2), b.chi_x, grid);
  return b;
}

Splitting project(const ArrayXr& h, const KernelBasis& basis,
                  const MomentumGrid& grid) {
  Splitting s;
  s.c_x = inner_product(h, basis.chi_x, grid);
  s.c_2 = inner_product(h, basis.chi_2, grid);
  s.h_par = s.c_x * basis.chi_x + s.c_2 * basis.chi_2;
  s.h_perp = h - s.h_par;
  return s;
}

SplittingC project(const ArrayXc& h, const KernelBasis& basis,
                   const MomentumGrid& grid) {
  SplittingC s;
  s.c_x = inner_product(h, ArrayXc(basis.chi_x.cast<Complex>()), grid);
  s.c_2 = inner_product(h, ArrayXc(basis.chi_2.cast<Complex>()), grid);
  s.h_par = s.c_x * basis.chi_x.cast<Complex>() +
            s.c_2 * basis.chi_2.cast<Complex>();
  s.h_perp = h - s.h_par;
  return s;
}

namespace {

// quotient spectrum of -(Lh,h)/((1+|p|)^3 h,h) over the complement of the
// kernel basis, for h supported on the node subset `keep`
Eigen::VectorXd quotient_spectrum(const MomentumGrid& grid,
                                  const Eigen::MatrixXd& L,
                                  const KernelBasis& basis,
                                  const std::vector<int>& keep) {
  const int m = static_cast<int>(keep.size());
  if (m < 3)
    throw std::invalid_argument("estimate_gap: node subset too small");
  const ArrayXr d = (grid.cell_weight() * grid.mu()).sqrt();

  // transform to coordinates where the weighted metric is Euclidean
  Eigen::MatrixXd M(m, m);
  Eigen::MatrixXd Y(m, 2);
  Eigen::ArrayXd cube(m);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c)
      M(r, c) = d(keep[r]) * L(keep[r], keep[c]) / d(keep[c]);
    Y(r, 0) = d(keep[r]) * basis.chi_x(keep[r]);
    Y(r, 1) = d(keep[r]) * basis.chi_2(keep[r]);
    cube(r) = std::pow(1.0 + grid.abs_p()(keep[r]), 3);
  }
  M = 0.5 * (M + M.transpose()).eval();

  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
  const Eigen::MatrixXd Q = qr.householderQ();
  const Eigen::MatrixXd Z = Q.rightCols(m - 2);

  Eigen::MatrixXd A = -(Z.transpose() * M * Z);
  A = 0.5 * (A + A.transpose()).eval();
  Eigen::MatrixXd B = Z.transpose() * cube.matrix().asDiagonal() * Z;
  B = 0.5 * (B + B.transpose()).eval();

  const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(
      A, B, Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  return es.eigenvalues();
}

}  // namespace

GapEstimate estimate_gap(const CollisionOperator& op,
                         const KernelBasis& basis) {
  const MomentumGrid& grid = op.grid();
  const ModelParams& p = grid.params();
  const Eigen::Index n = grid.size();
  const Eigen::MatrixXd L = op.dense_L();

  GapEstimate r;
  r.E_cut = p.p_max * p.p_max - 2.0 * p.Lambda_cut * p.Lambda_cut -
            p.manifold_shift() - 1.5 * p.Lambda_cut * p.Lambda_cut;

  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  const Eigen::VectorXd full = quotient_spectrum(grid, L, basis, all);
  r.c_full = full(0);
  while (r.spurious_dim < full.size() && full(r.spurious_dim) < 1e-8)
    ++r.spurious_dim;

  std::vector<int> inner;
  for (int i = 0; i < n; ++i)
    if (grid.E()(i) <= r.E_cut) inner.push_back(i);
  r.c_hat = quotient_spectrum(grid, L, basis, inner)(0);

  r.indefinite = r.c_full < -1e-8;
  return r;
}

NuBounds fit_nu_bounds(const MomentumGrid& grid, const ArrayXr& nu) {
  if (!(nu > 0.0).all())
    throw std::runtime_error("fit_nu_bounds: collision frequency not positive");
  const ArrayXr ratio = nu / (1.0 + grid.abs_p()).cube();
  return {ratio.minCoeff(), ratio.maxCoeff()};
}

double fit_nu_exponent(const MomentumGrid& grid, const ArrayXr& nu) {
  const double p_split =
      0.5 * (grid.abs_p().minCoeff() + grid.abs_p().maxCoeff());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  long m = 0;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (grid.abs_p()(i) < p_split) continue;
    const double x = std::log(1.0 + grid.abs_p()(i));
    const double y = std::log(nu(i));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) throw std::runtime_error("fit_nu_exponent: too few outer nodes");
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

ArrayXr k_singular_values(const CollisionOperator& op, int count) {
  const MomentumGrid& grid = op.grid();
  const ArrayXr d = (grid.cell_weight() * grid.mu()).sqrt();
  const ArrayXr rn = op.nu().sqrt().inverse();
  Eigen::MatrixXd T = (d * rn).matrix().asDiagonal() * op.dense_K() *
                      (rn / d).matrix().asDiagonal();
  T = 0.5 * (T + T.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      T, Eigen::EigenvaluesOnly);
  ArrayXr sv = es.eigenvalues().array().abs();
  std::sort(sv.data(), sv.data() + sv.size(), std::greater<double>());
  return sv.head(std::min<Eigen::Index>(count, sv.size()));
}

std::string spectral_report_json(const CollisionOperator& op,
                                 const KernelBasis& basis,
                                 const GapEstimate& gap, int sv_count) {
  const MomentumGrid& grid = op.grid();
  const NuBounds nb = fit_nu_bounds(grid, op.nu());
  nlohmann::json j;
  j["c_hat"] = gap.c_hat;
  j["c_full"] = gap.c_full;
  j["E_cut"] = gap.E_cut;
  j["spurious_dim"] = gap.spurious_dim;
  j["indefinite"] = gap.indefinite;
  j["nu0_hat"] = nb.nu0_hat;
  j["nu1_hat"] = nb.nu1_hat;
  j["nu_exponent"] = fit_nu_exponent(grid, op.nu());
  j["kappa"] = basis.kappa;
  j["grid"] = {{"n_axial", grid.n_axial()},
               {"n_radial", grid.n_radial()},
               {"n_nodes", grid.size()},
               {"p_max", grid.params().p_max},
               {"Lambda_cut", grid.params().Lambda_cut}};
  if (sv_count > 0) {
    const ArrayXr sv = k_singular_values(op, sv_count);
    j["k_singular_values"] = std::vector<double>(sv.data(), sv.data() + sv.size());
  }
  return j.dump(2);
}

}  // namespace condkin
