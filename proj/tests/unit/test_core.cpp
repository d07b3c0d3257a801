#include <cmath>
#include <random>

#include "condkin/fields.hpp"
#include "condkin/grid.hpp"
#include "condkin/norms.hpp"
#include "condkin/params.hpp"
#include "doctest.h"

using namespace condkin;

namespace {

ModelParams reference_params() {
  ModelParams p;  // defaults: g=1, n0=0.1, gamma=0.05, Lambda_cut=1, p_max=3
  return p;
}

double annulus_area(const ModelParams& p) {
  const double lc2 = 2.0 * p.Lambda_cut * p.Lambda_cut;
  return (4.0 / 3.0) * (std::pow(p.p_max, 3) - std::pow(lc2, 1.5));
}

std::mt19937_64 rng(20260816ull);

ArrayXr random_real(Eigen::Index n) {
  std::normal_distribution<double> dist;
  ArrayXr v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

ArrayXc random_complex(Eigen::Index n) {
  std::normal_distribution<double> dist;
  ArrayXc v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = Complex(dist(rng), dist(rng));
  return v;
}

}  // namespace

TEST_CASE("parameter validation") {
  ModelParams p = reference_params();
  CHECK_NOTHROW(p.validate());
  CHECK(p.lambda() == doctest::Approx(p.gamma * p.gamma));
  CHECK(p.zeta() == doctest::Approx(p.c_zeta * p.gamma));
  CHECK(p.energy_shift() == doctest::Approx(p.g * p.n0));
  p.e0 = 0.0;
  CHECK(p.energy_shift() == 0.0);

  ModelParams bad = reference_params();
  bad.Lambda_cut = 0.1;  // below 2*sqrt(g*n0)
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = reference_params();
  bad.p_max = 1.0;  // p_max^2 < 2*Lambda_cut^2
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = reference_params();
  bad.gamma = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("grid covers the admissible set") {
  ModelParams p = reference_params();
  p.n_axial = 200;
  p.n_radial = 200;
  MomentumGrid grid(p);

  const double lc2 = 2.0 * p.Lambda_cut * p.Lambda_cut;
  const double pmax2 = p.p_max * p.p_max;
  for (int i = 0; i < grid.size(); ++i) {
    CHECK(grid.u()(i) >= 0.0);
    CHECK(grid.E()(i) >= lc2);
    CHECK(grid.E()(i) <= pmax2);
    CHECK(grid.E()(i) == doctest::Approx(grid.a()(i) * grid.a()(i) + grid.u()(i)));
  }
  CHECK(grid.cell_weight() > 0.0);

  // quadrature total vs the closed-form measure of the admissible set
  const double exact = M_PI * annulus_area(p);
  const double err200 = std::abs(grid.total_weight() - exact) / exact;
  CHECK(err200 < 1e-3);

  p.n_axial = p.n_radial = 100;
  const double err100 =
      std::abs(MomentumGrid(p).total_weight() - exact) / exact;
  p.n_axial = p.n_radial = 400;
  const double err400 =
      std::abs(MomentumGrid(p).total_weight() - exact) / exact;
  CHECK(err400 < err100);
  CHECK(err400 < 1e-3);
}

TEST_CASE("axial nodes are mirror-symmetric") {
  ModelParams p = reference_params();
  p.n_axial = 34;
  p.n_radial = 22;
  MomentumGrid grid(p);
  for (int i = 0; i < grid.size(); ++i) {
    const int mirror = grid.node_at(p.n_axial - 1 - grid.axial_index(i),
                                    grid.energy_index(i));
    REQUIRE(mirror >= 0);
    CHECK(grid.a()(mirror) == -grid.a()(i));  // bitwise
    CHECK(grid.E()(mirror) == grid.E()(i));
  }
}

TEST_CASE("equilibrium occupancy tables") {
  // pick the shift so one node sits exactly at occupancy 1
  ModelParams p;
  p.g = 1.0;
  p.n0 = 0.01;
  p.Lambda_cut = 0.3;
  p.p_max = 0.7;
  p.n_axial = 8;
  p.n_radial = 8;
  MomentumGrid probe(p);
  const double E0 = probe.E()(0);
  p.e0 = std::log(2.0) - E0;
  REQUIRE(p.e0 > 0.0);
  MomentumGrid grid(p);
  CHECK(grid.P()(0) == doctest::Approx(1.0).epsilon(1e-12));

  // occupancy decreases with energy
  for (int i = 0; i + 1 < grid.size(); ++i) {
    if (grid.E()(i + 1) > grid.E()(i)) CHECK(grid.P()(i + 1) < grid.P()(i));
  }

  // P/(1+P) equals the Boltzmann factor identically
  MomentumGrid ref(reference_params());
  const ArrayXr ratio = ref.P() / (1.0 + ref.P());
  CHECK((ratio - ref.mu()).abs().maxCoeff() < 1e-14);
  CHECK((ref.one_plus_P() * ref.inv_one_plus_P() - 1.0).abs().maxCoeff() < 1e-14);
  CHECK(ref.P().minCoeff() > 0.0);
  CHECK(ref.P().maxCoeff() < 1.0 / std::expm1(2.0 * 1.0 * 1.0));  // E > 2*Lambda^2 strictly
}

TEST_CASE("mass constant and trap constant") {
  MomentumGrid grid(reference_params());
  const double M0 = grid.M0();
  CHECK(M0 > grid.params().n0);
  CHECK(grid.U_ext() == doctest::Approx(grid.params().g * (grid.params().n0 - 2.0 * M0)));
}

TEST_CASE("weighted inner product") {
  MomentumGrid grid(reference_params());
  const Eigen::Index n = grid.size();

  const ArrayXc z = ArrayXc::Zero(n);
  CHECK(std::abs(inner_product(z, z, grid)) == 0.0);

  const ArrayXc f = random_complex(n);
  const ArrayXc h = random_complex(n);
  const Complex fh = inner_product(f, h, grid);
  const Complex hf = inner_product(h, f, grid);
  CHECK(std::abs(fh - std::conj(hf)) < 1e-12 * std::abs(fh));

  // odd-in-a times even-in-a integrand vanishes by mirror symmetry
  const ArrayXr odd = grid.a() * (1.0 + grid.P());
  const ArrayXr even =
      (grid.E() + grid.params().g * grid.params().n0) * (1.0 + grid.P());
  const double cross = inner_product(odd, even, grid);
  const double scale = std::sqrt(inner_product(odd, odd, grid) *
                                 inner_product(even, even, grid));
  CHECK(std::abs(cross) < 1e-12 * scale);
}

TEST_CASE("wave norms and collocation consistency") {
  WaveField phi(4);
  NormReport zero = norms(phi);
  CHECK(zero.l2 == 0.0);
  CHECK(zero.h1_sum == 0.0);

  phi.coeff(1) = Complex(1.0, 0.0);
  NormReport single = norms(phi);
  CHECK(single.l2 * single.l2 == doctest::Approx(2.0 * M_PI).epsilon(1e-12));
  CHECK(single.dx_l2 * single.dx_l2 == doctest::Approx(2.0 * M_PI).epsilon(1e-12));

  // Parseval: collocation-grid integral of |psi|^2 vs coefficient sum
  WaveField rnd(4);
  rnd.c = random_complex(9);
  SpectralX sp(16);
  const ArrayXc vals = sp.to_collocation(rnd);
  const double phys = (2.0 * M_PI / sp.size()) * vals.abs2().sum();
  const double coef = norms(rnd).l2;
  CHECK(std::abs(phys - coef * coef) < 1e-10 * phys);
}

TEST_CASE("kinetic norms against direct summation") {
  ModelParams p = reference_params();
  p.n_axial = 24;
  p.n_radial = 16;
  MomentumGrid grid(p);
  const Eigen::Index n = grid.size();

  KineticField h(2, n);
  h.mode(0) = random_real(n).cast<Complex>();
  h.mode(1) = random_complex(n);
  h.mode(2) = random_complex(n);

  ArrayXr nu = (1.0 + grid.abs_p()).cube();  // stand-in weight with the right shape
  NormReport r = norms(h, grid, &nu);

  double l2 = 0.0, dx = 0.0, nu_half = 0.0, nu_mhalf = 0.0, wcube = 0.0;
  for (int k = -2; k <= 2; ++k) {
    const ArrayXc& m = h.mode(std::abs(k));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double common =
          grid.cell_weight() * grid.mu()(i) * std::norm(m(i));
      l2 += 2.0 * M_PI * common;
      dx += 2.0 * M_PI * k * k * common;
      nu_half += 2.0 * M_PI * nu(i) * common;
      nu_mhalf += 2.0 * M_PI * common / nu(i);
      wcube += 2.0 * M_PI * std::pow(1.0 + grid.abs_p()(i), 3) * common;
    }
  }
  CHECK(r.l2 * r.l2 == doctest::Approx(l2).epsilon(1e-12));
  CHECK(r.dx_l2 * r.dx_l2 == doctest::Approx(dx).epsilon(1e-12));
  CHECK(r.nu_half * r.nu_half == doctest::Approx(nu_half).epsilon(1e-12));
  CHECK(r.nu_minus_half * r.nu_minus_half == doctest::Approx(nu_mhalf).epsilon(1e-12));
  CHECK(r.wcube * r.wcube == doctest::Approx(wcube).epsilon(1e-12));
  CHECK(r.h1_sum == doctest::Approx(r.l2 + r.dx_l2));
  CHECK(r.h1_quad == doctest::Approx(std::sqrt(r.l2 * r.l2 + r.dx_l2 * r.dx_l2)));
}

TEST_CASE("collocation transforms round-trip") {
  SpectralX sp(16);

  // complex series, band 4
  ArrayXc coeff = random_complex(9);
  ArrayXc back = sp.analyze(sp.synth(coeff), 4);
  CHECK((back - coeff).abs().maxCoeff() < 1e-13);

  // Hermitian stack over a small grid
  ModelParams p = reference_params();
  p.n_axial = 10;
  p.n_radial = 6;
  MomentumGrid grid(p);
  KineticField f(3, grid.size());
  f.mode(0) = random_real(grid.size()).cast<Complex>();
  for (int k = 1; k <= 3; ++k) f.mode(k) = random_complex(grid.size());

  const Eigen::MatrixXd vals = sp.to_collocation(f);
  const KineticField g = sp.to_kinetic(vals, 3);
  for (int k = 0; k <= 3; ++k)
    CHECK((g.mode(k) - f.mode(k)).abs().maxCoeff() < 1e-13);
  CHECK(g.mode(0).imag().abs().maxCoeff() == 0.0);  // Hermitian structurally

  // band-limiting projection is idempotent
  ArrayXr noisy = random_real(sp.size());
  ArrayXr once = sp.truncate(noisy, 3);
  ArrayXr twice = sp.truncate(once, 3);
  CHECK((twice - once).abs().maxCoeff() < 1e-13);
}

TEST_CASE("bilinear stencil reproduces linear functions") {
  ModelParams p = reference_params();
  p.n_axial = 40;
  p.n_radial = 30;
  MomentumGrid grid(p);

  std::uniform_real_distribution<double> ua(-1.2, 1.2), uE(3.0, 7.0);
  int tested = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const double a = ua(rng), E = uE(rng);
    InterpStencil s = grid.locate(a, E);
    if (!s.valid) continue;
    ++tested;
    double wsum = 0.0, lin = 0.0;
    for (int d = 0; d < 4; ++d) {
      wsum += s.w[d];
      lin += s.w[d] * (grid.a()(s.node[d]) + 2.0 * grid.E()(s.node[d]));
    }
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lin == doctest::Approx(a + 2.0 * E).epsilon(1e-12));
  }
  CHECK(tested > 100);

  // outside the grid: invalid
  CHECK_FALSE(grid.locate(0.0, 100.0).valid);
  CHECK_FALSE(grid.locate(3.5, 5.0).valid);
}
