#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "condkin/collision.hpp"
#include "condkin/collision_oracle.hpp"
#include "condkin/norms.hpp"
#include "condkin/tables_io.hpp"
#include "doctest.h"

using namespace condkin;

namespace {

ModelParams reference_params(int na, int nr) {
  ModelParams p;
  p.n_axial = na;
  p.n_radial = nr;
  return p;
}

double wnorm(const ArrayXr& v, const MomentumGrid& g) {
  return std::sqrt(inner_product(v, v, g));
}

ArrayXr random_field(const MomentumGrid& g, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  ArrayXr h(g.size());
  for (int i = 0; i < g.size(); ++i) h(i) = nd(rng);
  return h;
}

// kernel directions of the linearized operator (balanced occupancy shift)
ArrayXr kernel_axial(const MomentumGrid& g) {
  return g.a() * (1.0 + g.P());
}
ArrayXr kernel_energy(const MomentumGrid& g) {
  return (g.E() + g.params().g * g.params().n0) * (1.0 + g.P());
}

}  // namespace

TEST_CASE("clamped stencil reproduces linear functions and matches the strict one") {
  MomentumGrid g(reference_params(24, 16));
  auto lin = [](double a, double E) { return 2.0 + 3.0 * a + 0.5 * E; };
  auto eval = [&](const InterpStencil& s) {
    double v = 0.0;
    for (int d = 0; d < 4; ++d) v += s.w[d] * lin(g.a()(s.node[d]), g.E()(s.node[d]));
    return v;
  };

  // interior: identical to the strict stencil
  {
    const double a = 0.3, E = 5.1;
    const InterpStencil s1 = g.locate(a, E);
    const InterpStencil s2 = g.locate_clamped(a, E);
    REQUIRE(s1.valid);
    REQUIRE(s2.valid);
    for (int d = 0; d < 4; ++d) {
      CHECK(s1.node[d] == s2.node[d]);
      CHECK(s1.w[d] == s2.w[d]);
    }
  }

  // extrapolation zones: below the first row, above the last, near the
  // parabolic boundary; linear reproduction must hold throughout
  const double probes[][2] = {{0.0, 2.05}, {0.1, 8.95}, {2.2, 5.05}, {-2.9, 8.6}};
  for (auto& q : probes) {
    REQUIRE(g.admissible(q[0], q[1]));
    const InterpStencil s = g.locate_clamped(q[0], q[1]);
    REQUIRE(s.valid);
    double wsum = 0.0;
    for (int d = 0; d < 4; ++d) {
      REQUIRE(s.node[d] >= 0);
      wsum += s.w[d];
    }
    CHECK(std::abs(wsum - 1.0) < 1e-12);
    CHECK(std::abs(eval(s) - lin(q[0], q[1])) < 1e-10);
  }

  // a column with no complete cell stays invalid: on a 24x4 grid the
  // outermost axial nodes fall outside the parabola for every energy row
  MomentumGrid flat(reference_params(24, 4));
  REQUIRE(flat.admissible(2.75, 7.8));
  CHECK_FALSE(flat.locate_clamped(2.75, 7.8).valid);
}

TEST_CASE("pair table is admissible and balanced at the default shift") {
  MomentumGrid g(reference_params(24, 16));
  CollisionOperator op(g);
  CHECK(op.subdiv() == CollisionOperator::kDefaultSubdiv);
  REQUIRE(op.pairs().size() > 1000);
  for (const PairEntry& e : op.pairs()) {
    REQUIRE(e.n2 >= 0);
    REQUIRE(e.n2 < g.size());
    REQUIRE(e.n3 >= 0);
    REQUIRE(e.n3 < g.size());
    double wsum = 0.0;
    for (int d = 0; d < 4; ++d) {
      REQUIRE(e.s[d] >= 0);
      REQUIRE(e.s[d] < g.size());
      wsum += e.c[d];
    }
    REQUIRE(std::abs(wsum - 1.0) < 1e-12);
    REQUIRE(e.P1 > 0.0);
    REQUIRE(e.F1 == e.F2);
    REQUIRE(e.F1 == e.F3);
    REQUIRE(e.F1 > 0.0);
    // the off-grid partner satisfies both resonance constraints
    const double a1 = g.a()(e.n2) + g.a()(e.n3);
    const double E1 = g.E()(e.n2) + g.E()(e.n3) + g.params().manifold_shift();
    REQUIRE(g.admissible(a1, E1));
  }
}

TEST_CASE("literal occupancy shift produces distinct role coefficients") {
  ModelParams p = reference_params(16, 12);
  p.e0 = 0.0;
  MomentumGrid g(p);
  CollisionOperator op(g);
  bool any_distinct = false;
  for (const PairEntry& e : op.pairs())
    if (e.F1 != e.F2 || e.F2 != e.F3) any_distinct = true;
  CHECK(any_distinct);
  std::mt19937_64 rng(5);
  const ArrayXr h = random_field(g, rng);
  CHECK(op.apply_L(h).isFinite().all());
}

TEST_CASE("collision frequency is positive with cubic-growth bounds") {
  for (auto dims : {std::pair{16, 12}, std::pair{24, 16}, std::pair{48, 32}}) {
    MomentumGrid g(reference_params(dims.first, dims.second));
    CollisionOperator op(g);
    REQUIRE((op.nu() > 0.0).all());
    const ArrayXr ratio = op.nu() / (1.0 + g.abs_p()).cube();
    CHECK(ratio.minCoeff() > 0.1);
    CHECK(ratio.maxCoeff() < 5.0);
  }
}

TEST_CASE("collision frequency regression at the probe node") {
  MomentumGrid g(reference_params(24, 16));
  CollisionOperator op(g);
  const int node = g.node_at(12, 7);
  REQUIRE(node >= 0);
  REQUIRE(g.a()(node) == doctest::Approx(0.125).epsilon(1e-12));
  REQUIRE(g.E()(node) == doctest::Approx(5.28125).epsilon(1e-12));
  CHECK(op.nu()(node) == doctest::Approx(47.980911).epsilon(1e-6));
}

TEST_CASE("kernel directions are annihilated to machine precision") {
  for (auto dims : {std::pair{24, 16}, std::pair{36, 24}}) {
    MomentumGrid g(reference_params(dims.first, dims.second));
    CollisionOperator op(g);
    CHECK(wnorm(op.apply_L(kernel_axial(g)), g) < 1e-12);
    CHECK(wnorm(op.apply_L(kernel_energy(g)), g) < 1e-12);
  }
}

TEST_CASE("deposit route conserves axial momentum and shifted energy") {
  MomentumGrid g(reference_params(24, 16));
  CollisionOperator op(g);
  std::mt19937_64 rng(17);
  const double w = g.cell_weight();
  for (int rep = 0; rep < 5; ++rep) {
    const ArrayXr h = random_field(g, rng);
    const ArrayXr Lh = op.apply_L(h);
    const double scale = (w * g.P() * Lh.abs()).sum();
    CHECK(std::abs((w * g.a() * g.P() * Lh).sum()) < 1e-12 * scale);
    CHECK(std::abs(
              (w * (g.E() + g.params().g * g.params().n0) * g.P() * Lh).sum()) <
          1e-12 * scale);
  }
}

TEST_CASE("dense operator is symmetric in the occupancy-weighted metric") {
  MomentumGrid g(reference_params(24, 16));
  CollisionOperator op(g);
  const Eigen::MatrixXd L = op.dense_L();
  const Eigen::VectorXd dw = (g.cell_weight() * g.mu()).matrix();
  const Eigen::MatrixXd WL = dw.asDiagonal() * L;
  CHECK((WL - WL.transpose()).norm() / WL.norm() < 1e-12);

  std::mt19937_64 rng(23);
  const ArrayXr h = random_field(g, rng);
  const Eigen::VectorXd dense = L * h.matrix();
  const ArrayXr direct = op.apply_L(h);
  CHECK((direct.matrix() - dense).norm() / dense.norm() < 1e-12);
}

TEST_CASE("quadratic form of L is nonpositive") {
  MomentumGrid g(reference_params(24, 16));
  CollisionOperator op(g);
  std::mt19937_64 rng(31);
  double worst = -1e300;
  for (int rep = 0; rep < 300; ++rep) {
    const ArrayXr h = random_field(g, rng);
    const double q =
        inner_product(ArrayXr(op.apply_L(h)), h, g) / inner_product(h, h, g);
    worst = std::max(worst, q);
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("L is linear and the complex path matches the real one") {
  MomentumGrid g(reference_params(24, 16));
  CollisionOperator op(g);
  std::mt19937_64 rng(41);
  const ArrayXr h1 = random_field(g, rng);
  const ArrayXr h2 = random_field(g, rng);
  const ArrayXr lhs = op.apply_L(ArrayXr(2.5 * h1 - 0.75 * h2));
  const ArrayXr rhs = 2.5 * op.apply_L(h1) - 0.75 * op.apply_L(h2);
  CHECK((lhs - rhs).abs().maxCoeff() < 1e-12 * rhs.abs().maxCoeff());

  ArrayXc z(g.size());
  z.real() = h1;
  z.imag() = h2;
  const ArrayXc Lz = op.apply_L(z);
  CHECK((ArrayXr(Lz.real()) - op.apply_L(h1)).abs().maxCoeff() == 0.0);
  CHECK((ArrayXr(Lz.imag()) - op.apply_L(h2)).abs().maxCoeff() == 0.0);
}

TEST_CASE("Q is bitwise symmetric, bilinear, and momentum-conserving") {
  MomentumGrid g(reference_params(24, 16));
  CollisionOperator op(g);
  std::mt19937_64 rng(43);
  const ArrayXr f1 = random_field(g, rng);
  const ArrayXr f2 = random_field(g, rng);

  CHECK((op.apply_Q(f1, f2) - op.apply_Q(f2, f1)).abs().maxCoeff() == 0.0);

  // halving one argument is exact in binary arithmetic
  const ArrayXr q_half = op.apply_Q(ArrayXr(0.5 * f1), f2);
  const ArrayXr q_full = op.apply_Q(f1, f2);
  CHECK((q_half - 0.5 * q_full).abs().maxCoeff() == 0.0);

  const ArrayXr q_sum = op.apply_Q(ArrayXr(f1 + f2), ArrayXr(f1 + f2));
  const ArrayXr expanded =
      op.apply_Q(f1, f1) + 2.0 * op.apply_Q(f1, f2) + op.apply_Q(f2, f2);
  CHECK((q_sum - expanded).abs().maxCoeff() < 1e-12 * expanded.abs().maxCoeff());

  const double w = g.cell_weight();
  const ArrayXr q = op.apply_Q(f1, f2);
  const double scale = (w * q.abs()).sum();
  CHECK(std::abs((w * g.a() * q).sum()) < 1e-12 * scale);
  CHECK(std::abs((w * (g.E() + g.params().g * g.params().n0) * q).sum()) <
        1e-12 * scale);
}

TEST_CASE("fused sweep reproduces the individual operators and their moments") {
  MomentumGrid g(reference_params(24, 16));
  CollisionOperator op(g);
  std::mt19937_64 rng(47);
  const ArrayXr s = random_field(g, rng);
  const RhsSlice r = op.fused_apply(s);

  CHECK((r.Ls - op.apply_L(s)).abs().maxCoeff() == 0.0);
  CHECK((r.Qss - op.apply_Q(s, s)).abs().maxCoeff() == 0.0);

  const double w = g.cell_weight();
  const double m_PLs = (w * g.P() * r.Ls).sum();
  const double m_Q = (w * r.Qss).sum();
  const double m_Ps = (w * g.P() * s).sum();
  CHECK(std::abs(r.m_PLs - m_PLs) < 1e-12 * std::max(1.0, std::abs(m_PLs)));
  CHECK(std::abs(r.m_Q - m_Q) < 1e-12 * std::max(1.0, std::abs(m_Q)));
  CHECK(std::abs(r.m_Ps - m_Ps) < 1e-12 * std::max(1.0, std::abs(m_Ps)));
}

TEST_CASE("nonlinear collision term matches its linearization identity") {
  ModelParams p = reference_params(24, 16);
  p.gamma = 0.3;
  MomentumGrid g(p);
  CollisionOperator op(g);
  std::mt19937_64 rng(53);
  std::normal_distribution<double> nd;
  ArrayXr R(g.size());
  for (int i = 0; i < g.size(); ++i) R(i) = 0.8 * std::tanh(nd(rng));
  const ArrayXr f = g.P() * (1.0 + p.gamma * R);
  REQUIRE((f > 0.0).all());
  const double n_c = 0.37;

  const ArrayXr lhs = op.collision_rhs(f, n_c);
  const ArrayXr rhs = p.g * p.gamma * p.gamma * n_c *
                      (g.P() * op.apply_L(R) + p.gamma * op.apply_Q(R, R));
  CHECK((lhs - rhs).abs().maxCoeff() < 1e-10 * rhs.abs().maxCoeff());
}

TEST_CASE("nonlinear collision term: equilibrium, prefactor, domain, invariants") {
  MomentumGrid g(reference_params(24, 16));
  CollisionOperator op(g);

  CHECK(op.collision_rhs(ArrayXr(g.P()), 1.0).abs().maxCoeff() < 1e-12);
  CHECK((op.collision_rhs(ArrayXr(2.0 * g.P()), 0.0) == 0.0).all());

  ArrayXr bad = g.P();
  bad(3) = 0.0;
  CHECK_THROWS_AS((void)op.collision_rhs(bad, 1.0), std::domain_error);

  const ArrayXr f = g.P() * (1.0 + 0.2 + 0.067 * g.a());
  const ArrayXr c = op.collision_rhs(f, 0.9);
  const double w = g.cell_weight();
  const double scale = (w * c.abs()).sum();
  CHECK(std::abs((w * g.a() * c).sum()) < 1e-12 * scale);
  CHECK(std::abs((w * (g.E() + g.params().g * g.params().n0) * c).sum()) <
        1e-12 * scale);
}

TEST_CASE("gather and deposit routes agree on smooth data and tighten on refinement") {
  auto smooth = [](const MomentumGrid& g, int i) {
    return (1.0 + g.P()(i)) * (g.a()(i) * g.a()(i) + 0.3 * g.a()(i)) *
           std::exp(-g.E()(i) / 4.0);
  };
  double rel[2];
  int k = 0;
  for (auto dims : {std::pair{24, 16}, std::pair{48, 32}}) {
    MomentumGrid g(reference_params(dims.first, dims.second));
    CollisionOperator op(g);
    ArrayXr h(g.size());
    for (int i = 0; i < g.size(); ++i) h(i) = smooth(g, i);
    const ArrayXr l_deposit = op.apply_L(h);
    const ArrayXr l_gather = op.apply_L_split(h);
    rel[k++] = wnorm(ArrayXr(l_deposit - l_gather), g) / wnorm(l_deposit, g);
  }
  // boundary-limited first-order gap between the two quadratures
  CHECK(rel[0] < 0.35);
  CHECK(rel[1] < 0.65 * rel[0]);
}

TEST_CASE("unit integrand through role 1 equals the clipped-region area") {
  ModelParams p = reference_params(24, 16);
  MomentumGrid g(p);
  CollisionOperator op(g);
  const int node = g.node_at(12, 7);
  const double a = g.a()(node), E = g.E()(node);
  const double shift = p.manifold_shift();

  const int sub = op.subdiv();
  const int na = p.n_axial * sub, nE = p.n_radial * sub;
  const double E_lo = 2.0 * p.Lambda_cut * p.Lambda_cut;
  const double da = 2.0 * p.p_max / na;
  const double dE = (p.p_max * p.p_max - E_lo) / nE;
  long cnt = 0;
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nE; ++j) {
      const double a2 = -p.p_max + (i + 0.5) * da;
      const double E2 = E_lo + (j + 0.5) * dE;
      if (!g.admissible(a2, E2)) continue;
      if (g.admissible(a - a2, E - E2 - shift)) ++cnt;
    }
  const double stencil_total = M_PI * M_PI * da * dE * cnt;

  // independent area quadrature in the (axial, squared-radial) plane
  const int nf = 2400;
  const double daf = 2.0 * p.p_max / nf, duf = p.p_max * p.p_max / nf;
  long cntf = 0;
  for (int i = 0; i < nf; ++i)
    for (int j = 0; j < nf; ++j) {
      const double a2 = -p.p_max + (i + 0.5) * daf;
      const double E2 = a2 * a2 + (j + 0.5) * duf;
      if (!g.admissible(a2, E2)) continue;
      if (g.admissible(a - a2, E - E2 - shift)) ++cntf;
    }
  const double direct = M_PI * M_PI * daf * duf * cntf;
  CHECK(std::abs(stencil_total - direct) / direct < 0.025);
}

TEST_CASE("mollified-delta oracle: frequency and gather column at a probe node") {
  ModelParams p = reference_params(24, 16);
  MomentumGrid g(p);
  CollisionOperator op(g);
  const int node = g.node_at(12, 7);
  const double a = g.a()(node), E = g.E()(node);

  oracle::MollifierOptions mo;
  mo.n_a = 240;
  mo.n_u = 240;

  mo.sigma = 1.6;
  const double d_coarse = std::abs(oracle::nu_value(g, a, E, mo) - op.nu()(node));
  mo.sigma = 0.8;
  const double nu_fine = oracle::nu_value(g, a, E, mo);
  const double d_fine = std::abs(nu_fine - op.nu()(node));
  CHECK(d_fine < d_coarse);
  CHECK(d_fine / nu_fine < 0.02);

  auto hfun = [&](double aa, double EE) {
    return (1.0 + g.planck(EE)) * (aa * aa + 0.3 * aa) * std::exp(-EE / 4.0);
  };
  ArrayXr h(g.size());
  for (int i = 0; i < g.size(); ++i) h(i) = hfun(g.a()(i), g.E()(i));
  const double Kh = op.apply_K(h)(node);
  mo.sigma = 0.1;
  const double Ko = oracle::K_value(g, hfun, a, E, mo);
  CHECK(std::abs(Kh - Ko) / std::abs(Ko) < 0.06);
}

TEST_CASE("table cache round-trips bitwise and rejects mismatches") {
  ModelParams p = reference_params(16, 12);
  MomentumGrid g(p);
  CollisionOperator op(g);
  const std::uint64_t key = tables_cache_key(p, op.subdiv());

  CHECK(tables_cache_key(p, op.subdiv() + 1) != key);
  ModelParams p2 = p;
  p2.gamma = 0.06;
  CHECK(tables_cache_key(p2, op.subdiv()) != key);

  const auto dir = std::filesystem::temp_directory_path() / "condkin_test_cache";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "tables.ckt").string();
  save_tables(path, op.tables(), key);

  const auto loaded = load_tables(path, key);
  REQUIRE(loaded.has_value());
  CHECK(loaded->omega == op.tables().omega);
  REQUIRE(loaded->nu.size() == op.nu().size());
  CHECK((loaded->nu == op.nu()).all());
  REQUIRE(loaded->pairs.size() == op.pairs().size());
  for (std::size_t i = 0; i < loaded->pairs.size(); ++i) {
    const PairEntry& x = loaded->pairs[i];
    const PairEntry& y = op.pairs()[i];
    REQUIRE(x.n2 == y.n2);
    REQUIRE(x.n3 == y.n3);
    for (int d = 0; d < 4; ++d) {
      REQUIRE(x.s[d] == y.s[d]);
      REQUIRE(x.c[d] == y.c[d]);
    }
    REQUIRE(x.F1 == y.F1);
    REQUIRE(x.P1 == y.P1);
  }

  // adopting constructor reproduces the operator
  CollisionOperator op2(g, *loaded, op.subdiv());
  std::mt19937_64 rng(61);
  const ArrayXr h = random_field(g, rng);
  CHECK((op2.apply_L(h) - op.apply_L(h)).abs().maxCoeff() == 0.0);

  CHECK_FALSE(load_tables(path, key + 1).has_value());
  CHECK_FALSE(load_tables((dir / "missing.ckt").string(), key).has_value());

  // truncated file
  const std::string trunc = (dir / "trunc.ckt").string();
  {
    std::ifstream in(path, std::ios::binary);
    std::vector<char> buf(1024);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    std::ofstream out(trunc, std::ios::binary);
    out.write(buf.data(), in.gcount() / 2);
  }
  CHECK_FALSE(load_tables(trunc, key).has_value());

  // wrong magic
  const std::string badmagic = (dir / "badmagic.ckt").string();
  {
    std::ofstream out(badmagic, std::ios::binary);
    out.write("NOPE", 4);
  }
  CHECK_FALSE(load_tables(badmagic, key).has_value());

  std::filesystem::remove_all(dir);
}
