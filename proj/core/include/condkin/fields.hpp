#pragma once

#include <Eigen/Core>
#include <complex>
#include <vector>

#include "condkin/grid.hpp"

namespace condkin {

using Complex = std::complex<double>;

// Stack of x-Fourier modes of a real-valued kinetic perturbation. Only
// k = 0..K is stored; mode(-k) = conj(mode(k)) by Hermitian symmetry, and
// mode 0 must stay real.
struct KineticField {
  int K = 0;
  std::vector<ArrayXc> modes;  // modes[k] has one value per grid node

  KineticField() = default;
  KineticField(int K_, Eigen::Index n_nodes)
      : K(K_), modes(static_cast<std::size_t>(K_) + 1, ArrayXc::Zero(n_nodes)) {}

  ArrayXc& mode(int k) { return modes[static_cast<std::size_t>(k)]; }
  const ArrayXc& mode(int k) const { return modes[static_cast<std::size_t>(k)]; }
  Eigen::Index nodes() const { return modes.empty() ? 0 : modes[0].size(); }
  void set_zero() {
    for (auto& m : modes) m.setZero();
  }
};

// Complex-valued x-Fourier series, coefficient of e^{inx} at coeff(n),
// n = -N..N. Used for the condensate perturbation and the order parameter.
struct WaveField {
  int N = 0;
  ArrayXc c;  // length 2N+1, index n+N

  WaveField() = default;
  explicit WaveField(int N_) : N(N_), c(ArrayXc::Zero(2 * N_ + 1)) {}

  Complex& coeff(int n) { return c(n + N); }
  Complex coeff(int n) const { return c(n + N); }
};

// Collocation transform on x_j = 2*pi*j/M, j = 0..M-1. Analysis is exact for
// any band B with 2B+1 <= M; products formed in collocation space are
// alias-free in the retained band when M is at least 3*band+1 per binary
// product (enforced by the caller's choice of M).
class SpectralX {
 public:
  explicit SpectralX(int n_points);

  int size() const { return M_; }
  double point(int j) const { return 2.0 * M_PI * j / M_; }
  Complex phase(int j, long k) const {  // e^{i k x_j}
    long m = (static_cast<long>(j) * k) % M_;
    if (m < 0) m += M_;
    return roots_[static_cast<std::size_t>(m)];
  }

  // Complex series, band B encoded as coeff length 2B+1 (index n+B).
  ArrayXc synth(const ArrayXc& coeff) const;
  ArrayXc analyze(const ArrayXc& values, int band) const;

  // Hermitian series stored as k = 0..B.
  ArrayXr synth_real(const ArrayXc& coeff) const;
  ArrayXc analyze_real(const ArrayXr& values, int band) const;

  // Band-limiting projection of collocation values (dealiasing step).
  ArrayXc truncate(const ArrayXc& values, int band) const;
  ArrayXr truncate(const ArrayXr& values, int band) const;

  ArrayXc to_collocation(const WaveField& phi) const { return synth(phi.c); }
  WaveField to_wave(const ArrayXc& values, int N) const;

  // Kinetic stack <-> real slices; column j of the matrix is the field at x_j.
  Eigen::MatrixXd to_collocation(const KineticField& f) const;
  KineticField to_kinetic(const Eigen::MatrixXd& values, int K) const;

 private:
  int M_ = 0;
  std::vector<Complex> roots_;  // e^{2*pi*i*m/M}
};

}  // namespace condkin
