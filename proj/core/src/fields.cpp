#include "condkin/fields.hpp"

#include <cmath>
#include <stdexcept>

namespace condkin {

SpectralX::SpectralX(int n_points) : M_(n_points) {
  if (M_ < 1) throw std::invalid_argument("spectral: need at least one collocation point");
  roots_.resize(static_cast<std::size_t>(M_));
  for (int m = 0; m < M_; ++m) {
    const double x = 2.0 * M_PI * m / M_;
    roots_[static_cast<std::size_t>(m)] = Complex(std::cos(x), std::sin(x));
  }
}

ArrayXc SpectralX::synth(const ArrayXc& coeff) const {
  const int B = static_cast<int>(coeff.size() - 1) / 2;
  ArrayXc out = ArrayXc::Zero(M_);
  for (int j = 0; j < M_; ++j) {
    Complex acc(0.0, 0.0);
    for (int n = -B; n <= B; ++n) acc += coeff(n + B) * phase(j, n);
    out(j) = acc;
  }
  return out;
}

ArrayXc SpectralX::analyze(const ArrayXc& values, int band) const {
  if (2 * band + 1 > M_)
    throw std::invalid_argument("spectral: band exceeds collocation resolution");
  ArrayXc coeff = ArrayXc::Zero(2 * band + 1);
  for (int n = -band; n <= band; ++n) {
    Complex acc(0.0, 0.0);
    for (int j = 0; j < M_; ++j) acc += values(j) * phase(j, -n);
    coeff(n + band) = acc / static_cast<double>(M_);
  }
  return coeff;
}

ArrayXr SpectralX::synth_real(const ArrayXc& coeff) const {
  const int B = static_cast<int>(coeff.size()) - 1;
  ArrayXr out = ArrayXr::Zero(M_);
  for (int j = 0; j < M_; ++j) {
    double acc = coeff(0).real();
    for (int k = 1; k <= B; ++k) {
      const Complex ph = phase(j, k);
      acc += 2.0 * (coeff(k).real() * ph.real() - coeff(k).imag() * ph.imag());
    }
    out(j) = acc;
  }
  return out;
}

ArrayXc SpectralX::analyze_real(const ArrayXr& values, int band) const {
  if (2 * band + 1 > M_)
    throw std::invalid_argument("spectral: band exceeds collocation resolution");
  ArrayXc coeff = ArrayXc::Zero(band + 1);
  for (int k = 0; k <= band; ++k) {
    Complex acc(0.0, 0.0);
    for (int j = 0; j < M_; ++j) acc += values(j) * phase(j, -k);
    coeff(k) = acc / static_cast<double>(M_);
  }
  return coeff;
}

ArrayXc SpectralX::truncate(const ArrayXc& values, int band) const {
  return synth(analyze(values, band));
}

ArrayXr SpectralX::truncate(const ArrayXr& values, int band) const {
  return synth_real(analyze_real(values, band));
}

WaveField SpectralX::to_wave(const ArrayXc& values, int N) const {
  WaveField phi(N);
  phi.c = analyze(values, N);
  return phi;
}

Eigen::MatrixXd SpectralX::to_collocation(const KineticField& f) const {
  const Eigen::Index n = f.nodes();
  Eigen::MatrixXd vals(n, M_);
  for (int j = 0; j < M_; ++j) {
    ArrayXr col = f.mode(0).real();
    for (int k = 1; k <= f.K; ++k) {
      const Complex ph = phase(j, k);
      col += 2.0 * (f.mode(k).real() * ph.real() - f.mode(k).imag() * ph.imag());
    }
    vals.col(j) = col.matrix();
  }
  return vals;
}

KineticField SpectralX::to_kinetic(const Eigen::MatrixXd& values, int K) const {
  if (2 * K + 1 > M_)
    throw std::invalid_argument("spectral: band exceeds collocation resolution");
  KineticField f(K, values.rows());
  for (int k = 0; k <= K; ++k) {
    Eigen::VectorXd ph_re(M_), ph_im(M_);
    for (int j = 0; j < M_; ++j) {
      const Complex ph = phase(j, -k);
      ph_re(j) = ph.real() / M_;
      ph_im(j) = ph.imag() / M_;
    }
    const Eigen::VectorXd re = values * ph_re;
    const Eigen::VectorXd im = values * ph_im;  // identically 0 for k = 0
    for (Eigen::Index i = 0; i < values.rows(); ++i)
      f.mode(k)(i) = Complex(re(i), im(i));
  }
  return f;
}

}  // namespace condkin
