#include "spinbath/quadrupole.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "spinbath/parallel.hpp"

namespace spinbath {

namespace {

using cd = std::complex<double>;

CMatrix matrix_power(const CMatrix& m, int p) {
  CMatrix result = CMatrix::Identity(m.rows(), m.cols());
  CMatrix base = m;
  while (p > 0) {
    if (p & 1) result = result * base;
    p >>= 1;
    if (p) base = base * base;
  }
  return result;
}

const SpinOperators& ge73_ops() {
  static const SpinOperators ops = spin_matrices(default_ge73().spin);
  return ops;
}

}  // namespace

SpinOperators spin_matrices(double spin) {
  const double twice = 2.0 * spin;
  if (!(spin >= 0.5) || std::abs(twice - std::round(twice)) > 1e-12 || twice > 1000)
    throw InvalidArgument("spin must be a positive half-integer, got " + std::to_string(spin));
  SpinOperators ops;
  ops.two_i = static_cast<int>(std::lround(twice));
  const int d = ops.two_i + 1;
  ops.dimension = d;
  const double ii1 = spin * (spin + 1.0);
  CMatrix raise = CMatrix::Zero(d, d);
  ops.iz = CMatrix::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    const double m = spin - k;
    ops.iz(k, k) = m;
    if (k > 0) raise(k - 1, k) = std::sqrt(ii1 - m * (m + 1.0));
  }
  const CMatrix lower = raise.adjoint();
  ops.ix = 0.5 * (raise + lower);
  ops.iy = cd(0.0, -0.5) * (raise - lower);
  ops.identity = CMatrix::Identity(d, d);
  return ops;
}

RMatrix quadrupole_h(double xi, double theta, const SpinOperators& ops) {
  const double spin = ops.spin();
  const double c = std::cos(theta), s = std::sin(theta);
  const CMatrix h = (3.0 * c * c - 1.0) / 2.0 * (3.0 * ops.iz * ops.iz - spin * (spin + 1.0) * ops.identity) +
                    3.0 * s * c * (ops.iz * ops.ix + ops.ix * ops.iz) +
                    1.5 * s * s * (ops.ix * ops.ix - ops.iy * ops.iy);
  return xi * h.real();
}

RMatrix branch_h(double a, int s, double xi, double theta, double b_tesla, Branch branch, const SpinOperators& ops,
                 double gamma) {
  const double sign = branch == Branch::Plus ? 1.0 : -1.0;
  const double zeeman = gamma * b_tesla + sign * s * a / 2.0;
  return zeeman * ops.iz.real() + quadrupole_h(xi, theta, ops);
}

CMatrix propagator(const CMatrix& h, double tau) {
  const double scale = std::max(1.0, h.norm());
  if (h.rows() != h.cols() || (h - h.adjoint()).norm() > 1e-12 * scale)
    throw InvalidArgument("propagator requires a Hermitian Hamiltonian");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Eigen::VectorXcd phases = (cd(0.0, -tau) * es.eigenvalues().cast<cd>()).array().exp();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

CMatrix propagator(const RMatrix& h, double tau) {
  const double scale = std::max(1.0, h.norm());
  if (h.rows() != h.cols() || (h - h.transpose()).norm() > 1e-12 * scale)
    throw InvalidArgument("propagator requires a Hermitian Hamiltonian");
  return SymmetricEvolution(h).at(tau);
}

SymmetricEvolution::SymmetricEvolution(const RMatrix& h) {
  Eigen::SelfAdjointEigenSolver<RMatrix> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  v_ = es.eigenvectors();
  lambda_ = es.eigenvalues();
}

CMatrix SymmetricEvolution::at(double tau) const {
  const Eigen::Index d = lambda_.size();
  CMatrix vp(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double ph = -lambda_(k) * tau;
    vp.col(k) = v_.col(k).cast<cd>() * cd(std::cos(ph), std::sin(ph));
  }
  return vp * v_.transpose().cast<cd>();
}

std::complex<double> echo_trace(const CMatrix& up, const CMatrix& um, int n) {
  if (n == 1) return (um * up * um.adjoint() * up.adjoint()).trace();
  if (n < 1 || n % 2 != 0) throw InvalidArgument("unsupported sequence: n = " + std::to_string(n));
  const CMatrix w = up * um;
  const CMatrix p1 = matrix_power(w * um * up, n / 2);
  const CMatrix p2 = matrix_power(um * up * w, n / 2);
  return (p1.array() * p2.array().conjugate()).sum();
}

NucleusEcho::NucleusEcho(const NuclearSite& site, double b_tesla, const SpinOperators& ops)
    : plus_(branch_h(site.coupling, site.dot_sign < 0 ? -1 : 1, site.xi, site.theta, b_tesla, Branch::Plus, ops)),
      minus_(branch_h(site.coupling, site.dot_sign < 0 ? -1 : 1, site.xi, site.theta, b_tesla, Branch::Minus, ops)),
      d_(ops.dimension) {}

NucleusEcho::NucleusEcho(const NuclearSite& site, double b_tesla) : NucleusEcho(site, b_tesla, ge73_ops()) {}

EchoFactor NucleusEcho::factor(double tau, int n) const {
  if (n < 1 || (n > 1 && n % 2 != 0)) throw InvalidArgument("unsupported sequence: n = " + std::to_string(n));
  const cd tr = echo_trace(plus_.at(tau), minus_.at(tau), n);
  EchoFactor f;
  f.trace = tr / static_cast<double>(d_);
  f.value = f.trace.real();
  f.imag_residual = std::abs(f.trace.imag());
  if (n == 1 && !(f.imag_residual < imag_residual_limit))
    throw NumericalError("echo trace not real: |Im|/d = " + std::to_string(f.imag_residual));
  return f;
}

double echo_decay_factor(const NuclearSite& nucleus, double tau, int n, double b_tesla) {
  if (nucleus.species != Species::Ge73) throw InvalidArgument("echo_decay_factor requires a 73Ge nucleus");
  return NucleusEcho(nucleus, b_tesla).factor(tau, n).value;
}

std::vector<ChiResult> chi_curve(std::span<const NuclearSite> nuclei, std::span<const double> taus, int n,
                                 double b_tesla, int workers) {
  if (n < 1 || (n > 1 && n % 2 != 0)) throw InvalidArgument("unsupported sequence: n = " + std::to_string(n));
  for (const auto& s : nuclei)
    if (s.species != Species::Ge73) throw InvalidArgument("chi requires 73Ge nuclei");
  const std::size_t nt = taus.size();
  std::vector<EchoFactor> table(nuclei.size() * nt);
  parallel_for(nuclei.size(), workers, [&](std::size_t k) {
    const NucleusEcho echo(nuclei[k], b_tesla);
    for (std::size_t t = 0; t < nt; ++t) table[k * nt + t] = echo.factor(taus[t], n);
  });
  std::vector<ChiResult> out(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    ChiResult& r = out[t];
    for (std::size_t k = 0; k < nuclei.size(); ++k) {
      const EchoFactor& f = table[k * nt + t];
      r.product *= f.trace;
      r.max_imag_residual = std::max(r.max_imag_residual, f.imag_residual);
    }
    r.chi = r.product.real() > 0.0 ? -std::log(r.product.real()) : std::numeric_limits<double>::infinity();
    // -log(1 - tiny) can round to -0
    if (r.chi == 0.0) r.chi = 0.0;
  }
  return out;
}

std::vector<ChiResult> chi_curve(const DeviceRealization& device, std::span<const double> taus, int n,
                                 double b_tesla, int workers) {
  const auto nuclei = device.all_nuclei();
  return chi_curve(std::span<const NuclearSite>(nuclei), taus, n, b_tesla, workers);
}

ChiResult chi_total(std::span<const NuclearSite> nuclei, double tau, int n, double b_tesla, int workers) {
  const double taus[1] = {tau};
  return chi_curve(nuclei, std::span<const double>(taus, 1), n, b_tesla, workers).front();
}

ChiResult chi_total(const DeviceRealization& device, double tau, int n, double b_tesla, int workers) {
  const auto nuclei = device.all_nuclei();
  return chi_total(std::span<const NuclearSite>(nuclei), tau, n, b_tesla, workers);
}

}  // namespace spinbath
