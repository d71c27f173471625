#pragma once

// Exact single-nucleus evolution under the two electron branches and the
// resulting echo decay factors.

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spinbath/device.hpp"

namespace spinbath {

using CMatrix = Eigen::MatrixXcd;
using RMatrix = Eigen::MatrixXd;

struct SpinOperators {
  int two_i = 0;  // 2I
  int dimension = 0;
  CMatrix ix, iy, iz, identity;

  double spin() const { return 0.5 * two_i; }
};

// Standard |I, m> basis ordered m = I, I-1, ..., -I.
SpinOperators spin_matrices(double spin);

// Real symmetric, traceless, rad/s.
RMatrix quadrupole_h(double xi, double theta, const SpinOperators& ops);

enum class Branch { Plus = +1, Minus = -1 };

// H(+/-) = gamma B Iz + H_Q +/- (s A / 2) Iz.
RMatrix branch_h(double a, int s, double xi, double theta, double b_tesla, Branch branch, const SpinOperators& ops,
                 double gamma = constants::gamma_ge73);

// exp(-i H tau) for Hermitian H. Throws InvalidArgument otherwise.
CMatrix propagator(const CMatrix& h, double tau);
CMatrix propagator(const RMatrix& h, double tau);

// Cached eigendecomposition of a real symmetric Hamiltonian.
class SymmetricEvolution {
 public:
  explicit SymmetricEvolution(const RMatrix& h);
  CMatrix at(double tau) const;
  const Eigen::VectorXd& eigenvalues() const { return lambda_; }

 private:
  RMatrix v_;
  Eigen::VectorXd lambda_;
};

struct EchoFactor {
  std::complex<double> trace = 1.0;  // Tr / d
  double value = 1.0;                // Re(Tr) / d
  double imag_residual = 0.0;        // |Im Tr| / d
};

// Threshold for the real-trace check. The Hahn-echo trace is real by
// symmetry (U+ and U- are complex symmetric); the CPn trace generally is not.
inline constexpr double imag_residual_limit = 1e-9;

// Both branch propagators for one nucleus at one field, reusable across tau.
class NucleusEcho {
 public:
  NucleusEcho(const NuclearSite& site, double b_tesla, const SpinOperators& ops);
  NucleusEcho(const NuclearSite& site, double b_tesla);

  // n = 1: Hahn echo; even n: CPn. Throws "unsupported sequence" otherwise, and
  // NumericalError when a Hahn-echo trace is not real to imag_residual_limit.
  EchoFactor factor(double tau, int n) const;

 private:
  SymmetricEvolution plus_, minus_;
  int d_;
};

// Trace value for given branch propagators (no residual check).
std::complex<double> echo_trace(const CMatrix& u_plus, const CMatrix& u_minus, int n);

double echo_decay_factor(const NuclearSite& nucleus, double tau, int n, double b_tesla);

struct ChiResult {
  double chi = 0.0;                      // +inf when Re(product) <= 0
  std::complex<double> product = 1.0;    // over nuclei of the complex Tr / d
  double max_imag_residual = 0.0;        // largest per-nucleus |Im Tr| / d
};

// Over every selected nucleus of both dots.
ChiResult chi_total(const DeviceRealization& device, double tau, int n, double b_tesla, int workers = 1);
ChiResult chi_total(std::span<const NuclearSite> nuclei, double tau, int n, double b_tesla, int workers = 1);

// One entry per tau, eigendecompositions shared across the grid. The product
// is reduced in nucleus order so the result does not depend on workers.
std::vector<ChiResult> chi_curve(std::span<const NuclearSite> nuclei, std::span<const double> taus, int n,
                                 double b_tesla, int workers = 1);
std::vector<ChiResult> chi_curve(const DeviceRealization& device, std::span<const double> taus, int n,
                                 double b_tesla, int workers = 1);

}  // namespace spinbath
