#pragma once

// Filter functions for instantaneous-swap sequences, Gaussian-noise decay
// prediction, and the low-field FID lineshape with its fitter.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spinbath/core.hpp"

namespace spinbath {

enum class SequenceKind { FID, HE, CPn };

std::string to_string(SequenceKind kind);

class PulseSequence {
 public:
  static PulseSequence fid();
  static PulseSequence hahn();
  static PulseSequence cp(int n);
  // n = 0: FID, n = 1: HE, even n: CPn.
  static PulseSequence from_pulse_count(int n);

  SequenceKind kind() const { return kind_; }
  int pulses() const { return n_; }
  int segments() const { return static_cast<int>(swapped_.size()); }
  double total_time(double tau) const { return segments() * tau; }

  // h(s) on segment p (0-based); h(j, k) = 1 when electron j sits in dot k.
  Eigen::Matrix2i switching(int p) const;
  // +1 when the electrons are in their home dots, -1 when swapped.
  std::vector<int> signs() const;

 private:
  SequenceKind kind_ = SequenceKind::FID;
  int n_ = 0;
  std::vector<bool> swapped_;
};

Eigen::MatrixXi c_matrix(const PulseSequence& seq);

// Central-lobe filter via the C_pq sum, s^2. Finite for every f >= 0.
double f0(const PulseSequence& seq, double f, double tau);
// Closed trigonometric forms; not defined at their removable singularities.
double f0_closed_form(const PulseSequence& seq, double f, double tau);
// F0(f) + F0(f + f0) + F0(|f - f0|), f0 the electron Larmor frequency.
double full_filter(const PulseSequence& seq, double f, double tau, double b0_tesla);

double electron_larmor_hz(double b_tesla);

// One-sided spectral density per dot and component, T^2/Hz.
class NoiseModel {
 public:
  static NoiseModel zero();
  // amplitude / f^alpha for f >= f_min, 0 below.
  static NoiseModel power_law(double amplitude, double alpha, double f_min = 0.0);
  // Log-log interpolation of strictly positive samples; 0 outside the table.
  static NoiseModel tabulated(std::vector<double> f, std::vector<double> s);
  static NoiseModel from_csv(const std::string& path);

  double operator()(double f) const;
  // Exponent of the divergence at f -> 0+ (0 when bounded).
  double low_frequency_exponent() const;
  // Upper end of the support (inf for power laws).
  double f_upper() const;
  const std::vector<double>& table_f() const { return tf_; }

 private:
  enum class Kind { Zero, PowerLaw, Table } kind_ = Kind::Zero;
  double amplitude_ = 0.0, alpha_ = 0.0, f_min_ = 0.0;
  std::vector<double> tf_, ts_;
};

struct QuadratureOptions {
  double f_max_factor = 100.0;  // f_max = factor / (4 tau)
  double rel_tol = 1e-6;
  bool sidelobes = true;
};

// sigma^2_12 / 2 for two identical, independent dots.
double second_moment(const NoiseModel& noise, const PulseSequence& seq, double tau, double b0_tesla,
                     const QuadratureOptions& opts = {});

// Integral of S(f) F0(|f - shift|) over [0, f_max] (exposed for tests).
double filter_integral(const NoiseModel& noise, const PulseSequence& seq, double tau, double shift, double f_max,
                       double rel_tol);

struct StaticGradient {
  double delta_omega = 0.0;  // rad/s
  void validate() const;
};

double predict_ps(const NoiseModel& noise, const PulseSequence& seq, double tau, double b0_tesla,
                  const StaticGradient& grad, const QuadratureOptions& opts = {});

// Singlet probability of a low-field FID with Larmor sidelobes.
double fid_lowfield(double t, double t2star, double omega0);
// Electron Larmor angular frequency <-> field, g = 2.
double omega0_from_field(double b_tesla);
double field_from_omega0(double omega0);

struct FidFitResult {
  double t2star = 0.0;
  double omega0 = 0.0;
  double b0_tesla = 0.0;
  double amplitude = 0.0;
  double offset = 0.0;
  double rss = 0.0;
  double rss_gaussian = 0.0;  // best fit without oscillation
  bool b0_identifiable = true;
};

FidFitResult fid_fit(std::span<const double> t, std::span<const double> p);

}  // namespace spinbath
