#include "spinbath/filter_function.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

namespace spinbath {

using constants::pi;

std::string to_string(SequenceKind kind) {
  switch (kind) {
    case SequenceKind::FID: return "FID";
    case SequenceKind::HE: return "HE";
    case SequenceKind::CPn: return "CPn";
  }
  return "?";
}

PulseSequence PulseSequence::fid() {
  PulseSequence s;
  s.kind_ = SequenceKind::FID;
  s.n_ = 0;
  s.swapped_ = {false};
  return s;
}

PulseSequence PulseSequence::hahn() {
  PulseSequence s;
  s.kind_ = SequenceKind::HE;
  s.n_ = 1;
  s.swapped_ = {false, true};
  return s;
}

PulseSequence PulseSequence::cp(int n) {
  if (n < 2 || n % 2 != 0) throw InvalidArgument("CPn needs an even pulse count n >= 2, got " + std::to_string(n));
  PulseSequence s;
  s.kind_ = SequenceKind::CPn;
  s.n_ = n;
  // tau, 2tau, ..., 2tau, tau: swaps fall after segments 1, 3, 5, ...
  s.swapped_.resize(2 * static_cast<std::size_t>(n));
  for (int p = 0; p < 2 * n; ++p) s.swapped_[p] = ((p + 1) / 2) % 2 == 1;
  return s;
}

PulseSequence PulseSequence::from_pulse_count(int n) {
  if (n == 0) return fid();
  if (n == 1) return hahn();
  return cp(n);
}

Eigen::Matrix2i PulseSequence::switching(int p) const {
  if (p < 0 || p >= segments()) throw InvalidArgument("segment index out of range");
  Eigen::Matrix2i h;
  if (swapped_[p])
    h << 0, 1, 1, 0;
  else
    h << 1, 0, 0, 1;
  return h;
}

std::vector<int> PulseSequence::signs() const {
  std::vector<int> e;
  for (bool s : swapped_) e.push_back(s ? -1 : 1);
  return e;
}

Eigen::MatrixXi c_matrix(const PulseSequence& seq) {
  const int n = seq.segments();
  Eigen::MatrixXi c = Eigen::MatrixXi::Zero(n, n);
  for (int p = 0; p < n; ++p) {
    const auto hp = seq.switching(p);
    for (int q = 0; q < n; ++q) {
      const auto hq = seq.switching(q);
      int acc = 0;
      for (int k = 0; k < 2; ++k)
        acc += hp(0, k) * hq(0, k) - hp(0, k) * hq(1, k) - hp(1, k) * hq(0, k) + hp(1, k) * hq(1, k);
      c(p, q) = acc / 2;
    }
  }
  return c;
}

namespace {

// tau^2 sinc^2(pi f tau) = sin^2(pi f tau) / (pi f)^2
double segment_weight(double f, double tau) {
  const double x = pi * f * tau;
  if (std::abs(x) < 1e-8) return tau * tau * (1.0 - x * x / 3.0);
  const double s = std::sin(x) / (pi * f);
  return s * s;
}

}  // namespace

double f0(const PulseSequence& seq, double f, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  if (!(f >= 0.0)) throw InvalidArgument("frequency must be non-negative");
  // C_pq = 1/2 sum_k v_kp v_kq with v_kp = h_1k(p) - h_2k(p), so the double
  // sum collapses to 1/2 sum_k |sum_p v_kp exp(2 pi i f p tau)|^2.
  const int n = seq.segments();
  const double phi = 2.0 * pi * f * tau;
  double total = 0.0;
  for (int k = 0; k < 2; ++k) {
    std::complex<double> acc = 0.0;
    for (int p = 0; p < n; ++p) {
      const auto h = seq.switching(p);
      const int v = h(0, k) - h(1, k);
      if (v != 0) acc += static_cast<double>(v) * std::polar(1.0, phi * p);
    }
    total += std::norm(acc);
  }
  return 0.5 * total * segment_weight(f, tau);
}

double f0_closed_form(const PulseSequence& seq, double f, double tau) {
  const double t = seq.total_time(tau);
  if (f == 0.0) return seq.kind() == SequenceKind::FID ? t * t : 0.0;
  const double pf2 = (pi * f) * (pi * f);
  switch (seq.kind()) {
    case SequenceKind::FID: {
      const double s = std::sin(pi * f * t);
      return s * s / pf2;
    }
    case SequenceKind::HE: {
      const double s = std::sin(2.0 * pi * f * tau), tn = std::tan(pi * f * tau);
      return s * s * tn * tn / pf2;
    }
    case SequenceKind::CPn: {
      const double c = std::cos(2.0 * pi * f * tau);
      const double s1 = std::sin(pi * f * tau);
      const double sn = std::sin(2.0 * seq.pulses() * pi * f * tau);
      return 4.0 * s1 * s1 * s1 * s1 * sn * sn / (c * c * pf2);
    }
  }
  return 0.0;
}

double electron_larmor_hz(double b_tesla) {
  return constants::g_electron * constants::mu_b * b_tesla / (constants::two_pi * constants::hbar);
}

double full_filter(const PulseSequence& seq, double f, double tau, double b0_tesla) {
  const double fl = electron_larmor_hz(b0_tesla);
  return f0(seq, f, tau) + f0(seq, f + fl, tau) + f0(seq, std::abs(f - fl), tau);
}

NoiseModel NoiseModel::zero() { return NoiseModel{}; }

NoiseModel NoiseModel::power_law(double amplitude, double alpha, double f_min) {
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) throw InvalidArgument("noise amplitude must be >= 0");
  if (!std::isfinite(alpha)) throw InvalidArgument("noise exponent must be finite");
  if (!(f_min >= 0.0)) throw InvalidArgument("noise f_min must be >= 0");
  NoiseModel m;
  m.kind_ = Kind::PowerLaw;
  m.amplitude_ = amplitude;
  m.alpha_ = alpha;
  m.f_min_ = f_min;
  return m;
}

NoiseModel NoiseModel::tabulated(std::vector<double> f, std::vector<double> s) {
  if (f.size() != s.size() || f.size() < 2) throw InvalidArgument("noise table needs at least two (f, S) rows");
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!(f[i] > 0.0) || !(s[i] > 0.0) || !std::isfinite(f[i]) || !std::isfinite(s[i]))
      throw InvalidArgument("noise table entries must be positive and finite (log-log interpolation)");
    if (i > 0 && !(f[i] > f[i - 1])) throw InvalidArgument("noise table frequencies must increase strictly");
  }
  NoiseModel m;
  m.kind_ = Kind::Table;
  m.tf_ = std::move(f);
  m.ts_ = std::move(s);
  return m;
}

NoiseModel NoiseModel::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open noise table " + path);
  std::vector<double> f, s;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double a, b;
    if (!(row >> a >> b)) {
      if (f.empty()) continue;  // header
      throw InvalidArgument("bad row in noise table " + path + ": " + line);
    }
    f.push_back(a);
    s.push_back(b);
  }
  return tabulated(std::move(f), std::move(s));
}

double NoiseModel::operator()(double f) const {
  switch (kind_) {
    case Kind::Zero: return 0.0;
    case Kind::PowerLaw:
      if (f < f_min_) return 0.0;
      return alpha_ == 0.0 ? amplitude_ : amplitude_ * std::pow(f, -alpha_);
    case Kind::Table: {
      if (f < tf_.front() || f > tf_.back()) return 0.0;
      auto it = std::upper_bound(tf_.begin(), tf_.end(), f);
      if (it == tf_.end()) return ts_.back();
      const std::size_t i = static_cast<std::size_t>(it - tf_.begin()) - 1;
      const double w = std::log(f / tf_[i]) / std::log(tf_[i + 1] / tf_[i]);
      return std::exp((1.0 - w) * std::log(ts_[i]) + w * std::log(ts_[i + 1]));
    }
  }
  return 0.0;
}

double NoiseModel::low_frequency_exponent() const {
  return kind_ == Kind::PowerLaw && f_min_ == 0.0 && amplitude_ > 0.0 ? std::max(alpha_, 0.0) : 0.0;
}

double NoiseModel::f_upper() const {
  switch (kind_) {
    case Kind::Zero: return 0.0;
    case Kind::PowerLaw: return amplitude_ > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    case Kind::Table: return tf_.back();
  }
  return 0.0;
}

double filter_integral(const NoiseModel& noise, const PulseSequence& seq, double tau, double shift, double f_max,
                       double rel_tol) {
  if (!(tau > 0.0) || !(f_max > 0.0)) throw InvalidArgument("tau and f_max must be positive");
  const double upper = std::min(f_max, noise.f_upper());
  if (!(upper > 0.0)) return 0.0;

  const double alpha = noise.low_frequency_exponent();
  if (alpha > 0.0) {
    // Filter behaves as f^0 near 0 when nonzero there, else as f^2.
    const double t = seq.total_time(tau);
    const double order = f0(seq, std::abs(shift), tau) > 1e-12 * t * t ? 0.0 : 2.0;
    if (alpha >= 1.0 + order) {
      std::ostringstream msg;
      msg << "non-integrable noise model: S ~ f^-" << alpha << " at f -> 0 against a " << to_string(seq.kind())
          << " filter ~ f^" << order << " (lobe shift " << shift << " Hz); add a low-frequency cutoff f_min";
      throw InvalidArgument(msg.str());
    }
  }

  // Breakpoints: every half lobe spacing relative to the shifted lobe centre,
  // plus any kinks of the noise model.
  const double h = 1.0 / (2.0 * seq.segments() * tau);
  std::vector<double> pts{0.0, upper};
  const double k_lo = std::ceil((0.0 - shift) / h), k_hi = std::floor((upper - shift) / h);
  if (k_hi - k_lo > 5e6) throw InvalidArgument("quadrature grid too fine: reduce f_max");
  for (double k = k_lo; k <= k_hi; k += 1.0) {
    const double x = shift + k * h;
    if (x > 0.0 && x < upper) pts.push_back(x);
  }
  for (double x : noise.table_f())
    if (x > 0.0 && x < upper) pts.push_back(x);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end(), [h](double a, double b) { return b - a < 1e-9 * h; }), pts.end());

  auto integrand = [&](double f) { return noise(f) * f0(seq, std::abs(f - shift), tau); };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a = pts[i], b = pts[i + 1];
    double piece;
    if (a == 0.0 && alpha > 0.0) {
      boost::math::quadrature::tanh_sinh<double> ts;
      piece = ts.integrate(integrand, a, b, rel_tol * 1e-2);
    } else {
      piece = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, a, b, 12, rel_tol * 1e-2);
    }
    if (!std::isfinite(piece)) throw NumericalError("filter quadrature produced a non-finite value");
    total += piece;
  }
  return total;
}

double second_moment(const NoiseModel& noise, const PulseSequence& seq, double tau, double b0_tesla,
                     const QuadratureOptions& opts) {
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  if (!(opts.f_max_factor > 0.0) || !(opts.rel_tol > 0.0)) throw InvalidArgument("bad quadrature options");
  const double f_max = opts.f_max_factor / (4.0 * tau);
  double integral = filter_integral(noise, seq, tau, 0.0, f_max, opts.rel_tol);
  if (opts.sidelobes) {
    const double fl = electron_larmor_hz(b0_tesla);
    if (fl == 0.0) {
      integral *= 3.0;
    } else {
      integral += filter_integral(noise, seq, tau, fl, f_max, opts.rel_tol);
      integral += filter_integral(noise, seq, tau, -fl, f_max, opts.rel_tol);
    }
  }
  const double k = constants::g_electron * constants::mu_b / constants::hbar;
  // (g mu_B)^2 / (2 hbar^2) per dot, two identical dots.
  return k * k * integral;
}

void StaticGradient::validate() const {
  if (!(delta_omega >= 0.0) || !std::isfinite(delta_omega)) throw InvalidArgument("gradient must be >= 0");
}

double predict_ps(const NoiseModel& noise, const PulseSequence& seq, double tau, double b0_tesla,
                  const StaticGradient& grad, const QuadratureOptions& opts) {
  grad.validate();
  const double chi = second_moment(noise, seq, tau, b0_tesla, opts);
  const double t = seq.total_time(tau);
  const double p = 0.5 + 0.5 * std::cos(grad.delta_omega * t) * std::exp(-chi);
  return std::clamp(p, 0.0, 1.0);
}

namespace {

// (t/T)^2 (1 + 2 sinc^2(w t / 2)) == [t^2 w^2 + 4(1 - cos w t)] / (T^2 w^2)
double lowfield_exponent(double t, double t2, double omega0) {
  const double x = 0.5 * omega0 * t;
  const double sinc = std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
  const double r = t / t2;
  return r * r * (1.0 + 2.0 * sinc * sinc);
}

}  // namespace

double fid_lowfield(double t, double t2star, double omega0) {
  if (!(omega0 > 0.0)) throw InvalidArgument("fid_lowfield needs omega0 > 0; use the Gaussian limit at high field");
  if (!(t2star > 0.0)) throw InvalidArgument("T2* must be positive");
  return 0.5 + 0.5 * std::exp(-lowfield_exponent(t, t2star, omega0));
}

double omega0_from_field(double b_tesla) { return constants::g_electron * constants::mu_b * b_tesla / constants::hbar; }
double field_from_omega0(double omega0) { return omega0 * constants::hbar / (constants::g_electron * constants::mu_b); }

namespace {

// Residuals in scaled units: T in us, omega0 in rad/us.
struct FidResiduals {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  std::span<const double> t, p;
  int mode = 0;  // 0: (T, w, a, c); 1: (T, a, c) with w fixed; 2: Gaussian (T, a, c)
  double fixed_w = 0.0;

  int inputs() const { return mode == 0 ? 4 : 3; }
  int values() const { return static_cast<int>(t.size()); }

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r) const {
    const double tt = x(0);
    const double w = mode == 0 ? x(1) : fixed_w;
    const double a = x(mode == 0 ? 2 : 1), c = x(mode == 0 ? 3 : 2);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double tu = t[i] * 1e6;
      const double e = mode == 2 ? (tu / tt) * (tu / tt) : lowfield_exponent(tu, tt, w);
      r(static_cast<Eigen::Index>(i)) = c + a * std::exp(-e) - p[i];
    }
    return 0;
  }
};

struct FitOutcome {
  Eigen::VectorXd x;
  double rss = std::numeric_limits<double>::infinity();
  bool ok = false;
};

FitOutcome run_lm(const FidResiduals& f, Eigen::VectorXd x) {
  Eigen::NumericalDiff<FidResiduals> nd(f);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<FidResiduals>> lm(nd);
  lm.parameters.maxfev = 4000;
  lm.parameters.xtol = 1e-14;
  lm.parameters.ftol = 1e-14;
  const auto status = lm.minimize(x);
  FitOutcome out;
  out.x = x;
  Eigen::VectorXd r(f.values());
  f(x, r);
  out.rss = r.squaredNorm();
  out.ok = std::isfinite(out.rss) && x.allFinite() &&
           status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters &&
           status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation;
  return out;
}

}  // namespace

FidFitResult fid_fit(std::span<const double> t, std::span<const double> p) {
  if (t.size() != p.size()) throw InvalidArgument("fid_fit: t and P_S lengths differ");
  if (t.size() < 10) throw InvalidArgument("fid_fit needs at least 10 samples");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i]) || !std::isfinite(p[i])) throw InvalidArgument("fid_fit: non-finite sample");
    if (i > 0 && !(t[i] > t[i - 1])) throw InvalidArgument("fid_fit: times must increase strictly");
  }
  const double span = t.back() - t.front();
  if (!(span > 0.0)) throw InvalidArgument("fid_fit: zero time span");

  // Starting guesses from the data.
  const double c0 = p.back();
  const double a0 = p.front() - c0;
  if (!(std::abs(a0) > 0.0)) throw InvalidArgument("fid_fit: no decay in data");
  double t_e = span;
  for (std::size_t i = 0; i < t.size(); ++i)
    if ((p[i] - c0) / a0 < std::exp(-1.0)) {
      t_e = std::max(t[i], span / t.size());
      break;
    }
  const double tu0 = t_e * 1e6;

  double dt_min = span;
  for (std::size_t i = 1; i < t.size(); ++i) dt_min = std::min(dt_min, t[i] - t[i - 1]);
  const double w_lo = 0.2 / (span * 1e6), w_hi = constants::pi / (dt_min * 1e6);
  constexpr int grid = 120;

  FidResiduals fr{t, p};
  fr.mode = 1;
  int best_k = -1;
  FitOutcome best;
  for (int k = 0; k < grid; ++k) {
    fr.fixed_w = w_lo * std::pow(w_hi / w_lo, static_cast<double>(k) / (grid - 1));
    Eigen::VectorXd x(3);
    x << tu0, a0, c0;
    auto out = run_lm(fr, x);
    if (out.ok && out.rss < best.rss) {
      best = out;
      best_k = k;
    }
  }
  if (best_k < 0) throw NumericalError("fid_fit: no grid point produced a finite fit");
  const double w_grid = w_lo * std::pow(w_hi / w_lo, static_cast<double>(best_k) / (grid - 1));

  fr.mode = 0;
  Eigen::VectorXd x(4);
  x << best.x(0), w_grid, best.x(1), best.x(2);
  auto full = run_lm(fr, x);
  if (!full.ok || !(full.x(0) != 0.0)) {
    std::ostringstream msg;
    msg << "fid_fit: refinement did not converge; best grid point omega0 = " << w_grid * 1e6
        << " rad/s, T2* = " << std::abs(best.x(0)) * 1e-6 << " s";
    throw NumericalError(msg.str());
  }
  if (full.rss > best.rss) {
    full.x << best.x(0), w_grid, best.x(1), best.x(2);
    full.rss = best.rss;
  }

  fr.mode = 2;
  Eigen::VectorXd xg(3);
  xg << tu0, a0, c0;
  const auto gauss = run_lm(fr, xg);

  FidFitResult r;
  r.t2star = std::abs(full.x(0)) * 1e-6;
  r.omega0 = std::abs(full.x(1)) * 1e6;
  r.b0_tesla = field_from_omega0(r.omega0);
  r.amplitude = full.x(2);
  r.offset = full.x(3);
  r.rss = full.rss;
  r.rss_gaussian = gauss.ok ? gauss.rss : std::numeric_limits<double>::infinity();
  // Flat residual in omega0: the oscillation explains no more than noise, or the
  // optimum sits on the edge of the scanned range.
  const double n = static_cast<double>(t.size());
  const double sigma2 = r.rss / std::max(n - 4.0, 1.0);
  const bool edge = best_k == 0 || best_k == grid - 1;
  r.b0_identifiable = !edge && (r.rss_gaussian - r.rss) > 25.0 * sigma2 + 1e-20 * n;
  return r;
}

}  // namespace spinbath
