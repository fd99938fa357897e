#include "roughvol/kernel.hpp"

#include <cmath>
#include <limits>

namespace roughvol {

double gamma_acf(double h, long r) {
  if (!(h > 0.0 && h < 1.0))
    throw input_error("gamma_acf: H must lie in (0, 1)");
  if (r < 0) throw input_error("gamma_acf: negative lag");
  if (r == 0) return 1.0;
  double e = 2.0 * h;
  double rd = static_cast<double>(r);
  double low = (r == 1) ? 0.0 : std::pow(rd - 1.0, e);
  return 0.5 * (std::pow(rd + 1.0, e) - 2.0 * std::pow(rd, e) + low);
}

double gamma_h_derivative(double h, long r, int j) {
  if (!(h > 0.0 && h < 1.0))
    throw input_error("gamma_h_derivative: H must lie in (0, 1)");
  if (j < 1) throw input_error("gamma_h_derivative: order must be >= 1");
  if (r < 0) throw input_error("gamma_h_derivative: negative lag");
  if (r == 0) return 0.0;
  auto term = [&](double base) {
    if (base <= 0.0) return 0.0;
    return std::pow(2.0 * std::log(base), j) * std::pow(base, 2.0 * h);
  };
  double rd = static_cast<double>(r);
  return 0.5 * (term(rd + 1.0) - 2.0 * term(rd) + term(rd - 1.0));
}

Vec gamma_vec(double h, int max_lag) {
  Vec g(max_lag + 1);
  for (int r = 0; r <= max_lag; ++r) g[r] = gamma_acf(h, r);
  return g;
}

Vec dgamma_vec(double h, int max_lag, int j) {
  Vec g(max_lag + 1);
  for (int r = 0; r <= max_lag; ++r) g[r] = gamma_h_derivative(h, r, j);
  return g;
}

int n_of_h(double h, int cap) {
  if (!(h > 0.0 && h < 0.5)) throw input_error("n_of_h: H outside (0, 1/2)");
  double v = std::floor(1.0 / (2.0 - 4.0 * h));
  if (v > static_cast<double>(cap)) return cap;
  return static_cast<int>(v);
}

namespace {

// both inner products nearly vanish close to H = 1/2 when a_0 = b_0 = 0;
// the ratio is then taken between the H-derivatives (l'Hopital);
// threshold is relative to the weight norms so phi stays scale-invariant
constexpr double k_degenerate = 1e-8;

}  // namespace

double phi_value(double h, const Vec& a, const Vec& b) {
  if (a.size() != b.size() || a.size() < 1)
    throw input_error("phi_value: weight size mismatch");
  Vec g = gamma_vec(h, static_cast<int>(a.size()) - 1);
  double v = b.dot(g);
  if (v == 0.0) throw numeric_error("phi_value: zero denominator <b, Gamma^H>");
  return a.dot(g) / v;
}

RatioFunction::RatioFunction(Vec a, Vec b, double lo, double hi,
                             bool pole_at_hi)
    : a_(std::move(a)), b_(std::move(b)), lo_(lo), hi_(hi),
      pole_at_hi_(pole_at_hi) {
  if (a_.size() != b_.size() || a_.size() < 1)
    throw input_error("RatioFunction: weight size mismatch");
  if (!(0.0 < lo_ && lo_ < hi_ && hi_ < 1.0))
    throw input_error("RatioFunction: bad domain");
  if (pole_at_hi_ && hi_ > 0.5)
    throw input_error("RatioFunction: pole regime requires hi <= 1/2");

  constexpr int grid_n = 512;
  double prev = phi(lo_);
  f_lo_ = prev;
  int rises = 0, falls = 0;
  for (int k = 1; k < grid_n; ++k) {
    double hk = lo_ + (hi_ - lo_) * k / (grid_n - 1);
    double cur = phi(hk);
    if (!std::isfinite(cur))
      throw numeric_error("RatioFunction: non-finite phi on grid");
    if (cur > prev) ++rises;
    else if (cur < prev) ++falls;
    else throw numeric_error("RatioFunction: flat phi segment");
    prev = cur;
  }
  f_hi_ = prev;
  if (rises > 0 && falls > 0)
    throw numeric_error("RatioFunction: phi not monotone on domain");
  increasing_ = rises > 0;
}

double RatioFunction::phi(double h) const {
  int R = max_lag();
  Vec g = gamma_vec(h, R);
  double u = a_.dot(g), v = b_.dot(g);
  if (std::abs(u) < k_degenerate * a_.norm() &&
      std::abs(v) < k_degenerate * b_.norm()) {
    Vec dg = dgamma_vec(h, R, 1);
    u = a_.dot(dg);
    v = b_.dot(dg);
  }
  if (v == 0.0) throw numeric_error("phi: zero denominator <b, Gamma^H>");
  return u / v;
}

double RatioFunction::phi_derivative(double h, int j) const {
  if (j < 1 || j > 3) throw input_error("phi_derivative: order must be 1..3");
  int R = max_lag();
  Vec g = gamma_vec(h, R);
  Vec dg1 = dgamma_vec(h, R, 1);
  double a0 = a_.dot(g), b0 = b_.dot(g);
  double a1 = a_.dot(dg1), b1 = b_.dot(dg1);
  if (b0 == 0.0) throw numeric_error("phi_derivative: zero denominator");
  double p0 = a0 / b0;
  double p1 = (a1 - p0 * b1) / b0;
  if (j == 1) return p1;
  Vec dg2 = dgamma_vec(h, R, 2);
  double a2 = a_.dot(dg2), b2 = b_.dot(dg2);
  double p2 = (a2 - 2.0 * p1 * b1 - p0 * b2) / b0;
  if (j == 2) return p2;
  Vec dg3 = dgamma_vec(h, R, 3);
  double a3 = a_.dot(dg3), b3 = b_.dot(dg3);
  return (a3 - 3.0 * p2 * b1 - 3.0 * p1 * b2 - p0 * b3) / b0;
}

InvertResult RatioFunction::phi_inverse(double y) const {
  if (pole_at_hi_) {
    // decreasing towards -inf (or increasing towards +inf) as H -> 1/2
    double near = f_lo_;
    bool diverge_neg = !increasing_;
    if (diverge_neg) {
      if (y > near) {
        // beyond the pole: ratios of the opposite sign belong to H >= 1/2
        return {y >= 0.0 ? hi_ : lo_, true};
      }
      if (y <= f_hi_) return {hi_, true};
    } else {
      if (y < near) {
        return {y <= 0.0 ? hi_ : lo_, true};
      }
      if (y >= f_hi_) return {hi_, true};
    }
  } else {
    double fmin = std::min(f_lo_, f_hi_), fmax = std::max(f_lo_, f_hi_);
    if (y <= fmin) return {f_lo_ < f_hi_ ? lo_ : hi_, true};
    if (y >= fmax) return {f_lo_ < f_hi_ ? hi_ : lo_, true};
  }

  // Brent-style bracketed search: bisection with secant acceleration
  double xa = lo_, xb = hi_;
  double fa = f_lo_ - y, fb = f_hi_ - y;
  if (fa == 0.0) return {xa, false};
  if (fb == 0.0) return {xb, false};
  for (int it = 0; it < 200; ++it) {
    double xm = 0.5 * (xa + xb);
    if (xb - xa < 1e-14) return {xm, false};
    double xs = xm;
    if (fa != fb) {
      xs = xb - fb * (xb - xa) / (fb - fa);  // secant
      if (!(xs > xa && xs < xb)) xs = xm;
    }
    // avoid stalling at an endpoint
    double margin = 0.1 * (xb - xa);
    if (xs - xa < 1e-3 * margin || xb - xs < 1e-3 * margin) xs = xm;
    double fs = phi(xs) - y;
    if (fs == 0.0 || std::abs(fs) < 1e-13 * std::max(1.0, std::abs(y)))
      return {xs, false};
    if ((fa < 0.0) == (fs < 0.0)) {
      xa = xs;
      fa = fs;
    } else {
      xb = xs;
      fb = fs;
    }
  }
  return {0.5 * (xa + xb), false};
}

std::array<double, 3> RatioFunction::inverse_derivatives_at(double h) const {
  double p1 = phi_derivative(h, 1);
  if (std::abs(p1) < 1e-10)
    throw numeric_error("inverse_derivatives: degenerate phi'");
  double p2 = phi_derivative(h, 2);
  double p3 = phi_derivative(h, 3);
  double g1 = 1.0 / p1;
  double g2 = -p2 / (p1 * p1 * p1);
  double g3 = (3.0 * p2 * p2 - p1 * p3) / std::pow(p1, 5);
  return {g1, g2, g3};
}

double RatioFunction::phi_inverse_derivative(double y, int j) const {
  if (j < 1 || j > 3)
    throw input_error("phi_inverse_derivative: order must be 1..3");
  auto d = inverse_derivatives_at(phi_inverse(y).h);
  return d[j - 1];
}

std::array<double, 4> RatioFunction::psi_and_derivatives_at(
    double h, const Vec& w, int j_max) const {
  if (j_max < 0 || j_max > 3)
    throw input_error("psi_and_derivatives: order must be 0..3");
  int R = max_lag();
  std::array<double, 4> out{};
  out[0] = w.dot(gamma_vec(h, R));
  if (j_max == 0) return out;
  auto g = inverse_derivatives_at(h);
  double f1 = w.dot(dgamma_vec(h, R, 1));
  out[1] = f1 * g[0];
  if (j_max >= 2) {
    double f2 = w.dot(dgamma_vec(h, R, 2));
    out[2] = f2 * g[0] * g[0] + f1 * g[1];
    if (j_max >= 3) {
      double f3 = w.dot(dgamma_vec(h, R, 3));
      out[3] = f3 * g[0] * g[0] * g[0] + 3.0 * f2 * g[0] * g[1] + f1 * g[2];
    }
  }
  return out;
}

std::array<double, 4> RatioFunction::psi_and_derivatives(double y, const Vec& w,
                                                         int j_max) const {
  return psi_and_derivatives_at(phi_inverse(y).h, w, j_max);
}

}  // namespace roughvol
