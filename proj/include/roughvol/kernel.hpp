#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>

namespace roughvol {

using Vec = Eigen::VectorXd;

// thrown on malformed inputs (bad config, unparsable files, domain errors)
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// thrown when a computation degenerates numerically
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// autocorrelation of fractional increments at lag r:
// 1 at r = 0, else ((r+1)^{2H} - 2 r^{2H} + (r-1)^{2H}) / 2 with 0^{2H} = 0
double gamma_acf(double h, long r);

// j-th derivative in H; 0 for r = 0, terms with base 0 drop (0 * ln 0 = 0)
double gamma_h_derivative(double h, long r, int j);

Vec gamma_vec(double h, int max_lag);
Vec dgamma_vec(double h, int max_lag, int j = 1);

// number of higher-order bias terms, floor(1 / (2 - 4H)) capped
int n_of_h(double h, int cap = 3);

struct InvertResult {
  double h;
  bool clamped;
};

// plain ratio <a, Gamma^H> / <b, Gamma^H>; zero denominator is an error here
// (RatioFunction::phi instead resolves the removable 0/0 at H = 1/2)
double phi_value(double h, const Vec& a, const Vec& b);

// phi(H) = <a, Gamma^H> / <b, Gamma^H> with a numeric inverse.
//
// Two working-domain regimes:
//  - pole_at_hi = false: phi extends continuously through H = 1/2 (both
//    weights have zero lag-0 entry, the 0/0 there is removable); domain is
//    (lo, hi) inside (0, 1).
//  - pole_at_hi = true: a_0 != 0 while <b, Gamma^{1/2}> = 0, so phi blows up
//    at H = 1/2; domain must satisfy hi <= 1/2. Ratios on the far side of the
//    pole are clamped to hi (they indicate H at or beyond 1/2).
//
// Construction checks strict monotonicity of phi on a 512-point grid.
class RatioFunction {
 public:
  RatioFunction(Vec a, Vec b, double lo = 1e-4, double hi = 1.0 - 1e-4,
                bool pole_at_hi = false);

  double phi(double h) const;
  double phi_derivative(double h, int j) const;  // j = 1..3, quotient rule

  // root of phi(H) = y to 1e-12; clamps to the nearer endpoint out of range
  InvertResult phi_inverse(double y) const;

  // (phi^-1)'(y), (phi^-1)''(y), (phi^-1)'''(y)
  double phi_inverse_derivative(double y, int j) const;

  // same derivatives evaluated at a known preimage h = phi^-1(y)
  std::array<double, 3> inverse_derivatives_at(double h) const;

  // psi(y) = <w, Gamma^{phi^-1(y)}> and derivatives up to j_max <= 3
  std::array<double, 4> psi_and_derivatives(double y, const Vec& w,
                                            int j_max) const;
  std::array<double, 4> psi_and_derivatives_at(double h, const Vec& w,
                                               int j_max) const;

  const Vec& a() const { return a_; }
  const Vec& b() const { return b_; }
  int max_lag() const { return static_cast<int>(a_.size()) - 1; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  bool increasing() const { return increasing_; }

 private:
  Vec a_, b_;
  double lo_, hi_;
  bool pole_at_hi_;
  bool increasing_ = false;
  double f_lo_ = 0.0, f_hi_ = 0.0;
};

}  // namespace roughvol
