#include "roughvol/asymvar.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <tuple>

namespace roughvol {

namespace {

constexpr long k_term_cap = 1000000;

double tail_coeff(double h) { return h * std::abs(2.0 * h - 1.0); }

}  // namespace

AsymCovMatrix chh_matrix_uncached(double h, int max_lag, double tol) {
  if (!(h > 0.0 && h < 0.5))
    throw input_error("chh_matrix: H outside (0, 1/2)");
  if (max_lag < 0) throw input_error("chh_matrix: negative max lag");
  if (!(tol > 0.0)) throw input_error("chh_matrix: tol must be positive");

  const int R = max_lag;

  // every summand is a product of two ACF values whose indices are at least
  // r - R and r; |G| decays monotonically, so |G_{r-R}| |G_r| bounds them all
  long rmax = R + 2;
  while (rmax < k_term_cap) {
    double b = std::abs(gamma_acf(h, rmax - R)) * std::abs(gamma_acf(h, rmax));
    if (b < tol) break;
    ++rmax;
  }

  double c = tail_coeff(h);
  double tail_bound = 4.0 * c * c *
                      std::pow(static_cast<double>(rmax - R - 1), 4.0 * h - 3.0) /
                      (3.0 - 4.0 * h);
  if (rmax >= k_term_cap && tail_bound > 1e-6)
    throw numeric_error("chh_matrix: series truncation did not converge");

  std::vector<double> g(rmax + 2 * R + 1);
  for (long k = 0; k < static_cast<long>(g.size()); ++k)
    g[k] = gamma_acf(h, k);

  Eigen::MatrixXd m(R + 1, R + 1);
  for (int i = 0; i <= R; ++i) {
    for (int j = i; j <= R; ++j) {
      double s = 0.0;
      for (long r = 1; r <= rmax; ++r) {
        s += g[r] * (g[std::abs(i - j + r)] + g[std::abs(j - i + r)]) +
             g[std::abs(r - j)] * g[i + r] + g[std::abs(r - i)] * g[j + r];
      }
      m(i, j) = m(j, i) = g[std::abs(i - j)] + g[i] * g[j] + s;
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m,
                                                    Eigen::EigenvaluesOnly);
  double floor = -1e-8 * m.trace();
  if (es.eigenvalues().minCoeff() < floor)
    throw numeric_error("chh_matrix: covariance matrix not PSD");

  AsymCovMatrix out;
  out.h = h;
  out.max_lag = R;
  out.entries = std::move(m);
  out.truncation_lag = rmax;
  out.tail_bound = tail_bound;
  return out;
}

namespace {

using CacheKey = std::tuple<long long, int, long long>;

std::map<CacheKey, AsymCovMatrix>& cov_cache() {
  static std::map<CacheKey, AsymCovMatrix> c;
  return c;
}

std::shared_mutex& cov_mutex() {
  static std::shared_mutex m;
  return m;
}

CacheKey make_key(double h, int max_lag, double tol) {
  return {std::llround(h * 1e12), max_lag,
          std::llround(std::log10(tol) * 1e6)};
}

}  // namespace

const AsymCovMatrix& chh_matrix(double h, int max_lag, double tol) {
  CacheKey key = make_key(h, max_lag, tol);
  {
    std::shared_lock lock(cov_mutex());
    auto it = cov_cache().find(key);
    if (it != cov_cache().end()) return it->second;
  }
  AsymCovMatrix m = chh_matrix_uncached(h, max_lag, tol);
  std::unique_lock lock(cov_mutex());
  return cov_cache().try_emplace(key, std::move(m)).first->second;
}

namespace {

struct RatioBits {
  double a_g, b_g, c_g;     // inner products with Gamma^H
  double a_dg, b_dg, c_dg;  // with the H-derivative
  double phi, phi_prime, dinv;
};

RatioBits ratio_bits(const Vec& a, const Vec& b, const Vec& c, double h) {
  int R = static_cast<int>(a.size()) - 1;
  Vec g = gamma_vec(h, R);
  Vec dg = dgamma_vec(h, R, 1);
  RatioBits rb{};
  rb.a_g = a.dot(g);
  rb.b_g = b.dot(g);
  rb.c_g = c.size() == a.size() ? c.dot(g) : 0.0;
  rb.a_dg = a.dot(dg);
  rb.b_dg = b.dot(dg);
  rb.c_dg = c.size() == a.size() ? c.dot(dg) : 0.0;
  if (rb.b_g == 0.0) throw numeric_error("asymvar: <b, Gamma^H> vanishes");
  rb.phi = rb.a_g / rb.b_g;
  rb.phi_prime = (rb.a_dg - rb.phi * rb.b_dg) / rb.b_g;
  if (std::abs(rb.phi_prime) < 1e-14)
    throw numeric_error("asymvar: degenerate phi'");
  rb.dinv = 1.0 / rb.phi_prime;
  return rb;
}

Vec e1(int n) {
  Vec v = Vec::Zero(n);
  v[0] = 1.0;
  return v;
}

double quad(const Vec& v, const AsymCovMatrix& covm) {
  return v.dot(covm.entries * v);
}

}  // namespace

double var_h0(const Vec& a, const Vec& b, double h, const AsymCovMatrix& covm) {
  RatioBits rb = ratio_bits(a, b, Vec(), h);
  Vec v = a - rb.phi * b;
  double f = rb.dinv / rb.b_g;
  return f * f * quad(v, covm);
}

double var_h0(int max_lag, const Vec& a, const Vec& b, double h) {
  return var_h0(a, b, h, chh_matrix(h, max_lag));
}

double var_c_plugin(const Vec& a, const Vec& b, const Vec& c, double h,
                    const AsymCovMatrix& covm) {
  RatioBits rb = ratio_bits(a, b, c, h);
  if (rb.c_g == 0.0) throw numeric_error("var_c_plugin: <c, Gamma^H> vanishes");
  double denom = 1.0 - c[0] / rb.c_g;
  if (std::abs(denom) < 1e-12)
    throw numeric_error("var_c_plugin: degenerate 1 - c_0/<c, Gamma^H>");
  int n = static_cast<int>(a.size());
  Vec u = (e1(n) - c / rb.c_g +
           (rb.c_dg / rb.c_g) * (rb.dinv / rb.b_g) * (a - rb.phi * b)) /
          denom;
  return quad(u, covm);
}

double var_c_plugin(int max_lag, const Vec& a, const Vec& b, const Vec& c,
                    double h) {
  return var_c_plugin(a, b, c, h, chh_matrix(h, max_lag));
}

LadderVariances var_ladder(const Vec& a, const Vec& b, const Vec& c, double h,
                           int m, const AsymCovMatrix& covm) {
  if (m < 2) throw input_error("var_ladder: m must be >= 2");
  if (b[0] != 0.0) throw input_error("var_ladder: b_0 must be 0");
  RatioBits rb = ratio_bits(a, b, c, h);
  if (rb.a_g == 0.0) throw numeric_error("var_ladder: <a, Gamma^H> vanishes");

  int n = static_cast<int>(a.size());
  Vec base = e1(n) - a / rb.a_g;
  Vec corr = a - rb.phi * b;
  double psi1 = rb.a_dg * rb.dinv;  // first derivative of the composed map

  // first step uses psi'; later steps use <a, dGamma> directly
  double theta1 = 1.0 - a[0] / rb.a_g + psi1 * a[0] / (rb.a_g * rb.b_g);
  if (std::abs(theta1) < 1e-14)
    throw numeric_error("var_ladder: degenerate first-step denominator");
  Vec u = (base + psi1 / (rb.a_g * rb.b_g) * corr) / theta1;
  Vec w = rb.dinv / rb.b_g * (corr - a[0] * u);

  LadderVariances out;
  out.var_h_k.reserve(m);
  out.var_c_k.reserve(m);
  out.var_c_k.push_back(quad(u, covm));
  out.var_h_k.push_back(quad(w, covm));

  double theta = 1.0 - a[0] / rb.a_g;
  if (std::abs(theta) < 1e-14)
    throw numeric_error("var_ladder: degenerate 1 - a_0/<a, Gamma^H>");
  for (int k = 2; k <= m; ++k) {
    u = (base + (rb.a_dg / rb.a_g) * w) / theta;
    w = rb.dinv / rb.b_g * (corr - a[0] * u);
    out.var_c_k.push_back(quad(u, covm));
    out.var_h_k.push_back(quad(w, covm));
  }
  out.var_h = out.var_h_k.back();

  if (rb.c_g == 0.0) throw numeric_error("var_ladder: <c, Gamma^H> vanishes");
  double cden = 1.0 - c[0] / rb.c_g;
  if (std::abs(cden) < 1e-12)
    throw numeric_error("var_ladder: degenerate 1 - c_0/<c, Gamma^H>");
  Vec u_fin = (e1(n) - c / rb.c_g + (rb.c_dg / rb.c_g) * w) / cden;
  out.var_c = quad(u_fin, covm);
  return out;
}

LadderVariances var_ladder(int max_lag, const Vec& a, const Vec& b,
                           const Vec& c, double h, int m) {
  return var_ladder(a, b, c, h, m, chh_matrix(h, max_lag));
}

}  // namespace roughvol
