#include "roughvol/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <shared_mutex>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "roughvol/rng.hpp"

namespace roughvol {

namespace {

void validate_steps(const std::vector<std::pair<double, double>>& steps,
                    const char* name, double horizon) {
  if (steps.empty()) return;
  if (steps.front().first != 0.0)
    throw input_error(std::string(name) + ": first breakpoint must be at t=0");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!(steps[i].second >= 0.0) || !std::isfinite(steps[i].second))
      throw input_error(std::string(name) + ": values must be finite and >= 0");
    if (i > 0 && !(steps[i].first > steps[i - 1].first))
      throw input_error(std::string(name) +
                        ": breakpoints must be strictly increasing");
  }
  if (steps.back().first >= horizon)
    throw input_error(std::string(name) + ": breakpoint at or past horizon");
}

double step_value(const std::vector<std::pair<double, double>>& steps,
                  double scalar, double t) {
  if (steps.empty()) return scalar;
  double v = steps.front().second;
  for (const auto& s : steps) {
    if (s.first <= t)
      v = s.second;
    else
      break;
  }
  return v;
}

double step_sq_integral(const std::vector<std::pair<double, double>>& steps,
                        double scalar, double t) {
  if (t <= 0.0) return 0.0;
  if (steps.empty()) return scalar * scalar * t;
  double acc = 0.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double lo = steps[i].first;
    if (lo >= t) break;
    const double hi = (i + 1 < steps.size()) ? std::min(steps[i + 1].first, t) : t;
    if (hi > lo) acc += steps[i].second * steps[i].second * (hi - lo);
  }
  return acc;
}

long embedding_size(long n_total) {
  long need = 2 * std::max<long>(n_total - 1, 1);
  long m = 2;
  while (m < need) m *= 2;
  return m;
}

// per-frequency scale sqrt(lambda_k / M) of the circulant embedding of the
// unit-spacing fractional ACF; negative eigenvalues below the tolerance
// floor abort, tiny negatives are clamped to zero
const std::vector<double>& embedding_scales(double h, long m) {
  using Key = std::pair<long long, long>;
  static std::map<Key, std::vector<double>> cache;
  static std::shared_mutex mtx;
  const Key key{std::llround(h * 1e12), m};
  {
    std::shared_lock lk(mtx);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  std::vector<double> row(static_cast<std::size_t>(m));
  const long half = m / 2;
  for (long j = 0; j <= half; ++j) row[j] = gamma_acf(h, j);
  for (long j = half + 1; j < m; ++j) row[j] = row[m - j];

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, row);

  std::vector<double> lam(static_cast<std::size_t>(m));
  double max_l = 0.0;
  for (long k = 0; k < m; ++k) {
    lam[k] = spec[k].real();
    max_l = std::max(max_l, lam[k]);
  }
  const double floor = -1e-10 * max_l;
  for (long k = 0; k < m; ++k) {
    if (lam[k] < floor)
      throw numeric_error("fbm_increments: circulant embedding not PSD");
    if (lam[k] < 0.0) lam[k] = 0.0;
    lam[k] = std::sqrt(lam[k] / static_cast<double>(m));
  }
  std::unique_lock lk(mtx);
  if (cache.size() > 64) cache.clear();
  return cache.try_emplace(key, std::move(lam)).first->second;
}

}  // namespace

void SimConfig::validate() const {
  if (!(h > 0.0) || !(h < 1.0)) {
    if (noise_kind == NoiseKind::fbm)
      throw input_error("SimConfig: h must lie in (0,1) for fractional noise");
  }
  if (n < 2) throw input_error("SimConfig: n must be >= 2");
  if (days < 1) throw input_error("SimConfig: days must be >= 1");
  if (!(sigma >= 0.0) || !(rho >= 0.0))
    throw input_error("SimConfig: sigma and rho must be >= 0");
  if (!std::isfinite(sigma) || !std::isfinite(rho) || !std::isfinite(drift))
    throw input_error("SimConfig: non-finite parameter");
  const double horizon = static_cast<double>(days);
  validate_steps(sigma_steps, "sigma_steps", horizon);
  validate_steps(rho_steps, "rho_steps", horizon);
}

double SimConfig::sigma_at(double t) const {
  return step_value(sigma_steps, sigma, t);
}

double SimConfig::rho_at(double t) const {
  return step_value(rho_steps, rho, t);
}

double SimConfig::integrated_c(double t) const {
  return step_sq_integral(sigma_steps, sigma, t);
}

double SimConfig::integrated_pi(double t) const {
  if (noise_kind == NoiseKind::none) return 0.0;
  return step_sq_integral(rho_steps, rho, t);
}

std::vector<double> fbm_increments(double h, long n_total, double delta,
                                   std::uint64_t seed) {
  if (!(h > 0.0) || !(h < 1.0))
    throw input_error("fbm_increments: h must lie in (0,1)");
  if (n_total < 1) throw input_error("fbm_increments: n_total must be >= 1");
  if (!(delta > 0.0)) throw input_error("fbm_increments: delta must be > 0");

  const double scale = std::pow(delta, h);
  Rng rng(seed);
  if (n_total == 1) return {scale * rng.normal()};

  const long m = embedding_size(n_total);
  const long half = m / 2;
  const std::vector<double>& s = embedding_scales(h, m);

  std::vector<std::complex<double>> xi(static_cast<std::size_t>(m));
  xi[0] = {s[0] * rng.normal(), 0.0};
  xi[static_cast<std::size_t>(half)] = {s[half] * rng.normal(), 0.0};
  const double inv_sqrt2 = 0.7071067811865475244;
  for (long k = 1; k < half; ++k) {
    const double re = rng.normal();
    const double im = rng.normal();
    const double c = s[k] * inv_sqrt2;
    xi[static_cast<std::size_t>(k)] = {c * re, c * im};
    xi[static_cast<std::size_t>(m - k)] = {c * re, -c * im};
  }

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> out;
  fft.fwd(out, xi);

  std::vector<double> inc(static_cast<std::size_t>(n_total));
  for (long i = 0; i < n_total; ++i)
    inc[static_cast<std::size_t>(i)] = scale * out[static_cast<std::size_t>(i)].real();
  return inc;
}

std::vector<double> fbm_increments_cholesky(double h, long n_total,
                                            double delta, std::uint64_t seed) {
  if (!(h > 0.0) || !(h < 1.0))
    throw input_error("fbm_increments_cholesky: h must lie in (0,1)");
  if (n_total < 1 || n_total > 2048)
    throw input_error("fbm_increments_cholesky: n_total must be in [1,2048]");
  if (!(delta > 0.0))
    throw input_error("fbm_increments_cholesky: delta must be > 0");

  const Eigen::Index n = static_cast<Eigen::Index>(n_total);
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double g = gamma_acf(h, static_cast<long>(i - j));
      cov(i, j) = g;
      cov(j, i) = g;
    }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw numeric_error("fbm_increments_cholesky: factorization failed");

  Rng rng(seed);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
  Eigen::VectorXd x = llt.matrixL() * z;

  const double scale = std::pow(delta, h);
  std::vector<double> inc(static_cast<std::size_t>(n_total));
  for (Eigen::Index i = 0; i < n; ++i)
    inc[static_cast<std::size_t>(i)] = scale * x(i);
  return inc;
}

PricePath simulate_mixed(const SimConfig& cfg) {
  cfg.validate();
  const long n_total = static_cast<long>(cfg.n) * cfg.days;
  const double delta = 1.0 / static_cast<double>(cfg.n);
  const double sqrt_delta = std::sqrt(delta);

  PricePath path;
  path.delta = delta;
  path.days = cfg.days;
  path.values.assign(static_cast<std::size_t>(n_total) + 1, 0.0);

  Rng rb(derive_seed(cfg.seed, 1));
  double cum = 0.0;
  for (long k = 1; k <= n_total; ++k) {
    const double t_prev = static_cast<double>(k - 1) * delta;
    cum += cfg.sigma_at(t_prev) * sqrt_delta * rb.normal();
    path.values[static_cast<std::size_t>(k)] = cum;
  }

  switch (cfg.noise_kind) {
    case NoiseKind::none:
      break;
    case NoiseKind::white: {
      Rng rn(derive_seed(cfg.seed, 2));
      for (long i = 0; i <= n_total; ++i) {
        const double t = static_cast<double>(i) * delta;
        path.values[static_cast<std::size_t>(i)] += cfg.rho_at(t) * rn.normal();
      }
      break;
    }
    case NoiseKind::fbm: {
      const std::vector<double> inc =
          fbm_increments(cfg.h, n_total, delta, derive_seed(cfg.seed, 2));
      double bh = 0.0;
      for (long i = 1; i <= n_total; ++i) {
        bh += inc[static_cast<std::size_t>(i - 1)];
        const double t = static_cast<double>(i) * delta;
        path.values[static_cast<std::size_t>(i)] += cfg.rho_at(t) * bh;
      }
      break;
    }
  }

  if (cfg.drift != 0.0)
    for (long i = 0; i <= n_total; ++i)
      path.values[static_cast<std::size_t>(i)] +=
          cfg.drift * static_cast<double>(i) * delta;

  return path;
}

}  // namespace roughvol
