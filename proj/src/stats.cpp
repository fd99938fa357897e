#include "roughvol/stats.hpp"

#include <algorithm>
#include <cmath>

namespace roughvol {

namespace {

std::vector<double> increments(const PricePath& path) {
  if (path.values.size() < 2)
    throw input_error("stats: path must have at least 2 observations");
  std::vector<double> d(path.values.size() - 1);
  for (std::size_t k = 0; k + 1 < path.values.size(); ++k)
    d[k] = path.values[k + 1] - path.values[k];
  return d;
}

double ols_slope(const std::vector<std::pair<double, double>>& pts) {
  const double n = static_cast<double>(pts.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& p : pts) {
    sx += p.first;
    sy += p.second;
    sxx += p.first * p.first;
    sxy += p.first * p.second;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw numeric_error("stats: degenerate regression grid");
  return (n * sxy - sx * sy) / denom;
}

SlopeFit fit_loglog(std::vector<std::pair<double, double>> pts) {
  if (pts.size() < 3)
    throw numeric_error("stats: fewer than 3 positive points for slope fit");
  SlopeFit fit;
  fit.slope = ols_slope(pts);
  fit.h_vs = std::clamp((fit.slope + 1.0) / 2.0, 0.0, 1.0);
  fit.points = std::move(pts);
  return fit;
}

}  // namespace

VariationStats variation_stats(const PricePath& path, int max_lag) {
  if (max_lag < 0) throw input_error("variation_stats: max_lag must be >= 0");
  if (static_cast<long>(path.values.size()) <
      static_cast<long>(max_lag) + 2)
    throw input_error("variation_stats: path too short for requested lags");
  const std::vector<double> d = increments(path);
  const long n = static_cast<long>(d.size());

  VariationStats vs;
  vs.vhat.assign(static_cast<std::size_t>(max_lag) + 1, 0.0);
  for (int r = 0; r <= max_lag; ++r) {
    double s = 0.0;
    for (long k = 0; k + r < n; ++k) s += d[k] * d[k + r];
    vs.vhat[static_cast<std::size_t>(r)] = s;
  }
  double q = 0.0;
  for (long k = 0; k < n; ++k) {
    const double d2 = d[k] * d[k];
    q += d2 * d2;
  }
  vs.qhat = q;
  vs.n_obs = n;
  vs.delta = path.delta;
  vs.t = path.horizon();
  return vs;
}

VariationStats sum_stats(const std::vector<VariationStats>& parts) {
  if (parts.empty()) throw input_error("sum_stats: empty input");
  VariationStats acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const VariationStats& p = parts[i];
    if (p.vhat.size() != acc.vhat.size())
      throw input_error("sum_stats: mismatched lag counts");
    if (p.delta != acc.delta)
      throw input_error("sum_stats: mismatched grid spacings");
    for (std::size_t r = 0; r < acc.vhat.size(); ++r) acc.vhat[r] += p.vhat[r];
    acc.qhat += p.qhat;
    acc.n_obs += p.n_obs;
    acc.t += p.t;
  }
  return acc;
}

double rv_subsampled(const PricePath& path, int i) {
  if (i < 1) throw input_error("rv_subsampled: i must be >= 1");
  const long last = static_cast<long>(path.values.size()) - 1;
  double s = 0.0;
  for (long k = 0; k + i <= last; k += i) {
    const double d = path.values[static_cast<std::size_t>(k + i)] -
                     path.values[static_cast<std::size_t>(k)];
    s += d * d;
  }
  return s;
}

SlopeFit signature_slope(const PricePath& path, int i_max) {
  if (i_max < 1) throw input_error("signature_slope: i_max must be >= 1");
  std::vector<std::pair<double, double>> pts;
  for (int i = 1; i <= i_max; ++i) {
    const double rv = rv_subsampled(path, i);
    if (rv > 0.0) pts.emplace_back(std::log(static_cast<double>(i)), std::log(rv));
  }
  return fit_loglog(std::move(pts));
}

SlopeFit variance_slope(const PricePath& path, int i_max) {
  if (i_max < 1) throw input_error("variance_slope: i_max must be >= 1");
  const long last = static_cast<long>(path.values.size()) - 1;
  std::vector<std::pair<double, double>> pts;
  for (int i = 1; i <= i_max; ++i) {
    const long cnt = last - i + 1;
    if (cnt < 2) break;
    double mean = 0.0;
    for (long k = 0; k < cnt; ++k)
      mean += path.values[static_cast<std::size_t>(k + i)] -
              path.values[static_cast<std::size_t>(k)];
    mean /= static_cast<double>(cnt);
    double ss = 0.0;
    for (long k = 0; k < cnt; ++k) {
      const double z = path.values[static_cast<std::size_t>(k + i)] -
                       path.values[static_cast<std::size_t>(k)] - mean;
      ss += z * z;
    }
    const double v = ss / static_cast<double>(cnt - 1);
    if (v > 0.0) pts.emplace_back(std::log(static_cast<double>(i)), std::log(v));
  }
  return fit_loglog(std::move(pts));
}

double white_noise_stat(const PricePath& path) {
  const std::vector<double> d = increments(path);
  const long m = static_cast<long>(d.size());
  if (m < 4) throw input_error("white_noise_stat: needs at least 4 increments");

  double s2 = 0.0;
  for (long k = 0; k < m; ++k) s2 += d[k] * d[k];
  double cross = 0.0;
  for (long k = 0; k + 2 < m; ++k) cross += d[k] * d[k] * d[k + 2] * d[k + 2];
  double pairs = 0.0;
  for (long k = 0; k + 1 < m; ++k) {
    const double s = d[k] + d[k + 1];
    pairs += s * s;
  }
  if (s2 <= 0.0 || cross <= 0.0)
    throw numeric_error("white_noise_stat: degenerate denominators");
  return s2 / std::sqrt(2.0 * cross) * (pairs / s2 - 1.0);
}

double h_acf(const VariationStats& vs) {
  if (vs.vhat.size() < 2) throw input_error("h_acf: needs lags 0 and 1");
  if (!(vs.vhat[0] > 0.0)) throw numeric_error("h_acf: nonpositive lag-0 sum");
  const double arg = vs.vhat[1] / vs.vhat[0] + 1.0;
  if (!(arg > 0.0)) throw numeric_error("h_acf: ratio outside the log domain");
  return 0.5 * (1.0 + std::log2(arg));
}

double h_dms(const PricePath& path) {
  if (path.values.size() < 8)
    throw input_error("h_dms: needs at least 8 observations");
  const double v1 = rv_subsampled(path, 1);
  const double v2 = rv_subsampled(path, 2);
  const double v4 = rv_subsampled(path, 4);
  const double num = v4 - v2;
  const double den = v2 - v1;
  const double ratio = num / den;
  if (!std::isfinite(ratio) || !(ratio > 0.0)) return 0.5;
  return 0.5 * (1.0 + std::log2(ratio));
}

}  // namespace roughvol
