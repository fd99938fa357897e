#include "roughvol/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace roughvol {

namespace {

WeightConfig validated(WeightConfig cfg) {
  cfg.validate();
  return cfg;
}

Eigen::Map<const Vec> as_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_sizes(const VariationStats& vs, const WeightConfig& cfg) {
  if (static_cast<int>(vs.vhat.size()) != cfg.max_lag + 1)
    throw input_error("estimate: variation stats lag count does not match weights");
  if (!(vs.delta > 0.0)) throw input_error("estimate: delta must be positive");
}

double factorial(int j) {
  double f = 1.0;
  for (int i = 2; i <= j; ++i) f *= i;
  return f;
}

int order_at(double h, int n_cap, int forced_n) {
  if (forced_n >= 0) return forced_n;
  if (h > 0.0 && h < 0.5) return n_of_h(h, n_cap);
  return 0;
}

void finish(EstimationResult& res) {
  res.negative_c = res.c_integrated < 0.0;
  res.negative_pi = res.pi_integrated < 0.0;
  res.c_clamped = std::max(res.c_integrated, 0.0);
  res.pi_clamped = std::max(res.pi_integrated, 0.0);
}

}  // namespace

void WeightConfig::validate() const {
  if (max_lag < 1) throw input_error("WeightConfig: max_lag must be >= 1");
  const Eigen::Index n = max_lag + 1;
  if (a.size() != n || b.size() != n || c.size() != n || a0.size() != n ||
      b0.size() != n || (c0 && c0->size() != n))
    throw input_error("WeightConfig: weight vectors must have max_lag+1 entries");
  if (!a.allFinite() || !b.allFinite() || !c.allFinite() || !a0.allFinite() ||
      !b0.allFinite() || (c0 && !c0->allFinite()))
    throw input_error("WeightConfig: non-finite weight entry");
  if (b[0] != 0.0) throw input_error("WeightConfig: b[0] must be exactly 0");
  if (a0[0] != 0.0 || b0[0] != 0.0)
    throw input_error("WeightConfig: a0[0] and b0[0] must be exactly 0");
  if (m < 2) throw input_error("WeightConfig: m must be >= 2");
  if (!(fix_tol > 0.0)) throw input_error("WeightConfig: fix_tol must be > 0");
  if (n_cap < 0 || n_cap > 3)
    throw input_error("WeightConfig: n_cap must lie in [0, 3]");
}

Weights::Weights(WeightConfig cfg)
    : cfg_(validated(std::move(cfg))),
      rf_(cfg_.a, cfg_.b, 1e-4, 0.5 - 1e-9, true),
      rf0_(cfg_.a0, cfg_.b0, 1e-4, 1.0 - 1e-4, false) {}

InvertResult h_tilde(const VariationStats& vs, const RatioFunction& rf) {
  if (static_cast<Eigen::Index>(vs.vhat.size()) != rf.a().size())
    throw input_error("h_tilde: variation stats lag count does not match weights");
  const auto vh = as_vec(vs.vhat);
  const double num = rf.a().dot(vh);
  const double den = rf.b().dot(vh);
  if (den == 0.0) throw numeric_error("h_tilde: <b, vhat> vanishes");
  return rf.phi_inverse(num / den);
}

PluginEstimates estimators_plugin(const VariationStats& vs,
                                  const RatioFunction& rf0, const Vec& c,
                                  double h_est) {
  if (static_cast<Eigen::Index>(vs.vhat.size()) != rf0.a().size() ||
      c.size() != rf0.a().size())
    throw input_error("estimators_plugin: size mismatch");
  if (!(h_est > 0.0 && h_est < 1.0))
    throw input_error("estimators_plugin: h_est must lie in (0,1)");
  if (!(vs.delta > 0.0))
    throw input_error("estimators_plugin: delta must be positive");

  const int max_lag = static_cast<int>(c.size()) - 1;
  const auto vh = as_vec(vs.vhat);
  const Vec g = gamma_vec(h_est, max_lag);

  const double a0g = rf0.a().dot(g);
  if (a0g == 0.0)
    throw numeric_error("estimators_plugin: <a0, Gamma^H> vanishes");

  PluginEstimates out;
  out.pi_hat = std::pow(vs.delta, 1.0 - 2.0 * h_est) * rf0.a().dot(vh) / a0g;

  const double cg = c.dot(g);
  if (cg == 0.0 || std::abs(cg - c[0]) < 1e-12)
    throw numeric_error("estimators_plugin: degenerate c weights at this H");
  out.c_hat = (vs.vhat[0] - c.dot(vh) / cg) / (1.0 - c[0] / cg);
  out.not_identifiable = h_est <= 0.25;
  return out;
}

EstimationResult estimate_no_lag0(const VariationStats& vs, const Weights& w,
                                  bool with_ci) {
  const WeightConfig& cfg = w.config();
  check_sizes(vs, cfg);

  const InvertResult inv = h_tilde(vs, w.rf0());
  const PluginEstimates pe =
      estimators_plugin(vs, w.rf0(), cfg.c_no_lag0(), inv.h);

  EstimationResult res;
  res.h = inv.h;
  res.h_tilde = inv.h;
  res.clamped = inv.clamped;
  res.c_integrated = pe.c_hat;
  res.pi_integrated = pe.pi_hat;
  res.c_not_identifiable = pe.not_identifiable;
  res.variant = Variant::no_lag0;
  res.iterations_used = 0;
  finish(res);
  if (with_ci) confidence_intervals(res, vs, w);
  return res;
}

EstimationResult debias_ladder(const VariationStats& vs, const Weights& w,
                               int forced_n, bool with_ci) {
  const WeightConfig& cfg = w.config();
  check_sizes(vs, cfg);
  if (forced_n > 3)
    throw input_error("debias_ladder: forced correction order above 3");

  const int R = cfg.max_lag;
  const auto vh = as_vec(vs.vhat);
  const double v0 = vs.vhat[0];

  const double av = cfg.a.dot(vh);
  const double bv = cfg.b.dot(vh);
  if (bv == 0.0)
    throw numeric_error("debias_ladder: ratio stage: <b, vhat> vanishes");
  const double y = av / bv;
  const InvertResult inv = w.rf().phi_inverse(y);
  const double ht = inv.h;

  // side estimate on the no-lag-0 track feeds the noise level P
  const double a0v = cfg.a0.dot(vh);
  const double b0v = cfg.b0.dot(vh);
  if (b0v == 0.0)
    throw numeric_error("debias_ladder: noise stage: <b0, vhat> vanishes");
  const InvertResult inv0 = w.rf0().phi_inverse(a0v / b0v);
  const double a0g0 = cfg.a0.dot(gamma_vec(inv0.h, R));
  if (a0g0 == 0.0)
    throw numeric_error("debias_ladder: noise stage: <a0, Gamma^H0> vanishes");
  const double pn = a0v / a0g0;

  const Vec gh = gamma_vec(ht, R);
  const double ag = cfg.a.dot(gh);
  if (ag == 0.0)
    throw numeric_error("debias_ladder: correction stage: <a, Gamma^H> vanishes");
  const auto psi = w.rf().psi_and_derivatives_at(ht, cfg.a, 3);
  const double a0 = cfg.a[0];

  const double theta = 1.0 - a0 / ag + (pn / bv) * (a0 * psi[1] / ag);
  if (std::abs(theta) < 1e-14 || !std::isfinite(theta))
    throw numeric_error("debias_ladder: correction stage: degenerate Theta");
  const double ct1 = (v0 - av / ag) / theta;

  const int n_init = order_at(ht, cfg.n_cap, forced_n);

  double psi_coef[4] = {0.0, 0.0, 0.0, 0.0};
  for (int j = 2; j <= 3; ++j)
    psi_coef[j] = ((j % 2 == 0) ? 1.0 : -1.0) / factorial(j) * psi[j] *
                  std::pow(a0, j) / ag * (pn / std::pow(bv, j)) / theta;

  // truncated self-referencing expansion for the initial C
  double cs[4] = {0.0, ct1, 0.0, 0.0};
  const int steps = std::max(n_init, 1);
  for (int l = 1; l < steps; ++l) {
    double acc = ct1;
    for (int j = 2; j <= l + 1 && j <= 3; ++j)
      acc += psi_coef[j] * std::pow(cs[l - j + 2], j);
    cs[l + 1] = acc;
  }
  const double chat1 = cs[steps];

  const auto invd = w.rf().inverse_derivatives_at(ht);
  double phi_coef[4] = {0.0, 0.0, 0.0, 0.0};
  for (int j = 1; j <= 3; ++j)
    phi_coef[j] = ((j % 2 == 0) ? 1.0 : -1.0) / factorial(j) * invd[j - 1] *
                  std::pow(a0 / bv, j);

  double hk = ht;
  for (int j = 1; j <= n_init; ++j) hk += phi_coef[j] * std::pow(chat1, j);
  double ck = chat1;
  int iters = 1;

  for (int k = 2; k <= cfg.m; ++k) {
    if (!(hk > 0.0 && hk < 1.0) || !std::isfinite(hk))
      throw numeric_error("debias_ladder: iteration stage: H left (0,1)");
    const Vec ghk = gamma_vec(hk, R);
    const double agk = cfg.a.dot(ghk);
    if (agk == 0.0 || std::abs(1.0 - a0 / agk) < 1e-14)
      throw numeric_error("debias_ladder: iteration stage: degenerate <a, Gamma^H>");
    ck = (v0 - av / agk) / (1.0 - a0 / agk);
    const int nk = order_at(hk, cfg.n_cap, forced_n);
    double hnew = ht;
    for (int j = 1; j <= nk; ++j) hnew += phi_coef[j] * std::pow(ck, j);
    iters = k;
    const bool done = std::abs(hnew - hk) < cfg.fix_tol;
    hk = hnew;
    if (done) break;
  }
  if (!(hk > 0.0 && hk < 1.0) || !std::isfinite(hk))
    throw numeric_error("debias_ladder: final stage: H left (0,1)");

  const Vec ghf = gamma_vec(hk, R);
  const double cg = cfg.c.dot(ghf);
  if (cg == 0.0 || std::abs(1.0 - cfg.c[0] / cg) < 1e-14)
    throw numeric_error("debias_ladder: final stage: degenerate c weights");
  const double cfin = (v0 - cfg.c.dot(vh) / cg) / (1.0 - cfg.c[0] / cg);
  const double agf = cfg.a.dot(ghf);
  if (agf == 0.0)
    throw numeric_error("debias_ladder: final stage: <a, Gamma^H> vanishes");
  const double pifin = (av / agf - (a0 / agf) * cfin) *
                       std::pow(vs.delta, 1.0 - 2.0 * hk);

  EstimationResult res;
  res.h = hk;
  res.h_tilde = ht;
  res.clamped = inv.clamped;
  res.c_integrated = cfin;
  res.pi_integrated = pifin;
  res.c_not_identifiable = hk <= 0.25;
  res.variant = Variant::lag0_multistep;
  res.iterations_used = iters;
  finish(res);
  if (!std::isfinite(res.c_integrated) || !std::isfinite(res.pi_integrated))
    throw numeric_error("debias_ladder: final stage: non-finite estimate");
  if (with_ci) confidence_intervals(res, vs, w);
  return res;
}

EstimationResult combined_estimate(const VariationStats& vs, const Weights& w) {
  EstimationResult ladder = debias_ladder(vs, w);
  const bool pick_ladder =
      ladder.h_ci.contains(0.5) ||
      (ladder.h_ci.lo > 0.4 && ladder.h_ci.hi < 0.5);
  EstimationResult res =
      pick_ladder ? std::move(ladder) : estimate_no_lag0(vs, w);
  res.picked = pick_ladder ? Variant::lag0_multistep : Variant::no_lag0;
  res.variant = Variant::combined;
  return res;
}

EstimationResult combined_estimate(const PricePath& path, const Weights& w) {
  return combined_estimate(variation_stats(path, w.config().max_lag), w);
}

void confidence_intervals(EstimationResult& res, const VariationStats& vs,
                          const Weights& w) {
  const WeightConfig& cfg = w.config();
  check_sizes(vs, cfg);
  if (!(vs.vhat[0] > 0.0) || !(vs.qhat > 0.0))
    throw numeric_error("confidence_intervals: degenerate variation sums");

  const double hbar = std::clamp(res.h, 1e-4, 0.5 - 1e-6);
  const AsymCovMatrix& covm = chh_matrix(hbar, cfg.max_lag);

  double var_h = 0.0, var_c = 0.0;
  if (res.variant == Variant::no_lag0) {
    var_h = var_h0(cfg.a0, cfg.b0, hbar, covm);
    var_c = var_c_plugin(cfg.a0, cfg.b0, cfg.c_no_lag0(), hbar, covm);
  } else {
    const LadderVariances lv =
        var_ladder(cfg.a, cfg.b, cfg.c, hbar, cfg.m, covm);
    var_h = lv.var_h;
    var_c = lv.var_c;
  }
  if (!(var_h > 0.0) || !(var_c > 0.0) || !std::isfinite(var_h) ||
      !std::isfinite(var_c))
    throw numeric_error("confidence_intervals: degenerate asymptotic variance");

  const double q3 = vs.qhat / 3.0;
  const double half_h = 1.96 * std::sqrt(var_h * q3) / vs.vhat[0];
  const double half_c = 1.96 * std::sqrt(var_c * q3);
  const double half_pi =
      1.96 * std::abs(std::log(vs.delta)) *
      std::sqrt(4.0 * var_h * q3 * std::pow(vs.delta, 2.0 - 4.0 * res.h));

  res.h_ci = {res.h - half_h, res.h + half_h};
  res.c_ci = {res.c_integrated - half_c, res.c_integrated + half_c};
  res.pi_ci = {res.pi_integrated - half_pi, res.pi_integrated + half_pi};
  res.ci_contains_half = res.h_ci.contains(0.5);
}

}  // namespace roughvol
