#pragma once

#include <optional>

#include "roughvol/asymvar.hpp"
#include "roughvol/kernel.hpp"
#include "roughvol/stats.hpp"

namespace roughvol {

// weight vectors for both estimation tracks plus ladder controls; the first
// track keeps the lag-0 entry in a (b[0] must vanish), the second zeroes the
// lag-0 entries of both filter vectors so the noise ratio is pivotal
struct WeightConfig {
  int max_lag = 60;
  Vec a, b, c;
  Vec a0, b0;
  std::optional<Vec> c0;  // c used on the no-lag-0 track; defaults to c
  int m = 50;
  double fix_tol = 1e-5;
  int n_cap = 3;

  void validate() const;
  const Vec& c_no_lag0() const { return c0 ? *c0 : c; }
};

// validated runtime form; the two ratio functions (with their monotonicity
// scans) are built once so repeated estimation calls stay cheap
class Weights {
 public:
  explicit Weights(WeightConfig cfg);
  const WeightConfig& config() const { return cfg_; }
  const RatioFunction& rf() const { return rf_; }     // lag-0 track
  const RatioFunction& rf0() const { return rf0_; }   // no-lag-0 track

 private:
  WeightConfig cfg_;
  RatioFunction rf_;
  RatioFunction rf0_;
};

enum class Variant { no_lag0, lag0_multistep, combined };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return lo <= x && x <= hi; }
};

struct EstimationResult {
  double h = 0.0;
  double c_integrated = 0.0;
  double pi_integrated = 0.0;
  double c_clamped = 0.0;   // negative-part-truncated copies
  double pi_clamped = 0.0;
  Interval h_ci, c_ci, pi_ci;
  Variant variant = Variant::no_lag0;
  Variant picked = Variant::no_lag0;  // track chosen by combined_estimate
  int iterations_used = 0;
  double h_tilde = 0.0;  // uncorrected ratio inversion on the same track
  bool clamped = false;
  bool negative_c = false;
  bool negative_pi = false;
  bool ci_contains_half = false;
  bool c_not_identifiable = false;
};

// ratio inversion of the variation sums through a prepared ratio function
InvertResult h_tilde(const VariationStats& vs, const RatioFunction& rf);

struct PluginEstimates {
  double c_hat = 0.0;
  double pi_hat = 0.0;
  bool not_identifiable = false;
};

// one-shot volatility estimates at an externally supplied roughness value
PluginEstimates estimators_plugin(const VariationStats& vs,
                                  const RatioFunction& rf0, const Vec& c,
                                  double h_est);

EstimationResult estimate_no_lag0(const VariationStats& vs, const Weights& w,
                                  bool with_ci = true);

// multi-step debiased estimation on the lag-0 track; forced_n >= 0 replaces
// the adaptive correction order everywhere by that fixed order
EstimationResult debias_ladder(const VariationStats& vs, const Weights& w,
                               int forced_n = -1, bool with_ci = true);

// runs both tracks and keeps the ladder only when its roughness interval
// is consistent with near-Brownian noise
EstimationResult combined_estimate(const VariationStats& vs, const Weights& w);
EstimationResult combined_estimate(const PricePath& path, const Weights& w);

// fills h_ci/c_ci/pi_ci of res from the plug-in asymptotic variances
void confidence_intervals(EstimationResult& res, const VariationStats& vs,
                          const Weights& w);

}  // namespace roughvol
