#pragma once

#include <vector>

#include "roughvol/simulate.hpp"

namespace roughvol {

// lagged quadratic variation sums of one contiguous stretch of observations;
// sums over several stretches (e.g. trading days) are combined with
// sum_stats so that no increment ever straddles a stretch boundary
struct VariationStats {
  std::vector<double> vhat;  // lag 0..R autocovariation sums
  double qhat = 0.0;         // sum of fourth powers of increments
  long n_obs = 0;            // number of increments
  double delta = 0.0;        // grid spacing in days
  double t = 0.0;            // total horizon in days
};

VariationStats variation_stats(const PricePath& path, int max_lag);
VariationStats sum_stats(const std::vector<VariationStats>& parts);

// realized variance of every i-th observation, offsets anchored at index 0
double rv_subsampled(const PricePath& path, int i);

struct SlopeFit {
  double slope = 0.0;
  double h_vs = 0.5;  // (slope+1)/2 clamped to [0,1]
  std::vector<std::pair<double, double>> points;  // (log i, log value)
};

// log-log regression of subsampled realized variance on the sparsity i
SlopeFit signature_slope(const PricePath& path, int i_max = 20);

// log-log regression of the sample variance of i-spaced increments on i;
// slope near 2H for fractional noise, near 0 for iid noise
SlopeFit variance_slope(const PricePath& path, int i_max = 20);

// studentized statistic comparing adjacent-increment covariation against the
// iid-noise null; approximately standard normal under white noise
double white_noise_stat(const PricePath& path);

// moment-ratio roughness estimates from autocovariation and from
// coarse/fine realized-variance differences
double h_acf(const VariationStats& vs);
double h_dms(const PricePath& path);

}  // namespace roughvol
