#pragma once

#include <vector>

#include "roughvol/kernel.hpp"

namespace roughvol {

struct AsymCovMatrix {
  double h = 0.0;
  int max_lag = 0;
  Eigen::MatrixXd entries;   // (R+1) x (R+1), symmetric PSD
  long truncation_lag = 0;   // where the infinite sum was cut
  double tail_bound = 0.0;   // analytic bound on the discarded mass per entry
};

// limiting covariance of the lag vector, entry (i,j) =
//   G_|i-j| + G_i G_j + sum_{r>=1} ( G_r G_|i-j+r| + G_|r-j| G_{i+r}
//                                  + G_r G_|j-i+r| + G_|r-i| G_{j+r} )
// truncated once every summand magnitude drops below tol (hard cap 1e6)
AsymCovMatrix chh_matrix_uncached(double h, int max_lag, double tol = 1e-12);

// memoized variant; the reference stays valid for the program lifetime and
// concurrent readers are safe
const AsymCovMatrix& chh_matrix(double h, int max_lag, double tol = 1e-12);

// asymptotic variance of the plain ratio estimator of H
double var_h0(const Vec& a, const Vec& b, double h, const AsymCovMatrix& covm);
double var_h0(int max_lag, const Vec& a, const Vec& b, double h);

// asymptotic variance of the one-shot C estimator on the no-lag-0 track
double var_c_plugin(const Vec& a, const Vec& b, const Vec& c, double h,
                    const AsymCovMatrix& covm);
double var_c_plugin(int max_lag, const Vec& a, const Vec& b, const Vec& c,
                    double h);

struct LadderVariances {
  std::vector<double> var_h_k;  // k = 1..m
  std::vector<double> var_c_k;
  double var_h = 0.0;  // var_h_k[m-1]
  double var_c = 0.0;  // final variance with the c vector
};

// variances along the iterated bias-correction scheme (lag-0 track, b_0 = 0)
LadderVariances var_ladder(const Vec& a, const Vec& b, const Vec& c, double h,
                           int m, const AsymCovMatrix& covm);
LadderVariances var_ladder(int max_lag, const Vec& a, const Vec& b,
                           const Vec& c, double h, int m = 50);

}  // namespace roughvol
