#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "roughvol/kernel.hpp"

namespace roughvol {

enum class NoiseKind { fbm, white, none };

// mixed-path generator parameters; times are in trading days, sigma/rho are
// per sqrt(day), n observations per day so the grid spacing is 1/n
struct SimConfig {
  double h = 0.35;
  double sigma = 0.01;
  double rho = 0.001;
  double drift = 0.0;
  int n = 23400;
  int days = 1;
  std::uint64_t seed = 1;
  NoiseKind noise_kind = NoiseKind::fbm;
  // optional piecewise-constant schedules (start time in days, value);
  // first breakpoint must be 0; empty means the scalar applies throughout
  std::vector<std::pair<double, double>> sigma_steps;
  std::vector<std::pair<double, double>> rho_steps;

  void validate() const;
  double sigma_at(double t) const;
  double rho_at(double t) const;
  double integrated_c(double t) const;   // int_0^t sigma(s)^2 ds
  double integrated_pi(double t) const;  // int_0^t rho(s)^2 ds, 0 if no noise
};

struct PricePath {
  double delta = 0.0;          // grid spacing in days
  std::vector<double> values;  // log prices, length n*days + 1
  int days = 1;
  double horizon() const {
    return delta * static_cast<double>(values.size() - 1);
  }
};

// exact fractional Gaussian increments on a grid with spacing delta (unit
// volatility: each increment ~ N(0, delta^{2H})), by circulant embedding;
// one forward FFT per draw, the embedding spectrum is cached per (h, size)
std::vector<double> fbm_increments(double h, long n_total, double delta,
                                   std::uint64_t seed);

// O(n^3) dense-factorization reference sampler, n_total <= 2048
std::vector<double> fbm_increments_cholesky(double h, long n_total,
                                            double delta, std::uint64_t seed);

PricePath simulate_mixed(const SimConfig& cfg);

}  // namespace roughvol
