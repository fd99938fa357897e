#pragma once

#include <functional>
#include <string>

#include "roughvol/estimate.hpp"

namespace roughvol {

// orthonormal default weights anchored at a reference roughness h0: b along
// the kernel's H-sensitivity direction, a = c along the kernel itself with
// the b component projected out, no-lag-0 copies renormalized after zeroing
WeightConfig initial_weights(double h0, int max_lag);

struct NmOptions {
  double tol = 1e-8;
  int max_iter = 0;       // 0 means 200 * dimension
  double init_step = 0.5; // per-coordinate displacement of the start simplex
};

struct NmResult {
  Vec x;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
};

// derivative-free downhill simplex minimization; non-finite objective values
// are treated as +inf so the simplex contracts away from them
NmResult nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0,
                     const NmOptions& opt = {});

enum class Track { lag0, no_lag0 };

struct TuneResult {
  WeightConfig config;
  bool optimized = false;
  double objective_initial = 0.0;
  double objective_final = 0.0;
};

// minimizes the asymptotic variance of the integrated-variance estimator on
// the chosen track over normalized weight vectors; falls back to the initial
// weights (optimized = false) if the search aborts or fails to improve
TuneResult optimize_weights(double h0, int max_lag, Track track);

// same, but consults/updates a JSON artifact directory when dir is nonempty
TuneResult optimize_weights_cached(double h0, int max_lag, Track track,
                                   const std::string& dir);

// value of the ROUGHVOL_WEIGHTS_DIR environment variable, or empty
std::string default_weights_dir();

std::string weight_config_to_json(const WeightConfig& wc);
WeightConfig weight_config_from_json(const std::string& text);
void save_weight_config(const WeightConfig& wc, const std::string& path);
WeightConfig load_weight_config(const std::string& path);

}  // namespace roughvol
