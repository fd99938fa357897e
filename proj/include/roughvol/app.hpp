#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "roughvol/estimate.hpp"
#include "roughvol/simulate.hpp"
#include "roughvol/tune.hpp"

namespace roughvol {

// one trading session of raw ticks; timestamps are seconds of day inside
// [session_open, session_close], strictly increasing after ingestion
struct TickSeries {
  std::vector<double> timestamps;
  std::vector<double> prices;
  double session_open = 32400.0;   // 9:00
  double session_close = 57600.0;  // 16:00
  long dropped_rows = 0;           // out-of-session rows discarded on ingest
};

// reads a `timestamp,price` csv; timestamps are ISO-8601 datetimes or plain
// seconds; duplicate timestamps keep the last row, out-of-session rows are
// dropped and counted, malformed rows or nonpositive prices abort
TickSeries ingest_csv(const std::string& path, double session_open,
                      double session_close);

// previous-tick interpolation of log prices onto the fixed calendar grid
// open + k*step; grid points before the first tick are excluded, so the
// path may start later than the session open; delta is step/session length
PricePath calendar_sample(const TickSeries& ts, double step_seconds);

struct RollingDay {
  int day = 0;                 // index of the window's last day
  EstimationResult window;     // estimate over the trailing window
  double c_day = 0.0;          // last-day share of the integrated estimates
  double pi_day = 0.0;
};

// trailing-window estimation over per-day paths; day-d integrated values are
// reported as the difference between the window estimate and the estimate
// over the same window without its last day
std::vector<RollingDay> rolling_estimate(const std::vector<PricePath>& days,
                                         const Weights& w, int window = 20);

struct McCell {
  SimConfig config;
  std::string variant;
  double truth = 0.0;
  long reps = 0;
  long ok = 0;
  long aborted = 0;
  double mean = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double rmse_se = 0.0;   // delta-method standard error of the rmse
  double mc_se = 0.0;     // standard error of the mean
  double coverage = -1.0; // fraction of CIs covering the truth, -1 if none
};

struct McReport {
  std::vector<McCell> cells;
  std::uint64_t master_seed = 0;
  long reps = 0;
  std::string to_csv() const;
};

struct McOptions {
  long reps = 500;
  std::uint64_t master_seed = 1;
  int threads = 0;  // 0 means hardware concurrency
  std::vector<std::string> variants;
};

// replicated simulation study over a grid of configurations; per-replication
// seeds derive from (master_seed, config index, rep), so results are
// byte-identical for any thread count; estimator aborts are counted per cell
McReport monte_carlo(const std::vector<SimConfig>& grid, const McOptions& opt,
                     const Weights& w);

const std::vector<std::string>& known_variants();

// csv helpers for simulated paths (`time,logprice` with a json sidecar)
void write_path_csv(const PricePath& path, const SimConfig& cfg,
                    const std::string& out_path);
PricePath read_path_csv(const std::string& path);

std::string sim_config_to_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const std::string& text);

}  // namespace roughvol
