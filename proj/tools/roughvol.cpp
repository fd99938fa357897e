#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "roughvol/app.hpp"
#include "roughvol/estimate.hpp"
#include "roughvol/simulate.hpp"
#include "roughvol/stats.hpp"
#include "roughvol/tune.hpp"

namespace {

using namespace roughvol;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw input_error("cannot open " + path);
  out << text;
}

std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double parse_time_of_day(const std::string& s) {
  int h = 0, m = 0;
  double sec = 0.0;
  if (std::sscanf(s.c_str(), "%d:%d:%lf", &h, &m, &sec) == 3)
    return h * 3600.0 + m * 60.0 + sec;
  if (std::sscanf(s.c_str(), "%d:%d", &h, &m) == 2) return h * 3600.0 + m * 60.0;
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw input_error("cannot parse time of day: " + s);
  }
}

// merges per-track tuning results (or a weights file) into one runtime object
Weights build_weights(double h0, int max_lag, bool tuned,
                      const std::string& weights_file) {
  if (!weights_file.empty()) return Weights(load_weight_config(weights_file));
  if (!tuned) return Weights(initial_weights(h0, max_lag));
  const std::string dir = default_weights_dir();
  WeightConfig wc =
      optimize_weights_cached(h0, max_lag, Track::lag0, dir).config;
  const WeightConfig nl =
      optimize_weights_cached(h0, max_lag, Track::no_lag0, dir).config;
  wc.a0 = nl.a0;
  wc.b0 = nl.b0;
  wc.c0 = nl.c0;
  return Weights(std::move(wc));
}

nlohmann::json interval_json(const Interval& iv) {
  return {{"lo", iv.lo}, {"hi", iv.hi}};
}

std::string result_json(const EstimationResult& r, const VariationStats& vs) {
  nlohmann::json j;
  j["h"] = r.h;
  j["h_tilde"] = r.h_tilde;
  j["c_integrated"] = r.c_integrated;
  j["pi_integrated"] = r.pi_integrated;
  j["c_clamped"] = r.c_clamped;
  j["pi_clamped"] = r.pi_clamped;
  j["h_ci"] = interval_json(r.h_ci);
  j["c_ci"] = interval_json(r.c_ci);
  j["pi_ci"] = interval_json(r.pi_ci);
  switch (r.variant) {
    case Variant::no_lag0:
      j["variant"] = "no_lag0";
      break;
    case Variant::lag0_multistep:
      j["variant"] = "lag0_multistep";
      break;
    case Variant::combined:
      j["variant"] = "combined";
      j["picked"] =
          r.picked == Variant::lag0_multistep ? "lag0_multistep" : "no_lag0";
      break;
  }
  j["iterations_used"] = r.iterations_used;
  j["flags"] = {{"clamped", r.clamped},
                {"negative_c", r.negative_c},
                {"negative_pi", r.negative_pi},
                {"ci_contains_half", r.ci_contains_half},
                {"c_not_identifiable", r.c_not_identifiable}};
  j["n_obs"] = vs.n_obs;
  j["delta"] = vs.delta;
  j["t"] = vs.t;
  return j.dump(2);
}

int run(int argc, char** argv) {
  CLI::App app{"mixed-semimartingale roughness and volatility toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  int threads = 0;
  std::string config_path, out_path;
  app.add_option("--seed", seed, "master seed");
  app.add_option("--threads", threads, "worker threads (0 = all cores)");
  app.add_option("--config", config_path, "json configuration file");
  app.add_option("--out", out_path, "output path ('-' for stdout)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "draw one mixed path to csv");
  double s_h = 0.35, s_sigma = 0.01, s_rho = 0.001, s_drift = 0.0;
  int s_n = 23400, s_days = 1;
  std::string s_noise = "fbm";
  sim->add_option("--hurst", s_h, "roughness of the noise");
  sim->add_option("--sigma", s_sigma, "price volatility");
  sim->add_option("--rho", s_rho, "noise volatility");
  sim->add_option("--drift", s_drift, "linear drift");
  sim->add_option("--n", s_n, "observations per day");
  sim->add_option("--days", s_days, "number of days");
  sim->add_option("--noise", s_noise, "noise kind: fbm|white|none");

  // estimate
  auto* est = app.add_subcommand("estimate", "estimate H, C, Pi from a path csv");
  std::string e_in, e_variant = "combined", e_weights;
  double e_h0 = 0.35;
  int e_maxlag = 60, e_forced = -1;
  bool e_tuned = false;
  est->add_option("--in", e_in, "path csv (time,logprice)")->required();
  est->add_option("--variant", e_variant, "no_lag0|ladder|combined");
  est->add_option("--forced-n", e_forced, "fixed correction order for ladder");
  est->add_option("--weights", e_weights, "weight config json");
  est->add_option("--h0", e_h0, "anchor roughness for default weights");
  est->add_option("--max-lag", e_maxlag, "weight vector length minus one");
  est->add_flag("--tuned", e_tuned, "use variance-optimized weights");

  // signature
  auto* sig = app.add_subcommand("signature", "signature-plot statistics");
  std::string g_in;
  int g_imax = 20;
  sig->add_option("--in", g_in, "path csv (time,logprice)")->required();
  sig->add_option("--imax", g_imax, "coarsest subsampling step");

  // montecarlo
  auto* mc = app.add_subcommand("montecarlo", "replicated simulation study");
  long m_reps = 0;
  mc->add_option("--reps", m_reps, "replications per cell");

  // tune
  auto* tn = app.add_subcommand("tune", "optimize weights for a track");
  double t_h0 = 0.35;
  int t_maxlag = 60;
  std::string t_track = "lag0";
  tn->add_option("--h0", t_h0, "anchor roughness");
  tn->add_option("--max-lag", t_maxlag, "weight vector length minus one");
  tn->add_option("--track", t_track, "lag0|no_lag0");

  // ingest
  auto* ing = app.add_subcommand("ingest", "tick csv to calendar-sampled path");
  std::string i_in, i_open = "09:00:00", i_close = "16:00:00";
  double i_step = 5.0;
  ing->add_option("--in", i_in, "tick csv (timestamp,price)")->required();
  ing->add_option("--open", i_open, "session open (HH:MM:SS or seconds)");
  ing->add_option("--close", i_close, "session close (HH:MM:SS or seconds)");
  ing->add_option("--step", i_step, "grid step in seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (sim->parsed()) {
    SimConfig cfg;
    if (!config_path.empty()) cfg = sim_config_from_json(read_file(config_path));
    if (sim->count("--hurst")) cfg.h = s_h;
    if (sim->count("--sigma")) cfg.sigma = s_sigma;
    if (sim->count("--rho")) cfg.rho = s_rho;
    if (sim->count("--drift")) cfg.drift = s_drift;
    if (sim->count("--n")) cfg.n = s_n;
    if (sim->count("--days")) cfg.days = s_days;
    if (sim->count("--noise")) {
      if (s_noise == "fbm")
        cfg.noise_kind = NoiseKind::fbm;
      else if (s_noise == "white")
        cfg.noise_kind = NoiseKind::white;
      else if (s_noise == "none")
        cfg.noise_kind = NoiseKind::none;
      else
        throw input_error("unknown noise kind: " + s_noise);
    }
    if (app.count("--seed")) cfg.seed = seed;
    if (out_path.empty()) throw input_error("simulate: --out is required");
    const PricePath path = simulate_mixed(cfg);
    write_path_csv(path, cfg, out_path);
    std::cerr << "wrote " << path.values.size() << " observations to "
              << out_path << "\n";
    return 0;
  }

  if (est->parsed()) {
    const PricePath path = read_path_csv(e_in);
    const Weights w = build_weights(e_h0, e_maxlag, e_tuned, e_weights);
    const VariationStats vs = variation_stats(path, w.config().max_lag);
    EstimationResult res;
    if (e_variant == "no_lag0")
      res = estimate_no_lag0(vs, w);
    else if (e_variant == "ladder")
      res = debias_ladder(vs, w, e_forced);
    else if (e_variant == "combined")
      res = combined_estimate(vs, w);
    else
      throw input_error("unknown variant: " + e_variant);
    write_file(out_path, result_json(res, vs) + "\n");
    return 0;
  }

  if (sig->parsed()) {
    const PricePath path = read_path_csv(g_in);
    const SlopeFit rv_fit = signature_slope(path, g_imax);
    const SlopeFit var_fit = variance_slope(path, g_imax);
    std::ostringstream os;
    os << "# rv_slope=" << fmt_g(rv_fit.slope) << " h_vs=" << fmt_g(rv_fit.h_vs)
       << "\n";
    os << "# var_slope=" << fmt_g(var_fit.slope) << "\n";
    os << "i,rv,var\n";
    for (int i = 1; i <= g_imax; ++i) {
      const double rv = rv_subsampled(path, i);
      double var = std::nan("");
      const double li = std::log(static_cast<double>(i));
      for (const auto& p : var_fit.points)
        if (std::abs(p.first - li) < 1e-12) {
          var = std::exp(p.second);
          break;
        }
      os << i << ',' << fmt_g(rv) << ',' << fmt_g(var) << "\n";
    }
    write_file(out_path, os.str());
    return 0;
  }

  if (mc->parsed()) {
    if (config_path.empty())
      throw input_error("montecarlo: --config is required");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(config_path));
    } catch (const nlohmann::json::exception& e) {
      throw input_error(std::string("montecarlo config: ") + e.what());
    }
    std::vector<SimConfig> grid;
    if (!j.contains("grid") || !j["grid"].is_array() || j["grid"].empty())
      throw input_error("montecarlo config: nonempty 'grid' array required");
    for (const auto& el : j["grid"])
      grid.push_back(sim_config_from_json(el.dump()));
    McOptions opt;
    if (j.contains("reps")) opt.reps = j["reps"].get<long>();
    if (j.contains("master_seed"))
      opt.master_seed = j["master_seed"].get<std::uint64_t>();
    if (j.contains("threads")) opt.threads = j["threads"].get<int>();
    if (j.contains("variants"))
      opt.variants = j["variants"].get<std::vector<std::string>>();
    if (m_reps > 0) opt.reps = m_reps;
    if (app.count("--seed")) opt.master_seed = seed;
    if (app.count("--threads")) opt.threads = threads;

    double w_h0 = 0.35;
    int w_maxlag = 60;
    bool w_tuned = false;
    std::string w_file;
    if (j.contains("weights")) {
      const auto& wj = j["weights"];
      if (wj.contains("h0")) w_h0 = wj["h0"].get<double>();
      if (wj.contains("max_lag")) w_maxlag = wj["max_lag"].get<int>();
      if (wj.contains("tuned")) w_tuned = wj["tuned"].get<bool>();
      if (wj.contains("file")) w_file = wj["file"].get<std::string>();
    }
    const Weights w = build_weights(w_h0, w_maxlag, w_tuned, w_file);
    const McReport report = monte_carlo(grid, opt, w);
    write_file(out_path, report.to_csv());
    return 0;
  }

  if (tn->parsed()) {
    const Track track = t_track == "lag0" ? Track::lag0
                        : t_track == "no_lag0"
                            ? Track::no_lag0
                            : throw input_error("unknown track: " + t_track);
    const TuneResult res =
        optimize_weights_cached(t_h0, t_maxlag, track, default_weights_dir());
    if (!out_path.empty() && out_path != "-")
      save_weight_config(res.config, out_path);
    else
      std::cout << weight_config_to_json(res.config) << "\n";
    std::cerr << "optimized=" << (res.optimized ? "yes" : "no")
              << " objective " << fmt_g(res.objective_initial) << " -> "
              << fmt_g(res.objective_final) << "\n";
    return 0;
  }

  if (ing->parsed()) {
    const double open = parse_time_of_day(i_open);
    const double close = parse_time_of_day(i_close);
    const TickSeries ts = ingest_csv(i_in, open, close);
    const PricePath path = calendar_sample(ts, i_step);
    std::ostringstream os;
    os << "time,logprice\n";
    for (std::size_t k = 0; k < path.values.size(); ++k)
      os << fmt_g(static_cast<double>(k) * path.delta) << ','
         << fmt_g(path.values[k]) << "\n";
    write_file(out_path, os.str());
    std::cerr << "kept " << ts.timestamps.size() << " ticks, dropped "
              << ts.dropped_rows << " out-of-session rows\n";
    return 0;
  }

  throw input_error("no subcommand given");
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const roughvol::input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const roughvol::numeric_error& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
