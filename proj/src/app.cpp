#include "roughvol/app.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "roughvol/rng.hpp"
#include "roughvol/stats.hpp"

namespace roughvol {

namespace {

std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// accepts ISO-8601 date-times (date part required) or plain seconds; returns
// seconds of day, with the date key set for same-session checks
bool parse_timestamp(const std::string& field, double* seconds_of_day,
                     long* date_key) {
  int y = 0, mo = 0, d = 0, hh = 0, mi = 0;
  double ss = 0.0;
  char sep = 0;
  if (std::sscanf(field.c_str(), "%d-%d-%d%c%d:%d:%lf", &y, &mo, &d, &sep, &hh,
                  &mi, &ss) == 7 &&
      (sep == 'T' || sep == ' ' || sep == 't')) {
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || hh < 0 || hh > 23 || mi < 0 ||
        mi > 59 || ss < 0.0 || ss >= 61.0)
      return false;
    *seconds_of_day = hh * 3600.0 + mi * 60.0 + ss;
    *date_key = static_cast<long>(y) * 10000 + mo * 100 + d;
    return true;
  }
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0' || !std::isfinite(v)) return false;
  *seconds_of_day = v < 86400.0 ? v : std::fmod(v, 86400.0);
  *date_key = 0;
  return true;
}

}  // namespace

TickSeries ingest_csv(const std::string& path, double session_open,
                      double session_close) {
  if (!(session_close > session_open))
    throw input_error("ingest_csv: session close must be after open");
  std::ifstream in(path);
  if (!in) throw input_error("ingest_csv: cannot open " + path);

  std::string line;
  long line_no = 0;
  bool have_header = false;
  std::vector<long> bad_lines;
  std::vector<std::pair<double, double>> rows;  // seconds of day, price
  long date_key = -1;
  bool mixed_dates = false;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!have_header) {
      if (lower(t) != "timestamp,price")
        throw input_error("ingest_csv: expected header 'timestamp,price'");
      have_header = true;
      continue;
    }
    const std::size_t comma = t.find(',');
    if (comma == std::string::npos) {
      bad_lines.push_back(line_no);
      continue;
    }
    double tod = 0.0;
    long dk = 0;
    if (!parse_timestamp(trim(t.substr(0, comma)), &tod, &dk)) {
      bad_lines.push_back(line_no);
      continue;
    }
    const std::string pf = trim(t.substr(comma + 1));
    char* end = nullptr;
    const double price = std::strtod(pf.c_str(), &end);
    if (end == pf.c_str() || *end != '\0' || !std::isfinite(price)) {
      bad_lines.push_back(line_no);
      continue;
    }
    if (!(price > 0.0))
      throw input_error("ingest_csv: nonpositive price at line " +
                        std::to_string(line_no));
    if (dk != 0) {
      if (date_key < 0)
        date_key = dk;
      else if (dk != date_key)
        mixed_dates = true;
    }
    rows.emplace_back(tod, price);
  }
  if (!have_header) throw input_error("ingest_csv: empty file " + path);
  if (!bad_lines.empty()) {
    std::string msg = "ingest_csv: unparseable rows at lines";
    const std::size_t show = std::min<std::size_t>(bad_lines.size(), 20);
    for (std::size_t i = 0; i < show; ++i)
      msg += (i ? "," : "") + std::string(" ") + std::to_string(bad_lines[i]);
    if (bad_lines.size() > show) msg += " ...";
    throw input_error(msg);
  }
  if (mixed_dates)
    throw input_error("ingest_csv: timestamps span more than one date");

  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& l, const auto& r) { return l.first < r.first; });

  TickSeries ts;
  ts.session_open = session_open;
  ts.session_close = session_close;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first < session_open || rows[i].first > session_close) {
      ++ts.dropped_rows;
      continue;
    }
    const double rel = rows[i].first - session_open;
    // among duplicate timestamps the file's last row wins
    if (!ts.timestamps.empty() && ts.timestamps.back() == rel) {
      ts.prices.back() = rows[i].second;
      continue;
    }
    ts.timestamps.push_back(rel);
    ts.prices.push_back(rows[i].second);
  }
  if (ts.timestamps.empty())
    throw input_error("ingest_csv: no in-session rows in " + path);
  return ts;
}

PricePath calendar_sample(const TickSeries& ts, double step_seconds) {
  if (!(step_seconds > 0.0))
    throw input_error("calendar_sample: step must be positive");
  if (ts.timestamps.empty())
    throw input_error("calendar_sample: empty tick series");
  const double session = ts.session_close - ts.session_open;
  if (!(session > 0.0))
    throw input_error("calendar_sample: empty session");

  PricePath path;
  path.delta = step_seconds / session;
  path.days = 1;
  std::size_t idx = 0;
  const long kmax = static_cast<long>(std::floor(session / step_seconds + 1e-9));
  for (long k = 0; k <= kmax; ++k) {
    const double g = static_cast<double>(k) * step_seconds;
    while (idx + 1 < ts.timestamps.size() && ts.timestamps[idx + 1] <= g) ++idx;
    if (ts.timestamps[idx] > g) continue;  // before the first tick
    path.values.push_back(std::log(ts.prices[idx]));
  }
  if (path.values.size() < 2)
    throw input_error("calendar_sample: fewer than 2 grid points with data");
  return path;
}

std::vector<RollingDay> rolling_estimate(const std::vector<PricePath>& days,
                                         const Weights& w, int window) {
  if (window < 1) throw input_error("rolling_estimate: window must be >= 1");
  const int R = w.config().max_lag;
  std::vector<VariationStats> daily;
  daily.reserve(days.size());
  for (const PricePath& p : days) daily.push_back(variation_stats(p, R));

  std::vector<RollingDay> out;
  for (std::size_t d = static_cast<std::size_t>(window) - 1; d < daily.size();
       ++d) {
    std::vector<VariationStats> win(daily.begin() + (d + 1 - window),
                                    daily.begin() + (d + 1));
    RollingDay rd;
    rd.day = static_cast<int>(d);
    rd.window = combined_estimate(sum_stats(win), w);
    if (window == 1) {
      rd.c_day = rd.window.c_integrated;
      rd.pi_day = rd.window.pi_integrated;
    } else {
      win.pop_back();
      const EstimationResult head = combined_estimate(sum_stats(win), w);
      rd.c_day = rd.window.c_integrated - head.c_integrated;
      rd.pi_day = rd.window.pi_integrated - head.pi_integrated;
    }
    out.push_back(std::move(rd));
  }
  return out;
}

namespace {

const std::vector<std::string> k_variants = {
    "h_tilde0", "h_hat",      "h_hat0",    "h_hat1",  "h_hat2",
    "h_hat3",   "h_combined", "c_tilde0",  "c_hat",   "c_combined",
    "pi_tilde0", "pi_hat",    "pi_combined", "h_vs",  "h_dms",
    "h_acf"};

struct RepVal {
  double value = 0.0;
  signed char status = 1;   // 0 ok, 1 aborted
  signed char covered = -1; // 1 covered, 0 missed, -1 no interval
};

double variant_truth(const SimConfig& cfg, const std::string& name) {
  const double horizon = static_cast<double>(cfg.days);
  if (name.rfind("c_", 0) == 0) return cfg.integrated_c(horizon);
  if (name.rfind("pi_", 0) == 0) return cfg.integrated_pi(horizon);
  switch (cfg.noise_kind) {
    case NoiseKind::none:
      return 0.5;
    case NoiseKind::white:
      return 0.0;
    case NoiseKind::fbm:
      return cfg.h;
  }
  return cfg.h;
}

// evaluates every requested variant on one simulated path, sharing the
// variation sums and at most one estimation pass per track
void eval_variants(const PricePath& path, const Weights& w,
                   const std::vector<std::string>& variants, double truth_h,
                   double truth_c, double truth_pi, RepVal* out) {
  VariationStats vs;
  bool have_vs = false;
  try {
    vs = variation_stats(path, w.config().max_lag);
    have_vs = true;
  } catch (const std::exception&) {
  }

  std::optional<EstimationResult> no_lag0, ladder, combined;
  std::optional<EstimationResult> forced[4];
  auto get_no_lag0 = [&]() -> const EstimationResult& {
    if (!no_lag0) no_lag0 = estimate_no_lag0(vs, w);
    return *no_lag0;
  };
  auto get_ladder = [&]() -> const EstimationResult& {
    if (!ladder) ladder = debias_ladder(vs, w);
    return *ladder;
  };
  auto get_combined = [&]() -> const EstimationResult& {
    if (!combined) combined = combined_estimate(vs, w);
    return *combined;
  };
  auto get_forced = [&](int i) -> const EstimationResult& {
    if (!forced[i]) forced[i] = debias_ladder(vs, w, i);
    return *forced[i];
  };

  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    const std::string& name = variants[vi];
    RepVal rv;
    try {
      if (!have_vs && name != "h_vs" && name != "h_dms")
        throw numeric_error("variation stats unavailable");
      double value = 0.0;
      double truth = truth_h;
      const Interval* ci = nullptr;
      if (name == "h_tilde0") {
        value = get_no_lag0().h;
        ci = &get_no_lag0().h_ci;
      } else if (name == "h_hat") {
        value = get_ladder().h;
        ci = &get_ladder().h_ci;
      } else if (name == "h_hat0" || name == "h_hat1" || name == "h_hat2" ||
                 name == "h_hat3") {
        const int i = name[5] - '0';
        value = get_forced(i).h;
        ci = &get_forced(i).h_ci;
      } else if (name == "h_combined") {
        value = get_combined().h;
        ci = &get_combined().h_ci;
      } else if (name == "c_tilde0") {
        value = get_no_lag0().c_integrated;
        ci = &get_no_lag0().c_ci;
        truth = truth_c;
      } else if (name == "c_hat") {
        value = get_ladder().c_integrated;
        ci = &get_ladder().c_ci;
        truth = truth_c;
      } else if (name == "c_combined") {
        value = get_combined().c_integrated;
        ci = &get_combined().c_ci;
        truth = truth_c;
      } else if (name == "pi_tilde0") {
        value = get_no_lag0().pi_integrated;
        ci = &get_no_lag0().pi_ci;
        truth = truth_pi;
      } else if (name == "pi_hat") {
        value = get_ladder().pi_integrated;
        ci = &get_ladder().pi_ci;
        truth = truth_pi;
      } else if (name == "pi_combined") {
        value = get_combined().pi_integrated;
        ci = &get_combined().pi_ci;
        truth = truth_pi;
      } else if (name == "h_vs") {
        value = signature_slope(path).h_vs;
      } else if (name == "h_dms") {
        value = h_dms(path);
      } else if (name == "h_acf") {
        value = h_acf(vs);
      } else {
        throw input_error("monte_carlo: unknown variant " + name);
      }
      rv.value = value;
      rv.status = 0;
      if (ci) rv.covered = ci->contains(truth) ? 1 : 0;
    } catch (const std::exception&) {
      rv = RepVal{};
    }
    out[vi] = rv;
  }
}

}  // namespace

const std::vector<std::string>& known_variants() { return k_variants; }

McReport monte_carlo(const std::vector<SimConfig>& grid, const McOptions& opt,
                     const Weights& w) {
  if (grid.empty()) throw input_error("monte_carlo: empty grid");
  if (opt.reps < 1) throw input_error("monte_carlo: reps must be >= 1");
  std::vector<std::string> variants = opt.variants;
  if (variants.empty()) variants = {"h_tilde0", "h_hat3"};
  for (const std::string& v : variants)
    if (std::find(k_variants.begin(), k_variants.end(), v) == k_variants.end())
      throw input_error("monte_carlo: unknown variant " + v);
  for (const SimConfig& cfg : grid) cfg.validate();

  const long reps = opt.reps;
  const std::size_t nv = variants.size();
  const std::size_t ncfg = grid.size();

  // one slot per (config, rep, variant); workers write disjoint slots so the
  // reduction below is a fixed-order walk independent of scheduling
  std::vector<RepVal> slots(ncfg * static_cast<std::size_t>(reps) * nv);

  const long tasks = static_cast<long>(ncfg) * reps;
  std::atomic<long> next{0};
  unsigned hw = std::thread::hardware_concurrency();
  const int n_threads =
      opt.threads > 0 ? opt.threads : static_cast<int>(hw ? hw : 1);

  auto worker = [&] {
    for (;;) {
      const long task = next.fetch_add(1);
      if (task >= tasks) break;
      const std::size_t ci = static_cast<std::size_t>(task / reps);
      const long rep = task % reps;
      SimConfig cfg = grid[ci];
      cfg.seed = derive_seed(opt.master_seed, static_cast<std::uint64_t>(ci),
                             static_cast<std::uint64_t>(rep));
      RepVal* out = slots.data() + (ci * static_cast<std::size_t>(reps) +
                                    static_cast<std::size_t>(rep)) *
                                       nv;
      try {
        const PricePath path = simulate_mixed(cfg);
        const double horizon = static_cast<double>(cfg.days);
        double truth_h = 0.5;
        if (cfg.noise_kind == NoiseKind::fbm) truth_h = cfg.h;
        if (cfg.noise_kind == NoiseKind::white) truth_h = 0.0;
        eval_variants(path, w, variants, truth_h, cfg.integrated_c(horizon),
                      cfg.integrated_pi(horizon), out);
      } catch (const std::exception&) {
        for (std::size_t vi = 0; vi < nv; ++vi) out[vi] = RepVal{};
      }
    }
  };

  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  McReport report;
  report.master_seed = opt.master_seed;
  report.reps = reps;
  for (std::size_t ci = 0; ci < ncfg; ++ci) {
    for (std::size_t vi = 0; vi < nv; ++vi) {
      McCell cell;
      cell.config = grid[ci];
      cell.variant = variants[vi];
      cell.truth = variant_truth(grid[ci], variants[vi]);
      cell.reps = reps;

      double sum = 0.0;
      long n_ci = 0, covered = 0;
      for (long rep = 0; rep < reps; ++rep) {
        const RepVal& rv =
            slots[(ci * static_cast<std::size_t>(reps) +
                   static_cast<std::size_t>(rep)) *
                      nv +
                  vi];
        if (rv.status != 0) {
          ++cell.aborted;
          continue;
        }
        ++cell.ok;
        sum += rv.value;
        if (rv.covered >= 0) {
          ++n_ci;
          covered += rv.covered;
        }
      }
      if (cell.ok > 0) {
        const double k = static_cast<double>(cell.ok);
        cell.mean = sum / k;
        cell.bias = cell.mean - cell.truth;
        double ss_mean = 0.0, ss_err = 0.0, s4_err = 0.0;
        for (long rep = 0; rep < reps; ++rep) {
          const RepVal& rv =
              slots[(ci * static_cast<std::size_t>(reps) +
                     static_cast<std::size_t>(rep)) *
                        nv +
                    vi];
          if (rv.status != 0) continue;
          const double dm = rv.value - cell.mean;
          ss_mean += dm * dm;
          const double de = rv.value - cell.truth;
          ss_err += de * de;
          s4_err += de * de * de * de;
        }
        const double var_pop = ss_mean / k;
        const double mse = ss_err / k;
        cell.rmse = std::sqrt(mse);
        cell.mc_se = std::sqrt(var_pop / k);
        const double var_mse = s4_err / k - mse * mse;
        if (cell.rmse > 0.0 && var_mse > 0.0)
          cell.rmse_se = std::sqrt(var_mse / k) / (2.0 * cell.rmse);
      }
      cell.coverage = n_ci > 0 ? static_cast<double>(covered) /
                                     static_cast<double>(n_ci)
                               : -1.0;
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

namespace {

const char* noise_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::fbm:
      return "fbm";
    case NoiseKind::white:
      return "white";
    case NoiseKind::none:
      return "none";
  }
  return "fbm";
}

NoiseKind noise_from_name(const std::string& s) {
  if (s == "fbm") return NoiseKind::fbm;
  if (s == "white") return NoiseKind::white;
  if (s == "none") return NoiseKind::none;
  throw input_error("unknown noise kind: " + s);
}

}  // namespace

std::string McReport::to_csv() const {
  std::ostringstream os;
  os << "# roughvol montecarlo reps=" << reps << " master_seed=" << master_seed
     << "\n";
  os << "h,sigma,rho,drift,n,days,noise,variant,truth,reps,ok,aborted,mean,"
        "bias,rmse,rmse_se,mc_se,coverage\n";
  for (const McCell& c : cells) {
    os << fmt_g(c.config.h) << ',' << fmt_g(c.config.sigma) << ','
       << fmt_g(c.config.rho) << ',' << fmt_g(c.config.drift) << ','
       << c.config.n << ',' << c.config.days << ','
       << noise_name(c.config.noise_kind) << ',' << c.variant << ','
       << fmt_g(c.truth) << ',' << c.reps << ',' << c.ok << ',' << c.aborted
       << ',' << fmt_g(c.mean) << ',' << fmt_g(c.bias) << ',' << fmt_g(c.rmse)
       << ',' << fmt_g(c.rmse_se) << ',' << fmt_g(c.mc_se) << ','
       << fmt_g(c.coverage) << "\n";
  }
  return os.str();
}

void write_path_csv(const PricePath& path, const SimConfig& cfg,
                    const std::string& out_path) {
  std::ofstream out(out_path);
  if (!out) throw input_error("write_path_csv: cannot open " + out_path);
  out << "time,logprice\n";
  for (std::size_t i = 0; i < path.values.size(); ++i)
    out << fmt_g(static_cast<double>(i) * path.delta) << ','
        << fmt_g(path.values[i]) << "\n";
  std::ofstream side(out_path + ".json");
  if (!side) throw input_error("write_path_csv: cannot open sidecar");
  side << sim_config_to_json(cfg) << "\n";
}

PricePath read_path_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw input_error("read_path_csv: cannot open " + file);
  std::string line;
  if (!std::getline(in, line) || trim(lower(line)) != "time,logprice")
    throw input_error("read_path_csv: expected header 'time,logprice'");
  std::vector<double> times, values;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::size_t comma = t.find(',');
    if (comma == std::string::npos)
      throw input_error("read_path_csv: bad row at line " +
                        std::to_string(line_no));
    try {
      times.push_back(std::stod(t.substr(0, comma)));
      values.push_back(std::stod(t.substr(comma + 1)));
    } catch (const std::exception&) {
      throw input_error("read_path_csv: bad row at line " +
                        std::to_string(line_no));
    }
  }
  if (values.size() < 2)
    throw input_error("read_path_csv: fewer than 2 rows");
  PricePath path;
  path.values = std::move(values);
  path.delta = times[1] - times[0];
  if (!(path.delta > 0.0))
    throw input_error("read_path_csv: nonincreasing time column");
  const double horizon = path.delta * static_cast<double>(path.values.size() - 1);
  path.days = std::max(1, static_cast<int>(std::lround(horizon)));
  return path;
}

std::string sim_config_to_json(const SimConfig& cfg) {
  nlohmann::json j;
  j["h"] = cfg.h;
  j["sigma"] = cfg.sigma;
  j["rho"] = cfg.rho;
  j["drift"] = cfg.drift;
  j["n"] = cfg.n;
  j["days"] = cfg.days;
  j["seed"] = cfg.seed;
  j["noise"] = noise_name(cfg.noise_kind);
  auto steps = [](const std::vector<std::pair<double, double>>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : v) arr.push_back({s.first, s.second});
    return arr;
  };
  if (!cfg.sigma_steps.empty()) j["sigma_steps"] = steps(cfg.sigma_steps);
  if (!cfg.rho_steps.empty()) j["rho_steps"] = steps(cfg.rho_steps);
  return j.dump(2);
}

SimConfig sim_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("sim config json: parse error: ") + e.what());
  }
  SimConfig cfg;
  try {
    if (j.contains("h")) cfg.h = j.at("h").get<double>();
    if (j.contains("sigma")) cfg.sigma = j.at("sigma").get<double>();
    if (j.contains("rho")) cfg.rho = j.at("rho").get<double>();
    if (j.contains("drift")) cfg.drift = j.at("drift").get<double>();
    if (j.contains("n")) cfg.n = j.at("n").get<int>();
    if (j.contains("days")) cfg.days = j.at("days").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("noise"))
      cfg.noise_kind = noise_from_name(j.at("noise").get<std::string>());
    auto steps = [](const nlohmann::json& arr) {
      std::vector<std::pair<double, double>> v;
      for (const auto& e : arr)
        v.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
      return v;
    };
    if (j.contains("sigma_steps")) cfg.sigma_steps = steps(j.at("sigma_steps"));
    if (j.contains("rho_steps")) cfg.rho_steps = steps(j.at("rho_steps"));
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("sim config json: bad field: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace roughvol
