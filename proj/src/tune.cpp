#include "roughvol/tune.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "json.hpp"

#include "roughvol/asymvar.hpp"

namespace roughvol {

WeightConfig initial_weights(double h0, int max_lag) {
  if (max_lag < 1) throw input_error("initial_weights: max_lag must be >= 1");
  const Vec g = gamma_vec(h0, max_lag);
  const Vec dg = dgamma_vec(h0, max_lag, 1);
  const double ndg = dg.norm();
  if (!(ndg > 0.0)) throw numeric_error("initial_weights: zero-norm direction");
  WeightConfig wc;
  wc.max_lag = max_lag;
  wc.b = dg / ndg;
  Vec resid = g - g.dot(wc.b) * wc.b;
  const double nr = resid.norm();
  if (!(nr > 0.0)) throw numeric_error("initial_weights: zero-norm residual");
  wc.a = resid / nr;
  wc.c = wc.a;

  Vec a0 = wc.a;
  a0[0] = 0.0;
  const double na0 = a0.norm();
  if (!(na0 > 0.0)) throw numeric_error("initial_weights: zero-norm a0");
  wc.a0 = a0 / na0;
  wc.b0 = wc.b;  // lag-0 entry already vanishes
  wc.c0 = wc.a0;
  return wc;
}

NmResult nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0,
                     const NmOptions& opt) {
  const int d = static_cast<int>(x0.size());
  if (d < 1) throw input_error("nelder_mead: empty initial point");
  if (!(opt.tol > 0.0)) throw input_error("nelder_mead: tol must be > 0");
  if (!(opt.init_step != 0.0) || !std::isfinite(opt.init_step))
    throw input_error("nelder_mead: init_step must be nonzero and finite");
  const int max_iter = opt.max_iter > 0 ? opt.max_iter : 200 * d;
  const double inf = std::numeric_limits<double>::infinity();

  auto eval = [&f, inf](const Vec& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : inf;
  };

  const double f0 = f(x0);
  if (!std::isfinite(f0))
    throw input_error("nelder_mead: objective not finite at the initial point");

  std::vector<Vec> xs(static_cast<std::size_t>(d) + 1, x0);
  std::vector<double> fs(static_cast<std::size_t>(d) + 1, f0);
  for (int i = 0; i < d; ++i) {
    Vec& v = xs[static_cast<std::size_t>(i) + 1];
    v[i] += opt.init_step;
    fs[static_cast<std::size_t>(i) + 1] = eval(v);
  }

  std::vector<int> idx(static_cast<std::size_t>(d) + 1);
  auto order = [&] {
    for (int i = 0; i <= d; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&fs](int l, int r) { return fs[static_cast<std::size_t>(l)] < fs[static_cast<std::size_t>(r)]; });
  };

  int iters = 0;
  bool converged = false;
  while (iters < max_iter) {
    order();
    const int best = idx[0];
    const int worst = idx[static_cast<std::size_t>(d)];
    const int second = idx[static_cast<std::size_t>(d) - 1];

    double dx = 0.0, df = 0.0;
    for (int i = 1; i <= d; ++i) {
      const int j = idx[static_cast<std::size_t>(i)];
      dx = std::max(dx, (xs[static_cast<std::size_t>(j)] - xs[static_cast<std::size_t>(best)]).cwiseAbs().maxCoeff());
      if (std::isfinite(fs[static_cast<std::size_t>(j)]))
        df = std::max(df, fs[static_cast<std::size_t>(j)] - fs[static_cast<std::size_t>(best)]);
      else
        df = inf;
    }
    if (dx <= opt.tol && df <= opt.tol) {
      converged = true;
      break;
    }
    ++iters;

    Vec centroid = Vec::Zero(d);
    for (int i = 0; i <= d; ++i)
      if (i != worst) centroid += xs[static_cast<std::size_t>(i)];
    centroid /= static_cast<double>(d);

    const Vec xr = centroid + (centroid - xs[static_cast<std::size_t>(worst)]);
    const double fr = eval(xr);
    if (fr < fs[static_cast<std::size_t>(best)]) {
      const Vec xe = centroid + 2.0 * (centroid - xs[static_cast<std::size_t>(worst)]);
      const double fe = eval(xe);
      if (fe < fr) {
        xs[static_cast<std::size_t>(worst)] = xe;
        fs[static_cast<std::size_t>(worst)] = fe;
      } else {
        xs[static_cast<std::size_t>(worst)] = xr;
        fs[static_cast<std::size_t>(worst)] = fr;
      }
      continue;
    }
    if (fr < fs[static_cast<std::size_t>(second)]) {
      xs[static_cast<std::size_t>(worst)] = xr;
      fs[static_cast<std::size_t>(worst)] = fr;
      continue;
    }
    bool shrink = false;
    if (fr < fs[static_cast<std::size_t>(worst)]) {
      const Vec xc = centroid + 0.5 * (xr - centroid);
      const double fc = eval(xc);
      if (fc <= fr) {
        xs[static_cast<std::size_t>(worst)] = xc;
        fs[static_cast<std::size_t>(worst)] = fc;
      } else {
        shrink = true;
      }
    } else {
      const Vec xc = centroid - 0.5 * (centroid - xs[static_cast<std::size_t>(worst)]);
      const double fc = eval(xc);
      if (fc < fs[static_cast<std::size_t>(worst)]) {
        xs[static_cast<std::size_t>(worst)] = xc;
        fs[static_cast<std::size_t>(worst)] = fc;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      const Vec xb = xs[static_cast<std::size_t>(idx[0])];
      for (int i = 0; i <= d; ++i) {
        if (i == idx[0]) continue;
        xs[static_cast<std::size_t>(i)] = xb + 0.5 * (xs[static_cast<std::size_t>(i)] - xb);
        fs[static_cast<std::size_t>(i)] = eval(xs[static_cast<std::size_t>(i)]);
      }
    }
  }

  order();
  NmResult out;
  out.x = xs[static_cast<std::size_t>(idx[0])];
  out.fx = fs[static_cast<std::size_t>(idx[0])];
  out.iterations = iters;
  out.converged = converged;
  if (!std::isfinite(out.fx))
    throw numeric_error("nelder_mead: persistently non-finite objective");
  return out;
}

namespace {

constexpr double k_norm_floor = 1e-10;

Vec normalized_or_empty(const Vec& v) {
  const double n = v.norm();
  if (!(n > k_norm_floor)) return Vec();
  return v / n;
}

struct Packed {
  Vec a, b, c;
  bool ok = false;
};

Packed unpack_lag0(const Vec& x, int R) {
  Packed p;
  Vec a = x.segment(0, R + 1);
  Vec b = Vec::Zero(R + 1);
  b.tail(R) = x.segment(R + 1, R);
  Vec c = x.segment(2 * R + 1, R + 1);
  p.a = normalized_or_empty(a);
  p.b = normalized_or_empty(b);
  p.c = normalized_or_empty(c);
  p.ok = p.a.size() > 0 && p.b.size() > 0 && p.c.size() > 0;
  return p;
}

Packed unpack_no_lag0(const Vec& x, int R) {
  Packed p;
  Vec a = Vec::Zero(R + 1);
  a.tail(R) = x.segment(0, R);
  Vec b = Vec::Zero(R + 1);
  b.tail(R) = x.segment(R, R);
  Vec c = x.segment(2 * R, R + 1);
  p.a = normalized_or_empty(a);
  p.b = normalized_or_empty(b);
  p.c = normalized_or_empty(c);
  p.ok = p.a.size() > 0 && p.b.size() > 0 && p.c.size() > 0;
  return p;
}

// coarse screen for the strict-monotonicity requirement the estimators place
// on the weight ratio; keeps the search inside the feasible set so the exact
// 512-point gate at the end accepts the minimizer
bool phi_monotone_coarse(const Vec& a, const Vec& b, double lo, double hi) {
  constexpr int grid_n = 32;  // even count keeps the exact 0/0 at H=1/2 off grid
  const int R = static_cast<int>(a.size()) - 1;
  double prev = 0.0;
  int rises = 0, falls = 0;
  for (int k = 0; k < grid_n; ++k) {
    const double hk = lo + (hi - lo) * k / (grid_n - 1);
    const Vec g = gamma_vec(hk, R);
    const double den = b.dot(g);
    if (den == 0.0) return false;
    const double cur = a.dot(g) / den;
    if (!std::isfinite(cur)) return false;
    if (k > 0) {
      if (cur > prev)
        ++rises;
      else if (cur < prev)
        ++falls;
      else
        return false;
    }
    prev = cur;
  }
  return rises == 0 || falls == 0;
}

}  // namespace

TuneResult optimize_weights(double h0, int max_lag, Track track) {
  if (!(h0 > 0.0 && h0 < 0.5))
    throw input_error("optimize_weights: h0 must lie in (0, 1/2)");
  const int R = max_lag;
  WeightConfig init = initial_weights(h0, R);
  const AsymCovMatrix& covm = chh_matrix(h0, R);
  const double inf = std::numeric_limits<double>::infinity();

  TuneResult out;
  out.config = init;

  std::function<double(const Vec&)> objective;
  Vec x0;
  if (track == Track::lag0) {
    x0 = Vec(3 * R + 2);
    x0.segment(0, R + 1) = init.a;
    x0.segment(R + 1, R) = init.b.tail(R);
    x0.segment(2 * R + 1, R + 1) = init.c;
    objective = [R, h0, &covm, m = init.m, inf](const Vec& x) {
      const Packed p = unpack_lag0(x, R);
      if (!p.ok) return inf;
      try {
        return var_ladder(p.a, p.b, p.c, h0, m, covm).var_c;
      } catch (const std::exception&) {
        return inf;
      }
    };
  } else {
    x0 = Vec(3 * R + 1);
    x0.segment(0, R) = init.a0.tail(R);
    x0.segment(R, R) = init.b0.tail(R);
    x0.segment(2 * R, R + 1) = init.c_no_lag0();
    objective = [R, h0, &covm, inf](const Vec& x) {
      const Packed p = unpack_no_lag0(x, R);
      if (!p.ok) return inf;
      if (!phi_monotone_coarse(p.a, p.b, 1e-4, 1.0 - 1e-4)) return inf;
      try {
        return var_c_plugin(p.a, p.b, p.c, h0, covm);
      } catch (const std::exception&) {
        return inf;
      }
    };
  }

  out.objective_initial = objective(x0);
  out.objective_final = out.objective_initial;

  // the no-lag-0 feasible set (ratio monotone on all of (0,1)) is narrower
  // around the initial weights than the lag-0 one (monotone on (0,1/2)), so
  // its start simplex uses a smaller displacement
  NmOptions nm_opt;
  nm_opt.init_step = track == Track::lag0 ? 0.5 : 0.2;

  NmResult nm;
  try {
    nm = nelder_mead(objective, x0, nm_opt);
  } catch (const std::exception&) {
    return out;
  }
  if (!(nm.fx < out.objective_initial)) return out;

  WeightConfig cand = init;
  if (track == Track::lag0) {
    const Packed p = unpack_lag0(nm.x, R);
    if (!p.ok) return out;
    cand.a = p.a;
    cand.b = p.b;
    cand.c = p.c;
  } else {
    const Packed p = unpack_no_lag0(nm.x, R);
    if (!p.ok) return out;
    cand.a0 = p.a;
    cand.b0 = p.b;
    cand.c0 = p.c;
  }
  try {
    Weights check(cand);  // the tuned ratio functions must stay invertible
    (void)check;
  } catch (const std::exception&) {
    return out;
  }
  out.config = cand;
  out.optimized = true;
  out.objective_final = nm.fx;
  return out;
}

std::string default_weights_dir() {
  const char* env = std::getenv("ROUGHVOL_WEIGHTS_DIR");
  return env ? std::string(env) : std::string();
}

namespace {

std::string cache_path(const std::string& dir, double h0, int max_lag,
                       Track track) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "weights_R%d_h%.6f_%s.json", max_lag, h0,
                track == Track::lag0 ? "lag0" : "nolag0");
  return dir + "/" + buf;
}

}  // namespace

TuneResult optimize_weights_cached(double h0, int max_lag, Track track,
                                   const std::string& dir) {
  if (!dir.empty()) {
    const std::string path = cache_path(dir, h0, max_lag, track);
    std::ifstream in(path);
    if (in.good()) {
      std::stringstream ss;
      ss << in.rdbuf();
      TuneResult out;
      out.config = weight_config_from_json(ss.str());
      out.optimized = true;
      return out;
    }
  }
  TuneResult out = optimize_weights(h0, max_lag, track);
  if (!dir.empty() && out.optimized)
    save_weight_config(out.config, cache_path(dir, h0, max_lag, track));
  return out;
}

namespace {

nlohmann::json vec_to_json(const Vec& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vec vec_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw input_error("weights json: expected array");
  Vec v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace

std::string weight_config_to_json(const WeightConfig& wc) {
  nlohmann::json j;
  j["max_lag"] = wc.max_lag;
  j["a"] = vec_to_json(wc.a);
  j["b"] = vec_to_json(wc.b);
  j["c"] = vec_to_json(wc.c);
  j["a0"] = vec_to_json(wc.a0);
  j["b0"] = vec_to_json(wc.b0);
  if (wc.c0) j["c0"] = vec_to_json(*wc.c0);
  j["m"] = wc.m;
  j["fix_tol"] = wc.fix_tol;
  j["n_cap"] = wc.n_cap;
  return j.dump(2);
}

WeightConfig weight_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("weights json: parse error: ") + e.what());
  }
  WeightConfig wc;
  try {
    wc.max_lag = j.at("max_lag").get<int>();
    wc.a = vec_from_json(j.at("a"));
    wc.b = vec_from_json(j.at("b"));
    wc.c = vec_from_json(j.at("c"));
    wc.a0 = vec_from_json(j.at("a0"));
    wc.b0 = vec_from_json(j.at("b0"));
    if (j.contains("c0")) wc.c0 = vec_from_json(j.at("c0"));
    if (j.contains("m")) wc.m = j.at("m").get<int>();
    if (j.contains("fix_tol")) wc.fix_tol = j.at("fix_tol").get<double>();
    if (j.contains("n_cap")) wc.n_cap = j.at("n_cap").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("weights json: bad field: ") + e.what());
  }
  wc.validate();
  return wc;
}

void save_weight_config(const WeightConfig& wc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw input_error("save_weight_config: cannot open " + path);
  out << weight_config_to_json(wc) << "\n";
}

WeightConfig load_weight_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("load_weight_config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return weight_config_from_json(ss.str());
}

}  // namespace roughvol
