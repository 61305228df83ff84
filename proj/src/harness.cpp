#include "sbmrecon/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "sbmrecon/estimators.hpp"
#include "sbmrecon/parallel.hpp"
#include "sbmrecon/rng.hpp"

namespace sbm {

using nlohmann::json;

namespace {

struct KindInfo {
  ExperimentKind kind;
  std::string_view name;
};

constexpr KindInfo kKinds[] = {
    {ExperimentKind::TreeAccuracy, "tree-accuracy"},
    {ExperimentKind::RobustAccuracy, "robust-accuracy"},
    {ExperimentKind::MomentsCheck, "moments-check"},
    {ExperimentKind::ContractionCheck, "contraction-check"},
    {ExperimentKind::ThresholdSweep, "threshold-sweep"},
    {ExperimentKind::ConductanceCheck, "conductance-check"},
    {ExperimentKind::GraphRecover, "graph-recover"},
};

const std::map<ExperimentKind, std::set<std::string>>& allowed_keys() {
  static const std::map<ExperimentKind, std::set<std::string>> keys = {
      {ExperimentKind::TreeAccuracy,
       {"experiment", "trials", "seed", "method", "clamp", "tree", "a", "b", "d", "theta", "k"}},
      {ExperimentKind::RobustAccuracy,
       {"experiment", "trials", "seed", "method", "clamp", "tree", "a", "b", "d", "theta", "delta", "k"}},
      {ExperimentKind::MomentsCheck,
       {"experiment", "trials", "seed", "method", "tree", "d", "theta", "delta", "k"}},
      {ExperimentKind::ContractionCheck,
       {"experiment", "trials", "seed", "method", "clamp", "tree", "a", "b", "d", "theta", "delta", "k"}},
      {ExperimentKind::ThresholdSweep,
       {"experiment", "trials", "seed", "method", "clamp", "tree", "d", "signal", "k"}},
      {ExperimentKind::ConductanceCheck,
       {"experiment", "trials", "seed", "tree", "a", "b", "d", "theta", "delta", "k"}},
      {ExperimentKind::GraphRecover,
       {"experiment", "trials", "seed", "method", "clamp", "n", "a", "b", "blackbox", "blackbox_delta",
        "radius_mode", "radius", "inner_depth", "holdout_size", "anchor_min_degree", "batch",
        "weight_delta", "tree_trials"}},
  };
  return keys;
}

std::string_view family_name(TreeKind::Family f) {
  return f == TreeKind::Family::DAry ? "d-ary" : "galton-watson";
}

std::string_view method_name(SamplingMethod m) {
  switch (m) {
    case SamplingMethod::Auto: return "auto";
    case SamplingMethod::Explicit: return "explicit";
    case SamplingMethod::Population: return "population";
  }
  return "auto";
}

std::string_view radius_mode_name(RadiusMode m) {
  switch (m) {
    case RadiusMode::LogFormula: return "paper-formula";
    case RadiusMode::Auto: return "auto";
    case RadiusMode::Fixed: return "fixed";
  }
  return "auto";
}

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw std::invalid_argument("config key '" + key + "': " + why);
}

double get_number(const json& cfg, const std::string& key) {
  const json& v = cfg.at(key);
  if (!v.is_number()) bad_key(key, "expected a number");
  return v.get<double>();
}

std::int64_t get_integer(const json& cfg, const std::string& key) {
  const json& v = cfg.at(key);
  if (!v.is_number_integer()) bad_key(key, "expected an integer");
  return v.get<std::int64_t>();
}

std::string get_string(const json& cfg, const std::string& key) {
  const json& v = cfg.at(key);
  if (!v.is_string()) bad_key(key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> get_number_list(const json& cfg, const std::string& key) {
  const json& v = cfg.at(key);
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
  } else if (v.is_array()) {
    for (const json& e : v) {
      if (!e.is_number()) bad_key(key, "expected numbers");
      out.push_back(e.get<double>());
    }
  } else {
    bad_key(key, "expected a number or a list of numbers");
  }
  if (out.empty()) bad_key(key, "grid must be nonempty");
  return out;
}

std::vector<int> get_int_list(const json& cfg, const std::string& key) {
  const json& v = cfg.at(key);
  std::vector<int> out;
  auto take = [&](const json& e) {
    if (!e.is_number_integer()) bad_key(key, "expected integers");
    out.push_back(e.get<int>());
  };
  if (v.is_array()) {
    for (const json& e : v) take(e);
  } else {
    take(v);
  }
  if (out.empty()) bad_key(key, "grid must be nonempty");
  return out;
}

std::vector<int> range_list(int lo, int hi) {
  std::vector<int> out;
  for (int i = lo; i <= hi; ++i) out.push_back(i);
  return out;
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  for (const auto& k : kKinds)
    if (k.kind == kind) return k.name;
  return "unknown";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (const auto& k : kKinds)
    if (k.name == name) return k.kind;
  throw std::invalid_argument("unknown experiment '" + std::string(name) + "'");
}

const std::vector<ExperimentKind>& all_experiment_kinds() {
  static const std::vector<ExperimentKind> kinds = [] {
    std::vector<ExperimentKind> out;
    for (const auto& k : kKinds) out.push_back(k.kind);
    return out;
  }();
  return kinds;
}

ExperimentSpec default_spec(ExperimentKind kind) {
  ExperimentSpec s;
  s.kind = kind;
  switch (kind) {
    case ExperimentKind::TreeAccuracy:
      s.a = 5.0;
      s.b = 1.0;
      s.k = {2, 4, 6, 8, 10};
      break;
    case ExperimentKind::RobustAccuracy:
      s.a = 30.0;
      s.b = 4.0;
      s.delta = {0.0, 0.2, 0.4};
      s.k = {2, 4, 6, 8};
      break;
    case ExperimentKind::MomentsCheck:
      s.family = TreeKind::Family::DAry;
      s.d = {2, 3, 4};
      s.theta = {0.5, 0.8};
      s.delta = {0.0, 0.2};
      s.k = range_list(1, 5);
      break;
    case ExperimentKind::ContractionCheck:
      s.family = TreeKind::Family::DAry;
      s.d = {64};
      s.theta = {0.3};
      s.delta = {0.4};
      s.k = range_list(0, 8);
      s.clamp = 0.0;
      break;
    case ExperimentKind::ThresholdSweep:
      s.d = {3};
      s.signal = {0.5, 0.8, 1.0, 1.25, 2.0};
      s.k = {12};
      break;
    case ExperimentKind::ConductanceCheck:
      s.d = {3};
      s.theta = {0.6};
      s.delta = {0.0, 0.2};
      s.k = {4};
      break;
    case ExperimentKind::GraphRecover:
      s.n = 2000;
      s.a = 30.0;
      s.b = 4.0;
      s.trials = 2;
      s.algo.radius_mode = RadiusMode::Fixed;
      s.algo.radius = 2;
      s.algo.inner_depth = 1;
      break;
  }
  if (s.a && s.b && kind != ExperimentKind::GraphRecover) {
    const TreeParams t = derive_tree_params({1'000'000'000, *s.a, *s.b});
    s.d = {t.d};
    s.theta = {t.theta};
  }
  return s;
}

ExperimentSpec parse_spec(ExperimentKind kind, const json& cfg) {
  if (!cfg.is_object()) throw std::invalid_argument("config must be a JSON object");
  const auto& allowed = allowed_keys().at(kind);
  for (const auto& [key, value] : cfg.items())
    if (!allowed.count(key))
      throw std::invalid_argument("unknown config key '" + key + "' for " + std::string(to_string(kind)));

  ExperimentSpec s = default_spec(kind);
  if (cfg.contains("experiment") && get_string(cfg, "experiment") != to_string(kind))
    bad_key("experiment", "does not match the subcommand");
  if (cfg.contains("trials")) s.trials = get_integer(cfg, "trials");
  if (cfg.contains("seed")) {
    const json& v = cfg.at("seed");
    if (!v.is_number_integer()) bad_key("seed", "expected an unsigned integer");
    s.seed = v.get<std::uint64_t>();
  }
  if (cfg.contains("method")) {
    const std::string m = get_string(cfg, "method");
    if (m == "auto") s.method = SamplingMethod::Auto;
    else if (m == "explicit") s.method = SamplingMethod::Explicit;
    else if (m == "population") s.method = SamplingMethod::Population;
    else bad_key("method", "expected auto, explicit or population");
  }
  if (cfg.contains("clamp")) {
    s.clamp = get_number(cfg, "clamp");
    if (!(s.clamp >= 0.0 && s.clamp < 1.0)) bad_key("clamp", "expected a value in [0, 1)");
  }
  if (cfg.contains("tree")) {
    const std::string t = get_string(cfg, "tree");
    if (t == "d-ary") s.family = TreeKind::Family::DAry;
    else if (t == "galton-watson") s.family = TreeKind::Family::GaltonWatson;
    else bad_key("tree", "expected d-ary or galton-watson");
  }
  const bool has_ab = cfg.contains("a") || cfg.contains("b");
  if (has_ab) {
    if (!cfg.contains("a") || !cfg.contains("b")) bad_key("a", "a and b must be given together");
    if (cfg.contains("d") || cfg.contains("theta")) bad_key("a", "give either (a, b) or (d, theta)");
    s.a = get_number(cfg, "a");
    s.b = get_number(cfg, "b");
  } else if (cfg.contains("d") || cfg.contains("theta")) {
    s.a.reset();
    s.b.reset();
  }
  if (cfg.contains("d")) s.d = get_number_list(cfg, "d");
  if (cfg.contains("theta")) s.theta = get_number_list(cfg, "theta");
  if (cfg.contains("delta")) s.delta = get_number_list(cfg, "delta");
  if (cfg.contains("k")) s.k = get_int_list(cfg, "k");
  if (cfg.contains("signal")) s.signal = get_number_list(cfg, "signal");

  if (kind == ExperimentKind::GraphRecover) {
    if (cfg.contains("n")) s.n = get_integer(cfg, "n");
    if (cfg.contains("blackbox")) s.blackbox = get_string(cfg, "blackbox");
    if (s.blackbox != "oracle-noise" && s.blackbox != "spectral")
      bad_key("blackbox", "expected oracle-noise or spectral");
    if (cfg.contains("blackbox_delta")) s.blackbox_delta = get_number(cfg, "blackbox_delta");
    if (cfg.contains("radius_mode")) {
      const std::string m = get_string(cfg, "radius_mode");
      if (m == "paper-formula") s.algo.radius_mode = RadiusMode::LogFormula;
      else if (m == "auto") s.algo.radius_mode = RadiusMode::Auto;
      else if (m == "fixed") s.algo.radius_mode = RadiusMode::Fixed;
      else bad_key("radius_mode", "expected paper-formula, auto or fixed");
    }
    if (cfg.contains("radius")) s.algo.radius = static_cast<int>(get_integer(cfg, "radius"));
    if (cfg.contains("inner_depth")) s.algo.inner_depth = static_cast<int>(get_integer(cfg, "inner_depth"));
    if (cfg.contains("holdout_size")) s.algo.holdout_size = get_integer(cfg, "holdout_size");
    if (cfg.contains("anchor_min_degree")) s.algo.anchor_min_degree = get_integer(cfg, "anchor_min_degree");
    if (cfg.contains("batch")) s.algo.batch = get_integer(cfg, "batch");
    if (cfg.contains("weight_delta")) {
      if (cfg.at("weight_delta").is_null()) s.algo.weight_delta.reset();
      else s.algo.weight_delta = get_number(cfg, "weight_delta");
    }
    if (cfg.contains("tree_trials")) s.tree_trials = get_integer(cfg, "tree_trials");
    if (s.n < 1) bad_key("n", "must be positive");
    if (s.tree_trials < 1) bad_key("tree_trials", "must be positive");
    if (!s.a || !s.b) bad_key("a", "graph-recover needs a and b");
  } else if (s.a && s.b) {
    const TreeParams t = derive_tree_params({1'000'000'000, *s.a, *s.b});
    s.d = {t.d};
    s.theta = {t.theta};
  }

  if (s.trials < 1) bad_key("trials", "must be at least 1");
  if (kind == ExperimentKind::MomentsCheck && s.family != TreeKind::Family::DAry)
    bad_key("tree", "moments-check is defined for d-ary trees");
  for (int k : s.k)
    if (k < 0) bad_key("k", "depths must be nonnegative");
  if (s.family == TreeKind::Family::DAry)
    for (double d : s.d)
      if (d != std::floor(d) || d < 1) bad_key("d", "d-ary trees need integral d >= 1");
  for (double d : s.d)
    if (!(d > 0.0)) bad_key("d", "must be positive");
  for (double t : s.theta)
    if (!(t >= -1.0 && t <= 1.0)) bad_key("theta", "must lie in [-1, 1]");
  for (double dl : s.delta)
    if (!(dl >= 0.0 && dl < 0.5)) bad_key("delta", "must lie in [0, 1/2)");
  return s;
}

namespace {

json all_fields(const ExperimentSpec& s) {
  json j;
  j["experiment"] = to_string(s.kind);
  j["trials"] = s.trials;
  j["seed"] = s.seed;
  j["method"] = method_name(s.method);
  j["clamp"] = s.clamp;
  if (s.kind == ExperimentKind::GraphRecover) {
    j["n"] = s.n;
    j["a"] = *s.a;
    j["b"] = *s.b;
    j["blackbox"] = s.blackbox;
    j["blackbox_delta"] = s.blackbox_delta;
    j["radius_mode"] = radius_mode_name(s.algo.radius_mode);
    j["radius"] = s.algo.radius;
    j["inner_depth"] = s.algo.inner_depth;
    j["holdout_size"] = s.algo.holdout_size;
    j["anchor_min_degree"] = s.algo.anchor_min_degree;
    j["batch"] = s.algo.batch;
    j["weight_delta"] = s.algo.weight_delta ? json(*s.algo.weight_delta) : json(nullptr);
    j["tree_trials"] = s.tree_trials;
    return j;
  }
  j["tree"] = family_name(s.family);
  if (s.a) {
    j["a"] = *s.a;
    j["b"] = *s.b;
  } else {
    j["d"] = s.d;
    if (!s.theta.empty()) j["theta"] = s.theta;
  }
  if (!s.delta.empty()) j["delta"] = s.delta;
  if (!s.signal.empty()) j["signal"] = s.signal;
  j["k"] = s.k;
  return j;
}

}  // namespace

json to_json(const ExperimentSpec& s) {
  json j = all_fields(s);
  const auto& allowed = allowed_keys().at(s.kind);
  for (auto it = j.begin(); it != j.end();) it = allowed.count(it.key()) ? std::next(it) : j.erase(it);
  return j;
}

std::string config_schema() {
  std::ostringstream out;
  out << "Config files are JSON objects; unknown keys are rejected. Grid keys accept a\n"
         "number or a list. Model: either \"a\" and \"b\" or \"d\" and \"theta\".\n\n";
  for (const auto& k : kKinds) {
    out << k.name << ":";
    for (const auto& key : allowed_keys().at(k.kind)) out << ' ' << key;
    out << "\n  defaults: " << to_json(default_spec(k.kind)).dump() << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------

std::size_t ResultTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < coord_names.size(); ++i)
    if (coord_names[i] == name) return i;
  throw std::out_of_range("no column '" + std::string(name) + "'");
}

std::vector<const ResultRow*> ResultTable::select(
    std::initializer_list<std::pair<std::string_view, std::string_view>> match) const {
  std::vector<std::pair<std::size_t, std::string_view>> idx;
  for (const auto& [name, value] : match) idx.emplace_back(column(name), value);
  std::vector<const ResultRow*> out;
  for (const auto& row : rows) {
    bool ok = true;
    for (const auto& [c, value] : idx) ok = ok && row.coords[c] == value;
    if (ok) out.push_back(&row);
  }
  return out;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

using Clock = std::chrono::steady_clock;

class RowTimer {
 public:
  explicit RowTimer(bool enabled) : enabled_(enabled), start_(Clock::now()) {}
  double lap() {
    if (!enabled_) return 0.0;
    const auto now = Clock::now();
    const double s = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return s;
  }

 private:
  bool enabled_;
  Clock::time_point start_;
};

unsigned effective_threads(const RunOptions& o) { return o.deterministic ? 1U : resolve_threads(o.threads); }

TreeKind make_kind(TreeKind::Family f, double d) { return {f, d}; }

ResultTable make_table(const ExperimentSpec& spec, std::vector<std::string> coords) {
  ResultTable t;
  t.experiment = std::string(to_string(spec.kind));
  t.coord_names = std::move(coords);
  t.spec = to_json(spec);
  return t;
}

std::uint64_t depth_seed(std::uint64_t seed, int k) {
  return derive_seed(seed, stream::kTrial, static_cast<std::uint64_t>(k));
}

/// Noiseless and noisy root accuracy on a shared sample, plus their paired gap.
struct RobustPoint {
  Estimate p_clean;
  Estimate p_noisy;
  Estimate gap;  // p_noisy - p_clean
};

RobustPoint robust_point(const TreeKind& kind, double theta, double delta, int k, std::int64_t trials,
                         std::uint64_t seed, SamplingMethod method, double clamp, unsigned threads) {
  std::vector<double> ax;
  std::vector<double> ay;
  if (resolve_method(kind, k, method) == SamplingMethod::Population) {
    const PopulationLevels pop = population_levels(kind, theta, delta, k, trials, seed, clamp, threads);
    const auto& hx = pop.hx[static_cast<std::size_t>(k)];
    const auto& hy = pop.hy[static_cast<std::size_t>(k)];
    ax.resize(hx.size());
    ay.resize(hy.size());
    for (std::size_t i = 0; i < hx.size(); ++i) {
      ax[i] = std::abs(std::tanh(hx[i]));
      ay[i] = std::abs(std::tanh(hy[i]));
    }
  } else {
    const auto n = static_cast<std::size_t>(trials);
    ax.resize(n);
    ay.resize(n);
    parallel_for(n, threads, [&](std::size_t i) {
      const CoupledTrial t = coupled_trial(kind, theta, delta, k, derive_seed(seed, stream::kTrial, i), clamp);
      ax[i] = std::abs(t.x);
      ay[i] = std::abs(t.y);
    });
  }
  std::vector<double> diff(ax.size());
  for (std::size_t i = 0; i < ax.size(); ++i) diff[i] = (ay[i] - ax[i]) / 2.0;
  auto to_p = [](Estimate e) { return Estimate{(1.0 + e.value) / 2.0, e.ci / 2.0, e.trials}; };
  return {to_p(mean_estimate(ax)), to_p(mean_estimate(ay)), mean_estimate(diff)};
}

}  // namespace

ResultTable run_tree_accuracy(const ExperimentSpec& spec, const RunOptions& opts) {
  ResultTable table = make_table(spec, {"tree", "d", "theta", "k", "method"});
  const unsigned threads = effective_threads(opts);
  RowTimer timer(!opts.deterministic);
  for (double d : spec.d)
    for (double theta : spec.theta)
      for (int k : spec.k) {
        MagnetizationQuery q;
        q.kind = make_kind(spec.family, d);
        q.theta = theta;
        q.k = k;
        q.trials = spec.trials;
        q.seed = depth_seed(spec.seed, k);
        q.clamp_eps = spec.clamp;
        q.method = spec.method;
        q.threads = threads;
        const MagnetizationEstimate e = magnetization_stats(q);
        table.rows.push_back({{std::string(family_name(spec.family)), format_number(d), format_number(theta),
                               std::to_string(k), std::string(method_name(e.method))},
                              e.p_hat.value, e.p_hat.ci, e.p_hat.trials, timer.lap()});
      }
  return table;
}

ResultTable run_robust_accuracy(const ExperimentSpec& spec, const RunOptions& opts) {
  ResultTable table = make_table(spec, {"tree", "d", "theta", "delta", "k", "quantity"});
  const unsigned threads = effective_threads(opts);
  RowTimer timer(!opts.deterministic);
  for (double d : spec.d)
    for (double theta : spec.theta)
      for (double delta : spec.delta)
        for (int k : spec.k) {
          const RobustPoint p = robust_point(make_kind(spec.family, d), theta, delta, k, spec.trials,
                                             depth_seed(spec.seed, k), spec.method, spec.clamp, threads);
          const double secs = timer.lap();
          std::vector<std::string> base{std::string(family_name(spec.family)), format_number(d),
                                        format_number(theta), format_number(delta), std::to_string(k)};
          auto row = [&](const char* q, const Estimate& e, double s) {
            auto c = base;
            c.emplace_back(q);
            table.rows.push_back({std::move(c), e.value, e.ci, e.trials, s});
          };
          row("p_hat", p.p_noisy, secs);
          row("gap", p.gap, 0.0);
        }
  return table;
}

ResultTable run_moments_check(const ExperimentSpec& spec, const RunOptions& opts) {
  ResultTable table = make_table(spec, {"tree", "d", "theta", "delta", "k", "quantity", "predicted"});
  const unsigned threads = effective_threads(opts);
  RowTimer timer(!opts.deterministic);
  const int k_max = *std::max_element(spec.k.begin(), spec.k.end());
  const auto n = static_cast<std::size_t>(spec.trials);
  for (double dd : spec.d) {
    const int d = static_cast<int>(dd);
    const TreeKind kind = TreeKind::d_ary(d);
    const bool explicit_trees = resolve_method(kind, k_max, spec.method) == SamplingMethod::Explicit;
    for (double theta : spec.theta)
      for (double delta : spec.delta) {
        const double eta = (1.0 - theta) / 2.0;
        // sums[k][i]: conditional (root = +) level sums of trial i.
        std::vector<std::vector<double>> s(static_cast<std::size_t>(k_max) + 1, std::vector<double>(n));
        std::vector<std::vector<double>> sn(static_cast<std::size_t>(k_max) + 1, std::vector<double>(n));
        parallel_for(n, threads, [&](std::size_t i) {
          const std::uint64_t ts = derive_seed(spec.seed, stream::kTrial, i);
          if (explicit_trees) {
            BroadcastTree t = sample_broadcast(kind, k_max, eta, ts);
            Rng noise = make_rng(ts, stream::kNoise);
            const double root = t.sigma[0];
            for (int k = 0; k <= k_max; ++k) {
              const NodeRange lv = t.level(k);
              std::int64_t clean = 0;
              std::int64_t noisy = 0;
              for (NodeId u = lv.begin; u < lv.end; ++u) {
                const Spin sg = t.sigma[static_cast<std::size_t>(u)];
                clean += sg;
                noisy += (delta > 0.0 && bernoulli(noise, delta)) ? -sg : sg;
              }
              s[static_cast<std::size_t>(k)][i] = root * static_cast<double>(clean);
              sn[static_cast<std::size_t>(k)][i] = root * static_cast<double>(noisy);
            }
          } else {
            for (int k = 0; k <= k_max; ++k) {
              Rng rng = make_rng(ts, stream::kTrial, static_cast<std::uint64_t>(k));
              const LevelSums ls = sample_dary_level_sums(d, eta, delta, k, rng);
              s[static_cast<std::size_t>(k)][i] = ls.s;
              sn[static_cast<std::size_t>(k)][i] = ls.s_noisy;
            }
          }
        });
        const double secs = timer.lap();
        bool first = true;
        for (int k : spec.k) {
          const MajorityMoments mm = majority_moments(d, theta, delta, k);
          const VarianceEstimate vs = variance_estimate(s[static_cast<std::size_t>(k)]);
          const VarianceEstimate vn = variance_estimate(sn[static_cast<std::size_t>(k)]);
          auto row = [&](const char* q, double predicted, double est, double se) {
            table.rows.push_back({{"d-ary", format_number(dd), format_number(theta), format_number(delta),
                                   std::to_string(k), q, format_number(predicted)},
                                  est, kZ99 * se, spec.trials, first ? secs : 0.0});
            first = false;
          };
          row("mean_s", mm.mean_s, vs.mean, vs.mean_se);
          row("var_s", mm.var_s, vs.variance, vs.variance_se);
          row("mean_noisy", mm.mean_noisy, vn.mean, vn.mean_se);
          row("var_noisy", mm.var_noisy, vn.variance, vn.variance_se);
        }
      }
  }
  return table;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Per-level samples of |X - Y|^power held as exp(power * log_gap - scale[j]),
/// so means and ratios survive gaps far below double range.
struct ScaledMoments {
  std::vector<std::vector<double>> values;
  std::vector<double> scale;

  bool zero(std::size_t j) const { return scale[j] == -kInf; }

  Estimate mean(std::size_t j) const {
    if (zero(j)) return {0.0, 0.0, static_cast<std::int64_t>(values[j].size())};
    Estimate e = mean_estimate(values[j]);
    const double f = std::exp(scale[j]);
    e.value *= f;
    e.ci *= f;
    return e;
  }

  Estimate ratio(std::size_t j, bool paired) const {
    if (zero(j - 1)) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      return {nan, nan, static_cast<std::int64_t>(values[j].size())};
    }
    if (zero(j)) return {0.0, 0.0, static_cast<std::int64_t>(values[j].size())};
    Estimate e = ratio_estimate(values[j], values[j - 1], paired);
    const double f = std::exp(scale[j] - scale[j - 1]);
    e.value *= f;
    e.ci *= f;
    return e;
  }
};

ScaledMoments scaled_moments(const std::vector<std::vector<double>>& log_gap, double power) {
  ScaledMoments m;
  for (const auto& level : log_gap) {
    double top = -kInf;
    for (double l : level) top = std::max(top, power * l);
    m.scale.push_back(top);
    std::vector<double> v(level.size(), 0.0);
    if (top != -kInf)
      for (std::size_t i = 0; i < level.size(); ++i) v[i] = std::exp(power * level[i] - top);
    m.values.push_back(std::move(v));
  }
  return m;
}

}  // namespace

ResultTable run_contraction_check(const ExperimentSpec& spec, const RunOptions& opts) {
  ResultTable table = make_table(spec, {"tree", "d", "theta", "delta", "level", "quantity", "status"});
  const unsigned threads = effective_threads(opts);
  RowTimer timer(!opts.deterministic);
  const int k_max = *std::max_element(spec.k.begin(), spec.k.end());
  const auto n = static_cast<std::size_t>(spec.trials);
  for (double d : spec.d)
    for (double theta : spec.theta)
      for (double delta : spec.delta) {
        const TreeKind kind = make_kind(spec.family, d);
        // gap[j][i] = log|X_j - Y_j|, kept in log form because saturated
        // messages push the difference far below double range.
        std::vector<std::vector<double>> gap(static_cast<std::size_t>(k_max) + 1, std::vector<double>(n));
        const bool population = resolve_method(kind, k_max, spec.method) == SamplingMethod::Population;
        if (population) {
          const PopulationLevels pop =
              population_levels(kind, theta, delta, k_max, spec.trials, spec.seed, spec.clamp, threads, true);
          for (std::size_t j = 0; j <= static_cast<std::size_t>(k_max); ++j)
            for (std::size_t i = 0; i < n; ++i)
              gap[j][i] = log_tanh_difference(pop.hx[j][i], pop.hy[j][i], pop.log_gap[j][i]);
        } else {
          const double eta = (1.0 - theta) / 2.0;
          parallel_for(n, threads, [&](std::size_t i) {
            const std::uint64_t ts = derive_seed(spec.seed, stream::kTrial, i);
            BroadcastTree t = sample_broadcast(kind, k_max, eta, ts);
            Rng noise = make_rng(ts, stream::kNoise);
            const double root = t.sigma[0];
            for (int j = 0; j <= k_max; ++j) {
              const NodeRange lv = t.level(j);
              std::vector<double> xs(static_cast<std::size_t>(lv.size()));
              std::vector<double> ys(xs.size());
              for (NodeId u = lv.begin; u < lv.end; ++u) {
                const double sg = t.sigma[static_cast<std::size_t>(u)];
                const double tau = (delta > 0.0 && bernoulli(noise, delta)) ? -sg : sg;
                xs[static_cast<std::size_t>(u - lv.begin)] = sg;
                ys[static_cast<std::size_t>(u - lv.begin)] = (1.0 - 2.0 * delta) * tau;
              }
              const double x = root * bp_upward(t.shape, j, xs, theta, spec.clamp);
              const double y = root * bp_upward(t.shape, j, ys, theta, spec.clamp);
              gap[static_cast<std::size_t>(j)][i] = x == y ? -kInf : std::log(std::abs(x - y));
            }
          });
        }
        double secs = timer.lap();
        const ScaledMoments sq_at = scaled_moments(gap, 2.0);
        const ScaledMoments rt_at = scaled_moments(gap, 0.5);
        for (int j : spec.k) {
          const std::vector<std::string> base{std::string(family_name(spec.family)), format_number(d),
                                              format_number(theta), format_number(delta), std::to_string(j)};
          auto row = [&](const char* q, const Estimate& e, const char* status) {
            auto c = base;
            c.emplace_back(q);
            c.emplace_back(status);
            table.rows.push_back({std::move(c), e.value, e.ci, e.trials, secs});
            secs = 0.0;
          };
          const auto jj = static_cast<std::size_t>(j);
          for (const auto& [name, m] : {std::pair{"sq_diff", &sq_at}, std::pair{"sqrt_diff", &rt_at}}) {
            const Estimate e = m->mean(jj);
            row(name, e, m->zero(jj) ? "degenerate" : (e.value == 0.0 ? "underflow" : "ok"));
          }
          if (j >= 1) {
            for (const auto& [name, m] : {std::pair{"sq_ratio", &sq_at}, std::pair{"sqrt_ratio", &rt_at}}) {
              const Estimate e = m->ratio(jj, !population);
              row(name, e, std::isnan(e.value) ? "degenerate" : "ok");
            }
          }
        }
      }
  return table;
}

ResultTable run_threshold_sweep(const ExperimentSpec& spec, const RunOptions& opts) {
  ResultTable table = make_table(spec, {"tree", "d", "theta", "signal", "k", "method"});
  const unsigned threads = effective_threads(opts);
  RowTimer timer(!opts.deterministic);
  for (double d : spec.d)
    for (double signal : spec.signal) {
      const double theta = std::sqrt(signal / d);
      if (!(theta <= 1.0)) throw std::invalid_argument("signal " + format_number(signal) + " needs theta > 1 at d = " +
                                                       format_number(d));
      for (int k : spec.k) {
        MagnetizationQuery q;
        q.kind = make_kind(spec.family, d);
        q.theta = theta;
        q.k = k;
        q.trials = spec.trials;
        q.seed = depth_seed(spec.seed, k);
        q.clamp_eps = spec.clamp;
        q.method = spec.method;
        q.threads = threads;
        const MagnetizationEstimate e = magnetization_stats(q);
        table.rows.push_back({{std::string(family_name(spec.family)), format_number(d), format_number(theta),
                               format_number(signal), std::to_string(k), std::string(method_name(e.method))},
                              e.p_hat.value - 0.5, e.p_hat.ci, e.p_hat.trials, timer.lap()});
      }
    }
  return table;
}

ResultTable run_conductance_check(const ExperimentSpec& spec, const RunOptions& opts) {
  ResultTable table = make_table(spec, {"tree", "d", "theta", "delta", "k", "quantity", "predicted"});
  const unsigned threads = effective_threads(opts);
  RowTimer timer(!opts.deterministic);
  const auto n = static_cast<std::size_t>(spec.trials);
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  for (double d : spec.d)
    for (double theta : spec.theta)
      for (double delta : spec.delta)
        for (int k : spec.k) {
          const TreeKind kind = make_kind(spec.family, d);
          const double eta = (1.0 - theta) / 2.0;
          const double bound = theta * theta * d / (16.0 * eta);
          const std::optional<double> noise =
              delta > 0.0 ? std::optional<double>(delta) : std::nullopt;
          std::vector<double> estimator(n, kNaN);
          std::vector<double> reff(n, kNaN);
          std::vector<double> above(n, 0.0);
          std::vector<double> survived(n, 0.0);
          parallel_for(n, threads, [&](std::size_t i) {
            const std::uint64_t ts = derive_seed(spec.seed, stream::kTrial, i);
            BroadcastTree t = sample_broadcast(kind, k, eta, ts);
            if (t.level(k).empty()) return;
            survived[i] = 1.0;
            Rng rng = make_rng(ts, stream::kNoise);
            add_leaf_noise(t, delta, k, rng);
            const CurrentWeights w = current_weights(t.shape, theta, noise, k);
            const ConductanceNetwork net = effective_conductance(t.shape, theta, noise, k);
            double sum = 0.0;
            for (std::size_t j = 0; j < w.weight.size(); ++j) sum += w.weight[j] * t.tau[j];
            estimator[i] = t.sigma[0] * sum / (1.0 - 2.0 * delta);
            reff[i] = w.reff;
            above[i] = net.ceff >= bound ? 1.0 : 0.0;
          });
          const double secs = timer.lap();
          std::vector<double> est_live;
          std::vector<double> reff_live;
          std::vector<double> above_live;
          for (std::size_t i = 0; i < n; ++i)
            if (survived[i] > 0.0) {
              est_live.push_back(estimator[i]);
              reff_live.push_back(reff[i]);
              above_live.push_back(above[i]);
            }
          const Estimate surv = mean_estimate(survived);
          const VarianceEstimate ve = variance_estimate(est_live);
          const Estimate mr = mean_estimate(reff_live);
          const Estimate pa = mean_estimate(above_live);
          const std::vector<std::string> base{std::string(family_name(spec.family)), format_number(d),
                                              format_number(theta), format_number(delta), std::to_string(k)};
          auto row = [&](const char* q, double predicted, double est, double ci, std::int64_t trials, double s) {
            auto c = base;
            c.emplace_back(q);
            c.emplace_back(std::isnan(predicted) ? std::string() : format_number(predicted));
            table.rows.push_back({std::move(c), est, ci, trials, s});
          };
          const auto live = static_cast<std::int64_t>(est_live.size());
          row("survival", kNaN, surv.value, surv.ci, surv.trials, secs);
          row("mean_estimator", 1.0, ve.mean, kZ99 * ve.mean_se, live, 0.0);
          row("var_estimator", mr.value, ve.variance, kZ99 * ve.variance_se, live, 0.0);
          row("mean_reff", kNaN, mr.value, mr.ci, live, 0.0);
          row("p_ceff_above_bound", bound, pa.value, pa.ci, live, 0.0);
        }
  return table;
}

ResultTable run_graph_recover(const ExperimentSpec& spec, const RunOptions& opts) {
  ResultTable table = make_table(spec, {"n", "a", "b", "blackbox", "blackbox_delta", "radius", "inner_depth",
                                        "quantity"});
  const unsigned threads = effective_threads(opts);
  RowTimer timer(!opts.deterministic);
  const ModelParams m{spec.n, *spec.a, *spec.b};
  const TreeParams tp = derive_tree_params(m);
  AlgoConfig algo = spec.algo;
  algo.clamp_eps = spec.clamp;
  algo.threads = threads;
  const int radius = resolve_radius(algo, m).radius;

  const auto seeds = static_cast<std::size_t>(spec.trials);
  std::vector<double> acc(seeds);
  std::vector<double> initial(seeds);
  std::vector<double> non_tree(seeds);
  std::vector<double> fallback(seeds);
  for (std::size_t s = 0; s < seeds; ++s) {
    const std::uint64_t gseed = derive_seed(spec.seed, stream::kGraph, s);
    const LabelledGraph g = sample_sbm(m, PartitionMode::UniformRandom, gseed);
    std::unique_ptr<BlackBox> bb;
    if (spec.blackbox == "spectral") bb = std::make_unique<SpectralPartitioner>();
    else bb = std::make_unique<OracleNoisePartitioner>(g.labels, spec.blackbox_delta);
    const RecoveryResult r = recover(g, algo, m, *bb, derive_seed(gseed, stream::kTrial));
    acc[s] = r.report.accuracy;
    initial[s] = r.diagnostics.initial_accuracy;
    non_tree[s] = static_cast<double>(r.diagnostics.non_tree_neighborhoods) /
                  static_cast<double>(static_cast<std::int64_t>(g.size()) - r.diagnostics.holdout_size);
    fallback[s] = r.diagnostics.anchor_fallback ? 1.0 : 0.0;
  }
  const double graph_secs = timer.lap();

  MagnetizationQuery q;
  q.kind = TreeKind::galton_watson(tp.d);
  q.theta = tp.theta;
  q.k = radius;
  q.trials = spec.tree_trials;
  q.seed = derive_seed(spec.seed, stream::kTree);
  q.clamp_eps = spec.clamp;
  q.method = spec.method;
  q.threads = threads;
  const MagnetizationEstimate tree_est = magnetization_stats(q);
  const double tree_secs = timer.lap();

  const Estimate e_acc = mean_estimate(acc);
  const Estimate e_init = mean_estimate(initial);
  const Estimate e_nt = mean_estimate(non_tree);
  const Estimate e_fb = mean_estimate(fallback);
  const std::vector<std::string> base{std::to_string(spec.n), format_number(*spec.a), format_number(*spec.b),
                                      spec.blackbox, format_number(spec.blackbox_delta), std::to_string(radius),
                                      std::to_string(algo.inner_depth)};
  auto row = [&](const char* qn, double est, double ci, std::int64_t trials, double secs) {
    auto c = base;
    c.emplace_back(qn);
    table.rows.push_back({std::move(c), est, ci, trials, secs});
  };
  row("accuracy", e_acc.value, e_acc.ci, e_acc.trials, graph_secs);
  row("initial_accuracy", e_init.value, e_init.ci, e_init.trials, 0.0);
  row("tree_p_hat", tree_est.p_hat.value, tree_est.p_hat.ci, tree_est.p_hat.trials, tree_secs);
  row("gap_vs_tree", e_acc.value - tree_est.p_hat.value, std::hypot(e_acc.ci, tree_est.p_hat.ci), e_acc.trials, 0.0);
  row("non_tree_fraction", e_nt.value, e_nt.ci, e_nt.trials, 0.0);
  row("anchor_fallback_rate", e_fb.value, e_fb.ci, e_fb.trials, 0.0);
  return table;
}

ResultTable run_experiment(const ExperimentSpec& spec, const RunOptions& opts) {
  switch (spec.kind) {
    case ExperimentKind::TreeAccuracy: return run_tree_accuracy(spec, opts);
    case ExperimentKind::RobustAccuracy: return run_robust_accuracy(spec, opts);
    case ExperimentKind::MomentsCheck: return run_moments_check(spec, opts);
    case ExperimentKind::ContractionCheck: return run_contraction_check(spec, opts);
    case ExperimentKind::ThresholdSweep: return run_threshold_sweep(spec, opts);
    case ExperimentKind::ConductanceCheck: return run_conductance_check(spec, opts);
    case ExperimentKind::GraphRecover: return run_graph_recover(spec, opts);
  }
  throw std::logic_error("unknown experiment kind");
}

// ---------------------------------------------------------------------------

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string to_csv(const ResultTable& table) {
  std::ostringstream out;
  out << "experiment";
  for (const auto& c : table.coord_names) out << ',' << csv_field(c);
  out << ",estimate,ci,trials,seconds\n";
  for (const auto& row : table.rows) {
    out << table.experiment;
    for (const auto& c : row.coords) out << ',' << csv_field(c);
    out << ',' << format_number(row.estimate) << ',' << format_number(row.ci) << ',' << row.trials << ','
        << format_number(row.seconds) << '\n';
  }
  return out.str();
}

json to_json(const ResultTable& table) {
  json j;
  j["experiment"] = table.experiment;
  j["spec"] = table.spec;
  json cols = table.coord_names;
  for (const char* c : {"estimate", "ci", "trials", "seconds"}) cols.push_back(c);
  j["columns"] = cols;
  json rows = json::array();
  for (const auto& row : table.rows) {
    json r = json::object();
    for (std::size_t i = 0; i < row.coords.size(); ++i) r[table.coord_names[i]] = row.coords[i];
    // NaN has no JSON encoding; written as null.
    r["estimate"] = std::isfinite(row.estimate) ? json(row.estimate) : json(nullptr);
    r["ci"] = std::isfinite(row.ci) ? json(row.ci) : json(nullptr);
    r["trials"] = row.trials;
    r["seconds"] = row.seconds;
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j;
}

std::filesystem::path json_mirror_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  if (p.extension() == ".csv") return p.replace_extension(".json");
  p += ".json";
  return p;
}

void write_results(const ResultTable& table, const std::filesystem::path& path) {
  auto write_file = [](const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + p.string() + "'");
  };
  write_file(path, to_csv(table));
  write_file(json_mirror_path(path), to_json(table).dump(2) + "\n");
}

}  // namespace sbm
