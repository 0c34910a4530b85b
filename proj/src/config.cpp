#include "plrdiff/config.hpp"

#include "plrdiff/error.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

namespace plrdiff {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string command_name(Command c) {
  switch (c) {
  case Command::Synthesize: return "synthesize";
  case Command::Degrade: return "degrade";
  case Command::Pansharpen: return "pansharpen";
  case Command::SweepEta: return "sweep-eta";
  case Command::SweepBands: return "sweep-bands";
  case Command::SweepSteps: return "sweep-steps";
  case Command::TrainDenoiser: return "train-denoiser";
  case Command::Metrics: return "metrics";
  }
  return "unknown";
}

namespace {

// Calls v(name, field) for every serializable field, in a fixed order.
template <class Cfg, class V> void visit_fields(Cfg &c, V &&v) {
  v("hrms", c.hrms);
  v("lrms", c.lrms);
  v("pan", c.pan);
  v("reference", c.reference);
  v("input", c.input);
  v("output", c.output);
  v("weights", c.weights);
  v("prior_mean", c.prior_mean);
  v("dtype", c.dtype);
  v("scale", c.scale);
  v("kernel_size", c.kernel_size);
  v("sigma", c.sigma);
  v("response_range", c.response_range);
  v("response", c.response);
  v("rank", c.rank);
  v("bands", c.bands);
  v("steps", c.steps);
  v("beta_start", c.beta_start);
  v("beta_end", c.beta_end);
  v("eta1", c.eta1);
  v("eta2", c.eta2);
  v("vjp_mode", c.vjp_mode);
  v("norm_floor", c.norm_floor);
  v("seed", c.seed);
  v("trace", c.trace);
  v("predictor", c.predictor);
  v("prior_variance", c.prior_variance);
  v("eta_grid", c.eta_grid);
  v("band_lists", c.band_lists);
  v("steps_list", c.steps_list);
  v("repeats", c.repeats);
  v("workers", c.workers);
  v("train_steps", c.train_steps);
  v("learning_rate", c.learning_rate);
  v("momentum", c.momentum);
  v("final_lr_fraction", c.final_lr_fraction);
  v("clip_norm", c.clip_norm);
  v("channels", c.channels);
  v("embedding", c.embedding);
  v("train_count", c.train_count);
  v("train_size", c.train_size);
  v("holdout_fraction", c.holdout_fraction);
  v("train_data", c.train_data);
  v("height", c.height);
  v("width", c.width);
  v("total_bands", c.total_bands);
  v("q2n_block", c.q2n_block);
  v("peak", c.peak);
  v("export_bands", c.export_bands);
}

template <class T> struct is_optional : std::false_type {};
template <class T> struct is_optional<std::optional<T>> : std::true_type {};

template <class T> void assign(const std::string &name, const json &v, T &field) {
  if constexpr (is_optional<T>::value) {
    if (v.is_null()) {
      field.reset();
    } else {
      typename T::value_type inner{};
      assign(name, v, inner);
      field = std::move(inner);
    }
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(name, "expected true or false");
    field = v.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(name, "expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
        throw ConfigError(name, "expected a nonnegative integer");
      }
    }
    field = v.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(name, "expected a number");
    field = v.get<T>();
  } else {
    try {
      field = v.get<T>();
    } catch (const json::exception &e) {
      throw ConfigError(name, std::string("wrong type (") + e.what() + ")");
    }
  }
}

template <class T> json to_json_value(const T &field) {
  if constexpr (is_optional<T>::value) {
    return field ? json(*field) : json(nullptr);
  } else {
    return json(field);
  }
}

bool is_file(const std::string &p) {
  std::error_code ec;
  return fs::is_regular_file(p, ec);
}

void require_file(const std::string &field, const std::string &path) {
  if (path.empty()) throw ConfigError(field, "required");
  if (!is_file(path)) throw ConfigError(field, "file not found: " + path);
}

void require_array(const std::string &field, const std::string &path) {
  require_file(field, path);
  if (!is_file(sidecar_path(path).string())) {
    throw ConfigError(field, "sidecar not found: " + sidecar_path(path).string());
  }
}

void check(bool ok, const std::string &field, const std::string &what) {
  if (!ok) throw ConfigError(field, what);
}

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }
bool nonnegative_finite(double v) { return std::isfinite(v) && v >= 0.0; }

std::vector<std::string> split(const std::string &text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, sep)) {
    const auto b = item.find_first_not_of(" \t()[]");
    const auto e = item.find_last_not_of(" \t()[]");
    out.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
  }
  return out;
}

template <class T> T parse_number(const std::string &field, const std::string &s) {
  try {
    std::size_t used = 0;
    T v{};
    if constexpr (std::is_integral_v<T>) {
      v = static_cast<T>(std::stoll(s, &used));
    } else {
      v = static_cast<T>(std::stod(s, &used));
    }
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception &) {
    throw ConfigError(field, "cannot parse '" + s + "' as a number");
  }
}

} // namespace

std::vector<Index> parse_index_list(const std::string &field, const std::string &text) {
  std::vector<Index> out;
  for (const auto &item : split(text, ',')) {
    if (item.empty()) throw ConfigError(field, "empty entry in '" + text + "'");
    out.push_back(parse_number<Index>(field, item));
  }
  if (out.empty()) throw ConfigError(field, "empty list");
  return out;
}

std::vector<std::vector<Index>> parse_index_lists(const std::string &field, const std::string &text) {
  std::vector<std::vector<Index>> out;
  for (const auto &item : split(text, ';')) out.push_back(parse_index_list(field, item));
  return out;
}

std::vector<std::pair<double, double>> parse_eta_grid(const std::string &field, const std::string &text) {
  std::vector<std::pair<double, double>> out;
  for (const auto &item : split(text, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) throw ConfigError(field, "expected eta1:eta2 pairs, got '" + item + "'");
    out.emplace_back(parse_number<double>(field, parts[0]), parse_number<double>(field, parts[1]));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string &field, const std::string &text) {
  std::vector<int> out;
  for (const auto &item : split(text, ',')) out.push_back(parse_number<int>(field, item));
  return out;
}

std::vector<double> parse_double_list(const std::string &field, const std::string &text) {
  std::vector<double> out;
  for (const auto &item : split(text, ',')) out.push_back(parse_number<double>(field, item));
  return out;
}

std::pair<Index, Index> parse_range(const std::string &field, const std::string &text) {
  const auto parts = split(text, ':');
  if (parts.size() != 2) throw ConfigError(field, "expected first:last, got '" + text + "'");
  return {parse_number<Index>(field, parts[0]), parse_number<Index>(field, parts[1])};
}

void apply_config_json(RunConfig &cfg, const std::string &text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception &e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  if (doc.is_object() && doc.contains("config") && doc["config"].is_object()) doc = doc["config"];
  if (!doc.is_object()) throw ConfigError("config", "expected a JSON object");

  std::set<std::string> known;
  visit_fields(cfg, [&](const char *name, auto &field) {
    known.insert(name);
    if (doc.contains(name)) assign(name, doc[name], field);
  });
  for (const auto &item : doc.items()) {
    if (!known.count(item.key())) throw ConfigError(item.key(), "unknown config key");
  }
}

void apply_config_file(RunConfig &cfg, const fs::path &path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config", "cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  apply_config_json(cfg, ss.str());
}

std::string config_to_json(const RunConfig &cfg) {
  ordered_json out = ordered_json::object();
  visit_fields(cfg, [&](const char *name, const auto &field) { out[name] = to_json_value(field); });
  return out.dump(2);
}

void RunConfig::validate(Command command) const {
  check(dtype == "f32" || dtype == "f64", "dtype", "must be f32 or f64");
  check(scale >= 1, "scale", "must be >= 1");
  check(kernel_size >= 1 && kernel_size % 2 == 1, "kernel_size", "must be a positive odd integer");
  check(positive_finite(sigma), "sigma", "must be > 0");
  if (response_range) {
    check(response_range->first >= 1 && response_range->second >= response_range->first,
          "response_range", "must satisfy 1 <= first <= last");
  }
  if (!response.empty()) {
    double sum = 0.0;
    for (double w : response) {
      check(nonnegative_finite(w), "response", "weights must be finite and >= 0");
      sum += w;
    }
    check(sum > 0.0, "response", "weights must not all be zero");
    check(!response_range, "response", "give either response or response_range, not both");
  }

  check(rank >= 1, "rank", "must be >= 1");
  for (std::size_t i = 0; i < bands.size(); ++i) {
    check(bands[i] >= 1, "bands", "indices are 1-based");
    check(i == 0 || bands[i] > bands[i - 1], "bands", "indices must be strictly increasing");
  }

  check(steps >= 1, "steps", "must be >= 1");
  check(beta_start.has_value() == beta_end.has_value(), beta_start ? "beta_end" : "beta_start",
        "beta_start and beta_end must be given together");
  if (beta_start) {
    check(*beta_start > 0.0 && *beta_start < 1.0, "beta_start", "must lie in (0, 1)");
    check(*beta_end > 0.0 && *beta_end < 1.0, "beta_end", "must lie in (0, 1)");
    check(*beta_end >= *beta_start, "beta_end", "must be >= beta_start");
  } else {
    check(steps == 1 || kDefaultBetaEnd * 1000.0 / steps < 1.0, "steps",
          "the rescaled default schedule needs more than 20 steps; set beta_start/beta_end");
  }
  for (int t : steps_list) {
    check(t >= 1, "steps_list", "entries must be >= 1");
    check(beta_start || t == 1 || kDefaultBetaEnd * 1000.0 / t < 1.0, "steps_list",
          "the rescaled default schedule needs more than 20 steps");
  }
  check(nonnegative_finite(eta1), "eta1", "must be >= 0");
  check(nonnegative_finite(eta2), "eta2", "must be >= 0");
  check(vjp_mode == "stop_gradient" || vjp_mode == "full", "vjp_mode",
        "must be stop_gradient or full");
  check(positive_finite(norm_floor), "norm_floor", "must be > 0");

  check(predictor == "tiny" || predictor == "gaussian", "predictor", "must be tiny or gaussian");
  check(positive_finite(prior_variance), "prior_variance", "must be > 0");

  for (const auto &[a, b] : eta_grid) {
    check(nonnegative_finite(a) && nonnegative_finite(b), "eta_grid", "entries must be >= 0");
  }
  for (const auto &list : band_lists) {
    check(!list.empty(), "band_lists", "lists must be nonempty");
    for (Index i : list) check(i >= 1, "band_lists", "indices are 1-based");
  }
  check(repeats >= 1, "repeats", "must be >= 1");
  check(workers >= 1, "workers", "must be >= 1");

  check(train_steps >= 1, "train_steps", "must be >= 1");
  check(positive_finite(learning_rate), "learning_rate", "must be > 0");
  check(momentum >= 0.0 && momentum < 1.0, "momentum", "must lie in [0, 1)");
  check(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0, "final_lr_fraction", "must lie in (0, 1]");
  check(std::isfinite(clip_norm), "clip_norm", "must be finite (<= 0 disables)");
  check(channels >= 1, "channels", "must be >= 1");
  check(embedding >= 2 && embedding % 2 == 0, "embedding", "must be even and >= 2");
  check(train_count >= 1, "train_count", "must be >= 1");
  check(train_size >= 3, "train_size", "must be >= 3");
  check(holdout_fraction >= 0.0 && holdout_fraction < 1.0, "holdout_fraction", "must lie in [0, 1)");

  check(height >= 1, "height", "must be >= 1");
  check(width >= 1, "width", "must be >= 1");
  check(total_bands >= 1, "total_bands", "must be >= 1");
  check(q2n_block >= 2, "q2n_block", "must be >= 2");
  check(positive_finite(peak), "peak", "must be > 0");
  for (Index b : export_bands) check(b >= 1, "export_bands", "indices are 1-based");

  check(!output.empty(), "output", "required");

  switch (command) {
  case Command::Synthesize:
    check(height % scale == 0 && width % scale == 0, "scale", "must divide height and width");
    check(rank <= total_bands, "rank", "must be <= total_bands");
    break;
  case Command::Degrade:
    require_array("hrms", hrms);
    break;
  case Command::Pansharpen:
  case Command::SweepEta:
  case Command::SweepBands:
  case Command::SweepSteps:
    require_array("lrms", lrms);
    require_array("pan", pan);
    if (predictor == "tiny") require_file("weights", weights);
    if (predictor == "gaussian" && !prior_mean.empty()) require_array("prior_mean", prior_mean);
    if (command != Command::Pansharpen || !reference.empty()) require_array("reference", reference);
    break;
  case Command::TrainDenoiser:
    check(!weights.empty(), "weights", "output path required");
    for (const auto &p : train_data) require_array("train_data", p);
    break;
  case Command::Metrics:
    require_array("reference", reference);
    require_array("input", input);
    break;
  }
}

DegradationModel RunConfig::degradation(Index total_bands_) const {
  Vec r;
  if (!response.empty()) {
    if (static_cast<Index>(response.size()) != total_bands_) {
      throw ConfigError("response", "has " + std::to_string(response.size()) + " weights, image has " +
                                        std::to_string(total_bands_) + " bands");
    }
    r = normalized_response(Eigen::Map<const Vec>(response.data(), total_bands_));
  } else if (response_range) {
    if (response_range->second > total_bands_) {
      throw ConfigError("response_range", "last band " + std::to_string(response_range->second) +
                                              " exceeds " + std::to_string(total_bands_) + " bands");
    }
    r = uniform_response(total_bands_, response_range->first, response_range->second);
  } else {
    r = uniform_response(total_bands_, 1, total_bands_);
  }
  return make_degradation(scale, kernel_size, sigma, std::move(r));
}

NoiseSchedule RunConfig::schedule() const { return schedule(steps); }

NoiseSchedule RunConfig::schedule(int t) const {
  NoiseSchedule s = beta_start ? linear_schedule(t, *beta_start, *beta_end) : linear_schedule(t);
  try {
    s.require_terminal_below(kDefaultTerminalThreshold);
  } catch (const ParameterError &e) {
    throw ConfigError(beta_start ? "beta_end" : "steps", e.what());
  }
  return s;
}

GuidanceConfig RunConfig::guidance() const {
  GuidanceConfig g;
  g.eta1 = eta1;
  g.eta2 = eta2;
  g.vjp_mode = vjp_mode == "full" ? VjpMode::Full : VjpMode::StopGradient;
  g.norm_floor = norm_floor;
  return g;
}

TrainOptions RunConfig::training() const {
  TrainOptions t;
  t.steps = train_steps;
  t.learning_rate = learning_rate;
  t.momentum = momentum;
  t.final_lr_fraction = final_lr_fraction;
  t.clip_norm = clip_norm;
  t.seed = seed;
  t.holdout_fraction = holdout_fraction;
  return t;
}

DType RunConfig::output_dtype() const { return dtype == "f32" ? DType::F32 : DType::F64; }

} // namespace plrdiff
