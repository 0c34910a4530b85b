// plrdiff command-line front end.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
// 3 numerical divergence, 4 I/O error.

#include "plrdiff/config.hpp"
#include "plrdiff/error.hpp"
#include "plrdiff/experiments.hpp"
#include "plrdiff/io.hpp"
#include "plrdiff/metrics.hpp"
#include "plrdiff/synthetic.hpp"
#include "plrdiff/version.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

namespace fs = std::filesystem;
using namespace plrdiff;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

enum class Kind { Text, Int, Real, Flag, IndexList, IndexLists, EtaGrid, IntList, RealList, Range, TextList };

struct FlagSpec {
  const char *key;
  Kind kind;
  const char *help;
};

// Flag groups; each key is also a config-file key (dashes become underscores).
const std::vector<FlagSpec> kFiles = {
    {"hrms", Kind::Text, "HRMS array file"},
    {"lrms", Kind::Text, "LRMS array file (h x w x S)"},
    {"pan", Kind::Text, "PAN array file (H x W x 1)"},
    {"reference", Kind::Text, "reference HRMS for metrics"},
    {"output", Kind::Text, "output directory"},
    {"dtype", Kind::Text, "output array dtype: f32 | f64"},
};
const std::vector<FlagSpec> kDegradation = {
    {"scale", Kind::Int, "downsampling factor q"},
    {"kernel_size", Kind::Int, "odd Gaussian kernel side"},
    {"sigma", Kind::Real, "Gaussian kernel sigma"},
    {"response_range", Kind::Range, "PAN averages bands first:last (1-based)"},
    {"response", Kind::RealList, "explicit PAN weights w1,...,wS"},
};
const std::vector<FlagSpec> kSubspace = {
    {"rank", Kind::Int, "subspace rank s"},
    {"bands", Kind::IndexList, "explicit 1-based band indices, e.g. 2,4,6"},
};
const std::vector<FlagSpec> kSampler = {
    {"steps", Kind::Int, "diffusion steps T"},
    {"beta_start", Kind::Real, "first beta (disables 1000/T rescaling)"},
    {"beta_end", Kind::Real, "last beta"},
    {"eta1", Kind::Real, "LRMS guidance step size"},
    {"eta2", Kind::Real, "PAN guidance step size"},
    {"vjp_mode", Kind::Text, "stop_gradient | full"},
    {"norm_floor", Kind::Real, "residual norm floor"},
    {"seed", Kind::Int, "random seed"},
    {"trace", Kind::Flag, "write per-step trace"},
    {"predictor", Kind::Text, "tiny | gaussian"},
    {"weights", Kind::Text, "TinyDenoiser weight file"},
    {"prior_mean", Kind::Text, "Gaussian prior mean array (H x W x s)"},
    {"prior_variance", Kind::Real, "Gaussian prior variance"},
};
const std::vector<FlagSpec> kSweep = {
    {"repeats", Kind::Int, "seeds per sweep point (median MSE)"},
    {"workers", Kind::Int, "worker threads"},
};
const std::vector<FlagSpec> kTraining = {
    {"weights", Kind::Text, "output weight file"},
    {"rank", Kind::Int, "bands of the denoiser input"},
    {"steps", Kind::Int, "diffusion steps T of the training schedule"},
    {"beta_start", Kind::Real, "first beta"},
    {"beta_end", Kind::Real, "last beta"},
    {"seed", Kind::Int, "random seed"},
    {"train_steps", Kind::Int, "SGD steps"},
    {"learning_rate", Kind::Real, "initial step size"},
    {"momentum", Kind::Real, "SGD momentum"},
    {"final_lr_fraction", Kind::Real, "step size decay over the run"},
    {"clip_norm", Kind::Real, "gradient norm clip (<= 0 disables)"},
    {"channels", Kind::Int, "hidden channels"},
    {"embedding", Kind::Int, "time embedding width (even)"},
    {"train_count", Kind::Int, "synthetic textures when no train_data"},
    {"train_size", Kind::Int, "synthetic texture side"},
    {"holdout_fraction", Kind::Real, "held-out share of the dataset"},
    {"train_data", Kind::TextList, "comma-separated training arrays"},
    {"output", Kind::Text, "output directory for the loss log"},
};
const std::vector<FlagSpec> kMetrics = {
    {"reference", Kind::Text, "reference HRMS"},
    {"input", Kind::Text, "restored HRMS"},
    {"output", Kind::Text, "output directory"},
    {"scale", Kind::Int, "ERGAS resolution ratio"},
    {"q2n_block", Kind::Int, "Q2n block side"},
    {"peak", Kind::Real, "PSNR/SSIM peak value"},
};
const std::vector<FlagSpec> kSynth = {
    {"output", Kind::Text, "output directory"},
    {"height", Kind::Int, "image height"},
    {"width", Kind::Int, "image width"},
    {"total_bands", Kind::Int, "spectral bands S"},
    {"rank", Kind::Int, "subspace rank s"},
    {"bands", Kind::IndexList, "bands reproducing the base exactly"},
    {"scale", Kind::Int, "downsampling factor the size must support"},
    {"seed", Kind::Int, "random seed"},
    {"dtype", Kind::Text, "output array dtype"},
};

std::string flag_name(const std::string &key) {
  std::string f = key;
  for (auto &c : f) {
    if (c == '_') c = '-';
  }
  return "--" + f;
}

json to_json_value(const std::string &key, Kind kind, const std::string &text) {
  switch (kind) {
  case Kind::Text: return text;
  case Kind::Int: {
    const auto v = parse_int_list(key, text);
    if (v.size() != 1) throw ConfigError(key, "expected one integer");
    return v.front();
  }
  case Kind::Real: {
    const auto v = parse_double_list(key, text);
    if (v.size() != 1) throw ConfigError(key, "expected one number");
    return v.front();
  }
  case Kind::Flag: return text == "true" || text == "1";
  case Kind::IndexList: return parse_index_list(key, text);
  case Kind::IndexLists: return parse_index_lists(key, text);
  case Kind::EtaGrid: return parse_eta_grid(key, text);
  case Kind::IntList: return parse_int_list(key, text);
  case Kind::RealList: return parse_double_list(key, text);
  case Kind::Range: return parse_range(key, text);
  case Kind::TextList: {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
  }
  }
  return nullptr;
}

// Collects raw flag text for one subcommand and turns it into a config overlay.
class Verb {
public:
  Verb(CLI::App &app, const std::string &name, const std::string &help, Command command)
      : command_(command) {
    sub_ = app.add_subcommand(name, help);
    sub_->add_option("--config", config_file_, "JSON config or provenance file");
  }

  Verb &flags(const std::vector<FlagSpec> &group) {
    for (const auto &f : group) {
      if (values_.count(f.key)) continue;
      kinds_[f.key] = f.kind;
      auto &slot = values_[f.key];
      if (f.kind == Kind::Flag) {
        sub_->add_option(flag_name(f.key), slot, f.help)->expected(0, 1)->default_str("true");
      } else {
        sub_->add_option(flag_name(f.key), slot, f.help);
      }
    }
    return *this;
  }

  Verb &option(const FlagSpec &f) { return flags({f}); }

  bool parsed() const { return sub_->parsed(); }
  Command command() const { return command_; }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_file_.empty()) apply_config_file(cfg, config_file_);
    json overlay = json::object();
    for (const auto &[key, value] : values_) {
      if (sub_->count(flag_name(key)) == 0) continue;
      overlay[key] = to_json_value(key, kinds_.at(key), value.empty() ? "true" : value);
    }
    apply_config_json(cfg, overlay.dump());
    cfg.validate(command_);
    return cfg;
  }

private:
  CLI::App *sub_ = nullptr;
  Command command_;
  std::string config_file_;
  std::map<std::string, std::string> values_;
  std::map<std::string, Kind> kinds_;
};

// ---------------------------------------------------------------------------

fs::path prepare_output(const RunConfig &cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output, ec);
  if (ec) throw IoError(cfg.output + ": cannot create output directory: " + ec.message());
  return cfg.output;
}

void write_provenance(const RunConfig &cfg, Command command, const fs::path &dir, ordered_json extra) {
  ordered_json doc;
  doc["command"] = command_name(command);
  doc["version"] = kVersion;
  doc["config"] = ordered_json::parse(config_to_json(cfg));
  for (auto &[k, v] : extra.items()) doc[k] = v;
  write_text(dir / "provenance.json", doc.dump(2) + "\n");
}

ordered_json model_json(const DegradationModel &m) {
  ordered_json j;
  j["scale"] = m.scale;
  std::vector<std::vector<double>> k(static_cast<std::size_t>(m.kernel.rows()));
  for (Index i = 0; i < m.kernel.rows(); ++i) {
    for (Index c = 0; c < m.kernel.cols(); ++c) k[static_cast<std::size_t>(i)].push_back(m.kernel(i, c));
  }
  j["kernel"] = k;
  j["response"] = std::vector<double>(m.response.data(), m.response.data() + m.response.size());
  return j;
}

BandSelection selection_for(const RunConfig &cfg, Index total_bands) {
  try {
    return cfg.bands.empty() ? select_band_indices(total_bands, cfg.rank)
                             : BandSelection(total_bands, cfg.bands);
  } catch (const ParameterError &e) {
    throw ConfigError(cfg.bands.empty() ? "rank" : "bands", e.what());
  }
}

std::shared_ptr<const NoisePredictor> make_predictor(const RunConfig &cfg, const Tensor3 &lrms,
                                                     const BandList &bands, int scale) {
  const Index s = static_cast<Index>(bands.indices.size());
  if (cfg.predictor == "tiny") {
    auto model = std::make_shared<TinyDenoiser>(load_weights(cfg.weights));
    if (model->bands() != s) {
      throw ConfigError("weights", "denoiser expects " + std::to_string(model->bands()) +
                                       " bands, selection has " + std::to_string(s));
    }
    return model;
  }
  GaussianPrior prior;
  prior.variance = cfg.prior_variance;
  if (!cfg.prior_mean.empty()) {
    prior.mean = load_array(cfg.prior_mean);
    if (prior.mean.height() != lrms.height() * scale || prior.mean.width() != lrms.width() * scale ||
        prior.mean.bands() != s) {
      throw ConfigError("prior_mean", "must be H x W x s");
    }
  } else {
    // Without an explicit mean, centre the prior on the upsampled selected LRMS bands.
    prior.mean = zero_order_hold(extract_base(lrms, bands), scale);
  }
  return std::make_shared<GaussianPredictor>(std::move(prior));
}

struct Inputs {
  Tensor3 lrms;
  Tensor3 pan;
  Tensor3 reference;
  DegradationModel model;
};

Inputs load_inputs(const RunConfig &cfg) {
  Inputs in;
  in.lrms = load_array(cfg.lrms);
  in.pan = load_array(cfg.pan);
  if (in.pan.bands() != 1) throw ConfigError("pan", "must have exactly one band");
  if (!cfg.reference.empty()) in.reference = load_array(cfg.reference);
  in.model = cfg.degradation(in.lrms.bands());
  if (in.lrms.height() * cfg.scale != in.pan.height() || in.lrms.width() * cfg.scale != in.pan.width()) {
    throw ConfigError("scale", "LRMS size times scale does not match PAN size");
  }
  return in;
}

void save(const RunConfig &cfg, const fs::path &path, const Tensor3 &x) {
  save_array(path, x, cfg.output_dtype());
}

ordered_json report_json(const MetricReport &m) { return ordered_json::parse(metrics_json(m)); }

MetricOptions metric_options(const RunConfig &cfg) {
  MetricOptions o;
  o.peak = cfg.peak;
  o.scale = cfg.scale;
  o.q2n_block = cfg.q2n_block;
  return o;
}

void write_metrics(const fs::path &dir, const MetricReport &m) {
  write_text(dir / "metrics.json", metrics_json(m) + "\n");
  write_text(dir / "metrics.csv", metrics_csv_header() + "\n" + metrics_csv_row(m) + "\n");
}

// ---------------------------------------------------------------------------

int cmd_synthesize(const RunConfig &cfg) {
  const fs::path dir = prepare_output(cfg);
  std::mt19937_64 rng(cfg.seed);
  const BandSelection sel = selection_for(cfg, cfg.total_bands);
  Tensor3 base = smooth_texture(cfg.height, cfg.width, sel.rank(), rng);
  Mat spectra = anchored_spectra(cfg.total_bands, sel.zero_based(), rng);
  const Tensor3 hrms = reconstruct(base, spectra);
  save(cfg, dir / "hrms.arr", hrms);
  save(cfg, dir / "base.arr", base);
  save_matrix_csv(dir / "spectra.csv", spectra);
  ordered_json extra;
  extra["selection"] = sel.indices();
  extra["outputs"] = {"hrms.arr", "base.arr", "spectra.csv"};
  write_provenance(cfg, Command::Synthesize, dir, extra);
  std::cout << "wrote " << (dir / "hrms.arr").string() << " (" << hrms.height() << "x" << hrms.width()
            << "x" << hrms.bands() << ")\n";
  return 0;
}

int cmd_degrade(const RunConfig &cfg) {
  const Tensor3 hrms = load_array(cfg.hrms);
  const DegradationModel model = cfg.degradation(hrms.bands());
  try {
    model.validate_for(hrms.height(), hrms.width(), hrms.bands());
  } catch (const Error &e) {
    throw ConfigError("scale", e.what());
  }
  const auto obs = wald_generate(hrms, model);
  const fs::path dir = prepare_output(cfg);
  save(cfg, dir / "lrms.arr", obs.lrms);
  save(cfg, dir / "pan.arr", obs.pan);
  ordered_json extra;
  extra["degradation"] = model_json(model);
  extra["outputs"] = {"lrms.arr", "pan.arr"};
  write_provenance(cfg, Command::Degrade, dir, extra);
  std::cout << "lrms " << obs.lrms.height() << "x" << obs.lrms.width() << "x" << obs.lrms.bands()
            << ", pan " << obs.pan.height() << "x" << obs.pan.width() << "x1\n";
  return 0;
}

int cmd_pansharpen(const RunConfig &cfg) {
  const Inputs in = load_inputs(cfg);
  const BandSelection sel = selection_for(cfg, in.lrms.bands());
  const BandList bands{sel.total_bands(), sel.indices()};
  const auto predictor = make_predictor(cfg, in.lrms, bands, cfg.scale);
  const NoiseSchedule sched = cfg.schedule();
  const SampleResult result =
      plrdiff_sample(in.lrms, in.pan, sel, in.model, *predictor, sched, cfg.guidance(), cfg.seed, cfg.trace);

  const fs::path dir = prepare_output(cfg);
  save(cfg, dir / "hrms.arr", result.hrms);
  save(cfg, dir / "a0.arr", result.a0);
  save_matrix_csv(dir / "E.csv", result.e);
  ordered_json extra;
  std::vector<std::string> outputs = {"hrms.arr", "a0.arr", "E.csv"};
  if (cfg.trace) {
    std::ostringstream os;
    write_trace_csv(os, result.trace);
    write_text(dir / "trace.csv", os.str());
    outputs.push_back("trace.csv");
  }
  for (Index b : cfg.export_bands) {
    const std::string name = "band_" + std::to_string(b) + ".pgm";
    export_band_image(result.hrms, b - 1, dir / name);
    outputs.push_back(name);
  }
  if (!cfg.reference.empty()) {
    const MetricReport m = evaluate(in.reference, result.hrms, metric_options(cfg));
    write_metrics(dir, m);
    outputs.push_back("metrics.json");
    outputs.push_back("metrics.csv");
    extra["metrics"] = report_json(m);
    std::cout << metrics_json(m) << "\n";
  }
  extra["selection"] = sel.indices();
  extra["degradation"] = model_json(in.model);
  extra["outputs"] = outputs;
  write_provenance(cfg, Command::Pansharpen, dir, extra);
  return 0;
}

SweepContext sweep_context(const RunConfig &cfg, const Inputs &in) {
  SweepContext ctx;
  ctx.lrms = in.lrms;
  ctx.pan = in.pan;
  ctx.reference = in.reference;
  ctx.model = in.model;
  const BandSelection sel = selection_for(cfg, in.lrms.bands());
  ctx.bands = BandList{sel.total_bands(), sel.indices()};
  const Tensor3 lrms = in.lrms;
  const int scale = cfg.scale;
  ctx.predictor = [cfg, lrms, scale](const BandList &bands) {
    return make_predictor(cfg, lrms, bands, scale);
  };
  ctx.guidance = cfg.guidance();
  ctx.schedule = [cfg](int t) { return cfg.schedule(t); };
  ctx.steps = cfg.steps;
  ctx.base_seed = cfg.seed;
  ctx.repeats = cfg.repeats;
  ctx.workers = cfg.workers;
  return ctx;
}

int cmd_sweep_eta(RunConfig cfg) {
  if (cfg.eta_grid.empty()) {
    for (double a : {0.0, 1.0, 2.0, 4.0}) {
      for (double b : {0.0, 1.0, 2.0, 4.0}) cfg.eta_grid.emplace_back(a, b);
    }
  }
  const Inputs in = load_inputs(cfg);
  const auto rows = sweep_eta(sweep_context(cfg, in), cfg.eta_grid);
  const fs::path dir = prepare_output(cfg);
  const std::string csv = eta_csv(rows);
  write_text(dir / "sweep_eta.csv", csv);
  write_provenance(cfg, Command::SweepEta, dir, ordered_json{{"outputs", {"sweep_eta.csv"}}});
  std::cout << csv;
  return 0;
}

int cmd_sweep_bands(RunConfig cfg) {
  const Inputs in = load_inputs(cfg);
  const SweepContext ctx = sweep_context(cfg, in);
  if (cfg.band_lists.empty()) {
    std::vector<Index> first, last;
    const Index s = static_cast<Index>(ctx.bands.indices.size());
    for (Index j = 1; j <= s; ++j) {
      first.push_back(j);
      last.push_back(in.lrms.bands() - s + j);
    }
    cfg.band_lists = {first, last};
  }
  for (const auto &list : cfg.band_lists) {
    if (list.size() != ctx.bands.indices.size() && cfg.predictor == "tiny") {
      throw ConfigError("band_lists", "every list must have as many bands as the denoiser");
    }
    for (Index i : list) {
      if (i > in.lrms.bands()) throw ConfigError("band_lists", "index exceeds band count");
    }
  }
  const auto rows = sweep_bands(ctx, cfg.band_lists);
  const fs::path dir = prepare_output(cfg);
  const std::string csv = bands_csv(rows);
  write_text(dir / "sweep_bands.csv", csv);
  write_provenance(cfg, Command::SweepBands, dir, ordered_json{{"outputs", {"sweep_bands.csv"}}});
  std::cout << csv;
  return 0;
}

int cmd_sweep_steps(RunConfig cfg) {
  if (cfg.steps_list.empty()) cfg.steps_list = {300, 600, 1000};
  const Inputs in = load_inputs(cfg);
  const auto rows = sweep_steps(sweep_context(cfg, in), cfg.steps_list);
  const fs::path dir = prepare_output(cfg);
  const std::string csv = steps_csv(rows);
  write_text(dir / "sweep_steps.csv", csv);
  write_provenance(cfg, Command::SweepSteps, dir, ordered_json{{"outputs", {"sweep_steps.csv"}}});
  std::cout << csv;
  return 0;
}

int cmd_train(const RunConfig &cfg) {
  std::vector<Tensor3> data;
  if (cfg.train_data.empty()) {
    data = texture_dataset(static_cast<std::size_t>(cfg.train_count), cfg.train_size, cfg.train_size,
                           cfg.rank, cfg.seed);
  } else {
    for (const auto &p : cfg.train_data) data.push_back(load_array(p));
  }
  TinyDenoiser::Options opts;
  opts.bands = data.front().bands();
  opts.channels = cfg.channels;
  opts.embedding = cfg.embedding;
  opts.seed = cfg.seed;
  TinyDenoiser model(opts);
  TrainOptions topts = cfg.training();
  topts.on_step = [&](long step, double loss) {
    if ((step + 1) % 100 == 0) std::cerr << "step " << step + 1 << " loss " << loss << "\n";
  };
  const TrainReport report = train_denoiser(model, data, cfg.schedule(), topts);
  save_weights(model, cfg.weights);

  const fs::path dir = prepare_output(cfg);
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss\n";
  for (const auto &e : report.epochs) os << e.epoch << ',' << e.loss << '\n';
  write_text(dir / "train_loss.csv", os.str());
  ordered_json extra;
  extra["parameters"] = model.parameter_count();
  extra["holdout_loss"] = report.holdout_loss;
  extra["zero_predictor_loss"] = report.zero_predictor_loss;
  extra["outputs"] = {cfg.weights, "train_loss.csv"};
  write_provenance(cfg, Command::TrainDenoiser, dir, extra);
  std::cout << "held-out loss " << report.holdout_loss << " (zero predictor "
            << report.zero_predictor_loss << "), " << model.parameter_count() << " parameters\n";
  return 0;
}

int cmd_metrics(const RunConfig &cfg) {
  const Tensor3 ref = load_array(cfg.reference);
  const Tensor3 out = load_array(cfg.input);
  if (!ref.same_shape(out)) throw ConfigError("input", "shape differs from reference");
  const MetricReport m = evaluate(ref, out, metric_options(cfg));
  const fs::path dir = prepare_output(cfg);
  write_metrics(dir, m);
  std::cout << metrics_json(m) << "\n";
  return 0;
}

int run(const Verb &verb) {
  RunConfig cfg = verb.resolve();
  switch (verb.command()) {
  case Command::Synthesize: return cmd_synthesize(cfg);
  case Command::Degrade: return cmd_degrade(cfg);
  case Command::Pansharpen: return cmd_pansharpen(cfg);
  case Command::SweepEta: return cmd_sweep_eta(cfg);
  case Command::SweepBands: return cmd_sweep_bands(cfg);
  case Command::SweepSteps: return cmd_sweep_steps(cfg);
  case Command::TrainDenoiser: return cmd_train(cfg);
  case Command::Metrics: return cmd_metrics(cfg);
  }
  return 1;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"plrdiff: low-rank diffusion pansharpening"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::vector<std::unique_ptr<Verb>> verbs;
  auto add = [&](const char *name, const char *help, Command c) -> Verb & {
    verbs.push_back(std::make_unique<Verb>(app, name, help, c));
    return *verbs.back();
  };
  add("synthesize", "write an exactly low-rank synthetic HRMS", Command::Synthesize).flags(kSynth);
  add("degrade", "blur, downsample and spectrally project an HRMS", Command::Degrade)
      .flags(kFiles)
      .flags(kDegradation)
      .option({"seed", Kind::Int, "recorded in provenance"});
  add("pansharpen", "fuse LRMS and PAN into an HRMS", Command::Pansharpen)
      .flags(kFiles)
      .flags(kDegradation)
      .flags(kSubspace)
      .flags(kSampler)
      .flags(kMetrics)
      .option({"export_bands", Kind::IndexList, "write PGM previews of these 1-based bands"});
  add("sweep-eta", "MSE over a grid of guidance step sizes", Command::SweepEta)
      .flags(kFiles)
      .flags(kDegradation)
      .flags(kSubspace)
      .flags(kSampler)
      .flags(kSweep)
      .option({"eta_grid", Kind::EtaGrid, "eta1:eta2 pairs, e.g. 0:0,1:2"});
  add("sweep-bands", "MSE for alternative band selections", Command::SweepBands)
      .flags(kFiles)
      .flags(kDegradation)
      .flags(kSubspace)
      .flags(kSampler)
      .flags(kSweep)
      .option({"band_lists", Kind::IndexLists, "1-based lists, e.g. 1,2,3;2,4,6"});
  add("sweep-steps", "MSE and runtime versus step count", Command::SweepSteps)
      .flags(kFiles)
      .flags(kDegradation)
      .flags(kSubspace)
      .flags(kSampler)
      .flags(kSweep)
      .option({"steps_list", Kind::IntList, "step counts, e.g. 300,600,1000"});
  add("train-denoiser", "fit a TinyDenoiser on textures or arrays", Command::TrainDenoiser).flags(kTraining);
  add("metrics", "quality indices between two arrays", Command::Metrics).flags(kMetrics);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (const auto &v : verbs) {
      if (v->parsed()) return run(*v);
    }
    return 2;
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParameterError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CapabilityError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError &e) {
    std::cerr << "diverged at step " << e.step() << ": " << e.what() << "\n";
    return 3;
  } catch (const TrainingError &e) {
    std::cerr << "training diverged at step " << e.step() << ": " << e.what() << "\n";
    return 3;
  } catch (const IoError &e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
