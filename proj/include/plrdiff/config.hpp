#pragma once

#include "plrdiff/degrade.hpp"
#include "plrdiff/denoiser.hpp"
#include "plrdiff/io.hpp"
#include "plrdiff/sampler.hpp"
#include "plrdiff/schedule.hpp"
#include "plrdiff/subspace.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace plrdiff {

enum class Command {
  Synthesize,
  Degrade,
  Pansharpen,
  SweepEta,
  SweepBands,
  SweepSteps,
  TrainDenoiser,
  Metrics,
};

std::string command_name(Command c);

/**
 * Every setting a command can take. JSON config keys and command-line flags
 * share these names (flags use dashes: kernel_size <-> --kernel-size). Band
 * indices are 1-based everywhere.
 */
struct RunConfig {
  // files
  std::string hrms;
  std::string lrms;
  std::string pan;
  std::string reference;
  std::string input;
  std::string output = "out";
  std::string weights;
  std::string prior_mean;
  std::string dtype = "f64";

  // degradation
  int scale = 4;
  int kernel_size = 9;
  double sigma = default_blur_sigma();
  std::optional<std::pair<Index, Index>> response_range;  ///< 1-based inclusive
  std::vector<double> response;                           ///< explicit weights

  // subspace
  Index rank = 3;
  std::vector<Index> bands;

  // sampler
  int steps = 1000;
  std::optional<double> beta_start;
  std::optional<double> beta_end;
  double eta1 = 1.0;
  double eta2 = 2.0;
  std::string vjp_mode = "stop_gradient";
  double norm_floor = 1e-12;
  std::uint64_t seed = 0;
  bool trace = true;

  // predictor
  std::string predictor = "tiny";  ///< "tiny" | "gaussian"
  double prior_variance = 1.0;

  // sweeps
  std::vector<std::pair<double, double>> eta_grid;
  std::vector<std::vector<Index>> band_lists;
  std::vector<int> steps_list;
  int repeats = 1;
  int workers = 1;

  // training
  long train_steps = 2000;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double final_lr_fraction = 0.1;
  double clip_norm = 1.0;
  Index channels = 16;
  Index embedding = 16;
  int train_count = 40;
  Index train_size = 64;
  double holdout_fraction = 0.2;
  std::vector<std::string> train_data;

  // synthesis
  Index height = 64;
  Index width = 64;
  Index total_bands = 8;

  // metrics / export
  Index q2n_block = 32;
  double peak = 1.0;
  std::vector<Index> export_bands;

  /// Range checks plus existence of the input files `command` reads.
  /// Throws ConfigError naming the first offending field.
  void validate(Command command) const;

  DegradationModel degradation(Index total_bands) const;
  NoiseSchedule schedule() const;
  NoiseSchedule schedule(int steps) const;
  GuidanceConfig guidance() const;
  TrainOptions training() const;
  DType output_dtype() const;
};

/// Overwrites fields present in a JSON object. Accepts either a flat config
/// or a provenance document (its "config" member is used). Unknown keys and
/// wrong types raise ConfigError.
void apply_config_json(RunConfig &cfg, const std::string &text);
void apply_config_file(RunConfig &cfg, const std::filesystem::path &path);

/// Flat JSON of every field, accepted back by apply_config_json.
std::string config_to_json(const RunConfig &cfg);

/// Parsers for list-valued flags. Throw ConfigError(field, ...).
std::vector<Index> parse_index_list(const std::string &field, const std::string &text);
std::vector<std::vector<Index>> parse_index_lists(const std::string &field, const std::string &text);
std::vector<std::pair<double, double>> parse_eta_grid(const std::string &field, const std::string &text);
std::vector<int> parse_int_list(const std::string &field, const std::string &text);
std::vector<double> parse_double_list(const std::string &field, const std::string &text);
std::pair<Index, Index> parse_range(const std::string &field, const std::string &text);

} // namespace plrdiff
