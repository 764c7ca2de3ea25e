#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flattrack/eye_synth.hpp"
#include "flattrack/geometry.hpp"
#include "flattrack/optics.hpp"
#include "flattrack/reconstruct.hpp"
#include "flattrack/regressor.hpp"

namespace flattrack {

/// Every tunable of an experiment. Read from a flat key=value file where
/// '#' starts a comment; unknown keys are rejected.
struct ExperimentConfig {
  std::uint64_t seed = 20240501;

  geometry::CalibratedScreen screen{};
  geometry::GridSpec grid{};
  synth::EyeRenderParams render{};

  int n_subjects = 13;
  int n_rounds = 5;
  int n_per_point = 1;
  // Per-round multiplier of n_per_point; empty means 1 for every round.
  std::vector<int> round_multiplicity;

  int psf_size = 64;
  optics::ContourPsfParams psf{};
  optics::NoiseModel noise{};
  double gamma = 1e-5;
  bool recon_clip01 = true;

  regress::TrainConfig train{};
  bool augment_pretrain = true;
  bool augment_finetune = true;
  int finetune_epochs = 50;
  double split_train = 0.8;
  int holdout_round = -1;  // -1 = last round of each subject

  int bench_frames = 500;
  int latency_iters = 100;

  void validate() const;

  int samples_per_point(int round_id) const;
  int effective_holdout_round() const { return holdout_round < 0 ? n_rounds - 1 : holdout_round; }

  // Streams derived from the master seed.
  std::uint64_t psf_seed() const;
  std::uint64_t render_seed() const;
  std::uint64_t noise_seed() const;
  std::uint64_t split_seed() const;
  std::uint64_t train_seed() const;

  recon::WienerConfig wiener() const;
};

/// Applies one key=value assignment. Throws ConfigError on unknown keys or
/// unparsable values.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

std::vector<std::string> config_keys();

/// Parses text in the key=value format on top of the defaults.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<string>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key with its current value, one per line, in a fixed order.
std::string to_config_text(const ExperimentConfig& cfg);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

}  // namespace flattrack
