#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "flattrack/config.hpp"
#include "flattrack/manifest.hpp"
#include "flattrack/optics.hpp"
#include "flattrack/regressor.hpp"
#include "flattrack/report.hpp"

namespace flattrack::pipeline {

namespace fs = std::filesystem;

/// Progress messages go here; nullptr (the default) silences them.
void set_log(std::ostream* log);

/// In-memory samples with stable identifiers (the manifest sample_id).
struct Dataset {
  std::vector<std::string> ids;
  std::vector<regress::LabeledSample> samples;

  std::size_t size() const { return samples.size(); }
};

enum class Split { train, val, test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// The held-out round of every subject is test; the remaining samples of
/// each subject are shuffled under the split seed and cut train:val.
std::vector<Split> assign_splits(const Dataset& d, const ExperimentConfig& cfg);

std::uint64_t noise_seed_for(const ExperimentConfig& cfg, const std::string& id);

optics::Psf make_psf(const ExperimentConfig& cfg);

/// Renders every configured subject and round.
Dataset render_scenes(const ExperimentConfig& cfg);

/// Simulates the lensless measurement of every scene and reconstructs it
/// with the named reconstructor ("identity" keeps the measurement).
Dataset through_camera(const Dataset& scenes, const optics::Psf& psf, const ExperimentConfig& cfg,
                       const std::string& method = "wiener");

struct SubjectOutcome {
  int subject_id = 0;
  int n_train = 0;
  int n_val = 0;
  int n_test = 0;
  regress::TrainResult finetune;
  regress::EvalReport test;
  double baseline_err_deg = 0.0;  // constant head-on predictor
};

struct ProtocolResult {
  regress::TrainResult pretrain;
  std::vector<SubjectOutcome> subjects;  // ascending subject_id
};

regress::TrainConfig pretrain_config(const ExperimentConfig& cfg);
regress::TrainConfig finetune_config(const ExperimentConfig& cfg, int subject_id);

/// Pretrains on the pooled train splits, then fine-tunes and tests one
/// model per subject on its held-out round.
ProtocolResult run_protocol(const Dataset& d, const std::vector<Split>& splits, const ExperimentConfig& cfg);

struct OverallSummary {
  int n_subjects = 0;
  int n_test = 0;
  double mean_err_deg = 0.0;       // over all held-out samples
  double best_case_err_deg = 0.0;  // lowest per-subject mean
  double baseline_err_deg = 0.0;
  std::vector<regress::GridPointError> per_point;  // pooled over subjects
};

OverallSummary summarize(const std::vector<SubjectOutcome>& subjects);

struct StageLatency {
  report::LatencyRow reconstruction;
  report::LatencyRow downsample;
  report::LatencyRow inference;
  report::LatencyRow total;      // reconstruction + downsample + inference per frame
  report::LatencyRow simulate;   // timed for reference, outside the budget
  double fps() const { return total.stats.median_ms > 0 ? 1000.0 / total.stats.median_ms : 0.0; }
  std::vector<report::LatencyRow> rows() const { return {simulate, reconstruction, downsample, inference, total}; }
};

/// Single-frame latency over `frames` warm frames cycling through scenes.
StageLatency time_stages(const std::vector<Image>& scenes, const optics::Psf& psf, const regress::RegressorModel& m,
                         const ExperimentConfig& cfg, int frames);

// Commands. Each validates its config and writes its artifacts.

double cmd_gen_psf(const ExperimentConfig& cfg, const fs::path& out_path);
Manifest cmd_render_dataset(const ExperimentConfig& cfg, const fs::path& out_dir, bool force);
Manifest cmd_simulate(const fs::path& manifest_in, const fs::path& psf_path, const ExperimentConfig& cfg,
                      const fs::path& out_dir, bool force);
Manifest cmd_reconstruct(const fs::path& manifest_in, const fs::path& psf_path, const ExperimentConfig& cfg,
                         const fs::path& out_dir, bool force);
/// Writes base.ftkmdl, subject_NNN.ftkmdl, history CSVs and splits.csv.
void cmd_train(const fs::path& manifest_in, const ExperimentConfig& cfg, const fs::path& model_dir);
/// Writes summary.csv, overall.csv, per_point.csv and latency.csv.
OverallSummary cmd_eval(const fs::path& manifest_in, const fs::path& model_dir, const fs::path& psf_path,
                        const ExperimentConfig& cfg, const fs::path& report_dir);
void cmd_grid_report(const fs::path& per_point_csv, const ExperimentConfig& cfg, const fs::path& out_svg);

struct CompareRow {
  int subject_id = 0;
  double lensed_err_deg = 0.0;
  double lensless_err_deg = 0.0;
};
/// subject_id,lensed_deg,lensless_deg,gap_deg
std::vector<CompareRow> cmd_compare_lensed(const fs::path& scenes_manifest, const fs::path& psf_path,
                                           const ExperimentConfig& cfg, const fs::path& out_csv);
std::vector<CompareRow> compare_lensed(const Dataset& scenes, const optics::Psf& psf, const ExperimentConfig& cfg);

StageLatency cmd_bench(const fs::path& model_path, const fs::path& psf_path, const ExperimentConfig& cfg,
                       const fs::path& out_csv);

/// gen-psf, render, simulate, reconstruct, train, eval, grid report and
/// bench under one output directory.
void cmd_run(const ExperimentConfig& cfg, const fs::path& out_dir, bool force);

Dataset load_dataset(const Manifest& m);

}  // namespace flattrack::pipeline
