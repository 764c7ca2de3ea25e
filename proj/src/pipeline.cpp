#include "flattrack/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include "flattrack/csv.hpp"
#include "flattrack/error.hpp"
#include "flattrack/eye_synth.hpp"
#include "flattrack/parallel.hpp"
#include "flattrack/reconstruct.hpp"
#include "flattrack/rng.hpp"

namespace flattrack::pipeline {

namespace {

std::ostream* g_log = nullptr;

void log(const std::string& msg) {
  if (g_log != nullptr) *g_log << msg << std::endl;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string subject_tag(int subject_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "subject_%03d", subject_id);
  return buf;
}

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

std::vector<regress::LabeledSample> select(const Dataset& d, const std::vector<Split>& splits, int subject,
                                           Split which) {
  std::vector<regress::LabeledSample> out;
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (splits[k] == which && (subject < 0 || d.samples[k].subject_id == subject)) out.push_back(d.samples[k]);
  }
  return out;
}

std::vector<int> subject_ids(const Dataset& d) {
  std::set<int> s;
  for (const auto& x : d.samples) s.insert(x.subject_id);
  return {s.begin(), s.end()};
}

struct TrainedModels {
  regress::TrainResult pretrain;
  std::map<int, regress::TrainResult> finetune;
};

TrainedModels train_models(const Dataset& d, const std::vector<Split>& splits, const ExperimentConfig& cfg) {
  TrainedModels out;
  const auto tr = select(d, splits, -1, Split::train);
  const auto va = select(d, splits, -1, Split::val);
  log("pretraining on " + std::to_string(tr.size()) + " samples, validating on " + std::to_string(va.size()));
  out.pretrain = regress::train(regress::model_init(cfg.train_seed()), tr, va, cfg.screen, pretrain_config(cfg));
  log("pretrain: best epoch " + std::to_string(out.pretrain.best_epoch) + ", val error " +
      fmt(out.pretrain.best_val_err_deg) + " deg");
  for (int s : subject_ids(d)) {
    const auto str = select(d, splits, s, Split::train);
    const auto sva = select(d, splits, s, Split::val);
    out.finetune[s] = regress::fine_tune(out.pretrain.model, str, sva, cfg.screen, finetune_config(cfg, s));
    log(subject_tag(s) + ": fine-tuned val error " + fmt(out.finetune[s].best_val_err_deg) + " deg (from " +
        fmt(out.finetune[s].initial_val_err_deg) + ")");
  }
  return out;
}

SubjectOutcome evaluate_subject(const regress::RegressorModel& m, const Dataset& d, const std::vector<Split>& splits,
                                int subject, const ExperimentConfig& cfg) {
  SubjectOutcome o;
  o.subject_id = subject;
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (d.samples[k].subject_id != subject) continue;
    o.n_train += splits[k] == Split::train;
    o.n_val += splits[k] == Split::val;
    o.n_test += splits[k] == Split::test;
  }
  const auto test = select(d, splits, subject, Split::test);
  if (test.empty()) throw DataError("no held-out samples for " + subject_tag(subject));
  o.test = regress::evaluate(m, test, cfg.train.eye_crop, cfg.latency_iters);
  const std::vector<geometry::GazeVector> head_on(test.size(), geometry::GazeVector{0.0, 0.0, 1.0});
  o.baseline_err_deg = regress::evaluate_predictions(head_on, test).mean_err_deg;
  log(subject_tag(subject) + ": held-out error " + fmt(o.test.mean_err_deg) + " deg, baseline " +
      fmt(o.baseline_err_deg) + " deg");
  return o;
}

std::map<std::string, Split> read_splits(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (csv::split(line) != std::vector<std::string>{"sample_id", "subject_id", "round_id", "split"}) {
    throw DataError("unexpected header in " + path.string());
  }
  std::map<std::string, Split> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 4) throw DataError("malformed row in " + path.string() + ": " + line);
    try {
      out[f[0]] = split_from_string(f[3]);
    } catch (const ConfigError&) {
      throw DataError("unknown split '" + f[3] + "' in " + path.string());
    }
  }
  return out;
}

void write_eval_reports(const fs::path& dir, const std::vector<SubjectOutcome>& subjects,
                        const OverallSummary& overall, const StageLatency& lat) {
  fs::create_directories(dir);
  std::string s = "subject_id,n_test,mean_err_deg,min_err_deg,max_err_deg,baseline_deg\n";
  for (const auto& o : subjects) {
    s += csv::row(csv::num(o.subject_id), csv::num(o.n_test), csv::num(o.test.mean_err_deg),
                  csv::num(o.test.min_err_deg), csv::num(o.test.max_err_deg), csv::num(o.baseline_err_deg));
  }
  report::write_text(dir / "summary.csv", s);
  std::string ov = "metric,value\n";
  ov += csv::row(std::string("n_subjects"), csv::num(overall.n_subjects));
  ov += csv::row(std::string("n_test"), csv::num(overall.n_test));
  ov += csv::row(std::string("mean_err_deg"), csv::num(overall.mean_err_deg));
  ov += csv::row(std::string("best_case_err_deg"), csv::num(overall.best_case_err_deg));
  ov += csv::row(std::string("baseline_err_deg"), csv::num(overall.baseline_err_deg));
  report::write_text(dir / "overall.csv", ov);
  report::write_per_point_csv(dir / "per_point.csv", overall.per_point);
  report::write_latency_csv(dir / "latency.csv", lat.rows());
}

Manifest derived_manifest(const Manifest& in, const ExperimentConfig& cfg, const fs::path& out_dir) {
  Manifest out;
  out.dir = out_dir;
  out.config = in.config;
  out.config.seed = cfg.seed;
  out.config.psf_size = cfg.psf_size;
  out.config.psf = cfg.psf;
  out.config.noise = cfg.noise;
  out.config.gamma = cfg.gamma;
  out.config.recon_clip01 = cfg.recon_clip01;
  return out;
}

void require_stage(const Manifest& m, synth::Stage stage) {
  for (const auto& r : m.rows) {
    if (r.stage != stage) {
      throw DataError("expected a " + synth::to_string(stage) + " manifest, row '" + r.sample_id + "' is " +
                      synth::to_string(r.stage));
    }
  }
}

template <class Fn>
Manifest map_images(const Manifest& in, const ExperimentConfig& cfg, const fs::path& out_dir, bool force,
                    synth::Stage stage, Fn&& fn) {
  prepare_output_dir(out_dir, force);
  Manifest out = derived_manifest(in, cfg, out_dir);
  out.rows = in.rows;
  parallel_for(out.rows.size(), [&](std::size_t k) {
    auto& r = out.rows[k];
    const Image img = fn(load_fltimg(in.image_file(in.rows[k])), r);
    r.stage = stage;
    r.image_path = "images/" + r.sample_id + ".fltimg";
    save_fltimg(img, out.image_file(r));
  });
  write_manifest(out);
  return out;
}

}  // namespace

void set_log(std::ostream* log) { g_log = log; }

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "'");
}

std::vector<Split> assign_splits(const Dataset& d, const ExperimentConfig& cfg) {
  const int holdout = cfg.effective_holdout_round();
  std::vector<Split> out(d.size(), Split::train);
  std::map<int, std::vector<std::size_t>> pool;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const auto& s = d.samples[k];
    if (s.round_id == holdout) {
      out[k] = Split::test;
    } else {
      pool[s.subject_id].push_back(k);
    }
  }
  for (auto& [subject, idx] : pool) {
    Xoshiro256 rng(mix_seed(cfg.split_seed(), static_cast<std::uint64_t>(subject)));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(cfg.split_train * static_cast<double>(idx.size())));
    for (std::size_t r = n_train; r < idx.size(); ++r) out[idx[r]] = Split::val;
  }
  return out;
}

std::uint64_t noise_seed_for(const ExperimentConfig& cfg, const std::string& id) {
  return mix_seed(cfg.noise_seed(), fnv1a(id));
}

optics::Psf make_psf(const ExperimentConfig& cfg) {
  return optics::generate_contour_psf(cfg.psf_size, cfg.psf_size, cfg.psf, cfg.psf_seed());
}

Dataset render_scenes(const ExperimentConfig& cfg) {
  cfg.validate();
  Dataset d;
  for (int s = 0; s < cfg.n_subjects; ++s) {
    for (int r = 0; r < cfg.n_rounds; ++r) {
      auto round = synth::render_round(cfg.grid, cfg.screen, cfg.render, s, r, cfg.samples_per_point(r),
                                       cfg.render_seed());
      for (auto& g : round) {
        d.ids.push_back(sample_id(s, r, g.grid_i, g.grid_j, g.repeat));
        d.samples.push_back({std::move(g.image), g.screen_pt, g.gaze, s, r, g.grid_i, g.grid_j});
      }
    }
  }
  return d;
}

Dataset through_camera(const Dataset& scenes, const optics::Psf& psf, const ExperimentConfig& cfg,
                       const std::string& method) {
  Dataset out = scenes;
  const auto wcfg = cfg.wiener();
  parallel_for(out.size(), [&](std::size_t k) {
    const Image y = optics::simulate_measurement(scenes.samples[k].image, psf, cfg.noise,
                                                 noise_seed_for(cfg, scenes.ids[k]));
    out.samples[k].image = recon::reconstruct(y, psf, wcfg, method);
  });
  return out;
}

regress::TrainConfig pretrain_config(const ExperimentConfig& cfg) {
  auto t = cfg.train;
  t.augment = cfg.augment_pretrain;
  t.seed = cfg.train_seed();
  return t;
}

regress::TrainConfig finetune_config(const ExperimentConfig& cfg, int subject_id) {
  auto t = cfg.train;
  t.epochs = cfg.finetune_epochs;
  t.augment = cfg.augment_finetune;
  t.seed = mix_seed(cfg.train_seed(), 1000 + static_cast<std::uint64_t>(subject_id));
  return t;
}

ProtocolResult run_protocol(const Dataset& d, const std::vector<Split>& splits, const ExperimentConfig& cfg) {
  if (splits.size() != d.size()) throw ConfigError("split assignment does not match the dataset");
  auto trained = train_models(d, splits, cfg);
  ProtocolResult res;
  res.pretrain = std::move(trained.pretrain);
  for (auto& [s, ft] : trained.finetune) {
    auto o = evaluate_subject(ft.model, d, splits, s, cfg);
    o.finetune = std::move(ft);
    res.subjects.push_back(std::move(o));
  }
  return res;
}

OverallSummary summarize(const std::vector<SubjectOutcome>& subjects) {
  OverallSummary o;
  o.n_subjects = static_cast<int>(subjects.size());
  double err_sum = 0.0;
  double base_sum = 0.0;
  o.best_case_err_deg = subjects.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  std::map<std::pair<int, int>, regress::GridPointError> pooled;
  for (const auto& s : subjects) {
    const auto n = static_cast<int>(s.test.per_sample_err_deg.size());
    o.n_test += n;
    err_sum += s.test.mean_err_deg * n;
    base_sum += s.baseline_err_deg * n;
    o.best_case_err_deg = std::min(o.best_case_err_deg, s.test.mean_err_deg);
    for (const auto& p : s.test.per_point) {
      auto& q = pooled[{p.grid_i, p.grid_j}];
      q.grid_i = p.grid_i;
      q.grid_j = p.grid_j;
      q.screen_pt = p.screen_pt;
      q.mean_err_deg += p.mean_err_deg * p.count;
      q.count += p.count;
    }
  }
  if (o.n_test > 0) {
    o.mean_err_deg = err_sum / o.n_test;
    o.baseline_err_deg = base_sum / o.n_test;
  }
  for (auto& [key, q] : pooled) {
    q.mean_err_deg /= q.count;
    o.per_point.push_back(q);
  }
  return o;
}

StageLatency time_stages(const std::vector<Image>& scenes, const optics::Psf& psf, const regress::RegressorModel& m,
                         const ExperimentConfig& cfg, int frames) {
  if (scenes.empty() || frames < 1) throw ConfigError("latency timing needs scenes and a positive frame count");
  using clock = std::chrono::steady_clock;
  const auto ms = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };
  const int warmup = 10;
  const auto wcfg = cfg.wiener();
  std::vector<double> t_sim, t_rec, t_down, t_inf, t_tot;
  double sink = 0.0;
  for (int f = 0; f < warmup + frames; ++f) {
    const auto& x = scenes[static_cast<std::size_t>(f) % scenes.size()];
    const auto t0 = clock::now();
    const Image y = optics::simulate_measurement(x, psf, cfg.noise, static_cast<std::uint64_t>(f));
    const auto t1 = clock::now();
    const Image xh = recon::reconstruct(y, psf, wcfg);
    const auto t2 = clock::now();
    const auto in = regress::prepare_input(xh, cfg.train.eye_crop);
    const auto t3 = clock::now();
    const auto v = regress::forward(m, in);
    const auto t4 = clock::now();
    sink += v.z;
    if (f < warmup) continue;
    t_sim.push_back(ms(t0, t1));
    t_rec.push_back(ms(t1, t2));
    t_down.push_back(ms(t2, t3));
    t_inf.push_back(ms(t3, t4));
    t_tot.push_back(ms(t1, t4));
  }
  if (!std::isfinite(sink)) throw NumericalError("non-finite prediction during latency timing");
  StageLatency s;
  s.simulate = {"simulate", regress::summarize_latency(t_sim)};
  s.reconstruction = {"reconstruction", regress::summarize_latency(t_rec)};
  s.downsample = {"downsample", regress::summarize_latency(t_down)};
  s.inference = {"inference", regress::summarize_latency(t_inf)};
  s.total = {"total", regress::summarize_latency(t_tot)};
  return s;
}

Dataset load_dataset(const Manifest& m) {
  Dataset d;
  d.ids.resize(m.rows.size());
  d.samples.resize(m.rows.size());
  parallel_for(m.rows.size(), [&](std::size_t k) {
    const auto& r = m.rows[k];
    d.ids[k] = r.sample_id;
    d.samples[k] = {load_fltimg(m.image_file(r)), r.screen_pt, r.gaze, r.subject_id, r.round_id, r.grid_i, r.grid_j};
  });
  return d;
}

double cmd_gen_psf(const ExperimentConfig& cfg, const fs::path& out_path) {
  cfg.validate();
  const auto psf = make_psf(cfg);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  optics::save_psf(psf, out_path);
  const double ratio = optics::spectral_flatness_ratio(psf);
  log("psf " + std::to_string(cfg.psf_size) + "x" + std::to_string(cfg.psf_size) + ", fill " +
      fmt(optics::fill_fraction(psf)) + ", spectral flatness max/mean " + fmt(ratio, 2));
  return ratio;
}

Manifest cmd_render_dataset(const ExperimentConfig& cfg, const fs::path& out_dir, bool force) {
  cfg.validate();
  prepare_output_dir(out_dir, force);
  Manifest m;
  m.dir = out_dir;
  m.config = cfg;
  for (int s = 0; s < cfg.n_subjects; ++s) {
    for (int r = 0; r < cfg.n_rounds; ++r) {
      auto round = synth::render_round(cfg.grid, cfg.screen, cfg.render, s, r, cfg.samples_per_point(r),
                                       cfg.render_seed());
      const std::size_t base = m.rows.size();
      m.rows.resize(base + round.size());
      parallel_for(round.size(), [&](std::size_t k) {
        const auto& g = round[k];
        auto& row = m.rows[base + k];
        row.sample_id = sample_id(s, r, g.grid_i, g.grid_j, g.repeat);
        row.subject_id = s;
        row.round_id = r;
        row.grid_i = g.grid_i;
        row.grid_j = g.grid_j;
        row.image_path = "images/" + row.sample_id + ".fltimg";
        row.stage = synth::Stage::scene;
        row.gaze = g.gaze;
        row.screen_pt = g.screen_pt;
        save_fltimg(g.image, m.image_file(row));
      });
    }
    log("rendered " + subject_tag(s));
  }
  write_manifest(m);
  log("wrote " + std::to_string(m.rows.size()) + " scenes to " + out_dir.string());
  return m;
}

Manifest cmd_simulate(const fs::path& manifest_in, const fs::path& psf_path, const ExperimentConfig& cfg,
                      const fs::path& out_dir, bool force) {
  cfg.validate();
  const Manifest in = load_manifest(manifest_in);
  require_stage(in, synth::Stage::scene);
  const auto psf = optics::load_psf(psf_path);
  auto out = map_images(in, cfg, out_dir, force, synth::Stage::measurement, [&](const Image& x, const ManifestRow& r) {
    return optics::simulate_measurement(x, psf, cfg.noise, noise_seed_for(cfg, r.sample_id));
  });
  log("simulated " + std::to_string(out.rows.size()) + " measurements");
  return out;
}

Manifest cmd_reconstruct(const fs::path& manifest_in, const fs::path& psf_path, const ExperimentConfig& cfg,
                         const fs::path& out_dir, bool force) {
  cfg.validate();
  const Manifest in = load_manifest(manifest_in);
  require_stage(in, synth::Stage::measurement);
  const auto psf = optics::load_psf(psf_path);
  auto wcfg = cfg.wiener();
  wcfg.output_h = 0;
  wcfg.output_w = 0;
  auto out = map_images(in, cfg, out_dir, force, synth::Stage::reconstruction,
                        [&](const Image& y, const ManifestRow&) { return recon::reconstruct(y, psf, wcfg); });
  log("reconstructed " + std::to_string(out.rows.size()) + " images (gamma " + csv::num(cfg.gamma) + ")");
  return out;
}

void cmd_train(const fs::path& manifest_in, const ExperimentConfig& cfg, const fs::path& model_dir) {
  cfg.validate();
  const Manifest m = load_manifest(manifest_in);
  const Dataset d = load_dataset(m);
  const auto splits = assign_splits(d, cfg);
  fs::create_directories(model_dir);
  std::string sp = "sample_id,subject_id,round_id,split\n";
  for (std::size_t k = 0; k < d.size(); ++k) {
    sp += csv::row(d.ids[k], csv::num(d.samples[k].subject_id), csv::num(d.samples[k].round_id),
                   to_string(splits[k]));
  }
  report::write_text(model_dir / "splits.csv", sp);
  const auto trained = train_models(d, splits, cfg);
  regress::save_model(trained.pretrain.model, model_dir / "base.ftkmdl");
  report::write_history_csv(model_dir / "history_base.csv", trained.pretrain.history);
  for (const auto& [s, ft] : trained.finetune) {
    regress::save_model(ft.model, model_dir / (subject_tag(s) + ".ftkmdl"));
    report::write_history_csv(model_dir / ("history_" + subject_tag(s) + ".csv"), ft.history);
  }
}

OverallSummary cmd_eval(const fs::path& manifest_in, const fs::path& model_dir, const fs::path& psf_path,
                        const ExperimentConfig& cfg, const fs::path& report_dir) {
  cfg.validate();
  const Manifest m = load_manifest(manifest_in);
  const Dataset d = load_dataset(m);
  const auto split_map = read_splits(model_dir / "splits.csv");
  std::vector<Split> splits(d.size());
  for (std::size_t k = 0; k < d.size(); ++k) {
    const auto it = split_map.find(d.ids[k]);
    if (it == split_map.end()) throw DataError("sample '" + d.ids[k] + "' missing from splits.csv");
    splits[k] = it->second;
  }
  const auto psf = optics::load_psf(psf_path);
  std::vector<SubjectOutcome> outcomes;
  std::vector<Image> timing_scenes;
  regress::RegressorModel timing_model;
  for (int s : subject_ids(d)) {
    const auto path = model_dir / (subject_tag(s) + ".ftkmdl");
    const auto model = regress::load_model(path);
    outcomes.push_back(evaluate_subject(model, d, splits, s, cfg));
    if (timing_scenes.empty()) {
      for (const auto& x : select(d, splits, s, Split::test)) timing_scenes.push_back(x.image);
      timing_model = model;
    }
  }
  const auto overall = summarize(outcomes);
  const auto lat = time_stages(timing_scenes, psf, timing_model, cfg, cfg.latency_iters);
  write_eval_reports(report_dir, outcomes, overall, lat);
  log("mean held-out error " + fmt(overall.mean_err_deg) + " deg, best case " + fmt(overall.best_case_err_deg) +
      " deg, head-on baseline " + fmt(overall.baseline_err_deg) + " deg");
  log("latency median: reconstruction " + fmt(lat.reconstruction.stats.median_ms) + " ms, regression " +
      fmt(lat.downsample.stats.median_ms + lat.inference.stats.median_ms) + " ms, " + fmt(lat.fps(), 1) + " fps");
  return overall;
}

void cmd_grid_report(const fs::path& per_point_csv, const ExperimentConfig& cfg, const fs::path& out_svg) {
  const auto points = report::read_per_point_csv(per_point_csv);
  report::GridSvgOptions opts;
  opts.width_px = cfg.screen.monitor.width_px;
  opts.height_px = cfg.screen.monitor.height_px;
  report::write_grid_svg(out_svg, points, opts);
  log("wrote " + std::to_string(points.size()) + " circles to " + out_svg.string());
}

std::vector<CompareRow> compare_lensed(const Dataset& scenes, const optics::Psf& psf, const ExperimentConfig& cfg) {
  const auto splits = assign_splits(scenes, cfg);
  log("lensed arm");
  const auto lensed = run_protocol(scenes, splits, cfg);
  log("lensless arm");
  const auto lensless = run_protocol(through_camera(scenes, psf, cfg), splits, cfg);
  std::vector<CompareRow> rows;
  for (std::size_t i = 0; i < lensed.subjects.size(); ++i) {
    rows.push_back({lensed.subjects[i].subject_id, lensed.subjects[i].test.mean_err_deg,
                    lensless.subjects[i].test.mean_err_deg});
  }
  return rows;
}

std::vector<CompareRow> cmd_compare_lensed(const fs::path& scenes_manifest, const fs::path& psf_path,
                                           const ExperimentConfig& cfg, const fs::path& out_csv) {
  cfg.validate();
  const Manifest m = load_manifest(scenes_manifest);
  require_stage(m, synth::Stage::scene);
  const auto rows = compare_lensed(load_dataset(m), optics::load_psf(psf_path), cfg);
  std::string s = "subject_id,lensed_deg,lensless_deg,gap_deg\n";
  for (const auto& r : rows) {
    s += csv::row(csv::num(r.subject_id), csv::num(r.lensed_err_deg), csv::num(r.lensless_err_deg),
                  csv::num(r.lensless_err_deg - r.lensed_err_deg));
  }
  report::write_text(out_csv, s);
  return rows;
}

StageLatency cmd_bench(const fs::path& model_path, const fs::path& psf_path, const ExperimentConfig& cfg,
                       const fs::path& out_csv) {
  cfg.validate();
  const auto model = regress::load_model(model_path);
  const auto psf = optics::load_psf(psf_path);
  const auto round = synth::render_round(cfg.grid, cfg.screen, cfg.render, 0, 0, 1, cfg.render_seed());
  std::vector<Image> scenes;
  for (const auto& g : round) scenes.push_back(g.image);
  const auto lat = time_stages(scenes, psf, model, cfg, cfg.bench_frames);
  report::write_latency_csv(out_csv, lat.rows());
  log("bench over " + std::to_string(cfg.bench_frames) + " frames: total median " + fmt(lat.total.stats.median_ms) +
      " ms (p95 " + fmt(lat.total.stats.p95_ms) + "), " + fmt(lat.fps(), 1) + " fps; inference median " +
      fmt(lat.inference.stats.median_ms) + " ms");
  return lat;
}

void cmd_run(const ExperimentConfig& cfg, const fs::path& out_dir, bool force) {
  cfg.validate();
  if (fs::exists(out_dir / "scenes" / kManifestCsv) && !force) {
    throw DataError("output directory already holds a run (use --force to overwrite): " + out_dir.string());
  }
  fs::create_directories(out_dir);
  save_config(cfg, out_dir / "config.cfg");
  const auto psf = out_dir / "psf.fltimg";
  cmd_gen_psf(cfg, psf);
  cmd_render_dataset(cfg, out_dir / "scenes", true);
  cmd_simulate(out_dir / "scenes", psf, cfg, out_dir / "measurements", true);
  cmd_reconstruct(out_dir / "measurements", psf, cfg, out_dir / "reconstructions", true);
  cmd_train(out_dir / "reconstructions", cfg, out_dir / "models");
  cmd_eval(out_dir / "reconstructions", out_dir / "models", psf, cfg, out_dir / "report");
  cmd_grid_report(out_dir / "report" / "per_point.csv", cfg, out_dir / "report" / "grid.svg");
  cmd_bench(out_dir / "models" / "base.ftkmdl", psf, cfg, out_dir / "report" / "bench.csv");
}

}  // namespace flattrack::pipeline
