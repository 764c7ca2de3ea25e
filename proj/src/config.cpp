#include "flattrack/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "flattrack/error.hpp"
#include "flattrack/rng.hpp"

namespace flattrack {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* first = v.data();
  const char* last = v.data() + v.size();
  if (!v.empty() && v[0] == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last || v.empty()) {
    throw ConfigError("invalid value for '" + key + "': '" + v + "'");
  }
  return out;
}

template <class T>
T parse_value(const std::string& key, const std::string& v);

template <>
int parse_value<int>(const std::string& key, const std::string& v) {
  return parse_number<int>(key, v);
}
template <>
std::uint64_t parse_value<std::uint64_t>(const std::string& key, const std::string& v) {
  return parse_number<std::uint64_t>(key, v);
}
template <>
double parse_value<double>(const std::string& key, const std::string& v) {
  const double d = parse_number<double>(key, v);
  if (!std::isfinite(d)) throw ConfigError("non-finite value for '" + key + "'");
  return d;
}
template <>
bool parse_value<bool>(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("invalid boolean for '" + key + "': '" + v + "'");
}
template <>
optics::NoiseModel::Kind parse_value<optics::NoiseModel::Kind>(const std::string& key, const std::string& v) {
  if (v == "none") return optics::NoiseModel::Kind::none;
  if (v == "gaussian") return optics::NoiseModel::Kind::gaussian;
  throw ConfigError("invalid noise kind for '" + key + "': '" + v + "' (expected none|gaussian)");
}
template <>
std::vector<int> parse_value<std::vector<int>>(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (v.empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  return out;
}

std::string format_value(int v) { return std::to_string(v); }
std::string format_value(std::uint64_t v) { return std::to_string(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}
std::string format_value(optics::NoiseModel::Kind k) {
  return k == optics::NoiseModel::Kind::none ? "none" : "gaussian";
}
std::string format_value(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct Entry {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T, class Access>
Entry entry(std::string key, Access access) {
  return {key,
          [key, access](ExperimentConfig& c, const std::string& v) { access(c) = parse_value<T>(key, v); },
          [access](const ExperimentConfig& c) { return format_value(access(const_cast<ExperimentConfig&>(c))); }};
}

#define FT_KEY(T, name, member) entry<T>(name, [](ExperimentConfig& c) -> T& { return c.member; })

const std::vector<Entry>& table() {
  static const std::vector<Entry> t = {
      FT_KEY(std::uint64_t, "seed", seed),
      FT_KEY(int, "monitor_width_px", screen.monitor.width_px),
      FT_KEY(int, "monitor_height_px", screen.monitor.height_px),
      FT_KEY(double, "pixel_pitch_mm", screen.monitor.pixel_pitch_mm),
      FT_KEY(double, "screen_distance_mm", screen.monitor.distance_mm),
      FT_KEY(double, "calib_x_px", screen.calib_px.x_px),
      FT_KEY(double, "calib_y_px", screen.calib_px.y_px),
      FT_KEY(int, "grid_rows", grid.rows),
      FT_KEY(int, "grid_cols", grid.cols),
      FT_KEY(double, "grid_spacing_x_px", grid.spacing_x_px),
      FT_KEY(double, "grid_spacing_y_px", grid.spacing_y_px),
      FT_KEY(double, "grid_origin_x_px", grid.origin_px.x_px),
      FT_KEY(double, "grid_origin_y_px", grid.origin_px.y_px),
      FT_KEY(int, "image_h", render.image_h),
      FT_KEY(int, "image_w", render.image_w),
      FT_KEY(double, "eyeball_radius_mm", render.eyeball_radius_mm),
      FT_KEY(double, "iris_radius_mm", render.iris_radius_mm),
      FT_KEY(double, "pupil_radius_mm", render.pupil_radius_mm),
      FT_KEY(double, "camera_scale_px_per_mm", render.camera_scale_px_per_mm),
      FT_KEY(double, "sclera_level", render.sclera_level),
      FT_KEY(double, "iris_level", render.iris_level),
      FT_KEY(double, "pupil_level", render.pupil_level),
      FT_KEY(double, "skin_level", render.skin_level),
      FT_KEY(double, "eyelid_openness", render.eyelid_openness),
      FT_KEY(double, "light_x_px", render.light_x_px),
      FT_KEY(double, "light_y_px", render.light_y_px),
      FT_KEY(double, "light_falloff_r0_px", render.light_falloff_r0_px),
      FT_KEY(double, "texture_noise_rel", render.texture_noise_rel),
      FT_KEY(int, "n_subjects", n_subjects),
      FT_KEY(int, "n_rounds", n_rounds),
      FT_KEY(int, "n_per_point", n_per_point),
      FT_KEY(std::vector<int>, "round_multiplicity", round_multiplicity),
      FT_KEY(int, "psf_size", psf_size),
      FT_KEY(int, "psf_n_waves", psf.n_waves),
      FT_KEY(double, "psf_levelset_width", psf.levelset_width),
      FT_KEY(double, "psf_fill_target", psf.fill_target),
      FT_KEY(optics::NoiseModel::Kind, "noise_kind", noise.kind),
      FT_KEY(double, "noise_sigma_rel", noise.sigma_rel),
      FT_KEY(double, "gamma", gamma),
      FT_KEY(bool, "recon_clip01", recon_clip01),
      FT_KEY(int, "eye_crop", train.eye_crop),
      FT_KEY(int, "epochs", train.epochs),
      FT_KEY(double, "lr", train.lr),
      FT_KEY(int, "lr_step_epochs", train.lr_step_epochs),
      FT_KEY(double, "lr_decay", train.lr_decay),
      FT_KEY(int, "batch_size", train.batch_size),
      FT_KEY(double, "adam_beta1", train.adam.beta1),
      FT_KEY(double, "adam_beta2", train.adam.beta2),
      FT_KEY(double, "adam_eps", train.adam.eps),
      FT_KEY(double, "weight_decay", train.adam.weight_decay),
      FT_KEY(double, "aug_rotation_deg", train.aug.rotation_deg),
      FT_KEY(double, "aug_translate_px", train.aug.translate_px),
      FT_KEY(double, "aug_scale_min", train.aug.scale_min),
      FT_KEY(double, "aug_scale_max", train.aug.scale_max),
      FT_KEY(bool, "augment_pretrain", augment_pretrain),
      FT_KEY(bool, "augment_finetune", augment_finetune),
      FT_KEY(int, "finetune_epochs", finetune_epochs),
      FT_KEY(double, "split_train", split_train),
      FT_KEY(int, "holdout_round", holdout_round),
      FT_KEY(int, "bench_frames", bench_frames),
      FT_KEY(int, "latency_iters", latency_iters),
  };
  return t;
}

#undef FT_KEY

}  // namespace

void ExperimentConfig::validate() const {
  screen.validate();
  grid.validate(screen.monitor);
  render.validate();
  noise.validate();
  wiener().validate();
  train.validate();
  if (n_subjects < 1) throw ConfigError("n_subjects must be at least 1");
  if (n_rounds < 2) throw ConfigError("n_rounds must be at least 2 (one round is held out)");
  if (n_per_point < 1) throw ConfigError("n_per_point must be at least 1");
  if (!round_multiplicity.empty()) {
    if (static_cast<int>(round_multiplicity.size()) != n_rounds) {
      throw ConfigError("round_multiplicity needs one entry per round");
    }
    if (std::any_of(round_multiplicity.begin(), round_multiplicity.end(), [](int m) { return m < 1; })) {
      throw ConfigError("round_multiplicity entries must be positive");
    }
  }
  if (psf_size < 16) throw ConfigError("psf_size must be at least 16");
  if (psf.n_waves < 1 || !(psf.levelset_width > 0.0) || !(psf.fill_target > 0.0 && psf.fill_target < 1.0)) {
    throw ConfigError("invalid PSF parameters");
  }
  if (finetune_epochs < 0) throw ConfigError("finetune_epochs must be non-negative");
  if (!(split_train > 0.0 && split_train < 1.0)) throw ConfigError("split_train must lie in (0, 1)");
  if (holdout_round < -1 || holdout_round >= n_rounds) throw ConfigError("holdout_round out of range");
  if (bench_frames < 1 || latency_iters < 1) throw ConfigError("bench_frames and latency_iters must be positive");
  const int crop = train.eye_crop;
  if (crop < 0 || crop > std::min(render.image_h, render.image_w)) {
    throw ConfigError("eye_crop must lie in [0, min(image_h, image_w)]");
  }
}

int ExperimentConfig::samples_per_point(int round_id) const {
  const int mult = round_multiplicity.empty() ? 1 : round_multiplicity.at(static_cast<std::size_t>(round_id));
  return n_per_point * mult;
}

std::uint64_t ExperimentConfig::psf_seed() const { return mix_seed(seed, 1); }
std::uint64_t ExperimentConfig::render_seed() const { return mix_seed(seed, 2); }
std::uint64_t ExperimentConfig::noise_seed() const { return mix_seed(seed, 3); }
std::uint64_t ExperimentConfig::split_seed() const { return mix_seed(seed, 4); }
std::uint64_t ExperimentConfig::train_seed() const { return mix_seed(seed, 5); }

recon::WienerConfig ExperimentConfig::wiener() const {
  recon::WienerConfig w;
  w.gamma = gamma;
  w.output_h = render.image_h;
  w.output_w = render.image_w;
  w.clip01 = recon_clip01;
  return w;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto& t = table();
  const auto it = std::find_if(t.begin(), t.end(), [&](const Entry& e) { return e.key == key; });
  if (it == t.end()) throw ConfigError("unknown config key '" + key + "'");
  it->set(cfg, value);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : table()) keys.push_back(e.key);
  return keys;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string to_config_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& e : table()) out += e.key + "=" + e.get(cfg) + "\n";
  return out;
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config file: " + path.string());
  out << to_config_text(cfg);
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace flattrack
