#include "flattrack/manifest.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "flattrack/csv.hpp"
#include "flattrack/error.hpp"

namespace flattrack {

namespace {

constexpr double kUnitTol = 1e-6;
constexpr double kCoherenceTol = 1e-6;

template <class T>
T field(const std::vector<std::string>& f, std::size_t i, const std::string& where) {
  T v{};
  const auto& s = f[i];
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw DataError(where + ": malformed field " + std::to_string(i + 1) + " '" + s + "'");
  }
  return v;
}

}  // namespace

std::string sample_id(int subject_id, int round_id, int grid_i, int grid_j, int repeat) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "s%03d_r%02d_i%02d_j%02d_k%d", subject_id, round_id, grid_i, grid_j, repeat);
  return buf;
}

void write_manifest(const Manifest& m) {
  std::filesystem::create_directories(m.dir);
  save_config(m.config, m.dir / kManifestSidecar);
  std::ofstream out(m.dir / kManifestCsv, std::ios::binary);
  if (!out) throw DataError("cannot write manifest in " + m.dir.string());
  out << kManifestHeader << '\n';
  for (const auto& r : m.rows) {
    out << csv::row(r.sample_id, csv::num(r.subject_id), csv::num(r.round_id), csv::num(r.grid_i),
                    csv::num(r.grid_j), r.image_path, synth::to_string(r.stage), csv::num(r.gaze.x),
                    csv::num(r.gaze.y), csv::num(r.gaze.z), csv::num(r.screen_pt.x_px), csv::num(r.screen_pt.y_px));
  }
  if (!out) throw DataError("manifest write failed in " + m.dir.string());
}

void validate_manifest(const Manifest& m) {
  std::unordered_set<std::string> ids;
  for (const auto& r : m.rows) {
    if (!ids.insert(r.sample_id).second) throw DataError("duplicate sample_id '" + r.sample_id + "'");
    if (std::abs(r.gaze.norm() - 1.0) > kUnitTol) throw DataError("gaze not unit-norm for '" + r.sample_id + "'");
    const auto expected = geometry::screen_to_gaze(r.screen_pt, m.config.screen);
    if (std::abs(expected.x - r.gaze.x) > kCoherenceTol || std::abs(expected.y - r.gaze.y) > kCoherenceTol ||
        std::abs(expected.z - r.gaze.z) > kCoherenceTol) {
      throw DataError("gaze/screen label mismatch for '" + r.sample_id + "'");
    }
    if (r.image_path.empty() || !std::filesystem::is_regular_file(m.image_file(r))) {
      throw DataError("unresolvable image path '" + r.image_path + "' for '" + r.sample_id + "'");
    }
  }
}

Manifest load_manifest(const std::filesystem::path& dir_or_csv) {
  Manifest m;
  const bool is_csv = std::filesystem::is_regular_file(dir_or_csv);
  m.dir = is_csv ? dir_or_csv.parent_path() : dir_or_csv;
  if (m.dir.empty()) m.dir = ".";
  const auto csv_path = is_csv ? dir_or_csv : m.dir / kManifestCsv;
  const auto sidecar = m.dir / kManifestSidecar;
  if (!std::filesystem::is_regular_file(csv_path)) throw DataError("manifest not found: " + csv_path.string());
  if (!std::filesystem::is_regular_file(sidecar)) throw DataError("manifest sidecar not found: " + sidecar.string());
  try {
    m.config = load_config(sidecar);
  } catch (const ConfigError& e) {
    throw DataError(std::string("invalid manifest sidecar: ") + e.what());
  }

  std::ifstream in(csv_path, std::ios::binary);
  std::string line;
  if (!std::getline(in, line) || csv::split(line) != csv::split(kManifestHeader)) {
    throw DataError("unexpected manifest header in " + csv_path.string());
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::string where = csv_path.string() + ":" + std::to_string(lineno);
    const auto f = csv::split(line);
    if (f.size() != 12) throw DataError(where + ": expected 12 fields");
    ManifestRow r;
    r.sample_id = f[0];
    r.subject_id = field<int>(f, 1, where);
    r.round_id = field<int>(f, 2, where);
    r.grid_i = field<int>(f, 3, where);
    r.grid_j = field<int>(f, 4, where);
    r.image_path = f[5];
    try {
      r.stage = synth::stage_from_string(f[6]);
    } catch (const Error&) {
      throw DataError(where + ": unknown stage '" + f[6] + "'");
    }
    r.gaze = {field<double>(f, 7, where), field<double>(f, 8, where), field<double>(f, 9, where)};
    r.screen_pt = {field<double>(f, 10, where), field<double>(f, 11, where)};
    m.rows.push_back(std::move(r));
  }
  validate_manifest(m);
  return m;
}

void prepare_output_dir(const std::filesystem::path& dir, bool force) {
  if (std::filesystem::exists(dir / kManifestCsv) && !force) {
    throw DataError("output directory already holds a dataset (use --force to overwrite): " + dir.string());
  }
  std::error_code ec;
  std::filesystem::remove_all(dir / "images", ec);
  std::filesystem::remove(dir / kManifestCsv, ec);
  std::filesystem::remove(dir / kManifestSidecar, ec);
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
}

}  // namespace flattrack
