#include "flattrack/regressor.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "flattrack/error.hpp"
#include "flattrack/rng.hpp"

namespace flattrack::regress {

namespace {

constexpr double kDegenerateNorm = 1e-12;
constexpr double kMinProjectableZ = 1e-6;
constexpr double kInitialForwardBias = 1.0;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

geometry::GazeVector normalize_or_forward(const Eigen::Ref<const Eigen::VectorXd>& u) {
  const double n = u.norm();
  if (!(n > kDegenerateNorm)) return {0.0, 0.0, 1.0};
  return {u(0) / n, u(1) / n, u(2) / n};
}

}  // namespace

std::size_t RegressorModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool RegressorModel::all_finite() const {
  return std::all_of(layers.begin(), layers.end(),
                     [](const DenseLayer& l) { return l.weight.allFinite() && l.bias.allFinite(); });
}

ParameterSet zeros_like(const RegressorModel& m) {
  ParameterSet z;
  for (const auto& l : m.layers) {
    z.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  }
  return z;
}

RegressorModel model_init(std::uint64_t seed) {
  Xoshiro256 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  RegressorModel m;
  for (int l = 0; l < kNumLayers; ++l) {
    const int fan_in = kLayerWidths[l];
    const int fan_out = kLayerWidths[l + 1];
    const double sd = std::sqrt(2.0 / fan_in);
    DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = sd * gauss(rng);
    }
    m.layers.push_back(std::move(layer));
  }
  m.layers.back().bias(2) = kInitialForwardBias;
  return m;
}

ForwardCache forward_batch(const RegressorModel& m, const Eigen::MatrixXd& inputs) {
  if (m.layers.size() != kNumLayers) throw ConfigError("model must have three dense layers");
  if (inputs.rows() != kInputSize) throw ConfigError("regressor input must have 1024 rows");
  if (!inputs.allFinite()) throw NumericalError("non-finite regressor input");
  ForwardCache c;
  c.x = inputs;
  c.z1 = (m.layers[0].weight * inputs).colwise() + m.layers[0].bias;
  c.h1 = c.z1.cwiseMax(0.0);
  c.z2 = (m.layers[1].weight * c.h1).colwise() + m.layers[1].bias;
  c.h2 = c.z2.cwiseMax(0.0);
  c.u = (m.layers[2].weight * c.h2).colwise() + m.layers[2].bias;
  c.gaze.reserve(static_cast<std::size_t>(inputs.cols()));
  for (Eigen::Index b = 0; b < c.u.cols(); ++b) c.gaze.push_back(normalize_or_forward(c.u.col(b)));
  return c;
}

geometry::GazeVector forward(const RegressorModel& m, std::span<const double> input) {
  if (input.size() != kInputSize) throw ConfigError("regressor input must have 1024 values");
  const Eigen::Map<const Eigen::VectorXd> x(input.data(), kInputSize);
  if (!x.allFinite()) throw NumericalError("non-finite regressor input");
  const Eigen::VectorXd h1 = ((m.layers[0].weight * x) + m.layers[0].bias).cwiseMax(0.0);
  const Eigen::VectorXd h2 = ((m.layers[1].weight * h1) + m.layers[1].bias).cwiseMax(0.0);
  const Eigen::VectorXd u = (m.layers[2].weight * h2) + m.layers[2].bias;
  return normalize_or_forward(u);
}

double loss_l1(const geometry::ScreenPoint& pred, const geometry::ScreenPoint& gt) {
  return std::abs(pred.x_px - gt.x_px) + std::abs(pred.y_px - gt.y_px);
}

BackwardResult backward(const RegressorModel& m, const ForwardCache& cache,
                        std::span<const geometry::ScreenPoint> targets, const geometry::CalibratedScreen& screen,
                        const LayerMask& mask) {
  const Eigen::Index batch = cache.u.cols();
  if (static_cast<Eigen::Index>(targets.size()) != batch) throw ConfigError("targets/batch size mismatch");
  BackwardResult res;
  res.grads = zeros_like(m);

  // dL/du per sample, before averaging.
  Eigen::MatrixXd du = Eigen::MatrixXd::Zero(3, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double n = cache.u.col(b).norm();
    const auto& v = cache.gaze[static_cast<std::size_t>(b)];
    if (!(n > kDegenerateNorm) || !(v.z > kMinProjectableZ)) {
      ++res.skipped;
      continue;
    }
    const auto pred = geometry::gaze_to_screen(v, screen);
    const auto& gt = targets[static_cast<std::size_t>(b)];
    res.loss_sum += loss_l1(pred, gt);
    ++res.used;
    const double sx = sign(pred.x_px - gt.x_px);
    const double sy = sign(pred.y_px - gt.y_px);
    const auto jac = geometry::gaze_to_screen_jacobian(v, screen);
    const Eigen::Vector3d dv(sx * jac[0][0] + sy * jac[1][0], sx * jac[0][1] + sy * jac[1][1],
                             sx * jac[0][2] + sy * jac[1][2]);
    const Eigen::Vector3d vv(v.x, v.y, v.z);
    du.col(b) = (dv - vv * vv.dot(dv)) / n;
  }
  if (res.used == 0) return res;
  du /= static_cast<double>(res.used);

  auto& g = res.grads.layers;
  if (mask[2]) {
    g[2].weight = du * cache.h2.transpose();
    g[2].bias = du.rowwise().sum();
  }
  if (!mask[1] && !mask[0]) return res;
  const Eigen::MatrixXd dz2 = (m.layers[2].weight.transpose() * du).cwiseProduct(
      (cache.z2.array() > 0.0).cast<double>().matrix());
  if (mask[1]) {
    g[1].weight = dz2 * cache.h1.transpose();
    g[1].bias = dz2.rowwise().sum();
  }
  if (!mask[0]) return res;
  const Eigen::MatrixXd dz1 = (m.layers[1].weight.transpose() * dz2).cwiseProduct(
      (cache.z1.array() > 0.0).cast<double>().matrix());
  g[0].weight = dz1 * cache.x.transpose();
  g[0].bias = dz1.rowwise().sum();
  return res;
}

AdamState adam_init(const RegressorModel& m) { return {zeros_like(m), zeros_like(m), 0}; }

void adam_step(RegressorModel& m, const ParameterSet& grads, AdamState& state, double lr, const AdamConfig& cfg,
               const LayerMask& mask) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const auto update = [&](auto& w, const auto& gw, auto& m1, auto& m2) {
    const auto g = (gw + cfg.weight_decay * w).eval();
    m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * g;
    m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    w.array() -= lr * (m1.array() / bc1) / ((m2.array() / bc2).sqrt() + cfg.eps);
  };
  for (int l = 0; l < kNumLayers; ++l) {
    if (!mask[l]) continue;
    auto& L = m.layers[l];
    update(L.weight, grads.layers[l].weight, state.m1.layers[l].weight, state.m2.layers[l].weight);
    update(L.bias, grads.layers[l].bias, state.m1.layers[l].bias, state.m2.layers[l].bias);
  }
}

Image affine_warp(const Image& img, const AffineParams& p) {
  const int h = img.height();
  const int w = img.width();
  double border = 0.0;
  int nb = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (r == 0 || c == 0 || r == h - 1 || c == w - 1) {
        border += img(r, c);
        ++nb;
      }
    }
  }
  border = nb > 0 ? border / nb : 0.0;

  const double cx = 0.5 * (w - 1);
  const double cy = 0.5 * (h - 1);
  const double th = p.rotation_deg * std::numbers::pi / 180.0;
  const double ct = std::cos(th);
  const double st = std::sin(th);
  const double inv_s = 1.0 / p.scale;
  Image out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      // Inverse map: undo translation, then rotation and scale about the center.
      const double ox = c - cx - p.translate_x_px;
      const double oy = r - cy - p.translate_y_px;
      const double sx = cx + inv_s * (ct * ox + st * oy);
      const double sy = cy + inv_s * (-st * ox + ct * oy);
      const double fx = std::floor(sx);
      const double fy = std::floor(sy);
      const double ax = sx - fx;
      const double ay = sy - fy;
      const int x0 = static_cast<int>(fx);
      const int y0 = static_cast<int>(fy);
      const auto tap = [&](int yy, int xx) { return (yy >= 0 && yy < h && xx >= 0 && xx < w) ? img(yy, xx) : border; };
      double v = (1 - ay) * ((1 - ax) * tap(y0, x0) + (ax > 0 ? ax * tap(y0, x0 + 1) : 0.0));
      if (ay > 0) v += ay * ((1 - ax) * tap(y0 + 1, x0) + (ax > 0 ? ax * tap(y0 + 1, x0 + 1) : 0.0));
      out(r, c) = v;
    }
  }
  return out;
}

Image augment_affine(const Image& img, const AugmentRanges& ranges, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  const auto sym = [&](double range) { return range * (2.0 * rng.uniform() - 1.0); };
  AffineParams p;
  p.rotation_deg = sym(ranges.rotation_deg);
  p.translate_x_px = sym(ranges.translate_px);
  p.translate_y_px = sym(ranges.translate_px);
  p.scale = ranges.scale_min + (ranges.scale_max - ranges.scale_min) * rng.uniform();
  return affine_warp(img, p);
}

std::vector<double> prepare_input(const Image& img, int eye_crop) {
  const Image cropped = (eye_crop > 0 && (eye_crop < img.height() || eye_crop < img.width()))
                            ? center_crop(img, std::min(eye_crop, img.height()), std::min(eye_crop, img.width()))
                            : img;
  return resize_area(cropped, kInputSide, kInputSide).data();
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (!(lr >= 0.0) || lr_step_epochs < 1 || !(lr_decay > 0.0) || batch_size < 1) {
    throw ConfigError("invalid learning-rate schedule or batch size");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0) ||
      !(adam.weight_decay >= 0.0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
  if (aug.rotation_deg < 0.0 || aug.translate_px < 0.0 || !(aug.scale_min > 0.0) || aug.scale_max < aug.scale_min) {
    throw ConfigError("invalid augmentation ranges");
  }
}

double TrainConfig::lr_at_epoch(int epoch) const {
  return lr * std::pow(lr_decay, static_cast<double>((epoch - 1) / lr_step_epochs));
}

Eigen::MatrixXd stack_inputs(std::span<const LabeledSample> samples, int eye_crop) {
  Eigen::MatrixXd x(kInputSize, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto in = prepare_input(samples[i].image, eye_crop);
    x.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(in.data(), kInputSize);
  }
  return x;
}

SetMetrics score(const RegressorModel& m, const Eigen::MatrixXd& inputs, std::span<const LabeledSample> samples,
                 const geometry::CalibratedScreen& screen) {
  SetMetrics s;
  if (samples.empty()) return s;
  const auto cache = forward_batch(m, inputs);
  double l1 = 0.0;
  double err = 0.0;
  int projected = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& v = cache.gaze[i];
    err += geometry::angular_error_deg(v, samples[i].gaze);
    if (v.z > kMinProjectableZ) {
      l1 += loss_l1(geometry::gaze_to_screen(v, screen), samples[i].target);
      ++projected;
    } else {
      ++s.unprojectable;
    }
  }
  s.mean_l1 = projected > 0 ? l1 / projected : std::numeric_limits<double>::infinity();
  s.mean_err_deg = err / static_cast<double>(samples.size());
  return s;
}

TrainResult train(const RegressorModel& init, std::span<const LabeledSample> train_set,
                  std::span<const LabeledSample> val_set, const geometry::CalibratedScreen& screen,
                  const TrainConfig& cfg, const LayerMask& mask) {
  cfg.validate();
  if (train_set.empty() || val_set.empty()) throw ConfigError("training and validation sets must be non-empty");
  const Eigen::MatrixXd train_inputs = stack_inputs(train_set, cfg.eye_crop);
  const Eigen::MatrixXd val_inputs = stack_inputs(val_set, cfg.eye_crop);

  TrainResult result;
  RegressorModel model = init;
  AdamState adam = adam_init(model);
  result.model = model;
  result.initial_val_err_deg = score(model, val_inputs, val_set, screen).mean_err_deg;
  result.best_val_err_deg = result.initial_val_err_deg;

  std::vector<std::size_t> order(train_set.size());
  const auto n_train = static_cast<Eigen::Index>(train_set.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at_epoch(epoch);
    const std::uint64_t epoch_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch));
    std::iota(order.begin(), order.end(), std::size_t{0});
    Xoshiro256 shuffle_rng(epoch_seed);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    int skipped = 0;
    for (Eigen::Index start = 0; start < n_train; start += cfg.batch_size) {
      const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, n_train - start);
      Eigen::MatrixXd batch(kInputSize, bs);
      std::vector<geometry::ScreenPoint> targets(static_cast<std::size_t>(bs));
      for (Eigen::Index b = 0; b < bs; ++b) {
        const std::size_t idx = order[static_cast<std::size_t>(start + b)];
        targets[static_cast<std::size_t>(b)] = train_set[idx].target;
        if (cfg.augment) {
          const Image aug = augment_affine(train_set[idx].image, cfg.aug, mix_seed(epoch_seed, idx));
          const auto in = prepare_input(aug, cfg.eye_crop);
          batch.col(b) = Eigen::Map<const Eigen::VectorXd>(in.data(), kInputSize);
        } else {
          batch.col(b) = train_inputs.col(static_cast<Eigen::Index>(idx));
        }
      }
      const auto cache = forward_batch(model, batch);
      const auto bw = backward(model, cache, targets, screen, mask);
      skipped += bw.skipped;
      if (!std::isfinite(bw.loss_sum)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch starting " +
                             std::to_string(start));
      }
      adam_step(model, bw.grads, adam, lr, cfg.adam, mask);
    }
    if (!model.all_finite()) throw NumericalError("non-finite weights after epoch " + std::to_string(epoch));

    const auto tr = score(model, train_inputs, train_set, screen);
    const auto va = score(model, val_inputs, val_set, screen);
    result.history.push_back({epoch, tr.mean_l1, va.mean_l1, va.mean_err_deg, lr, skipped});
    if (va.mean_err_deg < result.best_val_err_deg) {
      result.best_val_err_deg = va.mean_err_deg;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  return result;
}

TrainResult fine_tune(const RegressorModel& pretrained, std::span<const LabeledSample> train_set,
                      std::span<const LabeledSample> val_set, const geometry::CalibratedScreen& screen,
                      const TrainConfig& cfg) {
  return train(pretrained, train_set, val_set, screen, cfg, kLastTwoLayers);
}

LatencyStats summarize_latency(std::vector<double> samples_ms) {
  LatencyStats s;
  if (samples_ms.empty()) return s;
  std::sort(samples_ms.begin(), samples_ms.end());
  const auto n = samples_ms.size();
  s.iterations = static_cast<int>(n);
  s.median_ms = n % 2 == 1 ? samples_ms[n / 2] : 0.5 * (samples_ms[n / 2 - 1] + samples_ms[n / 2]);
  s.p95_ms = samples_ms[std::min(n - 1, static_cast<std::size_t>(std::ceil(0.95 * n)) - 1)];
  s.mean_ms = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) / static_cast<double>(n);
  return s;
}

EvalReport evaluate_predictions(std::span<const geometry::GazeVector> predictions,
                                std::span<const LabeledSample> samples) {
  if (predictions.size() != samples.size()) throw ConfigError("prediction/sample count mismatch");
  EvalReport rep;
  std::map<std::pair<int, int>, GridPointError> points;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double e = geometry::angular_error_deg(predictions[i], samples[i].gaze);
    rep.per_sample_err_deg.push_back(e);
    auto& gp = points[{samples[i].grid_i, samples[i].grid_j}];
    gp.grid_i = samples[i].grid_i;
    gp.grid_j = samples[i].grid_j;
    gp.screen_pt = samples[i].target;
    gp.mean_err_deg += e;
    ++gp.count;
  }
  if (!rep.per_sample_err_deg.empty()) {
    rep.mean_err_deg = std::accumulate(rep.per_sample_err_deg.begin(), rep.per_sample_err_deg.end(), 0.0) /
                       static_cast<double>(rep.per_sample_err_deg.size());
    const auto [mn, mx] = std::minmax_element(rep.per_sample_err_deg.begin(), rep.per_sample_err_deg.end());
    rep.min_err_deg = *mn;
    rep.max_err_deg = *mx;
  }
  for (auto& [key, gp] : points) {
    gp.mean_err_deg /= gp.count;
    rep.per_point.push_back(gp);
  }
  return rep;
}

EvalReport evaluate(const RegressorModel& m, std::span<const LabeledSample> test_set, int eye_crop,
                    int latency_iters) {
  if (test_set.empty()) throw ConfigError("evaluation set is empty");
  std::vector<geometry::GazeVector> preds;
  preds.reserve(test_set.size());
  for (const auto& s : test_set) preds.push_back(forward(m, prepare_input(s.image, eye_crop)));
  EvalReport rep = evaluate_predictions(preds, test_set);

  using clock = std::chrono::steady_clock;
  const int warmup = 10;
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(latency_iters));
  volatile double sink = 0.0;
  for (int it = 0; it < warmup + latency_iters; ++it) {
    const auto& img = test_set[static_cast<std::size_t>(it) % test_set.size()].image;
    const auto t0 = clock::now();
    const auto v = forward(m, prepare_input(img, eye_crop));
    const auto t1 = clock::now();
    sink = sink + v.z;
    if (it >= warmup) times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  rep.regress_latency = summarize_latency(std::move(times));
  return rep;
}

namespace {

void write_f32(std::ostream& out, double v) {
  std::uint32_t w = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  if constexpr (std::endian::native == std::endian::big) {
    w = ((w & 0xffU) << 24) | ((w & 0xff00U) << 8) | ((w >> 8) & 0xff00U) | (w >> 24);
  }
  out.write(reinterpret_cast<const char*>(&w), sizeof(w));
}

double read_f32(std::istream& in, const std::string& path) {
  std::uint32_t w = 0;
  in.read(reinterpret_cast<char*>(&w), sizeof(w));
  if (in.gcount() != sizeof(w)) throw DataError("truncated FTKMDL payload: " + path);
  if constexpr (std::endian::native == std::endian::big) {
    w = ((w & 0xffU) << 24) | ((w & 0xff00U) << 8) | ((w >> 8) & 0xff00U) | (w >> 24);
  }
  const float f = std::bit_cast<float>(w);
  if (!std::isfinite(f)) throw DataError("non-finite weight in FTKMDL: " + path);
  return f;
}

}  // namespace

void save_model(const RegressorModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "FTKMDL1 " << m.layers.size() << '\n';
  for (const auto& l : m.layers) {
    out << l.weight.cols() << ' ' << l.weight.rows() << '\n';
    for (Eigen::Index i = 0; i < l.weight.cols(); ++i) {
      for (Eigen::Index o = 0; o < l.weight.rows(); ++o) write_f32(out, l.weight(o, i));
    }
    for (Eigen::Index o = 0; o < l.bias.size(); ++o) write_f32(out, l.bias(o));
  }
  if (!out) throw DataError("write failed: " + path.string());
}

RegressorModel load_model(const std::filesystem::path& path) {
  const std::string p = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + p);
  std::string line;
  if (!std::getline(in, line)) throw DataError("missing FTKMDL header: " + p);
  std::istringstream hs(line);
  std::string magic;
  long long n_layers = -1;
  if (!(hs >> magic >> n_layers) || magic.rfind("FTKMDL", 0) != 0) throw DataError("corrupted FTKMDL header: " + p);
  if (magic != "FTKMDL1") throw DataError("unsupported FTKMDL version '" + magic + "': " + p);
  if (n_layers != kNumLayers) throw DataError("FTKMDL layer count does not match the architecture: " + p);
  RegressorModel m;
  for (int l = 0; l < kNumLayers; ++l) {
    if (!std::getline(in, line)) throw DataError("truncated FTKMDL layer header: " + p);
    std::istringstream ls(line);
    long long rows = -1;
    long long cols = -1;
    if (!(ls >> rows >> cols)) throw DataError("corrupted FTKMDL layer header: " + p);
    if (rows != kLayerWidths[l] || cols != kLayerWidths[l + 1]) {
      throw DataError("FTKMDL layer " + std::to_string(l) + " dimensions do not match the architecture: " + p);
    }
    DenseLayer layer{Eigen::MatrixXd(cols, rows), Eigen::VectorXd(cols)};
    for (long long i = 0; i < rows; ++i) {
      for (long long o = 0; o < cols; ++o) layer.weight(o, i) = read_f32(in, p);
    }
    for (long long o = 0; o < cols; ++o) layer.bias(o) = read_f32(in, p);
    m.layers.push_back(std::move(layer));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes after FTKMDL payload: " + p);
  return m;
}

RegressorModel quantize_f32(RegressorModel m) {
  const auto q = [](double v) { return static_cast<double>(static_cast<float>(v)); };
  for (auto& l : m.layers) {
    l.weight = l.weight.unaryExpr(q);
    l.bias = l.bias.unaryExpr(q);
  }
  return m;
}

}  // namespace flattrack::regress
