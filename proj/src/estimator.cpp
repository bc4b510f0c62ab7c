/*
 * Copyright 2026 The sweepnav Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sweepnav/estimator.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sweepnav/common.hpp"
#include "sweepnav/io.hpp"
#include "sweepnav/simd/kernels.hpp"

namespace sweepnav {

static_assert(std::endian::native == std::endian::little,
              "weights payloads are little-endian float32");

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

VelocityEstimate estimate_velocity(const ImuWindow& window, const VelocityModel& model, double v_max) {
  if (window.tau() != model.tau())
    throw ValidationError(fmt::format("window has tau={} but the {} model expects tau={}",
                                      window.tau(), model.name(), model.tau()));
  const Eigen::Vector2d raw = model.predict(window);
  if (!raw.allFinite())
    throw RuntimeError(fmt::format("{} model produced a non-finite velocity for window at frame {} "
                                   "(corrupt weights?)",
                                   model.name(), window.start_frame()));
  VelocityEstimate est{raw, window.start_frame(), false};
  const double n = raw.norm();
  if (n > v_max) {
    est.v = raw * (v_max / n);
    est.clamped = true;
  }
  return est;
}

std::string to_string(LayerKind kind) { return kind == LayerKind::kDense ? "dense" : "relu"; }

std::string to_string(InputLayout layout) {
  return layout == InputLayout::kChannelsMajor ? "channels_major" : "time_major";
}

void validate_shapes(const WeightsBundle& bundle) {
  if (bundle.meta.tau < 1) throw ValidationError("weights: meta.tau must be >= 1");
  std::size_t width = input_width(bundle.meta.tau);
  bool any_dense = false;
  for (std::size_t i = 0; i < bundle.layers.size(); ++i) {
    const auto& l = bundle.layers[i];
    if (l.kind == LayerKind::kRelu) {
      if ((l.rows != 0 && l.rows != width) || (l.cols != 0 && l.cols != width))
        throw ValidationError(fmt::format("weights: layer {} (relu) declares {}x{} but its input is {} wide",
                                          i, l.rows, l.cols, width));
      continue;
    }
    any_dense = true;
    if (l.rows != width)
      throw ValidationError(fmt::format(
          "weights: layer {} (dense) has rows={} but receives {} inputs{}", i, l.rows, width,
          i == 0 ? fmt::format(" (6*(tau+1) for tau={})", bundle.meta.tau) : std::string()));
    if (l.cols == 0) throw ValidationError(fmt::format("weights: layer {} (dense) has cols=0", i));
    if (l.weights.size() != l.rows * l.cols)
      throw ValidationError(fmt::format("weights: layer {} (dense) expected {} parameters ({}x{}), found {}",
                                        i, l.rows * l.cols, l.rows, l.cols, l.weights.size()));
    if (!l.bias.empty() && l.bias.size() != l.cols)
      throw ValidationError(fmt::format("weights: layer {} (dense) expected {} bias values, found {}", i,
                                        l.cols, l.bias.size()));
    width = l.cols;
  }
  if (!any_dense) throw ValidationError("weights: no dense layers");
  if (width != 2)
    throw ValidationError(fmt::format("weights: final output width is {}, expected 2", width));
}

void check_against(const WeightsMeta& meta, const PipelineExpectation& expect) {
  if (meta.tau != expect.tau)
    throw ValidationError(fmt::format("weights were built for tau={} but the pipeline uses tau={}",
                                      meta.tau, expect.tau));
  if (std::abs(meta.sample_rate_hz - expect.sample_rate_hz) > 1e-9)
    throw ValidationError(fmt::format("weights expect {} Hz input but the pipeline runs at {} Hz",
                                      meta.sample_rate_hz, expect.sample_rate_hz));
  if (meta.gravity_subtracted != expect.gravity_subtracted)
    throw ValidationError(fmt::format("weights expect gravity_subtracted={} but the pipeline uses {}",
                                      meta.gravity_subtracted, expect.gravity_subtracted));
}

namespace {

std::vector<float> decode_floats(const std::string& b64, const std::string& what) {
  const auto bytes = io::base64_decode(b64);
  if (bytes.size() % 4 != 0)
    throw ValidationError(fmt::format("weights: {} payload is {} bytes, not a multiple of 4", what,
                                      bytes.size()));
  std::vector<float> out(bytes.size() / 4);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

std::string encode_floats(const std::vector<float>& v) {
  return io::base64_encode(reinterpret_cast<const std::uint8_t*>(v.data()), v.size() * sizeof(float));
}

}  // namespace

WeightsBundle weights_from_json(const nlohmann::json& j) {
  try {
    WeightsBundle b;
    const auto& meta = j.at("meta");
    b.meta.tau = meta.at("tau").get<int>();
    b.meta.sample_rate_hz = meta.at("sample_rate_hz").get<double>();
    b.meta.gravity_subtracted = meta.at("gravity_subtracted").get<bool>();
    const auto layout = meta.value("input_layout", std::string("channels_major"));
    if (layout == "channels_major") {
      b.meta.input_layout = InputLayout::kChannelsMajor;
    } else if (layout == "time_major") {
      b.meta.input_layout = InputLayout::kTimeMajor;
    } else {
      throw ValidationError("weights: unknown input_layout '" + layout + "'");
    }
    for (const auto& jl : j.at("layers")) {
      Layer l;
      const auto kind = jl.at("kind").get<std::string>();
      if (kind == "dense") {
        l.kind = LayerKind::kDense;
      } else if (kind == "relu") {
        l.kind = LayerKind::kRelu;
      } else {
        throw ValidationError("weights: unknown layer kind '" + kind + "'");
      }
      l.rows = jl.value("rows", std::size_t{0});
      l.cols = jl.value("cols", std::size_t{0});
      if (l.kind == LayerKind::kDense) {
        l.weights = decode_floats(jl.at("data").get<std::string>(), "data");
        if (jl.contains("bias")) l.bias = decode_floats(jl.at("bias").get<std::string>(), "bias");
      }
      b.layers.push_back(std::move(l));
    }
    validate_shapes(b);
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("weights: ") + e.what());
  }
}

nlohmann::json weights_to_json(const WeightsBundle& bundle) {
  nlohmann::json j;
  j["meta"] = {{"tau", bundle.meta.tau},
               {"sample_rate_hz", bundle.meta.sample_rate_hz},
               {"gravity_subtracted", bundle.meta.gravity_subtracted},
               {"input_layout", to_string(bundle.meta.input_layout)}};
  j["layers"] = nlohmann::json::array();
  for (const auto& l : bundle.layers) {
    nlohmann::json jl = {{"kind", to_string(l.kind)}, {"rows", l.rows}, {"cols", l.cols}};
    if (l.kind == LayerKind::kDense) {
      jl["data"] = encode_floats(l.weights);
      if (!l.bias.empty()) jl["bias"] = encode_floats(l.bias);
    }
    j["layers"].push_back(std::move(jl));
  }
  return j;
}

WeightsBundle load_weights(const std::filesystem::path& path, const PipelineExpectation& expect) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(fmt::format("weights file {}: {}", path.string(), e.what()));
  }
  auto bundle = weights_from_json(j);
  check_against(bundle.meta, expect);
  return bundle;
}

void save_weights(const std::filesystem::path& path, const WeightsBundle& bundle) {
  io::write_file(path, weights_to_json(bundle).dump() + "\n");
}

WeightsBundle random_mlp_bundle(int tau, const std::vector<std::size_t>& hidden, std::uint64_t seed,
                                double scale) {
  WeightsBundle b;
  b.meta.tau = tau;
  std::mt19937_64 rng(seed);
  std::size_t width = input_width(tau);
  auto widths = hidden;
  widths.push_back(2);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    Layer l;
    l.rows = width;
    l.cols = widths[i];
    const double limit = scale * std::sqrt(6.0 / static_cast<double>(width));
    std::uniform_real_distribution<double> dist(-limit, limit);
    l.weights.resize(l.rows * l.cols);
    for (auto& w : l.weights) w = static_cast<float>(dist(rng));
    l.bias.assign(l.cols, 0.0f);
    b.layers.push_back(std::move(l));
    if (i + 1 < widths.size()) b.layers.push_back({LayerKind::kRelu, widths[i], widths[i], {}, {}});
    width = widths[i];
  }
  return b;
}

MlpVelocityModel::MlpVelocityModel(WeightsBundle bundle) : bundle_(std::move(bundle)) {
  validate_shapes(bundle_);
  max_width_ = input_width(bundle_.meta.tau);
  for (const auto& l : bundle_.layers) max_width_ = std::max(max_width_, l.cols);
}

Eigen::Vector2d MlpVelocityModel::predict(const ImuWindow& window) const {
  const std::size_t len = window.length();
  if (static_cast<int>(len) != bundle_.meta.tau + 1)
    throw ValidationError(fmt::format("window length {} does not match network tau={}", len, bundle_.meta.tau));
  std::vector<float> a(max_width_);
  std::vector<float> b(max_width_);
  const auto data = window.data();
  if (bundle_.meta.input_layout == InputLayout::kChannelsMajor) {
    for (std::size_t i = 0; i < data.size(); ++i) a[i] = static_cast<float>(data[i]);
  } else {
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t c = 0; c < ImuWindow::kChannels; ++c)
        a[t * ImuWindow::kChannels + c] = static_cast<float>(data[c * len + t]);
  }
  const auto& k = simd::kernels();
  std::size_t width = input_width(bundle_.meta.tau);
  for (const auto& l : bundle_.layers) {
    if (l.kind == LayerKind::kRelu) {
      k.relu_f32(a.data(), width);
      continue;
    }
    k.dense_f32(l.weights.data(), l.bias.empty() ? nullptr : l.bias.data(), l.rows, l.cols, a.data(),
                b.data());
    std::swap(a, b);
    width = l.cols;
  }
  return {static_cast<double>(a[0]), static_cast<double>(a[1])};
}

VelocityEstimate oracle_velocity(const ImuWindow& window, const OracleConfig& cfg, std::uint64_t rng_seed) {
  if (!cfg.ground_truth) throw ValidationError("oracle estimator needs a ground-truth trajectory");
  if (!(cfg.noise_sigma >= 0.0)) throw ValidationError("oracle noise_sigma must be >= 0");
  const auto& gt = *cfg.ground_truth;
  const std::size_t s = window.start_frame();
  const std::size_t e = s + window.length() - 1;
  if (gt.empty() || e >= gt.size())
    throw ValidationError(fmt::format("oracle: window frames {}..{} outside ground truth of {} poses", s, e,
                                      gt.size()));
  const double duration = static_cast<double>(window.length() - 1) / gt.frame_rate;
  const Eigen::Vector2d v_world = (gt[e].position() - gt[s].position()) / duration;
  double frame = -gt[0].yaw;
  if (!cfg.frame_yaw_error.empty()) {
    if (s >= cfg.frame_yaw_error.size())
      throw ValidationError("oracle: frame_yaw_error shorter than the recording");
    frame -= cfg.frame_yaw_error[s];
  }
  Eigen::Vector2d v = rotate2(rotate2(v_world, frame), window.frame_angle()) + cfg.bias_hacf;
  if (cfg.noise_sigma > 0.0) {
    std::mt19937_64 rng(mix_seed(rng_seed, s));
    std::normal_distribution<double> n(0.0, cfg.noise_sigma);
    const double nx = n(rng);
    const double ny = n(rng);
    v += Eigen::Vector2d(nx, ny);
  }
  return {v, s, false};
}

OracleVelocityModel::OracleVelocityModel(OracleConfig cfg, int tau, std::uint64_t seed)
    : cfg_(std::move(cfg)), tau_(tau), seed_(seed) {
  if (!cfg_.ground_truth) throw ValidationError("oracle estimator needs a ground-truth trajectory");
  if (!(cfg_.noise_sigma >= 0.0)) throw ValidationError("oracle noise_sigma must be >= 0");
}

Eigen::Vector2d OracleVelocityModel::predict(const ImuWindow& window) const {
  return oracle_velocity(window, cfg_, seed_).v;
}

}  // namespace sweepnav
