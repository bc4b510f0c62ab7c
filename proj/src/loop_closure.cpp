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

#include "sweepnav/loop_closure.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sweepnav/common.hpp"
#include "sweepnav/estimator.hpp"
#include "sweepnav/io.hpp"
#include "sweepnav/simd/kernels.hpp"

namespace sweepnav {

namespace {

Eigen::Vector2d perp(const Eigen::Vector2d& v) { return {-v.y(), v.x()}; }

void check_lengths(const Trajectory& traj, const CorrectionParams& params) {
  if (params.r.size() != traj.size() || params.l.size() != traj.size())
    throw ValidationError(fmt::format("corrections have {} / {} entries for a trajectory of {} frames",
                                      params.r.size(), params.l.size(), traj.size()));
}

LossTerms loss_impl(const Trajectory& traj, const CorrectionParams& params, std::span<const Eigen::Vector2d> v,
                    const RefineConfig& cfg, CorrectionParams* grad) {
  check_lengths(traj, params);
  const std::size_t n = traj.size();
  if (v.size() != n)
    throw ValidationError(fmt::format("{} displacements for a trajectory of {} frames", v.size(), n));

  std::vector<double> phi(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) phi[i] = acc += params.r[i];

  std::vector<Eigen::Vector2d> zd(n, Eigen::Vector2d::Zero());
  Eigen::Vector2d q = Eigen::Vector2d::Zero();
  for (std::size_t i = 1; i < n; ++i) {
    zd[i] = rotate2(traj[i].position() - traj[i - 1].position(), phi[i]);
    q += zd[i];
  }

  LossTerms out;
  const Eigen::Vector2d gap = q + params.l[n - 1];
  out.loop = cfg.lambda_loop * gap.squaredNorm();
  out.rot = cfg.lambda_rot * phi[n - 1] * phi[n - 1];

  std::vector<Eigen::Vector2d> e(n, Eigen::Vector2d::Zero());
  std::vector<double> en(n, 0.0);
  double emax = -1.0;
  for (std::size_t i = 1; i < n; ++i) {
    e[i] = zd[i] + params.l[i] - params.l[i - 1] - v[i];
    en[i] = e[i].norm();
    if (en[i] > emax) {
      emax = en[i];
      out.argmax = i;
    }
  }
  std::vector<double> w(n, 0.0);
  if (n >= 2) {
    if (cfg.smooth_temperature > 0.0) {
      const double tt = cfg.smooth_temperature;
      double s = 0.0;
      for (std::size_t i = 1; i < n; ++i) s += std::exp((en[i] - emax) / tt);
      out.smooth = cfg.lambda_smooth * (emax + tt * std::log(s));
      for (std::size_t i = 1; i < n; ++i) w[i] = std::exp((en[i] - emax) / tt) / s;
    } else {
      out.smooth = cfg.lambda_smooth * emax;
      w[out.argmax] = 1.0;
    }
  }
  out.total = out.loop + out.rot + out.smooth;
  if (grad == nullptr) return out;

  std::vector<double> dphi(n, 0.0);
  grad->r.assign(n, 0.0);
  grad->l.assign(n, Eigen::Vector2d::Zero());

  const Eigen::Vector2d g = 2.0 * cfg.lambda_loop * gap;
  grad->l[n - 1] += g;
  for (std::size_t i = 1; i < n; ++i) dphi[i] += g.dot(perp(zd[i]));
  dphi[n - 1] += 2.0 * cfg.lambda_rot * phi[n - 1];
  for (std::size_t i = 1; i < n; ++i) {
    if (w[i] == 0.0 || en[i] == 0.0) continue;
    const Eigen::Vector2d u = cfg.lambda_smooth * w[i] * e[i] / en[i];
    grad->l[i] += u;
    grad->l[i - 1] -= u;
    dphi[i] += u.dot(perp(zd[i]));
  }
  double suffix = 0.0;
  for (std::size_t i = n; i-- > 0;) grad->r[i] = suffix += dphi[i];
  return out;
}

}  // namespace

CorrectionParams CorrectionParams::zeros(std::size_t n) {
  return {std::vector<double>(n, 0.0), std::vector<Eigen::Vector2d>(n, Eigen::Vector2d::Zero())};
}

void validate(const RefineConfig& cfg) {
  if (cfg.epochs < 1) throw ValidationError("refine.epochs must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ValidationError("refine.lr must be > 0");
  if (!(cfg.lambda_loop >= 0.0) || !(cfg.lambda_rot >= 0.0) || !(cfg.lambda_smooth >= 0.0))
    throw ValidationError("loss weights must be >= 0");
  if (!(cfg.smooth_temperature >= 0.0)) throw ValidationError("refine.temperature must be >= 0");
  if (cfg.hidden < 1) throw ValidationError("refine.hidden must be >= 1");
  if (!(cfg.rotation_gain >= 0.0)) throw ValidationError("refine.rotation_gain must be >= 0");
}

Trajectory apply_corrections(const Trajectory& traj, const CorrectionParams& params) {
  check_lengths(traj, params);
  Trajectory out;
  out.frame_rate = traj.frame_rate;
  out.poses.reserve(traj.size());
  if (traj.empty()) return out;
  const Eigen::Vector2d p1 = traj[0].position();
  Eigen::Vector2d q = Eigen::Vector2d::Zero();
  double phi = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    phi += params.r[i];
    if (i > 0) q += rotate2(traj[i].position() - traj[i - 1].position(), phi);
    const Eigen::Vector2d p = p1 + q + params.l[i];
    out.poses.push_back({traj[i].t, p.x(), p.y(), wrap_angle(traj[i].yaw + phi)});
  }
  return out;
}

LossTerms correction_loss(const Trajectory& traj, const CorrectionParams& params,
                          std::span<const Eigen::Vector2d> v, const RefineConfig& cfg) {
  return loss_impl(traj, params, v, cfg, nullptr);
}

LossTerms correction_loss_grad(const Trajectory& traj, const CorrectionParams& params,
                               std::span<const Eigen::Vector2d> v, const RefineConfig& cfg,
                               CorrectionParams* grad) {
  return loss_impl(traj, params, v, cfg, grad);
}

// ---------------------------------------------------------------------------

CorrectionMlp::CorrectionMlp(std::size_t hidden, std::uint64_t seed, double output_scale) : hidden_(hidden) {
  if (hidden < 1) throw ValidationError("correction MLP needs at least one hidden unit");
  const std::size_t h = hidden;
  params_.assign(h + h + h * h + h + h * 3 + 3, 0.0);
  std::mt19937_64 rng(mix_seed(seed, 0x6c6f6f70ULL));
  auto fill = [&](std::size_t off, std::size_t count, std::size_t fan_in, double scale) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in)) * scale;
    std::uniform_real_distribution<double> d(-a, a);
    for (std::size_t i = 0; i < count; ++i) params_[off + i] = d(rng);
  };
  fill(0, h, 1, 1.0);
  fill(2 * h, h * h, h, 1.0);
  // Always draw the output block so that output_scale does not shift the
  // hidden-layer stream.
  const std::size_t w3 = 2 * h + h * h + h;
  fill(w3, h * 3, h, output_scale);
}

namespace {

struct Forward {
  std::vector<double> h1, h2, out;  // N x H, N x H, N x 3 (post-activation)
};

Forward run_forward(std::span<const double> p, std::size_t h, std::size_t n) {
  const double* w1 = p.data();
  const double* b1 = w1 + h;
  const double* w2 = b1 + h;
  const double* b2 = w2 + h * h;
  const double* w3 = b2 + h;
  const double* b3 = w3 + h * 3;
  const auto& k = simd::kernels();
  Forward f;
  f.h1.resize(n * h);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    for (std::size_t j = 0; j < h; ++j) f.h1[i * h + j] = std::max(0.0, s * w1[j] + b1[j]);
  }
  f.h2.resize(n * h);
  k.gemm_nn(f.h1.data(), w2, f.h2.data(), n, h, h, false);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < h; ++j) f.h2[i * h + j] = std::max(0.0, f.h2[i * h + j] + b2[j]);
  f.out.resize(n * 3);
  k.gemm_nn(f.h2.data(), w3, f.out.data(), n, h, 3, false);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < 3; ++j) f.out[i * 3 + j] += b3[j];
  return f;
}

CorrectionParams to_corrections(const Forward& f, std::size_t n, double gain) {
  CorrectionParams c = CorrectionParams::zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.r[i] = kPi * std::tanh(gain * f.out[i * 3]);
    c.l[i] = {f.out[i * 3 + 1], f.out[i * 3 + 2]};
  }
  return c;
}

}  // namespace

CorrectionParams CorrectionMlp::forward(std::size_t frames) const {
  return to_corrections(run_forward(params_, hidden_, frames), frames, rotation_gain_);
}

CorrectionMlp::Eval CorrectionMlp::evaluate(const Trajectory& traj, std::span<const Eigen::Vector2d> v,
                                            const RefineConfig& cfg, bool with_grad, bool with_signature) const {
  const std::size_t n = traj.size();
  const std::size_t h = hidden_;
  const Forward f = run_forward(params_, h, n);
  Eval ev;
  ev.corrections = to_corrections(f, n, rotation_gain_);
  CorrectionParams g;
  ev.terms = loss_impl(traj, ev.corrections, v, cfg, with_grad ? &g : nullptr);

  if (with_signature) {
    std::uint64_t sig = mix_seed(0, ev.terms.argmax);
    for (std::size_t i = 0; i < n * h; ++i) sig = mix_seed(sig, (f.h1[i] > 0.0 ? 1u : 0u) | (f.h2[i] > 0.0 ? 2u : 0u));
    ev.signature = sig;
  }
  if (!with_grad) return ev;

  const double* w1 = params_.data();
  const double* b1 = w1 + h;
  const double* w2 = b1 + h;
  const double* b2 = w2 + h * h;
  const double* w3 = b2 + h;
  (void)b1;
  (void)b2;
  ev.grad.assign(params_.size(), 0.0);
  double* gw1 = ev.grad.data();
  double* gb1 = gw1 + h;
  double* gw2 = gb1 + h;
  double* gb2 = gw2 + h * h;
  double* gw3 = gb2 + h;
  double* gb3 = gw3 + h * 3;
  const auto& k = simd::kernels();

  std::vector<double> dout(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double th = std::tanh(rotation_gain_ * f.out[i * 3]);
    dout[i * 3] = g.r[i] * kPi * rotation_gain_ * (1.0 - th * th);
    dout[i * 3 + 1] = g.l[i].x();
    dout[i * 3 + 2] = g.l[i].y();
  }
  k.gemm_tn(f.h2.data(), dout.data(), gw3, n, h, 3, false);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < 3; ++j) gb3[j] += dout[i * 3 + j];

  std::vector<double> dz2(n * h);
  k.gemm_nt(dout.data(), w3, dz2.data(), n, 3, h, false);
  for (std::size_t i = 0; i < n * h; ++i)
    if (!(f.h2[i] > 0.0)) dz2[i] = 0.0;
  k.gemm_tn(f.h1.data(), dz2.data(), gw2, n, h, h, false);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < h; ++j) gb2[j] += dz2[i * h + j];

  std::vector<double> dz1(n * h);
  k.gemm_nt(dz2.data(), w2, dz1.data(), n, h, h, false);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      const double d = f.h1[i * h + j] > 0.0 ? dz1[i * h + j] : 0.0;
      gw1[j] += d * s;
      gb1[j] += d;
    }
  }
  (void)w1;
  return ev;
}

// ---------------------------------------------------------------------------

RefineResult refine(const Trajectory& traj, std::span<const Eigen::Vector2d> v, const RefineConfig& cfg) {
  validate(cfg);
  if (traj.size() < 2) throw ValidationError("refine needs a trajectory of at least 2 frames");
  CorrectionMlp mlp(cfg.hidden, cfg.seed);
  mlp.set_rotation_gain(cfg.rotation_gain > 0.0 ? cfg.rotation_gain : 1.0 / static_cast<double>(traj.size()));
  const std::size_t np = mlp.num_parameters();
  std::vector<double> m(np, 0.0), s(np, 0.0);
  constexpr double kB1 = 0.9;
  constexpr double kB2 = 0.999;
  constexpr double kEps = 1e-8;

  RefineResult res;
  res.history.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
  double best = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    const bool step = epoch < cfg.epochs;
    auto ev = mlp.evaluate(traj, v, cfg, step, false);
    if (!std::isfinite(ev.terms.total))
      throw RuntimeError(fmt::format("loop-closure loss diverged at epoch {} (learning rate {})", epoch,
                                     cfg.learning_rate));
    res.history.push_back(ev.terms);
    if (ev.terms.total < best) {
      best = ev.terms.total;
      res.best_epoch = static_cast<std::size_t>(epoch);
      res.corrections = std::move(ev.corrections);
    }
    if (!step) break;
    const double t = epoch + 1;
    const double c1 = 1.0 - std::pow(kB1, t);
    const double c2 = 1.0 - std::pow(kB2, t);
    auto p = mlp.parameters();
    for (std::size_t i = 0; i < np; ++i) {
      m[i] = kB1 * m[i] + (1.0 - kB1) * ev.grad[i];
      s[i] = kB2 * s[i] + (1.0 - kB2) * ev.grad[i] * ev.grad[i];
      p[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(s[i] / c2) + kEps);
    }
  }
  res.refined = apply_corrections(traj, res.corrections);
  return res;
}

std::vector<Eigen::Vector2d> trajectory_increments(const Trajectory& traj) {
  std::vector<Eigen::Vector2d> v(traj.size(), Eigen::Vector2d::Zero());
  for (std::size_t i = 1; i < traj.size(); ++i) v[i] = traj[i].position() - traj[i - 1].position();
  return v;
}

std::string corrections_jsonl(const CorrectionParams& params) {
  std::string out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    nlohmann::ordered_json j = {{"frame", i}, {"r", params.r[i]}, {"lx", params.l[i].x()}, {"ly", params.l[i].y()}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string loss_history_csv(std::span<const LossTerms> history) {
  std::string out = "epoch,total,loop,rot,smooth\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& h = history[i];
    out += fmt::format("{},{},{},{},{}\n", i, io::format_double(h.total), io::format_double(h.loop),
                       io::format_double(h.rot), io::format_double(h.smooth));
  }
  return out;
}

}  // namespace sweepnav
