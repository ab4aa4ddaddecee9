// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/attacks/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "memdef/io/binary.hpp"
#include "memdef/tensor/adam.hpp"
#include "memdef/tensor/ops.hpp"
#include "memdef/tensor/rng.hpp"

namespace memdef::attacks {
namespace {

constexpr char kAdvMagic[4] = {'M', 'D', 'A', 'D'};
constexpr std::uint32_t kAdvVersion = 1;

float sign_of(float g) { return g > 0.0f ? 1.0f : (g < 0.0f ? -1.0f : 0.0f); }

// Moves each pixel by `offsets` and projects onto the eps-ball around x0
// intersected with the clip box. The float result is nudged inward so the
// bounds hold exactly when compared in double precision.
Tensor<float> project_step(const Tensor<float>& x0, const Tensor<float>& current, std::span<const double> offsets,
                           const AttackConfig& cfg) {
  Tensor<float> out(x0.shape());
  auto o = out.mutable_data();
  const auto base = x0.data(), cur = current.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double lo = std::max(static_cast<double>(base[i]) - cfg.epsilon, cfg.clip_min);
    const double hi = std::min(static_cast<double>(base[i]) + cfg.epsilon, cfg.clip_max);
    const double cand = std::clamp(static_cast<double>(cur[i]) + offsets[i], lo, hi);
    float f = static_cast<float>(cand);
    if (static_cast<double>(f) > hi) f = std::nextafter(f, -std::numeric_limits<float>::infinity());
    if (static_cast<double>(f) < lo) f = std::nextafter(f, std::numeric_limits<float>::infinity());
    o[i] = f;
  }
  return out;
}

Tensor<float> signed_step(const Tensor<float>& x0, const Tensor<float>& current, const Tensor<float>& grad,
                          double step, const AttackConfig& cfg) {
  std::vector<double> offsets(grad.numel());
  const auto g = grad.data();
  for (std::size_t i = 0; i < offsets.size(); ++i) offsets[i] = step * sign_of(g[i]);
  return project_step(x0, current, offsets, cfg);
}

void check_batch(const Tensor<float>& x, std::span<const int> labels) {
  if (x.rank() < 2 || x.dim(0) != static_cast<std::int64_t>(labels.size())) {
    throw ShapeError("attack: batch of " + shape_str(x.shape()) + " with " + std::to_string(labels.size()) +
                     " labels");
  }
}

std::vector<float> raw_margins(const Tensor<float>& logits, std::span<const int> labels) {
  const auto b = logits.dim(0), k = logits.dim(1);
  std::vector<float> m(b);
  for (std::int64_t r = 0; r < b; ++r) {
    const float* z = logits.ptr() + r * k;
    float other = -std::numeric_limits<float>::infinity();
    for (std::int64_t c = 0; c < k; ++c)
      if (c != labels[r]) other = std::max(other, z[c]);
    m[r] = z[labels[r]] - other;
  }
  return m;
}

AttackResult finish(const LogitsFn& model, const Tensor<float>& x, Tensor<float> x_adv, std::span<const int> labels) {
  AttackResult r;
  std::vector<float> d(x.numel());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = x_adv.at(i) - x.at(i);
  r.delta = Tensor<float>(x.shape(), std::move(d));
  FrozenParameters frozen;
  const auto logits = model(x_adv).detach();
  const auto pred = argmax_rows(logits);
  r.margin = raw_margins(logits, labels);
  r.success.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) r.success[i] = pred[i] != labels[i];
  r.x_adv = std::move(x_adv);
  return r;
}

AttackResult iterate(const LogitsFn& model, const Tensor<float>& x, Tensor<float> start, std::span<const int> labels,
                     const AttackConfig& cfg) {
  Tensor<float> cur = std::move(start);
  for (int t = 0; t < cfg.iterations; ++t) {
    const auto g = loss_gradient(model, cur, labels);
    cur = signed_step(x, cur, g, cfg.step_size, cfg);
  }
  return finish(model, x, std::move(cur), labels);
}

}  // namespace

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "fgsm") return AttackKind::kFgsm;
  if (name == "bim") return AttackKind::kBim;
  if (name == "pgd") return AttackKind::kPgd;
  if (name == "cw") return AttackKind::kCw;
  throw std::invalid_argument("unknown attack '" + name + "' (expected fgsm, bim, pgd or cw)");
}

const char* attack_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kFgsm: return "fgsm";
    case AttackKind::kBim: return "bim";
    case AttackKind::kPgd: return "pgd";
    case AttackKind::kCw: return "cw";
  }
  return "?";
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("attack epsilon must be >= 0");
  if (iterations < 1) throw std::invalid_argument("attack iterations must be >= 1");
  if ((kind == AttackKind::kBim || kind == AttackKind::kPgd) && !(step_size > 0.0)) {
    throw std::invalid_argument("iterative attacks need step_size > 0");
  }
  if (!(clip_min < clip_max)) throw std::invalid_argument("clip box is empty");
  if (kind == AttackKind::kCw) {
    if (cw_binary_steps < 1 || cw_iterations < 1) throw std::invalid_argument("cw needs >= 1 search step and iteration");
    if (!(cw_lr > 0.0) || !(cw_initial_c > 0.0) || !(cw_kappa >= 0.0)) {
      throw std::invalid_argument("cw lr and initial c must be > 0, kappa >= 0");
    }
  }
}

AttackConfig default_attack_config(AttackKind kind, double epsilon) {
  AttackConfig c;
  c.kind = kind;
  c.epsilon = epsilon;
  switch (kind) {
    case AttackKind::kFgsm:
      c.iterations = 1;
      c.step_size = epsilon;
      c.random_start = false;
      break;
    case AttackKind::kBim:
      c.iterations = 10;
      c.step_size = 0.05;
      c.random_start = false;
      break;
    case AttackKind::kPgd:
      c.iterations = 40;
      c.step_size = 0.0075;
      c.random_start = true;
      break;
    case AttackKind::kCw:
      c.random_start = false;
      break;
  }
  return c;
}

double lp_norm(std::span<const float> d, double p) {
  if (std::isinf(p) && p > 0) {
    double m = 0;
    for (float v : d) m = std::max(m, std::abs(static_cast<double>(v)));
    return m;
  }
  if (p == 1.0) {
    double s = 0;
    for (float v : d) s += std::abs(static_cast<double>(v));
    return s;
  }
  if (p == 2.0) {
    double s = 0;
    for (float v : d) s += static_cast<double>(v) * v;
    return std::sqrt(s);
  }
  throw std::invalid_argument("lp_norm supports p in {1, 2, inf}");
}

std::vector<double> lp_norms(const Tensor<float>& d, double p) {
  const auto b = d.dim(0);
  const auto per = static_cast<std::size_t>(d.numel() / std::max<std::int64_t>(b, 1));
  std::vector<double> out(b);
  for (std::int64_t i = 0; i < b; ++i) out[i] = lp_norm(d.data().subspan(i * per, per), p);
  return out;
}

Tensor<float> loss_gradient(const LogitsFn& model, const Tensor<float>& x, std::span<const int> labels) {
  FrozenParameters frozen;
  GradTape<float> tape;
  auto leaf = x.detach();
  leaf.set_requires_grad(true);
  tape.backward(cross_entropy(model(leaf), labels, Reduction::kSum));
  auto g = leaf.grad();
  for (float v : g.data()) {
    if (!std::isfinite(v)) throw NumericError("attack: non-finite input gradient");
  }
  return g;
}

Tensor<float> cw_margin(const Tensor<float>& logits, std::span<const int> labels, float kappa) {
  if (logits.rank() != 2 || logits.dim(0) != static_cast<std::int64_t>(labels.size()) || logits.dim(1) < 2) {
    throw ShapeError("cw_margin: logits " + shape_str(logits.shape()));
  }
  const auto b = logits.dim(0), k = logits.dim(1);
  Tensor<float> out(Shape{b});
  std::vector<std::int64_t> runner_up(b);
  std::vector<std::uint8_t> active(b);
  auto o = out.mutable_data();
  for (std::int64_t r = 0; r < b; ++r) {
    const float* z = logits.ptr() + r * k;
    std::int64_t best = -1;
    for (std::int64_t c = 0; c < k; ++c)
      if (c != labels[r] && (best < 0 || z[c] > z[best])) best = c;
    runner_up[r] = best;
    const float m = z[labels[r]] - z[best];
    active[r] = m > -kappa;
    o[r] = active[r] ? m : -kappa;
  }
  if (autograd::wants_grad(logits)) {
    std::vector<int> y(labels.begin(), labels.end());
    autograd::attach(out, [logits, out, y, runner_up, active, k]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      float* d = autograd::grad_buffer(logits);
      for (std::size_t r = 0; r < y.size(); ++r) {
        if (!active[r]) continue;
        d[r * k + y[r]] += g[r];
        d[r * k + runner_up[r]] -= g[r];
      }
    });
  }
  return out;
}

AttackResult fgsm(const LogitsFn& model, const Tensor<float>& x, std::span<const int> labels, const AttackConfig& cfg) {
  check_batch(x, labels);
  cfg.validate();
  const auto g = loss_gradient(model, x, labels);
  return finish(model, x, signed_step(x, x, g, cfg.epsilon, cfg), labels);
}

AttackResult bim(const LogitsFn& model, const Tensor<float>& x, std::span<const int> labels, const AttackConfig& cfg) {
  check_batch(x, labels);
  cfg.validate();
  return iterate(model, x, x.detach(), labels, cfg);
}

AttackResult pgd(const LogitsFn& model, const Tensor<float>& x, std::span<const int> labels, const AttackConfig& cfg) {
  check_batch(x, labels);
  cfg.validate();
  Tensor<float> start = x.detach();
  if (cfg.random_start && cfg.epsilon > 0.0) {
    Rng rng(cfg.seed);
    std::vector<double> noise(x.numel());
    for (auto& v : noise) v = rng.uniform(-cfg.epsilon, cfg.epsilon);
    start = project_step(x, x, noise, cfg);
  }
  return iterate(model, x, std::move(start), labels, cfg);
}

AttackResult cw_l2(const LogitsFn& model, const Tensor<float>& x, std::span<const int> labels, const AttackConfig& cfg) {
  check_batch(x, labels);
  cfg.validate();
  const auto b = x.dim(0);
  const auto per = static_cast<std::int64_t>(x.numel()) / b;
  const float kappa = static_cast<float>(cfg.cw_kappa);

  std::vector<float> w0(x.numel());
  for (std::size_t i = 0; i < w0.size(); ++i) {
    const double unit = (static_cast<double>(x.at(i)) - cfg.clip_min) / (cfg.clip_max - cfg.clip_min);
    w0[i] = static_cast<float>(std::atanh(std::clamp((2.0 * unit - 1.0) * 0.999999, -0.999999, 0.999999)));
  }
  std::vector<double> c(b, cfg.cw_initial_c), lower(b, 0.0), upper(b, 1e10);
  std::vector<double> best_l2(b, std::numeric_limits<double>::infinity());
  std::vector<float> best(x.data().begin(), x.data().end());
  std::vector<float> last(x.numel());
  const float half_range = static_cast<float>((cfg.clip_max - cfg.clip_min) / 2);
  const float mid = static_cast<float>((cfg.clip_max + cfg.clip_min) / 2);

  for (int search = 0; search < cfg.cw_binary_steps; ++search) {
    Tensor<float> w(x.shape(), w0);
    w.set_requires_grad(true);
    AdamConfig adam_cfg;
    adam_cfg.lr = cfg.cw_lr;
    Adam<float> opt({w}, adam_cfg);
    std::vector<float> c_f(c.begin(), c.end());
    std::vector<std::uint8_t> found(b, 0);
    double previous = std::numeric_limits<double>::infinity();

    for (int it = 0; it < cfg.cw_iterations; ++it) {
      FrozenParameters frozen;
      GradTape<float> tape;
      auto x_prime = add_scalar(scale(tanh_act(w), half_range), mid);
      auto logits = model(x_prime);
      auto hinge = cw_margin(logits, labels, kappa);
      auto l2 = sum_per_sample(square(sub(x_prime, x)));
      auto loss = sum(add(l2, scale_per_sample(hinge, std::span<const float>(c_f))));

      const auto pred = argmax_rows(logits);
      const auto margin = raw_margins(logits, labels);
      for (std::int64_t r = 0; r < b; ++r) {
        const bool ok = pred[r] != labels[r] && margin[r] <= -kappa;
        const double dist = l2.at(r);
        if (ok && dist < best_l2[r]) {
          best_l2[r] = dist;
          std::copy_n(x_prime.ptr() + r * per, per, best.begin() + r * per);
        }
        found[r] |= ok;
      }
      std::copy(x_prime.data().begin(), x_prime.data().end(), last.begin());
      const double value = loss.item();
      if (!std::isfinite(value)) throw NumericError("cw: non-finite objective");
      if (cfg.cw_iterations >= 10 && it % (cfg.cw_iterations / 10) == 0) {
        if (value > previous * 0.9999) break;
        previous = value;
      }
      tape.backward(loss);
      opt.step();
      opt.zero_grad();
    }
    for (std::int64_t r = 0; r < b; ++r) {
      if (found[r]) {
        upper[r] = std::min(upper[r], c[r]);
        if (upper[r] < 1e9) c[r] = (lower[r] + upper[r]) / 2;
      } else {
        lower[r] = std::max(lower[r], c[r]);
        c[r] = upper[r] < 1e9 ? (lower[r] + upper[r]) / 2 : c[r] * 10;
      }
    }
  }

  std::vector<float> out(x.numel());
  for (std::int64_t r = 0; r < b; ++r) {
    const auto& src = std::isfinite(best_l2[r]) ? best : last;
    std::copy_n(src.begin() + r * per, per, out.begin() + r * per);
  }
  for (auto& v : out) v = std::clamp(v, static_cast<float>(cfg.clip_min), static_cast<float>(cfg.clip_max));
  return finish(model, x, Tensor<float>(x.shape(), std::move(out)), labels);
}

AttackResult run_attack(const LogitsFn& model, const Tensor<float>& x, std::span<const int> labels,
                        const AttackConfig& cfg) {
  switch (cfg.kind) {
    case AttackKind::kFgsm: return fgsm(model, x, labels, cfg);
    case AttackKind::kBim: return bim(model, x, labels, cfg);
    case AttackKind::kPgd: return pgd(model, x, labels, cfg);
    case AttackKind::kCw: return cw_l2(model, x, labels, cfg);
  }
  throw std::invalid_argument("unknown attack kind");
}

void write_adversarial_set(const std::string& path, const AdversarialSet& set) {
  io::BinaryWriter w;
  for (char ch : kAdvMagic) w.u8(static_cast<std::uint8_t>(ch));
  w.u32(kAdvVersion);
  w.str(set.header_json);
  w.u32(static_cast<std::uint32_t>(set.sample_shape.size()));
  for (auto d : set.sample_shape) w.u64(static_cast<std::uint64_t>(d));
  w.u64(set.records.size());
  const auto per = static_cast<std::size_t>(shape_numel(set.sample_shape));
  for (const auto& r : set.records) {
    if (r.delta.size() != per) throw std::invalid_argument("adversarial record delta has the wrong size");
    w.u64(r.index);
    w.i32(r.label);
    w.f32s(r.delta);
    w.u8(r.success ? 1 : 0);
  }
  io::write_file(path, w.buffer());
}

AdversarialSet read_adversarial_set(const std::string& path) {
  io::BinaryReader r(io::read_file(path), path);
  for (char ch : kAdvMagic) {
    if (r.u8() != static_cast<std::uint8_t>(ch)) r.fail("bad magic (not an adversarial set)");
  }
  const auto version = r.u32();
  if (version != kAdvVersion) r.fail("unsupported version " + std::to_string(version));
  AdversarialSet set;
  set.header_json = r.str();
  const auto rank = r.u32();
  if (rank > 8) r.fail("implausible sample rank " + std::to_string(rank));
  for (std::uint32_t i = 0; i < rank; ++i) set.sample_shape.push_back(static_cast<std::int64_t>(r.u64()));
  const auto per = static_cast<std::size_t>(shape_numel(set.sample_shape));
  const auto count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    AdversarialRecord rec;
    rec.index = r.u64();
    rec.label = r.i32();
    rec.delta.resize(per);
    r.f32s(rec.delta);
    const auto flag = r.u8();
    if (flag > 1) r.fail("bad success flag");
    rec.success = flag == 1;
    set.records.push_back(std::move(rec));
  }
  if (!r.at_end()) r.fail("trailing bytes");
  return set;
}

}  // namespace memdef::attacks
