// Acceptance run: one PASS/FAIL line per criterion.
//
//   vebm_acceptance            run every criterion
//   vebm_acceptance 3 7        run only criteria 3 and 7
//
// Exit status is 0 only if every selected criterion passes within its
// runtime budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "vebm/checkpoint.hpp"
#include "vebm/commands.hpp"
#include "vebm/config.hpp"
#include "vebm/data.hpp"
#include "vebm/errors.hpp"
#include "vebm/eval.hpp"
#include "vebm/graph.hpp"
#include "vebm/grid_ops.hpp"
#include "vebm/langevin.hpp"
#include "vebm/training.hpp"

using namespace vebm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const std::vector<std::string> kCategories = {"block-table", "block-chair", "block-sofa"};

// ---------------------------------------------------------------------------
// Helpers

/// Binary grids shifted into model space with the training mean.
std::vector<VoxelGrid> shifted(const Dataset& binary, double mean) {
  std::vector<VoxelGrid> out = binary.grids;
  for (auto& g : out)
    for (float& v : g.values()) v = static_cast<float>(v - mean);
  return out;
}

Tensor bernoulli_batch(std::size_t count, std::size_t n, double mean, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({count, 1, n, n, n});
  for (auto& v : t.data()) v = static_cast<float>((rng.uniform() < 0.5 ? 1.0 : 0.0) - mean);
  return t;
}

double mean_energy(const DescriptorModel& m, const Tensor& batch) {
  const auto e = energy(m, batch);
  return mean_of(e);
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](float v) { return std::isfinite(v); });
}

/// Run-config preset with the seeds of one acceptance run.
RunConfig seeded_preset(const char* name, std::uint64_t seed) {
  RunConfig cfg = preset_config(name);
  cfg.data.seed = seed;
  cfg.train.seed = seed;
  cfg.init_seed = seed;
  return cfg;
}

/// A tiny descriptor trained briefly on 8³ boxes; the "fixed trained toy model".
DescriptorModel trained_toy_model() {
  const Dataset data = preprocess(gen_procedural("box", 6, 8, 3));
  TrainConfig cfg;
  cfg.iterations = 30;
  cfg.batch_size = 6;
  cfg.chains = 6;
  cfg.langevin = {0.01, 10, true};
  cfg.noise_off_after = std::nullopt;
  cfg.adam.learning_rate = 0.01;
  cfg.seed = 4;
  const DescriptorArchitecture arch{
      {LayerSpec::conv(4, 3, 2), LayerSpec::relu(), LayerSpec::fc(1, false)}, {8, 8, 8}};
  MleTrainer t(DescriptorModel(arch, 0.5, 5), data.grids, cfg);
  t.run();
  return t.model();
}

// ---------------------------------------------------------------------------
// 1. Autodiff soundness

struct GradCase {
  Graph graph;
  NodeId output = 0;
  std::vector<NodeId> wrt;
  std::vector<std::pair<NodeId, TensorD>> leaves;
};

TensorD random_d(Shape shape, Rng& rng, double scale = 1.0) {
  TensorD t(std::move(shape));
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

/// Appends sum(layer ⊙ R) for a random R so every output element matters.
void finish_with_projection(GradCase& c, NodeId layer, Rng& rng) {
  Bindings<double> b;
  for (const auto& [id, t] : c.leaves) b.bind(id, t);
  const NodeId outs[] = {layer};
  const Shape shape = forward(c.graph, b, outs)[layer].shape();
  const NodeId r = c.graph.input("r");
  c.leaves.emplace_back(r, random_d(shape, rng));
  c.wrt.push_back(r);
  c.output = c.graph.sum(c.graph.mul(layer, r));
}

GradCase make_grad_case(int layer_type, std::uint64_t seed) {
  Rng rng(seed * 131 + layer_type);
  GradCase c;
  Graph& g = c.graph;
  auto leaf = [&](NodeId id, TensorD t, bool check = true) {
    c.leaves.emplace_back(id, std::move(t));
    if (check) c.wrt.push_back(id);
    return id;
  };
  NodeId layer = 0;
  switch (layer_type) {
    case 0: {  // conv3d
      const std::size_t k = 1 + seed % 3, s = 1 + seed % 2;
      const NodeId x = leaf(g.input("x"), random_d({2, 2, 4, 3, 4}, rng));
      const NodeId w = leaf(g.parameter("w"), random_d({3, 2, k, k, k}, rng, 0.5));
      std::optional<NodeId> b;
      if (seed % 2) b = leaf(g.parameter("b"), random_d({3}, rng));
      layer = g.conv3d(x, w, b, s);
      break;
    }
    case 1: {  // deconv3d
      const std::size_t k = 1 + seed % 4, up = 1 + seed % 2;
      const NodeId x = leaf(g.input("x"), random_d({2, 2, 3, 2, 3}, rng));
      const NodeId w = leaf(g.parameter("w"), random_d({2, 3, k, k, k}, rng, 0.5));
      const NodeId b = leaf(g.parameter("b"), random_d({3}, rng));
      layer = g.deconv3d(x, w, b, up);
      break;
    }
    case 2: {  // fully connected
      const NodeId x = leaf(g.input("x"), random_d({3, 2, 2, 1, 2}, rng));
      const NodeId w = leaf(g.parameter("w"), random_d({4, 8}, rng, 0.5));
      const NodeId b = leaf(g.parameter("b"), random_d({4}, rng));
      layer = g.fully_connected(x, w, b);
      break;
    }
    case 3: {  // relu, inputs kept clear of the kink
      TensorD x = random_d({2, 3, 3, 3, 3}, rng);
      for (auto& v : x.data()) {
        if (std::abs(v) < 0.05) v = v < 0 ? -0.05 - std::abs(v) : 0.05 + v;
      }
      layer = g.relu(leaf(g.input("x"), std::move(x)));
      break;
    }
    case 4:  // tanh
      layer = g.tanh(leaf(g.input("x"), random_d({2, 2, 3, 3, 3}, rng)));
      break;
    case 5:    // batchnorm on batch statistics
    case 6: {  // batchnorm on running statistics
      const NodeId x = leaf(g.input("x"), random_d({3, 2, 2, 3, 2}, rng, 2.0));
      const NodeId scale = leaf(g.parameter("scale"), random_d({2}, rng));
      const NodeId shift = leaf(g.parameter("shift"), random_d({2}, rng));
      TensorD var({2});
      for (auto& v : var.data()) v = 0.5 + rng.uniform();
      const NodeId rm = leaf(g.input("rm"), random_d({2}, rng), false);
      const NodeId rv = leaf(g.input("rv"), std::move(var), false);
      layer = g.batchnorm3d(x, scale, shift, rm, rv,
                            layer_type == 5 ? BatchNormMode::kTraining : BatchNormMode::kInference);
      break;
    }
    case 7: {  // maxpool, distinct values spaced well beyond the FD step
      const std::size_t k = 2 + seed % 2;
      TensorD x({2, 2, 5, 4, 5});
      std::vector<double> vals(x.size());
      for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.01 * static_cast<double>(i);
      std::shuffle(vals.begin(), vals.end(), rng.engine());
      std::copy(vals.begin(), vals.end(), x.data().begin());
      layer = g.maxpool3d(leaf(g.input("x"), std::move(x)), k);
      break;
    }
    case 8:  // reshape
      layer = g.reshape(leaf(g.input("x"), random_d({2, 2, 2, 2, 2}, rng)), {16});
      break;
    case 9: {  // add
      const NodeId a = leaf(g.input("a"), random_d({2, 3, 2, 2, 2}, rng));
      const NodeId b = leaf(g.input("b"), random_d({2, 3, 2, 2, 2}, rng));
      layer = g.add(a, b);
      break;
    }
    case 10: {  // squared error, already scalar
      const NodeId a = leaf(g.input("a"), random_d({2, 1, 3, 3, 3}, rng));
      const NodeId t = leaf(g.input("t"), random_d({2, 1, 3, 3, 3}, rng));
      c.output = g.squared_error(a, t);
      return c;
    }
    default:
      break;
  }
  finish_with_projection(c, layer, rng);
  return c;
}

const char* kGradLayerNames[] = {"conv3d", "deconv3d", "fc",      "relu",    "tanh",  "bn-train",
                                 "bn-infer", "maxpool", "reshape", "add/mul/sum", "sq-error"};

Outcome autodiff_soundness() {
  const double h = 1e-3;
  std::size_t cases = 0, elements = 0, bad = 0;
  double worst_abs = 0.0;
  std::string first_bad;
  for (int type = 0; type < 11; ++type) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const GradCase c = make_grad_case(type, seed);
      Bindings<double> b;
      for (const auto& [id, t] : c.leaves) b.bind(id, t);
      const Values<double> v = forward(c.graph, b);
      const GradMap<double> grads = backward(c.graph, v, c.output);
      for (NodeId wrt : c.wrt) {
        const TensorD fd = finite_diff_grad(c.graph, b, c.output, wrt, h);
        const TensorD& an = grads[wrt];
        for (std::size_t k = 0; k < fd.size(); ++k) {
          const double diff = std::abs(an[k] - fd[k]);
          ++elements;
          if (diff > 1e-5 && diff > 1e-3 * std::abs(fd[k])) {
            if (bad++ == 0) first_bad = std::string(kGradLayerNames[type]) + " seed " + std::to_string(seed);
          }
          worst_abs = std::max(worst_abs, std::min(diff, diff / std::max(std::abs(fd[k]), 1e-300)));
        }
      }
      ++cases;
    }
  }
  std::ostringstream d;
  d << cases << " cases over 11 op types, " << elements << " gradient entries, " << bad
    << " outside tolerance, worst min(abs, rel) error " << fmt("%.2e", worst_abs);
  if (bad) d << " (first: " << first_bad << ")";
  return {bad == 0 && cases >= 20, d.str()};
}

// ---------------------------------------------------------------------------
// 2. Kernel oracles

Outcome kernel_oracles() {
  double conv_err = 0, deconv_err = 0, pool_err = 0, adj_err = 0;
  std::size_t n = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); };
    const std::size_t d = pick(1, 6), h = pick(1, 6), w = pick(1, 6);
    const std::size_t ci = pick(1, 3), co = pick(1, 3), k = pick(1, 4), s = pick(1, 3);
    const Tensor x = oracle::random_tensor({2, ci, d, h, w}, seed * 7 + 1);
    const Tensor f = oracle::random_tensor({co, ci, k, k, k}, seed * 7 + 2);
    const Tensor b = oracle::random_tensor({co}, seed * 7 + 3);
    std::vector<double> bias(b.data().begin(), b.data().end());

    const Tensor y = conv3d(x, f, &b, s);
    const auto want = oracle::conv3d(oracle::to_double(x), oracle::to_double(f), bias, s);
    conv_err = std::max(conv_err, oracle::max_abs_diff(want.data(), y.data()));

    // Deconv input sized so the output stays within 6³.
    const Tensor dx = oracle::random_tensor({2, co, pick(1, 6 / s), pick(1, 6 / s), pick(1, 6 / s)},
                                            seed * 7 + 4);
    const Tensor dz = deconv3d(dx, f, static_cast<const Tensor*>(nullptr), s);
    const auto dwant = oracle::deconv3d(oracle::to_double(dx), oracle::to_double(f), {}, s);
    deconv_err = std::max(deconv_err, oracle::max_abs_diff(dwant.data(), dz.data()));

    const std::size_t pk = pick(1, 3);
    const Tensor p = maxpool3d(x, pk).y;
    const auto pwant = oracle::maxpool3d(oracle::to_double(x), pk);
    pool_err = std::max(pool_err, oracle::max_abs_diff(pwant.data(), p.data()));

    // ⟨conv(x), r⟩ = ⟨x, deconv(r)⟩ with shared filters.
    const Tensor r = oracle::random_tensor(conv3d(x, f, static_cast<const Tensor*>(nullptr), s).shape(),
                                           seed * 7 + 5);
    const Tensor cx = conv3d(x, f, static_cast<const Tensor*>(nullptr), s);
    const Tensor dr = deconv3d(r, f, static_cast<const Tensor*>(nullptr), s);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < cx.size(); ++i) lhs += double(cx[i]) * r[i];
    if (dr.shape() == x.shape()) {
      for (std::size_t i = 0; i < x.size(); ++i) rhs += double(x[i]) * dr[i];
      adj_err = std::max(adj_err, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
      ++n;
    }
  }
  std::ostringstream det;
  det << "max abs err conv " << fmt("%.1e", conv_err) << ", deconv " << fmt("%.1e", deconv_err)
      << ", maxpool " << fmt("%.1e", pool_err) << "; adjointness rel err " << fmt("%.1e", adj_err)
      << " over " << n << " shape-compatible cases";
  return {conv_err <= 1e-5 && deconv_err <= 1e-5 && pool_err <= 1e-5 && adj_err <= 1e-4 && n >= 10,
          det.str()};
}

// ---------------------------------------------------------------------------
// 3. Langevin analytics

Outcome langevin_analytics() {
  const DescriptorArchitecture arch{
      {LayerSpec::conv(4, 3, 2), LayerSpec::relu(), LayerSpec::fc(1, false)}, {8, 8, 8}};
  DescriptorModel zero(arch, 0.5, 1);
  for (std::size_t i = 0; i < zero.params().size(); ++i) zero.params()[i].fill(0.0f);
  std::vector<Rng> none;
  double contraction_err = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Tensor y = oracle::random_tensor({2, 1, 8, 8, 8}, seed, 1.0 + seed);
    for (int k = 0; k < 20; ++k) {
      const Tensor next = langevin_step(zero, y, {0.01, 1, false}, none);
      for (std::size_t i = 0; i < y.size(); ++i) {
        contraction_err = std::max(contraction_err, std::abs(double(next[i]) - 0.98 * y[i]));
      }
      y = next;
    }
  }

  const DescriptorModel toy = trained_toy_model();
  std::size_t increases = 0;
  double worst_rise = 0.0;
  const Dataset boxes = preprocess(gen_procedural("box", 2, 8, 77));
  std::vector<Tensor> starts = {oracle::random_tensor({3, 1, 8, 8, 8}, 9, 0.5), stack(boxes.grids)};
  for (Tensor y : starts) {
    auto prev = energy(toy, y);
    for (int k = 0; k < 50; ++k) {
      y = langevin_step(toy, y, {1e-4, 1, false}, none);
      const auto e = energy(toy, y);
      for (std::size_t i = 0; i < e.size(); ++i) {
        if (e[i] > prev[i]) {
          worst_rise = std::max(worst_rise, e[i] - prev[i]);
          if (e[i] > prev[i] + 1e-6) ++increases;
        }
      }
      prev = e;
    }
  }
  std::ostringstream d;
  d << "zero-model contraction max err " << fmt("%.1e", contraction_err)
    << "; trained toy model, 50 steps x 5 chains: " << increases
    << " energy increases beyond 1e-6 (largest rise " << fmt("%.1e", worst_rise) << ")";
  return {contraction_err <= 1e-6 && increases == 0, d.str()};
}

// ---------------------------------------------------------------------------
// 4. Grid operators

Outcome grid_operators() {
  double identity_err = 0, linear_err = 0, mean_err = 0;
  for (std::size_t f : {2u, 3u, 4u}) {
    const GridScaler s(f);
    const Tensor low = oracle::random_tensor({2, 1, 3, 2, 3}, f);
    const Tensor back = s.downscale(s.upscale(low));
    for (std::size_t i = 0; i < low.size(); ++i) {
      identity_err = std::max(identity_err, std::abs(double(back[i]) - low[i]));
    }
    const Tensor a = oracle::random_tensor({1, 1, 3 * f, 2 * f, 2 * f}, 10 + f);
    const Tensor b = oracle::random_tensor({1, 1, 3 * f, 2 * f, 2 * f}, 20 + f);
    Tensor mix = a;
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 1.5f * a[i] - 0.25f * b[i];
    const Tensor da = s.downscale(a), db = s.downscale(b), dm = s.downscale(mix);
    for (std::size_t i = 0; i < dm.size(); ++i) {
      linear_err = std::max(linear_err, std::abs(double(dm[i]) - (1.5 * da[i] - 0.25 * db[i])));
    }
    const Tensor ua = s.upscale(low), ub = s.upscale(oracle::random_tensor(low.shape(), 30 + f));
    auto mean = [](const Tensor& t) {
      return std::accumulate(t.data().begin(), t.data().end(), 0.0) / t.size();
    };
    mean_err = std::max({mean_err, std::abs(mean(da) - mean(a)), std::abs(mean(ua) - mean(low))});
    (void)ub;
  }

  const DescriptorModel toy = trained_toy_model();
  const GridScaler scaler(2);
  const Tensor y0 = oracle::random_tensor({3, 1, 8, 8, 8}, 5, 0.5);
  auto rngs = chain_rngs(11, 3);
  const Tensor y = run_projected_chain(toy, y0, scaler, {0.01, 90, true}, rngs);
  const Tensor c0 = scaler.downscale(y0), c1 = scaler.downscale(y);
  double proj_err = 0.0, moved = 0.0;
  for (std::size_t i = 0; i < c0.size(); ++i) proj_err = std::max(proj_err, std::abs(double(c0[i]) - c1[i]));
  for (std::size_t i = 0; i < y.size(); ++i) moved = std::max(moved, std::abs(double(y[i]) - y0[i]));

  std::ostringstream d;
  d << "C·C⁻ err " << fmt("%.1e", identity_err) << ", linearity err " << fmt("%.1e", linear_err)
    << ", mean err " << fmt("%.1e", mean_err) << "; 90 projected steps: C·Y drift "
    << fmt("%.1e", proj_err) << " while voxels moved up to " << fmt("%.2f", moved);
  return {identity_err <= 1e-6 && linear_err <= 1e-6 && mean_err <= 1e-6 && proj_err <= 1e-5 &&
              moved > 0.0,
          d.str()};
}

// ---------------------------------------------------------------------------
// 5. Desk-scale MLE

Outcome desk_mle() {
  std::size_t passed = 0;
  std::ostringstream d;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RunConfig cfg = seeded_preset("desk-synthesis", seed);
    cfg.train.iterations = 100;
    const Dataset data = to_model_space(load_run_data(cfg), cfg.convention);
    auto trainer = make_trainer(cfg, data);
    trainer->run();
    const auto& model = dynamic_cast<MleTrainer&>(*trainer).model();
    const Dataset held = gen_procedural_mix(kCategories, 10, 16, seed + 1000);
    const double real = mean_energy(model, stack(shifted(held, data.mean)));
    const double random = mean_energy(model, bernoulli_batch(100, 16, data.mean, seed + 2000));
    passed += real < random;
    d << (seed > 1 ? "; " : "") << "seed " << seed << ": " << fmt("%.1f", real) << " vs "
      << fmt("%.1f", random);
  }
  return {passed * 100 >= 95 * 5,
          std::to_string(passed) + "/5 runs with held-out E < random E after 100 iterations (" +
              d.str() + ")"};
}

// ---------------------------------------------------------------------------
// 6. Recovery

Outcome desk_recovery() {
  std::size_t passed = 0;
  std::ostringstream d;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const RunConfig cfg = seeded_preset("desk-recovery", seed);
    const Dataset data = to_model_space(load_run_data(cfg), cfg.convention);
    auto trainer = make_trainer(cfg, data);
    trainer->run();
    const auto& model = dynamic_cast<RecoveryTrainer&>(*trainer).model();
    const Dataset held = gen_procedural_mix(kCategories, 4, 16, seed + 1000);
    const auto inputs = shifted(held, data.mean);
    double err = 0.0, base = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      Rng mask_rng(derive_seed(seed, 7, i));
      const auto [corrupted, mask] = corrupt(inputs[i], cfg.train.corruption, mask_rng, cfg.ref_std);
      Rng chain(derive_seed(seed, 8, i));
      const VoxelGrid out = recover(model, corrupted, mask, cfg.sampling, chain);
      err += recovery_error(held.grids[i], postprocess(out, data.mean), mask);
      base += recovery_error(held.grids[i], postprocess(corrupted, data.mean), mask);
    }
    err /= inputs.size();
    base /= inputs.size();
    passed += err < 0.15 && err < base;
    d << (seed > 1 ? "; " : "") << "seed " << seed << ": " << fmt("%.3f", err) << " vs "
      << fmt("%.3f", base);
  }
  return {passed >= 4, std::to_string(passed) +
                           "/5 seeds with held-out error < 0.15 and < random-fill error (" +
                           d.str() + ")"};
}

// ---------------------------------------------------------------------------
// 7. Super-resolution

Outcome desk_superres() {
  std::size_t passed = 0;
  double worst_dev = 0.0;
  std::ostringstream d;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const RunConfig cfg = seeded_preset("desk-superres", seed);
    const Dataset data = to_model_space(load_run_data(cfg), cfg.convention);
    auto trainer = make_trainer(cfg, data);
    trainer->run();
    const auto& model = dynamic_cast<SuperResTrainer&>(*trainer).model();
    const GridScaler scaler(cfg.train.scale_factor);
    const Dataset held = gen_procedural("box", 12, 16, seed + 1000);
    const auto inputs = shifted(held, data.mean);
    double err = 0.0, base = 0.0, dev = 0.0;
    const CorruptionMask all({16, 16, 16}, true);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const VoxelGrid low = scaler.downscale(inputs[i]);
      Rng chain(derive_seed(seed, 8, i));
      const VoxelGrid high = superres(model, low, scaler, cfg.sampling, chain);
      const VoxelGrid back = scaler.downscale(high);
      for (std::size_t k = 0; k < low.size(); ++k) {
        dev = std::max(dev, std::abs(double(back.values()[k]) - low.values()[k]));
      }
      err += recovery_error(held.grids[i], postprocess(high, data.mean), all);
      base += recovery_error(held.grids[i], postprocess(scaler.upscale(low), data.mean), all);
    }
    err /= inputs.size();
    base /= inputs.size();
    worst_dev = std::max(worst_dev, dev);
    passed += err < base && dev <= 1e-5;
    d << (seed > 1 ? "; " : "") << "seed " << seed << ": " << fmt("%.4f", err) << " vs "
      << fmt("%.4f", base);
  }
  return {passed >= 4 && worst_dev <= 1e-5,
          std::to_string(passed) + "/5 seeds beat plain upscaling, max |C·Y - Y_low| " +
              fmt("%.1e", worst_dev) + " (" + d.str() + ")"};
}

// ---------------------------------------------------------------------------
// 8. Cooperative training

Outcome desk_coop() {
  RunConfig cfg = seeded_preset("desk-coop", 1);
  const Dataset data = to_model_space(load_run_data(cfg), cfg.convention);
  double at10 = 0.0, at200 = 0.0;
  {
    auto trainer = make_trainer(cfg, data);
    trainer->run([&](const TrainDiagnostics& x) {
      if (x.iteration + 1 == 10) at10 = *x.recon_loss;
      if (x.iteration + 1 == 200) at200 = *x.recon_loss;
    });
  }
  cfg.train.langevin.steps = 0;
  double tail = 0.0;
  std::size_t tail_n = 0;
  {
    auto trainer = make_trainer(cfg, data);
    trainer->run([&](const TrainDiagnostics& x) {
      if (x.iteration + 20 >= cfg.train.iterations) {
        tail += *x.recon_loss;
        ++tail_n;
      }
    });
  }
  tail /= static_cast<double>(tail_n);
  const double sigma2 = cfg.generator_noise_std * cfg.generator_noise_std;
  const double ratio = at200 / at10;
  std::ostringstream d;
  d << "loss at iteration 10 " << fmt("%.4f", at10) << ", at 200 " << fmt("%.4f", at200)
    << " (ratio " << fmt("%.3f", ratio) << "); K=0 loss over the last 20 iterations "
    << fmt("%.4f", tail) << " vs sigma^2 " << fmt("%.4f", sigma2);
  return {ratio <= 0.5 && std::abs(tail - sigma2) <= 0.2 * sigma2, d.str()};
}

// ---------------------------------------------------------------------------
// 9. Multi-grid

Outcome desk_multigrid() {
  std::size_t passed = 0;
  bool shapes_ok = true, finite_ok = true;
  std::ostringstream d;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const RunConfig cfg = seeded_preset("desk-multigrid", seed);
    const Dataset data = to_model_space(load_run_data(cfg), cfg.convention);
    auto trainer = make_trainer(cfg, data);
    try {
      trainer->run([&](const TrainDiagnostics& x) {
        finite_ok = finite_ok && std::isfinite(x.value) && std::isfinite(x.grad_norm);
      });
    } catch (const DivergenceError& e) {
      finite_ok = false;
      d << "seed " << seed << " diverged: " << e.what() << "; ";
      continue;
    }
    auto& mg = dynamic_cast<MultiGridTrainer&>(*trainer);
    const auto& ladder = cfg.train.ladder;

    const auto pyramids = sample_multigrid(mg.models(), mg.histogram(), ladder, cfg.sampling, 4, seed);
    for (const auto& p : pyramids) {
      std::size_t edge = 1;
      shapes_ok = shapes_ok && p.levels.size() == ladder.size() + 1;
      for (std::size_t s = 0; s < p.levels.size() && shapes_ok; ++s) {
        if (s > 0) edge *= ladder[s - 1];
        shapes_ok = p.levels[s].extents() == Extent3{edge, edge, edge};
        finite_ok = finite_ok && all_finite(p.levels[s].as_batch());
      }
    }

    const Dataset held = gen_procedural_mix(kCategories, 10, 16, seed + 1000);
    const auto levels = build_pyramid(stack(shifted(held, data.mean)), ladder);
    bool separated = true;
    d << (seed > 1 ? "; " : "") << "seed " << seed << ":";
    std::size_t edge = 1;
    for (std::size_t s = 0; s < mg.models().size(); ++s) {
      edge *= ladder[s];
      const double real = mean_energy(mg.models()[s], levels[s + 1]);
      const double random =
          mean_energy(mg.models()[s], bernoulli_batch(100, edge, data.mean, seed + 2000 + s));
      separated = separated && real < random;
      d << " " << edge << "^3 " << fmt("%.1f", real) << "<" << fmt("%.1f", random);
    }
    passed += separated;
  }
  return {passed * 100 >= 95 * 5 && shapes_ok && finite_ok,
          std::to_string(passed) + "/5 runs separated at every grid, pyramid sizes " +
              (shapes_ok ? "ok" : "WRONG") + ", " + (finite_ok ? "no divergence" : "DIVERGED") +
              " (" + d.str() + ")"};
}

// ---------------------------------------------------------------------------
// 10. Metric correctness

Outcome metric_correctness() {
  std::vector<std::string> failures;
  auto check = [&](bool ok, const char* what) {
    if (!ok) failures.emplace_back(what);
  };
  check(std::abs(inception_score(Matrix(6, std::vector<double>(3, 1.0 / 3))) - 1.0) <= 1e-9,
        "IS uniform");
  Matrix onehot;
  for (std::size_t i = 0; i < 12; ++i) {
    std::vector<double> r(4, 0.0);
    r[i % 4] = 1.0;
    onehot.push_back(r);
  }
  check(std::abs(inception_score(onehot) - 4.0) <= 1e-9, "IS one-hot");
  const double kl = 0.9 * std::log(0.9 / 0.5) + 0.1 * std::log(0.1 / 0.5);
  check(std::abs(inception_score({{0.9, 0.1}, {0.1, 0.9}}) - std::exp(kl)) <= 1e-9, "IS 2x2");

  const Matrix one = {{1.0}};
  check(std::abs(fid_from_moments(std::vector<double>{0.0}, one, std::vector<double>{3.0}, one) -
                 9.0) <= 1e-6,
        "FID scalar");
  Rng rng(1);
  Matrix set(100, std::vector<double>(4));
  for (auto& r : set)
    for (auto& v : r) v = rng.normal();
  check(std::abs(fid(set, set)) <= 1e-6, "FID identical");

  VoxelGrid original({6, 6, 6});
  for (auto& v : original.values()) v = rng.uniform() < 0.4 ? 1.0f : 0.0f;
  CorruptionMask mask({6, 6, 6});
  for (std::size_t k = 0; k < mask.size(); k += 2) mask.set_free(k, true);
  VoxelGrid flipped = original;
  for (auto& v : flipped.values()) v = 1.0f - v;
  check(recovery_error(original, original, mask) == 0.0, "recovery identical");
  check(recovery_error(original, flipped, mask) == 1.0, "recovery flipped");

  std::string detail = "IS uniform/one-hot/2x2, FID scalar/identical, recovery-error identical/flipped";
  if (failures.empty()) return {true, detail + ": all exact"};
  for (const auto& f : failures) detail += "; FAILED " + f;
  return {false, detail};
}

// ---------------------------------------------------------------------------
// 11. Classification

Outcome desk_classification() {
  const std::size_t preset_len = feature_length(descriptor_preset("paper-synthesis-32"));
  RunConfig cfg = seeded_preset("desk-synthesis", 1);
  cfg.train.iterations = 100;
  const Dataset data = to_model_space(load_run_data(cfg), cfg.convention);
  auto trainer = make_trainer(cfg, data);
  trainer->run();
  const auto& model = dynamic_cast<MleTrainer&>(*trainer).model();

  const Matrix train_features = extract_features(model, stack(data.grids));
  const ClassifierModel clf = train_classifier(train_features, data.label_ids());
  const Dataset held = gen_procedural_mix(kCategories, 20, 16, 501);
  const Matrix held_features = extract_features(model, stack(shifted(held, data.mean)));
  const auto labels = held.label_ids();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < held_features.size(); ++i) hits += classify(clf, held_features[i]).label == labels[i];
  const double acc = static_cast<double>(hits) / static_cast<double>(held_features.size());
  std::ostringstream d;
  d << "32³ synthesis preset feature length " << preset_len << "; desk held-out accuracy "
    << fmt("%.3f", acc) << " (" << hits << "/" << held_features.size() << ", "
    << train_features[0].size() << " features)";
  return {preset_len == 8100 && acc >= 0.9, d.str()};
}

// ---------------------------------------------------------------------------
// 12. Determinism and persistence

RunConfig tiny_run(const char* preset) {
  RunConfig cfg = preset_config(preset);
  cfg.data.per_category = cfg.data.categories.size() == 1 ? 4 : 2;
  cfg.train.iterations = 4;
  cfg.train.batch_size = 2;
  cfg.train.chains = 2;
  cfg.train.langevin.steps = 3;
  return cfg;
}

std::string run_and_encode(const RunConfig& cfg, const Dataset& data,
                           std::optional<std::size_t> stop = std::nullopt,
                           const std::string* resume = nullptr) {
  auto t = make_trainer(cfg, data);
  if (resume) t->restore(decode_checkpoint(*resume).state);
  if (stop) t->set_iterations(*stop);
  t->run();
  return encode_checkpoint(make_checkpoint(cfg, data.mean, *t));
}

Outcome determinism() {
  std::vector<std::string> failures;
  const char* presets[] = {"desk-synthesis", "desk-recovery", "desk-superres", "desk-multigrid",
                           "desk-coop"};
  for (const char* p : presets) {
    const RunConfig cfg = tiny_run(p);
    const Dataset data = to_model_space(load_run_data(cfg), cfg.convention);
    const std::string straight = run_and_encode(cfg, data);
    if (run_and_encode(cfg, data) != straight) failures.push_back(std::string(p) + " rerun");
    const std::string head = run_and_encode(cfg, data, 2);
    if (run_and_encode(cfg, data, std::nullopt, &head) != straight) {
      failures.push_back(std::string(p) + " resume");
    }
    if (encode_checkpoint(decode_checkpoint(straight)) != straight) {
      failures.push_back(std::string(p) + " checkpoint roundtrip");
    }
    if (p != std::string("desk-recovery") && p != std::string("desk-superres")) {
      const Checkpoint ckpt = decode_checkpoint(straight);
      if (sample_checkpoint(ckpt, 2, 9) != sample_checkpoint(ckpt, 2, 9)) {
        failures.push_back(std::string(p) + " sampling");
      }
    }
  }

  VoxelGrid g({5, 3, 4});
  Rng rng(3);
  for (auto& v : g.values()) v = static_cast<float>(rng.normal() * 1e3);
  g.values()[0] = -0.0f;
  g.values()[1] = 1e-42f;  // subnormal
  g.values()[2] = 3.4e38f;
  const VoxelGrid back = decode_grid(encode_grid(g));
  bool bits_equal = back.extents() == g.extents();
  for (std::size_t i = 0; bits_equal && i < g.size(); ++i) {
    bits_equal = std::signbit(back.values()[i]) == std::signbit(g.values()[i]) &&
                 back.values()[i] == g.values()[i];
  }
  if (!bits_equal) failures.emplace_back("vgrid roundtrip");

  std::string detail =
      "5 trainers: rerun, checkpoint-resume and checkpoint roundtrip byte-identical; seeded "
      "sampling repeatable; .vgrid roundtrip bit-exact";
  if (failures.empty()) return {true, detail};
  detail = "FAILED:";
  for (const auto& f : failures) detail += " " + f + ";";
  return {false, detail};
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* title;
  double budget_seconds;  // 0: no runtime bound
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "autodiff soundness", 60, autodiff_soundness},
    {2, "kernel oracles", 30, kernel_oracles},
    {3, "Langevin analytics", 30, langevin_analytics},
    {4, "grid operators", 10, grid_operators},
    {5, "desk-scale MLE training", 600, desk_mle},
    {6, "recovery", 600, desk_recovery},
    {7, "super-resolution", 600, desk_superres},
    {8, "cooperative training", 600, desk_coop},
    {9, "multi-grid", 900, desk_multigrid},
    {10, "metric correctness", 10, metric_correctness},
    {11, "classification pipeline", 900, desk_classification},
    {12, "determinism and persistence", 0, determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  apply_thread_count(std::nullopt);
  int failed = 0, ran = 0;
  for (const auto& c : kCriteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget_seconds == 0 || secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("[%s] %2d %s: %s [%.1f s", pass ? "PASS" : "FAIL", c.id, c.title,
                o.detail.c_str(), secs);
    if (c.budget_seconds > 0) std::printf(" / budget %.0f s%s", c.budget_seconds, in_time ? "" : ", OVER");
    std::printf("]\n");
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
