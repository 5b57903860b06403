#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "v2ir/autograd.hpp"
#include "v2ir/common.hpp"
#include "v2ir/config.hpp"
#include "v2ir/dataset.hpp"
#include "v2ir/models.hpp"
#include "v2ir/objectives.hpp"
#include "v2ir/param_store.hpp"
#include "v2ir/rng.hpp"

namespace v2ir {

enum class Algorithm { cgan, cyclegan };

inline const char* to_string(Algorithm a) { return a == Algorithm::cgan ? "cgan" : "cyclegan"; }
inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "cgan") return Algorithm::cgan;
  if (s == "cyclegan") return Algorithm::cyclegan;
  throw data_error("unknown algorithm: " + s);
}

inline const char* to_string(ZMode z) { return z == ZMode::none ? "none" : "channel"; }
inline ZMode parse_z_mode(const std::string& s) {
  if (s == "none") return ZMode::none;
  if (s == "channel") return ZMode::channel;
  throw data_error("unknown z_mode: " + s);
}

inline const char* to_string(GanMode m) {
  return m == GanMode::minimax ? "minimax" : "non_saturating";
}
inline GanMode parse_gan_mode(const std::string& s) {
  if (s == "minimax") return GanMode::minimax;
  if (s == "non_saturating") return GanMode::non_saturating;
  throw data_error("unknown g_adv_mode: " + s);
}

// ---------------------------------------------------------------------------
// Training configuration
// ---------------------------------------------------------------------------

struct TrainConfig {
  Algorithm algorithm = Algorithm::cgan;
  double lr_d = 0.005;
  double lr_g = 0.005;
  LossWeights weights;
  int batch = 4;
  int max_epochs = 10000;
  std::uint64_t seed = 0;
  ZMode z_mode = ZMode::channel;  // cyclegan generators never take z
  int image_size = 64;
  int window = 50;    // convergence window W
  double tau = 1e-3;  // convergence tolerance
  // Wall-clock seconds are environment noise; freeze them to 0.000 when a
  // byte-reproducible run record is required.
  bool record_timing = true;
  // Desk-scale architecture knobs.
  int base_width = 16;
  int depth = 4;       // unet levels
  int res_blocks = 3;  // resnet blocks
  std::vector<int> disc_widths = {32, 64, 128};
};

inline void validate_train_config(const TrainConfig& cfg) {
  require(cfg.lr_d > 0.0 && cfg.lr_g > 0.0 && std::isfinite(cfg.lr_d) && std::isfinite(cfg.lr_g),
          "train config: learning rates must be positive");
  require(cfg.batch >= 1, "train config: batch must be >= 1");
  require(cfg.max_epochs >= 1, "train config: max_epochs must be >= 1");
  require(cfg.window >= 2, "train config: convergence window must be >= 2");
  require(cfg.tau >= 0.0 && std::isfinite(cfg.tau), "train config: tau must be >= 0");
  require(cfg.image_size >= 4, "train config: image_size must be >= 4");
  require(cfg.base_width >= 1 && cfg.depth >= 1 && cfg.res_blocks >= 1,
          "train config: architecture extents must be >= 1");
  require(!cfg.disc_widths.empty(), "train config: disc_widths must be non-empty");
  for (int w : cfg.disc_widths) require(w >= 1, "train config: disc widths must be >= 1");
  require(cfg.weights.lambda_l1 >= 0.0 && cfg.weights.lambda_cyc >= 0.0,
          "train config: loss weights must be >= 0");
}

// Reads every recognized key, leaving unknown keys behind for the caller's
// expect_empty; missing keys keep the passed-in defaults.
inline TrainConfig parse_train_config(ConfigMap& m, TrainConfig cfg = TrainConfig{}) {
  if (auto v = m.take("algorithm")) cfg.algorithm = parse_algorithm(*v);
  cfg.lr_d = m.take_double("lr_d", cfg.lr_d);
  cfg.lr_g = m.take_double("lr_g", cfg.lr_g);
  cfg.weights.lambda_l1 = m.take_double("lambda_l1", cfg.weights.lambda_l1);
  cfg.weights.lambda_cyc = m.take_double("lambda_cyc", cfg.weights.lambda_cyc);
  if (auto v = m.take("g_adv_mode")) cfg.weights.g_adv_mode = parse_gan_mode(*v);
  cfg.batch = static_cast<int>(m.take_int("batch", cfg.batch));
  cfg.max_epochs = static_cast<int>(m.take_int("max_epochs", cfg.max_epochs));
  cfg.seed = m.take_u64("seed", cfg.seed);
  if (auto v = m.take("z_mode")) cfg.z_mode = parse_z_mode(*v);
  cfg.image_size = static_cast<int>(m.take_int("image_size", cfg.image_size));
  cfg.window = static_cast<int>(m.take_int("window", cfg.window));
  cfg.tau = m.take_double("tau", cfg.tau);
  cfg.record_timing = m.take_bool("record_timing", cfg.record_timing);
  cfg.base_width = static_cast<int>(m.take_int("base_width", cfg.base_width));
  cfg.depth = static_cast<int>(m.take_int("depth", cfg.depth));
  cfg.res_blocks = static_cast<int>(m.take_int("res_blocks", cfg.res_blocks));
  if (auto v = m.take("disc_widths")) {
    cfg.disc_widths.clear();
    for (const std::string& s : split_list(*v)) {
      try {
        cfg.disc_widths.push_back(std::stoi(s));
      } catch (const std::exception&) {
        throw data_error("disc_widths element is not an integer: " + s);
      }
    }
  }
  validate_train_config(cfg);
  return cfg;
}

inline std::string train_config_text(const TrainConfig& cfg) {
  char num[64];
  std::string out;
  auto add = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  auto fmt = [&num](double v) {
    std::snprintf(num, sizeof num, "%.17g", v);
    return std::string(num);
  };
  add("algorithm", to_string(cfg.algorithm));
  add("lr_d", fmt(cfg.lr_d));
  add("lr_g", fmt(cfg.lr_g));
  add("lambda_l1", fmt(cfg.weights.lambda_l1));
  add("lambda_cyc", fmt(cfg.weights.lambda_cyc));
  add("g_adv_mode", to_string(cfg.weights.g_adv_mode));
  add("batch", std::to_string(cfg.batch));
  add("max_epochs", std::to_string(cfg.max_epochs));
  add("seed", std::to_string(cfg.seed));
  add("z_mode", to_string(cfg.z_mode));
  add("image_size", std::to_string(cfg.image_size));
  add("window", std::to_string(cfg.window));
  add("tau", fmt(cfg.tau));
  add("record_timing", cfg.record_timing ? "1" : "0");
  add("base_width", std::to_string(cfg.base_width));
  add("depth", std::to_string(cfg.depth));
  add("res_blocks", std::to_string(cfg.res_blocks));
  std::string widths;
  for (int w : cfg.disc_widths) widths += (widths.empty() ? "" : ",") + std::to_string(w);
  add("disc_widths", widths);
  return out;
}

// Model shapes implied by a config. The paired path uses the U-Net
// generator, the unpaired path ResNet generators in both directions.
inline GeneratorSpec cgan_generator_spec(const TrainConfig& cfg) {
  GeneratorSpec gs;
  gs.kind = GenKind::unet;
  gs.in_channels = 3;
  gs.out_channels = 1;
  gs.base_width = cfg.base_width;
  gs.depth = cfg.depth;
  gs.z_mode = cfg.z_mode;
  return gs;
}

inline DiscriminatorSpec cgan_discriminator_spec(const TrainConfig& cfg) {
  DiscriminatorSpec ds;
  ds.conditional = true;
  ds.y_channels = 1;
  ds.x_channels = 3;
  ds.widths = cfg.disc_widths;
  return ds;
}

inline GeneratorSpec cycle_generator_spec(const TrainConfig& cfg, bool a_to_b) {
  GeneratorSpec gs;
  gs.kind = GenKind::resnet;
  gs.in_channels = a_to_b ? 3 : 1;
  gs.out_channels = a_to_b ? 1 : 3;
  gs.base_width = cfg.base_width;
  gs.res_blocks = cfg.res_blocks;
  gs.z_mode = ZMode::none;
  return gs;
}

inline DiscriminatorSpec cycle_discriminator_spec(const TrainConfig& cfg, bool domain_a) {
  DiscriminatorSpec ds;
  ds.conditional = false;
  ds.y_channels = domain_a ? 3 : 1;
  ds.widths = cfg.disc_widths;
  return ds;
}

// ---------------------------------------------------------------------------
// Run records and convergence
// ---------------------------------------------------------------------------

struct EpochRow {
  int epoch = 0;
  LossReport losses;
  double seconds = 0.0;
};

struct RunRecord {
  std::vector<EpochRow> rows;
};

inline double g_total(const LossReport& r) { return r.g_adv + r.g_l1 + r.cyc_ab + r.cyc_ba; }

// Moving-average plateau: true iff at least 2W epochs exist and the mean
// generator objective over the last W differs from the previous W by < tau.
inline bool converged(const RunRecord& record, int window, double tau) {
  require(window >= 2, "converged: window must be >= 2");
  const std::size_t w = static_cast<std::size_t>(window);
  if (record.rows.size() < 2 * w) return false;
  double recent = 0.0, previous = 0.0;
  const std::size_t n = record.rows.size();
  for (std::size_t i = n - w; i < n; ++i) recent += g_total(record.rows[i].losses);
  for (std::size_t i = n - 2 * w; i < n - w; ++i) previous += g_total(record.rows[i].losses);
  return std::abs(recent / window - previous / window) < tau;
}

inline std::string format_run_record(const RunRecord& record) {
  std::string out = "epoch,d_loss,g_adv,g_l1,cyc_ab,cyc_ba,seconds\n";
  char line[256];
  for (const EpochRow& r : record.rows) {
    std::snprintf(line, sizeof line, "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.3f\n", r.epoch,
                  r.losses.d_loss, r.losses.g_adv, r.losses.g_l1, r.losses.cyc_ab,
                  r.losses.cyc_ba, r.seconds);
    out += line;
  }
  return out;
}

inline void write_run_record(const RunRecord& record, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require_data(out.good(), path + ": cannot open for writing");
  const std::string text = format_run_record(record);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  require_data(out.good(), path + ": write failed");
}

// ---------------------------------------------------------------------------
// Batch assembly
// ---------------------------------------------------------------------------

namespace detail {

inline void check_training_image(const Image& img, int channels, int size) {
  require_data(img.channels == channels && img.width == size && img.height == size,
               "training sample does not match the configured image size/channels");
}

// Stacks normalized images for the given dataset indices into one NCHW batch.
inline TensorPtr<float> image_batch(const Dataset& ds, const std::vector<std::size_t>& idx,
                                    bool ir, int size) {
  const int C = ir ? 1 : 3;
  const int B = static_cast<int>(idx.size());
  auto out = make_tensor<float>(Shape{B, C, size, size});
  const std::size_t plane = static_cast<std::size_t>(C) * size * size;
  for (int b = 0; b < B; ++b) {
    const Sample& s = ds.samples[idx[static_cast<std::size_t>(b)]];
    if (ir) require_data(s.has_ir(), "training sample is missing its thermal channel");
    const Image& img = ir ? s.ir : s.visible;
    check_training_image(img, C, size);
    const Tensor<float> t = normalize<float>(img);
    std::copy(t.data.begin(), t.data.end(),
              out->data.begin() + static_cast<std::ptrdiff_t>(plane * b));
  }
  return out;
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
  return order;
}

inline TensorPtr<float> noise_batch(int B, int channels, int size, Rng& rng) {
  auto z = make_tensor<float>(Shape{B, channels, size, size});
  for (auto& v : z->data) v = static_cast<float>(rng.normal());
  return z;
}

inline void check_finite(double v, const char* what, int epoch, std::size_t batch) {
  if (!std::isfinite(v))
    throw numeric_error(std::string(what) + " became non-finite at epoch " +
                        std::to_string(epoch) + ", batch " + std::to_string(batch));
}

// Generator and discriminator outputs are range-bounded by their final
// activations, so a non-finite entry can only mean the parameters blew up;
// report that as a numeric failure before a loss precondition trips over it.
inline void check_all_finite(const Value<float>& v, const char* what, int epoch,
                             std::size_t batch) {
  for (const float x : v->value->data)
    if (!std::isfinite(x))
      throw numeric_error(std::string(what) + " became non-finite at epoch " +
                          std::to_string(epoch) + ", batch " + std::to_string(batch));
}

inline double scalar(const Value<float>& v) { return static_cast<double>(v->value->data[0]); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Paired training (visible -> thermal with a conditional discriminator)
// ---------------------------------------------------------------------------

struct CganResult {
  Generator<float> g;
  Discriminator<float> d;
  RunRecord record;
};

inline CganResult train_cgan(const Dataset& paired, const TrainConfig& cfg) {
  validate_train_config(cfg);
  require(cfg.algorithm == Algorithm::cgan, "train_cgan: config algorithm mismatch");
  require_data(!paired.empty(), "train_cgan: dataset is empty");
  for (const Sample& s : paired.samples)
    require_data(s.has_ir(), "train_cgan: every sample must be paired");

  Rng rng(cfg.seed, "train-cgan");
  Rng init = rng.child("init");
  CganResult res{build_generator<float>(cgan_generator_spec(cfg), init),
                 build_discriminator<float>(cgan_discriminator_spec(cfg), init),
                 RunRecord{}};
  Generator<float>& g = res.g;
  Discriminator<float>& d = res.d;

  const std::size_t n = paired.size();
  const std::size_t batches = (n + cfg.batch - 1) / cfg.batch;
  const float lr_d = static_cast<float>(cfg.lr_d);
  const float lr_g = static_cast<float>(cfg.lr_g);
  const float lambda_l1 = static_cast<float>(cfg.weights.lambda_l1);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng erng = rng.child("epoch", static_cast<std::uint64_t>(epoch));
    const auto order = detail::shuffled_indices(n, erng.child("shuffle"));
    LossReport sums;
    for (std::size_t k = 0; k < batches; ++k) {
      const std::size_t lo = k * cfg.batch;
      const std::size_t hi = std::min(n, lo + cfg.batch);
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                         order.begin() + static_cast<std::ptrdiff_t>(hi));
      const auto xv = leaf(detail::image_batch(paired, idx, false, cfg.image_size), false);
      const auto yv = leaf(detail::image_batch(paired, idx, true, cfg.image_size), false);
      Value<float> zv;
      if (cfg.z_mode == ZMode::channel) {
        Rng zrng = erng.child("z", k);
        zv = leaf(detail::noise_batch(static_cast<int>(idx.size()), 1, cfg.image_size, zrng), false);
      }

      // Phase 1: discriminator on real pairs vs detached fakes.
      const auto fake = generator_forward(g, xv, zv);
      detail::check_all_finite(fake, "generator output", epoch, k);
      const auto d_real = discriminator_forward(d, yv, xv);
      const auto d_fake = discriminator_forward(d, detach(fake), xv);
      detail::check_all_finite(d_real, "discriminator output", epoch, k);
      detail::check_all_finite(d_fake, "discriminator output", epoch, k);
      const auto dl = d_loss(d_real, d_fake);
      const double dlv = detail::scalar(dl);
      detail::check_finite(dlv, "d_loss", epoch, k);
      backward(dl);
      sgd_step(d.params, lr_d);

      // Phase 2: generator through the updated discriminator.
      const auto d_gen = discriminator_forward(d, fake, xv);
      detail::check_all_finite(d_gen, "discriminator output", epoch, k);
      const auto adv = g_adv_loss(d_gen, cfg.weights.g_adv_mode);
      const auto l1 = l1_term(fake, yv);
      const double advv = detail::scalar(adv);
      const double l1v = lambda_l1 * detail::scalar(l1);
      detail::check_finite(advv + l1v, "generator objective", epoch, k);
      backward(add(adv, scale(l1, lambda_l1)));
      sgd_step(g.params, lr_g);

      sums.d_loss += dlv;
      sums.g_adv += advv;
      sums.g_l1 += l1v;
    }
    EpochRow row;
    row.epoch = epoch;
    row.losses.d_loss = sums.d_loss / static_cast<double>(batches);
    row.losses.g_adv = sums.g_adv / static_cast<double>(batches);
    row.losses.g_l1 = sums.g_l1 / static_cast<double>(batches);
    if (cfg.record_timing)
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.record.rows.push_back(row);
    if (converged(res.record, cfg.window, cfg.tau)) break;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Unpaired training (two generators, two unconditional discriminators)
// ---------------------------------------------------------------------------

struct CycleResult {
  Generator<float> g_ab;  // visible -> thermal
  Generator<float> g_ba;  // thermal -> visible
  Discriminator<float> d_a;
  Discriminator<float> d_b;
  RunRecord record;
};

inline CycleResult train_cyclegan(const Dataset& pool_a, const Dataset& pool_b,
                                  const TrainConfig& cfg) {
  validate_train_config(cfg);
  require(cfg.algorithm == Algorithm::cyclegan, "train_cyclegan: config algorithm mismatch");
  require_data(!pool_a.empty() && !pool_b.empty(), "train_cyclegan: both pools must be non-empty");
  for (const Sample& s : pool_b.samples)
    require_data(s.has_ir(), "train_cyclegan: pool B samples must carry the thermal channel");

  Rng rng(cfg.seed, "train-cyclegan");
  Rng init = rng.child("init");
  CycleResult res{build_generator<float>(cycle_generator_spec(cfg, true), init),
                  build_generator<float>(cycle_generator_spec(cfg, false), init),
                  build_discriminator<float>(cycle_discriminator_spec(cfg, true), init),
                  build_discriminator<float>(cycle_discriminator_spec(cfg, false), init),
                  RunRecord{}};

  const std::size_t na = pool_a.size(), nb = pool_b.size();
  const std::size_t longest = std::max(na, nb);
  const std::size_t batches = (longest + cfg.batch - 1) / cfg.batch;
  const float lr_d = static_cast<float>(cfg.lr_d);
  const float lr_g = static_cast<float>(cfg.lr_g);
  const float lambda_cyc = static_cast<float>(cfg.weights.lambda_cyc);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng erng = rng.child("epoch", static_cast<std::uint64_t>(epoch));
    const auto order_a = detail::shuffled_indices(na, erng.child("shuffle-a"));
    const auto order_b = detail::shuffled_indices(nb, erng.child("shuffle-b"));
    LossReport sums;
    for (std::size_t k = 0; k < batches; ++k) {
      const std::size_t lo = k * cfg.batch;
      const std::size_t hi = std::min(longest, lo + cfg.batch);
      std::vector<std::size_t> ia, ib;
      for (std::size_t i = lo; i < hi; ++i) {
        ia.push_back(order_a[i % na]);  // shorter pool repeats cyclically
        ib.push_back(order_b[i % nb]);
      }
      const auto av = leaf(detail::image_batch(pool_a, ia, false, cfg.image_size), false);
      const auto bv = leaf(detail::image_batch(pool_b, ib, true, cfg.image_size), false);

      const auto fake_b = generator_forward(res.g_ab, av);
      const auto fake_a = generator_forward(res.g_ba, bv);
      detail::check_all_finite(fake_b, "generator output", epoch, k);
      detail::check_all_finite(fake_a, "generator output", epoch, k);

      // Phase 1: both discriminators against detached fakes.
      const auto da_real = discriminator_forward(res.d_a, av);
      const auto da_fake = discriminator_forward(res.d_a, detach(fake_a));
      const auto db_real = discriminator_forward(res.d_b, bv);
      const auto db_fake = discriminator_forward(res.d_b, detach(fake_b));
      for (const auto* v : {&da_real, &da_fake, &db_real, &db_fake})
        detail::check_all_finite(*v, "discriminator output", epoch, k);
      const auto dl = add(d_loss(da_real, da_fake), d_loss(db_real, db_fake));
      const double dlv = detail::scalar(dl);
      detail::check_finite(dlv, "d_loss", epoch, k);
      backward(dl);
      sgd_step(res.d_a.params, lr_d);
      sgd_step(res.d_b.params, lr_d);

      // Phase 2: both generators, adversarial + cycle reconstruction.
      const auto da_gen = discriminator_forward(res.d_a, fake_a);
      const auto db_gen = discriminator_forward(res.d_b, fake_b);
      detail::check_all_finite(da_gen, "discriminator output", epoch, k);
      detail::check_all_finite(db_gen, "discriminator output", epoch, k);
      const auto adv = add(g_adv_loss(da_gen, cfg.weights.g_adv_mode),
                           g_adv_loss(db_gen, cfg.weights.g_adv_mode));
      const auto cyc_ab = scale(l1_term(generator_forward(res.g_ba, fake_b), av), lambda_cyc);
      const auto cyc_ba = scale(l1_term(generator_forward(res.g_ab, fake_a), bv), lambda_cyc);
      const double advv = detail::scalar(adv);
      const double cabv = detail::scalar(cyc_ab);
      const double cbav = detail::scalar(cyc_ba);
      detail::check_finite(advv + cabv + cbav, "generator objective", epoch, k);
      backward(add(adv, add(cyc_ab, cyc_ba)));
      sgd_step(res.g_ab.params, lr_g);
      sgd_step(res.g_ba.params, lr_g);

      sums.d_loss += dlv;
      sums.g_adv += advv;
      sums.cyc_ab += cabv;
      sums.cyc_ba += cbav;
    }
    EpochRow row;
    row.epoch = epoch;
    row.losses.d_loss = sums.d_loss / static_cast<double>(batches);
    row.losses.g_adv = sums.g_adv / static_cast<double>(batches);
    row.losses.cyc_ab = sums.cyc_ab / static_cast<double>(batches);
    row.losses.cyc_ba = sums.cyc_ba / static_cast<double>(batches);
    if (cfg.record_timing)
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.record.rows.push_back(row);
    if (converged(res.record, cfg.window, cfg.tau)) break;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Checkpoints: magic `V2IR`, version u32, length-prefixed UTF-8 config echo,
// then per parameter (store-qualified name, ndim, dims, raw float32 values,
// all little-endian), closed by an 8-byte digest of everything before it.
// ---------------------------------------------------------------------------

namespace detail {

inline void append_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t read_u32(const std::string& buf, std::size_t& off, const std::string& path) {
  require_data(off + 4 <= buf.size(), path + ": truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
  off += 4;
  return v;
}

}  // namespace detail

constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(
    const std::vector<std::pair<std::string, const ParamStore<float>*>>& stores,
    const std::string& config_text, const std::string& path) {
  std::string buf;
  buf.append("V2IR", 4);
  detail::append_u32(buf, kCheckpointVersion);
  detail::append_u32(buf, static_cast<std::uint32_t>(config_text.size()));
  buf += config_text;
  for (const auto& [store_name, store] : stores) {
    for (const auto& [pname, tensor] : *store) {
      const std::string qualified = store_name + "/" + pname;
      detail::append_u32(buf, static_cast<std::uint32_t>(qualified.size()));
      buf += qualified;
      detail::append_u32(buf, static_cast<std::uint32_t>(tensor->shape.size()));
      for (int d : tensor->shape) detail::append_u32(buf, static_cast<std::uint32_t>(d));
      buf.append(reinterpret_cast<const char*>(tensor->data.data()),
                 tensor->data.size() * sizeof(float));
    }
  }
  const std::uint64_t digest = fnv1a64(buf.data(), buf.size());
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((digest >> (8 * i)) & 0xff));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require_data(out.good(), path + ": cannot open for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  require_data(out.good(), path + ": write failed");
}

struct CheckpointData {
  std::string config_text;
  std::vector<std::pair<std::string, ParamStore<float>>> stores;

  const ParamStore<float>& store(const std::string& name) const {
    for (const auto& [n, s] : stores)
      if (n == name) return s;
    throw data_error("checkpoint has no parameter store named " + name);
  }
  bool has_store(const std::string& name) const {
    for (const auto& [n, s] : stores)
      if (n == name) return true;
    return false;
  }
};

inline CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require_data(in.good(), path + ": cannot open checkpoint");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require_data(buf.size() >= 4 + 4 + 4 + 8, path + ": checkpoint too small");
  require_data(buf.compare(0, 4, "V2IR") == 0, path + ": bad checkpoint magic");

  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i)
    stored |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[buf.size() - 8 + i]))
              << (8 * i);
  require_data(fnv1a64(buf.data(), buf.size() - 8) == stored,
               path + ": checkpoint digest mismatch");

  std::size_t off = 4;
  const std::uint32_t version = detail::read_u32(buf, off, path);
  require_data(version == kCheckpointVersion, path + ": unsupported checkpoint version");

  CheckpointData out;
  const std::uint32_t cfg_len = detail::read_u32(buf, off, path);
  require_data(off + cfg_len <= buf.size() - 8, path + ": truncated config echo");
  out.config_text = buf.substr(off, cfg_len);
  off += cfg_len;

  const std::size_t end = buf.size() - 8;
  while (off < end) {
    const std::uint32_t name_len = detail::read_u32(buf, off, path);
    require_data(off + name_len <= end, path + ": truncated parameter name");
    const std::string qualified = buf.substr(off, name_len);
    off += name_len;
    const std::size_t slash = qualified.find('/');
    require_data(slash != std::string::npos && slash > 0 && slash + 1 < qualified.size(),
                 path + ": parameter name missing store prefix: " + qualified);
    const std::string store_name = qualified.substr(0, slash);
    const std::string pname = qualified.substr(slash + 1);

    const std::uint32_t ndim = detail::read_u32(buf, off, path);
    require_data(ndim >= 1 && ndim <= 8, path + ": implausible parameter rank");
    Shape shape(ndim);
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
      shape[i] = static_cast<int>(detail::read_u32(buf, off, path));
      require_data(shape[i] >= 1, path + ": non-positive parameter extent");
      numel *= static_cast<std::size_t>(shape[i]);
    }
    require_data(off + numel * sizeof(float) <= end, path + ": truncated parameter payload");
    Tensor<float> t(shape);
    std::memcpy(t.data.data(), buf.data() + off, numel * sizeof(float));
    off += numel * sizeof(float);

    ParamStore<float>* store = nullptr;
    for (auto& [n, s] : out.stores)
      if (n == store_name) store = &s;
    if (!store) {
      out.stores.emplace_back(store_name, ParamStore<float>{});
      store = &out.stores.back().second;
    }
    store->add(pname, std::move(t));
  }
  require_data(off == end, path + ": trailing bytes in checkpoint");
  return out;
}

// Copies loaded values into a freshly built model, insisting the parameter
// sets agree exactly.
namespace detail {

inline void fill_params(ParamStore<float>& target, const ParamStore<float>& loaded,
                        const std::string& store_name) {
  std::size_t copied = 0;
  for (const auto& [name, tensor] : target) {
    require_data(loaded.contains(name),
                 "checkpoint store " + store_name + " is missing parameter " + name);
    const TensorPtr<float>& src = loaded.get(name);
    require_data(src->shape == tensor->shape,
                 "checkpoint store " + store_name + " has wrong shape for " + name);
    tensor->data = src->data;
    ++copied;
  }
  require_data(copied == loaded.size(),
               "checkpoint store " + store_name + " carries unknown parameters");
}

}  // namespace detail

inline void save_cgan_checkpoint(const Generator<float>& g, const Discriminator<float>& d,
                                 const TrainConfig& cfg, const std::string& path) {
  save_checkpoint({{"G", &g.params}, {"D", &d.params}}, train_config_text(cfg), path);
}

inline void save_cycle_checkpoint(const CycleResult& m, const TrainConfig& cfg,
                                  const std::string& path) {
  save_checkpoint({{"G_AB", &m.g_ab.params},
                   {"G_BA", &m.g_ba.params},
                   {"D_A", &m.d_a.params},
                   {"D_B", &m.d_b.params}},
                  train_config_text(cfg), path);
}

inline TrainConfig checkpoint_config(const CheckpointData& data) {
  ConfigMap m = ConfigMap::parse_text(data.config_text, "<checkpoint config>");
  TrainConfig cfg = parse_train_config(m);
  m.expect_empty();
  return cfg;
}

struct CganCheckpoint {
  TrainConfig cfg;
  Generator<float> g;
  Discriminator<float> d;
};

inline CganCheckpoint restore_cgan(const CheckpointData& data) {
  CganCheckpoint out{checkpoint_config(data), {}, {}};
  require_data(out.cfg.algorithm == Algorithm::cgan, "checkpoint is not a paired-training model");
  Rng init(0, "restore");  // values are immediately overwritten
  out.g = build_generator<float>(cgan_generator_spec(out.cfg), init);
  out.d = build_discriminator<float>(cgan_discriminator_spec(out.cfg), init);
  detail::fill_params(out.g.params, data.store("G"), "G");
  detail::fill_params(out.d.params, data.store("D"), "D");
  return out;
}

struct CycleCheckpoint {
  TrainConfig cfg;
  CycleResult models;
};

inline CycleCheckpoint restore_cyclegan(const CheckpointData& data) {
  CycleCheckpoint out{checkpoint_config(data), {}};
  require_data(out.cfg.algorithm == Algorithm::cyclegan,
               "checkpoint is not an unpaired-training model");
  Rng init(0, "restore");
  out.models.g_ab = build_generator<float>(cycle_generator_spec(out.cfg, true), init);
  out.models.g_ba = build_generator<float>(cycle_generator_spec(out.cfg, false), init);
  out.models.d_a = build_discriminator<float>(cycle_discriminator_spec(out.cfg, true), init);
  out.models.d_b = build_discriminator<float>(cycle_discriminator_spec(out.cfg, false), init);
  detail::fill_params(out.models.g_ab.params, data.store("G_AB"), "G_AB");
  detail::fill_params(out.models.g_ba.params, data.store("G_BA"), "G_BA");
  detail::fill_params(out.models.d_a.params, data.store("D_A"), "D_A");
  detail::fill_params(out.models.d_b.params, data.store("D_B"), "D_B");
  return out;
}

// The forward (visible -> thermal) generator of either algorithm.
inline std::pair<TrainConfig, Generator<float>> restore_forward_generator(
    const CheckpointData& data) {
  const TrainConfig cfg = checkpoint_config(data);
  if (cfg.algorithm == Algorithm::cgan) {
    CganCheckpoint c = restore_cgan(data);
    return {c.cfg, std::move(c.g)};
  }
  CycleCheckpoint c = restore_cyclegan(data);
  return {c.cfg, std::move(c.models.g_ab)};
}

}  // namespace v2ir
