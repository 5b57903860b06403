#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "v2ir/common.hpp"
#include "v2ir/config.hpp"
#include "v2ir/dataset.hpp"
#include "v2ir/evaluate.hpp"
#include "v2ir/trainer.hpp"

namespace v2ir {

// ---------------------------------------------------------------------------
// Sweep specification
// ---------------------------------------------------------------------------

struct SweepMix {
  std::string label;  // e.g. "real10+synth100"
  int n_real = 0;
  int n_synth = 0;
};

inline SweepMix parse_mix_label(const std::string& label) {
  SweepMix mix;
  mix.label = label;
  int consumed = 0;
  if (std::sscanf(label.c_str(), "real%d+synth%d%n", &mix.n_real, &mix.n_synth, &consumed) != 2 ||
      static_cast<std::size_t>(consumed) != label.size() || mix.n_real < 0 || mix.n_synth < 0)
    throw data_error("bad mix label (want realR+synthS): " + label);
  return mix;
}

// Named condition predicates shared by test splits and the training filter.
// The in-condition split matches the training regime (daytime, the first two
// background classes); the cross splits probe transfer to night scenes and,
// for the hardest one, to backgrounds never seen in training.
inline std::function<bool(const Sample&)> split_predicate(const std::string& name) {
  if (name == "in_condition")
    return [](const Sample& s) { return s.time == TimeOfDay::day && s.background_class <= 1; };
  if (name == "cross_time")
    return [](const Sample& s) { return s.time == TimeOfDay::night && s.background_class <= 1; };
  if (name == "cross_time_and_background")
    return [](const Sample& s) { return s.time == TimeOfDay::night && s.background_class >= 2; };
  throw data_error("unknown split predicate: " + name);
}

struct SweepSpec {
  std::vector<SweepMix> mixes;
  std::vector<std::string> splits;
  std::vector<std::uint64_t> seeds;
  int n_test = 4;
  std::string train_filter;  // empty = train on any real sample
  TrainConfig tmpl;
};

inline SweepSpec parse_sweep_spec(ConfigMap& m) {
  SweepSpec spec;
  const std::string mixes = m.take_or("mixes", "");
  require_data(!mixes.empty(), m.origin() + ": sweep spec needs a mixes list");
  for (const std::string& s : split_list(mixes)) spec.mixes.push_back(parse_mix_label(s));
  const std::string splits = m.take_or("splits", "");
  require_data(!splits.empty(), m.origin() + ": sweep spec needs a splits list");
  for (const std::string& s : split_list(splits)) {
    split_predicate(s);  // validates the name
    spec.splits.push_back(s);
  }
  const std::string seeds = m.take_or("seeds", "");
  require_data(!seeds.empty(), m.origin() + ": sweep spec needs a seeds list");
  for (const std::string& s : split_list(seeds)) {
    try {
      spec.seeds.push_back(std::stoull(s));
    } catch (const std::exception&) {
      throw data_error(m.origin() + ": bad seed: " + s);
    }
  }
  spec.n_test = static_cast<int>(m.take_int("n_test", spec.n_test));
  require_data(spec.n_test >= 1, m.origin() + ": n_test must be >= 1");
  spec.train_filter = m.take_or("train_filter", "");
  if (!spec.train_filter.empty()) split_predicate(spec.train_filter);
  spec.tmpl = parse_train_config(m, spec.tmpl);
  return spec;
}

// ---------------------------------------------------------------------------
// Sweep execution
// ---------------------------------------------------------------------------

struct SweepRow {
  std::string mix;
  std::string split;
  std::uint64_t seed = 0;
  double l1_percent = 0.0;
  int epochs = 0;
};

struct SweepFailure {
  std::string mix;
  std::uint64_t seed = 0;
  std::string error;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  std::vector<SweepFailure> failures;
};

namespace detail {

inline std::string cell_name(const std::string& mix, std::uint64_t seed) {
  return mix + "-s" + std::to_string(seed);
}

}  // namespace detail

// Protocol: per split, the first n_test real-pool samples matching its
// predicate become that split's held-out test set; training then draws only
// from real samples that are in no test set and pass the train filter.
// Every (mix, seed) cell trains once and is scored on every split; a failed
// cell is recorded and skipped without aborting the sweep.
inline SweepTable run_sweep(const SweepSpec& spec, const Dataset& real_pool,
                            const Dataset& synth_pool, const std::string& out_dir) {
  namespace fs = std::filesystem;
  require(!spec.mixes.empty() && !spec.splits.empty() && !spec.seeds.empty(),
          "run_sweep: spec needs at least one mix, split, and seed");
  for (const Sample& s : real_pool.samples)
    require_data(s.family == Family::real_analog, "run_sweep: real pool has non-real samples");

  fs::create_directories(fs::path(out_dir) / "cells");
  fs::create_directories(fs::path(out_dir) / "tests");

  // Held-out test sets, persisted so reports can be regenerated later.
  std::vector<Dataset> test_sets;
  std::set<std::size_t> held_out;
  for (const std::string& split : spec.splits) {
    const auto pred = split_predicate(split);
    Dataset test;
    for (std::size_t i = 0; i < real_pool.size() && test.size() < static_cast<std::size_t>(spec.n_test); ++i)
      if (pred(real_pool.samples[i])) {
        test.samples.push_back(real_pool.samples[i]);
        held_out.insert(i);
      }
    require_data(test.size() == static_cast<std::size_t>(spec.n_test),
                 "run_sweep: real pool has too few samples for split " + split);
    save_dataset(test, (fs::path(out_dir) / "tests" / split).string());
    test_sets.push_back(std::move(test));
  }

  Dataset eligible;
  {
    const auto filt = spec.train_filter.empty()
                          ? std::function<bool(const Sample&)>([](const Sample&) { return true; })
                          : split_predicate(spec.train_filter);
    for (std::size_t i = 0; i < real_pool.size(); ++i)
      if (!held_out.count(i) && filt(real_pool.samples[i]))
        eligible.samples.push_back(real_pool.samples[i]);
  }

  SweepTable table;
  for (const SweepMix& mx : spec.mixes) {
    for (const std::uint64_t seed : spec.seeds) {
      const std::string cell = detail::cell_name(mx.label, seed);
      try {
        const Dataset train_set = mix(eligible, synth_pool, {mx.n_real, mx.n_synth, seed});
        TrainConfig cfg = spec.tmpl;
        cfg.seed = seed;
        const fs::path cell_dir = fs::path(out_dir) / "cells" / cell;
        fs::create_directories(cell_dir);

        Generator<float> gen;
        int epochs = 0;
        if (cfg.algorithm == Algorithm::cgan) {
          CganResult r = train_cgan(train_set, cfg);
          epochs = static_cast<int>(r.record.rows.size());
          write_run_record(r.record, (cell_dir / "record.csv").string());
          save_cgan_checkpoint(r.g, r.d, cfg, (cell_dir / "model.ckpt").string());
          gen = std::move(r.g);
        } else {
          CycleResult r = train_cyclegan(train_set, train_set, cfg);
          epochs = static_cast<int>(r.record.rows.size());
          write_run_record(r.record, (cell_dir / "record.csv").string());
          save_cycle_checkpoint(r, cfg, (cell_dir / "model.ckpt").string());
          gen = std::move(r.g_ab);
        }

        for (std::size_t si = 0; si < spec.splits.size(); ++si) {
          const EvalResult ev = evaluate(gen, test_sets[si], Rng(seed, "eval-z"));
          table.rows.push_back({mx.label, spec.splits[si], seed, ev.mean_l1_percent, epochs});
        }
      } catch (const std::exception& e) {
        table.failures.push_back({mx.label, seed, e.what()});
      }
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline std::string format_sweep_csv(const SweepTable& table) {
  std::string out = "mix,split,seed,l1_percent,epochs\n";
  char line[256];
  for (const SweepRow& r : table.rows) {
    std::snprintf(line, sizeof line, "%s,%s,%llu,%.6f,%d\n", r.mix.c_str(), r.split.c_str(),
                  static_cast<unsigned long long>(r.seed), r.l1_percent, r.epochs);
    out += line;
  }
  return out;
}

// Per-(mix, split) medians in first-appearance order.
inline std::string format_summary_csv(const SweepTable& table) {
  std::string out = "mix,split,median_l1_percent,n\n";
  std::vector<std::pair<std::string, std::string>> keys;
  for (const SweepRow& r : table.rows) {
    const std::pair<std::string, std::string> key{r.mix, r.split};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  char line[256];
  for (const auto& [mix_label, split] : keys) {
    std::vector<double> vals;
    for (const SweepRow& r : table.rows)
      if (r.mix == mix_label && r.split == split) vals.push_back(r.l1_percent);
    std::sort(vals.begin(), vals.end());
    const std::size_t n = vals.size();
    const double median = n % 2 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
    std::snprintf(line, sizeof line, "%s,%s,%.6f,%zu\n", mix_label.c_str(), split.c_str(), median,
                  n);
    out += line;
  }
  return out;
}

inline SweepTable parse_sweep_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require_data(in.good(), path + ": cannot open table");
  std::string line;
  require_data(static_cast<bool>(std::getline(in, line)), path + ": empty table");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require_data(line == "mix,split,seed,l1_percent,epochs", path + ": unexpected table header");
  SweepTable table;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    SweepRow row;
    char mix[128], split[128];
    unsigned long long seed = 0;
    if (std::sscanf(line.c_str(), "%127[^,],%127[^,],%llu,%lf,%d", mix, split, &seed,
                    &row.l1_percent, &row.epochs) != 5)
      throw data_error(path + ": malformed table row: " + line);
    row.mix = mix;
    row.split = split;
    row.seed = seed;
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace detail {

inline void write_text(const std::string& text, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require_data(out.good(), path + ": cannot open for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  require_data(out.good(), path + ": write failed");
}

inline Image to_rgb(const Image& img) {
  if (img.channels == 3) return img;
  Image out(img.width, img.height, 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, y, 0);
  return out;
}

}  // namespace detail

// Side-by-side panel: input | generated | ground truth with 2-pixel white
// separators, so the grid is 3*W + 4 pixels wide.
inline Image make_grid(const Image& input, const Image& generated, const Image& ground_truth) {
  require(input.width == generated.width && input.width == ground_truth.width &&
              input.height == generated.height && input.height == ground_truth.height,
          "make_grid: panels must share extents");
  const Image panels[3] = {detail::to_rgb(input), detail::to_rgb(generated),
                           detail::to_rgb(ground_truth)};
  const int W = input.width, H = input.height, sep = 2;
  Image grid(3 * W + 2 * sep, H, 3, 255);
  for (int p = 0; p < 3; ++p) {
    const int x0 = p * (W + sep);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        for (int c = 0; c < 3; ++c) grid.at(x0 + x, y, c) = panels[p].at(x, y, c);
  }
  return grid;
}

// Writes sweep.csv, summary.csv, and (when the sweep's cells/tests live in
// `source_dir`) per-(mix, split) grid images from the first seed's model.
inline void emit_report(const SweepTable& table, const std::string& out_dir,
                        int grid_samples = 2, const std::string& source_dir = "") {
  namespace fs = std::filesystem;
  require(!table.rows.empty() || !table.failures.empty(), "emit_report: table is empty");
  fs::create_directories(out_dir);
  detail::write_text(format_sweep_csv(table), (fs::path(out_dir) / "sweep.csv").string());
  detail::write_text(format_summary_csv(table), (fs::path(out_dir) / "summary.csv").string());
  if (!table.failures.empty()) {
    std::string log;
    for (const SweepFailure& f : table.failures)
      log += detail::cell_name(f.mix, f.seed) + ": " + f.error + "\n";
    detail::write_text(log, (fs::path(out_dir) / "failures.log").string());
  }
  if (grid_samples <= 0) return;

  const fs::path src = source_dir.empty() ? fs::path(out_dir) : fs::path(source_dir);
  fs::create_directories(fs::path(out_dir) / "grids");
  std::set<std::pair<std::string, std::string>> done;
  for (const SweepRow& r : table.rows) {
    if (!done.insert({r.mix, r.split}).second) continue;
    const fs::path ckpt = src / "cells" / detail::cell_name(r.mix, r.seed) / "model.ckpt";
    const fs::path test_dir = src / "tests" / r.split;
    if (!fs::exists(ckpt) || !fs::exists(test_dir / "manifest.tsv")) continue;
    auto [cfg, gen] = restore_forward_generator(load_checkpoint(ckpt.string()));
    const Dataset test = load_dataset(test_dir.string());
    const int count = std::min<int>(grid_samples, static_cast<int>(test.size()));
    for (int k = 0; k < count; ++k) {
      const Sample& s = test.samples[static_cast<std::size_t>(k)];
      const Image got = transform_sample(gen, s.visible, Rng(r.seed, "eval-z"),
                                         static_cast<std::uint64_t>(k));
      char name[160];
      std::snprintf(name, sizeof name, "%s_%s_%d.ppm", r.mix.c_str(), r.split.c_str(), k);
      write_image(make_grid(s.visible, got, s.ir), (fs::path(out_dir) / "grids" / name).string());
    }
  }
}

}  // namespace v2ir
