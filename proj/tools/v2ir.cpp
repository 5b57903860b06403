// v2ir: desk-scale visible-to-thermal image translation toolkit.
//
// Subcommands: gen-data (procedural paired datasets), train (paired or
// unpaired adversarial training), transform (run one image through a trained
// generator), eval (generator L1 on a paired set), sweep (data-mix x split x
// seed experiment grids), report (render CSV summaries and image grids).

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "v2ir/common.hpp"
#include "v2ir/config.hpp"
#include "v2ir/dataset.hpp"
#include "v2ir/evaluate.hpp"
#include "v2ir/image_io.hpp"
#include "v2ir/sweep.hpp"
#include "v2ir/synthcam.hpp"
#include "v2ir/trainer.hpp"

namespace {

namespace fs = std::filesystem;

std::vector<v2ir::TimeOfDay> parse_times(const std::string& s) {
  if (s == "day") return {v2ir::TimeOfDay::day};
  if (s == "night") return {v2ir::TimeOfDay::night};
  if (s == "mixed") return {v2ir::TimeOfDay::day, v2ir::TimeOfDay::night};
  throw v2ir::usage_error("--time must be day, night, or mixed");
}

std::vector<v2ir::Viewpoint> parse_viewpoints(const std::string& s) {
  if (s == "overhead") return {v2ir::Viewpoint::overhead};
  if (s == "angled") return {v2ir::Viewpoint::angled};
  if (s == "close") return {v2ir::Viewpoint::close};
  if (s == "far") return {v2ir::Viewpoint::far};
  if (s == "mixed")
    return {v2ir::Viewpoint::overhead, v2ir::Viewpoint::angled, v2ir::Viewpoint::close,
            v2ir::Viewpoint::far};
  throw v2ir::usage_error("--viewpoint must be overhead, angled, close, far, or mixed");
}

int run_gen_data(const std::string& family, int n, const std::string& out, std::uint64_t seed,
                 const std::string& time, const std::string& viewpoint, int blur_radius,
                 int max_delta) {
  const auto mix = v2ir::scene::uniform_condition_mix(parse_times(time),
                                                      parse_viewpoints(viewpoint));
  const v2ir::Dataset ds =
      v2ir::scene::generate_dataset(n, mix, v2ir::parse_family(family),
                                    v2ir::Rng(seed, "gen-data"), v2ir::scene::RenderConfig{},
                                    blur_radius, max_delta);
  v2ir::save_dataset(ds, out);
  std::printf("wrote %zu %s samples to %s\n", ds.size(), family.c_str(), out.c_str());
  return 0;
}

int run_train(const std::string& algo, const std::string& data, const std::string& data_b,
              const std::string& config, const std::string& out, std::uint64_t seed) {
  v2ir::ConfigMap m = v2ir::ConfigMap::parse_file(config);
  v2ir::TrainConfig cfg = v2ir::parse_train_config(m);
  m.expect_empty();
  cfg.algorithm = v2ir::parse_algorithm(algo);
  cfg.seed = seed;
  fs::create_directories(out);

  int epochs = 0;
  double final_g = 0.0;
  if (cfg.algorithm == v2ir::Algorithm::cgan) {
    const v2ir::Dataset ds = v2ir::load_dataset(data);
    v2ir::CganResult r = v2ir::train_cgan(ds, cfg);
    epochs = static_cast<int>(r.record.rows.size());
    final_g = v2ir::g_total(r.record.rows.back().losses);
    v2ir::write_run_record(r.record, (fs::path(out) / "record.csv").string());
    v2ir::save_cgan_checkpoint(r.g, r.d, cfg, (fs::path(out) / "model.ckpt").string());
  } else {
    const v2ir::Dataset a = v2ir::load_dataset(data);
    const v2ir::Dataset b = data_b.empty() ? a : v2ir::load_dataset(data_b);
    v2ir::CycleResult r = v2ir::train_cyclegan(a, b, cfg);
    epochs = static_cast<int>(r.record.rows.size());
    final_g = v2ir::g_total(r.record.rows.back().losses);
    v2ir::write_run_record(r.record, (fs::path(out) / "record.csv").string());
    v2ir::save_cycle_checkpoint(r, cfg, (fs::path(out) / "model.ckpt").string());
  }
  std::printf("trained %d epochs (final generator objective %.6f); outputs in %s\n", epochs,
              final_g, out.c_str());
  return 0;
}

int run_transform(const std::string& checkpoint, const std::string& in, const std::string& out,
                  std::uint64_t z_seed) {
  auto [cfg, gen] = v2ir::restore_forward_generator(v2ir::load_checkpoint(checkpoint));
  const v2ir::Image img = v2ir::read_image(in);
  const v2ir::Image result =
      v2ir::transform_sample(gen, img, v2ir::Rng(z_seed, "transform-z"));
  v2ir::write_image(result, out);
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& data, const std::string& out) {
  auto [cfg, gen] = v2ir::restore_forward_generator(v2ir::load_checkpoint(checkpoint));
  const v2ir::Dataset ds = v2ir::load_dataset(data);
  const v2ir::EvalResult ev = v2ir::evaluate(gen, ds, v2ir::Rng(cfg.seed, "eval-z"));
  std::string csv = "sample,l1_percent\n";
  char line[64];
  for (std::size_t i = 0; i < ev.per_sample.size(); ++i) {
    std::snprintf(line, sizeof line, "%zu,%.6f\n", i, ev.per_sample[i]);
    csv += line;
  }
  std::snprintf(line, sizeof line, "mean,%.6f\n", ev.mean_l1_percent);
  csv += line;
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f.good()) throw v2ir::data_error(out + ": cannot open for writing");
  f << csv;
  if (!f.good()) throw v2ir::data_error(out + ": write failed");
  std::printf("mean L1 %.6f%% over %zu samples; wrote %s\n", ev.mean_l1_percent,
              ev.per_sample.size(), out.c_str());
  return 0;
}

int run_sweep_cmd(const std::string& spec_path, const std::string& real_dir,
                  const std::string& synth_dir, const std::string& out) {
  v2ir::ConfigMap m = v2ir::ConfigMap::parse_file(spec_path);
  const v2ir::SweepSpec spec = v2ir::parse_sweep_spec(m);
  m.expect_empty();
  const v2ir::Dataset real = v2ir::load_dataset(real_dir);
  const v2ir::Dataset synth = v2ir::load_dataset(synth_dir);
  const v2ir::SweepTable table = v2ir::run_sweep(spec, real, synth, out);
  v2ir::emit_report(table, out, 2, out);
  for (const v2ir::SweepFailure& f : table.failures)
    std::fprintf(stderr, "cell %s-s%llu failed: %s\n", f.mix.c_str(),
                 static_cast<unsigned long long>(f.seed), f.error.c_str());
  std::printf("sweep complete: %zu rows, %zu failed cells; report in %s\n", table.rows.size(),
              table.failures.size(), out.c_str());
  return 0;
}

int run_report(const std::string& table_path, const std::string& out, int grid_samples) {
  const v2ir::SweepTable table = v2ir::parse_sweep_csv(table_path);
  const std::string source = fs::path(table_path).parent_path().string();
  v2ir::emit_report(table, out, grid_samples, source.empty() ? "." : source);
  std::printf("report in %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale visible-to-thermal image translation toolkit"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate a procedural paired dataset");
  std::string g_family, g_out, g_time = "mixed", g_viewpoint = "mixed";
  int g_n = 0, g_blur_radius = 5, g_max_delta = 50;
  std::uint64_t g_seed = 0;
  gen->add_option("--family", g_family, "sample family")
      ->required()
      ->check(CLI::IsMember({"synthetic", "real_analog"}));
  gen->add_option("--n", g_n, "number of samples")->required()->check(CLI::PositiveNumber);
  gen->add_option("--out", g_out, "output dataset directory")->required();
  gen->add_option("--seed", g_seed, "generation seed")->required();
  gen->add_option("--time", g_time, "day, night, or mixed");
  gen->add_option("--viewpoint", g_viewpoint, "overhead, angled, close, far, or mixed");
  gen->add_option("--blur-radius", g_blur_radius, "selective blur radius (synthetic family)");
  gen->add_option("--max-delta", g_max_delta, "selective blur inclusion threshold");

  auto* train = app.add_subcommand("train", "train a translation model");
  std::string t_algo, t_data, t_data_b, t_config, t_out;
  std::uint64_t t_seed = 0;
  train->add_option("--algo", t_algo, "training algorithm")
      ->required()
      ->check(CLI::IsMember({"cgan", "cyclegan"}));
  train->add_option("--data", t_data, "dataset directory (domain A when unpaired)")->required();
  train->add_option("--data-b", t_data_b, "domain B dataset directory (unpaired only)");
  train->add_option("--config", t_config, "training config file")->required();
  train->add_option("--out", t_out, "output directory")->required();
  train->add_option("--seed", t_seed, "training seed")->required();

  auto* transform = app.add_subcommand("transform", "translate one visible image");
  std::string x_ckpt, x_in, x_out;
  std::uint64_t x_z_seed = 0;
  transform->add_option("--checkpoint", x_ckpt, "model checkpoint")->required();
  transform->add_option("--in", x_in, "input image (P6)")->required();
  transform->add_option("--out", x_out, "output image path")->required();
  transform->add_option("--z-seed", x_z_seed, "latent noise seed");

  auto* eval = app.add_subcommand("eval", "evaluate a model on a paired dataset");
  std::string e_ckpt, e_data, e_out;
  eval->add_option("--checkpoint", e_ckpt, "model checkpoint")->required();
  eval->add_option("--data", e_data, "paired dataset directory")->required();
  eval->add_option("--out", e_out, "per-sample CSV output path")->required();

  auto* sweep = app.add_subcommand("sweep", "run a data-mix experiment sweep");
  std::string s_spec, s_real, s_synth, s_out;
  sweep->add_option("--spec", s_spec, "sweep spec file")->required();
  sweep->add_option("--real", s_real, "real-analog pool directory")->required();
  sweep->add_option("--synth", s_synth, "synthetic pool directory")->required();
  sweep->add_option("--out", s_out, "output directory")->required();

  auto* report = app.add_subcommand("report", "render reports from a sweep table");
  std::string r_table, r_out;
  int r_grid_samples = 2;
  report->add_option("--table", r_table, "sweep.csv path")->required();
  report->add_option("--out", r_out, "output directory")->required();
  report->add_option("--grid-samples", r_grid_samples, "samples per image grid");

  try {
    app.parse(argc, argv);
    if (*gen)
      return run_gen_data(g_family, g_n, g_out, g_seed, g_time, g_viewpoint, g_blur_radius,
                          g_max_delta);
    if (*train) return run_train(t_algo, t_data, t_data_b, t_config, t_out, t_seed);
    if (*transform) return run_transform(x_ckpt, x_in, x_out, x_z_seed);
    if (*eval) return run_eval(e_ckpt, e_data, e_out);
    if (*sweep) return run_sweep_cmd(s_spec, s_real, s_synth, s_out);
    if (*report) return run_report(r_table, r_out, r_grid_samples);
    return 1;
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help and friends
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage error regardless of CLI11's own code
  } catch (const v2ir::usage_error& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const v2ir::numeric_error& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
