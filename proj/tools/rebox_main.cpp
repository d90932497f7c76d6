// Command-line front end: data generation, training, gradient checking,
// detection, grid evaluation, and variant comparison.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rebox/config.hpp"
#include "rebox/gradcheck.hpp"
#include "rebox/pipeline.hpp"

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
};

rebox::RunConfig resolve_config(const GlobalArgs& g) {
  rebox::RunConfig cfg =
      g.config_path.empty() ? rebox::RunConfig{} : rebox::load_config(g.config_path);
  if (g.seed_set) {
    cfg.seed = g.seed_override;
    cfg.network.seed = g.seed_override;
    cfg.train.seed = g.seed_override;
  }
  if (!g.out_override.empty()) cfg.out_dir = g.out_override;
  std::filesystem::create_directories(cfg.out_dir);
  rebox::write_text_file(cfg.out_dir + "/config_resolved.txt", rebox::to_text(cfg));
  return cfg;
}

std::string in_out(const rebox::RunConfig& cfg, const std::string& name) {
  return cfg.out_dir + "/" + name;
}

int cmd_gen_data(const rebox::RunConfig& cfg) {
  const auto res = rebox::generate_data(cfg, in_out(cfg, "train_scenes.bin"),
                                        in_out(cfg, "test_scenes.bin"),
                                        in_out(cfg, "train_set.bin"), stderr);
  std::printf("wrote %d train scenes, %d test scenes, %llu samples to %s\n", res.train_scenes,
              res.test_scenes, (unsigned long long)res.samples, cfg.out_dir.c_str());
  return 0;
}

int cmd_train(const rebox::RunConfig& cfg, const std::string& dataset) {
  const std::string data = dataset.empty() ? in_out(cfg, "train_set.bin") : dataset;
  const auto art = rebox::run_training(cfg, data, in_out(cfg, "model.ckpt"),
                                       in_out(cfg, "loss.csv"), in_out(cfg, "val_loss.csv"),
                                       stderr);
  std::printf("trained on %d samples (%d held out), final F %.6g%s\n", art.train_count,
              art.val_count, art.result.final_loss,
              art.val_count
                  ? (", val F " + std::to_string(art.result.val_loss.back())).c_str()
                  : "");
  return 0;
}

int cmd_gradcheck(const rebox::RunConfig& cfg, int batch, double step, int cap) {
  // The audit runs in double so finite-difference noise stays far below any
  // defect worth reporting.
  rebox::NetworkT<double> net(cfg.network);
  const auto& s = cfg.network;
  rebox::RegressionBatchT<double> b;
  b.inputs = rebox::TensorT<double>({batch, s.input_side, s.input_side, s.input_channels});
  b.targets = rebox::TensorT<double>({batch, 4});
  rebox::Rng rng = rebox::derive_stream(cfg.seed, "cli.gradcheck");
  for (std::size_t i = 0; i < b.inputs.numel(); ++i) b.inputs[i] = rng.uniform();
  for (std::size_t i = 0; i < b.targets.numel(); ++i) b.targets[i] = rng.uniform(-0.5, 0.5);
  for (int i = 0; i < batch; ++i)
    b.sizes.push_back({rng.uniform(4.0, 64.0), rng.uniform(4.0, 64.0)});

  const rebox::Rng dropout_rng = rebox::derive_stream(cfg.seed, "cli.gradcheck.dropout");
  const auto report = rebox::gradient_check(net, b, true, dropout_rng, step,
                                            std::size_t(cap), cfg.seed);
  std::printf("checked %zu elements, max rel %.3e (tensor %s[%zu], analytic %.6e, fd %.6e), "
              "mean rel %.3e\n",
              report.checked, report.max_rel, report.worst_tensor.c_str(), report.worst_elem,
              report.worst_analytic, report.worst_fd, report.mean_rel);
  if (report.max_rel > cfg.gradcheck_tolerance) {
    std::fprintf(stderr, "gradient check failed tolerance %.3e\n", cfg.gradcheck_tolerance);
    return 5;
  }
  return 0;
}

int cmd_detect(const rebox::RunConfig& cfg, const std::string& checkpoint,
               const std::string& scenes, double s, int n) {
  rebox::Network net = rebox::Network::load(
      checkpoint.empty() ? in_out(cfg, "model.ckpt") : checkpoint);
  rebox::NetworkRegressor regress(net);
  rebox::DetectOptions opt;
  opt.side = net.spec().input_side;
  opt.pop_vs_original = cfg.pop_vs_original;

  rebox::SceneReader reader(scenes.empty() ? in_out(cfg, "test_scenes.bin") : scenes);
  std::string csv = rebox::detections_csv_header();
  rebox::Scene scene;
  int scene_id = 0;
  while (reader.next(scene)) {
    const auto proposals = rebox::propose_regions(scene, cfg.proposals);
    const auto dets = rebox::detect_scene(regress, scene.image, proposals, s, n, opt);
    rebox::append_detections_csv(csv, scene_id, dets);
    ++scene_id;
  }
  rebox::write_text_file(in_out(cfg, "detections.csv"), csv);
  std::printf("detections for %d scenes written to %s\n", scene_id,
              in_out(cfg, "detections.csv").c_str());
  return 0;
}

int cmd_grid(const rebox::RunConfig& cfg, const std::string& checkpoint,
             const std::string& scenes) {
  rebox::Network net = rebox::Network::load(
      checkpoint.empty() ? in_out(cfg, "model.ckpt") : checkpoint);
  const auto cells = rebox::run_grid(
      cfg, net, scenes.empty() ? in_out(cfg, "test_scenes.bin") : scenes, cfg.out_dir, stderr);
  for (const auto& c : cells)
    std::printf("s=%g n=%d ap=%.4f matched_iou=%.4f (%ld det, %ld gt)\n", c.s, c.n,
                c.ap_envelope, c.mean_matched_iou, c.detections, c.gt_count);
  return 0;
}

int cmd_compare(const rebox::RunConfig& cfg, const std::string& dataset) {
  const std::string data = dataset.empty() ? in_out(cfg, "train_set.bin") : dataset;
  const auto rows =
      rebox::run_compare(cfg, data, in_out(cfg, "compare_val_loss.csv"), stderr);
  for (const auto& v : cfg.compare_variants)
    std::printf("%s median final val F %.6g\n", v.c_str(),
                rebox::median_final_val(rows, v));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bounding-box refinement toolkit"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "configuration file (key = value sections)");
  app.add_option("--out", g.out_override, "output directory (overrides run.out_dir)");
  auto* seed_opt = app.add_option("--seed", g.seed_override, "override every seed in the run");

  auto* gen = app.add_subcommand("gen-data", "synthesize scenes and a training set");

  std::string dataset, checkpoint, scenes;
  auto* tr = app.add_subcommand("train", "train a regressor on a generated dataset");
  tr->add_option("--dataset", dataset, "dataset file (default <out>/train_set.bin)");

  int gc_batch = 2, gc_cap = 256;
  double gc_step = 1e-3;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference audit of the gradients");
  gc->add_option("--batch", gc_batch, "batch size for the probe");
  gc->add_option("--step", gc_step, "finite-difference step");
  gc->add_option("--cap", gc_cap, "max elements checked per tensor (0 = all)");

  double det_s = 0.2;
  int det_n = 3;
  auto* det = app.add_subcommand("detect", "refine proposals over a scene file");
  det->add_option("--checkpoint", checkpoint, "trained model (default <out>/model.ckpt)");
  det->add_option("--scenes", scenes, "scene file (default <out>/test_scenes.bin)");
  det->add_option("--s", det_s, "box expansion before each pass");
  det->add_option("--n", det_n, "refinement iterations");

  auto* gr = app.add_subcommand("grid", "sweep the (s, n) grid and write PR/AP tables");
  gr->add_option("--checkpoint", checkpoint, "trained model (default <out>/model.ckpt)");
  gr->add_option("--scenes", scenes, "scene file (default <out>/test_scenes.bin)");

  auto* cm = app.add_subcommand("compare", "train every variant across seeds");
  cm->add_option("--dataset", dataset, "dataset file (default <out>/train_set.bin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    const rebox::RunConfig cfg = resolve_config(g);
    if (gen->parsed()) return cmd_gen_data(cfg);
    if (tr->parsed()) return cmd_train(cfg, dataset);
    if (gc->parsed()) return cmd_gradcheck(cfg, gc_batch, gc_step, gc_cap);
    if (det->parsed()) return cmd_detect(cfg, checkpoint, scenes, det_s, det_n);
    if (gr->parsed()) return cmd_grid(cfg, checkpoint, scenes);
    if (cm->parsed()) return cmd_compare(cfg, dataset);
  } catch (const rebox::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const rebox::FormatError& e) {
    std::fprintf(stderr, "file format error: %s\n", e.what());
    return 3;
  } catch (const rebox::DivergedError& e) {
    std::fprintf(stderr, "training diverged: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
