// Command-line front end: dataset synthesis, simulation preview, training,
// evaluation and single-image inference, all driven by one key-value config.
// Exit codes: 0 success, 2 config error, 3 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "l2h/checkpoint.hpp"
#include "l2h/config.hpp"

namespace fs = std::filesystem;
using namespace l2h;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  bool has_seed = false;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "config file (key = value lines)");
  sub->add_option("--out", args.out_dir, "output directory");
  sub->add_option("--set", args.overrides, "override a config key, e.g. --set opt.epochs=5");
  sub->add_option_function<std::uint64_t>(
      "--seed",
      [&args](const std::uint64_t& v) {
        args.seed = v;
        args.has_seed = true;
      },
      "override the root seed");
}

// Precedence: built-in defaults < config file < --set overrides < --seed.
CliConfig resolve_config(const CommonArgs& args) {
  CliConfig cfg = args.config_path.empty() ? CliConfig{} : load_config_file(args.config_path);
  for (const auto& ov : args.overrides) apply_override(cfg, ov);
  if (args.has_seed) cfg.seed = args.seed;
  cfg.validate();
  return cfg;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io_error, "cannot create directory: " + dir);
}

std::string variant_name_of(const ModelConfig& cfg) {
  if (cfg.kind == ModelKind::single_plain) return "baseline";
  if (cfg.kind == ModelKind::single_memory) return "single_memory";
  switch (cfg.banks) {
    case BankSelect::ldcm: return "ldcm_only";
    case BankSelect::hdcm: return "hdcm_only";
    case BankSelect::none: return "no_ddmem";
    case BankSelect::both: break;
  }
  if (cfg.fusion == FusionKind::add) return "fusion_add";
  if (cfg.fusion == FusionKind::adaptive) return "fusion_adaptive";
  return "full";
}

int cmd_synth(const CommonArgs& args) {
  const CliConfig cfg = resolve_config(args);
  ensure_dir(args.out_dir);
  write_synthetic_dataset(args.out_dir, cfg.synth_dataset());
  std::cout << "dataset written: " << args.out_dir << "\n";
  return 0;
}

int cmd_simulate(const CommonArgs& args, const std::string& image_path,
                 const std::string& ann_path) {
  const CliConfig cfg = resolve_config(args);
  ensure_dir(args.out_dir);

  const auto records = load_annotations(ann_path);
  const DatasetRecord* rec = nullptr;
  for (const auto& r : records)
    if (fs::path(r.image_path).filename() == fs::path(image_path).filename()) rec = &r;
  if (!rec && records.size() == 1) rec = &records.front();
  if (!rec) fail(ErrorCode::schema_error, "no annotation entry matches " + image_path);

  const Raster image = read_png(image_path);
  const SimConfig sim = cfg.sim_config();
  const Raster sim_image = simulate_high_density(image, sim);
  const Raster gt_ori = points_to_density(rec->annotation, image.height, image.width, cfg.gt_sigma);
  const Raster gt_sim = generate_gt(gt_ori, sim.shift_s);
  const PointAnnotation shifted = shift_overlay_points(rec->annotation, sim.shift_s);

  const std::string sim_png = args.out_dir + "/sim.png";
  write_png(sim_png, sim_image);
  write_density_file(args.out_dir + "/gt_sim.l2hd", gt_sim);
  DatasetRecord out_rec;
  out_rec.image_path = sim_png;
  out_rec.height = sim_image.height;
  out_rec.width = sim_image.width;
  out_rec.annotation = shifted;
  write_annotations(args.out_dir + "/points_sim.json", {out_rec});

  char line[128];
  std::snprintf(line, sizeof(line), "count_before=%.6f count_after=%.6f shift=%d\n",
                density_count(gt_ori), density_count(gt_sim), sim.shift_s);
  std::cout << line;
  return 0;
}

int cmd_train(const CommonArgs& args, const std::string& data_dir) {
  const CliConfig cfg = resolve_config(args);
  ensure_dir(args.out_dir);

  const auto records = load_annotations(data_dir + "/train/annotations.json", Split::train);
  const TrainDataset data = load_dataset(records);
  const ModelConfig model_cfg = cfg.model_config();
  const TrainSettings st = cfg.train_settings();

  CountingModel<float> pretrained;
  const CountingModel<float>* low_ptr = nullptr;
  if (model_cfg.kind == ModelKind::dual) {
    std::ofstream prelog(args.out_dir + "/pretrain_log.jsonl");
    pretrained = pretrain_low_branch(data, model_cfg, st, &prelog);
    save_checkpoint(args.out_dir + "/low_branch.ckpt", pretrained, cfg.seed);
    low_ptr = &pretrained;
  }

  std::ofstream log(args.out_dir + "/train_log.jsonl");
  CountingModel<float> model = train_model(data, model_cfg, st, low_ptr, &log);
  const std::string ckpt = args.out_dir + "/model.ckpt";
  save_checkpoint(ckpt, model, cfg.seed);
  std::cout << "checkpoint written: " << ckpt << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& ckpt_path, const std::string& data_dir) {
  const CliConfig cfg = resolve_config(args);
  ensure_dir(args.out_dir);

  const CountingModel<float> model = load_checkpoint(ckpt_path);
  const auto records = load_annotations(data_dir + "/test/annotations.json", Split::test);
  const EvalResult result = evaluate_records(model, records);

  ExperimentReport report;
  report.seeds = {cfg.seed};
  VariantResult vr;
  vr.mae = result.mae;
  vr.mse = result.mse;
  vr.n = result.n;
  vr.per_seed.push_back({cfg.seed, {result.mae, result.mse}});
  report.rows.emplace_back(variant_name_of(model.cfg), vr);
  write_report(report, args.out_dir + "/eval_report.json", args.out_dir + "/eval_report.txt");

  if (cfg.eval_dump_maps) {
    ensure_dir(args.out_dir + "/maps");
    for (std::size_t i = 0; i < records.size(); ++i) {
      const Raster img = read_png(records[i].image_path);
      const auto [density, count] = infer(img, model);
      char name[64];
      std::snprintf(name, sizeof(name), "%s/maps/%04zu", args.out_dir.c_str(), i);
      write_density_file(std::string(name) + ".l2hd", density);
      write_png(std::string(name) + ".png", density_heat_render(density));
    }
  }

  char line[128];
  std::snprintf(line, sizeof(line), "mae=%.17g mse=%.17g n=%d\n", result.mae, result.mse,
                result.n);
  std::cout << line;
  return 0;
}

int cmd_infer(const CommonArgs& args, const std::string& ckpt_path, const std::string& image_path) {
  resolve_config(args);
  ensure_dir(args.out_dir);
  const CountingModel<float> model = load_checkpoint(ckpt_path);
  const Raster img = read_png(image_path);
  const auto [density, count] = infer(img, model);
  write_density_file(args.out_dir + "/density.l2hd", density);
  write_png(args.out_dir + "/density.png", density_heat_render(density));
  char line[64];
  std::snprintf(line, sizeof(line), "count=%.6f\n", count);
  std::cout << line;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"low-to-high crowd-density counting toolkit"};
  app.require_subcommand(1);

  CommonArgs synth_args, sim_args, train_args, eval_args, infer_args;
  std::string image_path, ann_path, data_dir, ckpt_path;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth, synth_args);

  CLI::App* simulate = app.add_subcommand("simulate", "shift-overlay one annotated image");
  add_common(simulate, sim_args);
  simulate->add_option("--image", image_path, "input PNG")->required();
  simulate->add_option("--ann", ann_path, "annotation JSON")->required();

  CLI::App* train = app.add_subcommand("train", "train a model on a synth dataset");
  add_common(train, train_args);
  train->add_option("--data", data_dir, "dataset directory (from synth)")->required();

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(eval, eval_args);
  eval->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();

  CLI::App* infer_cmd = app.add_subcommand("infer", "count one image with a checkpoint");
  add_common(infer_cmd, infer_args);
  infer_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  infer_cmd->add_option("--image", image_path, "input PNG")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_args);
    if (simulate->parsed()) return cmd_simulate(sim_args, image_path, ann_path);
    if (train->parsed()) return cmd_train(train_args, data_dir);
    if (eval->parsed()) return cmd_eval(eval_args, ckpt_path, data_dir);
    if (infer_cmd->parsed()) return cmd_infer(infer_args, ckpt_path, image_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::config_error ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
