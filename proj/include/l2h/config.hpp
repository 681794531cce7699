#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "l2h/evaluate.hpp"

namespace l2h {

// One flat key-value configuration feeds every CLI verb. Unknown keys are
// rejected; every key has a documented default (see key_docs()).
struct CliConfig {
  std::uint64_t seed = 0;

  int synth_canvas_h = 384, synth_canvas_w = 384;
  int synth_train_images = 64, synth_test_images = 32;
  int synth_train_heads_min = 5, synth_train_heads_max = 15;
  int synth_test_heads_min = 40, synth_test_heads_max = 80;
  double synth_radius_min = 4.0, synth_radius_max = 9.0;
  double synth_train_separation = 2.2, synth_test_separation = 0.55;
  std::string synth_background = "noise";

  double gt_sigma = 4.0;

  double sim_lambda = 0.5;
  int sim_shift = 32;  // fixed shift for the simulate verb
  int sim_s_min = 8, sim_s_max = 0;

  int model_stage1 = 32, model_stage2 = 64, model_stage3 = 128;
  int model_c2 = 64;
  int ddmem_l = 64;
  std::string ddmem_fusion = "concat";
  std::string ddmem_ldcm = "frozen";
  std::string ddmem_banks = "both";
  std::string hfem_scale = "s3";
  std::string hfem_pool = "max";
  std::string hfem_mask = "density";
  std::string hfem_overlay = "blend";

  double theta_den = 1.0, theta_enh = 1.0, theta_cls = 10.0, theta_con = 10.0;
  int cls_patch = 16;

  double opt_max_lr = 1e-4;
  double opt_weight_decay = 1e-4;
  int opt_epochs = 30;
  int opt_pretrain_epochs = 20;
  int opt_batch = 4;
  double opt_pct_start = 0.3, opt_div_factor = 25.0, opt_final_div = 1e4;

  int aug_crop_h = 320, aug_crop_w = 320;
  double aug_hflip_prob = 0.5;
  double aug_jitter_prob = 0.8;
  double aug_brightness = 0.2, aug_contrast = 0.2, aug_saturation = 0.2;
  double aug_blur_prob = 0.3, aug_blur_sigma_min = 0.3, aug_blur_sigma_max = 1.2;
  double aug_sharpen_prob = 0.3, aug_sharpen_min = 0.5, aug_sharpen_max = 1.5;

  std::string train_variant = "full";
  bool eval_dump_maps = false;

  void validate() const;

  // Derived module configurations.
  SynthDatasetConfig synth_dataset() const;
  ModelConfig model_config() const;       // honors train_variant
  TrainSettings train_settings() const;
  SimConfig sim_config() const;           // fixed-shift simulate verb
};

// Parses "key = value" lines ('#' comments allowed); unknown keys and
// malformed values raise ConfigError.
CliConfig parse_config_text(const std::string& text);
CliConfig load_config_file(const std::string& path);

// Applies one "key=value" override (CLI flags take precedence over the file).
void apply_override(CliConfig& cfg, const std::string& assignment);

// Serializes every key in registry order; parse(serialize(c)) == c.
std::string serialize_config(const CliConfig& cfg);

// One "key = default  # doc" line per key.
std::string key_docs();

}  // namespace l2h
