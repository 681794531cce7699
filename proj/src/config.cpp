#include "l2h/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <variant>

namespace l2h {

namespace {

using FieldPtr = std::variant<int CliConfig::*, double CliConfig::*, bool CliConfig::*,
                              std::uint64_t CliConfig::*, std::string CliConfig::*>;

struct KeyEntry {
  const char* name;
  FieldPtr field;
  const char* doc;
};

const std::vector<KeyEntry>& registry() {
  static const std::vector<KeyEntry> keys = {
      {"seed", &CliConfig::seed, "root seed; all randomness derives from it"},
      {"synth.canvas_h", &CliConfig::synth_canvas_h, "synthetic scene height (px)"},
      {"synth.canvas_w", &CliConfig::synth_canvas_w, "synthetic scene width (px)"},
      {"synth.train_images", &CliConfig::synth_train_images, "train split size"},
      {"synth.test_images", &CliConfig::synth_test_images, "test split size"},
      {"synth.train_heads_min", &CliConfig::synth_train_heads_min, "train split min head count"},
      {"synth.train_heads_max", &CliConfig::synth_train_heads_max, "train split max head count"},
      {"synth.test_heads_min", &CliConfig::synth_test_heads_min, "test split min head count"},
      {"synth.test_heads_max", &CliConfig::synth_test_heads_max, "test split max head count"},
      {"synth.radius_min", &CliConfig::synth_radius_min, "min head radius (px)"},
      {"synth.radius_max", &CliConfig::synth_radius_max, "max head radius (px)"},
      {"synth.train_separation", &CliConfig::synth_train_separation,
       "train split min head distance factor (>=2 disjoint)"},
      {"synth.test_separation", &CliConfig::synth_test_separation,
       "test split min head distance factor (<1 occluded)"},
      {"synth.background", &CliConfig::synth_background, "flat | noise | gradient"},
      {"gt.sigma", &CliConfig::gt_sigma, "Gaussian kernel sigma for GT maps (px)"},
      {"sim.lambda", &CliConfig::sim_lambda, "image fusion ratio"},
      {"sim.shift", &CliConfig::sim_shift, "fixed shift S for the simulate verb (px)"},
      {"sim.s_min", &CliConfig::sim_s_min, "training shift lower bound (px)"},
      {"sim.s_max", &CliConfig::sim_s_max, "training shift upper bound; 0 = crop_w/4"},
      {"model.stage1_channels", &CliConfig::model_stage1, "encoder stage 1 width"},
      {"model.stage2_channels", &CliConfig::model_stage2, "encoder stage 2 width"},
      {"model.stage3_channels", &CliConfig::model_stage3, "encoder stage 3 width (c1)"},
      {"model.c2", &CliConfig::model_c2, "decoder/memory feature width"},
      {"ddmem.l", &CliConfig::ddmem_l, "memory vectors per bank (1024 at paper scale)"},
      {"ddmem.fusion", &CliConfig::ddmem_fusion, "concat | add | adaptive"},
      {"ddmem.ldcm", &CliConfig::ddmem_ldcm, "frozen | trainable"},
      {"ddmem.banks", &CliConfig::ddmem_banks, "both | ldcm | hdcm | none"},
      {"hfem.scale", &CliConfig::hfem_scale, "s1 | s2 | s3 | s2+s3 | s1+s3"},
      {"hfem.pool", &CliConfig::hfem_pool, "max | avg | none | avg+max"},
      {"hfem.mask", &CliConfig::hfem_mask, "density | binary"},
      {"hfem.overlay", &CliConfig::hfem_overlay, "blend | max"},
      {"loss.theta_den", &CliConfig::theta_den, "density loss weight"},
      {"loss.theta_enh", &CliConfig::theta_enh, "enhancement loss weight"},
      {"loss.theta_cls", &CliConfig::theta_cls, "classification loss weight"},
      {"loss.theta_con", &CliConfig::theta_con, "consistency loss weight"},
      {"cls.patch", &CliConfig::cls_patch, "classification patch size (px)"},
      {"opt.max_lr", &CliConfig::opt_max_lr, "one-cycle peak learning rate"},
      {"opt.weight_decay", &CliConfig::opt_weight_decay, "AdamW decoupled weight decay"},
      {"opt.epochs", &CliConfig::opt_epochs, "main training epochs (180 at paper scale)"},
      {"opt.pretrain_epochs", &CliConfig::opt_pretrain_epochs, "low-branch pretraining epochs"},
      {"opt.batch", &CliConfig::opt_batch, "batch size"},
      {"opt.pct_start", &CliConfig::opt_pct_start, "one-cycle warmup fraction"},
      {"opt.div_factor", &CliConfig::opt_div_factor, "initial lr = max_lr / div_factor"},
      {"opt.final_div", &CliConfig::opt_final_div, "final lr = max_lr / final_div"},
      {"aug.crop_h", &CliConfig::aug_crop_h, "training crop height (multiple of 16)"},
      {"aug.crop_w", &CliConfig::aug_crop_w, "training crop width (multiple of 16)"},
      {"aug.hflip_prob", &CliConfig::aug_hflip_prob, "horizontal flip probability"},
      {"aug.jitter_prob", &CliConfig::aug_jitter_prob, "color jitter probability"},
      {"aug.brightness", &CliConfig::aug_brightness, "brightness jitter range"},
      {"aug.contrast", &CliConfig::aug_contrast, "contrast jitter range"},
      {"aug.saturation", &CliConfig::aug_saturation, "saturation jitter range"},
      {"aug.blur_prob", &CliConfig::aug_blur_prob, "Gaussian blur probability"},
      {"aug.blur_sigma_min", &CliConfig::aug_blur_sigma_min, "blur sigma lower bound"},
      {"aug.blur_sigma_max", &CliConfig::aug_blur_sigma_max, "blur sigma upper bound"},
      {"aug.sharpen_prob", &CliConfig::aug_sharpen_prob, "sharpening probability"},
      {"aug.sharpen_min", &CliConfig::aug_sharpen_min, "sharpen amount lower bound"},
      {"aug.sharpen_max", &CliConfig::aug_sharpen_max, "sharpen amount upper bound"},
      {"train.variant", &CliConfig::train_variant,
       "full | baseline | ldcm_only | hdcm_only | fusion_add | fusion_adaptive"},
      {"eval.dump_maps", &CliConfig::eval_dump_maps, "write per-image density files + heat PNGs"},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_value(const CliConfig& cfg, const FieldPtr& field) {
  char buf[64];
  if (auto p = std::get_if<int CliConfig::*>(&field)) {
    std::snprintf(buf, sizeof(buf), "%d", cfg.**p);
  } else if (auto p = std::get_if<double CliConfig::*>(&field)) {
    std::snprintf(buf, sizeof(buf), "%.17g", cfg.**p);
  } else if (auto p = std::get_if<bool CliConfig::*>(&field)) {
    return cfg.**p ? "true" : "false";
  } else if (auto p = std::get_if<std::uint64_t CliConfig::*>(&field)) {
    std::snprintf(buf, sizeof(buf), "%llu", static_cast<unsigned long long>(cfg.**p));
  } else {
    return cfg.*std::get<std::string CliConfig::*>(field);
  }
  return buf;
}

void assign_value(CliConfig& cfg, const KeyEntry& entry, const std::string& value) {
  const auto bad = [&]() {
    fail(ErrorCode::config_error,
         "invalid value '" + value + "' for key '" + entry.name + "'");
  };
  if (auto p = std::get_if<int CliConfig::*>(&entry.field)) {
    int v{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) bad();
    cfg.**p = v;
  } else if (auto p = std::get_if<double CliConfig::*>(&entry.field)) {
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) bad();
      cfg.**p = v;
    } catch (const std::exception&) {
      bad();
    }
  } else if (auto p = std::get_if<bool CliConfig::*>(&entry.field)) {
    if (value == "true")
      cfg.**p = true;
    else if (value == "false")
      cfg.**p = false;
    else
      bad();
  } else if (auto p = std::get_if<std::uint64_t CliConfig::*>(&entry.field)) {
    std::uint64_t v{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) bad();
    cfg.**p = v;
  } else {
    cfg.*std::get<std::string CliConfig::*>(entry.field) = value;
  }
}

const KeyEntry& find_key(const std::string& name) {
  for (const auto& entry : registry())
    if (name == entry.name) return entry;
  fail(ErrorCode::config_error, "unknown config key: " + name);
}

BackgroundTexture parse_background(const std::string& name) {
  if (name == "flat") return BackgroundTexture::flat;
  if (name == "noise") return BackgroundTexture::noise;
  if (name == "gradient") return BackgroundTexture::gradient;
  fail(ErrorCode::config_error, "unknown background texture: " + name);
}

}  // namespace

void CliConfig::validate() const {
  if (aug_crop_h % 16 != 0 || aug_crop_w % 16 != 0)
    fail(ErrorCode::config_error, "crop dims must be multiples of 16");
  if (sim_lambda < 0.0 || sim_lambda > 1.0)
    fail(ErrorCode::config_error, "sim.lambda must lie in [0,1]");
  if (sim_shift < 0 || sim_s_min < 0)
    fail(ErrorCode::config_error, "shifts must be non-negative");
  if (!(gt_sigma > 0.0)) fail(ErrorCode::config_error, "gt.sigma must be positive");
  model_config().validate();
  train_settings().opt.validate();
  parse_background(synth_background);
}

SynthDatasetConfig CliConfig::synth_dataset() const {
  SynthDatasetConfig out;
  out.scene.canvas_h = synth_canvas_h;
  out.scene.canvas_w = synth_canvas_w;
  out.scene.min_radius = synth_radius_min;
  out.scene.max_radius = synth_radius_max;
  out.scene.background = parse_background(synth_background);
  out.train = {synth_train_images, synth_train_heads_min, synth_train_heads_max,
               synth_train_separation};
  out.test = {synth_test_images, synth_test_heads_min, synth_test_heads_max,
              synth_test_separation};
  out.seed = derive_seed(seed, "synth-dataset");
  return out;
}

ModelConfig CliConfig::model_config() const {
  ModelConfig base;
  base.encoder.in_channels = 3;
  base.encoder.base_channels = model_stage1;
  base.encoder.stage_channels = {model_stage1, model_stage2, model_stage3};
  base.encoder.out_channels_c1 = model_stage3;
  base.c2 = model_c2;
  base.memory_l = ddmem_l;
  base.fusion = parse_fusion(ddmem_fusion);
  if (ddmem_ldcm != "frozen" && ddmem_ldcm != "trainable")
    fail(ErrorCode::config_error, "ddmem.ldcm must be frozen or trainable");
  base.ldcm_trainable = ddmem_ldcm == "trainable";
  base.banks = parse_bank_select(ddmem_banks);
  base.hfem = parse_hfem_scale(hfem_scale, base.hfem);
  base.hfem.pool = parse_hfem_pool(hfem_pool);
  base.hfem.mask = parse_hfem_mask(hfem_mask);
  base.hfem.overlay = parse_hfem_overlay(hfem_overlay);
  base.gt_sigma = gt_sigma;
  base.cls_patch = cls_patch;
  return variant_config(train_variant, base);
}

TrainSettings CliConfig::train_settings() const {
  TrainSettings st;
  st.opt.max_lr = opt_max_lr;
  st.opt.weight_decay = opt_weight_decay;
  st.opt.max_epochs = opt_epochs;
  st.opt.pretrain_epochs = opt_pretrain_epochs;
  st.opt.batch_size = opt_batch;
  st.opt.pct_start = opt_pct_start;
  st.opt.div_factor = opt_div_factor;
  st.opt.final_div_factor = opt_final_div;
  st.opt.seed = seed;
  st.aug.crop_h = aug_crop_h;
  st.aug.crop_w = aug_crop_w;
  st.aug.hflip_prob = aug_hflip_prob;
  st.aug.jitter_prob = aug_jitter_prob;
  st.aug.brightness = aug_brightness;
  st.aug.contrast = aug_contrast;
  st.aug.saturation = aug_saturation;
  st.aug.blur_prob = aug_blur_prob;
  st.aug.blur_sigma_min = aug_blur_sigma_min;
  st.aug.blur_sigma_max = aug_blur_sigma_max;
  st.aug.sharpen_prob = aug_sharpen_prob;
  st.aug.sharpen_min = aug_sharpen_min;
  st.aug.sharpen_max = aug_sharpen_max;
  st.weights = {theta_den, theta_enh, theta_cls, theta_con};
  st.sim.s_min = sim_s_min;
  st.sim.s_max = sim_s_max;
  st.sim.blend_lambda = sim_lambda;
  st.seed = seed;
  return st;
}

SimConfig CliConfig::sim_config() const { return {sim_shift, sim_lambda}; }

CliConfig parse_config_text(const std::string& text) {
  CliConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::config_error, "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    assign_value(cfg, find_key(key), value);
  }
  return cfg;
}

CliConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::config_error, "cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_override(CliConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    fail(ErrorCode::config_error, "override must be key=value: " + assignment);
  assign_value(cfg, find_key(trim(assignment.substr(0, eq))), trim(assignment.substr(eq + 1)));
}

std::string serialize_config(const CliConfig& cfg) {
  std::string out;
  for (const auto& entry : registry())
    out += std::string(entry.name) + " = " + format_value(cfg, entry.field) + "\n";
  return out;
}

std::string key_docs() {
  CliConfig defaults;
  std::string out;
  for (const auto& entry : registry()) {
    out += std::string(entry.name) + " = " + format_value(defaults, entry.field) + "  # " +
           entry.doc + "\n";
  }
  return out;
}

}  // namespace l2h
