#include "l2h/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

namespace l2h {

using nlohmann::json;

double mae(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.empty()) fail(ErrorCode::empty_eval_set, "mae of zero images");
  double acc = 0.0;
  for (const auto& [c, chat] : pairs) acc += std::abs(c - chat);
  return acc / static_cast<double>(pairs.size());
}

double mse(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.empty()) fail(ErrorCode::empty_eval_set, "mse of zero images");
  double acc = 0.0;
  for (const auto& [c, chat] : pairs) acc += (c - chat) * (c - chat);
  return std::sqrt(acc / static_cast<double>(pairs.size()));
}

std::pair<Raster, double> infer(const Raster& img, const CountingModel<float>& model) {
  const Raster padded = pad_to_multiple(img, 16);
  const TensorT<float> x = raster_to_input<float>(padded, model.cfg.encoder.in_channels);
  const FeaturePyramid<float> pyr = encode<float>(x, model.high, nullptr, false);
  const TensorT<float> f3d = decode<float>(pyr.s3, model.high, nullptr, false);
  const DdmemOut<float> dd = ddmem_forward(model, f3d);
  const TensorT<float> pred = predict_density<float>(model, dd, nullptr);

  Raster density(pred.dim(0), pred.dim(1), 1);
  double count = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    density.values[i] = pred[i];
    count += static_cast<double>(pred[i]);
  }
  return {std::move(density), count};
}

EvalResult evaluate_model(const CountingModel<float>& model,
                          const std::vector<std::pair<Raster, PointAnnotation>>& test_set) {
  EvalResult result;
  for (const auto& [img, ann] : test_set) {
    const auto [density, count] = infer(img, model);
    result.per_image.emplace_back(count, static_cast<double>(ann.size()));
  }
  result.n = static_cast<int>(result.per_image.size());
  result.mae = mae(result.per_image);
  result.mse = mse(result.per_image);
  return result;
}

EvalResult evaluate_records(const CountingModel<float>& model,
                            const std::vector<DatasetRecord>& records) {
  std::vector<std::pair<Raster, PointAnnotation>> test_set;
  for (const auto& rec : records) test_set.emplace_back(read_png(rec.image_path), rec.annotation);
  return evaluate_model(model, test_set);
}

ModelConfig variant_config(const std::string& name, const ModelConfig& base) {
  ModelConfig cfg = base;
  cfg.kind = ModelKind::dual;
  cfg.use_hdsm = true;
  if (name == "full") {
    // banks/fusion as configured (defaults: both + concat)
  } else if (name == "baseline") {
    cfg.kind = ModelKind::single_plain;
    cfg.use_hdsm = false;
  } else if (name == "ldcm_only") {
    cfg.banks = BankSelect::ldcm;
  } else if (name == "hdcm_only") {
    cfg.banks = BankSelect::hdcm;
  } else if (name == "fusion_add") {
    cfg.banks = BankSelect::both;
    cfg.fusion = FusionKind::add;
  } else if (name == "fusion_adaptive") {
    cfg.banks = BankSelect::both;
    cfg.fusion = FusionKind::adaptive;
  } else {
    fail(ErrorCode::config_error, "unknown experiment variant: " + name);
  }
  return cfg;
}

const VariantResult* ExperimentReport::find(const std::string& name) const {
  for (const auto& [n, r] : rows)
    if (n == name) return &r;
  return nullptr;
}

ExperimentReport run_generalization_experiment(const ExperimentConfig& cfg,
                                               std::ostream* progress) {
  ExperimentReport report;
  report.seeds = cfg.seeds;
  for (const auto& name : cfg.variants) report.rows.emplace_back(name, VariantResult{});

  bool any_dual = false;
  for (const auto& name : cfg.variants)
    if (name != "baseline") any_dual = true;

  for (const std::uint64_t seed : cfg.seeds) {
    SynthDatasetConfig data_cfg = cfg.data;
    data_cfg.seed = derive_seed(seed, "experiment-data");
    const auto train_scenes = generate_split(data_cfg, Split::train);
    const auto test_scenes = generate_split(data_cfg, Split::test);

    TrainDataset train_data;
    for (const auto& [img, ann] : train_scenes) {
      train_data.images.push_back(img);
      train_data.annotations.push_back(ann);
    }

    CountingModel<float> pretrained;
    if (any_dual) {
      TrainSettings pre = cfg.train;
      pre.seed = derive_seed(seed, "experiment-pretrain");
      if (progress) *progress << "[experiment] seed " << seed << ": pretraining low branch\n";
      pretrained = pretrain_low_branch(train_data, cfg.base_model, pre, nullptr);
    }

    for (auto& [name, result] : report.rows) {
      const ModelConfig vcfg = variant_config(name, cfg.base_model);
      TrainSettings st = cfg.train;
      st.seed = derive_seed(seed, "experiment-" + name);
      if (progress) *progress << "[experiment] seed " << seed << ": training " << name << "\n";
      CountingModel<float> model = train_model(
          train_data, vcfg, st, vcfg.kind == ModelKind::dual ? &pretrained : nullptr, nullptr);
      const EvalResult eval = evaluate_model(model, test_scenes);
      result.per_seed.push_back({seed, {eval.mae, eval.mse}});
      result.n = eval.n;
      if (progress)
        *progress << "[experiment]   " << name << ": mae " << eval.mae << " mse " << eval.mse
                  << "\n";
    }
  }

  for (auto& [name, result] : report.rows) {
    double sum_mae = 0.0, sum_mse = 0.0;
    for (const auto& [seed, mm] : result.per_seed) {
      sum_mae += mm.first;
      sum_mse += mm.second;
    }
    result.mae = sum_mae / result.per_seed.size();
    result.mse = sum_mse / result.per_seed.size();
  }
  return report;
}

std::string report_to_json(const ExperimentReport& report) {
  json variants = json::object();
  for (const auto& [name, r] : report.rows) {
    json per_seed = json::array();
    for (const auto& [seed, mm] : r.per_seed)
      per_seed.push_back({{"seed", seed}, {"mae", mm.first}, {"mse", mm.second}});
    variants[name] = {{"mae", r.mae}, {"mse", r.mse}, {"N", r.n}, {"per_seed", per_seed}};
  }
  return json{{"seeds", report.seeds}, {"variants", variants}}.dump(2) + "\n";
}

std::string report_to_table(const ExperimentReport& report) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-18s %10s %10s\n", "variant", "MAE", "MSE");
  out += line;
  out += std::string(40, '-') + "\n";
  for (const auto& [name, r] : report.rows) {
    std::snprintf(line, sizeof(line), "%-18s %10.3f %10.3f\n", name.c_str(), r.mae, r.mse);
    out += line;
  }
  return out;
}

void write_report(const ExperimentReport& report, const std::string& json_path,
                  const std::string& table_path) {
  std::ofstream js(json_path);
  if (!js) fail(ErrorCode::io_error, "cannot write " + json_path);
  js << report_to_json(report);
  std::ofstream tb(table_path);
  if (!tb) fail(ErrorCode::io_error, "cannot write " + table_path);
  tb << report_to_table(report);
}

Raster density_heat_render(const Raster& density) {
  float peak = 0.0f;
  for (float v : density.values) peak = std::max(peak, v);
  if (peak <= 0.0f) peak = 1.0f;
  Raster out(density.height, density.width, 3);
  for (int y = 0; y < density.height; ++y)
    for (int x = 0; x < density.width; ++x) {
      const float t = std::clamp(density.at(y, x) / peak, 0.0f, 1.0f);
      // black -> red -> yellow -> white ramp
      out.at(y, x, 0) = std::clamp(3.0f * t, 0.0f, 1.0f);
      out.at(y, x, 1) = std::clamp(3.0f * t - 1.0f, 0.0f, 1.0f);
      out.at(y, x, 2) = std::clamp(3.0f * t - 2.0f, 0.0f, 1.0f);
    }
  return out;
}

}  // namespace l2h
