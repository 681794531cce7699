#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "l2h/model.hpp"
#include "l2h/trainer.hpp"

namespace l2h {

// Per-image (predicted, ground-truth) count pairs and the two error metrics.
struct EvalResult {
  int n = 0;
  double mae = 0.0;
  double mse = 0.0;  // root-mean-square of the residuals
  std::vector<std::pair<double, double>> per_image;
};

// (1/N) * sum |c_i - chat_i|. Throws EmptyEvalSet for N = 0.
double mae(const std::vector<std::pair<double, double>>& pairs);

// sqrt((1/N) * sum (c_i - chat_i)^2).
double mse(const std::vector<std::pair<double, double>>& pairs);

// Inference through the high-density branch and the memory encoding only.
// Pads right/bottom to multiples of 16 and returns the stride-16 density map
// over the padded grid; the count is its sum (padding never owns a full
// stride-16 cell, so every cell intersects the unpadded region).
std::pair<Raster, double> infer(const Raster& img, const CountingModel<float>& model);

EvalResult evaluate_model(const CountingModel<float>& model,
                          const std::vector<std::pair<Raster, PointAnnotation>>& test_set);

EvalResult evaluate_records(const CountingModel<float>& model,
                            const std::vector<DatasetRecord>& records);

// Named model-configuration variants of the generalization experiment:
// full, baseline, ldcm_only, hdcm_only, fusion_add, fusion_adaptive.
ModelConfig variant_config(const std::string& name, const ModelConfig& base);

struct ExperimentConfig {
  SynthDatasetConfig data;
  ModelConfig base_model;
  TrainSettings train;
  std::vector<std::string> variants{"full", "baseline", "fusion_add"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
};

struct VariantResult {
  double mae = 0.0;  // seed-averaged
  double mse = 0.0;
  int n = 0;
  std::vector<std::pair<std::uint64_t, std::pair<double, double>>> per_seed;
};

struct ExperimentReport {
  std::vector<std::uint64_t> seeds;
  std::vector<std::pair<std::string, VariantResult>> rows;  // configuration order

  const VariantResult* find(const std::string& name) const;
};

// Trains every configured variant on synthetic low-density scenes, evaluates
// on the high-density test split, and averages over seeds. Fully
// deterministic for fixed seeds.
ExperimentReport run_generalization_experiment(const ExperimentConfig& cfg,
                                               std::ostream* progress = nullptr);

std::string report_to_json(const ExperimentReport& report);
std::string report_to_table(const ExperimentReport& report);
void write_report(const ExperimentReport& report, const std::string& json_path,
                  const std::string& table_path);

// Simple heat render of a density map for visual inspection.
Raster density_heat_render(const Raster& density);

}  // namespace l2h
