#pragma once

#include <functional>
#include <ostream>
#include <vector>

#include "l2h/augment.hpp"
#include "l2h/graph.hpp"
#include "l2h/optim.hpp"

namespace l2h {

// Shift sampling during training: per-sample uniform integer in
// [s_min, floor(crop_w/4)] (s_max = 0 means the automatic upper bound).
struct SimSampling {
  int s_min = 8;
  int s_max = 0;
  double blend_lambda = 0.5;

  int upper_bound(int crop_w) const {
    const int auto_max = crop_w / 4;
    const int hi = s_max > 0 ? std::min(s_max, auto_max) : auto_max;
    return std::max(s_min, hi);
  }
};

struct TrainSettings {
  OptimizerConfig opt;
  AugmentConfig aug;
  LossWeights weights;
  SimSampling sim;
  std::uint64_t seed = 0;
};

// In-memory training set (images are small at desk scale).
struct TrainDataset {
  std::vector<Raster> images;
  std::vector<PointAnnotation> annotations;

  std::size_t size() const { return images.size(); }
};

TrainDataset load_dataset(const std::vector<DatasetRecord>& records);

// Deterministic per-(epoch,slot) item assembly: augment -> crop density ->
// shift/overlay simulation -> pad to multiples of 16.
template <typename T>
TrainItem<T> build_train_item(const Raster& img, const PointAnnotation& ann,
                              const TrainSettings& st, const ModelConfig& cfg,
                              std::uint64_t item_seed);

struct StepRecord {
  int step = 0;
  double lr = 0.0;
  LossParts parts;
  double total = 0.0;
};

// Owns the optimizer state for one model; the model outlives the trainer.
class Trainer {
 public:
  Trainer(CountingModel<float>& model, const TrainSettings& st, int total_steps);

  // One optimization step over a batch; returns the averaged parts.
  LossParts train_step(const std::vector<TrainItem<float>>& batch);

  // Full loop over the dataset. log (optional) receives one line-delimited
  // JSON record per step: {"step":..,"lr":..,"den":..,"enh":..,"cls":..,
  // "con":..,"total":..}.
  void run(const TrainDataset& data, int epochs, std::ostream* log);

  const StepRecord& last() const { return last_; }
  int step_count() const { return step_; }
  double lr_at(int step) const { return schedule_.lr_at(step); }

 private:
  CountingModel<float>& model_;
  TrainSettings st_;
  std::vector<ParamRef<float>> trainable_;
  AdamW<float> opt_;
  OneCycleSchedule schedule_;
  StepRecord last_;
  int step_ = 0;
};

void write_step_record(std::ostream& os, const StepRecord& rec);

// Trains a fresh single-branch model with its own memory on the unsimulated
// images (density/cls/con losses), then freezes it. The result seeds the
// dual model's low branch and LDCM.
CountingModel<float> pretrain_low_branch(const TrainDataset& data, const ModelConfig& cfg,
                                         const TrainSettings& st, std::ostream* log);

// Trains the requested model around an optional pretrained low branch.
CountingModel<float> train_model(const TrainDataset& data, const ModelConfig& cfg,
                                 const TrainSettings& st,
                                 const CountingModel<float>* pretrained_low, std::ostream* log);

}  // namespace l2h
