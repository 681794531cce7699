#include "l2h/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace l2h {

TrainDataset load_dataset(const std::vector<DatasetRecord>& records) {
  TrainDataset data;
  for (const auto& rec : records) {
    Raster img = read_png(rec.image_path);
    if (img.height != rec.height || img.width != rec.width)
      fail(ErrorCode::schema_error, "annotation dims disagree with image: " + rec.image_path);
    data.images.push_back(std::move(img));
    data.annotations.push_back(rec.annotation);
  }
  return data;
}

namespace {

template <typename T>
TensorT<T> density_to_tensor(const Raster& d) {
  TensorT<T> out({d.height, d.width});
  for (std::size_t i = 0; i < d.values.size(); ++i) out[i] = static_cast<T>(d.values[i]);
  return out;
}

}  // namespace

template <typename T>
TrainItem<T> build_train_item(const Raster& img, const PointAnnotation& ann,
                              const TrainSettings& st, const ModelConfig& cfg,
                              std::uint64_t item_seed) {
  AugmentConfig aug = st.aug;
  aug.seed = item_seed;
  AugmentedPair pair = augment(img, ann, aug);

  TrainItem<T> item;
  item.view1 = raster_to_input<T>(pair.view1, cfg.encoder.in_channels);
  item.view2 = raster_to_input<T>(pair.view2, cfg.encoder.in_channels);

  const Raster gt_ori = points_to_density(pair.cropped, aug.crop_h, aug.crop_w, cfg.gt_sigma);
  item.gt_ori = density_to_tensor<T>(gt_ori);

  if (cfg.kind == ModelKind::dual && cfg.use_hdsm) {
    Rng rng(derive_seed(item_seed, "shift"));
    const int hi = st.sim.upper_bound(aug.crop_w);
    item.sim_cfg.shift_s = st.sim.s_min >= hi ? hi : rng.uniform_int(st.sim.s_min, hi);
    item.sim_cfg.blend_lambda = st.sim.blend_lambda;

    const Raster sim1 = pad_to_multiple(simulate_high_density(pair.view1, item.sim_cfg), 16);
    const Raster sim2 = pad_to_multiple(simulate_high_density(pair.view2, item.sim_cfg), 16);
    const Raster gt_sim = pad_to_multiple(generate_gt(gt_ori, item.sim_cfg.shift_s), 16);
    item.sim1 = raster_to_input<T>(sim1, cfg.encoder.in_channels);
    item.sim2 = raster_to_input<T>(sim2, cfg.encoder.in_channels);
    item.gt_sim = density_to_tensor<T>(gt_sim);
  } else if (cfg.kind == ModelKind::dual) {
    // Simulation disabled: the high branch trains on the clear views.
    item.sim1 = item.view1;
    item.sim2 = item.view2;
    item.gt_sim = item.gt_ori;
  }
  return item;
}

Trainer::Trainer(CountingModel<float>& model, const TrainSettings& st, int total_steps)
    : model_(model),
      st_(st),
      trainable_(model.trainable_params()),
      schedule_(st.opt.max_lr, total_steps, st.opt.pct_start, st.opt.div_factor,
                st.opt.final_div_factor) {
  st_.opt.validate();
  opt_.init(trainable_, st_.opt.weight_decay);
}

LossParts Trainer::train_step(const std::vector<TrainItem<float>>& batch) {
  if (batch.empty()) fail(ErrorCode::bad_dims, "empty batch");
  model_.zero_grad();
  LossParts acc;
  const float grad_scale = 1.0f / static_cast<float>(batch.size());
  for (const auto& item : batch) {
    const LossParts p = item_forward_backward(model_, item, st_.weights, true, grad_scale, true);
    acc.den += p.den;
    acc.enh += p.enh;
    acc.cls += p.cls;
    acc.con += p.con;
  }
  acc.den /= batch.size();
  acc.enh /= batch.size();
  acc.cls /= batch.size();
  acc.con /= batch.size();

  const double lr = schedule_.lr_at(step_);
  const double total = total_loss(acc, st_.weights);  // throws on non-finite
  opt_.step(trainable_, lr);
  last_ = {step_, lr, acc, total};
  ++step_;
  return acc;
}

void write_step_record(std::ostream& os, const StepRecord& rec) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "{\"step\":%d,\"lr\":%.9g,\"den\":%.9g,\"enh\":%.9g,\"cls\":%.9g,"
                "\"con\":%.9g,\"total\":%.9g}\n",
                rec.step, rec.lr, rec.parts.den, rec.parts.enh, rec.parts.cls, rec.parts.con,
                rec.total);
  os << buf;
}

void Trainer::run(const TrainDataset& data, int epochs, std::ostream* log) {
  if (data.size() == 0) fail(ErrorCode::bad_dims, "empty training set");
  const int batch = st_.opt.batch_size;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    // Seed-determined visit order.
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(st_.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(0, static_cast<int>(i) - 1)]);

    for (std::size_t start = 0; start < order.size(); start += batch) {
      std::vector<TrainItem<float>> items;
      const std::size_t end = std::min(order.size(), start + batch);
      for (std::size_t k = start; k < end; ++k) {
        const std::uint64_t item_seed =
            derive_seed(st_.seed, "item", static_cast<std::uint64_t>(epoch) * data.size() + k);
        items.push_back(build_train_item<float>(data.images[order[k]],
                                                data.annotations[order[k]], st_, model_.cfg,
                                                item_seed));
      }
      train_step(items);
      if (log) write_step_record(*log, last_);
    }
  }
}

namespace {

int steps_per_epoch(std::size_t n, int batch) {
  return static_cast<int>((n + batch - 1) / batch);
}

}  // namespace

CountingModel<float> pretrain_low_branch(const TrainDataset& data, const ModelConfig& cfg,
                                         const TrainSettings& st, std::ostream* log) {
  ModelConfig low_cfg = cfg;
  low_cfg.kind = ModelKind::single_memory;
  low_cfg.use_hdsm = false;
  CountingModel<float> model =
      build_single_model<float>(low_cfg, derive_seed(st.seed, "low-branch"));

  TrainSettings pst = st;
  pst.seed = derive_seed(st.seed, "pretrain");
  pst.weights.theta_enh = 0.0;  // no second branch yet
  const int total = steps_per_epoch(data.size(), pst.opt.batch_size) * pst.opt.pretrain_epochs;
  Trainer trainer(model, pst, total);
  trainer.run(data, pst.opt.pretrain_epochs, log);
  if (!std::isfinite(trainer.last().total))
    fail(ErrorCode::diverged_training, "pretraining loss is not finite");
  freeze_branch(model.high);
  return model;
}

CountingModel<float> train_model(const TrainDataset& data, const ModelConfig& cfg,
                                 const TrainSettings& st,
                                 const CountingModel<float>* pretrained_low, std::ostream* log) {
  CountingModel<float> model;
  if (cfg.kind == ModelKind::dual) {
    if (!pretrained_low)
      fail(ErrorCode::config_error, "dual model training requires a pretrained low branch");
    model = build_dual_model<float>(cfg, *pretrained_low, derive_seed(st.seed, "dual"));
  } else {
    model = build_single_model<float>(cfg, derive_seed(st.seed, "single"));
  }

  TrainSettings mst = st;
  mst.seed = derive_seed(st.seed, "train");
  const int total = steps_per_epoch(data.size(), mst.opt.batch_size) * mst.opt.max_epochs;
  Trainer trainer(model, mst, total);
  trainer.run(data, mst.opt.max_epochs, log);
  if (!std::isfinite(trainer.last().total))
    fail(ErrorCode::diverged_training, "training loss is not finite");
  return model;
}

template TrainItem<float> build_train_item<float>(const Raster&, const PointAnnotation&,
                                                  const TrainSettings&, const ModelConfig&,
                                                  std::uint64_t);
template TrainItem<double> build_train_item<double>(const Raster&, const PointAnnotation&,
                                                    const TrainSettings&, const ModelConfig&,
                                                    std::uint64_t);

}  // namespace l2h
