#include "l2h/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

#include <nlohmann/json.hpp>

namespace l2h {

using nlohmann::json;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u32(std::FILE* f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  std::fwrite(b, 1, 4, f);
}

std::uint32_t get_u32(std::FILE* f) {
  unsigned char b[4];
  if (std::fread(b, 1, 4, f) != 4) fail(ErrorCode::io_error, "truncated checkpoint");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

json hfem_to_json(const HfemConfig& h) {
  return {{"scale", hfem_scale_name(h)},
          {"pool", hfem_pool_name(h.pool)},
          {"mask", hfem_mask_name(h.mask)},
          {"overlay", hfem_overlay_name(h.overlay)}};
}

HfemConfig hfem_from_json(const json& j) {
  HfemConfig h;
  h = parse_hfem_scale(j.at("scale").get<std::string>(), h);
  h.pool = parse_hfem_pool(j.at("pool").get<std::string>());
  h.mask = parse_hfem_mask(j.at("mask").get<std::string>());
  h.overlay = parse_hfem_overlay(j.at("overlay").get<std::string>());
  return h;
}

json config_json(const ModelConfig& cfg, bool low_frozen, bool high_frozen, bool has_low,
                 std::uint64_t seed) {
  return {{"format_version", kCheckpointVersion},
          {"kind", model_kind_name(cfg.kind)},
          {"seed", seed},
          {"has_low", has_low},
          {"frozen", {{"low", low_frozen}, {"high", high_frozen}}},
          {"encoder",
           {{"in_channels", cfg.encoder.in_channels},
            {"base_channels", cfg.encoder.base_channels},
            {"stage_channels",
             {cfg.encoder.stage_channels[0], cfg.encoder.stage_channels[1],
              cfg.encoder.stage_channels[2]}}}},
          {"c2", cfg.c2},
          {"memory_l", cfg.memory_l},
          {"fusion", fusion_name(cfg.fusion)},
          {"banks", bank_select_name(cfg.banks)},
          {"ldcm_trainable", cfg.ldcm_trainable},
          {"hfem", hfem_to_json(cfg.hfem)},
          {"use_hdsm", cfg.use_hdsm},
          {"gt_sigma", cfg.gt_sigma},
          {"cls_patch", cfg.cls_patch}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.kind = parse_model_kind(j.at("kind").get<std::string>());
  cfg.encoder.in_channels = j.at("encoder").at("in_channels").get<int>();
  cfg.encoder.base_channels = j.at("encoder").at("base_channels").get<int>();
  const auto sc = j.at("encoder").at("stage_channels");
  cfg.encoder.stage_channels = {sc.at(0).get<int>(), sc.at(1).get<int>(), sc.at(2).get<int>()};
  cfg.encoder.out_channels_c1 = cfg.encoder.stage_channels[2];
  cfg.c2 = j.at("c2").get<int>();
  cfg.memory_l = j.at("memory_l").get<int>();
  cfg.fusion = parse_fusion(j.at("fusion").get<std::string>());
  cfg.banks = parse_bank_select(j.at("banks").get<std::string>());
  cfg.ldcm_trainable = j.at("ldcm_trainable").get<bool>();
  cfg.hfem = hfem_from_json(j.at("hfem"));
  cfg.use_hdsm = j.at("use_hdsm").get<bool>();
  cfg.gt_sigma = j.at("gt_sigma").get<double>();
  cfg.cls_patch = j.at("cls_patch").get<int>();
  return cfg;
}

void gather(CountingModel<float>& model, std::vector<ParamRef<float>>& params,
            std::vector<StateRef<float>>& state) {
  model.all_params(params, state);
}

void write_tensor(std::FILE* f, const std::string& name, const TensorT<float>& t) {
  const std::uint16_t len = static_cast<std::uint16_t>(name.size());
  unsigned char lb[2] = {static_cast<unsigned char>(len & 0xff),
                         static_cast<unsigned char>(len >> 8)};
  std::fwrite(lb, 1, 2, f);
  std::fwrite(name.data(), 1, len, f);
  const unsigned char nd = static_cast<unsigned char>(t.shape.size());
  std::fwrite(&nd, 1, 1, f);
  for (int d : t.shape) put_u32(f, static_cast<std::uint32_t>(d));
  std::fwrite(t.data.data(), sizeof(float), t.numel(), f);
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg, bool low_frozen, bool has_low,
                                 std::uint64_t seed) {
  return config_json(cfg, low_frozen, false, has_low, seed).dump();
}

void save_checkpoint(const std::string& path, CountingModel<float>& model, std::uint64_t seed) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) fail(ErrorCode::io_error, "cannot write checkpoint: " + path);

  const std::string meta = config_json(model.cfg, model.has_low && model.low.frozen,
                                       model.high.frozen, model.has_low, seed)
                               .dump();
  std::fwrite("L2HC", 1, 4, f.get());
  put_u32(f.get(), kCheckpointVersion);
  put_u32(f.get(), static_cast<std::uint32_t>(meta.size()));
  std::fwrite(meta.data(), 1, meta.size(), f.get());

  std::vector<ParamRef<float>> params;
  std::vector<StateRef<float>> state;
  gather(model, params, state);
  put_u32(f.get(), static_cast<std::uint32_t>(params.size() + state.size()));
  for (const auto& p : params) write_tensor(f.get(), p.name, *p.value);
  for (const auto& s : state) write_tensor(f.get(), s.name, *s.value);
}

CountingModel<float> load_checkpoint(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) fail(ErrorCode::model_not_loaded, "cannot open checkpoint: " + path);
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, "L2HC", 4) != 0)
    fail(ErrorCode::model_not_loaded, "bad checkpoint magic: " + path);
  const std::uint32_t version = get_u32(f.get());
  if (version != kCheckpointVersion)
    fail(ErrorCode::model_not_loaded, "unsupported checkpoint version");
  const std::uint32_t meta_len = get_u32(f.get());
  std::string meta(meta_len, '\0');
  if (std::fread(meta.data(), 1, meta_len, f.get()) != meta_len)
    fail(ErrorCode::model_not_loaded, "truncated checkpoint metadata");

  json j;
  try {
    j = json::parse(meta);
  } catch (const json::exception& e) {
    fail(ErrorCode::model_not_loaded, std::string("bad checkpoint metadata: ") + e.what());
  }
  const ModelConfig cfg = config_from_json(j);
  const std::uint64_t seed = j.at("seed").get<std::uint64_t>();
  const bool has_low = j.at("has_low").get<bool>();

  CountingModel<float> model;
  if (cfg.kind == ModelKind::dual) {
    // Build shapes via a temporary pretrained-low skeleton, then overwrite.
    ModelConfig low_cfg = cfg;
    low_cfg.kind = ModelKind::single_memory;
    low_cfg.fusion = FusionKind::concat;
    low_cfg.banks = BankSelect::both;
    CountingModel<float> skeleton = build_single_model<float>(low_cfg, seed);
    model = build_dual_model<float>(cfg, skeleton, seed);
  } else {
    model = build_single_model<float>(cfg, seed);
  }
  if (has_low != model.has_low) fail(ErrorCode::model_not_loaded, "inconsistent branch layout");

  std::vector<ParamRef<float>> params;
  std::vector<StateRef<float>> state;
  gather(model, params, state);
  std::vector<std::pair<std::string, TensorT<float>*>> slots;
  for (auto& p : params) slots.emplace_back(p.name, p.value);
  for (auto& s : state) slots.emplace_back(s.name, s.value);

  const std::uint32_t count = get_u32(f.get());
  if (count != slots.size()) fail(ErrorCode::model_not_loaded, "checkpoint tensor count mismatch");
  std::size_t filled = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    unsigned char lb[2];
    if (std::fread(lb, 1, 2, f.get()) != 2) fail(ErrorCode::model_not_loaded, "truncated tensor");
    std::string name(lb[0] | (lb[1] << 8), '\0');
    if (std::fread(name.data(), 1, name.size(), f.get()) != name.size())
      fail(ErrorCode::model_not_loaded, "truncated tensor name");
    unsigned char nd;
    if (std::fread(&nd, 1, 1, f.get()) != 1) fail(ErrorCode::model_not_loaded, "truncated rank");
    std::vector<int> shape(nd);
    for (auto& d : shape) d = static_cast<int>(get_u32(f.get()));

    TensorT<float>* slot = nullptr;
    for (auto& [n, t] : slots)
      if (n == name) {
        slot = t;
        break;
      }
    if (!slot) fail(ErrorCode::model_not_loaded, "unknown tensor in checkpoint: " + name);
    if (slot->shape != shape) fail(ErrorCode::model_not_loaded, "shape mismatch for " + name);
    if (std::fread(slot->data.data(), sizeof(float), slot->numel(), f.get()) != slot->numel())
      fail(ErrorCode::model_not_loaded, "truncated payload for " + name);
    ++filled;
  }
  if (filled != slots.size()) fail(ErrorCode::model_not_loaded, "incomplete checkpoint");

  if (model.has_low && j.at("frozen").at("low").get<bool>()) freeze_branch(model.low);
  if (j.at("frozen").at("high").get<bool>()) freeze_branch(model.high);
  if (model.cfg.kind == ModelKind::dual) model.low.bank.trainable = cfg.ldcm_trainable;
  return model;
}

}  // namespace l2h
