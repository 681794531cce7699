#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "l2h/model.hpp"
#include "l2h/raster.hpp"
#include "l2h/rng.hpp"
#include "l2h/tensor.hpp"

namespace l2h::testutil {

inline Raster random_raster(int h, int w, int c, Rng& rng, float lo = 0.0f, float hi = 1.0f) {
  Raster r(h, w, c);
  for (auto& v : r.values) v = static_cast<float>(rng.uniform(lo, hi));
  return r;
}

template <typename T>
TensorT<T> random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  TensorT<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Unique scratch directory under the build tree; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = (std::filesystem::temp_directory_path() /
             ("l2h_test_" + tag + "_" + std::to_string(++counter) + "_" +
              std::to_string(::getpid())))
                .string();
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Small model configuration that keeps test runtimes low.
inline ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.kind = ModelKind::dual;
  cfg.encoder.in_channels = 3;
  cfg.encoder.base_channels = 4;
  cfg.encoder.stage_channels = {4, 6, 8};
  cfg.encoder.out_channels_c1 = 8;
  cfg.c2 = 4;
  cfg.memory_l = 4;
  return cfg;
}

}  // namespace l2h::testutil
