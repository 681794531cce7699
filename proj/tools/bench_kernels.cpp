// Timing comparison between the OpenMP kernels and the serial references.
// Also reports the max absolute difference, which must be exactly zero.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include "l2h/kernels.hpp"
#include "l2h/kernels_ref.hpp"
#include "l2h/rng.hpp"

using namespace l2h;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  float m = 0.0f;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void report(const char* name, double serial_ms, double omp_ms, float diff) {
  std::printf("%-24s serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   maxdiff %g\n", name,
              serial_ms, omp_ms, serial_ms / omp_ms, static_cast<double>(diff));
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  Rng rng(7);
  const int reps = 5;

  {
    Tensor in = random_tensor({32, 96, 128}, rng);
    Tensor w = random_tensor({64, 32, 3, 3}, rng);
    Tensor b = random_tensor({64}, rng);
    Tensor out_omp, out_ref;
    const double tr = time_ms([&] { ref::conv2d_forward(in, w, b, 1, 1, out_ref); }, reps);
    const double to = time_ms([&] { conv2d_forward(in, w, b, 1, 1, out_omp); }, reps);
    report("conv2d 3x3 32->64", tr, to, max_abs_diff(out_omp, out_ref));
  }
  {
    Tensor a = random_tensor({512, 256}, rng);
    Tensor b = random_tensor({256, 512}, rng);
    Tensor out_omp, out_ref;
    const double tr = time_ms([&] { ref::matmul(a, false, b, false, out_ref); }, reps);
    const double to = time_ms([&] { matmul(a, false, b, false, out_omp); }, reps);
    report("matmul 512x256x512", tr, to, max_abs_diff(out_omp, out_ref));
  }
  {
    Tensor z = random_tensor({2048, 256}, rng);
    Tensor out_omp, out_ref;
    const double tr = time_ms([&] { ref::softmax_rows(z, out_ref); }, reps);
    const double to = time_ms([&] { softmax_rows(z, out_omp); }, reps);
    report("softmax 2048x256", tr, to, max_abs_diff(out_omp, out_ref));
  }
  {
    Tensor f = random_tensor({128, 40, 40}, rng);
    Tensor out_omp, out_ref;
    const double tr = time_ms([&] { ref::channel_max_pool(f, out_ref, nullptr); }, reps);
    const double to = time_ms([&] { channel_max_pool(f, out_omp, nullptr); }, reps);
    report("channel_max 128ch", tr, to, max_abs_diff(out_omp, out_ref));
  }
  {
    Tensor m = random_tensor({40, 40}, rng);
    Tensor out_omp, out_ref;
    const double tr = time_ms([&] { ref::upsample_nearest(m, 640, 640, out_ref); }, reps);
    const double to = time_ms([&] { upsample_nearest(m, 640, 640, out_omp); }, reps);
    report("upsample 40->640", tr, to, max_abs_diff(out_omp, out_ref));
  }
  {
    Tensor img = random_tensor({640 * 640 * 3}, rng);
    Tensor out_omp({640 * (640 + 64) * 3}), out_ref({640 * (640 + 64) * 3});
    const double tr = time_ms(
        [&] { ref::pad_overlay(img.ptr(), 640, 640, 3, 64, 0.5f, 0.5f, out_ref.ptr()); }, reps);
    const double to = time_ms(
        [&] { pad_overlay(img.ptr(), 640, 640, 3, 64, 0.5f, 0.5f, out_omp.ptr()); }, reps);
    report("shift_overlay 640px", tr, to, max_abs_diff(out_omp, out_ref));
  }
  return 0;
}
