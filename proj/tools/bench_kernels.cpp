#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include <omp.h>

#include "apnn/kernels.hpp"
#include "apnn/mlp.hpp"
#include "apnn/physics.hpp"
#include "apnn/rng.hpp"

using namespace apnn;

namespace {

double time_ms(const std::function<void()>& fn) {
  // warm once, then repeat until the clock has something to measure
  fn();
  int reps = 1;
  double elapsed = 0.0;
  for (;;) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    elapsed = std::chrono::duration<double, std::milli>(
                  std::chrono::steady_clock::now() - t0)
                  .count();
    if (elapsed > 200.0 || reps > 1 << 14) return elapsed / reps;
    reps *= 2;
  }
}

}  // namespace

int main() {
  const int n = 512;
  const FourierFeatures ff{0.5, 1};
  Mlp net = make_mlp({4, 256, 256, 256, 256, 256, 1}, Head::identity);
  xavier_init(net, 7);

  const SlotLayout lay =
      SlotLayout::make(m_val | m_dt | m_dx | m_dv | m_dvv);

  std::mt19937_64 eng(3);
  std::vector<double> t(n), x(n), v(n);
  for (int i = 0; i < n; ++i) {
    t[i] = uniform(eng, 0.0, 1.0);
    x[i] = uniform(eng, 0.0, 12.0);
    v[i] = uniform(eng, -6.0, 6.0);
  }
  std::vector<double> in(std::size_t(n) * lay.count * net.in_width());
  seed_rows(ff, true, 0, lay, t.data(), x.data(), v.data(), nullptr, n,
            in.data());

  std::printf("jet forward pass, %d samples, net 4-5x256-1, %d slots\n", n,
              lay.count);

  const double ref_ms = time_ms([&] {
    std::vector<Jet> inj(net.in_width());
    double sink = 0.0;
    for (int i = 0; i < n; ++i) {
      build_input_jets(ff, true, 0, t[i], x[i], v[i], nullptr, inj.data());
      sink += refk::forward_jet(net, lay, inj.data()).val;
    }
    if (sink == 0.12345) std::printf(".");
  });
  std::printf("  per-sample reference      %9.3f ms\n", ref_ms);

  EvalRecord rec;
  const int max_threads = omp_get_max_threads();
  for (int workers : {1, max_threads}) {
    set_worker_count(workers);
    const double ms =
        time_ms([&] { forward_batch(net, lay, in.data(), n, rec); });
    std::printf("  batched, %2d worker%s      %9.3f ms   (%.1fx reference)\n",
                workers, workers == 1 ? " " : "s", ms, ref_ms / ms);
    if (workers == max_threads) break;
  }

  forward_batch(net, lay, in.data(), n, rec);
  std::vector<double> adj(std::size_t(rec.rows()) * net.out_width(), 1.0);
  std::vector<double> grad(net.n_params());
  for (int workers : {1, max_threads}) {
    set_worker_count(workers);
    const double ms = time_ms([&] {
      std::fill(grad.begin(), grad.end(), 0.0);
      backward_batch(rec, adj.data(), grad.data());
    });
    std::printf("  backward, %2d worker%s     %9.3f ms\n", workers,
                workers == 1 ? " " : "s", ms);
    if (workers == max_threads) break;
  }
  set_worker_count(1);
  return 0;
}
