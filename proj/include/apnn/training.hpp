#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "apnn/adam.hpp"
#include "apnn/losses.hpp"

namespace apnn {

struct TrainingConfig {
  AdamConfig adam;
  int max_iters = 20000;
  int resample_every = 1;    // fresh batch every n iterations; 0 keeps one
  int checkpoint_every = 5000;
  int log_every = 100;
  std::uint64_t seed = 0;
  void validate() const;
};

// Base rate halved at each quarter of the run.
double schedule_lr(double base, int iter, int max_iters);

// Mutable network trio of one run; rho stays null for the vanilla method.
struct TrainNets {
  Mlp* rho = nullptr;
  Mlp* gf = nullptr;
  Mlp* phi = nullptr;
};

struct TrainResult {
  int iterations = 0;
  double final_total = 0.0;
  double seconds = 0.0;
};

using LogHook = std::function<void(int iter, const LossReport&)>;

// sample -> loss -> gradient -> adam loop. With a nonempty out_dir, appends
// training_log.jsonl (one line per logged iteration; no wall-clock fields, so
// equal seeds give bit-identical logs) and rewrites rho/kinetic/phi.ckpt
// every checkpoint_every iterations and at the end. Throws numeric_error
// after the total loss stays above 1e6 for 100 consecutive iterations; the
// checkpoints on disk then still hold the last regularly saved state.
TrainResult train(const LossSetup& setup, const BatchConfig& batches,
                  TrainNets nets, const TrainingConfig& cfg,
                  const std::string& out_dir, const LogHook& on_log = {});

}
