#include "apnn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "apnn/errors.hpp"
#include "apnn/rng.hpp"

namespace apnn {

void TrainingConfig::validate() const {
  adam.validate();
  if (max_iters < 1) throw config_error("max_iters must be >= 1");
  if (resample_every < 0) throw config_error("resample_every must be >= 0");
  if (checkpoint_every < 0) throw config_error("checkpoint_every must be >= 0");
  if (log_every < 1) throw config_error("log_every must be >= 1");
}

double schedule_lr(double base, int iter, int max_iters) {
  const int quarter = std::max(1, max_iters / 4);
  int halvings = iter / quarter;
  if (halvings > 3) halvings = 3;
  return base * std::pow(0.5, double(halvings));
}

TrainResult train(const LossSetup& setup, const BatchConfig& batches,
                  TrainNets nets, const TrainingConfig& cfg,
                  const std::string& out_dir, const LogHook& on_log) {
  cfg.validate();
  batches.validate();
  const bool has_rho = setup.method != Method::vanilla;
  if ((has_rho && !nets.rho) || !nets.gf || !nets.phi)
    throw config_error("train needs all networks of the method");

  std::mt19937_64 eng(derive_seed(cfg.seed, 0xBA7C4E5ull));
  SampleBatch batch = sample_batch(batches, setup.problem, eng);

  Adam a_rho(has_rho ? nets.rho->n_params() : 0, cfg.adam);
  Adam a_gf(nets.gf->n_params(), cfg.adam);
  Adam a_phi(nets.phi->n_params(), cfg.adam);
  std::vector<double> g_rho(a_rho.size()), g_gf(a_gf.size()),
      g_phi(a_phi.size());

  std::ofstream log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log.open(out_dir + "/training_log.jsonl", std::ios::app);
    if (!log) throw io_error("cannot open training log in " + out_dir);
  }
  auto save_all = [&](int iter) {
    if (out_dir.empty()) return;
    if (has_rho) save_checkpoint(*nets.rho, out_dir + "/rho.ckpt", iter);
    save_checkpoint(*nets.gf, out_dir + "/kinetic.ckpt", iter);
    save_checkpoint(*nets.phi, out_dir + "/phi.ckpt", iter);
  };
  auto log_line = [&](int iter, double lr, const LossReport& rep) {
    if (on_log) on_log(iter, rep);
    if (!log.is_open()) return;
    nlohmann::json j;
    j["iter"] = iter;
    j["lr"] = lr;
    j["total"] = rep.total;
    nlohmann::json terms;
    for (const auto& kv : rep.terms) terms[kv.first] = kv.second;
    j["terms"] = terms;
    log << j.dump() << "\n";
    log.flush();
  };

  const auto t_start = std::chrono::steady_clock::now();
  TrainResult res;
  int high_count = 0;
  NetSet ns{nets.rho, nets.gf, nets.phi};
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (it > 0 && cfg.resample_every > 0 && it % cfg.resample_every == 0)
      batch = sample_batch(batches, setup.problem, eng);

    const double lr = schedule_lr(cfg.adam.lr, it, cfg.max_iters);
    LossReport rep = empirical_loss_grad(
        setup, ns, batch, has_rho ? g_rho.data() : nullptr, g_gf.data(),
        g_phi.data());

    if (rep.total > 1e6) {
      if (++high_count >= 100) {
        log_line(it, lr, rep);
        throw numeric_error(
            "loss diverged: total above 1e6 for 100 consecutive iterations");
      }
    } else {
      high_count = 0;
    }

    if (it % cfg.log_every == 0) log_line(it, lr, rep);

    if (has_rho) a_rho.step(nets.rho->params.data(), g_rho.data(), lr);
    a_gf.step(nets.gf->params.data(), g_gf.data(), lr);
    a_phi.step(nets.phi->params.data(), g_phi.data(), lr);

    if (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0)
      save_all(it + 1);

    res.iterations = it + 1;
    res.final_total = rep.total;
  }
  save_all(res.iterations);
  res.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return res;
}

}
