#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "apnn/build_info.hpp"
#include "apnn/config.hpp"
#include "apnn/errors.hpp"
#include "apnn/experiments.hpp"
#include "apnn/kernels.hpp"
#include "apnn/rng.hpp"
#include "apnn/solver.hpp"
#include "apnn/svg_plot.hpp"
#include "apnn/training.hpp"
#include "apnn/verify.hpp"

namespace {

using nlohmann::json;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  int threads = 0;
};

void apply_threads(const CommonArgs& args) {
  if (args.threads > 0) apnn::set_worker_count(args.threads);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw apnn::io_error("cannot create directory: " + dir);
}

void write_manifest(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw apnn::io_error("cannot open manifest: " + path);
  out << j.dump(2) << "\n";
}

json base_manifest(const char* command, const apnn::RunConfig& cfg) {
  json j;
  j["command"] = command;
  j["git_revision"] = apnn::kGitRevision;
  j["build_type"] = apnn::kBuildType;
  j["config"] = json::parse(apnn::config_json(cfg));
  j["field_law"] =
      cfg.problem == apnn::ProblemId::gravitational ? "gradient" : "poisson";
  return j;
}

apnn::SolverProblem solver_problem(const apnn::ProblemSetup& ps, double cfl) {
  apnn::SolverProblem sp;
  // Problems with random inputs are solved at the averaged data: the
  // perturbation is mean-zero, so null z is exactly the z-average.
  sp.f0 = [f0 = ps.loss.f0](double x, double v) { return f0(x, v, nullptr); };
  sp.rho0 = [r0 = ps.loss.rho0](double x) { return r0(x, nullptr); };
  sp.h = [h = ps.loss.source](double x) { return h(x, nullptr); };
  sp.eps = ps.loss.eps;
  sp.field_gradient = ps.loss.field_gradient;
  sp.cfl = cfl;
  return sp;
}

int cmd_train(const CommonArgs& args, std::uint64_t seed_override,
              bool has_seed) {
  apply_threads(args);
  apnn::RunConfig cfg = apnn::load_config(args.config_path);
  if (has_seed) cfg.training.seed = seed_override;
  ensure_dir(args.out_dir);

  const apnn::ProblemSetup ps = cfg.setup();
  apnn::LossSetup setup;
  setup.method = cfg.method;
  setup.ff = ps.ff;
  setup.rule =
      apnn::velocity_rule(cfg.quad_points, ps.loss.v_lo, ps.loss.v_hi);
  setup.problem = ps.loss;
  setup.penalties = cfg.penalties;

  const int nz = ps.loss.nz;
  auto widths = [&](const std::vector<int>& hidden, bool has_v) {
    std::vector<int> w;
    w.push_back(apnn::input_width(ps.ff, has_v, nz));
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(1);
    return w;
  };

  const std::uint64_t seed = cfg.training.seed;
  apnn::Mlp rho, gf, phi;
  apnn::TrainNets nets;
  if (cfg.method != apnn::Method::vanilla) {
    rho = apnn::make_mlp(widths(cfg.scalar_hidden, false),
                         apnn::Head::softplus);
    apnn::xavier_init(rho, apnn::derive_seed(seed, 1));
    nets.rho = &rho;
  }
  gf = apnn::make_mlp(widths(cfg.kinetic_hidden, true),
                      cfg.method == apnn::Method::micro_macro
                          ? apnn::Head::zero_mean_v
                          : apnn::Head::softplus);
  apnn::xavier_init(gf, apnn::derive_seed(seed, 2));
  nets.gf = &gf;
  phi = apnn::make_mlp(widths(cfg.scalar_hidden, false),
                       apnn::Head::identity);
  apnn::xavier_init(phi, apnn::derive_seed(seed, 3));
  nets.phi = &phi;

  std::printf("training %s / %s, eps %.6g, %d iterations\n",
              apnn::problem_name(cfg.problem), apnn::method_name(cfg.method),
              cfg.eps0, cfg.training.max_iters);
  const apnn::TrainResult result = apnn::train(
      setup, cfg.batches, nets, cfg.training, args.out_dir,
      [](int iter, const apnn::LossReport& rep) {
        std::printf("iter %6d  total %.6e\n", iter, rep.total);
        std::fflush(stdout);
      });

  json j = base_manifest("train", cfg);
  j["seeds"]["run"] = seed;
  j["seeds"]["rho_init"] = apnn::derive_seed(seed, 1);
  j["seeds"]["kinetic_init"] = apnn::derive_seed(seed, 2);
  j["seeds"]["phi_init"] = apnn::derive_seed(seed, 3);
  j["result"]["iterations"] = result.iterations;
  j["result"]["final_total"] = result.final_total;
  j["result"]["seconds"] = result.seconds;
  write_manifest(args.out_dir + "/manifest.json", j);
  std::printf("done: final total %.6e in %.1f s\n", result.final_total,
              result.seconds);
  return apnn::exit_ok;
}

int cmd_reference(const CommonArgs& args) {
  apply_threads(args);
  const apnn::RunConfig cfg = apnn::load_config(args.config_path);
  ensure_dir(args.out_dir);

  const apnn::ProblemSetup ps = cfg.setup();
  const apnn::SolverProblem sp = solver_problem(ps, cfg.cfl);
  const apnn::Grid grid{cfg.ref_nx, cfg.ref_nv, ps.loss.x_lo, ps.loss.x_hi,
                        ps.loss.v_lo, ps.loss.v_hi};

  json files = json::object();
  const bool want_kinetic = cfg.ref_kind != "limit";
  const bool want_limit = cfg.ref_kind != "kinetic";
  for (int pass = 0; pass < 2; ++pass) {
    const bool kinetic = pass == 0;
    if (kinetic && !want_kinetic) continue;
    if (!kinetic && !want_limit) continue;
    const char* tag = kinetic ? "kinetic" : "limit";
    std::printf("reference %s: %s grid %dx%d, %zu snapshots\n",
                apnn::problem_name(cfg.problem), tag, grid.nx, grid.nv,
                cfg.times.size());
    const apnn::SolverRun run = kinetic
                                    ? apnn::solve_kinetic(sp, grid, cfg.times)
                                    : apnn::solve_limit(sp, grid, cfg.times);
    for (std::size_t i = 0; i < run.snaps.size(); ++i) {
      const std::string name =
          std::string("ref_") + tag + "_" + std::to_string(i) + ".csv";
      apnn::write_solution_csv(args.out_dir + "/" + name, run.snaps[i]);
      files[tag].push_back(name);
    }
    const std::string ecsv = std::string("energy_") + tag + ".csv";
    apnn::write_energy_csv(args.out_dir + "/" + ecsv, run.energy_time,
                           run.energy);
    files[std::string(tag) + "_energy"] = ecsv;
    apnn::PlotSeries es{std::string(tag) + " reference", run.energy_time,
                        run.energy};
    apnn::write_line_chart(
        args.out_dir + "/energy_" + tag + ".svg", "electric energy", "t",
        "energy", {es}, true);
  }

  json j = base_manifest("reference", cfg);
  j["grid"]["nx"] = grid.nx;
  j["grid"]["nv"] = grid.nv;
  j["files"] = files;
  j["z_averaged"] = ps.loss.nz > 0;
  write_manifest(args.out_dir + "/manifest.json", j);
  return apnn::exit_ok;
}

int cmd_evaluate(const CommonArgs& args, const std::string& nets_dir,
                 const std::string& ref_dir, std::uint64_t z_seed) {
  apply_threads(args);
  const apnn::RunConfig cfg = apnn::load_config(args.config_path);
  ensure_dir(args.out_dir);

  const apnn::ProblemSetup ps = cfg.setup();
  apnn::EvalNets nets;
  nets.method = cfg.method;
  apnn::Mlp rho, gf, phi;
  if (cfg.method != apnn::Method::vanilla) {
    rho = apnn::load_checkpoint(nets_dir + "/rho.ckpt");
    nets.rho = &rho;
  }
  gf = apnn::load_checkpoint(nets_dir + "/kinetic.ckpt");
  nets.gf = &gf;
  phi = apnn::load_checkpoint(nets_dir + "/phi.ckpt");
  nets.phi = &phi;

  const apnn::QuadratureRule rule =
      apnn::velocity_rule(cfg.quad_points, ps.loss.v_lo, ps.loss.v_hi);
  const char* tag = cfg.ref_kind == "limit" ? "limit" : "kinetic";

  std::vector<apnn::MetricRow> rows;
  auto add_row = [&](const char* metric, const char* quantity, double t,
                     double value) {
    apnn::MetricRow r;
    r.problem = apnn::problem_name(cfg.problem);
    r.method = apnn::method_name(cfg.method);
    r.epsilon = cfg.eps0;
    r.metric = metric;
    r.quantity = quantity;
    r.time = t;
    r.value = value;
    rows.push_back(r);
  };

  for (std::size_t i = 0; i < cfg.times.size(); ++i) {
    const double t = cfg.times[i];
    const std::string ref_path = ref_dir + "/ref_" + tag + "_" +
                                 std::to_string(i) + ".csv";
    const apnn::GridSolution ref = apnn::read_solution_csv(ref_path);
    std::vector<double> xs(ref.grid.nx);
    for (int ix = 0; ix < ref.grid.nx; ++ix) xs[ix] = ref.grid.x(ix);

    const apnn::FieldSlice pred = apnn::evaluate_fields(
        ps, nets, rule, t, xs, cfg.z_draws, z_seed);

    add_row("rel_l2", "rho", t, apnn::rel_l2(pred.rho, ref.rho));
    add_row("rel_l2", "E", t, apnn::rel_l2(pred.E, ref.E));
    add_row("rel_l2", "flux", t, apnn::rel_l2(pred.flux, ref.flux));
    add_row("rmse", "rho", t, apnn::rmse(pred.rho, ref.rho));
    add_row("rmse", "E", t, apnn::rmse(pred.E, ref.E));
    add_row("rmse", "flux", t, apnn::rmse(pred.flux, ref.flux));
    add_row("value", "energy_pred", t,
            apnn::electric_energy(pred.E, ref.grid.dx()));
    add_row("value", "energy_ref", t,
            apnn::electric_energy(ref.E, ref.grid.dx()));

    char title[96];
    for (const char* q : {"rho", "E", "flux"}) {
      const std::vector<double>& pv = q[0] == 'r'   ? pred.rho
                                      : q[0] == 'E' ? pred.E
                                                    : pred.flux;
      const std::vector<double>& rv =
          q[0] == 'r' ? ref.rho : q[0] == 'E' ? ref.E : ref.flux;
      std::snprintf(title, sizeof title, "%s at t = %g", q, t);
      apnn::write_line_chart(
          args.out_dir + "/slice_" + q + "_" + std::to_string(i) + ".svg",
          title, "x", q,
          {{"network", xs, pv}, {"reference", xs, rv}});
    }
    std::printf("t = %g: rel l2 rho %.4e, E %.4e\n", t,
                apnn::rel_l2(pred.rho, ref.rho), apnn::rel_l2(pred.E, ref.E));
  }

  apnn::write_metrics_csv(args.out_dir + "/metrics.csv", rows);

  json j = base_manifest("evaluate", cfg);
  j["nets_dir"] = nets_dir;
  j["ref_dir"] = ref_dir;
  j["reference_kind"] = tag;
  j["z_seed"] = z_seed;
  write_manifest(args.out_dir + "/manifest.json", j);
  return apnn::exit_ok;
}

int cmd_verify(const CommonArgs& args) {
  apply_threads(args);
  const std::vector<apnn::PropertyResult> results = apnn::run_property_suite();
  for (const apnn::PropertyResult& r : results)
    std::printf("%s %-42s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str());
  if (apnn::all_pass(results)) {
    std::printf("all %zu properties hold\n", results.size());
    return apnn::exit_ok;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asymptotic-preserving neural workbench for the kinetic "
               "Fokker-Planck-Poisson system"};
  app.require_subcommand(1);

  CommonArgs train_args, ref_args, eval_args, verify_args;
  std::uint64_t train_seed = 0;
  bool train_seed_set = false;
  std::string nets_dir, ref_dir;
  std::uint64_t z_seed = 2026;

  CLI::App* train = app.add_subcommand("train", "fit networks to a problem");
  train->add_option("--config", train_args.config_path, "run settings file")
      ->required();
  train->add_option("--out", train_args.out_dir, "output directory")
      ->required();
  train
      ->add_option_function<std::uint64_t>(
          "--seed",
          [&](std::uint64_t s) {
            train_seed = s;
            train_seed_set = true;
          },
          "override the training seed")
      ->expected(1);
  train->add_option("--threads", train_args.threads, "parallel worker cap");

  CLI::App* ref =
      app.add_subcommand("reference", "run the grid reference solvers");
  ref->add_option("--config", ref_args.config_path, "run settings file")
      ->required();
  ref->add_option("--out", ref_args.out_dir, "output directory")->required();
  ref->add_option("--threads", ref_args.threads, "parallel worker cap");

  CLI::App* eval =
      app.add_subcommand("evaluate", "compare trained networks to a reference");
  eval->add_option("--config", eval_args.config_path, "run settings file")
      ->required();
  eval->add_option("--nets", nets_dir, "directory holding the checkpoints")
      ->required();
  eval->add_option("--ref", ref_dir, "directory holding the reference run")
      ->required();
  eval->add_option("--out", eval_args.out_dir, "output directory")->required();
  eval->add_option("--z-seed", z_seed, "seed of the random-input draws");
  eval->add_option("--threads", eval_args.threads, "parallel worker cap");

  CLI::App* verify =
      app.add_subcommand("verify", "check the implementation invariants");
  verify->add_option("--threads", verify_args.threads, "parallel worker cap");

  try {
    app.parse(argc, argv);
    if (train->parsed()) return cmd_train(train_args, train_seed,
                                          train_seed_set);
    if (ref->parsed()) return cmd_reference(ref_args);
    if (eval->parsed())
      return cmd_evaluate(eval_args, nets_dir, ref_dir, z_seed);
    if (verify->parsed()) return cmd_verify(verify_args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? apnn::exit_ok : apnn::exit_config;
  } catch (const apnn::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return apnn::exit_config;
  } catch (const apnn::io_error& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return apnn::exit_missing_input;
  } catch (const apnn::numeric_error& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return apnn::exit_numeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return apnn::exit_ok;
}
