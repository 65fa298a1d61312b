// Command-line entry point: tessellations, training, and experiment harnesses.
//
// Exit codes: 0 success, 1 a checked assertion failed, 2 usage or config
// error, 3 runtime error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "twae/twae.hpp"

namespace fs = std::filesystem;
using namespace twae;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAssertion = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct Globals {
  std::uint64_t seed = 0;
  std::string out = "out";
  std::string config;
  unsigned threads = 0;
};

struct DataOptions {
  std::string source = "ring";  // ring | ball | idx
  std::string images, labels;
  std::size_t downscale = 1;
  std::size_t modes = 8;
  double radius = 1.0;
  double sigma = 0.1;
  std::size_t count = 10000;
  std::size_t dim = 2;
};

void add_data_options(CLI::App* sub, DataOptions& d) {
  sub->add_option("--data", d.source, "Dataset: ring, ball or idx")->check(CLI::IsMember({"ring", "ball", "idx"}));
  sub->add_option("--idx-images", d.images, "IDX image file");
  sub->add_option("--idx-labels", d.labels, "IDX label file");
  sub->add_option("--downscale", d.downscale, "Block-mean pooling factor for IDX images");
  sub->add_option("--ring-modes", d.modes, "Number of ring modes");
  sub->add_option("--ring-radius", d.radius, "Ring radius");
  sub->add_option("--ring-sigma", d.sigma, "Per-mode standard deviation");
  sub->add_option("--count", d.count, "Synthetic sample count");
  sub->add_option("--data-dim", d.dim, "Dimension of the ball dataset");
}

Dataset make_dataset(const DataOptions& d, std::uint64_t seed) {
  if (d.source == "ring") return gen_gaussian_ring(d.modes, d.radius, d.sigma, d.count, derive_seed(seed, 0xda7a));
  if (d.source == "ball") return gen_uniform_ball_dataset(d.dim, d.count, derive_seed(seed, 0xda7a));
  if (d.images.empty()) throw ConfigError("--data idx needs --idx-images");
  std::optional<fs::path> labels;
  if (!d.labels.empty()) labels = d.labels;
  Dataset ds = load_idx(d.images, labels);
  return d.downscale > 1 ? downscale(ds, d.downscale) : ds;
}

std::string option_key(const CLI::Option* opt) {
  const auto& names = opt->get_lnames();
  return names.empty() ? std::string() : names.front();
}

std::string option_value(const CLI::Option* opt) {
  if (opt->count() == 0) {
    std::string d = opt->get_default_str();
    if (d.size() >= 2 && d.front() == '[' && d.back() == ']') d = d.substr(1, d.size() - 2);
    return d;
  }
  std::string s;
  for (const auto& r : opt->results()) s += (s.empty() ? "" : ",") + r;
  return s;
}

// Applies config-file entries to options not given on the command line.
void apply_config(const std::vector<ConfigEntry>& entries, CLI::App& app, CLI::App* sub) {
  for (const auto& e : entries) {
    if (e.key == "command") {
      if (e.value != sub->get_name())
        throw ConfigError("line " + std::to_string(e.line) + ": config is for '" + e.value + "', not '" +
                          sub->get_name() + "'");
      continue;
    }
    CLI::Option* opt = nullptr;
    for (CLI::App* scope : {sub, &app}) {
      for (CLI::Option* o : scope->get_options())
        if (option_key(o) == e.key) opt = o;
      if (opt) break;
    }
    if (!opt || e.key == "config" || e.key == "help")
      throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + e.key + "' for '" + sub->get_name() + "'");
    if (opt->count() > 0) continue;
    opt->add_result(e.value);
    opt->run_callback();
  }
}

void write_resolved(const fs::path& dir, CLI::App& app, CLI::App* sub) {
  std::map<std::string, std::string> values{{"command", sub->get_name()}};
  for (CLI::App* scope : {&app, sub})
    for (const CLI::Option* o : scope->get_options()) {
      const std::string key = option_key(o);
      if (key.empty() || key == "help" || key == "config") continue;
      values[key] = option_value(o);
    }
  std::ofstream os(dir / "config.resolved");
  write_config(os, values);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw Error("cannot write " + p.string());
  return os;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Auto-encoders with a tessellated latent prior"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--config", g.config, "key = value config file; flags override it");
  app.add_option("--threads", g.threads, "Worker thread cap (0: hardware)");

  // cvt
  std::size_t cvt_dim = 2, cvt_m = 16, cvt_mc = 0, cvt_iters = 200, cvt_draws = 0;
  std::string cvt_method = "lloyd";
  double cvt_tol = 1e-4;
  auto* cvt = app.add_subcommand("cvt", "Build a centroidal Voronoi tessellation of the unit ball");
  cvt->add_option("--dim", cvt_dim, "Ball dimension");
  cvt->add_option("--m", cvt_m, "Number of regions");
  cvt->add_option("--method", cvt_method, "lloyd or kmeans")->check(CLI::IsMember({"lloyd", "kmeans"}));
  cvt->add_option("--mc-samples", cvt_mc, "Lloyd Monte Carlo samples per iteration (0: 200 * m * dim)");
  cvt->add_option("--max-iters", cvt_iters, "Lloyd iteration cap");
  cvt->add_option("--energy-tol", cvt_tol, "Lloyd relative energy tolerance");
  cvt->add_option("--draws", cvt_draws, "K-means draws (0: 1000 * m)");

  // e8
  std::size_t e8_samples = 2'000'000;
  double e8_tol = 0.01;
  auto* e8 = app.add_subcommand("e8", "Build the 241-region E8 tessellation of the 8-ball");
  e8->add_option("--calibration-samples", e8_samples, "Monte Carlo samples for the shell radius");
  e8->add_option("--tolerance", e8_tol, "Relative tolerance on the centre region volume");

  // train
  TrainConfig tc;
  DataOptions train_data;
  std::string trainer = "twae", estimator = "SW", tess_kind = "CVT", tess_file;
  auto* train = app.add_subcommand("train", "Train an auto-encoder");
  train->add_option("--trainer", trainer, "twae, twae-reg or baseline")
      ->check(CLI::IsMember({"twae", "twae-reg", "baseline"}));
  train->add_option("--m", tc.m, "Regions per chunk");
  train->add_option("--n-chunk", tc.chunk_size, "Chunk size N");
  train->add_option("--epochs", tc.epochs, "Epochs");
  train->add_option("--lambda", tc.lambda, "Latent discrepancy weight");
  train->add_option("--alpha", tc.alpha, "Batch-correction weight (twae-reg)");
  train->add_option("--estimator", estimator, "SW, MAXSW, GSW or GW");
  train->add_option("--projections", tc.estimator_config.projections, "Projections for sliced estimators");
  train->add_option("--maxsw-iters", tc.estimator_config.maxsw_iters, "Max-SW ascent iterations");
  train->add_option("--maxsw-step", tc.estimator_config.maxsw_step, "Max-SW ascent step");
  train->add_option("--gsw-radius", tc.estimator_config.gsw_pivot_radius, "Circular GSW pivot radius (0: auto)");
  train->add_option("--tessellation", tess_kind, "CVT or E8");
  train->add_option("--tess-file", tess_file, "Prebuilt tessellation JSON");
  train->add_option("--latent-dim", tc.latent_dim, "Latent dimension");
  train->add_option("--hidden", tc.hidden, "Hidden layer widths")->delimiter(',');
  train->add_option("--lr", tc.learning_rate, "Adam learning rate");
  train->add_option("--eval-projections", tc.eval_projections, "Projections for the per-epoch global metric");
  add_data_options(train, train_data);

  // gap
  DataOptions gap_data;
  GapStudyConfig gap_cfg;
  std::string checkpoint, gap_tess_file;
  std::size_t gap_m = 20;
  auto* gap = app.add_subcommand("gap", "Per-region discrepancy gap of a trained model");
  gap->add_option("--checkpoint", checkpoint, "Checkpoint prefix")->required();
  gap->add_option("--tess-file", gap_tess_file, "Tessellation JSON (default: CVT with --m regions)");
  gap->add_option("--m", gap_m, "Regions when building a CVT");
  gap->add_option("--n", gap_cfg.n, "Points per region");
  gap->add_option("--trials", gap_cfg.trials, "Trials");
  gap->add_option("--projections", gap_cfg.projections, "Projections");
  add_data_options(gap, gap_data);

  // rates
  RateStudyConfig rc;
  auto* rates = app.add_subcommand("rates", "Sample-complexity rates of the sliced estimator");
  rates->add_option("--dim", rc.dim, "Dimension");
  rates->add_option("--n-grid", rc.n_grid, "Sample sizes")->delimiter(',');
  rates->add_option("--trials", rc.trials, "Trials per sample size");
  rates->add_option("--projections", rc.projections, "Projections per estimate");
  rates->add_option("--gauss-scale", rc.gauss_scale, "Standard deviation of the Gaussian P");
  rates->add_option("--reference-n", rc.reference_n, "Sample size of the reference estimate");
  rates->add_option("--reference-projections", rc.reference_projections, "Projections of the reference estimate");

  // ineq
  std::size_t iq_N = 128, iq_trials = 100, tb_trials = 500;
  std::vector<std::size_t> iq_m = {2, 4, 8}, iq_dims = {2, 8}, tb_n = {5, 10, 50};
  auto* ineq = app.add_subcommand("ineq", "Region-restricted matching bound and trace bound checks");
  ineq->add_option("--N", iq_N, "Points per set");
  ineq->add_option("--m-list", iq_m, "Region counts")->delimiter(',');
  ineq->add_option("--dims", iq_dims, "Dimensions")->delimiter(',');
  ineq->add_option("--trials", iq_trials, "Trials per (m, dim)");
  ineq->add_option("--trace-n", tb_n, "Set sizes for the trace bound")->delimiter(',');
  ineq->add_option("--trace-trials", tb_trials, "Trace-bound instances per (n, dim)");

  // varcheck
  VarianceCheckConfig vc;
  std::size_t vc_reps = 20;
  auto* varcheck = app.add_subcommand("varcheck", "Shared versus independent batch variation error");
  varcheck->add_option("--dim", vc.dim, "Parameter dimension");
  varcheck->add_option("--n", vc.n, "Batch size");
  varcheck->add_option("--population", vc.population, "Population size");
  varcheck->add_option("--trials", vc.trials, "Trials per repetition");
  varcheck->add_option("--step-scale", vc.step_scale, "Parameter step length");
  varcheck->add_option("--repetitions", vc_reps, "Repetitions");

  // assign-bench
  std::vector<std::size_t> ab_N = {2000, 5000, 10000, 20000};
  std::size_t ab_m = 400, ab_dim = 64, ab_small = 64;
  auto* bench = app.add_subcommand("assign-bench", "Least cost method timing and cost versus the exact assigner");
  bench->add_option("--N", ab_N, "Chunk sizes")->delimiter(',');
  bench->add_option("--m", ab_m, "Generators");
  bench->add_option("--dim", ab_dim, "Dimension");
  bench->add_option("--small-N", ab_small, "Chunk size for the exact comparison (m = small-N / 4)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  CLI::App* sub = app.get_subcommands().front();

  try {
    if (!g.config.empty()) apply_config(load_config(g.config), app, sub);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (g.threads) set_thread_limit(g.threads);

  try {
    const fs::path out(g.out);
    fs::create_directories(out);
    write_resolved(out, app, sub);
    const std::string name = sub->get_name();

    if (name == "cvt") {
      std::vector<double> history;
      Tessellation t = cvt_method == "lloyd"
                           ? [&] {
                               auto r = lloyd_cvt({cvt_dim, cvt_m, cvt_mc, cvt_iters, cvt_tol, g.seed});
                               history = r.energy_history;
                               return r.tessellation;
                             }()
                           : kmeans_cvt(cvt_dim, cvt_m, cvt_draws ? cvt_draws : 1000 * cvt_m, g.seed);
      open_out(out / "tessellation.json") << to_json(t).dump(2) << '\n';
      auto os = open_out(out / "energy.csv");
      os << "iteration,energy\n";
      os.precision(17);
      for (std::size_t i = 0; i < history.size(); ++i) os << i << ',' << history[i] << '\n';
      return kExitOk;
    }

    if (name == "e8") {
      const Tessellation t = e8_tessellation({e8_samples, e8_tol, g.seed});
      open_out(out / "tessellation.json") << to_json(t).dump(2) << '\n';
      std::cerr << "shell radius " << *t.shell_radius() << '\n';
      return kExitOk;
    }

    if (name == "train") {
      tc.seed = g.seed;
      tc.estimator = estimator_from_string(estimator);
      tc.tessellation = tessellation_kind_from_string(tess_kind);
      tc.abort_dump = out / "abort_state";
      const Dataset data = make_dataset(train_data, g.seed);
      const TrainerKind kind = trainer_kind_from_string(trainer);
      std::optional<Tessellation> tess;
      if (kind != TrainerKind::BASELINE) {
        if (!tess_file.empty()) {
          std::ifstream in(tess_file);
          if (!in) throw ConfigError("cannot open " + tess_file);
          tess = tessellation_from_json(nlohmann::json::parse(in));
        } else {
          tess = make_tessellation(tc);
        }
        open_out(out / "tessellation.json") << to_json(*tess).dump(2) << '\n';
      }
      const TrainResult r = twae::train(kind, tc, data, tess ? &*tess : nullptr);
      auto steps = open_out(out / "metrics.csv");
      r.log.write_steps_csv(steps);
      auto epochs = open_out(out / "epochs.csv");
      r.log.write_epochs_csv(epochs);
      save_checkpoint(out / "model", r.params, {g.seed, r.log.steps.size()});
      return kExitOk;
    }

    if (name == "gap") {
      const AutoEncoderParams model = load_checkpoint(checkpoint);
      const Dataset data = make_dataset(gap_data, g.seed);
      std::optional<Tessellation> tess;
      if (!gap_tess_file.empty()) {
        std::ifstream in(gap_tess_file);
        if (!in) throw ConfigError("cannot open " + gap_tess_file);
        tess = tessellation_from_json(nlohmann::json::parse(in));
      } else {
        tess = lloyd_cvt({.dim = model.latent_dim, .m = gap_m, .seed = derive_seed(g.seed, 0x7e55)}).tessellation;
      }
      gap_cfg.seed = g.seed;
      const GapStudyResult r = gap_study(model, data, *tess, gap_cfg);
      auto os = open_out(out / "gap.csv");
      r.write_csv(os);
      std::cout << "mean region gap " << r.mean_region_gap() << ", global gap " << r.global_gap() << '\n';
      return kExitOk;
    }

    if (name == "rates") {
      rc.seed = g.seed;
      const RateStudy r = rate_study_sw(rc);
      auto os = open_out(out / "rates.csv");
      os << "# reference " << r.reference << "\n";
      r.deviation.write_csv(os);
      os << "# slope deviation " << r.deviation.slope << ", same_prior " << r.same_prior.slope << '\n';
      r.same_prior.write_csv(os);
      std::cout << "deviation slope " << r.deviation.slope << ", same-prior slope " << r.same_prior.slope << '\n';
      const bool ok = r.deviation.slope >= -0.7 && r.deviation.slope <= -0.3 && r.same_prior.slope >= -1.25 &&
                      r.same_prior.slope <= -0.75;
      return ok ? kExitOk : kExitAssertion;
    }

    if (name == "ineq") {
      std::size_t violations = 0;
      auto os = open_out(out / "ineq.csv");
      os << "N,m,dim,trial,lhs,rhs,margin\n";
      for (std::size_t mi = 0; mi < iq_m.size(); ++mi)
        for (std::size_t di = 0; di < iq_dims.size(); ++di) {
          const auto r = matching_bound_check(iq_N, iq_m[mi], iq_dims[di], iq_trials, derive_seed(g.seed, 1, mi, di));
          std::ostringstream block;
          r.write_csv(block);
          const std::string text = block.str();
          os << text.substr(text.find('\n') + 1);
          violations += r.violations;
        }
      const auto tb = trace_bound_check(tb_n, iq_dims, tb_trials, derive_seed(g.seed, 2));
      auto ts = open_out(out / "trace_bound.csv");
      tb.write_csv(ts);
      std::cout << "matching-bound violations " << violations << ", trace-bound violations " << tb.violations
                << ", coupling-bound violations " << tb.coupling_violations << '\n';
      return violations == 0 && tb.passed() ? kExitOk : kExitAssertion;
    }

    if (name == "varcheck") {
      auto os = open_out(out / "varcheck.csv");
      os << "repetition,mean_shared,mean_independent\n";
      os.precision(17);
      std::size_t wins = 0;
      for (std::size_t r = 0; r < vc_reps; ++r) {
        VarianceCheckConfig c = vc;
        c.seed = derive_seed(g.seed, r);
        const auto res = variance_check(c);
        os << r << ',' << res.mean_shared << ',' << res.mean_independent << '\n';
        wins += res.mean_shared < res.mean_independent;
      }
      std::cout << "shared batch better in " << wins << " of " << vc_reps << " repetitions\n";
      return wins * 100 >= 95 * vc_reps ? kExitOk : kExitAssertion;
    }

    if (name == "assign-bench") {
      auto os = open_out(out / "assign_bench.csv");
      os << "N,m,dim,method,cost,ms\n";
      os.precision(17);
      for (std::size_t i = 0; i < ab_N.size(); ++i) {
        if (ab_N[i] % ab_m != 0) throw ConfigError("--N values must be divisible by --m");
        const PointSet z = sample_unit_ball(ab_dim, ab_N[i], derive_seed(g.seed, 1, i));
        const PointSet gens = sample_unit_ball(ab_dim, ab_m, derive_seed(g.seed, 2));
        const auto t0 = std::chrono::steady_clock::now();
        const auto plan = lcm_assign(z, gens, ab_N[i] / ab_m);
        const double ms = elapsed_ms(t0);
        os << ab_N[i] << ',' << ab_m << ',' << ab_dim << ",lcm," << plan.cost << ',' << ms << '\n';
        std::cout << "lcm N=" << ab_N[i] << " m=" << ab_m << " d=" << ab_dim << ": " << ms << " ms\n";
      }
      const std::size_t sm = std::max<std::size_t>(1, ab_small / 4);
      const PointSet z = sample_unit_ball(ab_dim, ab_small, derive_seed(g.seed, 3));
      const PointSet gens = sample_unit_ball(ab_dim, sm, derive_seed(g.seed, 4));
      for (const std::string method : {"lcm", "optimal"}) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto plan = method == "lcm" ? lcm_assign(z, gens, ab_small / sm) : optimal_assign(z, gens, ab_small / sm);
        os << ab_small << ',' << sm << ',' << ab_dim << ',' << method << ',' << plan.cost << ',' << elapsed_ms(t0)
           << '\n';
      }
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
