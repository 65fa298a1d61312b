#pragma once

// Training loops: tessellated (plain and with the non-identical-batch
// correction) and the untessellated baseline with the same loss and optimizer.

#include <chrono>
#include <filesystem>
#include <optional>
#include <ostream>

#include "twae/autoencoder.hpp"
#include "twae/batch_design.hpp"
#include "twae/data.hpp"
#include "twae/discrepancy.hpp"
#include "twae/tessellation.hpp"

namespace twae {

enum class TrainerKind { TWAE, TWAE_REG, BASELINE };

inline std::string to_string(TrainerKind k) {
  switch (k) {
    case TrainerKind::TWAE: return "twae";
    case TrainerKind::TWAE_REG: return "twae-reg";
    case TrainerKind::BASELINE: return "baseline";
  }
  return "?";
}

inline TrainerKind trainer_kind_from_string(const std::string& s) {
  if (s == "twae") return TrainerKind::TWAE;
  if (s == "twae-reg") return TrainerKind::TWAE_REG;
  if (s == "baseline") return TrainerKind::BASELINE;
  throw Error("unknown trainer: " + s);
}

struct TrainConfig {
  std::size_t m = 20;              // regions (batches per chunk)
  std::size_t chunk_size = 10000;  // N
  std::size_t epochs = 10;
  double lambda = 1.0;
  double alpha = 0.2;
  Estimator estimator = Estimator::SW;
  EstimatorConfig estimator_config{};
  TessellationKind tessellation = TessellationKind::CVT;
  std::size_t latent_dim = 2;
  std::vector<std::size_t> hidden = {64, 64};
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  std::size_t eval_projections = 200;  // per-epoch global latent metric
  std::optional<std::filesystem::path> abort_dump;  // checkpoint prefix written on a non-finite loss

  std::size_t batch_size() const { return chunk_size / m; }

  void validate() const {
    if (m == 0) throw Error("TrainConfig: m must be positive");
    if (chunk_size == 0 || chunk_size % m != 0) throw Error("TrainConfig: chunk size must be a positive multiple of m");
    if (alpha < 0.0) throw Error("TrainConfig: alpha must be non-negative");
    if (latent_dim == 0) throw Error("TrainConfig: latent_dim must be positive");
    if (estimator == Estimator::EXACT) throw Error("TrainConfig: EXACT is not a training estimator");
  }
};

struct StepRecord {
  std::size_t epoch = 0, chunk = 0, step = 0, region = 0;
  double recon = 0.0, latent = 0.0;
  double correction_norm = 0.0;  // regularized trainer only
  double lcm_ms = 0.0;           // chunk's assignment time, on the chunk's first step
  double step_ms = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double recon = 0.0;
  double region_latent = 0.0;  // mean per-step latent discrepancy
  double global_latent = 0.0;  // SW between an encoded chunk and ball samples
  double lcm_ms = 0.0;
  double backprop_ms = 0.0;
};

struct MetricsLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;

  void write_steps_csv(std::ostream& os) const {
    os << "epoch,chunk,region,recon,latent,lcm_ms,step_ms\n";
    os.precision(17);
    for (const auto& s : steps)
      os << s.epoch << ',' << s.chunk << ',' << s.region << ',' << s.recon << ',' << s.latent << ',' << s.lcm_ms
         << ',' << s.step_ms << '\n';
  }

  void write_epochs_csv(std::ostream& os) const {
    os << "epoch,recon,region_latent,global_latent,lcm_ms,backprop_ms\n";
    os.precision(17);
    for (const auto& e : epochs)
      os << e.epoch << ',' << e.recon << ',' << e.region_latent << ',' << e.global_latent << ',' << e.lcm_ms << ','
         << e.backprop_ms << '\n';
  }
};

struct TrainResult {
  AutoEncoderParams params;
  MetricsLog log;
};

/// Builds the configured tessellation of the latent ball.
inline Tessellation make_tessellation(const TrainConfig& cfg) {
  if (cfg.tessellation == TessellationKind::E8) {
    if (cfg.latent_dim != 8 || cfg.m != kE8RegionCount) throw Error("E8 tessellation needs latent_dim 8 and m 241");
    return e8_tessellation({.seed = derive_seed(cfg.seed, 0x7e55)});
  }
  return lloyd_cvt({.dim = cfg.latent_dim, .m = cfg.m, .seed = derive_seed(cfg.seed, 0x7e55)}).tessellation;
}

namespace detail {

enum StreamTag : std::uint64_t {
  kInitTag = 1,
  kShuffleTag,
  kOrderTag,
  kPriorTag,
  kProjTag,
  kRegDataTag,
  kRegPriorTag,
  kRegProjTag,
  kEvalTag,
};

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Whole-support batch of the regularized trainer: chunk rows, ball prior, projection seed.
struct SupportBatch {
  PointSet x;
  PointSet prior;
  std::uint64_t seed = 0;
};

inline TrainResult run_training(const TrainConfig& cfg, const Dataset& data, const Tessellation* tess,
                                TrainerKind kind) {
  cfg.validate();
  const std::size_t N = cfg.chunk_size, m = cfg.m, n = cfg.batch_size();
  if (data.size() < N) throw Error("training: dataset smaller than one chunk");
  if (kind != TrainerKind::BASELINE) {
    if (!tess) throw Error("training: tessellation required");
    if (tess->dim() != cfg.latent_dim || tess->region_count() != m)
      throw Error("training: tessellation does not match latent_dim / m");
  }

  std::vector<std::size_t> widths{data.dim()};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  TrainResult out{init_params(widths, cfg.latent_dim, derive_seed(cfg.seed, kInitTag)), {}};
  AutoEncoderParams& params = out.params;
  AdamState adam = make_adam(params, cfg.learning_rate);
  const std::size_t chunks = data.size() / N;

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    std::vector<std::size_t> perm(data.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, kShuffleTag, e));
    std::shuffle(perm.begin(), perm.end(), shuffle_rng);

    EpochRecord er{.epoch = e};
    const std::size_t first_step = out.log.steps.size();

    for (std::size_t c = 0; c < chunks; ++c) {
      const PointSet xc = data.points.gather(std::span(perm).subspan(c * N, N));
      std::vector<std::vector<std::size_t>> batches(m);
      std::vector<std::size_t> order(m);
      std::iota(order.begin(), order.end(), std::size_t{0});
      double lcm_ms = 0.0;

      if (kind == TrainerKind::BASELINE) {
        for (std::size_t j = 0; j < m; ++j) {
          batches[j].resize(n);
          std::iota(batches[j].begin(), batches[j].end(), j * n);
        }
      } else {
        const PointSet z = encode(params, xc);
        const auto t0 = Clock::now();
        const AssignmentPlan plan = lcm_assign(z, tess->generators(), n);
        lcm_ms = ms_since(t0);
        check_feasible(plan, m);
        batches = plan.clusters(m);
        Rng order_rng(derive_seed(cfg.seed, kOrderTag, e, c));
        std::shuffle(order.begin(), order.end(), order_rng);
      }
      er.lcm_ms += lcm_ms;

      std::optional<SupportBatch> prev;
      ParamGradients prev_grad;

      for (std::size_t pos = 0; pos < m; ++pos) {
        const std::size_t k = order[pos];
        const auto t0 = Clock::now();
        const PointSet bx = xc.gather(batches[k]);
        const std::uint64_t prior_seed = derive_seed(cfg.seed, kPriorTag, e, c, pos);
        const PointSet prior = kind == TrainerKind::BASELINE ? sample_unit_ball(cfg.latent_dim, n, prior_seed)
                                                             : sample_region(*tess, k, n, prior_seed);
        const auto abort = [&](const std::string& why) {
          if (cfg.abort_dump) save_checkpoint(*cfg.abort_dump, params, {cfg.seed, adam.step});
          return NumericalError("training aborted at epoch " + std::to_string(e) + ", chunk " + std::to_string(c) +
                                ", step " + std::to_string(pos) + ": " + why);
        };
        LossResult res;
        try {
          res = loss_and_grad(params, bx, prior, cfg.lambda, cfg.estimator, cfg.estimator_config,
                              derive_seed(cfg.seed, kProjTag, e, c, pos));
        } catch (const NumericalError& err) {
          throw abort(err.what());
        }
        if (!std::isfinite(res.recon) || !std::isfinite(res.latent)) throw abort("non-finite loss");
        ParamGradients& g = res.grads;
        double correction_norm = 0.0;

        if (kind == TrainerKind::TWAE_REG) {
          // Fresh whole-support batch S^(k) for this step.
          SupportBatch cur;
          {
            std::vector<std::size_t> rows(N);
            std::iota(rows.begin(), rows.end(), std::size_t{0});
            Rng pick(derive_seed(cfg.seed, kRegDataTag, e, c, pos));
            std::shuffle(rows.begin(), rows.end(), pick);
            rows.resize(n);
            cur.x = xc.gather(rows);
            cur.prior = sample_unit_ball(cfg.latent_dim, n, derive_seed(cfg.seed, kRegPriorTag, e, c, pos));
            cur.seed = derive_seed(cfg.seed, kRegProjTag, e, c, pos);
          }
          if (prev) {
            ParamGradients correction = loss_and_grad(params, prev->x, prev->prior, cfg.lambda, cfg.estimator,
                                                      cfg.estimator_config, prev->seed)
                                            .grads;
            add_scaled(correction, -1.0, prev_grad);
            correction_norm = std::sqrt(squared_norm(correction));
            add_scaled(g, cfg.alpha, correction);
          }
          prev_grad = loss_and_grad(params, cur.x, cur.prior, cfg.lambda, cfg.estimator, cfg.estimator_config,
                                    cur.seed)
                          .grads;
          prev = std::move(cur);
        }

        adam_step(params, adam, g);
        out.log.steps.push_back({e, c, pos, k, res.recon, res.latent, correction_norm, pos == 0 ? lcm_ms : 0.0,
                                 ms_since(t0)});
      }
    }

    const std::size_t steps = out.log.steps.size() - first_step;
    for (std::size_t s = first_step; s < out.log.steps.size(); ++s) {
      er.recon += out.log.steps[s].recon;
      er.region_latent += out.log.steps[s].latent;
      er.backprop_ms += out.log.steps[s].step_ms;
    }
    if (steps) {
      er.recon /= static_cast<double>(steps);
      er.region_latent /= static_cast<double>(steps);
    }
    std::vector<std::size_t> head(N);
    std::iota(head.begin(), head.end(), std::size_t{0});
    const PointSet z = encode(params, data.points.gather(head));
    er.global_latent = sw2(z, sample_unit_ball(cfg.latent_dim, N, derive_seed(cfg.seed, kEvalTag, e)),
                           cfg.eval_projections, derive_seed(cfg.seed, kEvalTag, e, 1))
                           .value;
    out.log.epochs.push_back(er);
  }
  return out;
}

}  // namespace detail

/// Tessellated training: per chunk, encode, assign clusters by the least cost
/// method, then one Adam step per region against prior samples from that region.
inline TrainResult train_twae(const TrainConfig& cfg, const Dataset& data, const Tessellation& tess) {
  return detail::run_training(cfg, data, &tess, TrainerKind::TWAE);
}

/// As train_twae, with each step's gradient corrected by alpha times the change
/// of a whole-support batch gradient between consecutive parameter values.
inline TrainResult train_twae_regularized(const TrainConfig& cfg, const Dataset& data, const Tessellation& tess) {
  return detail::run_training(cfg, data, &tess, TrainerKind::TWAE_REG);
}

/// Untessellated control: consecutive shuffled batches of n = N/m points and
/// prior samples from the whole ball.
inline TrainResult train_baseline(const TrainConfig& cfg, const Dataset& data) {
  return detail::run_training(cfg, data, nullptr, TrainerKind::BASELINE);
}

inline TrainResult train_twae(const TrainConfig& cfg, const Dataset& data) {
  return train_twae(cfg, data, make_tessellation(cfg));
}

inline TrainResult train_twae_regularized(const TrainConfig& cfg, const Dataset& data) {
  return train_twae_regularized(cfg, data, make_tessellation(cfg));
}

inline TrainResult train(TrainerKind kind, const TrainConfig& cfg, const Dataset& data, const Tessellation* tess) {
  if (kind == TrainerKind::BASELINE) return train_baseline(cfg, data);
  if (!tess) throw Error("train: tessellation required");
  return detail::run_training(cfg, data, tess, kind);
}

}  // namespace twae
