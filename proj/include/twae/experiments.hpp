#pragma once

// Desk-scale experiment harnesses with CSV output: sample-complexity rates,
// region-restricted matching bounds, the trace bound, batch-variation error,
// and per-region gap studies of trained models.

#include <cmath>
#include <ostream>

#include "twae/autoencoder.hpp"
#include "twae/batch_design.hpp"
#include "twae/data.hpp"
#include "twae/discrepancy.hpp"
#include "twae/tessellation.hpp"
#include "twae/trainer.hpp"

namespace twae {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("fit_line: need at least two paired values");
  const double k = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / k;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error("fit_line: x values are all equal");
  return {sxy / sxx, my - sxy / sxx * mx};
}

namespace detail {

inline double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double standard_error(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

inline PointSet gaussian_points(std::size_t dim, std::size_t count, double scale, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  PointSet out(dim, count);
  for (double& v : out.values()) v = normal(rng);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sample-complexity rates of the sliced estimator

struct RateStudyConfig {
  std::size_t dim = 64;
  std::vector<std::size_t> n_grid = {32, 64, 128, 256, 512, 1024, 2048, 4096};
  std::size_t trials = 20;
  std::size_t projections = 1000;
  std::uint64_t seed = 0;
  double gauss_scale = 1.0;  // P = N(0, gauss_scale^2 I)
  std::size_t reference_n = 100000;
  std::size_t reference_projections = 10000;
};

struct RateStudyResult {
  std::string statistic;
  std::vector<std::size_t> n_grid;
  std::vector<double> mean;
  std::vector<double> se;
  double slope = 0.0;
  double intercept = 0.0;

  void write_csv(std::ostream& os) const {
    os << "statistic,n,mean,se\n";
    os.precision(17);
    for (std::size_t i = 0; i < n_grid.size(); ++i)
      os << statistic << ',' << n_grid[i] << ',' << mean[i] << ',' << se[i] << '\n';
  }
};

struct RateStudy {
  double reference = 0.0;  // SW^2(P, Q) estimated at reference_n
  RateStudyResult deviation;   // |sw2(P_n, Q_n) - SW^2(P, Q)|
  RateStudyResult same_prior;  // sw2(P_n, P_n')
};

namespace detail {

inline RateStudyResult fit_rates(std::string name, const std::vector<std::size_t>& grid,
                                 const std::vector<std::vector<double>>& samples) {
  RateStudyResult r{std::move(name), grid, {}, {}};
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    r.mean.push_back(mean_of(samples[i]));
    r.se.push_back(standard_error(samples[i]));
    lx.push_back(std::log(static_cast<double>(grid[i])));
    ly.push_back(std::log(r.mean.back()));
  }
  const LineFit f = fit_line(lx, ly);
  r.slope = f.slope;
  r.intercept = f.intercept;
  if (!std::isfinite(r.slope)) throw NumericalError("rate study: non-finite slope");
  return r;
}

}  // namespace detail

/// P is an isotropic Gaussian, Q the uniform ball, both in `dim`. Statistic 1
/// is the deviation of the n-sample estimate from a large-sample reference;
/// statistic 2 is the estimate between two independent n-samples of P.
inline RateStudy rate_study_sw(const RateStudyConfig& cfg) {
  if (cfg.n_grid.size() < 2) throw Error("rate_study_sw: need at least two grid points");
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
    if (cfg.n_grid[i] < 32 || cfg.n_grid[i] > 8192) throw Error("rate_study_sw: grid values must lie in [32, 8192]");
    if (i && cfg.n_grid[i] <= cfg.n_grid[i - 1]) throw Error("rate_study_sw: grid must be strictly increasing");
  }
  if (cfg.trials < 20) throw Error("rate_study_sw: need at least 20 trials");

  RateStudy out;
  {
    const PointSet p = detail::gaussian_points(cfg.dim, cfg.reference_n, cfg.gauss_scale, derive_seed(cfg.seed, 0, 0));
    const PointSet q = sample_unit_ball(cfg.dim, cfg.reference_n, derive_seed(cfg.seed, 0, 1));
    out.reference = sw2(p, q, cfg.reference_projections, derive_seed(cfg.seed, 0, 2)).value;
  }

  const std::size_t G = cfg.n_grid.size();
  std::vector<std::vector<double>> dev(G, std::vector<double>(cfg.trials));
  std::vector<std::vector<double>> same(G, std::vector<double>(cfg.trials));
  for (std::size_t g = 0; g < G; ++g) {
    const std::size_t n = cfg.n_grid[g];
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      const PointSet p = detail::gaussian_points(cfg.dim, n, cfg.gauss_scale, derive_seed(cfg.seed, 1, g, t, 0));
      const PointSet q = sample_unit_ball(cfg.dim, n, derive_seed(cfg.seed, 1, g, t, 1));
      const PointSet p2 = detail::gaussian_points(cfg.dim, n, cfg.gauss_scale, derive_seed(cfg.seed, 1, g, t, 2));
      dev[g][t] = std::abs(sw2(p, q, cfg.projections, derive_seed(cfg.seed, 1, g, t, 3)).value - out.reference);
      same[g][t] = sw2(p, p2, cfg.projections, derive_seed(cfg.seed, 1, g, t, 4)).value;
    }
  }
  out.deviation = detail::fit_rates("deviation", cfg.n_grid, dev);
  out.same_prior = detail::fit_rates("same_prior", cfg.n_grid, same);
  return out;
}

// ---------------------------------------------------------------------------
// Region-restricted matching bound

struct MatchingBoundTrial {
  std::size_t trial = 0;
  double lhs = 0.0;  // W2^2(P_N, Q_N)
  double rhs = 0.0;  // (1/m) sum_j W2^2(P_j, Q_j)
};

struct MatchingBoundResult {
  std::size_t N = 0, m = 0, dim = 0;
  std::vector<MatchingBoundTrial> trials;
  std::size_t violations = 0;
  double min_margin = 0.0;  // min over trials of rhs - lhs

  bool passed() const { return violations == 0; }

  void write_csv(std::ostream& os) const {
    os << "N,m,dim,trial,lhs,rhs,margin\n";
    os.precision(17);
    for (const auto& t : trials)
      os << N << ',' << m << ',' << dim << ',' << t.trial << ',' << t.lhs << ',' << t.rhs << ',' << t.rhs - t.lhs
         << '\n';
  }
};

inline constexpr double kInequalitySlack = 1e-9;

/// Optimal transport between P_N (uniform ball) and Q_N (Gaussian) against
/// the average of the per-region problems induced by a CVT: Q_N clustered by
/// the least cost method, P_N by the exact capacitated assignment.
inline MatchingBoundResult matching_bound_check(std::size_t N, std::size_t m, std::size_t dim, std::size_t trials, std::uint64_t seed,
                             const Tessellation* tess = nullptr) {
  if (N > 256) throw Error("matching_bound_check: N must not exceed 256");
  if (m == 0 || N % m != 0) throw Error("matching_bound_check: N must be divisible by m");
  const std::size_t n = N / m;
  std::optional<Tessellation> own;
  if (!tess) {
    own = lloyd_cvt({.dim = dim, .m = m, .mc_samples_per_iter = std::max<std::size_t>(20000, 200 * m * dim),
                     .max_iters = 50, .seed = derive_seed(seed, 0)})
              .tessellation;
    tess = &*own;
  }
  if (tess->dim() != dim || tess->region_count() != m) throw Error("matching_bound_check: tessellation does not match");

  MatchingBoundResult out;
  out.N = N;
  out.m = m;
  out.dim = dim;
  out.trials.resize(trials);
  parallel_for(trials, [&](std::size_t t) {
    const PointSet p = sample_unit_ball(dim, N, derive_seed(seed, 1, t, 0));
    const PointSet q = detail::gaussian_points(dim, N, 0.5, derive_seed(seed, 1, t, 1));
    const auto qc = lcm_assign(q, tess->generators(), n).clusters(m);
    const auto pc = optimal_assign(p, tess->generators(), n).clusters(m);
    double rhs = 0.0;
    for (std::size_t j = 0; j < m; ++j) rhs += wasserstein_exact(p.gather(pc[j]), q.gather(qc[j])).estimate.value;
    out.trials[t] = {t, wasserstein_exact(p, q).estimate.value, rhs / static_cast<double>(m)};
  });
  out.min_margin = std::numeric_limits<double>::infinity();
  for (const auto& t : out.trials) {
    if (t.lhs > t.rhs + kInequalitySlack) ++out.violations;
    out.min_margin = std::min(out.min_margin, t.rhs - t.lhs);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trace bound

/// 2(n-1)/(n-4) (tr Sigma(P_n) + tr Sigma(Q_n)), unbiased covariances.
inline double trace_bound(const PointSet& a, const PointSet& b) {
  require_same_shape(a, b, "trace_bound");
  const double n = static_cast<double>(a.size());
  if (a.size() < 5) throw Error("trace_bound: need n >= 5");
  return 2.0 * (n - 1.0) / (n - 4.0) * (covariance_trace(a) + covariance_trace(b));
}

/// Average cost over all pairings: |m_a - m_b|^2 + (n-1)/n (tr Sigma_a + tr Sigma_b).
/// Any equal-size empirical W2^2 is at most this value.
inline double mean_coupling_bound(const PointSet& a, const PointSet& b) {
  require_same_shape(a, b, "mean_coupling_bound");
  const Moments ma = empirical_moments(a), mb = empirical_moments(b);
  const double n = static_cast<double>(a.size());
  return (ma.mean - mb.mean).squaredNorm() + (n - 1.0) / n * (ma.cov.trace() + mb.cov.trace());
}

struct TraceBoundInstance {
  std::size_t n = 0, dim = 0, trial = 0;
  std::string family;
  double w2 = 0.0;
  double bound = 0.0;
  double coupling_bound = 0.0;
};

struct TraceBoundResult {
  std::vector<TraceBoundInstance> instances;
  std::size_t violations = 0;           // w2 > bound + slack
  std::size_t coupling_violations = 0;  // w2 > coupling_bound + slack

  bool passed() const { return violations == 0 && coupling_violations == 0; }

  void write_csv(std::ostream& os) const {
    os << "n,dim,trial,family,w2,bound,coupling_bound\n";
    os.precision(17);
    for (const auto& r : instances)
      os << r.n << ',' << r.dim << ',' << r.trial << ',' << r.family << ',' << r.w2 << ',' << r.bound << ','
         << r.coupling_bound << '\n';
  }
};

/// Draws P_n and Q_n from zero-mean populations (uniform ball, or anisotropic
/// Gaussians with random per-axis scales) and checks the exact W2^2 against
/// the trace bound.
inline TraceBoundResult trace_bound_check(const std::vector<std::size_t>& n_grid, const std::vector<std::size_t>& dims,
                                     std::size_t trials, std::uint64_t seed) {
  for (auto n : n_grid)
    if (n < 5) throw Error("trace_bound_check: all n must be >= 5");
  TraceBoundResult out;
  for (std::size_t gi = 0; gi < n_grid.size(); ++gi)
    for (std::size_t di = 0; di < dims.size(); ++di)
      for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = n_grid[gi], d = dims[di];
        TraceBoundInstance r;
        r.n = n;
        r.dim = d;
        r.trial = t;
        PointSet a, b;
        if (t % 2 == 0) {
          r.family = "ball";
          a = sample_unit_ball(d, n, derive_seed(seed, gi, di, t, 0));
          b = sample_unit_ball(d, n, derive_seed(seed, gi, di, t, 1));
        } else {
          r.family = "gaussian";
          Rng rng(derive_seed(seed, gi, di, t, 2));
          std::uniform_real_distribution<double> scale(0.1, 2.0);
          std::vector<double> sa(d), sb(d);
          for (auto& s : sa) s = scale(rng);
          for (auto& s : sb) s = scale(rng);
          a = detail::gaussian_points(d, n, 1.0, derive_seed(seed, gi, di, t, 0));
          b = detail::gaussian_points(d, n, 1.0, derive_seed(seed, gi, di, t, 1));
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < d; ++k) {
              a[i][k] *= sa[k];
              b[i][k] *= sb[k];
            }
        }
        r.w2 = wasserstein_exact(a, b).estimate.value;
        r.bound = trace_bound(a, b);
        r.coupling_bound = mean_coupling_bound(a, b);
        if (r.w2 > r.bound + kInequalitySlack) ++out.violations;
        if (r.w2 > r.coupling_bound + kInequalitySlack) ++out.coupling_violations;
        out.instances.push_back(std::move(r));
      }
  return out;
}

// ---------------------------------------------------------------------------
// Batch-variation error

struct VarianceCheckConfig {
  std::size_t dim = 10;
  std::size_t n = 32;                 // batch size
  std::size_t population = 1000;
  std::size_t trials = 100;
  double step_scale = 0.1;            // |theta_k - theta_{k-1}|
  double noise = 0.5;                 // label noise of the least-squares population
  std::uint64_t seed = 0;
};

struct VarianceCheckResult {
  std::vector<double> shared;       // per-trial error, same batch at both parameters
  std::vector<double> independent;  // per-trial error, independent batches
  double mean_shared = 0.0;
  double mean_independent = 0.0;

  bool passed() const { return mean_shared <= mean_independent; }

  void write_csv(std::ostream& os) const {
    os << "trial,shared,independent\n";
    os.precision(17);
    for (std::size_t t = 0; t < shared.size(); ++t) os << t << ',' << shared[t] << ',' << independent[t] << '\n';
  }
};

/// Least-squares surrogate f_x(theta) = (x . theta - y)^2 / 2 on a fixed finite
/// population. Error of the gradient-variation estimate between theta_{k-1}
/// and theta_k, using one shared batch or two independent batches.
inline VarianceCheckResult variance_check(const VarianceCheckConfig& cfg) {
  if (cfg.trials < 100) throw Error("variance_check: need at least 100 trials");
  if (cfg.n == 0 || cfg.n > cfg.population) throw Error("variance_check: batch size must lie in [1, population]");
  if (cfg.step_scale < 0.0) throw Error("variance_check: step_scale must be non-negative");
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  const auto M = static_cast<Eigen::Index>(cfg.population);

  Rng rng(derive_seed(cfg.seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix X(M, d);
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index k = 0; k < d; ++k) X(i, k) = normal(rng);
  Eigen::VectorXd truth(d);
  for (Eigen::Index k = 0; k < d; ++k) truth(k) = normal(rng);
  Eigen::VectorXd y = X * truth;
  for (Eigen::Index i = 0; i < M; ++i) y(i) += cfg.noise * normal(rng);

  const auto grad = [&](const std::vector<std::size_t>& rows, const Eigen::VectorXd& theta) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
    for (auto r : rows) {
      const auto i = static_cast<Eigen::Index>(r);
      g += (X.row(i).dot(theta) - y(i)) * X.row(i).transpose();
    }
    return Eigen::VectorXd(g / static_cast<double>(rows.size()));
  };
  const auto full_grad = [&](const Eigen::VectorXd& theta) {
    return Eigen::VectorXd(X.transpose() * (X * theta - y) / static_cast<double>(M));
  };
  const auto draw_batch = [&](Rng& r) {
    std::vector<std::size_t> idx(cfg.population);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), r);
    idx.resize(cfg.n);
    return idx;
  };

  VarianceCheckResult out;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    Rng tr(derive_seed(cfg.seed, 1, t));
    Eigen::VectorXd prev(d), dir(d);
    for (Eigen::Index k = 0; k < d; ++k) prev(k) = truth(k) + normal(tr);
    for (Eigen::Index k = 0; k < d; ++k) dir(k) = normal(tr);
    const Eigen::VectorXd cur = prev + cfg.step_scale * dir.normalized();
    const Eigen::VectorXd true_var = full_grad(cur) - full_grad(prev);
    const auto s1 = draw_batch(tr);
    const auto s2 = draw_batch(tr);
    out.shared.push_back(((grad(s1, cur) - grad(s1, prev)) - true_var).norm());
    out.independent.push_back(((grad(s2, cur) - grad(s1, prev)) - true_var).norm());
  }
  out.mean_shared = detail::mean_of(out.shared);
  out.mean_independent = detail::mean_of(out.independent);
  return out;
}

// ---------------------------------------------------------------------------
// Per-region gap of encoded data against region priors

struct GapStudyConfig {
  std::size_t n = 100;  // points per region
  std::size_t trials = 5;
  std::size_t projections = 1000;
  std::uint64_t seed = 0;
};

struct GapStudyResult {
  std::vector<double> region_sw;        // mean over trials, per region
  std::vector<double> region_baseline;  // sw2 between two prior samples of the region
  double global_sw = 0.0;               // encoded N points vs N ball points
  double global_baseline = 0.0;         // two independent N-samples of the ball

  double mean_region_sw() const { return detail::mean_of(region_sw); }
  double mean_region_baseline() const { return detail::mean_of(region_baseline); }
  double mean_region_gap() const { return mean_region_sw() - mean_region_baseline(); }
  double global_gap() const { return global_sw - global_baseline; }

  void write_csv(std::ostream& os) const {
    os << "scope,region,sw2,baseline,gap\n";
    os.precision(17);
    for (std::size_t k = 0; k < region_sw.size(); ++k)
      os << "region," << k << ',' << region_sw[k] << ',' << region_baseline[k] << ','
         << region_sw[k] - region_baseline[k] << '\n';
    os << "global,," << global_sw << ',' << global_baseline << ',' << global_gap() << '\n';
  }
};

/// Gap study on already-encoded points: each trial draws N = n * m encoded
/// points, clusters them onto the generators by the least cost method and
/// compares every cluster with prior samples of its region.
inline GapStudyResult gap_study(const PointSet& encoded, const Tessellation& tess, const GapStudyConfig& cfg) {
  if (encoded.dim() != tess.dim()) throw DimensionError("gap_study: latent dimension does not match tessellation");
  if (cfg.trials == 0 || cfg.n == 0) throw Error("gap_study: trials and n must be positive");
  const std::size_t m = tess.region_count(), N = cfg.n * m;
  if (encoded.size() < N) throw Error("gap_study: fewer encoded points than n * m");

  GapStudyResult out;
  out.region_sw.assign(m, 0.0);
  out.region_baseline.assign(m, 0.0);
  const double inv = 1.0 / static_cast<double>(cfg.trials);
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    std::vector<std::size_t> rows(encoded.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Rng pick(derive_seed(cfg.seed, 0, t));
    std::shuffle(rows.begin(), rows.end(), pick);
    rows.resize(N);
    const PointSet z = encoded.gather(rows);
    const auto clusters = lcm_assign(z, tess.generators(), cfg.n).clusters(m);
    std::vector<double> sw(m), base(m);
    parallel_for(m, [&](std::size_t k) {
      const PointSet prior = sample_region(tess, k, cfg.n, derive_seed(cfg.seed, 1, t, k, 0));
      const PointSet prior2 = sample_region(tess, k, cfg.n, derive_seed(cfg.seed, 1, t, k, 1));
      sw[k] = sw2(z.gather(clusters[k]), prior, cfg.projections, derive_seed(cfg.seed, 2, t, k, 0)).value;
      base[k] = sw2(prior2, prior, cfg.projections, derive_seed(cfg.seed, 2, t, k, 1)).value;
    });
    for (std::size_t k = 0; k < m; ++k) {
      out.region_sw[k] += inv * sw[k];
      out.region_baseline[k] += inv * base[k];
    }
    const PointSet ball = sample_unit_ball(tess.dim(), N, derive_seed(cfg.seed, 3, t, 0));
    const PointSet ball2 = sample_unit_ball(tess.dim(), N, derive_seed(cfg.seed, 3, t, 1));
    out.global_sw += inv * sw2(z, ball, cfg.projections, derive_seed(cfg.seed, 4, t, 0)).value;
    out.global_baseline += inv * sw2(ball2, ball, cfg.projections, derive_seed(cfg.seed, 4, t, 1)).value;
  }
  return out;
}

/// Gap study of a trained model: encodes the dataset and studies the codes.
inline GapStudyResult gap_study(const AutoEncoderParams& model, const Dataset& data, const Tessellation& tess,
                                const GapStudyConfig& cfg) {
  if (model.latent_dim != tess.dim()) throw DimensionError("gap_study: model latent_dim does not match tessellation");
  return gap_study(encode(model, data.points), tess, cfg);
}

struct RegionCountRow {
  std::size_t m = 0;
  double mean_region_gap = 0.0;
};

/// Mean per-region gap of one set of codes under CVTs with increasing m.
inline std::vector<RegionCountRow> gap_vs_region_count(const PointSet& encoded, const std::vector<std::size_t>& m_grid,
                                                       const GapStudyConfig& cfg) {
  std::vector<RegionCountRow> rows;
  for (auto m : m_grid) {
    const auto tess = lloyd_cvt({.dim = encoded.dim(), .m = m, .seed = derive_seed(cfg.seed, 9, m)}).tessellation;
    rows.push_back({m, gap_study(encoded, tess, cfg).mean_region_gap()});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Paired training comparison

struct TrendStudyConfig {
  TrainConfig train;  // m, chunk size, epochs, estimator, ...
  std::size_t modes = 8;
  double ring_radius = 1.0;
  double ring_sigma = 0.1;
  std::size_t dataset_size = 10000;
  std::size_t repetitions = 10;
  GapStudyConfig gap;
};

struct TrendRow {
  std::uint64_t seed = 0;
  double baseline_gap = 0.0;
  double twae_gap = 0.0;
  double regularized_gap = 0.0;
};

struct TrendStudyResult {
  std::vector<TrendRow> rows;

  double twae_win_rate() const {
    std::size_t w = 0;
    for (const auto& r : rows) w += r.twae_gap < r.baseline_gap;
    return rows.empty() ? 0.0 : static_cast<double>(w) / static_cast<double>(rows.size());
  }
  double regularized_win_rate() const {
    std::size_t w = 0;
    for (const auto& r : rows) w += r.regularized_gap < r.twae_gap;
    return rows.empty() ? 0.0 : static_cast<double>(w) / static_cast<double>(rows.size());
  }

  void write_csv(std::ostream& os) const {
    os << "seed,baseline_gap,twae_gap,regularized_gap\n";
    os.precision(17);
    for (const auto& r : rows)
      os << r.seed << ',' << r.baseline_gap << ',' << r.twae_gap << ',' << r.regularized_gap << '\n';
  }
};

/// Trains the baseline, plain and regularized tessellated models on the same
/// ring dataset and seed, then compares their mean per-region gaps.
inline TrendStudyResult trend_study(const TrendStudyConfig& cfg) {
  TrendStudyResult out;
  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    const std::uint64_t s = derive_seed(cfg.train.seed, r);
    TrainConfig tc = cfg.train;
    tc.seed = s;
    const Dataset data = gen_gaussian_ring(cfg.modes, cfg.ring_radius, cfg.ring_sigma, cfg.dataset_size,
                                           derive_seed(s, 0xda7a));
    const Tessellation tess = make_tessellation(tc);
    GapStudyConfig gc = cfg.gap;
    gc.seed = derive_seed(s, 0x9a9);
    TrendRow row{s};
    row.baseline_gap = gap_study(train_baseline(tc, data).params, data, tess, gc).mean_region_gap();
    row.twae_gap = gap_study(train_twae(tc, data, tess).params, data, tess, gc).mean_region_gap();
    row.regularized_gap = gap_study(train_twae_regularized(tc, data, tess).params, data, tess, gc).mean_region_gap();
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace twae
