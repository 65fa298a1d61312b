#pragma once

// Tessellations of the unit ball: centroidal Voronoi (Lloyd / streaming k-means)
// and the 241-region E8 scheme (origin plus the 240 roots on one shell).

#include <array>
#include <bit>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

#include "json.hpp"
#include "twae/common.hpp"

namespace twae {

class DegenerateRegionError : public Error {
 public:
  using Error::Error;
};

enum class TessellationKind { CVT, E8 };

inline std::string to_string(TessellationKind k) { return k == TessellationKind::CVT ? "CVT" : "E8"; }

inline TessellationKind tessellation_kind_from_string(const std::string& s) {
  if (s == "CVT" || s == "cvt") return TessellationKind::CVT;
  if (s == "E8" || s == "e8") return TessellationKind::E8;
  throw Error("unknown tessellation kind: " + s);
}

inline constexpr std::size_t kE8RegionCount = 241;

class Tessellation {
 public:
  Tessellation(TessellationKind kind, PointSet generators, std::optional<double> shell_radius = std::nullopt)
      : kind_(kind), generators_(std::move(generators)), shell_radius_(shell_radius) {
    validate();
  }

  TessellationKind kind() const { return kind_; }
  std::size_t dim() const { return generators_.dim(); }
  std::size_t region_count() const { return generators_.size(); }
  const PointSet& generators() const { return generators_; }
  std::optional<double> shell_radius() const { return shell_radius_; }

 private:
  void validate() const {
    if (generators_.empty()) throw Error("Tessellation: no generators");
    if (!generators_.all_finite()) throw Error("Tessellation: non-finite generator");
    for (std::size_t i = 0; i < generators_.size(); ++i) {
      if (squared_norm(generators_[i]) > 1.0 + 1e-12) throw Error("Tessellation: generator outside the unit ball");
      for (std::size_t j = 0; j < i; ++j)
        if (squared_distance(generators_[i], generators_[j]) == 0.0)
          throw Error("Tessellation: duplicate generators " + std::to_string(j) + " and " + std::to_string(i));
    }
    if (kind_ == TessellationKind::E8 && (dim() != 8 || region_count() != kE8RegionCount))
      throw Error("Tessellation: E8 kind requires dim 8 and 241 generators");
  }

  TessellationKind kind_;
  PointSet generators_;
  std::optional<double> shell_radius_;
};

/// Draws one point uniformly from the closed unit ball: normalized Gaussian
/// direction times U^(1/d).
inline void draw_ball_point(Rng& rng, std::span<double> out) {
  random_unit_vector(rng, out);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double r = std::pow(unif(rng), 1.0 / static_cast<double>(out.size()));
  for (auto& v : out) v *= r;
}

inline PointSet sample_unit_ball(std::size_t dim, std::size_t count, std::uint64_t seed) {
  if (dim == 0) throw DimensionError("sample_unit_ball: dim must be positive");
  Rng rng(seed);
  PointSet out(dim, count);
  for (std::size_t i = 0; i < count; ++i) draw_ball_point(rng, out[i]);
  return out;
}

/// Index of the nearest generator; ties go to the lowest index.
inline std::size_t nearest_index(const PointSet& generators, std::span<const double> point) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < generators.size(); ++j) {
    const double d = squared_distance(generators[j], point);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

inline std::size_t region_of(const Tessellation& tess, std::span<const double> point) {
  if (point.size() != tess.dim()) throw DimensionError("region_of: dimension mismatch");
  return nearest_index(tess.generators(), point);
}

inline std::vector<std::size_t> regions_of(const Tessellation& tess, const PointSet& points) {
  if (points.dim() != tess.dim()) throw DimensionError("regions_of: dimension mismatch");
  std::vector<std::size_t> out(points.size());
  parallel_for(points.size(), [&](std::size_t i) { out[i] = nearest_index(tess.generators(), points[i]); });
  return out;
}

// ---------------------------------------------------------------------------
// CVT construction

struct LloydOptions {
  std::size_t dim = 2;
  std::size_t m = 16;
  std::size_t mc_samples_per_iter = 0;  // 0 selects 200 * m * dim
  std::size_t max_iters = 200;
  double energy_tol = 1e-4;
  std::uint64_t seed = 0;
};

struct LloydResult {
  Tessellation tessellation;
  std::vector<double> energy_history;  // energy of the generators entering each iteration, on that iteration's pool
  std::size_t iterations = 0;
  std::size_t reseed_events = 0;
  bool converged = false;
};

inline LloydResult lloyd_cvt(const LloydOptions& opt) {
  if (opt.dim == 0 || opt.m == 0) throw Error("lloyd_cvt: dim and m must be positive");
  const std::size_t pool_size = opt.mc_samples_per_iter ? opt.mc_samples_per_iter : 200 * opt.m * opt.dim;
  if (pool_size < 100 * opt.m) throw Error("lloyd_cvt: mc_samples_per_iter must be at least 100*m");

  PointSet gens = sample_unit_ball(opt.dim, opt.m, derive_seed(opt.seed, 0));
  std::vector<double> history;
  std::size_t reseeds = 0;
  std::size_t it = 0;
  bool converged = false;
  std::vector<std::size_t> owner(pool_size);
  std::vector<double> dist(pool_size);

  PointSet prev_gens = gens;
  for (; it < opt.max_iters; ++it) {
    const PointSet pool = sample_unit_ball(opt.dim, pool_size, derive_seed(opt.seed, 1, it));
    const PointSet entering = gens;
    parallel_for(pool_size, [&](std::size_t p) {
      owner[p] = nearest_index(gens, pool[p]);
      dist[p] = squared_distance(gens[owner[p]], pool[p]);
    });

    PointSet sums(opt.dim, opt.m);
    std::vector<std::size_t> counts(opt.m, 0);
    double energy = 0.0;
    for (std::size_t p = 0; p < pool_size; ++p) {
      energy += dist[p];
      auto s = sums[owner[p]];
      auto x = pool[p];
      for (std::size_t k = 0; k < opt.dim; ++k) s[k] += x[k];
      ++counts[owner[p]];
    }
    energy /= static_cast<double>(pool_size);
    history.push_back(energy);

    Rng reseed_rng(derive_seed(opt.seed, 2, it));
    std::uniform_int_distribution<std::size_t> pick(0, pool_size - 1);
    for (std::size_t j = 0; j < opt.m; ++j) {
      auto g = gens[j];
      if (counts[j] == 0) {
        auto src = pool[pick(reseed_rng)];
        std::copy(src.begin(), src.end(), g.begin());
        ++reseeds;
        continue;
      }
      auto s = sums[j];
      for (std::size_t k = 0; k < opt.dim; ++k) g[k] = s[k] / static_cast<double>(counts[j]);
    }

    if (it > 0) {
      // Previous generators scored on the same pool, so the decrease is free of pool-to-pool noise.
      std::vector<double> prev_dist(pool_size);
      parallel_for(pool_size, [&](std::size_t p) {
        prev_dist[p] = squared_distance(prev_gens[nearest_index(prev_gens, pool[p])], pool[p]);
      });
      const double prev = std::accumulate(prev_dist.begin(), prev_dist.end(), 0.0) / static_cast<double>(pool_size);
      if (prev <= 0.0 || (prev - energy) / prev < opt.energy_tol) {
        converged = true;
        ++it;
        break;
      }
    }
    prev_gens = entering;
  }
  return {Tessellation(TessellationKind::CVT, std::move(gens)), std::move(history), it, reseeds, converged};
}

/// Streaming k-means (probabilistic Lloyd): each draw moves its nearest generator
/// to the running mean of the draws it has captured; the initial point counts as one.
inline Tessellation kmeans_cvt(std::size_t dim, std::size_t m, std::size_t total_draws, std::uint64_t seed) {
  if (dim == 0 || m == 0) throw Error("kmeans_cvt: dim and m must be positive");
  if (total_draws < 1000 * m) throw Error("kmeans_cvt: total_draws must be at least 1000*m");
  PointSet gens = sample_unit_ball(dim, m, derive_seed(seed, 0));
  std::vector<double> weight(m, 1.0);
  Rng rng(derive_seed(seed, 1));
  std::vector<double> y(dim);
  for (std::size_t t = 0; t < total_draws; ++t) {
    draw_ball_point(rng, y);
    const std::size_t i = nearest_index(gens, y);
    auto z = gens[i];
    const double j = weight[i];
    for (std::size_t k = 0; k < dim; ++k) z[k] = (j * z[k] + y[k]) / (j + 1.0);
    weight[i] = j + 1.0;
  }
  return Tessellation(TessellationKind::CVT, std::move(gens));
}

/// Monte Carlo estimate of sum_i int_{V_i} rho |y - z_i|^2 for rho uniform on the ball.
inline double cvt_energy(const Tessellation& tess, std::size_t mc_samples, std::uint64_t seed) {
  if (mc_samples == 0) throw Error("cvt_energy: mc_samples must be positive");
  const PointSet pool = sample_unit_ball(tess.dim(), mc_samples, seed);
  std::vector<double> d(mc_samples);
  parallel_for(mc_samples, [&](std::size_t p) {
    d[p] = squared_distance(tess.generators()[nearest_index(tess.generators(), pool[p])], pool[p]);
  });
  double s = 0.0;
  for (double v : d) s += v;
  return s / static_cast<double>(mc_samples);
}

// ---------------------------------------------------------------------------
// E8

/// The 240 minimal vectors of E8 in lexicographic order: 112 of shape (+-1,+-1,0^6)
/// and 128 of shape (+-1/2)^8 with an even number of minus signs.
inline PointSet e8_roots() {
  std::vector<std::array<double, 8>> roots;
  roots.reserve(240);
  for (int i = 0; i < 8; ++i)
    for (int j = i + 1; j < 8; ++j)
      for (double si : {-1.0, 1.0})
        for (double sj : {-1.0, 1.0}) {
          std::array<double, 8> r{};
          r[i] = si;
          r[j] = sj;
          roots.push_back(r);
        }
  for (unsigned mask = 0; mask < 256; ++mask) {
    if (std::popcount(mask) % 2 != 0) continue;
    std::array<double, 8> r{};
    for (int k = 0; k < 8; ++k) r[k] = (mask >> k) & 1u ? -0.5 : 0.5;
    roots.push_back(r);
  }
  std::sort(roots.begin(), roots.end());
  PointSet out(8, roots.size());
  for (std::size_t i = 0; i < roots.size(); ++i) std::copy(roots[i].begin(), roots[i].end(), out[i].begin());
  return out;
}

struct E8Options {
  std::size_t calibration_samples = 2'000'000;
  double tolerance = 0.01;  // relative, on the centre region's volume fraction
  std::uint64_t seed = 0;
};

/// E8 generators for a given shell radius: the origin first, then the roots
/// rescaled to norm `radius`.
inline PointSet e8_generators(double radius) {
  const PointSet roots = e8_roots();
  PointSet gens(8, kE8RegionCount);
  const double scale = radius / std::sqrt(2.0);
  for (std::size_t i = 0; i < roots.size(); ++i)
    for (std::size_t k = 0; k < 8; ++k) gens[i + 1][k] = roots[i][k] * scale;
  return gens;
}

/// Builds the 241-region E8 tessellation, choosing the shell radius by bisection
/// so that the centre region holds 1/241 of the ball's volume.
///
/// A point x lies in the centre region for radius r iff x.u <= r/2 for every unit
/// root u, so each calibration sample contributes a threshold 2 max_u x.u and the
/// volume fraction at r is the share of thresholds <= r.
inline Tessellation e8_tessellation(const E8Options& opt = {}) {
  if (opt.calibration_samples < 1'000'000) throw Error("e8_tessellation: need at least 1e6 calibration samples");
  const PointSet roots = e8_roots();
  RowMatrix units = roots.matrix() / std::sqrt(2.0);
  const PointSet pool = sample_unit_ball(8, opt.calibration_samples, opt.seed);

  std::vector<double> threshold(pool.size());
  constexpr std::size_t kBlock = 4096;
  const std::size_t blocks = (pool.size() + kBlock - 1) / kBlock;
  parallel_for(blocks, [&](std::size_t b) {
    const auto lo = static_cast<Eigen::Index>(b * kBlock);
    const auto rows = std::min<Eigen::Index>(kBlock, static_cast<Eigen::Index>(pool.size()) - lo);
    const RowMatrix proj = pool.matrix().middleRows(lo, rows) * units.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) threshold[lo + r] = 2.0 * proj.row(r).maxCoeff();
  });

  const double target = 1.0 / static_cast<double>(kE8RegionCount);
  const auto fraction = [&](double r) {
    std::size_t c = 0;
    for (double t : threshold) c += t <= r;
    return static_cast<double>(c) / static_cast<double>(threshold.size());
  };
  double lo = 0.0, hi = 1.0;
  const double f_lo = fraction(lo), f_hi = fraction(hi);
  if (!(f_lo < target && f_hi >= target)) {
    std::ostringstream os;
    os << "e8_tessellation: bisection failed to bracket 1/241; centre fraction ranges over [" << f_lo << ", " << f_hi
       << "] for radius in [0, 1]";
    throw Error(os.str());
  }
  for (int iter = 0; iter < 80; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (fraction(mid) < target ? lo : hi) = mid;
  }
  const double achieved = fraction(hi);
  if (std::abs(achieved - target) > opt.tolerance * target) {
    std::ostringstream os;
    os << "e8_tessellation: centre fraction " << achieved << " not within tolerance of 1/241";
    throw Error(os.str());
  }
  return Tessellation(TessellationKind::E8, e8_generators(hi), hi);
}

/// Rejection sampling from one region of the ball.
inline PointSet sample_region(const Tessellation& tess, std::size_t region_index, std::size_t count,
                              std::uint64_t seed) {
  if (region_index >= tess.region_count()) throw Error("sample_region: region index out of range");
  constexpr std::size_t kWindow = 1'000'000;
  const double min_rate = 1.0 / (50.0 * static_cast<double>(tess.region_count()));
  Rng rng(seed);
  PointSet out(tess.dim(), count);
  std::vector<double> y(tess.dim());
  std::size_t accepted = 0, window_draws = 0, window_accepts = 0;
  while (accepted < count) {
    draw_ball_point(rng, y);
    ++window_draws;
    if (nearest_index(tess.generators(), y) == region_index) {
      std::copy(y.begin(), y.end(), out[accepted].begin());
      ++accepted;
      ++window_accepts;
    }
    if (window_draws == kWindow) {
      if (static_cast<double>(window_accepts) / kWindow < min_rate)
        throw DegenerateRegionError("sample_region: region " + std::to_string(region_index) +
                                    " accepted " + std::to_string(window_accepts) + " of 1e6 draws");
      window_draws = window_accepts = 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const Tessellation& t) {
  nlohmann::json j;
  j["dim"] = t.dim();
  j["kind"] = to_string(t.kind());
  auto& g = j["generators"] = nlohmann::json::array();
  for (std::size_t i = 0; i < t.region_count(); ++i) {
    auto row = t.generators()[i];
    g.push_back(std::vector<double>(row.begin(), row.end()));
  }
  if (t.shell_radius()) j["shell_radius"] = *t.shell_radius();
  return j;
}

inline Tessellation tessellation_from_json(const nlohmann::json& j) {
  const auto dim = j.at("dim").get<std::size_t>();
  PointSet gens(dim, 0);
  for (const auto& row : j.at("generators")) gens.push_back(row.get<std::vector<double>>());
  std::optional<double> radius;
  if (j.contains("shell_radius")) radius = j.at("shell_radius").get<double>();
  return Tessellation(tessellation_kind_from_string(j.at("kind").get<std::string>()), std::move(gens), radius);
}

}  // namespace twae
