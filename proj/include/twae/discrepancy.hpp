#pragma once

// Discrepancies between equal-size point sets, all reported as squared
// distances: exact W2 by assignment, 1-D sorted W2, sliced (SW), max-sliced,
// circular generalized sliced (GSW) and the Gaussian closed form (GW).

#include <numeric>
#include <optional>
#include <string>

#include "json.hpp"
#include "twae/assignment.hpp"
#include "twae/common.hpp"

namespace twae {

enum class Estimator { EXACT, SW, MAXSW, GSW, GW };

inline std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::EXACT: return "EXACT";
    case Estimator::SW: return "SW";
    case Estimator::MAXSW: return "MAXSW";
    case Estimator::GSW: return "GSW";
    case Estimator::GW: return "GW";
  }
  return "?";
}

inline Estimator estimator_from_string(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (s == "EXACT") return Estimator::EXACT;
  if (s == "SW") return Estimator::SW;
  if (s == "MAXSW" || s == "MAX-SW") return Estimator::MAXSW;
  if (s == "GSW") return Estimator::GSW;
  if (s == "GW") return Estimator::GW;
  throw Error("unknown estimator: " + s);
}

struct DiscrepancyEstimate {
  double value = 0.0;
  Estimator estimator = Estimator::SW;
  std::size_t projections_used = 0;
};

inline nlohmann::json to_json(const DiscrepancyEstimate& e) {
  return {{"estimator", to_string(e.estimator)}, {"value", e.value}, {"projections_used", e.projections_used}};
}

/// Per-point gradient of a discrepancy with respect to the first point set.
using GradientBuffer = PointSet;

// ---------------------------------------------------------------------------
// Exact and 1-D

struct ExactResult {
  DiscrepancyEstimate estimate;
  std::vector<std::size_t> matching;  // a_i is matched with b_{matching[i]}
};

inline constexpr std::size_t kExactMaxSize = 1024;

inline RowMatrix squared_distance_matrix(const PointSet& a, const PointSet& b) {
  RowMatrix c(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = squared_distance(a[i], b[j]);
  return c;
}

inline ExactResult wasserstein_exact(const PointSet& a, const PointSet& b) {
  require_same_shape(a, b, "wasserstein_exact");
  if (a.size() > kExactMaxSize) throw Error("wasserstein_exact: n exceeds 1024");
  if (a.empty()) return {{0.0, Estimator::EXACT, 0}, {}};
  auto sol = solve_assignment(squared_distance_matrix(a, b));
  return {{sol.cost / static_cast<double>(a.size()), Estimator::EXACT, 0}, std::move(sol.row_to_col)};
}

/// Indices sorted by (value, index).
inline std::vector<std::size_t> stable_order(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
    return values[x] < values[y] || (values[x] == values[y] && x < y);
  });
  return idx;
}

inline double w2_1d_sorted(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("w2_1d_sorted: length mismatch");
  if (a.empty()) return 0.0;
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double s = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) s += (sa[i] - sb[i]) * (sa[i] - sb[i]);
  return s / static_cast<double>(sa.size());
}

// ---------------------------------------------------------------------------
// Sliced estimators

struct EstimatorConfig {
  std::size_t projections = 1000;
  std::size_t maxsw_iters = 10;
  double maxsw_step = 0.1;
  double gsw_pivot_radius = 0.0;  // <= 0 selects 2 * max data norm
};

namespace detail {

// Sorted-matching accumulation for one slice. Features are the 1-D values of each
// point; on return coef[i] = fa_i - fb_{pi(i)} for the stable sorted matching pi.
inline double slice_w2(std::span<const double> fa, std::span<const double> fb, std::span<double> coef) {
  const auto oa = stable_order(fa);
  const auto ob = stable_order(fb);
  double s = 0.0;
  for (std::size_t k = 0; k < oa.size(); ++k) {
    const double diff = fa[oa[k]] - fb[ob[k]];
    coef[oa[k]] = diff;
    s += diff * diff;
  }
  return s / static_cast<double>(fa.size());
}

inline constexpr std::size_t kDirectionBlock = 64;

}  // namespace detail

/// Shared value (and optional gradient w.r.t. A) of the linear sliced estimator
/// over a fixed set of unit directions.
inline double sliced_w2(const PointSet& a, const PointSet& b, const PointSet& dirs, GradientBuffer* grad = nullptr) {
  require_same_shape(a, b, "sliced_w2");
  if (dirs.dim() != a.dim()) throw DimensionError("sliced_w2: direction dimension mismatch");
  const std::size_t n = a.size(), L = dirs.size();
  if (n == 0 || L == 0) throw Error("sliced_w2: empty input");
  std::vector<double> per_slice(L);
  if (grad) *grad = GradientBuffer(a.dim(), n);

  for (std::size_t lo = 0; lo < L; lo += detail::kDirectionBlock) {
    const auto rows = static_cast<Eigen::Index>(std::min(detail::kDirectionBlock, L - lo));
    const auto W = dirs.matrix().middleRows(static_cast<Eigen::Index>(lo), rows);
    const RowMatrix pa = W * a.matrix().transpose();
    const RowMatrix pb = W * b.matrix().transpose();
    RowMatrix coef;
    if (grad) coef.resize(rows, static_cast<Eigen::Index>(n));
    parallel_for(static_cast<std::size_t>(rows), [&](std::size_t r) {
      const auto ri = static_cast<Eigen::Index>(r);
      std::span<const double> fa(pa.row(ri).data(), n), fb(pb.row(ri).data(), n);
      if (grad) {
        per_slice[lo + r] = detail::slice_w2(fa, fb, std::span<double>(coef.row(ri).data(), n));
      } else {
        per_slice[lo + r] = w2_1d_sorted(fa, fb);
      }
    });
    if (grad) grad->matrix() += (2.0 / static_cast<double>(n * L)) * (coef.transpose() * W);
  }
  double s = 0.0;
  for (double v : per_slice) s += v;
  return s / static_cast<double>(L);
}

inline DiscrepancyEstimate sw2(const PointSet& a, const PointSet& b, std::size_t projections, std::uint64_t seed) {
  require_same_shape(a, b, "sw2");
  if (projections == 0) throw Error("sw2: need at least one projection");
  const double v = sliced_w2(a, b, random_directions(a.dim(), projections, seed));
  return {v, Estimator::SW, projections};
}

inline GradientBuffer sw2_gradient(const PointSet& a, const PointSet& b, std::size_t projections, std::uint64_t seed) {
  require_same_shape(a, b, "sw2_gradient");
  if (projections == 0) throw Error("sw2_gradient: need at least one projection");
  GradientBuffer g;
  sliced_w2(a, b, random_directions(a.dim(), projections, seed), &g);
  return g;
}

struct MaxSwResult {
  DiscrepancyEstimate estimate;
  std::vector<double> direction;
};

/// Max-sliced estimate: projected gradient ascent over the unit sphere, started
/// from the first direction of `seed`'s stream, keeping the best direction seen.
inline MaxSwResult max_sw2(const PointSet& a, const PointSet& b, std::size_t ascent_iters, double step_size,
                           std::uint64_t seed) {
  require_same_shape(a, b, "max_sw2");
  if (ascent_iters == 0) throw Error("max_sw2: ascent_iters must be positive");
  const std::size_t n = a.size(), d = a.dim();
  if (n == 0) throw Error("max_sw2: empty input");
  const PointSet start = random_directions(d, 1, seed);
  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(start[0].data(), static_cast<Eigen::Index>(d));

  double best = -1.0;
  Eigen::VectorXd best_w = w;
  for (std::size_t it = 0; it <= ascent_iters; ++it) {
    const Eigen::VectorXd pa = a.matrix() * w;
    const Eigen::VectorXd pb = b.matrix() * w;
    const auto oa = stable_order({pa.data(), n});
    const auto ob = stable_order({pb.data(), n});
    double value = 0.0;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = static_cast<Eigen::Index>(oa[k]), j = static_cast<Eigen::Index>(ob[k]);
      const double r = pa[i] - pb[j];
      value += r * r;
      g += r * (a.matrix().row(i) - b.matrix().row(j)).transpose();
    }
    value /= static_cast<double>(n);
    if (value > best) {
      best = value;
      best_w = w;
    }
    if (it == ascent_iters) break;
    w += step_size * (2.0 / static_cast<double>(n)) * g;
    const double nrm = w.norm();
    if (nrm == 0.0 || !std::isfinite(nrm)) break;
    w /= nrm;
  }
  return {{best, Estimator::MAXSW, 1}, std::vector<double>(best_w.data(), best_w.data() + d)};
}

/// Gradient of the max-sliced value w.r.t. A at a fixed maximizing direction.
inline GradientBuffer max_sw2_gradient(const PointSet& a, const PointSet& b, std::span<const double> direction) {
  require_same_shape(a, b, "max_sw2_gradient");
  PointSet dirs(a.dim(), std::vector<double>(direction.begin(), direction.end()));
  GradientBuffer g;
  sliced_w2(a, b, dirs, &g);
  return g;
}

inline double default_pivot_radius(const PointSet& a, const PointSet& b) {
  double r2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r2 = std::max(r2, squared_norm(a[i]));
  for (std::size_t i = 0; i < b.size(); ++i) r2 = std::max(r2, squared_norm(b[i]));
  return r2 > 0.0 ? 2.0 * std::sqrt(r2) : 1.0;
}

namespace detail {

// Circular features |x - R theta| for every (direction, point), L x n.
inline RowMatrix circular_features(const PointSet& x, const PointSet& dirs, double radius) {
  RowMatrix f(dirs.size(), x.size());
  for (std::size_t l = 0; l < dirs.size(); ++l) {
    auto th = dirs[l];
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto p = x[i];
      double s = 0.0;
      for (std::size_t k = 0; k < x.dim(); ++k) {
        const double t = p[k] - radius * th[k];
        s += t * t;
      }
      f(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(i)) = std::sqrt(s);
    }
  }
  return f;
}

inline double circular_w2(const PointSet& a, const PointSet& b, const PointSet& dirs, double radius,
                          GradientBuffer* grad) {
  const std::size_t n = a.size(), L = dirs.size();
  const RowMatrix fa = circular_features(a, dirs, radius);
  const RowMatrix fb = circular_features(b, dirs, radius);
  RowMatrix coef(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(n));
  std::vector<double> per_slice(L);
  parallel_for(L, [&](std::size_t l) {
    const auto li = static_cast<Eigen::Index>(l);
    per_slice[l] = slice_w2({fa.row(li).data(), n}, {fb.row(li).data(), n}, {coef.row(li).data(), n});
  });
  if (grad) {
    // d|a - R th|/da = (a - R th) / |a - R th|
    RowMatrix scaled = coef.cwiseQuotient(fa.cwiseMax(1e-300)) * (2.0 / static_cast<double>(n * L));
    const Eigen::VectorXd colsum = scaled.colwise().sum().transpose();
    RowMatrix g = colsum.asDiagonal() * a.matrix();
    g -= radius * (scaled.transpose() * dirs.matrix());
    *grad = PointSet::from_matrix(g);
  }
  double s = 0.0;
  for (double v : per_slice) s += v;
  return s / static_cast<double>(L);
}

}  // namespace detail

/// Generalized sliced estimate with circular features g(x) = |x - R theta|.
inline DiscrepancyEstimate gsw2_circular(const PointSet& a, const PointSet& b, std::size_t projections,
                                         double pivot_radius, std::uint64_t seed) {
  require_same_shape(a, b, "gsw2_circular");
  if (!(pivot_radius > 0.0)) throw Error("gsw2_circular: pivot radius must be positive");
  if (projections == 0) throw Error("gsw2_circular: need at least one projection");
  const double v = detail::circular_w2(a, b, random_directions(a.dim(), projections, seed), pivot_radius, nullptr);
  return {v, Estimator::GSW, projections};
}

inline GradientBuffer gsw2_circular_gradient(const PointSet& a, const PointSet& b, std::size_t projections,
                                             double pivot_radius, std::uint64_t seed) {
  require_same_shape(a, b, "gsw2_circular_gradient");
  GradientBuffer g;
  detail::circular_w2(a, b, random_directions(a.dim(), projections, seed), pivot_radius, &g);
  return g;
}

// ---------------------------------------------------------------------------
// Gaussian closed form

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // unbiased
};

inline Moments empirical_moments(const PointSet& a) {
  if (a.size() < 2) throw Error("empirical_moments: need at least two points");
  Moments m;
  m.mean = a.matrix().colwise().mean().transpose();
  const RowMatrix centered = a.matrix().rowwise() - m.mean.transpose();
  m.cov = (centered.transpose() * centered) / static_cast<double>(a.size() - 1);
  return m;
}

/// Trace of the unbiased empirical covariance.
inline double covariance_trace(const PointSet& a) {
  const Eigen::VectorXd mean = a.matrix().colwise().mean().transpose();
  const RowMatrix centered = a.matrix().rowwise() - mean.transpose();
  return centered.squaredNorm() / static_cast<double>(a.size() - 1);
}

namespace detail {

inline Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sym_eig(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success || !es.eigenvalues().allFinite())
    throw NumericalError("symmetric eigendecomposition failed (non-finite eigenvalues)");
  return es;
}

inline Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
  const auto es = sym_eig(m);
  const Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

inline DiscrepancyEstimate gw2(const PointSet& a, const PointSet& b) {
  if (a.dim() != b.dim()) throw DimensionError("gw2: dimension mismatch");
  if (a.size() < 2 || b.size() < 2) throw Error("gw2: covariance needs at least two points per set");
  const Moments ma = empirical_moments(a), mb = empirical_moments(b);
  const Eigen::MatrixXd s2h = detail::sym_sqrt(mb.cov);
  const auto inner = detail::sym_eig(s2h * ma.cov * s2h);
  const double cross = inner.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double v = (ma.mean - mb.mean).squaredNorm() + ma.cov.trace() + mb.cov.trace() - 2.0 * cross;
  return {std::max(0.0, v), Estimator::GW, 0};
}

/// Per-point gradient of gw2 w.r.t. A, chained through the empirical mean and
/// unbiased covariance of A.
inline GradientBuffer gw2_gradient(const PointSet& a, const PointSet& b) {
  if (a.dim() != b.dim()) throw DimensionError("gw2_gradient: dimension mismatch");
  if (a.size() < 2 || b.size() < 2) throw Error("gw2_gradient: covariance needs at least two points per set");
  const auto d = static_cast<Eigen::Index>(a.dim());
  const Moments ma = empirical_moments(a);
  Moments mb = empirical_moments(b);

  const double eps = 1e-8 * mb.cov.trace() / static_cast<double>(d);
  if (detail::sym_eig(mb.cov).eigenvalues().minCoeff() < eps) mb.cov += eps * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd s2h = detail::sym_sqrt(mb.cov);
  const auto inner = detail::sym_eig(s2h * ma.cov * s2h);
  const Eigen::VectorXd lam = inner.eigenvalues();
  if (!(lam.minCoeff() > 1e-14 * std::max(lam.maxCoeff(), 1e-300)))
    throw NumericalError("gw2_gradient: singular inner matrix after regularization");
  const Eigen::MatrixXd inv_sqrt =
      inner.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal() * inner.eigenvectors().transpose();
  const Eigen::MatrixXd dcov = Eigen::MatrixXd::Identity(d, d) - s2h * inv_sqrt * s2h;

  const auto n = static_cast<double>(a.size());
  const RowMatrix centered = a.matrix().rowwise() - ma.mean.transpose();
  RowMatrix g = (2.0 / (n - 1.0)) * (centered * dcov);  // dcov is symmetric
  g.rowwise() += ((2.0 / n) * (ma.mean - mb.mean)).transpose();
  return PointSet::from_matrix(g);
}

// ---------------------------------------------------------------------------
// Dispatch used by the training loss.

struct LatentTerm {
  double value = 0.0;
  GradientBuffer gradient;  // w.r.t. the encoded set
};

inline LatentTerm latent_discrepancy(const PointSet& encoded, const PointSet& prior, Estimator estimator,
                                     const EstimatorConfig& cfg, std::uint64_t seed) {
  require_same_shape(encoded, prior, "latent_discrepancy");
  LatentTerm out;
  switch (estimator) {
    case Estimator::SW:
      out.value = sliced_w2(encoded, prior, random_directions(encoded.dim(), cfg.projections, seed), &out.gradient);
      break;
    case Estimator::MAXSW: {
      const auto r = max_sw2(encoded, prior, cfg.maxsw_iters, cfg.maxsw_step, seed);
      out.value = r.estimate.value;
      out.gradient = max_sw2_gradient(encoded, prior, r.direction);
      break;
    }
    case Estimator::GSW: {
      const double radius = cfg.gsw_pivot_radius > 0.0 ? cfg.gsw_pivot_radius : default_pivot_radius(encoded, prior);
      out.value = detail::circular_w2(encoded, prior, random_directions(encoded.dim(), cfg.projections, seed), radius,
                                      &out.gradient);
      break;
    }
    case Estimator::GW:
      out.value = gw2(encoded, prior).value;
      out.gradient = gw2_gradient(encoded, prior);
      break;
    case Estimator::EXACT:
      throw Error("latent_discrepancy: EXACT is not a training estimator");
  }
  return out;
}

}  // namespace twae
