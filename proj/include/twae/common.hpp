#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace twae {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

using Rng = std::mt19937_64;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// splitmix64 finalizer; used to derive independent sub-streams from one seed.
inline constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename... Keys>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Keys... keys) {
  std::uint64_t s = mix64(seed);
  ((s = mix64(s ^ mix64(static_cast<std::uint64_t>(keys) + 0x632be59bd9b4e019ULL))), ...);
  return s;
}

/// Row-major collection of `size()` points in R^dim.
class PointSet {
 public:
  PointSet() = default;
  PointSet(std::size_t dim, std::size_t count) : dim_(dim), data_(dim * count, 0.0) { check_dim(); }
  PointSet(std::size_t dim, std::vector<double> data) : dim_(dim), data_(std::move(data)) {
    check_dim();
    if (data_.size() % dim_ != 0) throw DimensionError("PointSet: data length is not a multiple of dim");
  }
  PointSet(std::initializer_list<std::initializer_list<double>> rows) {
    for (const auto& r : rows) {
      if (dim_ == 0) dim_ = r.size();
      if (r.size() != dim_ || dim_ == 0) throw DimensionError("PointSet: ragged rows");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static PointSet from_scalars(std::span<const double> xs) {
    return PointSet(1, std::vector<double>(xs.begin(), xs.end()));
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const { return data_.empty(); }

  std::span<double> operator[](std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> operator[](std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& raw() const { return data_; }

  void push_back(std::span<const double> p) {
    if (dim_ == 0) dim_ = p.size();
    if (p.size() != dim_) throw DimensionError("PointSet::push_back: dimension mismatch");
    data_.insert(data_.end(), p.begin(), p.end());
  }
  void reserve(std::size_t count) { data_.reserve(count * dim_); }

  Eigen::Map<RowMatrix> matrix() {
    return {data_.data(), static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim_)};
  }
  Eigen::Map<const RowMatrix> matrix() const {
    return {data_.data(), static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim_)};
  }

  static PointSet from_matrix(const RowMatrix& m) {
    PointSet p(static_cast<std::size_t>(m.cols()), static_cast<std::size_t>(m.rows()));
    p.matrix() = m;
    return p;
  }

  PointSet gather(std::span<const std::size_t> indices) const {
    PointSet out(dim_, indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
      auto src = (*this)[indices[k]];
      std::copy(src.begin(), src.end(), out[k].begin());
    }
    return out;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const PointSet&, const PointSet&) = default;

 private:
  void check_dim() const {
    if (dim_ == 0) throw DimensionError("PointSet: dim must be positive");
  }

  std::size_t dim_ = 0;
  std::vector<double> data_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

inline void require_same_shape(const PointSet& a, const PointSet& b, const char* what) {
  if (a.dim() != b.dim()) throw DimensionError(std::string(what) + ": dimension mismatch");
  if (a.size() != b.size()) throw DimensionError(std::string(what) + ": size mismatch");
}

/// Isotropic Gaussian direction, normalized. In 1-D this is +-1.
inline void random_unit_vector(Rng& rng, std::span<double> out) {
  std::normal_distribution<double> normal;
  double nrm = 0.0;
  do {
    for (auto& v : out) v = normal(rng);
    nrm = std::sqrt(squared_norm(out));
  } while (nrm == 0.0);
  for (auto& v : out) v /= nrm;
}

inline PointSet random_directions(std::size_t dim, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  PointSet dirs(dim, count);
  for (std::size_t l = 0; l < count; ++l) random_unit_vector(rng, dirs[l]);
  return dirs;
}

// Worker cap for the embarrassingly parallel loops; results are always written
// to per-index slots and reduced sequentially, so output is thread-count independent.
inline unsigned& thread_limit() {
  static unsigned limit = 1;
  return limit;
}

inline void set_thread_limit(unsigned n) { thread_limit() = std::max(1u, n); }

template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(thread_limit(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t block = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * block;
    const std::size_t hi = std::min(count, lo + block);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace twae
