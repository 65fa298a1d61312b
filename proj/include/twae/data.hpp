#pragma once

// Datasets: synthetic generators for desk-scale experiments and an IDX
// (MNIST) reader/writer.

#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>

#include "twae/common.hpp"
#include "twae/tessellation.hpp"

namespace twae {

struct Dataset {
  PointSet points;
  std::vector<int> labels;  // empty or one per point
  std::string source;
  std::size_t image_rows = 0;  // nonzero for image data
  std::size_t image_cols = 0;

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return points.dim(); }

  void validate() const {
    if (!labels.empty() && labels.size() != points.size()) throw Error("Dataset: label count mismatch");
    if (!points.all_finite()) throw Error("Dataset: non-finite feature");
  }
};

/// Equal-weight mixture of `modes` isotropic 2-D Gaussians on a ring; labels are mode indices.
inline Dataset gen_gaussian_ring(std::size_t modes, double radius, double sigma, std::size_t count,
                                 std::uint64_t seed) {
  if (modes == 0) throw Error("gen_gaussian_ring: modes must be positive");
  if (!(sigma > 0.0)) throw Error("gen_gaussian_ring: sigma must be positive");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, modes - 1);
  std::normal_distribution<double> normal(0.0, sigma);
  Dataset ds{PointSet(2, count), std::vector<int>(count), "gaussian_ring"};
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = pick(rng);
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(modes);
    ds.points[i][0] = radius * std::cos(angle) + normal(rng);
    ds.points[i][1] = radius * std::sin(angle) + normal(rng);
    ds.labels[i] = static_cast<int>(k);
  }
  return ds;
}

inline Dataset gen_uniform_ball_dataset(std::size_t dim, std::size_t count, std::uint64_t seed) {
  return Dataset{sample_unit_ball(dim, count, seed), {}, "uniform_ball"};
}

// ---------------------------------------------------------------------------
// IDX

class IdxError : public Error {
 public:
  enum class Kind { WrongMagic, Truncated, CountMismatch, Io };
  IdxError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off, const std::string& what) {
  if (off + 4 > b.size()) throw IdxError(IdxError::Kind::Truncated, what + ": truncated header");
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

inline void write_be32(std::ostream& os, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  os.write(bytes, 4);
}

}  // namespace detail

/// Parses IDX image (and optional label) files; pixels are scaled by 1/255 and
/// each image is flattened row-major.
inline Dataset load_idx(const std::filesystem::path& images,
                        const std::optional<std::filesystem::path>& labels = std::nullopt) {
  const auto img = detail::read_file(images);
  const std::string name = images.string();
  const std::uint32_t magic = detail::read_be32(img, 0, name);
  if (magic != kIdxImagesMagic) throw IdxError(IdxError::Kind::WrongMagic, name + ": wrong magic for image file");
  const std::size_t count = detail::read_be32(img, 4, name);
  const std::size_t rows = detail::read_be32(img, 8, name);
  const std::size_t cols = detail::read_be32(img, 12, name);
  const std::size_t pixels = rows * cols;
  if (pixels == 0) throw IdxError(IdxError::Kind::Truncated, name + ": empty image shape");
  if (img.size() < 16 + count * pixels) throw IdxError(IdxError::Kind::Truncated, name + ": truncated payload");

  Dataset ds{PointSet(pixels, count), {}, "idx:" + images.filename().string(), rows, cols};
  auto vals = ds.points.values();
  for (std::size_t k = 0; k < count * pixels; ++k) vals[k] = static_cast<double>(img[16 + k]) / 255.0;

  if (labels) {
    const auto lab = detail::read_file(*labels);
    const std::string lname = labels->string();
    if (detail::read_be32(lab, 0, lname) != kIdxLabelsMagic)
      throw IdxError(IdxError::Kind::WrongMagic, lname + ": wrong magic for label file");
    const std::size_t lcount = detail::read_be32(lab, 4, lname);
    if (lcount != count)
      throw IdxError(IdxError::Kind::CountMismatch, lname + ": " + std::to_string(lcount) + " labels for " +
                                                        std::to_string(count) + " images");
    if (lab.size() < 8 + lcount) throw IdxError(IdxError::Kind::Truncated, lname + ": truncated payload");
    ds.labels.assign(lab.begin() + 8, lab.begin() + 8 + static_cast<std::ptrdiff_t>(lcount));
  }
  return ds;
}

inline void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                             std::span<const std::uint8_t> pixels) {
  if (rows * cols == 0 || pixels.size() % (rows * cols) != 0) throw Error("write_idx_images: bad shape");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IdxError(IdxError::Kind::Io, "cannot open " + path.string());
  detail::write_be32(os, kIdxImagesMagic);
  detail::write_be32(os, static_cast<std::uint32_t>(pixels.size() / (rows * cols)));
  detail::write_be32(os, static_cast<std::uint32_t>(rows));
  detail::write_be32(os, static_cast<std::uint32_t>(cols));
  os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

inline void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IdxError(IdxError::Kind::Io, "cannot open " + path.string());
  detail::write_be32(os, kIdxLabelsMagic);
  detail::write_be32(os, static_cast<std::uint32_t>(labels.size()));
  os.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

/// Block-mean pooling of square-grid images by `factor` along both axes.
inline Dataset downscale(const Dataset& ds, std::size_t factor) {
  if (factor == 0) throw Error("downscale: factor must be positive");
  if (ds.image_rows == 0 || ds.image_cols == 0) throw Error("downscale: dataset has no image shape");
  if (ds.image_rows % factor != 0 || ds.image_cols % factor != 0)
    throw Error("downscale: image side not divisible by factor");
  const std::size_t r2 = ds.image_rows / factor, c2 = ds.image_cols / factor;
  Dataset out{PointSet(r2 * c2, ds.size()), ds.labels, ds.source, r2, c2};
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto src = ds.points[i];
    auto dst = out.points[i];
    for (std::size_t r = 0; r < r2; ++r)
      for (std::size_t c = 0; c < c2; ++c) {
        double s = 0.0;
        for (std::size_t dr = 0; dr < factor; ++dr)
          for (std::size_t dc = 0; dc < factor; ++dc) s += src[(r * factor + dr) * ds.image_cols + c * factor + dc];
        dst[r * c2 + c] = s * inv;
      }
  }
  return out;
}

/// CSV with header f0..f{d-1}[,label].
inline void write_dataset_csv(std::ostream& os, const Dataset& ds) {
  for (std::size_t k = 0; k < ds.dim(); ++k) os << (k ? "," : "") << 'f' << k;
  if (!ds.labels.empty()) os << ",label";
  os << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto row = ds.points[i];
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << row[k];
    if (!ds.labels.empty()) os << ',' << ds.labels[i];
    os << '\n';
  }
}

}  // namespace twae
