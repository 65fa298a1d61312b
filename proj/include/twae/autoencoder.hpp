#pragma once

// Fully-connected auto-encoder with hand-written forward/backward passes,
// the composite loss |x - dec(enc(x))|^2 + lambda * latent discrepancy, and Adam.

#include <bit>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "twae/common.hpp"
#include "twae/discrepancy.hpp"

namespace twae {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() && a.weight == b.weight &&
           a.bias == b.bias;
  }
};

/// Encoder maps layer_sizes[0] -> layer_sizes[1] -> ... -> latent_dim; the decoder
/// mirrors it back. ReLU on hidden layers, linear outputs.
struct AutoEncoderParams {
  std::vector<std::size_t> layer_sizes;
  std::size_t latent_dim = 0;
  std::vector<DenseLayer> encoder;
  std::vector<DenseLayer> decoder;

  std::size_t data_dim() const { return layer_sizes.front(); }

  std::vector<std::span<double>> arrays() {
    std::vector<std::span<double>> out;
    for (auto* stack : {&encoder, &decoder})
      for (auto& l : *stack) {
        out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
        out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
      }
    return out;
  }
  std::vector<std::span<const double>> arrays() const {
    std::vector<std::span<const double>> out;
    for (auto* stack : {&encoder, &decoder})
      for (auto& l : *stack) {
        out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
        out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
      }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t c = 0;
    for (auto a : arrays()) c += a.size();
    return c;
  }

  friend bool operator==(const AutoEncoderParams&, const AutoEncoderParams&) = default;
};

/// Same-shaped buffer of parameter gradients.
using ParamGradients = AutoEncoderParams;

inline AutoEncoderParams zeros_like(const AutoEncoderParams& p) {
  AutoEncoderParams z = p;
  for (auto a : z.arrays()) std::fill(a.begin(), a.end(), 0.0);
  return z;
}

/// y += alpha * x
inline void add_scaled(AutoEncoderParams& y, double alpha, const AutoEncoderParams& x) {
  auto ya = y.arrays();
  const auto xa = x.arrays();
  if (ya.size() != xa.size()) throw DimensionError("add_scaled: shape mismatch");
  for (std::size_t k = 0; k < ya.size(); ++k)
    for (std::size_t i = 0; i < ya[k].size(); ++i) ya[k][i] += alpha * xa[k][i];
}

inline double squared_norm(const AutoEncoderParams& p) {
  double s = 0.0;
  for (auto a : p.arrays())
    for (double v : a) s += v * v;
  return s;
}

inline std::vector<double> flatten(const AutoEncoderParams& p) {
  std::vector<double> out;
  out.reserve(p.parameter_count());
  for (auto a : p.arrays()) out.insert(out.end(), a.begin(), a.end());
  return out;
}

inline void unflatten(AutoEncoderParams& p, std::span<const double> values) {
  if (values.size() != p.parameter_count()) throw DimensionError("unflatten: size mismatch");
  std::size_t off = 0;
  for (auto a : p.arrays()) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(off), a.size(), a.begin());
    off += a.size();
  }
}

inline AutoEncoderParams init_params(const std::vector<std::size_t>& layer_sizes, std::size_t latent_dim,
                                     std::uint64_t seed) {
  if (layer_sizes.empty()) throw Error("init_params: layer_sizes must be nonempty");
  if (latent_dim == 0) throw Error("init_params: latent_dim must be positive");
  for (auto s : layer_sizes)
    if (s == 0) throw Error("init_params: zero layer width");
  AutoEncoderParams p;
  p.layer_sizes = layer_sizes;
  p.latent_dim = latent_dim;

  std::vector<std::size_t> enc = layer_sizes;
  enc.push_back(latent_dim);
  std::vector<std::size_t> dec(enc.rbegin(), enc.rend());

  Rng rng(seed);
  const auto build = [&](const std::vector<std::size_t>& widths, std::vector<DenseLayer>& out) {
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
      const auto in = static_cast<Eigen::Index>(widths[k]), o = static_cast<Eigen::Index>(widths[k + 1]);
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in)));
      DenseLayer l{Eigen::MatrixXd(o, in), Eigen::VectorXd::Zero(o)};
      for (Eigen::Index r = 0; r < o; ++r)
        for (Eigen::Index c = 0; c < in; ++c) l.weight(r, c) = normal(rng);
      out.push_back(std::move(l));
    }
  };
  build(enc, p.encoder);
  build(dec, p.decoder);
  return p;
}

namespace detail {

struct StackTrace {
  std::vector<RowMatrix> inputs;  // input to each layer
  std::vector<RowMatrix> pre;     // pre-activation of each layer
};

inline RowMatrix forward_stack(const std::vector<DenseLayer>& layers, const RowMatrix& x, StackTrace* trace,
                               const char* name) {
  RowMatrix h = x;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (h.cols() != l.weight.cols()) throw DimensionError(std::string(name) + ": input width mismatch");
    RowMatrix pre = h * l.weight.transpose();
    pre.rowwise() += l.bias.transpose();
    if (trace) {
      trace->inputs.push_back(h);
      trace->pre.push_back(pre);
    }
    h = (k + 1 < layers.size()) ? RowMatrix(pre.cwiseMax(0.0)) : pre;
    if (!h.allFinite())
      throw NumericalError(std::string(name) + " layer " + std::to_string(k) + " produced non-finite activations");
  }
  return h;
}

// Backpropagates dL/d(output) through the stack; accumulates parameter gradients
// into `grads` and returns dL/d(input).
inline RowMatrix backward_stack(const std::vector<DenseLayer>& layers, const StackTrace& trace, RowMatrix d_out,
                                std::vector<DenseLayer>& grads) {
  for (std::size_t k = layers.size(); k-- > 0;) {
    if (k + 1 < layers.size()) d_out = d_out.cwiseProduct((trace.pre[k].array() > 0.0).cast<double>().matrix());
    grads[k].weight += d_out.transpose() * trace.inputs[k];
    grads[k].bias += d_out.colwise().sum().transpose();
    d_out = d_out * layers[k].weight;
  }
  return d_out;
}

}  // namespace detail

inline PointSet encode(const AutoEncoderParams& p, const PointSet& x) {
  if (x.dim() != p.data_dim()) throw DimensionError("encode: data dimension mismatch");
  return PointSet::from_matrix(detail::forward_stack(p.encoder, x.matrix(), nullptr, "encoder"));
}

inline PointSet decode(const AutoEncoderParams& p, const PointSet& z) {
  if (z.dim() != p.latent_dim) throw DimensionError("decode: latent dimension mismatch");
  return PointSet::from_matrix(detail::forward_stack(p.decoder, z.matrix(), nullptr, "decoder"));
}

struct LossResult {
  double recon = 0.0;
  double latent = 0.0;
  ParamGradients grads;

  double total(double lambda) const { return recon + lambda * latent; }
};

/// (1/n) sum |x - dec(enc(x))|^2 + lambda * D(enc(X), prior) and its gradient.
inline LossResult loss_and_grad(const AutoEncoderParams& p, const PointSet& batch_x, const PointSet& prior_batch,
                                double lambda, Estimator estimator, const EstimatorConfig& cfg, std::uint64_t seed) {
  if (batch_x.size() != prior_batch.size()) throw DimensionError("loss_and_grad: batch sizes differ");
  if (batch_x.empty()) throw Error("loss_and_grad: empty batch");
  const auto n = static_cast<double>(batch_x.size());

  detail::StackTrace enc_trace, dec_trace;
  const RowMatrix z = detail::forward_stack(p.encoder, batch_x.matrix(), &enc_trace, "encoder");
  const RowMatrix xhat = detail::forward_stack(p.decoder, z, &dec_trace, "decoder");
  const RowMatrix resid = xhat - batch_x.matrix();

  LossResult out;
  out.recon = resid.squaredNorm() / n;
  const LatentTerm latent = latent_discrepancy(PointSet::from_matrix(z), prior_batch, estimator, cfg, seed);
  out.latent = latent.value;

  out.grads = zeros_like(p);
  RowMatrix dz = detail::backward_stack(p.decoder, dec_trace, (2.0 / n) * resid, out.grads.decoder);
  dz += lambda * latent.gradient.matrix();
  detail::backward_stack(p.encoder, enc_trace, std::move(dz), out.grads.encoder);
  return out;
}

/// Forward-only evaluation of the same loss (used for finite-difference checks).
inline double loss_value(const AutoEncoderParams& p, const PointSet& batch_x, const PointSet& prior_batch,
                         double lambda, Estimator estimator, const EstimatorConfig& cfg, std::uint64_t seed) {
  const PointSet z = encode(p, batch_x);
  const PointSet xhat = decode(p, z);
  const double recon = (xhat.matrix() - batch_x.matrix()).squaredNorm() / static_cast<double>(batch_x.size());
  if (lambda == 0.0) return recon;
  return recon + lambda * latent_discrepancy(z, prior_batch, estimator, cfg, seed).value;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  AutoEncoderParams first;
  AutoEncoderParams second;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;
};

inline AdamState make_adam(const AutoEncoderParams& p, double learning_rate = 1e-3) {
  AdamState s;
  s.first = zeros_like(p);
  s.second = zeros_like(p);
  s.learning_rate = learning_rate;
  return s;
}

inline void adam_step(AutoEncoderParams& p, AdamState& s, const ParamGradients& g) {
  auto pa = p.arrays();
  auto ma = s.first.arrays();
  auto va = s.second.arrays();
  const auto ga = g.arrays();
  if (pa.size() != ga.size() || pa.size() != ma.size()) throw DimensionError("adam_step: shape mismatch");
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t k = 0; k < pa.size(); ++k) {
    if (pa[k].size() != ga[k].size()) throw DimensionError("adam_step: shape mismatch");
    for (std::size_t i = 0; i < pa[k].size(); ++i) {
      const double gi = ga[k][i];
      ma[k][i] = s.beta1 * ma[k][i] + (1.0 - s.beta1) * gi;
      va[k][i] = s.beta2 * va[k][i] + (1.0 - s.beta2) * gi * gi;
      const double mhat = ma[k][i] / c1;
      const double vhat = va[k][i] / c2;
      pa[k][i] -= s.learning_rate * mhat / (std::sqrt(vhat) + s.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoints: <prefix>.json manifest + <prefix>.bin with every array in
// manifest order as little-endian float64 (weights row-major, out x in).

namespace detail {

inline void write_f64_le(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int k = 0; k < 8; ++k) bytes[k] = static_cast<char>((bits >> (8 * k)) & 0xffu);
  os.write(bytes, 8);
}

inline double read_f64_le(std::istream& is) {
  unsigned char bytes[8];
  if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw Error("checkpoint: truncated blob");
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::size_t step = 0;
};

inline void save_checkpoint(const std::filesystem::path& prefix, const AutoEncoderParams& p,
                            const CheckpointInfo& info) {
  nlohmann::json manifest;
  manifest["layer_sizes"] = p.layer_sizes;
  manifest["latent_dim"] = p.latent_dim;
  manifest["seed"] = info.seed;
  manifest["step"] = info.step;
  manifest["dtype"] = "float64-le";
  manifest["blob"] = prefix.filename().string() + ".bin";
  auto& arrays = manifest["arrays"] = nlohmann::json::array();

  std::ofstream bin(prefix.string() + ".bin", std::ios::binary);
  if (!bin) throw Error("save_checkpoint: cannot open " + prefix.string() + ".bin");
  const auto emit = [&](const std::vector<DenseLayer>& stack, const std::string& name) {
    for (std::size_t k = 0; k < stack.size(); ++k) {
      const auto& l = stack[k];
      arrays.push_back({{"name", name + "." + std::to_string(k) + ".weight"},
                        {"shape", {l.weight.rows(), l.weight.cols()}}});
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) detail::write_f64_le(bin, l.weight(r, c));
      arrays.push_back({{"name", name + "." + std::to_string(k) + ".bias"}, {"shape", {l.bias.size()}}});
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) detail::write_f64_le(bin, l.bias(r));
    }
  };
  emit(p.encoder, "encoder");
  emit(p.decoder, "decoder");
  std::ofstream js(prefix.string() + ".json");
  if (!js) throw Error("save_checkpoint: cannot open " + prefix.string() + ".json");
  js << manifest.dump(2) << '\n';
}

inline AutoEncoderParams load_checkpoint(const std::filesystem::path& prefix, CheckpointInfo* info = nullptr) {
  std::ifstream js(prefix.string() + ".json");
  if (!js) throw Error("load_checkpoint: cannot open " + prefix.string() + ".json");
  const auto manifest = nlohmann::json::parse(js);
  AutoEncoderParams p = init_params(manifest.at("layer_sizes").get<std::vector<std::size_t>>(),
                                    manifest.at("latent_dim").get<std::size_t>(), 0);
  if (info) {
    info->seed = manifest.at("seed").get<std::uint64_t>();
    info->step = manifest.at("step").get<std::size_t>();
  }
  std::ifstream bin(prefix.string() + ".bin", std::ios::binary);
  if (!bin) throw Error("load_checkpoint: cannot open " + prefix.string() + ".bin");
  const auto fill = [&](std::vector<DenseLayer>& stack) {
    for (auto& l : stack) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = detail::read_f64_le(bin);
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = detail::read_f64_le(bin);
    }
  };
  fill(p.encoder);
  fill(p.decoder);
  if (bin.peek() != std::char_traits<char>::eof()) throw Error("load_checkpoint: blob longer than manifest");
  return p;
}

}  // namespace twae
