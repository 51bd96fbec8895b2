//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "linkdiff/autodiff.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>

#include "linkdiff/error.hpp"

namespace linkdiff {

int ParamStore::add(std::string name, DenseMatrix value, bool trainable) {
  entries_.push_back({ std::move(name), std::move(value), trainable });
  return size() - 1;
}

int ParamStore::find(std::string_view name) const {
  for (int i = 0; i < size(); ++i)
    if (entries_[i].name == name)
      return i;
  return -1;
}

std::int64_t ParamStore::num_trainable() const {
  std::int64_t n = 0;
  for (const auto &e: entries_)
    if (e.trainable)
      n += e.value.size();
  return n;
}

Gradients zero_gradients(const ParamStore &store) {
  Gradients g;
  g.reserve(store.size());
  for (int i = 0; i < store.size(); ++i)
    g.push_back(DenseMatrix::Zero(store.value(i).rows(), store.value(i).cols()));
  return g;
}

Linear make_linear(ParamStore &store, const std::string &name, int in_dim,
                   int out_dim, CounterRng &rng, bool zero_init) {
  DenseMatrix w = DenseMatrix::Zero(in_dim, out_dim);
  if (!zero_init) {
    const double bound = std::sqrt(1.0 / in_dim);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        w(i, j) = rng.uniform(-bound, bound);
  }
  Linear layer;
  layer.in_dim = in_dim;
  layer.out_dim = out_dim;
  layer.weight = store.add(name + ".weight", std::move(w));
  layer.bias = store.add(name + ".bias", DenseMatrix::Zero(1, out_dim));
  return layer;
}

DenseMatrix linear_forward(const Linear &layer, const ParamStore &store,
                           const DenseMatrix &x) {
  if (x.cols() != layer.in_dim)
    throw Error(ErrorCode::kShapeMismatch,
                "linear layer expects " + std::to_string(layer.in_dim)
                    + " inputs, got " + std::to_string(x.cols()));
  DenseMatrix y = x * store.value(layer.weight);
  y.rowwise() += store.value(layer.bias).row(0);
  return y;
}

DenseMatrix linear_backward(const Linear &layer, const ParamStore &store,
                            const DenseMatrix &x, const DenseMatrix &dy,
                            Gradients &grads) {
  grads[layer.weight].noalias() += x.transpose() * dy;
  grads[layer.bias] += dy.colwise().sum();
  return dy * store.value(layer.weight).transpose();
}

Mlp make_mlp(ParamStore &store, const std::string &prefix, int in_dim,
             std::span<const LayerSpec> specs, CounterRng &rng) {
  Mlp mlp;
  int dim = in_dim;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const LayerSpec &spec = specs[k];
    const std::string name = prefix + "." + std::to_string(k);
    DenseLayer layer;
    layer.linear = make_linear(store, name, dim, spec.out_dim, rng,
                               spec.zero_init);
    layer.act = spec.act;
    if (spec.batch_norm) {
      BatchNorm bn;
      bn.gamma = store.add(name + ".bn.gamma",
                           DenseMatrix::Ones(1, spec.out_dim));
      bn.beta = store.add(name + ".bn.beta",
                          DenseMatrix::Zero(1, spec.out_dim));
      bn.running_mean = store.add(name + ".bn.running_mean",
                                  DenseMatrix::Zero(1, spec.out_dim), false);
      bn.running_var = store.add(name + ".bn.running_var",
                                 DenseMatrix::Ones(1, spec.out_dim), false);
      layer.norm = bn;
    }
    mlp.layers.push_back(layer);
    dim = spec.out_dim;
  }
  return mlp;
}

MlpResult mlp_forward(const Mlp &mlp, const ParamStore &store,
                      const DenseMatrix &x, Mode mode) {
  if (mlp.layers.empty() || x.cols() != mlp.in_dim())
    throw Error(ErrorCode::kShapeMismatch,
                "mlp input width " + std::to_string(x.cols()));

  MlpResult res;
  res.tape.owner = &mlp;
  res.tape.mode = mode;
  res.tape.records.reserve(mlp.layers.size());

  DenseMatrix cur = x;
  for (const DenseLayer &layer: mlp.layers) {
    MlpTape::Record rec;
    DenseMatrix z = linear_forward(layer.linear, store, cur);
    rec.input = std::move(cur);

    if (layer.norm) {
      const BatchNorm &bn = *layer.norm;
      const Eigen::RowVectorXd gamma = store.value(bn.gamma).row(0);
      const Eigen::RowVectorXd beta = store.value(bn.beta).row(0);
      if (mode == Mode::kTrain) {
        rec.batch_mean = z.colwise().mean();
        DenseMatrix centered = z.rowwise() - rec.batch_mean;
        rec.batch_var = centered.array().square().colwise().mean();
        rec.inv_std = (rec.batch_var.array() + bn.eps).rsqrt();
        rec.normalized = centered.array().rowwise() * rec.inv_std.array();
      } else {
        const Eigen::RowVectorXd mean = store.value(bn.running_mean).row(0);
        rec.inv_std = (store.value(bn.running_var).row(0).array() + bn.eps)
                          .rsqrt();
        rec.normalized = (z.rowwise() - mean).array().rowwise()
                         * rec.inv_std.array();
      }
      z = (rec.normalized.array().rowwise() * gamma.array()).matrix();
      z.rowwise() += beta;
    }

    if (layer.act == Activation::kSilu) {
      cur = silu(z);
      rec.pre_activation = std::move(z);
    } else {
      cur = std::move(z);
    }
    res.tape.records.push_back(std::move(rec));
  }
  res.tape.out_rows = cur.rows();
  res.y = std::move(cur);
  return res;
}

void update_running_stats(const Mlp &mlp, ParamStore &store,
                          const MlpTape &tape) {
  if (tape.owner != &mlp || tape.mode != Mode::kTrain)
    return;
  for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
    const auto &layer = mlp.layers[k];
    if (!layer.norm)
      continue;
    const BatchNorm &bn = *layer.norm;
    const auto &rec = tape.records[k];
    const double n = static_cast<double>(rec.input.rows());
    const double unbias = n > 1 ? n / (n - 1) : 1.0;
    store.value(bn.running_mean) = (1 - bn.momentum) * store.value(bn.running_mean)
                                   + bn.momentum * DenseMatrix(rec.batch_mean);
    store.value(bn.running_var) =
        (1 - bn.momentum) * store.value(bn.running_var)
        + bn.momentum * unbias * DenseMatrix(rec.batch_var);
  }
}

DenseMatrix mlp_backward(const Mlp &mlp, const ParamStore &store,
                         MlpTape &tape, const DenseMatrix &dy,
                         Gradients &grads) {
  if (tape.consumed)
    throw Error(ErrorCode::kTapeMismatch, "tape already consumed");
  if (tape.owner != &mlp || tape.records.size() != mlp.layers.size())
    throw Error(ErrorCode::kTapeMismatch, "tape recorded by another network");
  if (dy.rows() != tape.out_rows || dy.cols() != mlp.out_dim())
    throw Error(ErrorCode::kTapeMismatch, "upstream gradient shape mismatch");
  if (grads.size() != static_cast<std::size_t>(store.size()))
    throw Error(ErrorCode::kTapeMismatch, "gradient buffer does not match");
  tape.consumed = true;

  DenseMatrix grad = dy;
  for (std::size_t kk = mlp.layers.size(); kk-- > 0;) {
    const DenseLayer &layer = mlp.layers[kk];
    MlpTape::Record &rec = tape.records[kk];

    if (layer.act == Activation::kSilu)
      grad = grad.cwiseProduct(silu_grad(rec.pre_activation));

    if (layer.norm) {
      const BatchNorm &bn = *layer.norm;
      const Eigen::RowVectorXd gamma = store.value(bn.gamma).row(0);
      grads[bn.gamma] += grad.cwiseProduct(rec.normalized).colwise().sum();
      grads[bn.beta] += grad.colwise().sum();

      DenseMatrix dxhat = grad.array().rowwise() * gamma.array();
      if (tape.mode == Mode::kTrain) {
        const double n = static_cast<double>(dxhat.rows());
        const Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
        const Eigen::RowVectorXd sum_dx =
            dxhat.cwiseProduct(rec.normalized).colwise().sum();
        DenseMatrix t = n * dxhat;
        t.rowwise() -= sum_d;
        t -= (rec.normalized.array().rowwise() * sum_dx.array()).matrix();
        grad = (t.array().rowwise() * (rec.inv_std.array() / n)).matrix();
      } else {
        grad = (dxhat.array().rowwise() * rec.inv_std.array()).matrix();
      }
    }

    grad = linear_backward(layer.linear, store, rec.input, grad, grads);
  }
  return grad;
}

Adam::Adam(const ParamStore &store, AdamOptions opts)
    : opts_(opts), m_(zero_gradients(store)), v_(zero_gradients(store)) { }

double gradient_norm(const ParamStore &store, const Gradients &grads) {
  double sq = 0;
  for (int i = 0; i < store.size(); ++i)
    if (store.trainable(i))
      sq += grads[i].squaredNorm();
  return std::sqrt(sq);
}

void Adam::step(ParamStore &store, const Gradients &grads) {
  ++t_;
  double scale = 1.0;
  if (opts_.clip_norm > 0) {
    const double norm = gradient_norm(store, grads);
    if (norm > opts_.clip_norm)
      scale = opts_.clip_norm / norm;
  }
  const double bc1 = 1.0 - std::pow(opts_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, double(t_));
  for (int i = 0; i < store.size(); ++i) {
    if (!store.trainable(i))
      continue;
    DenseMatrix &p = store.value(i);
    DenseMatrix g = scale * grads[i] + opts_.weight_decay * p;
    m_[i] = opts_.beta1 * m_[i] + (1 - opts_.beta1) * g;
    v_[i] = opts_.beta2 * v_[i] + (1 - opts_.beta2) * g.cwiseAbs2();
    p.array() -= opts_.lr * (m_[i].array() / bc1)
                 / ((v_[i].array() / bc2).sqrt() + opts_.eps);
  }
}

namespace {
  constexpr char kMagic[4] = { 'L', 'D', 'W', 'T' };
  constexpr std::uint32_t kVersion = 1;

  static_assert(std::endian::native == std::endian::little,
                "weights container I/O assumes a little-endian host");

  template <class T>
  void put(std::ostream &os, const T &v) {
    os.write(reinterpret_cast<const char *>(&v), sizeof(T));
  }

  template <class T>
  T get(std::istream &is, const std::string &path) {
    T v;
    if (!is.read(reinterpret_cast<char *>(&v), sizeof(T)))
      throw Error(ErrorCode::kIoError, "truncated weights file " + path);
    return v;
  }

  std::string get_string(std::istream &is, std::uint64_t len,
                         const std::string &path) {
    if (len > (1ULL << 32))
      throw Error(ErrorCode::kIoError, "corrupt string length in " + path);
    std::string s(len, '\0');
    if (len > 0 && !is.read(s.data(), static_cast<std::streamsize>(len)))
      throw Error(ErrorCode::kIoError, "truncated weights file " + path);
    return s;
  }
}  // namespace

void save_weights(const std::string &path, const ParamStore &store,
                  const std::string &metadata) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  os.write(kMagic, 4);
  put(os, kVersion);
  put(os, static_cast<std::uint64_t>(metadata.size()));
  os.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  put(os, static_cast<std::uint32_t>(store.size()));
  for (int i = 0; i < store.size(); ++i) {
    const std::string &name = store.name(i);
    const DenseMatrix &v = store.value(i);
    put(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put(os, static_cast<std::uint8_t>(store.trainable(i) ? 1 : 0));
    put(os, static_cast<std::uint64_t>(v.rows()));
    put(os, static_cast<std::uint64_t>(v.cols()));
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c)
        put(os, v(r, c));
  }
  if (!os)
    throw Error(ErrorCode::kIoError, "write failed for " + path);
}

LoadedWeights load_weights(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw Error(ErrorCode::kIoError, "cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw Error(ErrorCode::kIoError, path + " is not a weights container");
  const auto version = get<std::uint32_t>(is, path);
  if (version != kVersion)
    throw Error(ErrorCode::kIoError, "unsupported weights version "
                                         + std::to_string(version));
  LoadedWeights out;
  out.metadata = get_string(is, get<std::uint64_t>(is, path), path);
  const auto count = get<std::uint32_t>(is, path);
  for (std::uint32_t k = 0; k < count; ++k) {
    out.names.push_back(get_string(is, get<std::uint32_t>(is, path), path));
    (void)get<std::uint8_t>(is, path);
    const auto rows = get<std::uint64_t>(is, path);
    const auto cols = get<std::uint64_t>(is, path);
    if (rows * cols > (1ULL << 28))
      throw Error(ErrorCode::kIoError, "implausible tensor shape in " + path);
    DenseMatrix v(static_cast<Eigen::Index>(rows),
                  static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c)
        v(r, c) = get<double>(is, path);
    out.values.push_back(std::move(v));
  }
  return out;
}

void assign_weights(ParamStore &store, const LoadedWeights &weights) {
  for (int i = 0; i < store.size(); ++i) {
    std::size_t k = 0;
    while (k < weights.names.size() && weights.names[k] != store.name(i))
      ++k;
    if (k == weights.names.size())
      throw Error(ErrorCode::kShapeMismatch,
                  "tensor " + store.name(i) + " missing from weights");
    const DenseMatrix &src = weights.values[k];
    if (src.rows() != store.value(i).rows()
        || src.cols() != store.value(i).cols())
      throw Error(ErrorCode::kShapeMismatch,
                  "tensor " + store.name(i) + " has the wrong shape");
    store.value(i) = src;
  }
}

}  // namespace linkdiff
