//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "linkdiff/sizegnn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "linkdiff/error.hpp"
#include "linkdiff/random.hpp"

namespace linkdiff {

void SizeModelConfig::validate() const {
  if (nf < 1 || layers < 1)
    throw Error(ErrorCode::kInvalidConfig, "size model needs nf, L >= 1");
  if (vocab.empty())
    throw Error(ErrorCode::kInvalidConfig, "empty vocabulary");
  if (size_classes.empty())
    throw Error(ErrorCode::kInvalidConfig, "no size classes");
  for (std::size_t k = 1; k < size_classes.size(); ++k)
    if (size_classes[k] <= size_classes[k - 1])
      throw Error(ErrorCode::kInvalidConfig,
                  "size classes must be strictly increasing");
}

int SizeModelConfig::class_index(int size) const {
  auto it = std::lower_bound(size_classes.begin(), size_classes.end(), size);
  if (it == size_classes.end() || *it != size)
    throw Error(ErrorCode::kUnknownSizeClass,
                "linker size " + std::to_string(size) + " not a known class");
  return static_cast<int>(it - size_classes.begin());
}

SizeModel::SizeModel(const SizeModelConfig &cfg, std::uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  CounterRng rng(seed, 0x73697a65);
  const int nf = cfg_.nf;
  encoder_ = make_linear(params_, "encoder", cfg_.in_dim(), nf, rng);
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string p = "gcl" + std::to_string(l);
    const std::array<LayerSpec, 2> edge_spec{
      LayerSpec{ nf, false, Activation::kSilu },
      LayerSpec{ nf, false, Activation::kSilu },
    };
    const std::array<LayerSpec, 2> node_spec{
      LayerSpec{ nf, true, Activation::kSilu },
      LayerSpec{ nf, true, Activation::kNone },
    };
    GclLayer layer;
    layer.phi_e = make_mlp(params_, p + ".phi_e", 2 * nf + 1, edge_spec, rng);
    layer.phi_h = make_mlp(params_, p + ".phi_h", 2 * nf, node_spec, rng);
    layers_.push_back(std::move(layer));
  }
  head_ = make_linear(params_, "head", nf, cfg_.out_dim(), rng);
}

void SizeModel::zero_head() {
  params_.value(head_.weight).setZero();
  params_.value(head_.bias).setZero();
}

namespace {
  struct Graph {
    DenseMatrix features;
    std::vector<int> receivers, senders;
    Eigen::VectorXd d2;
    std::vector<int> offsets{ 0 };
  };

  Graph build_batch(const SizeModelConfig &cfg,
                    const std::vector<PointCloud> &clouds) {
    Graph g;
    int total = 0;
    for (const auto &c: clouds) {
      if (c.empty())
        throw Error(ErrorCode::kEmptySelection, "fragment cloud without atoms");
      total += c.size();
      g.offsets.push_back(total);
    }
    g.features = DenseMatrix::Zero(total, cfg.in_dim());
    std::vector<double> d2;
    for (std::size_t b = 0; b < clouds.size(); ++b) {
      const PointCloud &c = clouds[b];
      const int off = g.offsets[b];
      if (static_cast<int>(c.elements.size()) != c.size())
        throw Error(ErrorCode::kShapeMismatch, "fragment atoms need elements");
      for (int i = 0; i < c.size(); ++i)
        g.features(off + i, vocab_index(cfg.vocab, c.elements[i])) = 1.0;
      for (int i = 0; i < c.size(); ++i) {
        for (int j = 0; j < c.size(); ++j) {
          if (i == j)
            continue;
          g.receivers.push_back(off + i);
          g.senders.push_back(off + j);
          d2.push_back((c.coords.row(i) - c.coords.row(j)).squaredNorm());
        }
      }
    }
    g.d2 = Eigen::Map<Eigen::VectorXd>(d2.data(),
                                       static_cast<Eigen::Index>(d2.size()));
    return g;
  }

  struct LayerTape {
    DenseMatrix h;
    MlpTape phi_e, phi_h;
  };

  struct Forward {
    DenseMatrix logits;
    DenseMatrix final_h;
    std::vector<LayerTape> layers;
  };

  Forward forward(const SizeModel &model, const Graph &g, Mode mode) {
    const ParamStore &store = model.params();
    const int nf = model.config().nf;
    const auto n = g.features.rows();
    const auto ne = static_cast<Eigen::Index>(g.receivers.size());

    Forward fw;
    DenseMatrix h = linear_forward(model.encoder(), store, g.features);
    for (const GclLayer &layer: model.layers()) {
      LayerTape tape;
      DenseMatrix edge_in(ne, 2 * nf + 1);
      edge_in.leftCols(nf) = h(g.receivers, Eigen::all);
      edge_in.middleCols(nf, nf) = h(g.senders, Eigen::all);
      edge_in.col(2 * nf) = g.d2;
      MlpResult msg = mlp_forward(layer.phi_e, store, edge_in, mode);
      DenseMatrix agg = DenseMatrix::Zero(n, nf);
      for (Eigen::Index e = 0; e < ne; ++e)
        agg.row(g.receivers[e]) += msg.y.row(e);
      DenseMatrix node_in(n, 2 * nf);
      node_in << h, agg;
      MlpResult upd = mlp_forward(layer.phi_h, store, node_in, mode);
      tape.h = h;
      tape.phi_e = std::move(msg.tape);
      tape.phi_h = std::move(upd.tape);
      h += upd.y;
      fw.layers.push_back(std::move(tape));
    }
    const DenseMatrix node_logits = linear_forward(model.head(), store, h);
    const int graphs = static_cast<int>(g.offsets.size()) - 1;
    fw.logits.resize(graphs, node_logits.cols());
    for (int b = 0; b < graphs; ++b)
      fw.logits.row(b) = node_logits
                             .middleRows(g.offsets[b],
                                         g.offsets[b + 1] - g.offsets[b])
                             .colwise()
                             .mean();
    fw.final_h = std::move(h);
    return fw;
  }

  Eigen::RowVectorXd softmax(const Eigen::RowVectorXd &logits) {
    Eigen::RowVectorXd p = (logits.array() - logits.maxCoeff()).exp();
    return p / p.sum();
  }
}  // namespace

DenseMatrix size_logits(const SizeModel &model,
                        const std::vector<PointCloud> &fragments, Mode mode) {
  return forward(model, build_batch(model.config(), fragments), mode).logits;
}

Eigen::VectorXd predict_size_distribution(const PointCloud &fragments,
                                          const SizeModel &model) {
  const DenseMatrix logits = size_logits(model, { fragments });
  return softmax(logits.row(0)).transpose();
}

int sample_size(const Eigen::VectorXd &dist,
                const std::vector<int> &size_classes, std::uint64_t seed) {
  if (dist.size() != static_cast<Eigen::Index>(size_classes.size())
      || dist.size() == 0)
    throw Error(ErrorCode::kInvalidDistribution,
                "distribution length differs from size classes");
  if (!dist.allFinite() || dist.minCoeff() < 0
      || std::abs(dist.sum() - 1.0) > 1e-6)
    throw Error(ErrorCode::kInvalidDistribution,
                "probabilities must be non-negative and sum to one");
  CounterRng rng(seed, 0x7369'7a65'5f73ULL);
  const double u = rng.uniform() * dist.sum();
  double acc = 0;
  for (Eigen::Index k = 0; k < dist.size(); ++k) {
    acc += dist(k);
    if (u < acc && dist(k) > 0)
      return size_classes[k];
  }
  for (Eigen::Index k = dist.size(); k-- > 0;)
    if (dist(k) > 0)
      return size_classes[k];
  return size_classes.back();
}

SizeLoss size_loss(SizeModel &model, const std::vector<SizeExample> &batch,
                   Mode mode, bool with_grads) {
  if (batch.empty())
    throw Error(ErrorCode::kEmptySelection, "empty batch");
  std::vector<PointCloud> clouds;
  std::vector<int> labels;
  for (const auto &ex: batch) {
    clouds.push_back(ex.fragments);
    labels.push_back(model.config().class_index(ex.size));
  }
  const Graph g = build_batch(model.config(), clouds);
  Forward fw = forward(model, g, mode);

  const auto nb = static_cast<double>(batch.size());
  SizeLoss res;
  DenseMatrix d_logits(fw.logits.rows(), fw.logits.cols());
  for (Eigen::Index b = 0; b < fw.logits.rows(); ++b) {
    Eigen::RowVectorXd p = softmax(fw.logits.row(b));
    res.loss -= std::log(std::max(p(labels[b]), 1e-300)) / nb;
    p(labels[b]) -= 1.0;
    d_logits.row(b) = p / nb;
  }

  ParamStore &store = model.params();
  if (mode == Mode::kTrain)
    for (std::size_t l = 0; l < model.layers().size(); ++l)
      update_running_stats(model.layers()[l].phi_h, store,
                           fw.layers[l].phi_h);
  if (!with_grads)
    return res;

  res.grads = zero_gradients(store);
  const auto n = fw.final_h.rows();
  DenseMatrix d_node_logits(n, fw.logits.cols());
  for (Eigen::Index b = 0; b < fw.logits.rows(); ++b) {
    const int lo = g.offsets[b], cnt = g.offsets[b + 1] - g.offsets[b];
    d_node_logits.middleRows(lo, cnt) =
        (d_logits.row(b) / double(cnt)).replicate(cnt, 1);
  }
  DenseMatrix dh = linear_backward(model.head(), store, fw.final_h,
                                   d_node_logits, res.grads);
  const int nf = model.config().nf;
  for (std::size_t l = model.layers().size(); l-- > 0;) {
    const GclLayer &layer = model.layers()[l];
    LayerTape &tape = fw.layers[l];
    const DenseMatrix d_node_in =
        mlp_backward(layer.phi_h, store, tape.phi_h, dh, res.grads);
    DenseMatrix dh_prev = dh + d_node_in.leftCols(nf);
    const DenseMatrix d_agg = d_node_in.rightCols(nf);
    const DenseMatrix d_msg = d_agg(g.receivers, Eigen::all);
    const DenseMatrix d_edge_in =
        mlp_backward(layer.phi_e, store, tape.phi_e, d_msg, res.grads);
    for (std::size_t e = 0; e < g.receivers.size(); ++e) {
      const auto ei = static_cast<Eigen::Index>(e);
      dh_prev.row(g.receivers[e]) += d_edge_in.row(ei).head(nf);
      dh_prev.row(g.senders[e]) += d_edge_in.row(ei).segment(nf, nf);
    }
    dh = std::move(dh_prev);
  }
  linear_backward(model.encoder(), store, g.features, dh, res.grads);
  return res;
}

std::vector<EpochStats> train_size_model(SizeModel &model,
                                         const std::vector<SizeExample> &data,
                                         const TrainOptions &opts,
                                         std::uint64_t seed,
                                         const EpochCallback &on_epoch) {
  if (data.empty())
    throw Error(ErrorCode::kEmptySelection, "no training examples");
  for (const auto &ex: data)
    model.config().class_index(ex.size);

  const int bs = std::max(1, opts.batch_size);
  Adam adam(model.params(), opts.adam);
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochStats> history;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    CounterRng shuffler(seed, 0x5a00'0000ULL + static_cast<std::uint64_t>(epoch));
    shuffler.shuffle(order);
    double total = 0;
    int batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += bs) {
      std::vector<SizeExample> batch;
      for (std::size_t k = lo; k < std::min(order.size(), lo + bs); ++k)
        batch.push_back(data[order[k]]);
      SizeLoss res = size_loss(model, batch, Mode::kTrain, true);
      adam.step(model.params(), res.grads);
      total += res.loss;
      ++batches;
    }
    EpochStats st{ epoch, total / batches };
    history.push_back(st);
    if (on_epoch)
      on_epoch(st);
  }
  return history;
}

double size_accuracy(const SizeModel &model,
                     const std::vector<SizeExample> &data) {
  if (data.empty())
    return 0;
  int hits = 0;
  for (const auto &ex: data) {
    const Eigen::VectorXd p = predict_size_distribution(ex.fragments, model);
    Eigen::Index best = 0;
    p.maxCoeff(&best);
    hits += model.config().size_classes[best] == ex.size ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace linkdiff
