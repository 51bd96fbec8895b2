//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "linkdiff/diffusion.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "linkdiff/error.hpp"
#include "linkdiff/random.hpp"

namespace linkdiff {

const char *to_string(FrameMode mode) noexcept {
  return mode == FrameMode::kAnchorCentroid ? "anchor_centroid"
                                            : "context_centroid";
}

FrameMode frame_mode_from_string(const std::string &name) {
  if (name == "anchor_centroid")
    return FrameMode::kAnchorCentroid;
  if (name == "context_centroid")
    return FrameMode::kContextCentroid;
  throw Error(ErrorCode::kInvalidConfig, "unknown frame mode '" + name + "'");
}

EgnnConfig DiffusionConfig::egnn_config() const {
  EgnnConfig c;
  c.nf = nf;
  c.layers = layers;
  c.edge_mode = edge_mode;
  c.cutoff = cutoff;
  c.features.vocab_size = static_cast<int>(vocab.size());
  c.features.anchor_flag = frame == FrameMode::kAnchorCentroid;
  c.features.pocket_flag = pocket_flag;
  return c;
}

void DiffusionConfig::validate() const {
  if (vocab.empty())
    throw Error(ErrorCode::kInvalidConfig, "empty vocabulary");
  if (!(lift_scale > 0))
    throw Error(ErrorCode::kInvalidConfig, "lift scale must be positive");
  egnn_config().validate();
}

int vocab_index(const std::vector<std::string> &vocab, const std::string &sym) {
  for (std::size_t k = 0; k < vocab.size(); ++k)
    if (vocab[k] == sym)
      return static_cast<int>(k);
  throw Error(ErrorCode::kUnknownAtomType, "atom type '" + sym
                                               + "' not in vocabulary");
}

DenseMatrix lift_types(const std::vector<std::string> &types,
                       const std::vector<std::string> &vocab, double scale) {
  DenseMatrix out = DenseMatrix::Zero(static_cast<Eigen::Index>(types.size()),
                                      static_cast<Eigen::Index>(vocab.size()));
  for (std::size_t i = 0; i < types.size(); ++i)
    out(static_cast<Eigen::Index>(i), vocab_index(vocab, types[i])) = scale;
  return out;
}

std::vector<std::string> decode_types(const DenseMatrix &feats,
                                      const std::vector<std::string> &vocab) {
  if (feats.cols() != static_cast<Eigen::Index>(vocab.size()))
    throw Error(ErrorCode::kShapeMismatch, "feature width differs from vocab");
  std::vector<std::string> out;
  out.reserve(feats.rows());
  for (Eigen::Index i = 0; i < feats.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < feats.cols(); ++k)
      if (feats(i, k) > feats(i, best))
        best = k;
    out.push_back(vocab[best]);
  }
  return out;
}

Vec3d frame_origin(const PointCloud &u, FrameMode mode, bool include_pocket) {
  std::vector<int> rows;
  if (mode == FrameMode::kAnchorCentroid) {
    rows = u.select([](const AtomFlags &f) { return f.anchor; });
  } else {
    rows = u.select([include_pocket](const AtomFlags &f) {
      return f.fragment || (include_pocket && f.pocket);
    });
  }
  if (rows.empty())
    throw Error(ErrorCode::kEmptySelection,
                std::string("no atoms to define the ") + to_string(mode)
                    + " frame");
  return centroid(u.coords(rows, Eigen::all));
}

DiffusionModel::DiffusionModel(const DiffusionConfig &cfg, std::uint64_t seed)
    : cfg_(cfg), sched_(build_polynomial_schedule<double>(cfg.T, cfg.s)),
      egnn_(cfg.egnn_config(), seed) {
  cfg_.validate();
}

Vec3d DiffusionModel::frame_origin(const PointCloud &u) const {
  return linkdiff::frame_origin(u, cfg_.frame, cfg_.frame_includes_pocket);
}

PointCloud DiffusionModel::prepare_context(const PointCloud &u,
                                           const Vec3d &origin) const {
  PointCloud out;
  out.coords = u.coords.rowwise() - origin.transpose();
  out.features = lift_types(u.elements, cfg_.vocab, cfg_.lift_scale);
  out.elements = u.elements;
  out.flags = u.flags;
  return out;
}

TrainExample make_train_example(const PointCloud &molecule, std::string id) {
  TrainExample ex;
  ex.id = std::move(id);
  ex.context = molecule.context();
  const PointCloud linker = molecule.linker();
  ex.linker_coords = linker.coords;
  ex.linker_types = linker.elements;
  return ex;
}

NoiseDraw draw_training_noise(int n_linker, int vocab_size, int T,
                              CounterRng &rng) {
  NoiseDraw d;
  d.t = rng.uniform_int(0, T);
  d.eps_r.resize(n_linker, 3);
  d.eps_h.resize(n_linker, vocab_size);
  for (int i = 0; i < n_linker; ++i)
    for (int k = 0; k < 3; ++k)
      d.eps_r(i, k) = rng.normal();
  for (int i = 0; i < n_linker; ++i)
    for (int k = 0; k < vocab_size; ++k)
      d.eps_h(i, k) = rng.normal();
  return d;
}

double noise_mse(const Coords3d &eps_r, const DenseMatrix &eps_h,
                 const Coords3d &eps_r_hat, const DenseMatrix &eps_h_hat) {
  if (eps_r.rows() != eps_r_hat.rows() || eps_h.rows() != eps_h_hat.rows()
      || eps_h.cols() != eps_h_hat.cols())
    throw Error(ErrorCode::kShapeMismatch, "noise shapes differ");
  const double count = static_cast<double>(eps_r.size() + eps_h.size());
  if (count == 0)
    throw Error(ErrorCode::kEmptyLinker, "no linker atoms");
  return ((eps_r - eps_r_hat).squaredNorm()
          + (eps_h - eps_h_hat).squaredNorm())
         / count;
}

LossResult diffusion_loss(DiffusionModel &model,
                          const std::vector<TrainExample> &batch,
                          const std::vector<NoiseDraw> &draws, Mode mode,
                          bool with_grads) {
  if (batch.size() != draws.size() || batch.empty())
    throw Error(ErrorCode::kShapeMismatch, "one noise draw per example");
  const DiffusionConfig &cfg = model.config();
  const Schedule &sched = model.schedule();
  const int vocab = static_cast<int>(cfg.vocab.size());

  std::vector<GraphBatch> graphs;
  graphs.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const TrainExample &ex = batch[b];
    const NoiseDraw &d = draws[b];
    const auto n = ex.linker_coords.rows();
    if (n == 0)
      throw Error(ErrorCode::kEmptyLinker, "example '" + ex.id
                                               + "' has no linker atoms");
    if (d.eps_r.rows() != n || d.eps_h.rows() != n || d.eps_h.cols() != vocab)
      throw Error(ErrorCode::kShapeMismatch, "noise draw shape");
    sched.check_timestep(d.t);

    const Vec3d origin = model.frame_origin(ex.context);
    const PointCloud u = model.prepare_context(ex.context, origin);
    const Coords3d x_r = ex.linker_coords.rowwise() - origin.transpose();
    const DenseMatrix x_h = lift_types(ex.linker_types, cfg.vocab,
                                       cfg.lift_scale);

    PointCloud z;
    z.coords = sched.alpha[d.t] * x_r + sched.sigma[d.t] * d.eps_r;
    z.features = sched.alpha[d.t] * x_h + sched.sigma[d.t] * d.eps_h;
    z.flags.assign(n, AtomFlags::linker_atom());
    graphs.push_back(build_graph(z, u, model.egnn().config(),
                                 static_cast<double>(d.t) / sched.T));
  }

  const GraphBatch graph = merge_graphs(graphs);
  EgnnOutput out = egnn_forward(model.egnn(), graph, mode);

  LossResult res;
  const double nb = static_cast<double>(batch.size());
  Coords3d d_eps_r(out.eps_r.rows(), 3);
  DenseMatrix d_eps_h(out.eps_h.rows(), vocab);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const int lo = graph.linker_offsets[b];
    const auto n = static_cast<int>(draws[b].eps_r.rows());
    const Coords3d er = out.eps_r.middleRows(lo, n);
    const DenseMatrix eh = out.eps_h.middleRows(lo, n);
    const double l = noise_mse(draws[b].eps_r, draws[b].eps_h, er, eh);
    res.per_example.push_back(l);
    res.loss += l / nb;

    const double scale = 2.0 / (nb * n * (3 + vocab));
    d_eps_r.middleRows(lo, n) = scale * (er - draws[b].eps_r);
    d_eps_h.middleRows(lo, n) = scale * (eh - draws[b].eps_h);
  }

  if (mode == Mode::kTrain)
    update_running_stats(model.egnn(), out.tape);
  if (with_grads) {
    res.grads = zero_gradients(model.egnn().params());
    egnn_backward(model.egnn(), graph, out.tape, d_eps_r, d_eps_h, res.grads);
  }
  return res;
}

LossResult training_step(DiffusionModel &model,
                         const std::vector<TrainExample> &batch,
                         std::uint64_t seed) {
  const int vocab = static_cast<int>(model.config().vocab.size());
  std::vector<NoiseDraw> draws;
  draws.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    CounterRng rng(seed, b);
    draws.push_back(draw_training_noise(
        static_cast<int>(batch[b].linker_coords.rows()), vocab,
        model.schedule().T, rng));
  }
  return diffusion_loss(model, batch, draws, Mode::kTrain, true);
}

void CounterNoise::draw(int step, Coords3d &coords, DenseMatrix &feats) {
  CounterRng rng(seed_, static_cast<std::uint64_t>(step));
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    for (int k = 0; k < 3; ++k)
      coords(i, k) = rng.normal();
  for (Eigen::Index i = 0; i < feats.rows(); ++i)
    for (Eigen::Index k = 0; k < feats.cols(); ++k)
      feats(i, k) = rng.normal();
}

void RotatedNoise::draw(int step, Coords3d &coords, DenseMatrix &feats) {
  inner_->draw(step, coords, feats);
  coords = coords * rot_.transpose();
}

DecodedLinker decode_final(const PointCloud &z0, const PointCloud &u_prepared,
                           const DiffusionModel &model) {
  const Schedule &sched = model.schedule();
  const NoisePrediction eps =
      predict_noise(z0, u_prepared, 0, sched.T, model.egnn(), Mode::kEval);
  const double a0 = sched.alpha[0], s0 = sched.sigma[0];
  DecodedLinker out;
  out.coords = (z0.coords - s0 * eps.eps_r) / a0;
  out.features = (z0.features - s0 * eps.eps_h) / a0;
  out.types = decode_types(out.features, model.config().vocab);
  return out;
}

SampleRecord sample_linker(const DiffusionModel &model, const PointCloud &u,
                           int n_linker, NoiseSource &noise) {
  if (n_linker < 1)
    throw Error(ErrorCode::kEmptyLinker, "linker size must be >= 1");
  if (u.empty())
    throw Error(ErrorCode::kEmptySelection, "empty context");
  const Schedule &sched = model.schedule();
  const int vocab = static_cast<int>(model.config().vocab.size());

  const Vec3d origin = model.frame_origin(u);
  const PointCloud uc = model.prepare_context(u, origin);

  PointCloud z;
  z.coords.resize(n_linker, 3);
  z.features.resize(n_linker, vocab);
  z.flags.assign(n_linker, AtomFlags::linker_atom());
  noise.draw(0, z.coords, z.features);

  Coords3d step_r(n_linker, 3);
  DenseMatrix step_h(n_linker, vocab);
  for (int t = sched.T; t >= 1; --t) {
    Coords3d mu_r;
    DenseMatrix mu_h;
    if (sched.alpha_step[t] == 0.0) {
      // alpha_t = 0: z_t carries no signal and x_hat is undefined; the
      // posterior mean is taken at x_hat = 0, the frame origin.
      mu_r = posterior_params(Coords3d::Zero(n_linker, 3), z.coords, t, sched)
                 .mu;
      mu_h = posterior_params(DenseMatrix::Zero(n_linker, vocab), z.features,
                              t, sched)
                 .mu;
    } else {
      const auto c = denoising_step_coefficients(t, sched);
      const NoisePrediction eps =
          predict_noise(z, uc, t, sched.T, model.egnn(), Mode::kEval);
      mu_r = c.c_z * z.coords - c.c_eps * eps.eps_r;
      mu_h = c.c_z * z.features - c.c_eps * eps.eps_h;
    }
    if (t > 1) {
      noise.draw(t, step_r, step_h);
      const double c_noise = sched.varsigma[t];
      z.coords = mu_r + c_noise * step_r;
      z.features = mu_h + c_noise * step_h;
    } else {
      z.coords = std::move(mu_r);
      z.features = std::move(mu_h);
    }
  }

  DecodedLinker x = decode_final(z, uc, model);

  PointCloud linker;
  linker.coords = x.coords.rowwise() + origin.transpose();
  linker.elements = std::move(x.types);
  linker.flags.assign(n_linker, AtomFlags::linker_atom());

  PointCloud frags = u.fragments();
  frags.features.resize(0, 0);
  SampleRecord rec;
  rec.n_linker = n_linker;
  rec.molecule = concat(frags, linker);
  return rec;
}

SampleRecord sample_linker(const DiffusionModel &model, const PointCloud &u,
                           int n_linker, std::uint64_t seed) {
  CounterNoise noise(seed);
  SampleRecord rec = sample_linker(model, u, n_linker, noise);
  rec.seed = seed;
  return rec;
}

TranslationGain translation_lambda_check(const DiffusionModel &model, int t,
                                         const PointCloud &z_t,
                                         const PointCloud &u,
                                         const Vec3d &shift) {
  const Schedule &sched = model.schedule();
  sched.check_timestep(t, 1);
  if (sched.alpha_step[t] == 0.0)
    throw Error(ErrorCode::kInvalidSchedule,
                "translation gain undefined where alpha_t = 0");
  const auto c = denoising_step_coefficients(t, sched);

  auto mean_coords = [&](const Vec3d &s) {
    PointCloud z = z_t;
    z.coords.rowwise() += s.transpose();
    PointCloud uu = model.prepare_context(u, -s);
    const NoisePrediction eps =
        predict_noise(z, uu, t, sched.T, model.egnn(), Mode::kEval);
    return Coords3d(c.c_z * z.coords - c.c_eps * eps.eps_r);
  };

  const Coords3d diff = mean_coords(shift) - mean_coords(Vec3d::Zero());
  TranslationGain gain;
  gain.max_abs_diff = diff.size() ? diff.cwiseAbs().maxCoeff() : 0.0;
  double sum = 0;
  int count = 0;
  for (int k = 0; k < 3; ++k) {
    if (shift(k) == 0.0)
      continue;
    for (Eigen::Index i = 0; i < diff.rows(); ++i) {
      sum += diff(i, k) / shift(k);
      ++count;
    }
  }
  gain.lambda = count ? sum / count : 0.0;
  return gain;
}

std::vector<EpochStats> train_diffusion(DiffusionModel &model,
                                        const std::vector<TrainExample> &data,
                                        const TrainOptions &opts,
                                        std::uint64_t seed,
                                        const EpochCallback &on_epoch) {
  if (data.empty())
    throw Error(ErrorCode::kEmptySelection, "no training examples");
  const int bs = std::max(1, opts.batch_size);
  Adam adam(model.egnn().params(), opts.adam);
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochStats> history;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    CounterRng shuffler(seed, 0x5348'0000ULL + static_cast<std::uint64_t>(epoch));
    shuffler.shuffle(order);
    double total = 0;
    int batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += bs) {
      std::vector<TrainExample> batch;
      for (std::size_t k = lo; k < std::min(order.size(), lo + bs); ++k)
        batch.push_back(data[order[k]]);
      const std::uint64_t step_seed =
          splitmix64(seed ^ splitmix64((std::uint64_t(epoch) << 32) | lo));
      LossResult res = training_step(model, batch, step_seed);
      adam.step(model.egnn().params(), res.grads);
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

}  // namespace linkdiff
