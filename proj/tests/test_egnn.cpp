//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <doctest.h>

#include "linkdiff/egnn.hpp"
#include "linkdiff/error.hpp"
#include "test_support.hpp"

using namespace linkdiff;
using linkdiff::testing::random_coords;
using linkdiff::testing::random_orthogonal;
using linkdiff::testing::random_vec;
using linkdiff::testing::randomize_params;

namespace {

EgnnConfig small_config(int nf = 4, int layers = 2, int vocab = 3) {
  EgnnConfig cfg;
  cfg.nf = nf;
  cfg.layers = layers;
  cfg.features.vocab_size = vocab;
  cfg.features.anchor_flag = true;
  cfg.features.pocket_flag = true;
  return cfg;
}

DenseMatrix random_features(CounterRng &rng, int n, int vocab) {
  DenseMatrix f(n, vocab);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < vocab; ++k)
      f(i, k) = rng.normal();
  return f;
}

PointCloud linker_cloud(CounterRng &rng, int n, int vocab) {
  PointCloud c;
  c.coords = random_coords(rng, n, 1.0);
  c.features = random_features(rng, n, vocab);
  c.flags.assign(n, AtomFlags::linker_atom());
  return c;
}

PointCloud context_cloud(CounterRng &rng, int n_frag, int n_pocket, int vocab,
                         double pocket_scale = 3.0) {
  PointCloud c;
  c.coords.resize(n_frag + n_pocket, 3);
  c.coords.topRows(n_frag) = random_coords(rng, n_frag, 1.5);
  c.coords.bottomRows(n_pocket) = random_coords(rng, n_pocket, pocket_scale);
  c.features = random_features(rng, n_frag + n_pocket, vocab);
  for (int i = 0; i < n_frag; ++i)
    c.flags.push_back(AtomFlags::fragment_atom(i == 0));
  for (int i = 0; i < n_pocket; ++i)
    c.flags.push_back(AtomFlags::pocket_atom());
  return c;
}

// Random weights plus non-trivial running statistics, so eval-mode batch
// norm is not the identity.
EgnnModel random_model(const EgnnConfig &cfg, std::uint64_t seed) {
  EgnnModel m(cfg, seed);
  CounterRng rng(seed, 99);
  randomize_params(m.params(), rng, 0.4);
  for (int i = 0; i < m.params().size(); ++i) {
    const std::string &name = m.params().name(i);
    DenseMatrix &v = m.params().value(i);
    if (name.ends_with("running_mean"))
      for (Eigen::Index k = 0; k < v.size(); ++k)
        v.data()[k] = 0.2 * rng.normal();
    else if (name.ends_with("running_var"))
      for (Eigen::Index k = 0; k < v.size(); ++k)
        v.data()[k] = rng.uniform(0.5, 2.0);
  }
  return m;
}

// ---- scalar-loop reference ------------------------------------------------

using Vec = std::vector<double>;

double scalar_silu(double x) { return x / (1 + std::exp(-x)); }

Vec dense(const ParamStore &s, const std::string &name, const Vec &x) {
  const DenseMatrix &w = s.value(s.find(name + ".weight"));
  const DenseMatrix &b = s.value(s.find(name + ".bias"));
  Vec y(w.cols());
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    double acc = b(0, j);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      acc += x[i] * w(i, j);
    y[j] = acc;
  }
  return y;
}

Vec eval_norm(const ParamStore &s, const std::string &name, Vec z) {
  const DenseMatrix &g = s.value(s.find(name + ".bn.gamma"));
  const DenseMatrix &b = s.value(s.find(name + ".bn.beta"));
  const DenseMatrix &m = s.value(s.find(name + ".bn.running_mean"));
  const DenseMatrix &v = s.value(s.find(name + ".bn.running_var"));
  for (std::size_t j = 0; j < z.size(); ++j)
    z[j] = g(0, j) * (z[j] - m(0, j)) / std::sqrt(v(0, j) + 1e-5) + b(0, j);
  return z;
}

Vec silu_all(Vec z) {
  for (double &x: z)
    x = scalar_silu(x);
  return z;
}

Vec cat(const Vec &a, const Vec &b) {
  Vec c = a;
  c.insert(c.end(), b.begin(), b.end());
  return c;
}

struct Reference {
  std::vector<Vec> eps_h;
  std::vector<std::array<double, 3>> eps_r;
};

// Eval-mode forward written node by node, independent of the batched code.
Reference reference_forward(const EgnnModel &m, const GraphBatch &g) {
  const ParamStore &s = m.params();
  const int n = g.num_nodes(), L = m.config().layers;
  std::vector<Vec> h(n);
  std::vector<std::array<double, 3>> r(n);
  for (int i = 0; i < n; ++i) {
    Vec x(g.features.cols());
    for (Eigen::Index k = 0; k < g.features.cols(); ++k)
      x[k] = g.features(i, k);
    h[i] = dense(s, "encoder", x);
    for (int k = 0; k < 3; ++k)
      r[i][k] = g.coords(i, k);
  }
  // Adjacency as a set of (receiver, sender) pairs.
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  for (int e = 0; e < g.num_edges(); ++e)
    adj[g.receivers[e]][g.senders[e]] = 1;

  for (int l = 0; l < L; ++l) {
    const std::string p = "egcl" + std::to_string(l);
    std::vector<Vec> h_next(n);
    std::vector<std::array<double, 3>> r_next = r;
    for (int i = 0; i < n; ++i) {
      Vec agg(h[i].size(), 0.0);
      for (int j = 0; j < n; ++j) {
        if (!adj[i][j])
          continue;
        double d2 = 0;
        for (int k = 0; k < 3; ++k)
          d2 += (r[i][k] - r[j][k]) * (r[i][k] - r[j][k]);
        Vec in = cat(h[i], h[j]);
        in.push_back(d2);
        const Vec msg = silu_all(dense(s, p + ".phi_e.1",
                                       silu_all(dense(s, p + ".phi_e.0", in))));
        for (std::size_t k = 0; k < agg.size(); ++k)
          agg[k] += msg[k];
        const Vec rad = dense(
            s, p + ".phi_r.2",
            silu_all(dense(s, p + ".phi_r.1",
                           silu_all(dense(s, p + ".phi_r.0", in)))));
        if (g.movable[i])
          for (int k = 0; k < 3; ++k)
            r_next[i][k] += (r[i][k] - r[j][k]) / (std::sqrt(d2) + 1) * rad[0];
      }
      const Vec a = silu_all(eval_norm(s, p + ".phi_h.0",
                                       dense(s, p + ".phi_h.0", cat(h[i], agg))));
      const Vec upd = eval_norm(s, p + ".phi_h.1", dense(s, p + ".phi_h.1", a));
      h_next[i] = h[i];
      for (std::size_t k = 0; k < upd.size(); ++k)
        h_next[i][k] += upd[k];
    }
    h = std::move(h_next);
    r = std::move(r_next);
  }
  Reference ref;
  for (int i: g.linker_nodes) {
    Vec dec = dense(s, "decoder", h[i]);
    dec.resize(m.config().features.vocab_size);
    ref.eps_h.push_back(dec);
    std::array<double, 3> d;
    for (int k = 0; k < 3; ++k)
      d[k] = r[i][k] - g.coords(i, k);
    ref.eps_r.push_back(d);
  }
  return ref;
}

}  // namespace

TEST_CASE("edge modes") {
  CounterRng rng(1, 0);
  const int vocab = 3;
  const PointCloud z = linker_cloud(rng, 3, vocab);
  const PointCloud u = context_cloud(rng, 4, 6, vocab, 4.0);
  const int n = z.size() + u.size();

  EgnnConfig cfg = small_config();
  GraphBatch g = build_graph(z, u, cfg);
  CHECK(g.num_edges() == n * (n - 1));
  CHECK(g.num_nodes() == n);
  CHECK(g.linker_nodes == std::vector<int>{ 0, 1, 2 });

  for (double cutoff: { 1.0, 2.5, 4.0, 8.0 }) {
    cfg.cutoff = cutoff;
    for (EdgeMode mode: { EdgeMode::kPocketCutoff, EdgeMode::kGlobalCutoff }) {
      cfg.edge_mode = mode;
      g = build_graph(z, u, cfg);
      // Brute force over all ordered pairs.
      std::vector<std::pair<int, int>> expected;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (i == j)
            continue;
          const bool pi = i >= z.size() && u.flags[i - z.size()].pocket;
          const bool pj = j >= z.size() && u.flags[j - z.size()].pocket;
          const double d = (g.coords.row(i) - g.coords.row(j)).norm();
          const bool filtered = mode == EdgeMode::kGlobalCutoff || pi || pj;
          if (!filtered || d < cutoff)
            expected.emplace_back(i, j);
        }
      std::vector<std::pair<int, int>> got;
      for (int e = 0; e < g.num_edges(); ++e)
        got.emplace_back(g.receivers[e], g.senders[e]);
      std::sort(got.begin(), got.end());
      CHECK(got == expected);
    }
  }

  CHECK(edge_mode_from_string("pocket_cutoff") == EdgeMode::kPocketCutoff);
  CHECK(std::string(to_string(EdgeMode::kGlobalCutoff)) == "global_cutoff");
  CHECK_THROWS_AS(edge_mode_from_string("radius"), Error);
}

TEST_CASE("node features") {
  CounterRng rng(2, 0);
  const PointCloud z = linker_cloud(rng, 2, 3);
  const PointCloud u = context_cloud(rng, 3, 2, 3);
  const EgnnConfig cfg = small_config();
  const GraphBatch g = build_graph(z, u, cfg, 0.25);
  const FeatureLayout &lay = cfg.features;
  REQUIRE(g.features.cols() == 3 + 4);
  for (int i = 0; i < g.num_nodes(); ++i) {
    CHECK(g.features(i, lay.time_col()) == 0.25);
    const bool lin = i < 2;
    CHECK(g.movable[i] == (lin ? 1 : 0));
    const AtomFlags f = lin ? AtomFlags::linker_atom() : u.flags[i - 2];
    CHECK(g.features(i, lay.fragment_col()) == (f.fragment ? 1.0 : 0.0));
    CHECK(g.features(i, lay.anchor_col()) == (f.anchor ? 1.0 : 0.0));
    CHECK(g.features(i, lay.pocket_col()) == (f.pocket ? 1.0 : 0.0));
  }
  CHECK(g.features.row(0).head(3) == z.features.row(0));
  CHECK(g.features.row(4).head(3) == u.features.row(2));

  PointCloud bad = z;
  bad.features = DenseMatrix::Zero(2, 4);
  CHECK_THROWS_AS(build_graph(bad, u, cfg), Error);
}

TEST_CASE("fresh model predicts zero coordinate noise") {
  CounterRng rng(3, 0);
  const EgnnConfig cfg = small_config(8, 3);
  const EgnnModel m(cfg, 7);
  const PointCloud z = linker_cloud(rng, 4, 3);
  const PointCloud u = context_cloud(rng, 5, 0, 3);
  const NoisePrediction p = predict_noise(z, u, 10, 100, m);
  CHECK(p.eps_r.rows() == 4);
  CHECK(p.eps_r.cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.eps_h.rows() == 4);
  CHECK(p.eps_h.cols() == 3);
  CHECK_THROWS_AS(predict_noise(z, u, 101, 100, m), Error);
}

TEST_CASE("single linker node without context") {
  CounterRng rng(4, 0);
  const EgnnConfig cfg = small_config();
  const EgnnModel m = random_model(cfg, 11);
  const PointCloud z = linker_cloud(rng, 1, 3);
  PointCloud u;
  u.coords.resize(0, 3);
  u.features.resize(0, 3);
  const GraphBatch g = build_graph(z, u, cfg);
  CHECK(g.num_edges() == 0);
  const EgnnOutput out = egnn_forward(m, g, Mode::kEval);
  CHECK(out.eps_r.cwiseAbs().maxCoeff() == 0.0);
  CHECK(out.eps_h.allFinite());
}

TEST_CASE("forward matches a node-by-node reference") {
  for (int trial = 0; trial < 10; ++trial) {
    CounterRng rng(5, trial);
    EgnnConfig cfg = small_config(1 + trial % 4, 1 + trial % 3);
    if (trial % 2)
      cfg.edge_mode = EdgeMode::kPocketCutoff;
    const EgnnModel m = random_model(cfg, 100 + trial);
    // The smallest case is three nodes with a one-dimensional hidden state.
    const int n_lin = trial == 0 ? 1 : 3, n_frag = trial == 0 ? 2 : 4;
    const PointCloud z = linker_cloud(rng, n_lin, 3);
    const PointCloud u = context_cloud(rng, n_frag, trial == 0 ? 0 : 3, 3);
    const GraphBatch g = build_graph(z, u, cfg, 0.3);
    const EgnnOutput out = egnn_forward(m, g, Mode::kEval);
    const Reference ref = reference_forward(m, g);
    for (int i = 0; i < n_lin; ++i) {
      for (int k = 0; k < 3; ++k) {
        CHECK(out.eps_r(i, k) == doctest::Approx(ref.eps_r[i][k]).epsilon(1e-10));
        CHECK(out.eps_h(i, k) == doctest::Approx(ref.eps_h[i][k]).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("context coordinates stay fixed") {
  CounterRng rng(6, 0);
  const EgnnConfig cfg = small_config(6, 3);
  const EgnnModel m = random_model(cfg, 5);
  const PointCloud z = linker_cloud(rng, 3, 3);
  const PointCloud u = context_cloud(rng, 4, 3, 3);
  const GraphBatch g = build_graph(z, u, cfg, 0.5);
  const EgnnOutput out = egnn_forward(m, g, Mode::kEval);
  CHECK(out.final_coords.bottomRows(u.size()) == g.coords.bottomRows(u.size()));
  CHECK((out.final_coords.topRows(3) - g.coords.topRows(3)).cwiseAbs().maxCoeff()
        > 1e-6);
}

TEST_CASE("permutation equivariance") {
  CounterRng rng(7, 0);
  const EgnnConfig cfg = small_config(6, 2);
  const EgnnModel m = random_model(cfg, 8);
  const PointCloud z = linker_cloud(rng, 5, 3);
  const PointCloud u = context_cloud(rng, 4, 2, 3);
  const NoisePrediction base = predict_noise(z, u, 30, 100, m);

  const std::vector<int> lp{ 3, 0, 4, 1, 2 };
  const std::vector<int> cp{ 5, 2, 0, 4, 1, 3 };
  const NoisePrediction p = predict_noise(z.subset(lp), u.subset(cp), 30, 100, m);
  for (int i = 0; i < 5; ++i) {
    CHECK((p.eps_r.row(i) - base.eps_r.row(lp[i])).norm() < 1e-10);
    CHECK((p.eps_h.row(i) - base.eps_h.row(lp[i])).norm() < 1e-10);
  }
}

TEST_CASE("E(3) equivariance over random transforms") {
  for (EdgeMode mode: { EdgeMode::kFullyConnected, EdgeMode::kPocketCutoff }) {
    EgnnConfig cfg = small_config(8, 3);
    cfg.edge_mode = mode;
    const EgnnModel m = random_model(cfg, 9);
    // Errors relative to the output scale.
    double worst_r = 0, worst_h = 0;
    for (int trial = 0; trial < 50; ++trial) {
      CounterRng rng(8, trial);
      const PointCloud z = linker_cloud(rng, 4, 3);
      const PointCloud u = context_cloud(rng, 5, 4, 3);
      const NoisePrediction base = predict_noise(z, u, 40, 100, m);
      // Proper and improper rotations plus a translation.
      const Isometry3d iso(random_orthogonal(rng, true), random_vec(rng, 5.0));
      const NoisePrediction p = predict_noise(apply_isometry(iso, z),
                                              apply_isometry(iso, u), 40, 100, m);
      const Coords3d rotated = base.eps_r * iso.rotation().transpose();
      const double sr = std::max(1.0, base.eps_r.cwiseAbs().maxCoeff());
      const double sh = std::max(1.0, base.eps_h.cwiseAbs().maxCoeff());
      worst_r = std::max(worst_r,
                         (p.eps_r - rotated).cwiseAbs().maxCoeff() / sr);
      worst_h = std::max(worst_h,
                         (p.eps_h - base.eps_h).cwiseAbs().maxCoeff() / sh);
    }
    CHECK(worst_r < 1e-9);
    CHECK(worst_h < 1e-9);
  }
}

TEST_CASE("merged batches match separate graphs") {
  CounterRng rng(9, 0);
  const EgnnConfig cfg = small_config(5, 2);
  const EgnnModel m = random_model(cfg, 10);
  std::vector<GraphBatch> graphs;
  for (int k = 0; k < 3; ++k)
    graphs.push_back(build_graph(linker_cloud(rng, 2 + k, 3),
                                 context_cloud(rng, 3, k, 3), cfg, 0.1 * k));
  const GraphBatch merged = merge_graphs(graphs);
  CHECK(merged.num_graphs() == 3);
  CHECK(merged.linker_offsets == std::vector<int>{ 0, 2, 5, 9 });
  const EgnnOutput all = egnn_forward(m, merged, Mode::kEval);
  for (int k = 0; k < 3; ++k) {
    const EgnnOutput one = egnn_forward(m, graphs[k], Mode::kEval);
    const int off = merged.linker_offsets[k];
    CHECK((all.eps_r.middleRows(off, 2 + k) - one.eps_r).cwiseAbs().maxCoeff()
          < 1e-12);
    CHECK((all.eps_h.middleRows(off, 2 + k) - one.eps_h).cwiseAbs().maxCoeff()
          < 1e-12);
  }
}

TEST_CASE("backward matches finite differences") {
  for (Mode mode: { Mode::kEval, Mode::kTrain }) {
    CounterRng rng(10, mode == Mode::kTrain);
    EgnnConfig cfg = small_config(3, 2);
    cfg.edge_mode = EdgeMode::kPocketCutoff;
    EgnnModel m = random_model(cfg, 12);
    const GraphBatch g = merge_graphs(
        { build_graph(linker_cloud(rng, 3, 3), context_cloud(rng, 3, 2, 3), cfg,
                      0.2),
          build_graph(linker_cloud(rng, 2, 3), context_cloud(rng, 2, 0, 3), cfg,
                      0.7) });
    const Coords3d a = random_coords(rng, 5, 1.0);
    const DenseMatrix b = random_features(rng, 5, 3);
    auto loss = [&] {
      const EgnnOutput o = egnn_forward(m, g, mode);
      return (o.eps_r.array() * a.array()).sum()
             + (o.eps_h.array() * b.array()).sum();
    };
    EgnnOutput out = egnn_forward(m, g, mode);
    Gradients grads = zero_gradients(m.params());
    egnn_backward(m, g, out.tape, a, b, grads);
    // In train mode the bias in front of each batch norm has an exactly zero
    // gradient; checked directly rather than against rounding noise.
    auto pre_norm_bias = [](const std::string &name) {
      return name.find("phi_h") != std::string::npos && name.ends_with(".bias")
             && name.find(".bn.") == std::string::npos;
    };
    if (mode == Mode::kTrain)
      for (int i = 0; i < m.params().size(); ++i)
        if (pre_norm_bias(m.params().name(i)))
          CHECK(grads[i].cwiseAbs().maxCoeff() < 1e-12);
    const auto res = linkdiff::testing::gradcheck(
        m.params(), grads, loss, 1e-5, 1e-5, [&](const std::string &name) {
          return mode == Mode::kEval || !pre_norm_bias(name);
        });
    INFO("worst " << res.worst);
    CHECK(res.checked > 100);
    CHECK(res.max_rel_error < 1e-4);
  }
}

TEST_CASE("running statistics change only on request") {
  CounterRng rng(11, 0);
  const EgnnConfig cfg = small_config(4, 2);
  EgnnModel m(cfg, 13);
  const GraphBatch g = build_graph(linker_cloud(rng, 3, 3),
                                   context_cloud(rng, 4, 0, 3), cfg, 0.5);
  const int rm = m.params().find("egcl0.phi_h.0.bn.running_mean");
  REQUIRE(rm >= 0);
  const DenseMatrix before = m.params().value(rm);
  const EgnnOutput out = egnn_forward(m, g, Mode::kTrain);
  CHECK(m.params().value(rm) == before);
  update_running_stats(m, out.tape);
  CHECK(m.params().value(rm) != before);
}
