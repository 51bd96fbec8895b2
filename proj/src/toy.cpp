//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "linkdiff/toy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "linkdiff/chem.hpp"
#include "linkdiff/error.hpp"
#include "linkdiff/random.hpp"

namespace linkdiff {

namespace {
  struct Template {
    std::vector<std::string> elements;
    std::vector<Vec3d> pos;       // ring centroid at the origin, ring in xy
    std::vector<int> anchor_ok;   // ring carbons without a substituent
  };

  Template ring(int size, double bond, int hetero_at, const char *hetero) {
    Template t;
    const double radius = bond / (2 * std::sin(std::numbers::pi / size));
    for (int k = 0; k < size; ++k) {
      const double a = 2 * std::numbers::pi * k / size;
      t.pos.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.0);
      t.elements.emplace_back(k == hetero_at ? hetero : "C");
      if (k != hetero_at)
        t.anchor_ok.push_back(k);
    }
    return t;
  }

  Template make_template(int kind) {
    switch (kind) {
    case 0:
      return ring(6, 1.39, -1, "C");
    case 1:
      return ring(6, 1.39, 3, "N");
    case 2: {
      Template t = ring(6, 1.39, -1, "C");
      t.pos.push_back(t.pos[3].normalized() * (1.39 + 1.35));
      t.elements.emplace_back("F");
      std::erase(t.anchor_ok, 3);
      return t;
    }
    default:
      return ring(5, 1.40, 2, "O");
    }
  }

  Vec3d random_unit(CounterRng &rng) {
    Vec3d v;
    do {
      v = Vec3d(rng.normal(), rng.normal(), rng.normal());
    } while (v.norm() < 1e-6);
    return v.normalized();
  }

  Vec3d perpendicular_unit(const Vec3d &a, CounterRng &rng) {
    Vec3d v;
    do {
      v = random_unit(rng);
      v -= v.dot(a) * a;
    } while (v.norm() < 1e-3);
    return v.normalized();
  }

  Vec3d ball_point(double radius, CounterRng &rng) {
    Vec3d v;
    do {
      v = Vec3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    } while (v.squaredNorm() > 1.0);
    return radius * v;
  }

  Mat3d random_rotation(CounterRng &rng) {
    const Vec3d a = random_unit(rng);
    const Vec3d b = perpendicular_unit(a, rng);
    Mat3d r;
    r.col(0) = a;
    r.col(1) = b;
    r.col(2) = a.cross(b);
    return r;
  }

  struct Builder {
    std::vector<std::string> elements;
    std::vector<Vec3d> pos;
    std::vector<AtomFlags> flags;

    void add(const std::string &el, const Vec3d &p, AtomFlags f) {
      elements.push_back(el);
      pos.push_back(p);
      flags.push_back(f);
    }

    PointCloud cloud() const {
      PointCloud c;
      c.coords.resize(static_cast<Eigen::Index>(pos.size()), 3);
      for (std::size_t i = 0; i < pos.size(); ++i)
        for (int k = 0; k < 3; ++k)
          c.coords(static_cast<Eigen::Index>(i), k) =
              std::round(pos[i][k] * 1e6) / 1e6;
      c.elements = elements;
      c.flags = flags;
      return c;
    }
  };

  // Places a template so that its anchor sits at `anchor_pos` with the ring
  // pointing away along -dir.
  void place_fragment(Builder &b, int kind, const Vec3d &anchor_pos,
                      const Vec3d &dir, CounterRng &rng) {
    const Template t = make_template(kind);
    const int anchor = t.anchor_ok[rng.uniform_int(
        0, static_cast<int>(t.anchor_ok.size()) - 1)];
    const Vec3d e = t.pos[anchor].normalized();
    const Vec3d z(0, 0, 1);
    Mat3d local, world;
    local << e, z, e.cross(z);
    const Vec3d spin = perpendicular_unit(dir, rng);
    // The anchor's outward direction must point along dir.
    world << dir, spin, dir.cross(spin);
    const Mat3d rot = world * local.transpose();
    for (std::size_t k = 0; k < t.pos.size(); ++k)
      b.add(t.elements[k], anchor_pos + rot * (t.pos[k] - t.pos[anchor]),
            AtomFlags::fragment_atom(static_cast<int>(k) == anchor));
  }

  std::string pick_linker_element(const ToyConfig &cfg, CounterRng &rng) {
    double total = 0;
    for (double w: cfg.linker_weights)
      total += w;
    double u = rng.uniform() * total;
    for (std::size_t k = 0; k < cfg.linker_elements.size(); ++k) {
      u -= cfg.linker_weights[k];
      if (u < 0)
        return cfg.linker_elements[k];
    }
    return cfg.linker_elements.back();
  }

  std::vector<Vec3d> arm_directions(int k, CounterRng &rng) {
    const Mat3d rot = random_rotation(rng);
    std::vector<Vec3d> dirs;
    if (k == 3) {
      for (int i = 0; i < 3; ++i) {
        const double a = 2 * std::numbers::pi * i / 3;
        dirs.push_back(rot * Vec3d(std::cos(a), std::sin(a), 0));
      }
    } else {
      for (const Vec3d &d: { Vec3d(1, 1, 1), Vec3d(1, -1, -1),
                             Vec3d(-1, 1, -1), Vec3d(-1, -1, 1) })
        dirs.push_back(rot * d.normalized());
    }
    return dirs;
  }

  Builder build_example(const ToyConfig &cfg, CounterRng &rng) {
    Builder b;
    const int k = rng.uniform_int(cfg.min_fragments, cfg.max_fragments);
    const Vec3d center(rng.uniform(-5, 5), rng.uniform(-5, 5),
                       rng.uniform(-5, 5));
    std::vector<std::pair<std::string, Vec3d>> linker;
    if (k == 2) {
      const double gap = rng.uniform(cfg.gap_min, cfg.gap_max);
      const int n = std::clamp(static_cast<int>(std::lround(gap / cfg.spacing)),
                               1, 4);
      const double span = (n + 1) * cfg.spacing;
      const Vec3d axis = random_unit(rng);
      const Vec3d a0 = center - 0.5 * span * axis;
      const Vec3d a1 = center + 0.5 * span * axis;
      place_fragment(b, rng.uniform_int(0, 3), a0, axis, rng);
      place_fragment(b, rng.uniform_int(0, 3), a1, -axis, rng);
      for (int i = 1; i <= n; ++i)
        linker.emplace_back(pick_linker_element(cfg, rng),
                            a0 + i * cfg.spacing * axis
                                + ball_point(cfg.jitter, rng));
    } else {
      linker.emplace_back("C", center + ball_point(cfg.jitter, rng));
      for (const Vec3d &dir: arm_directions(k, rng)) {
        const int m = rng.uniform_int(0, 2);
        for (int i = 1; i <= m; ++i)
          linker.emplace_back(pick_linker_element(cfg, rng),
                              center + i * cfg.spacing * dir
                                  + ball_point(cfg.jitter, rng));
        // The anchor faces the hub; the ring extends outwards.
        place_fragment(b, rng.uniform_int(0, 3),
                       center + (m + 1) * cfg.spacing * dir, -dir, rng);
      }
    }
    for (const auto &[el, p]: linker)
      b.add(el, p, AtomFlags::linker_atom());

    if (cfg.pocket) {
      Vec3d mid = Vec3d::Zero();
      for (const Vec3d &p: b.pos)
        mid += p;
      mid /= static_cast<double>(b.pos.size());
      double reach = 0;
      for (const Vec3d &p: b.pos)
        reach = std::max(reach, (p - mid).norm());
      const char *pocket_el[] = { "C", "N", "O" };
      for (int i = 0; i < 24; ++i)
        b.add(pocket_el[rng.uniform_int(0, 2)],
              mid + (reach + 3.5) * random_unit(rng),
              AtomFlags::pocket_atom());
    }
    return b;
  }

  bool self_check(const PointCloud &c) {
    const ElementTable &table = ElementTable::builtin();
    const PointCloud mol = c.subset(
        c.select([](const AtomFlags &f) { return !f.pocket; }));
    const MoleculeGraph g = perceive_bonds(mol, table);
    if (!check_validity(g, c.fragments(), table))
      return false;
    const PointCloud pocket = c.pocket();
    return pocket.empty() || count_clashes(mol, pocket, table) == 0;
  }

  std::string record_id(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "toy_%06d", i);
    return buf;
  }
}  // namespace

ToyDataset generate_toy_dataset(int n, std::uint64_t seed,
                                const ToyConfig &cfg) {
  if (n < 1)
    throw Error(ErrorCode::kInvalidConfig, "toy dataset needs n >= 1");
  if (cfg.min_fragments < 2 || cfg.max_fragments > 4
      || cfg.min_fragments > cfg.max_fragments)
    throw Error(ErrorCode::kInvalidConfig, "fragments per example must be 2-4");
  if (cfg.linker_elements.empty()
      || cfg.linker_elements.size() != cfg.linker_weights.size())
    throw Error(ErrorCode::kInvalidConfig, "linker element weights mismatch");

  ToyDataset ds;
  std::set<int> sizes;
  const int n_test = std::clamp(
      static_cast<int>(std::lround(n * cfg.test_fraction)), n > 1 ? 1 : 0,
      n - 1);
  const int n_train = n - n_test;
  for (int i = 0; i < n; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    PointCloud cloud = build_example(cfg, rng).cloud();
    for (int attempt = 1; !self_check(cloud); ++attempt) {
      if (attempt == 1000)
        throw Error(ErrorCode::kInvalidConfig,
                    "toy generator cannot produce a valid example");
      cloud = build_example(cfg, rng).cloud();
    }

    XyzRecord rec;
    rec.cloud = std::move(cloud);
    rec.meta["id"] = record_id(i);
    rec.meta["role"] = "complex";
    const int n_linker = rec.cloud.linker().size();
    rec.meta["linker_size"] = std::to_string(n_linker);
    sizes.insert(n_linker);
    const bool is_test = i >= n_train;
    ds.manifest.splits[is_test ? "test" : "train"].push_back(rec.id());
    (is_test ? ds.test : ds.train).push_back(std::move(rec));
  }
  ds.manifest.vocab = { "C", "N", "O", "F" };
  ds.manifest.size_classes.assign(sizes.begin(), sizes.end());
  ds.manifest.framing = FrameMode::kAnchorCentroid;
  ds.manifest.pocket = cfg.pocket;
  return ds;
}

void write_toy_dataset(const std::string &dir, const ToyDataset &data) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw Error(ErrorCode::kIoError, "cannot create '" + dir + "'");
  const std::filesystem::path root(dir);
  write_extxyz_file((root / "train.xyz").string(), data.train);
  write_extxyz_file((root / "test.xyz").string(), data.test);
  write_text_file((root / "manifest.json").string(), data.manifest.to_json());
}

}  // namespace linkdiff
