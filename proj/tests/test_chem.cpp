//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "linkdiff/chem.hpp"
#include "linkdiff/error.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace linkdiff;

namespace {

const ElementTable &table() { return ElementTable::builtin(); }

PointCloud cloud(const std::vector<std::string> &el,
                 const std::vector<Vec3d> &pos, AtomFlags flag) {
  PointCloud c;
  c.coords.resize(static_cast<Eigen::Index>(pos.size()), 3);
  for (std::size_t i = 0; i < pos.size(); ++i)
    c.coords.row(static_cast<Eigen::Index>(i)) = pos[i].transpose();
  c.elements = el;
  c.flags.assign(pos.size(), flag);
  return c;
}

// Two single-carbon fragments 4.5 A apart on the x axis.
PointCloud end_caps() {
  PointCloud f = cloud({ "C", "C" }, { Vec3d(0, 0, 0), Vec3d(4.5, 0, 0) },
                       AtomFlags::fragment_atom());
  f.flags[0].anchor = f.flags[1].anchor = true;
  return f;
}

PointCloud with_linker(const PointCloud &frags, const std::vector<std::string> &el,
                       const std::vector<Vec3d> &pos) {
  return concat(frags, cloud(el, pos, AtomFlags::linker_atom()));
}

MoleculeGraph graph_from_key(const std::string &key) {
  const auto colon = key.find(':'), semi = key.find(';');
  const int n = std::stoi(key.substr(0, colon));
  std::vector<std::string> el;
  std::stringstream es(key.substr(colon + 1, semi - colon - 1));
  for (std::string tok; std::getline(es, tok, ',');)
    el.push_back(tok);
  std::vector<std::pair<int, int>> bonds;
  std::stringstream bs(key.substr(semi + 1));
  for (std::string tok; std::getline(bs, tok, ',');) {
    const auto dash = tok.find('-');
    bonds.emplace_back(std::stoi(tok.substr(0, dash)),
                       std::stoi(tok.substr(dash + 1)));
  }
  REQUIRE(static_cast<int>(el.size()) == n);
  return make_graph(el, Coords3d(0, 3), bonds);
}

}  // namespace

TEST_CASE("element table") {
  const ElementTable &t = table();
  for (const char *sym: { "H", "C", "N", "O", "F", "P", "S", "Cl", "Br", "I" })
    CHECK(t.contains(sym));
  CHECK(t.at("C").covalent_radius == doctest::Approx(0.76));
  CHECK(t.at("O").vdw_radius == doctest::Approx(1.52));
  CHECK(t.at("N").max_valence == 3);
  CHECK(t.covers({ "C", "N", "O", "F" }));
  CHECK_FALSE(t.covers({ "C", "Xx" }));
  try {
    (void)t.at("Xx");
    FAIL("no exception");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kUnknownAtomType);
  }

  const ElementTable p = ElementTable::parse("# comment\nC\t0.5\t1.0\t4\n");
  CHECK(p.at("C").covalent_radius == 0.5);
  CHECK_FALSE(p.contains("N"));
  CHECK_THROWS_AS(ElementTable::parse("C\t0.5\n"), Error);
}

TEST_CASE("bond perception") {
  // C-C single bond 1.54 A is within 0.76 + 0.76 + 0.4; 1.93 A is not.
  auto bonded = [](const std::string &a, const std::string &b, double d,
                   double tol = kDefaultBondTolerance) {
    const PointCloud c = cloud({ a, b }, { Vec3d::Zero(), Vec3d(d, 0, 0) },
                               AtomFlags::linker_atom());
    return !perceive_bonds(c, table(), tol).bonds.empty();
  };
  CHECK(bonded("C", "C", 1.54));
  CHECK(bonded("C", "C", 1.91));
  CHECK_FALSE(bonded("C", "C", 1.93));
  CHECK(bonded("C", "O", 1.81));
  CHECK_FALSE(bonded("C", "O", 1.83));
  CHECK_FALSE(bonded("C", "C", 1.6, 0.0));
  CHECK(bonded("C", "C", 1.5, 0.0));

  // Raising the tolerance only adds bonds.
  for (int trial = 0; trial < 20; ++trial) {
    CounterRng rng(1, trial);
    const PointCloud c = linkdiff::testing::random_cloud(
        rng, 12, { "C", "N", "O", "S" }, AtomFlags::linker_atom(), 1.8);
    std::vector<std::pair<int, int>> prev;
    for (double tol: { 0.0, 0.2, 0.4, 0.8, 1.6 }) {
      const auto bonds = perceive_bonds(c, table(), tol).bonds;
      CHECK(std::includes(bonds.begin(), bonds.end(), prev.begin(), prev.end()));
      prev = bonds;
    }
  }
}

TEST_CASE("graph construction") {
  const MoleculeGraph g = make_graph({ "C", "C", "O" }, Coords3d(0, 3),
                                     { { 2, 1 }, { 0, 1 }, { 1, 2 } });
  CHECK(g.bonds == std::vector<std::pair<int, int>>{ { 0, 1 }, { 1, 2 } });
  CHECK(g.degrees() == std::vector<int>{ 1, 2, 1 });
  CHECK_THROWS_AS(make_graph({ "C" }, Coords3d(0, 3), { { 0, 0 } }), Error);
  CHECK_THROWS_AS(make_graph({ "C" }, Coords3d(0, 3), { { 0, 1 } }), Error);
  const MoleculeGraph sub = g.induced({ 2, 1 });
  CHECK(sub.elements == std::vector<std::string>{ "O", "C" });
  CHECK(sub.bonds == std::vector<std::pair<int, int>>{ { 0, 1 } });
}

TEST_CASE("largest component agrees with a breadth-first oracle") {
  for (int trial = 0; trial < 200; ++trial) {
    CounterRng rng(2, trial);
    const int n = rng.uniform_int(1, 15);
    MoleculeGraph g = oracle::random_graph(rng, n, rng.uniform(0.02, 0.3),
                                           { "C", "N" });
    g = make_graph(g.elements, Coords3d(0, 3), g.bonds);
    const auto label = oracle::component_labels(g);
    std::vector<int> size(n, 0);
    for (int l: label)
      ++size[l];
    const int best = *std::max_element(size.begin(), size.end());
    const MoleculeGraph lcc = largest_connected_component(g);
    CHECK(lcc.size() == best);
    // Lowest-index tie break.
    int first = 0;
    while (size[label[first]] != best)
      ++first;
    std::vector<int> members;
    for (int i = 0; i < n; ++i)
      if (label[i] == label[first])
        members.push_back(i);
    CHECK(lcc.elements == g.induced(members).elements);
    CHECK(lcc.bonds == g.induced(members).bonds);
    CHECK(connected_components(g).size()
          == static_cast<std::size_t>(*std::max_element(label.begin(),
                                                        label.end())
                                      + 1));
  }
  CHECK_THROWS_AS(largest_connected_component(MoleculeGraph{}), Error);
}

TEST_CASE("validity") {
  const PointCloud frags = end_caps();
  auto valid = [&](const PointCloud &mol) {
    return check_validity(perceive_bonds(mol, table()), frags, table());
  };
  const PointCloud chain = with_linker(frags, { "C", "C" },
                                       { Vec3d(1.5, 0, 0), Vec3d(3, 0, 0) });
  CHECK(valid(chain));
  // A gap splits the molecule.
  CHECK_FALSE(valid(with_linker(frags, { "C" }, { Vec3d(1.5, 0, 0) })));
  // Fluorine with two neighbours exceeds its valence.
  CHECK_FALSE(valid(with_linker(frags, { "C", "F", "C" },
                                { Vec3d(1.2, 0, 0), Vec3d(2.25, 0, 0),
                                  Vec3d(3.3, 0, 0) })));
  CHECK(valid(with_linker(frags, { "C", "O", "C" },
                          { Vec3d(1.2, 0, 0), Vec3d(2.25, 0, 0),
                            Vec3d(3.3, 0, 0) })));
  // A fragment atom that moved is missing from the molecule.
  PointCloud moved = chain;
  moved.coords(1, 1) += 1e-3;
  CHECK_FALSE(check_validity(perceive_bonds(moved, table()), frags, table()));
  CHECK_FALSE(check_validity(MoleculeGraph{}, frags, table()));
}

TEST_CASE("linker extraction") {
  const PointCloud frags = end_caps();
  const PointCloud mol = with_linker(frags, { "N", "C" },
                                     { Vec3d(1.5, 0, 0), Vec3d(3, 0, 0) });
  const MoleculeGraph lin = extract_linker(perceive_bonds(mol, table()), frags);
  CHECK(lin.elements == std::vector<std::string>{ "N", "C" });
  CHECK(lin.bonds == std::vector<std::pair<int, int>>{ { 0, 1 } });

  PointCloud other = frags;
  other.coords(0, 2) = 0.5;
  try {
    extract_linker(perceive_bonds(mol, table()), other);
    FAIL("no exception");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kFragmentMatchFailure);
  }
}

TEST_CASE("ring counts") {
  auto ring = [](int n) {
    std::vector<std::pair<int, int>> b;
    for (int i = 0; i < n; ++i)
      b.emplace_back(i, (i + 1) % n);
    return b;
  };
  CHECK(count_rings(make_graph(std::vector<std::string>(6, "C"), Coords3d(0, 3),
                               ring(6)))
        == 1);
  // Two fused six-rings: 10 atoms, 11 bonds.
  auto fused = ring(10);
  fused.emplace_back(0, 5);
  CHECK(count_rings(make_graph(std::vector<std::string>(10, "C"),
                               Coords3d(0, 3), fused))
        == 2);
  CHECK(count_rings(make_graph({ "C", "C" }, Coords3d(0, 3), {})) == 0);

  for (int trial = 0; trial < 200; ++trial) {
    CounterRng rng(3, trial);
    const MoleculeGraph g = oracle::random_graph(rng, rng.uniform_int(1, 12),
                                                 rng.uniform(0.05, 0.5), { "C" });
    CHECK(count_rings(g) == oracle::cycle_space_dimension(g));
  }
}

TEST_CASE("clash counts") {
  // C-O contact threshold 1.70 + 1.52 = 3.22 A.
  const PointCloud mol = cloud({ "C", "C" }, { Vec3d(0, 0, 0), Vec3d(3, 0, 0) },
                               AtomFlags::linker_atom());
  const PointCloud pocket = cloud({ "O", "O" },
                                  { Vec3d(0, 3.0, 0), Vec3d(0, 3.3, 0) },
                                  AtomFlags::pocket_atom());
  // Pairs: (0,0) 3.0 clash; (0,1) 3.3 no; (1,0) 4.24 no; (1,1) 4.46 no.
  CHECK(count_clashes(mol, pocket, table()) == 1);
  CHECK(count_clashes(mol, PointCloud{}, table()) == 0);
}

TEST_CASE("canonical keys decide isomorphism") {
  const auto corpus = oracle::graph_pair_corpus(17, 800);
  int equal = 0, different = 0;
  for (const auto &p: corpus) {
    const bool iso = oracle::isomorphic(p.a, p.b);
    CHECK((canonical_key(p.a) == canonical_key(p.b)) == iso);
    (iso ? equal : different) += 1;
  }
  // Both outcomes are well represented.
  CHECK(equal > 200);
  CHECK(different > 200);
}

TEST_CASE("canonical order reproduces the key") {
  for (int trial = 0; trial < 200; ++trial) {
    CounterRng rng(4, trial);
    MoleculeGraph g = oracle::random_graph(rng, rng.uniform_int(1, 12),
                                           rng.uniform(0.1, 0.5),
                                           { "C", "C", "N", "O" });
    g = make_graph(g.elements, Coords3d(0, 3), g.bonds);
    const CanonicalForm f = canonical_form(g);
    std::vector<int> sorted = f.order;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < g.size(); ++i)
      CHECK(sorted[i] == i);
    // Relabeling g by its canonical order gives the graph encoded in the key.
    std::vector<int> pos(g.size());
    for (int k = 0; k < g.size(); ++k)
      pos[f.order[k]] = k;
    const MoleculeGraph relabeled = oracle::relabel(g, pos);
    const MoleculeGraph decoded = graph_from_key(f.key);
    CHECK(relabeled.elements == decoded.elements);
    CHECK(relabeled.bonds == decoded.bonds);
    CHECK(oracle::isomorphic(decoded, g));
  }
}

TEST_CASE("butane and isobutane differ") {
  const std::vector<std::string> c4(4, "C");
  const MoleculeGraph butane = make_graph(c4, Coords3d(0, 3),
                                          { { 0, 1 }, { 1, 2 }, { 2, 3 } });
  const MoleculeGraph isobutane = make_graph(c4, Coords3d(0, 3),
                                             { { 0, 1 }, { 0, 2 }, { 0, 3 } });
  CHECK(canonical_key(butane) != canonical_key(isobutane));
  CHECK(canonical_key(butane)
        == canonical_key(make_graph(c4, Coords3d(0, 3),
                                    { { 2, 0 }, { 0, 3 }, { 3, 1 } })));
  CHECK(canonical_key(MoleculeGraph{}) == canonical_key(MoleculeGraph{}));
}

TEST_CASE("metrics on a planted corpus") {
  const PointCloud frags = end_caps();
  const Vec3d l1(1.5, 0, 0), l2(3, 0, 0);
  std::vector<EvalInput> inputs;
  std::vector<EvalSample> samples;
  auto add_input = [&](const std::string &id, const PointCloud &ref) {
    inputs.push_back({ id, frags, ref, std::nullopt });
  };
  auto add_sample = [&](const std::string &id, const PointCloud &mol) {
    samples.push_back({ id, mol });
  };

  // a: straight two-carbon linker.
  const PointCloud ref_a = with_linker(frags, { "C", "C" }, { l1, l2 });
  add_input("a", ref_a);
  add_sample("a", ref_a);
  add_sample("a", with_linker(frags, { "C", "C" }, { l2, l1 }));
  add_sample("a", with_linker(frags, { "C", "C" }, { l1, Vec3d(3.2, 0, 0) }));
  add_sample("a", with_linker(frags, { "N", "C" }, { l1, l2 }));
  add_sample("a", with_linker(frags, { "C" }, { l1 }));

  // b: branched linker with two equivalent methyl groups on l1.
  const Vec3d up(1.5, 1.5, 0), down(1.5, -1.5, 0);
  add_input("b", with_linker(frags, { "C", "C", "C", "C" }, { l1, l2, up, down }));
  const Vec3d up_moved(1.5, 1.6, 0.1);
  add_sample("b", with_linker(frags, { "C", "C", "C", "C" },
                              { l1, l2, down, up_moved }));

  // c: four-membered ring in the linker.
  const PointCloud ref_c = with_linker(frags, { "C", "C", "C", "C" },
                                       { l1, l2, Vec3d(1.5, 1.5, 0),
                                         Vec3d(3, 1.5, 0) });
  add_input("c", ref_c);
  add_sample("c", ref_c);

  // d: as a, with a pocket oxygen over the linker.
  inputs.push_back({ "d", frags, ref_a,
                     cloud({ "O" }, { Vec3d(1.5, 2.0, 0) },
                           AtomFlags::pocket_atom()) });
  add_sample("d", ref_a);
  add_sample("d", with_linker(frags, { "O", "O" }, { l1, l2 }));

  // e: no samples.
  add_input("e", ref_a);

  const std::set<std::string> train{ linker_key(ref_a, table()) };
  const MetricsReport r = evaluate_samples(samples, inputs, train, table());
  REQUIRE(r.inputs.size() == 5);

  const InputMetrics &a = r.inputs[0];
  CHECK(a.n_samples == 5);
  CHECK(a.n_valid == 4);
  CHECK(a.n_unique == 2);
  CHECK(a.n_novel == 1);
  CHECK(a.n_recovered == 3);
  // Two points: the optimal RMSD is half the change in their separation.
  CHECK(a.mean_rmsd == doctest::Approx(0.1 / 3).epsilon(1e-9));
  CHECK(a.mean_rings == 0);
  CHECK_FALSE(a.has_pocket);

  // Best over both assignments of the equivalent methyl groups.
  Coords3d ref_b(4, 3), samp_b(4, 3), swapped(4, 3);
  ref_b << l1.transpose(), l2.transpose(), up.transpose(), down.transpose();
  samp_b << l1.transpose(), l2.transpose(), up_moved.transpose(),
      down.transpose();
  swapped << l1.transpose(), l2.transpose(), down.transpose(),
      up_moved.transpose();
  const double rmsd_b = std::min(oracle::rotation_search_rmsd(ref_b, samp_b),
                                 oracle::rotation_search_rmsd(ref_b, swapped));
  const InputMetrics &b = r.inputs[1];
  CHECK(b.n_recovered == 1);
  CHECK(b.n_novel == 1);
  CHECK(b.mean_rmsd == doctest::Approx(rmsd_b).epsilon(1e-6));
  CHECK(b.mean_rmsd < 0.1);

  const InputMetrics &c = r.inputs[2];
  CHECK(c.n_valid == 1);
  CHECK(c.mean_rings == 1.0);
  CHECK(c.mean_rmsd == doctest::Approx(0.0));

  // Fragment carbon at 0 and both linker atoms lie within the contact
  // distance of the pocket oxygen; the far fragment carbon does not.
  const InputMetrics &d = r.inputs[3];
  CHECK(d.has_pocket);
  CHECK(d.n_valid == 2);
  CHECK(d.n_unique == 2);
  CHECK(d.n_recovered == 1);
  CHECK(d.mean_clashes == doctest::Approx(3.0));

  const InputMetrics &e = r.inputs[4];
  CHECK(e.n_samples == 0);
  CHECK(e.n_recovered == 0);

  const MetricsSummary &s = r.summary;
  CHECK(s.n_inputs == 5);
  CHECK(s.n_samples == 9);
  CHECK(s.n_valid == 8);
  CHECK(s.validity == doctest::Approx(8.0 / 9));
  CHECK(s.uniqueness == doctest::Approx(6.0 / 8));
  CHECK(s.novelty == doctest::Approx(4.0 / 8));
  CHECK(s.recovery == doctest::Approx(4.0 / 5));
  CHECK(s.n_recovered_pairs == 6);
  CHECK(s.rmsd == doctest::Approx((0.1 + rmsd_b) / 6).epsilon(1e-6));
  CHECK(s.mean_rings == doctest::Approx(1.0 / 8));
  CHECK(s.n_pocket_samples == 2);
  CHECK(s.mean_clashes == doctest::Approx(3.0));

  const std::string text = format_report(r);
  CHECK(text.rfind("# linkdiff metrics v1\n", 0) == 0);
  CHECK(text.find("input id=a n_samples=5 n_valid=4 n_unique=2 n_novel=1 "
                  "n_recovered=3 rmsd=0.033333 rings=0.000000 clashes=na\n")
        != std::string::npos);
  CHECK(text.find("clashes=3.000000") != std::string::npos);
  CHECK(text.find("summary n_inputs=5 n_samples=9 n_valid=8 validity=0.888889 "
                  "uniqueness=0.750000 novelty=0.500000 recovery=0.800000")
        != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2 + 5 + 1);
}
