//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "linkdiff/chem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "linkdiff/error.hpp"

namespace linkdiff {

namespace {
  constexpr const char *kElementData =
#include "linkdiff_element_data.inc"
      ;
}  // namespace

// ---------------------------------------------------------------------------
// Element table

ElementTable ElementTable::parse(std::string_view text) {
  ElementTable table;
  std::istringstream in{ std::string(text) };
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#')
      continue;
    std::istringstream fields(line);
    ElementInfo info;
    if (!(fields >> info.symbol >> info.covalent_radius >> info.vdw_radius
          >> info.max_valence))
      throw Error(ErrorCode::kParseError,
                  "element table line " + std::to_string(lineno));
    if (info.covalent_radius <= 0 || info.vdw_radius <= 0
        || info.max_valence < 1)
      throw Error(ErrorCode::kParseError, "element table line "
                                              + std::to_string(lineno)
                                              + ": radii and valence must be "
                                                "positive");
    table.rows_[info.symbol] = info;
  }
  return table;
}

const ElementTable &ElementTable::builtin() {
  static const ElementTable table = parse(kElementData);
  return table;
}

bool ElementTable::contains(const std::string &sym) const {
  return rows_.find(sym) != rows_.end();
}

const ElementInfo &ElementTable::at(const std::string &sym) const {
  auto it = rows_.find(sym);
  if (it == rows_.end())
    throw Error(ErrorCode::kUnknownAtomType, "unknown element '" + sym + "'");
  return it->second;
}

bool ElementTable::covers(const std::vector<std::string> &vocab) const {
  return std::all_of(vocab.begin(), vocab.end(),
                     [this](const std::string &s) { return contains(s); });
}

// ---------------------------------------------------------------------------
// Graphs

std::vector<std::vector<int>> MoleculeGraph::adjacency() const {
  std::vector<std::vector<int>> adj(size());
  for (auto [i, j]: bonds) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  for (auto &nbrs: adj)
    std::sort(nbrs.begin(), nbrs.end());
  return adj;
}

std::vector<int> MoleculeGraph::degrees() const {
  std::vector<int> deg(size(), 0);
  for (auto [i, j]: bonds) {
    ++deg[i];
    ++deg[j];
  }
  return deg;
}

MoleculeGraph MoleculeGraph::induced(const std::vector<int> &atoms) const {
  std::vector<int> remap(size(), -1);
  MoleculeGraph sub;
  sub.coords.resize(static_cast<Eigen::Index>(atoms.size()), 3);
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    remap[atoms[k]] = static_cast<int>(k);
    sub.elements.push_back(elements[atoms[k]]);
    if (coords.rows() == size())
      sub.coords.row(static_cast<Eigen::Index>(k)) = coords.row(atoms[k]);
  }
  if (coords.rows() != size())
    sub.coords.resize(0, 3);
  for (auto [i, j]: bonds) {
    if (remap[i] < 0 || remap[j] < 0)
      continue;
    sub.bonds.emplace_back(std::min(remap[i], remap[j]),
                           std::max(remap[i], remap[j]));
  }
  std::sort(sub.bonds.begin(), sub.bonds.end());
  return sub;
}

MoleculeGraph make_graph(std::vector<std::string> elements, Coords3d coords,
                         std::vector<std::pair<int, int>> bonds) {
  const int n = static_cast<int>(elements.size());
  for (auto &[i, j]: bonds) {
    if (i == j || i < 0 || j < 0 || i >= n || j >= n)
      throw Error(ErrorCode::kShapeMismatch, "invalid bond");
    if (i > j)
      std::swap(i, j);
  }
  std::sort(bonds.begin(), bonds.end());
  bonds.erase(std::unique(bonds.begin(), bonds.end()), bonds.end());
  return { std::move(elements), std::move(coords), std::move(bonds) };
}

MoleculeGraph perceive_bonds(const PointCloud &cloud, const ElementTable &table,
                             double tol) {
  MoleculeGraph g;
  g.elements = cloud.elements;
  g.coords = cloud.coords;
  if (static_cast<int>(g.elements.size()) != cloud.size())
    throw Error(ErrorCode::kShapeMismatch, "cloud without element symbols");
  std::vector<double> radius(g.elements.size());
  for (std::size_t i = 0; i < radius.size(); ++i)
    radius[i] = table.at(g.elements[i]).covalent_radius;
  for (int i = 0; i < cloud.size(); ++i)
    for (int j = i + 1; j < cloud.size(); ++j) {
      const double d = (cloud.coords.row(i) - cloud.coords.row(j)).norm();
      if (d < radius[i] + radius[j] + tol)
        g.bonds.emplace_back(i, j);
    }
  return g;
}

std::vector<std::vector<int>> connected_components(const MoleculeGraph &g) {
  const auto adj = g.adjacency();
  std::vector<int> seen(g.size(), 0);
  std::vector<std::vector<int>> comps;
  for (int s = 0; s < g.size(); ++s) {
    if (seen[s])
      continue;
    std::vector<int> comp{ s };
    seen[s] = 1;
    for (std::size_t k = 0; k < comp.size(); ++k)
      for (int nb: adj[comp[k]])
        if (!seen[nb]) {
          seen[nb] = 1;
          comp.push_back(nb);
        }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

MoleculeGraph largest_connected_component(const MoleculeGraph &g) {
  if (g.size() == 0)
    throw Error(ErrorCode::kEmptyGraph, "graph without atoms");
  const auto comps = connected_components(g);
  const std::vector<int> *best = &comps.front();
  for (const auto &c: comps)
    if (c.size() > best->size())
      best = &c;
  return g.induced(*best);
}

std::vector<int> match_fragment_atoms(const MoleculeGraph &g,
                                      const PointCloud &fragments) {
  std::vector<int> match(fragments.size(), -1);
  if (g.coords.rows() != g.size())
    return match;
  for (int f = 0; f < fragments.size(); ++f)
    for (int i = 0; i < g.size(); ++i)
      if ((g.coords.row(i) - fragments.coords.row(f)).norm()
          <= kPositionMatchTolerance) {
        match[f] = i;
        break;
      }
  return match;
}

bool check_validity(const MoleculeGraph &g, const PointCloud &fragments,
                    const ElementTable &table) {
  if (g.size() == 0 || connected_components(g).size() != 1)
    return false;
  for (int m: match_fragment_atoms(g, fragments))
    if (m < 0)
      return false;
  const auto deg = g.degrees();
  for (int i = 0; i < g.size(); ++i) {
    if (!table.contains(g.elements[i])
        || deg[i] > table.at(g.elements[i]).max_valence)
      return false;
  }
  return true;
}

MoleculeGraph extract_linker(const MoleculeGraph &molecule,
                             const PointCloud &fragments) {
  std::vector<char> is_fragment(molecule.size(), 0);
  for (int m: match_fragment_atoms(molecule, fragments)) {
    if (m < 0)
      throw Error(ErrorCode::kFragmentMatchFailure,
                  "fragment atom missing from molecule");
    is_fragment[m] = 1;
  }
  std::vector<int> keep;
  for (int i = 0; i < molecule.size(); ++i)
    if (!is_fragment[i])
      keep.push_back(i);
  return molecule.induced(keep);
}

int count_rings(const MoleculeGraph &g) {
  return static_cast<int>(g.bonds.size()) - g.size()
         + static_cast<int>(connected_components(g).size());
}

int count_clashes(const PointCloud &mol, const PointCloud &pocket,
                  const ElementTable &table) {
  int clashes = 0;
  for (int i = 0; i < mol.size(); ++i) {
    const double ri = table.at(mol.elements[i]).vdw_radius;
    for (int j = 0; j < pocket.size(); ++j) {
      const double rj = table.at(pocket.elements[j]).vdw_radius;
      if ((mol.coords.row(i) - pocket.coords.row(j)).norm() < ri + rj)
        ++clashes;
    }
  }
  return clashes;
}

// ---------------------------------------------------------------------------
// Canonical labeling: color refinement plus individualization, keeping the
// lexicographically smallest edge code over all discrete leaves. Subtrees
// equivalent under automorphisms found so far are skipped.

namespace {
  class Canonicalizer {
  public:
    explicit Canonicalizer(const MoleculeGraph &g)
        : n_(g.size()), adj_(g.adjacency()) {
      std::vector<std::string> syms = g.elements;
      std::sort(syms.begin(), syms.end());
      syms.erase(std::unique(syms.begin(), syms.end()), syms.end());
      std::vector<int> rank(n_);
      for (int i = 0; i < n_; ++i)
        rank[i] = static_cast<int>(
            std::lower_bound(syms.begin(), syms.end(), g.elements[i])
            - syms.begin());
      root_ = cells_from_keys(rank);
    }

    CanonicalForm run(const MoleculeGraph &g) {
      std::vector<int> path;
      if (n_ > 0)
        search(root_, path);
      CanonicalForm form;
      form.order = best_order_;
      std::ostringstream key;
      key << n_ << ':';
      for (int k = 0; k < n_; ++k)
        key << (k ? "," : "") << g.elements[best_order_[k]];
      key << ';';
      for (std::size_t e = 0; e + 1 < best_code_.size(); e += 2)
        key << (e ? "," : "") << best_code_[e] << '-' << best_code_[e + 1];
      form.key = key.str();
      return form;
    }

  private:
    // Colors are cell start positions in the ordered partition.
    template <class Key>
    std::vector<int> cells_from_keys(const std::vector<Key> &keys) const {
      std::vector<int> idx(n_);
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(),
                       [&](int a, int b) { return keys[a] < keys[b]; });
      std::vector<int> col(n_);
      for (int k = 0; k < n_; ++k)
        col[idx[k]] = (k > 0 && keys[idx[k]] == keys[idx[k - 1]])
                          ? col[idx[k - 1]]
                          : k;
      return col;
    }

    static int count_cells(const std::vector<int> &col) {
      std::vector<int> c = col;
      std::sort(c.begin(), c.end());
      return static_cast<int>(std::unique(c.begin(), c.end()) - c.begin());
    }

    std::vector<int> refine(std::vector<int> col) const {
      int cells = count_cells(col);
      while (true) {
        std::vector<std::pair<int, std::vector<int>>> sig(n_);
        for (int i = 0; i < n_; ++i) {
          sig[i].first = col[i];
          for (int nb: adj_[i])
            sig[i].second.push_back(col[nb]);
          std::sort(sig[i].second.begin(), sig[i].second.end());
        }
        std::vector<int> next = cells_from_keys(sig);
        const int next_cells = count_cells(next);
        col = std::move(next);
        if (next_cells == cells)
          return col;
        cells = next_cells;
      }
    }

    std::vector<int> leaf_code(const std::vector<int> &col) const {
      std::vector<std::pair<int, int>> edges;
      for (int i = 0; i < n_; ++i)
        for (int j: adj_[i])
          if (i < j)
            edges.emplace_back(std::min(col[i], col[j]),
                               std::max(col[i], col[j]));
      std::sort(edges.begin(), edges.end());
      std::vector<int> code;
      for (auto [a, b]: edges) {
        code.push_back(a);
        code.push_back(b);
      }
      return code;
    }

    void record_leaf(const std::vector<int> &col) {
      std::vector<int> order(n_);
      for (int i = 0; i < n_; ++i)
        order[col[i]] = i;
      std::vector<int> code = leaf_code(col);
      if (best_order_.empty() || code < best_code_) {
        best_code_ = std::move(code);
        best_order_ = std::move(order);
      } else if (code == best_code_) {
        std::vector<int> gamma(n_);
        for (int k = 0; k < n_; ++k)
          gamma[order[k]] = best_order_[k];
        automorphisms_.push_back(std::move(gamma));
      }
    }

    int find(std::vector<int> &parent, int x) const {
      while (parent[x] != x)
        x = parent[x] = parent[parent[x]];
      return x;
    }

    void search(const std::vector<int> &coloring, std::vector<int> &path) {
      const std::vector<int> col = refine(coloring);
      // Target: the first non-singleton cell in partition order.
      std::vector<int> size(n_, 0);
      for (int c: col)
        ++size[c];
      int target = -1;
      for (int c = 0; c < n_; ++c)
        if (size[c] > 1) {
          target = c;
          break;
        }
      if (target < 0) {
        record_leaf(col);
        return;
      }
      std::vector<int> cell;
      for (int i = 0; i < n_; ++i)
        if (col[i] == target)
          cell.push_back(i);

      std::vector<int> explored;
      for (int v: cell) {
        if (!explored.empty() && pruned(v, explored, path))
          continue;
        std::vector<int> child = col;
        for (int w: cell)
          if (w != v)
            child[w] = target + 1;
        path.push_back(v);
        search(child, path);
        path.pop_back();
        explored.push_back(v);
      }
    }

    bool pruned(int v, const std::vector<int> &explored,
                const std::vector<int> &path) {
      std::vector<int> parent(n_);
      std::iota(parent.begin(), parent.end(), 0);
      for (const auto &gamma: automorphisms_) {
        bool fixes = std::all_of(path.begin(), path.end(),
                                 [&](int p) { return gamma[p] == p; });
        if (!fixes)
          continue;
        for (int x = 0; x < n_; ++x) {
          const int a = find(parent, x), b = find(parent, gamma[x]);
          if (a != b)
            parent[a] = b;
        }
      }
      const int rv = find(parent, v);
      return std::any_of(explored.begin(), explored.end(),
                         [&](int u) { return find(parent, u) == rv; });
    }

    int n_;
    std::vector<std::vector<int>> adj_;
    std::vector<int> root_;
    std::vector<int> best_code_, best_order_;
    std::vector<std::vector<int>> automorphisms_;
  };
}  // namespace

CanonicalForm canonical_form(const MoleculeGraph &g) {
  return Canonicalizer(g).run(g);
}

std::string canonical_key(const MoleculeGraph &g) {
  return canonical_form(g).key;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {
  MoleculeGraph molecule_graph(const PointCloud &mol,
                               const ElementTable &table) {
    PointCloud heavy = mol.subset(
        mol.select([](const AtomFlags &f) { return !f.pocket; }));
    return perceive_bonds(heavy, table);
  }

  Coords3d ordered_coords(const MoleculeGraph &g,
                          const std::vector<int> &order) {
    Coords3d out(static_cast<Eigen::Index>(order.size()), 3);
    for (std::size_t k = 0; k < order.size(); ++k)
      out.row(static_cast<Eigen::Index>(k)) = g.coords.row(order[k]);
    return out;
  }

  // Pairings of the linker atoms of `sample` with those of `ref` that,
  // together with the positional identity on fragment atoms, form an
  // isomorphism of the two molecules. Calls visit(pairing) for each one
  // until `limit` pairings have been seen; returns the number visited.
  std::size_t for_each_anchored_pairing(
      const MoleculeGraph &sample, const MoleculeGraph &ref,
      const PointCloud &fragments, std::size_t limit,
      const std::function<void(const std::vector<int> &)> &visit) {
    const std::vector<int> fs = match_fragment_atoms(sample, fragments);
    const std::vector<int> fr = match_fragment_atoms(ref, fragments);
    std::vector<int> map(sample.size(), -1);  // sample atom -> ref atom
    std::vector<char> used(ref.size(), 0);
    for (std::size_t f = 0; f < fs.size(); ++f) {
      map[fs[f]] = fr[f];
      used[fr[f]] = 1;
    }
    std::vector<int> lin_s, lin_r;
    for (int i = 0; i < sample.size(); ++i)
      if (map[i] < 0)
        lin_s.push_back(i);
    for (int i = 0; i < ref.size(); ++i)
      if (!used[i])
        lin_r.push_back(i);
    if (lin_s.size() != lin_r.size())
      return 0;

    auto as = sample.adjacency(), ar = ref.adjacency();
    for (auto &v: as)
      std::sort(v.begin(), v.end());
    for (auto &v: ar)
      std::sort(v.begin(), v.end());
    auto bonded = [](const std::vector<std::vector<int>> &adj, int i, int j) {
      return std::binary_search(adj[i].begin(), adj[i].end(), j);
    };
    // Fragment-fragment bonds must agree as well.
    for (int i = 0; i < sample.size(); ++i)
      for (int j = i + 1; j < sample.size(); ++j)
        if (map[i] >= 0 && map[j] >= 0
            && bonded(as, i, j) != bonded(ar, map[i], map[j]))
          return 0;

    std::size_t seen = 0;
    std::vector<int> pairing(lin_s.size(), -1);
    std::function<void(std::size_t)> extend = [&](std::size_t k) {
      if (seen >= limit)
        return;
      if (k == lin_s.size()) {
        ++seen;
        visit(pairing);
        return;
      }
      const int i = lin_s[k];
      for (int r: lin_r) {
        if (used[r] || sample.elements[i] != ref.elements[r]
            || as[i].size() != ar[r].size())
          continue;
        bool ok = true;
        for (int j = 0; j < sample.size() && ok; ++j)
          if (map[j] >= 0)
            ok = bonded(as, i, j) == bonded(ar, r, map[j]);
        if (!ok)
          continue;
        map[i] = r;
        used[r] = 1;
        pairing[k] = r;
        extend(k + 1);
        map[i] = -1;
        used[r] = 0;
      }
    };
    extend(0);
    return seen;
  }

  // RMSD between the linker atoms of two isomorphic molecules, minimized
  // over the isomorphisms that fix every fragment atom. When no such
  // isomorphism exists (the linker sits on symmetry-equivalent anchors),
  // atoms are paired through the canonical order of the whole molecules.
  double linker_rmsd(const MoleculeGraph &sample, const MoleculeGraph &ref,
                     const PointCloud &fragments) {
    constexpr std::size_t kMaxPairings = 20000;
    std::vector<int> lin_s;
    {
      std::vector<char> frag(sample.size(), 0);
      for (int m: match_fragment_atoms(sample, fragments))
        frag[m] = 1;
      for (int i = 0; i < sample.size(); ++i)
        if (!frag[i])
          lin_s.push_back(i);
    }
    if (lin_s.empty())
      return 0.0;
    const Coords3d xs = ordered_coords(sample, lin_s);
    double best = std::numeric_limits<double>::infinity();
    for_each_anchored_pairing(sample, ref, fragments, kMaxPairings,
                              [&](const std::vector<int> &pairing) {
                                best = std::min(
                                    best, kabsch_rmsd(ordered_coords(ref, pairing),
                                                      xs));
                              });
    if (std::isfinite(best))
      return best;

    const CanonicalForm ms = canonical_form(sample), mr = canonical_form(ref);
    std::vector<char> ref_frag(ref.size(), 0);
    for (int m: match_fragment_atoms(ref, fragments))
      ref_frag[m] = 1;
    std::vector<int> rs, ss;
    for (int k = 0; k < ref.size(); ++k)
      if (!ref_frag[mr.order[k]]) {
        rs.push_back(mr.order[k]);
        ss.push_back(ms.order[k]);
      }
    return kabsch_rmsd(ordered_coords(ref, rs), ordered_coords(sample, ss));
  }
}  // namespace

std::string linker_key(const PointCloud &molecule, const ElementTable &table) {
  const MoleculeGraph g = molecule_graph(molecule, table);
  return canonical_key(extract_linker(g, molecule.fragments()));
}

MetricsReport evaluate_samples(const std::vector<EvalSample> &samples,
                               const std::vector<EvalInput> &inputs,
                               const std::set<std::string> &train_linker_keys,
                               const ElementTable &table) {
  std::map<std::string, std::vector<const EvalSample *>> by_input;
  for (const auto &s: samples)
    by_input[s.input_id].push_back(&s);

  MetricsReport report;
  MetricsSummary &sum = report.summary;
  double rmsd_total = 0, rings_total = 0, clash_total = 0;
  int unique_total = 0, novel_total = 0, recovered_inputs = 0;

  for (const EvalInput &in: inputs) {
    InputMetrics m;
    m.id = in.id;
    m.has_pocket = in.pocket.has_value() && !in.pocket->empty();
    const MoleculeGraph ref =
        largest_connected_component(molecule_graph(in.reference, table));
    const std::string ref_key = canonical_key(ref);

    std::set<std::string> keys;
    double rmsd_sum = 0, rings_sum = 0, clash_sum = 0;
    auto it = by_input.find(in.id);
    const std::vector<const EvalSample *> none;
    const auto &group = it == by_input.end() ? none : it->second;
    for (const EvalSample *s: group) {
      ++m.n_samples;
      if (m.has_pocket)
        clash_sum += count_clashes(s->molecule, *in.pocket, table);
      const MoleculeGraph full = molecule_graph(s->molecule, table);
      if (full.size() == 0)
        continue;
      const MoleculeGraph g = largest_connected_component(full);
      if (!check_validity(g, in.fragments, table))
        continue;
      ++m.n_valid;
      const std::string key = canonical_key(g);
      keys.insert(key);
      const MoleculeGraph linker = extract_linker(g, in.fragments);
      if (train_linker_keys.count(canonical_key(linker)) == 0)
        ++m.n_novel;
      rings_sum += count_rings(linker);
      if (key == ref_key) {
        ++m.n_recovered;
        rmsd_sum += linker_rmsd(g, ref, in.fragments);
      }
    }
    m.n_unique = static_cast<int>(keys.size());
    m.mean_rmsd = m.n_recovered ? rmsd_sum / m.n_recovered : 0.0;
    m.mean_rings = m.n_valid ? rings_sum / m.n_valid : 0.0;
    m.mean_clashes = m.has_pocket && m.n_samples ? clash_sum / m.n_samples
                                                 : 0.0;

    ++sum.n_inputs;
    sum.n_samples += m.n_samples;
    sum.n_valid += m.n_valid;
    unique_total += m.n_unique;
    novel_total += m.n_novel;
    recovered_inputs += m.n_recovered > 0 ? 1 : 0;
    sum.n_recovered_pairs += m.n_recovered;
    rmsd_total += rmsd_sum;
    rings_total += rings_sum;
    if (m.has_pocket) {
      sum.n_pocket_samples += m.n_samples;
      clash_total += clash_sum;
    }
    report.inputs.push_back(std::move(m));
  }

  auto ratio = [](double a, int b) { return b > 0 ? a / b : 0.0; };
  sum.validity = ratio(sum.n_valid, sum.n_samples);
  sum.uniqueness = ratio(unique_total, sum.n_valid);
  sum.novelty = ratio(novel_total, sum.n_valid);
  sum.recovery = ratio(recovered_inputs, sum.n_inputs);
  sum.rmsd = ratio(rmsd_total, sum.n_recovered_pairs);
  sum.mean_rings = ratio(rings_total, sum.n_valid);
  sum.mean_clashes = ratio(clash_total, sum.n_pocket_samples);
  return report;
}

std::string format_report(const MetricsReport &report) {
  std::ostringstream out;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  out << "# linkdiff metrics v1\n"
         "# fractions in [0, 1]; uniqueness, novelty and mean_rings are "
         "taken over valid samples\n";
  for (const InputMetrics &m: report.inputs) {
    out << "input id=" << m.id << " n_samples=" << m.n_samples
        << " n_valid=" << m.n_valid << " n_unique=" << m.n_unique
        << " n_novel=" << m.n_novel << " n_recovered=" << m.n_recovered
        << " rmsd=" << num(m.mean_rmsd) << " rings=" << num(m.mean_rings)
        << " clashes=" << (m.has_pocket ? num(m.mean_clashes) : "na") << '\n';
  }
  const MetricsSummary &s = report.summary;
  out << "summary n_inputs=" << s.n_inputs << " n_samples=" << s.n_samples
      << " n_valid=" << s.n_valid << " validity=" << num(s.validity)
      << " uniqueness=" << num(s.uniqueness) << " novelty=" << num(s.novelty)
      << " recovery=" << num(s.recovery) << " rmsd=" << num(s.rmsd)
      << " n_recovered_pairs=" << s.n_recovered_pairs
      << " mean_rings=" << num(s.mean_rings)
      << " mean_clashes="
      << (s.n_pocket_samples ? num(s.mean_clashes) : "na")
      << " n_pocket_samples=" << s.n_pocket_samples << '\n';
  return out.str();
}

}  // namespace linkdiff
