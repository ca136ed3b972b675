#pragma once

// Bipartite user-item interaction data: loading, degree filtering, per-user
// splitting, CSR graph construction and edge dropping.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mixdec/error.hpp"
#include "mixdec/io.hpp"
#include "mixdec/log.hpp"
#include "mixdec/rng.hpp"

namespace mixdec {

enum class NodeKind : std::uint8_t { User = 0, Item = 1 };

inline NodeKind opposite(NodeKind k) { return k == NodeKind::User ? NodeKind::Item : NodeKind::User; }

struct NodeId {
  NodeKind kind = NodeKind::User;
  std::uint32_t index = 0;

  static NodeId user(std::uint32_t i) { return {NodeKind::User, i}; }
  static NodeId item(std::uint32_t i) { return {NodeKind::Item, i}; }

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

struct Interaction {
  std::uint32_t user = 0;
  std::uint32_t item = 0;

  friend auto operator<=>(const Interaction&, const Interaction&) = default;
};

/// Bidirectional map between opaque external ids and dense indices.
class IdMap {
 public:
  std::uint32_t intern(const std::string& name) {
    auto [it, inserted] = index_.try_emplace(name, static_cast<std::uint32_t>(names_.size()));
    if (inserted) names_.push_back(name);
    return it->second;
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::uint32_t at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("unknown id '" + name + "'");
    return it->second;
  }
  const std::string& name(std::uint32_t i) const { return names_.at(i); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const IdMap& a, const IdMap& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct InteractionDataset {
  std::vector<Interaction> interactions;
  IdMap users;
  IdMap items;
  std::size_t duplicates_dropped = 0;

  std::size_t n_users() const { return users.size(); }
  std::size_t n_items() const { return items.size(); }
};

struct InteractionFileFormat {
  enum class Delimiter { Tab, Whitespace };
  Delimiter delimiter = Delimiter::Tab;
  char comment = '#';
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line,
                                             InteractionFileFormat::Delimiter d) {
  std::vector<std::string> out;
  if (d == InteractionFileFormat::Delimiter::Tab) {
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
  } else {
    std::istringstream ss(line);
    std::string f;
    while (ss >> f) out.push_back(f);
  }
  return out;
}

}  // namespace detail

/// Reads `user<TAB>item[<TAB>...]` lines. Dense ids are assigned in
/// first-seen order; duplicate pairs are dropped and counted.
inline InteractionDataset load_interactions(std::istream& in, InteractionFileFormat fmt = {}) {
  InteractionDataset ds;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == fmt.comment) continue;
    auto fields = detail::split_fields(line, fmt.delimiter);
    if (fields.size() < 2 || fields[0].empty() || fields[1].empty())
      throw ParseError("expected '<user>\\t<item>', got '" + line + "'", lineno);
    Interaction x{ds.users.intern(fields[0]), ds.items.intern(fields[1])};
    ds.interactions.push_back(x);
  }
  if (ds.interactions.empty()) throw ParseError("no interactions in input", lineno == 0 ? 1 : lineno);

  // Keep the first occurrence of each pair, preserving input order.
  std::vector<std::size_t> order(ds.interactions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ds.interactions[a] < ds.interactions[b];
  });
  std::vector<char> keep(ds.interactions.size(), 1);
  for (std::size_t k = 1; k < order.size(); ++k)
    if (ds.interactions[order[k]] == ds.interactions[order[k - 1]]) keep[order[k]] = 0;
  std::vector<Interaction> unique;
  unique.reserve(ds.interactions.size());
  for (std::size_t k = 0; k < keep.size(); ++k)
    if (keep[k]) unique.push_back(ds.interactions[k]);
  ds.duplicates_dropped = ds.interactions.size() - unique.size();
  ds.interactions = std::move(unique);
  return ds;
}

inline InteractionDataset load_interactions(const std::filesystem::path& path,
                                            InteractionFileFormat fmt = {}) {
  auto in = io::open_input(path);
  return load_interactions(in, fmt);
}

inline void write_interactions(std::ostream& out, const InteractionDataset& ds,
                               std::span<const Interaction> edges) {
  for (const auto& e : edges) out << ds.users.name(e.user) << '\t' << ds.items.name(e.item) << '\n';
}

/// Rebuilds a dataset from `edges` (indices into `src`), re-densifying ids in
/// first-seen order over `edges`.
inline InteractionDataset reindex(const InteractionDataset& src, std::span<const Interaction> edges) {
  InteractionDataset out;
  out.interactions.reserve(edges.size());
  for (const auto& e : edges)
    out.interactions.push_back({out.users.intern(src.users.name(e.user)),
                                out.items.intern(src.items.name(e.item))});
  return out;
}

struct FilterOptions {
  std::size_t min_degree = 10;
  bool strict = false;   // keep degree > min_degree instead of >=
  bool fixpoint = true;  // repeat until no node falls below the threshold
};

/// Drops users and items below the degree threshold, iterating to a fixpoint
/// by default, then re-densifies ids (surviving ids keep their relative order).
inline InteractionDataset filter_min_interactions(const InteractionDataset& ds, FilterOptions opt = {}) {
  if (opt.min_degree < 1) throw ValidationError("min_degree must be >= 1");
  auto passes = [&](std::size_t deg) { return opt.strict ? deg > opt.min_degree : deg >= opt.min_degree; };

  std::vector<Interaction> cur = ds.interactions;
  while (true) {
    std::vector<std::size_t> udeg(ds.n_users(), 0), ideg(ds.n_items(), 0);
    for (const auto& e : cur) {
      ++udeg[e.user];
      ++ideg[e.item];
    }
    std::vector<Interaction> next;
    next.reserve(cur.size());
    for (const auto& e : cur)
      if (passes(udeg[e.user]) && passes(ideg[e.item])) next.push_back(e);
    bool changed = next.size() != cur.size();
    cur = std::move(next);
    if (!changed || !opt.fixpoint) break;
  }
  if (cur.empty()) throw ValidationError("filter removed all data");

  // Re-densify in original index order, not first-seen order over `cur`, so
  // that relative id order is preserved.
  std::vector<char> ukeep(ds.n_users(), 0), ikeep(ds.n_items(), 0);
  for (const auto& e : cur) ukeep[e.user] = ikeep[e.item] = 1;
  InteractionDataset out;
  std::vector<std::uint32_t> umap(ds.n_users()), imap(ds.n_items());
  for (std::uint32_t u = 0; u < ds.n_users(); ++u)
    if (ukeep[u]) umap[u] = out.users.intern(ds.users.name(u));
  for (std::uint32_t i = 0; i < ds.n_items(); ++i)
    if (ikeep[i]) imap[i] = out.items.intern(ds.items.name(i));
  for (const auto& e : cur) out.interactions.push_back({umap[e.user], imap[e.item]});
  return out;
}

struct SplitRatios {
  double train = 0.7;
  double valid = 0.1;
  double test = 0.2;
};

struct DatasetSplit {
  std::vector<Interaction> train, valid, test;
  std::uint64_t seed = 0;
};

/// Per-user split counts for `n` interactions. Test and validation take the
/// floor of their share; train takes the remainder, so rounding favors train.
/// Users with fewer interactions than split slots keep everything in train.
struct SplitCounts {
  std::size_t train = 0, valid = 0, test = 0;
};

inline SplitCounts split_counts(std::size_t n, const SplitRatios& r) {
  if (n < 3) return {n, 0, 0};
  auto share = [&](double ratio) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio + 1e-9));
  };
  SplitCounts c;
  c.test = share(r.test);
  c.valid = share(r.valid);
  c.train = n - c.test - c.valid;
  return c;
}

inline void validate(const SplitRatios& r) {
  if (!(r.train > 0 && r.valid > 0 && r.test > 0))
    throw ValidationError("split ratios must be positive");
  if (std::abs(r.train + r.valid + r.test - 1.0) > 1e-9)
    throw ValidationError("split ratios must sum to 1");
}

/// Shuffles each user's interactions with a per-user stream and carves test,
/// then validation, then train. Output lists are ordered by user.
inline DatasetSplit split_dataset(const InteractionDataset& ds, SplitRatios ratios, std::uint64_t seed) {
  validate(ratios);
  std::vector<std::vector<std::uint32_t>> per_user(ds.n_users());
  for (const auto& e : ds.interactions) per_user[e.user].push_back(e.item);

  DatasetSplit out;
  out.seed = seed;
  std::size_t short_users = 0;
  for (std::uint32_t u = 0; u < per_user.size(); ++u) {
    auto& items = per_user[u];
    Rng rng = make_rng(seed, "split", u);
    std::shuffle(items.begin(), items.end(), rng);
    auto c = split_counts(items.size(), ratios);
    if (items.size() < 3 && !items.empty()) ++short_users;
    std::size_t k = 0;
    for (; k < c.test; ++k) out.test.push_back({u, items[k]});
    for (; k < c.test + c.valid; ++k) out.valid.push_back({u, items[k]});
    for (; k < items.size(); ++k) out.train.push_back({u, items[k]});
  }
  if (short_users > 0)
    log::warn(std::to_string(short_users) + " user(s) with fewer than 3 interactions kept entirely in train");
  return out;
}

/// Compressed sparse row adjacency in both directions. Immutable once built.
class BipartiteGraph {
 public:
  BipartiteGraph() : user_offsets_(1, 0), item_offsets_(1, 0) {}

  /// Duplicate edges are collapsed.
  static BipartiteGraph from_edges(std::size_t n_users, std::size_t n_items,
                                   std::span<const Interaction> edges) {
    std::vector<Interaction> sorted(edges.begin(), edges.end());
    for (const auto& e : sorted)
      if (e.user >= n_users || e.item >= n_items)
        throw ValidationError("edge references a node outside the graph");
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    BipartiteGraph g;
    g.n_users_ = n_users;
    g.n_items_ = n_items;
    g.user_offsets_.assign(n_users + 1, 0);
    g.item_offsets_.assign(n_items + 1, 0);
    for (const auto& e : sorted) {
      ++g.user_offsets_[e.user + 1];
      ++g.item_offsets_[e.item + 1];
    }
    std::partial_sum(g.user_offsets_.begin(), g.user_offsets_.end(), g.user_offsets_.begin());
    std::partial_sum(g.item_offsets_.begin(), g.item_offsets_.end(), g.item_offsets_.begin());
    g.user_adj_.resize(sorted.size());
    g.item_adj_.resize(sorted.size());
    std::vector<std::size_t> ifill(g.item_offsets_.begin(), g.item_offsets_.end() - 1);
    // `sorted` is user-major with ascending items, and users ascend, so both
    // directions come out sorted without a second sort.
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      g.user_adj_[k] = sorted[k].item;
      g.item_adj_[ifill[sorted[k].item]++] = sorted[k].user;
    }
    return g;
  }

  std::size_t n_users() const { return n_users_; }
  std::size_t n_items() const { return n_items_; }
  std::size_t n_nodes() const { return n_users_ + n_items_; }
  std::size_t n_edges() const { return user_adj_.size(); }

  std::span<const std::uint32_t> items_of(std::uint32_t user) const {
    return {user_adj_.data() + user_offsets_[user], user_offsets_[user + 1] - user_offsets_[user]};
  }
  std::span<const std::uint32_t> users_of(std::uint32_t item) const {
    return {item_adj_.data() + item_offsets_[item], item_offsets_[item + 1] - item_offsets_[item]};
  }
  /// Neighbors of `n`; they are of the opposite kind.
  std::span<const std::uint32_t> neighbors(NodeId n) const {
    return n.kind == NodeKind::User ? items_of(n.index) : users_of(n.index);
  }
  std::size_t degree(NodeId n) const { return neighbors(n).size(); }
  std::size_t count(NodeKind k) const { return k == NodeKind::User ? n_users_ : n_items_; }
  bool contains(NodeId n) const { return n.index < count(n.kind); }

  bool has_edge(std::uint32_t user, std::uint32_t item) const {
    auto adj = items_of(user);
    return std::binary_search(adj.begin(), adj.end(), item);
  }

  /// Global row index used by embedding matrices: users first, then items.
  std::size_t global_index(NodeId n) const {
    return n.kind == NodeKind::User ? n.index : n_users_ + n.index;
  }

  /// Edges in canonical user-major, item-ascending order.
  std::vector<Interaction> edges() const {
    std::vector<Interaction> out;
    out.reserve(n_edges());
    for (std::uint32_t u = 0; u < n_users_; ++u)
      for (auto i : items_of(u)) out.push_back({u, i});
    return out;
  }

  friend bool operator==(const BipartiteGraph&, const BipartiteGraph&) = default;

 private:
  std::size_t n_users_ = 0, n_items_ = 0;
  std::vector<std::size_t> user_offsets_, item_offsets_;
  std::vector<std::uint32_t> user_adj_, item_adj_;
};

/// Node counts are inferred from the largest referenced index.
inline BipartiteGraph build_graph(std::span<const Interaction> edges) {
  std::size_t nu = 0, ni = 0;
  for (const auto& e : edges) {
    nu = std::max<std::size_t>(nu, e.user + 1);
    ni = std::max<std::size_t>(ni, e.item + 1);
  }
  return BipartiteGraph::from_edges(nu, ni, edges);
}

inline BipartiteGraph build_graph(std::size_t n_users, std::size_t n_items,
                                  std::span<const Interaction> edges) {
  return BipartiteGraph::from_edges(n_users, n_items, edges);
}

/// Removes round(ratio * n_edges) edges chosen uniformly at random.
inline BipartiteGraph drop_edges(const BipartiteGraph& g, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw ValidationError("drop ratio must be in [0, 1)");
  auto edges = g.edges();
  auto n_drop = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(edges.size())));
  if (n_drop == 0) return g;
  Rng rng = make_rng(seed, "drop_edges");
  std::shuffle(edges.begin(), edges.end(), rng);
  edges.erase(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_drop));
  return BipartiteGraph::from_edges(g.n_users(), g.n_items(), edges);
}

// ---- split manifest on disk -------------------------------------------------
//
// <dir>/nodes.tsv   "u<TAB>ext" rows in dense user order, then "i<TAB>ext" rows
// <dir>/train.tsv, valid.tsv, test.tsv   external-id edge lists
// <dir>/seed.txt    the split seed

struct SplitBundle {
  InteractionDataset dataset;  // all interactions, id maps fixed by nodes.tsv
  DatasetSplit split;
};

inline void write_split(const std::filesystem::path& dir, const InteractionDataset& ds,
                        const DatasetSplit& split) {
  std::ostringstream nodes;
  for (const auto& n : ds.users.names()) nodes << "u\t" << n << '\n';
  for (const auto& n : ds.items.names()) nodes << "i\t" << n << '\n';
  io::atomic_write(dir / "nodes.tsv", nodes.str());
  auto dump = [&](const char* name, const std::vector<Interaction>& edges) {
    std::ostringstream ss;
    write_interactions(ss, ds, edges);
    io::atomic_write(dir / name, ss.str());
  };
  dump("train.tsv", split.train);
  dump("valid.tsv", split.valid);
  dump("test.tsv", split.test);
  io::atomic_write(dir / "seed.txt", std::to_string(split.seed) + "\n");
}

inline SplitBundle read_split(const std::filesystem::path& dir) {
  SplitBundle b;
  {
    auto in = io::open_input(dir / "nodes.tsv");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      if (line.size() < 3 || line[1] != '\t' || (line[0] != 'u' && line[0] != 'i'))
        throw ParseError("bad nodes.tsv row '" + line + "'", lineno);
      (line[0] == 'u' ? b.dataset.users : b.dataset.items).intern(line.substr(2));
    }
  }
  auto load = [&](const char* name, std::vector<Interaction>& out) {
    auto in = io::open_input(dir / name);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line.front() == '#') continue;
      auto f = detail::split_fields(line, InteractionFileFormat::Delimiter::Tab);
      if (f.size() < 2) throw ParseError(std::string(name) + ": expected two columns", lineno);
      if (!b.dataset.users.contains(f[0]) || !b.dataset.items.contains(f[1]))
        throw ParseError(std::string(name) + ": id not present in nodes.tsv", lineno);
      out.push_back({b.dataset.users.at(f[0]), b.dataset.items.at(f[1])});
    }
  };
  load("train.tsv", b.split.train);
  load("valid.tsv", b.split.valid);
  load("test.tsv", b.split.test);
  {
    auto in = io::open_input(dir / "seed.txt");
    if (!(in >> b.split.seed)) throw ParseError("seed.txt: expected an integer", 1);
  }
  for (const auto* part : {&b.split.train, &b.split.valid, &b.split.test})
    b.dataset.interactions.insert(b.dataset.interactions.end(), part->begin(), part->end());
  return b;
}

}  // namespace mixdec
