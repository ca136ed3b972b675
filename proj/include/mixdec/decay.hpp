#pragma once

// Soft-link decay sets: for an anchor node, every opposite-kind node within
// the hop budget that is not already a neighbor gets a link weight
//
//   w = rho + (1 - rho) * r / r_max
//
// where r counts the shortest paths from the anchor (or, in random-walk mode,
// the number of walk visits). The k heaviest links are kept.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mixdec/error.hpp"
#include "mixdec/graph.hpp"
#include "mixdec/instrumentation.hpp"
#include "mixdec/io.hpp"
#include "mixdec/rng.hpp"

namespace mixdec {

enum class DecayMode { ExactBfs, RandomWalk };

// How path counts are accumulated in ExactBfs mode.
enum class PathCountMode { ShortestPaths, AllWalks };

struct DecayConfig {
  std::uint32_t hops = 3;
  double rho = 0.5;
  std::size_t k = 500;
  DecayMode mode = DecayMode::ExactBfs;
  PathCountMode path_count = PathCountMode::ShortestPaths;
  std::size_t num_walks = 100;
  std::uint64_t seed = 0;
  NodeKind anchor_kind = NodeKind::User;

  void validate() const {
    if (hops < 3 || hops % 2 == 0) throw ValidationError("decay hops must be odd and >= 3");
    if (!(rho >= 0.0 && rho < 1.0)) throw ValidationError("rho must be in [0, 1)");
    if (k < 1) throw ValidationError("decay k must be >= 1");
    if (mode == DecayMode::RandomWalk && num_walks < 1) throw ValidationError("num_walks must be >= 1");
  }

  friend bool operator==(const DecayConfig&, const DecayConfig&) = default;
};

struct DecayEntry {
  NodeId node;
  std::uint64_t r = 0;
  double weight = 0.0;

  friend bool operator==(const DecayEntry&, const DecayEntry&) = default;
};

struct DecaySet {
  NodeId anchor;
  std::vector<DecayEntry> entries;  // weight descending, ties by ascending index

  bool empty() const { return entries.empty(); }
  friend bool operator==(const DecaySet&, const DecaySet&) = default;
};

struct ReachedNode {
  NodeId node;
  std::uint32_t depth = 0;
  std::uint64_t count = 0;
};

namespace detail {

inline std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a + b;
  return s < a ? std::numeric_limits<std::uint64_t>::max() : s;
}

inline bool is_neighbor(const BipartiteGraph& g, NodeId anchor, NodeId other) {
  auto adj = g.neighbors(anchor);
  return std::binary_search(adj.begin(), adj.end(), other.index);
}

}  // namespace detail

/// Reusable BFS workspace. Scratch arrays are sized to the graph once and
/// reset via the touched list, so repeated calls cost O(visited).
class PathCounter {
 public:
  explicit PathCounter(const BipartiteGraph& g)
      : g_(&g), depth_(g.n_nodes(), kUnseen), count_(g.n_nodes(), 0) {}

  /// Level-wise shortest-path counting: a node first reached at depth d gets
  /// the summed counts of its depth d-1 neighbors. The anchor has depth 0 and
  /// count 1. Nodes are returned in discovery order.
  std::vector<ReachedNode> shortest_paths(NodeId anchor, std::uint32_t hops) {
    check_anchor(anchor);
    std::vector<NodeId> frontier{anchor}, next;
    touch(anchor, 0, 1);
    for (std::uint32_t d = 1; d <= hops && !frontier.empty(); ++d) {
      next.clear();
      for (NodeId x : frontier) {
        std::uint64_t cx = count_[g_->global_index(x)];
        NodeKind yk = opposite(x.kind);
        for (auto yi : g_->neighbors(x)) {
          NodeId y{yk, yi};
          std::size_t gy = g_->global_index(y);
          if (depth_[gy] == kUnseen) {
            touch(y, d, cx);
            next.push_back(y);
          } else if (depth_[gy] == d) {
            count_[gy] = detail::saturating_add(count_[gy], cx);
          }
        }
      }
      frontier.swap(next);
    }
    return harvest();
  }

  /// Counts every walk of length 1..hops from the anchor (revisits allowed).
  /// `depth` is still the shortest distance.
  std::vector<ReachedNode> all_walks(NodeId anchor, std::uint32_t hops) {
    check_anchor(anchor);
    std::vector<std::uint64_t> cur(g_->n_nodes(), 0), nxt(g_->n_nodes(), 0);
    std::vector<std::size_t> active{g_->global_index(anchor)}, next_active;
    cur[active[0]] = 1;
    touch(anchor, 0, 0);
    for (std::uint32_t d = 1; d <= hops; ++d) {
      next_active.clear();
      for (std::size_t gx : active) {
        NodeId x = node_at(gx);
        NodeKind yk = opposite(x.kind);
        for (auto yi : g_->neighbors(x)) {
          NodeId y{yk, yi};
          std::size_t gy = g_->global_index(y);
          if (nxt[gy] == 0) next_active.push_back(gy);
          nxt[gy] = detail::saturating_add(nxt[gy], cur[gx]);
        }
      }
      for (std::size_t gx : active) cur[gx] = 0;
      for (std::size_t gy : next_active) {
        NodeId y = node_at(gy);
        if (depth_[gy] == kUnseen) touch(y, d, 0);
        count_[gy] = detail::saturating_add(count_[gy], nxt[gy]);
        cur[gy] = nxt[gy];
        nxt[gy] = 0;
      }
      active.swap(next_active);
    }
    auto out = harvest();
    // The anchor's own count is the number of closed walks; report 1 as in
    // the shortest-path mode.
    for (auto& r : out)
      if (r.depth == 0) r.count = 1;
    return out;
  }

 private:
  static constexpr std::uint32_t kUnseen = std::numeric_limits<std::uint32_t>::max();

  void check_anchor(NodeId anchor) const {
    if (!g_->contains(anchor)) throw ValidationError("anchor is not a node of the graph");
  }
  NodeId node_at(std::size_t global) const {
    return global < g_->n_users() ? NodeId::user(static_cast<std::uint32_t>(global))
                                  : NodeId::item(static_cast<std::uint32_t>(global - g_->n_users()));
  }
  void touch(NodeId n, std::uint32_t depth, std::uint64_t count) {
    std::size_t gi = g_->global_index(n);
    depth_[gi] = depth;
    count_[gi] = count;
    touched_.push_back(n);
  }
  std::vector<ReachedNode> harvest() {
    std::vector<ReachedNode> out;
    out.reserve(touched_.size());
    for (NodeId n : touched_) {
      std::size_t gi = g_->global_index(n);
      out.push_back({n, depth_[gi], count_[gi]});
      depth_[gi] = kUnseen;
      count_[gi] = 0;
    }
    touched_.clear();
    return out;
  }

  const BipartiteGraph* g_;
  std::vector<std::uint32_t> depth_;
  std::vector<std::uint64_t> count_;
  std::vector<NodeId> touched_;
};

inline std::map<NodeId, ReachedNode> to_map(const std::vector<ReachedNode>& v) {
  std::map<NodeId, ReachedNode> m;
  for (const auto& r : v) m.emplace(r.node, r);
  return m;
}

inline std::vector<ReachedNode> shortest_path_counts(const BipartiteGraph& g, NodeId anchor,
                                                     std::uint32_t hops) {
  if (hops < 1) throw ValidationError("hops must be >= 1");
  return PathCounter(g).shortest_paths(anchor, hops);
}

inline double decay_weight(double rho, std::uint64_t r, std::uint64_t r_max) {
  if (r_max == 0) throw ValidationError("decay_weight: r_max must be positive");
  if (r < 1 || r > r_max) throw ValidationError("decay_weight: need 1 <= r <= r_max");
  return rho + (1.0 - rho) * (static_cast<double>(r) / static_cast<double>(r_max));
}

/// Converts raw (node, r) candidate counts into a top-k decay set.
inline DecaySet decay_set_from_counts(NodeId anchor, std::vector<std::pair<NodeId, std::uint64_t>> counts,
                                      double rho, std::size_t k) {
  DecaySet set{anchor, {}};
  std::erase_if(counts, [](const auto& c) { return c.second == 0; });
  if (counts.empty()) return set;
  std::uint64_t r_max = 0;
  for (const auto& c : counts) r_max = std::max(r_max, c.second);
  // Weights are strictly increasing in r, so ordering by r is ordering by weight.
  std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first.index < b.first.index;
  });
  if (counts.size() > k) counts.resize(k);
  set.entries.reserve(counts.size());
  for (const auto& [node, r] : counts) set.entries.push_back({node, r, decay_weight(rho, r, r_max)});
  return set;
}

/// Visit counts of opposite-kind non-neighbor nodes over `num_walks` uniform
/// walks of exactly `hops` steps. Walks from an isolated anchor are empty.
inline std::map<NodeId, std::uint64_t> random_walk_counts(const BipartiteGraph& g, NodeId anchor,
                                                          const DecayConfig& cfg) {
  if (!g.contains(anchor)) throw ValidationError("anchor is not a node of the graph");
  if (cfg.num_walks < 1) throw ValidationError("num_walks must be >= 1");
  ++instrumentation::counters().random_walks;
  std::map<NodeId, std::uint64_t> counts;
  if (g.degree(anchor) == 0) return counts;
  Rng rng = make_rng(cfg.seed, "walk", g.global_index(anchor));
  for (std::size_t w = 0; w < cfg.num_walks; ++w) {
    NodeId cur = anchor;
    for (std::uint32_t step = 1; step <= cfg.hops; ++step) {
      auto adj = g.neighbors(cur);
      if (adj.empty()) break;
      cur = NodeId{opposite(cur.kind), adj[uniform_index(rng, adj.size())]};
      if (step % 2 == 1 && step >= 3 && !detail::is_neighbor(g, anchor, cur)) ++counts[cur];
    }
  }
  return counts;
}

/// Decay set for one anchor under `cfg` (exact path counts or walk visits).
inline DecaySet build_decay_set(const BipartiteGraph& g, NodeId anchor, const DecayConfig& cfg,
                                PathCounter* scratch = nullptr) {
  cfg.validate();
  ++instrumentation::counters().decay_builds;
  std::vector<std::pair<NodeId, std::uint64_t>> cand;
  if (cfg.mode == DecayMode::RandomWalk) {
    for (const auto& [node, c] : random_walk_counts(g, anchor, cfg)) cand.emplace_back(node, c);
  } else {
    PathCounter local(g);
    PathCounter& pc = scratch ? *scratch : local;
    auto reached = cfg.path_count == PathCountMode::ShortestPaths ? pc.shortest_paths(anchor, cfg.hops)
                                                                   : pc.all_walks(anchor, cfg.hops);
    for (const auto& r : reached)
      if (r.node.kind != anchor.kind && r.depth >= 3 && r.depth <= cfg.hops && r.depth % 2 == 1)
        cand.emplace_back(r.node, r.count);
  }
  return decay_set_from_counts(anchor, std::move(cand), cfg.rho, cfg.k);
}

struct DecayTable {
  DecayConfig cfg;
  std::vector<DecaySet> sets;  // indexed by anchor index

  const DecaySet* find(NodeId anchor) const {
    if (anchor.kind != cfg.anchor_kind || anchor.index >= sets.size()) return nullptr;
    return &sets[anchor.index];
  }
  friend bool operator==(const DecayTable&, const DecayTable&) = default;
};

/// One decay set per anchor of `cfg.anchor_kind`. With threads > 1 anchors are
/// split into contiguous ranges; results land in anchor order either way.
inline DecayTable precompute_all(const BipartiteGraph& g, const DecayConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  DecayTable table{cfg, {}};
  std::size_t n = g.count(cfg.anchor_kind);
  table.sets.resize(n);
  auto work = [&](std::size_t lo, std::size_t hi) {
    PathCounter scratch(g);
    for (std::size_t a = lo; a < hi; ++a)
      table.sets[a] = build_decay_set(g, NodeId{cfg.anchor_kind, static_cast<std::uint32_t>(a)}, cfg, &scratch);
  };
  threads = std::max(1u, threads);
  if (threads == 1 || n < 2) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t lo = 0; lo < n; lo += chunk) pool.emplace_back(work, lo, std::min(n, lo + chunk));
  }
  return table;
}

// ---- decay table file --------------------------------------------------------

namespace detail {

inline const char* to_string(DecayMode m) { return m == DecayMode::ExactBfs ? "exact" : "walk"; }
inline const char* to_string(PathCountMode m) {
  return m == PathCountMode::ShortestPaths ? "shortest" : "all_walks";
}
inline const char* to_string(NodeKind k) { return k == NodeKind::User ? "user" : "item"; }

}  // namespace detail

inline constexpr int kDecayFileVersion = 1;

inline std::string serialize_decay_table(const DecayTable& t) {
  std::ostringstream ss;
  ss << "# mixdec decay table: anchor<TAB>node<TAB>r<TAB>weight\n"
     << "version " << kDecayFileVersion << '\n'
     << "hops " << t.cfg.hops << '\n'
     << "rho " << io::format_double(t.cfg.rho) << '\n'
     << "k " << t.cfg.k << '\n'
     << "mode " << detail::to_string(t.cfg.mode) << '\n'
     << "path_count " << detail::to_string(t.cfg.path_count) << '\n'
     << "num_walks " << t.cfg.num_walks << '\n'
     << "seed " << t.cfg.seed << '\n'
     << "anchor_kind " << detail::to_string(t.cfg.anchor_kind) << '\n'
     << "anchors " << t.sets.size() << '\n'
     << "end_header\n";
  for (const auto& s : t.sets)
    for (const auto& e : s.entries)
      ss << s.anchor.index << '\t' << e.node.index << '\t' << e.r << '\t' << io::format_double(e.weight) << '\n';
  return ss.str();
}

inline void write_decay_table(const std::filesystem::path& path, const DecayTable& t) {
  io::atomic_write(path, serialize_decay_table(t));
}

inline DecayTable parse_decay_table(std::istream& in, const std::string& source = "decay table") {
  DecayTable t;
  std::string line;
  std::size_t lineno = 0, anchors = 0;
  bool have_version = false, ended = false;
  auto fail = [&](const std::string& msg) { throw ParseError(source + ": " + msg, lineno); };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    if (line == "end_header") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string key, val;
    if (!(ls >> key >> val)) fail("bad header line '" + line + "'");
    try {
      if (key == "version") {
        if (std::stoi(val) != kDecayFileVersion) fail("unsupported version " + val);
        have_version = true;
      } else if (key == "hops") t.cfg.hops = static_cast<std::uint32_t>(std::stoul(val));
      else if (key == "rho") t.cfg.rho = std::stod(val);
      else if (key == "k") t.cfg.k = std::stoull(val);
      else if (key == "mode") {
        if (val != "exact" && val != "walk") fail("bad mode " + val);
        t.cfg.mode = val == "exact" ? DecayMode::ExactBfs : DecayMode::RandomWalk;
      } else if (key == "path_count") {
        if (val != "shortest" && val != "all_walks") fail("bad path_count " + val);
        t.cfg.path_count = val == "shortest" ? PathCountMode::ShortestPaths : PathCountMode::AllWalks;
      } else if (key == "num_walks") t.cfg.num_walks = std::stoull(val);
      else if (key == "seed") t.cfg.seed = std::stoull(val);
      else if (key == "anchor_kind") {
        if (val != "user" && val != "item") fail("bad anchor_kind " + val);
        t.cfg.anchor_kind = val == "user" ? NodeKind::User : NodeKind::Item;
      } else if (key == "anchors") anchors = std::stoull(val);
      else fail("unknown header key " + key);
    } catch (const std::logic_error&) {
      fail("bad value for " + key);
    }
  }
  if (!have_version || !ended) fail("missing version or end_header");
  t.sets.resize(anchors);
  for (std::size_t a = 0; a < anchors; ++a) t.sets[a].anchor = NodeId{t.cfg.anchor_kind, static_cast<std::uint32_t>(a)};
  NodeKind other = opposite(t.cfg.anchor_kind);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::uint64_t a, n, r;
    std::string w;
    if (!(ls >> a >> n >> r >> w) || a >= anchors) fail("bad row '" + line + "'");
    double weight = 0.0;
    try {
      weight = std::stod(w);
    } catch (const std::logic_error&) {
      fail("bad weight '" + w + "'");
    }
    t.sets[a].entries.push_back({NodeId{other, static_cast<std::uint32_t>(n)}, r, weight});
  }
  return t;
}

inline DecayTable read_decay_table(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  return parse_decay_table(in, path.string());
}

}  // namespace mixdec
