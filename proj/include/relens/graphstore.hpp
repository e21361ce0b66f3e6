#pragma once
// Per-signal behavior graphs over the bipartite query/product node set,
// k-hop neighborhood extraction around a (q, p) anchor pair, and an
// exact-match subgraph cache built in parallel.
//
// Traversal runs on the union of all base signals; the returned subgraph
// carries edge-typed signals so downstream models can filter. When the
// neighborhood exceeds the cap, nodes are kept in this order: anchors
// first, then ascending BFS distance, then descending total edge weight
// to the previous BFS layer, then lexicographic node id.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "relens/core.hpp"
#include "relens/parallel.hpp"

namespace relens {

// Internal node numbering: queries are [0, n_queries), products are
// [n_queries, n_queries + n_products).
struct NodeTable {
  std::vector<std::string> query_ids;
  std::vector<std::string> product_ids;
  std::unordered_map<std::string, int> query_index;
  std::unordered_map<std::string, int> product_index;

  int n_queries() const { return static_cast<int>(query_ids.size()); }
  int n_nodes() const { return static_cast<int>(query_ids.size() + product_ids.size()); }
  bool is_query_node(int node) const { return node < n_queries(); }

  int intern_query(const std::string& id) {
    const auto it = query_index.find(id);
    if (it != query_index.end()) return it->second;
    const int idx = static_cast<int>(query_ids.size());
    query_ids.push_back(id);
    query_index.emplace(id, idx);
    return idx;
  }
  int intern_product(const std::string& id) {
    const auto it = product_index.find(id);
    if (it != product_index.end()) return it->second;
    const int idx = static_cast<int>(product_ids.size());
    product_ids.push_back(id);
    product_index.emplace(id, idx);
    return idx;
  }

  int find_query(const std::string& id) const {
    const auto it = query_index.find(id);
    return it == query_index.end() ? -1 : it->second;
  }
  int find_product(const std::string& id) const {
    const auto it = product_index.find(id);
    return it == product_index.end() ? -1 : it->second;
  }

  const std::string& node_id(int node) const {
    return is_query_node(node) ? query_ids[static_cast<std::size_t>(node)]
                               : product_ids[static_cast<std::size_t>(node - n_queries())];
  }
};

struct GraphEdgeTo {
  int to = 0;
  double weight = 0.0;
};

// Weighted undirected adjacency for one signal; edges stored both ways.
struct BehaviorGraph {
  SignalKind signal = SignalKind::Any;
  std::vector<std::vector<GraphEdgeTo>> adj;

  double degree(int node) const {
    double d = 0.0;
    for (const auto& e : adj[static_cast<std::size_t>(node)]) d += e.weight;
    return d;
  }
};

struct GraphSet {
  NodeTable nodes;
  std::array<BehaviorGraph, kNumBaseSignals> by_signal;
  BehaviorGraph any;  // union, weights summed across signals

  const BehaviorGraph& graph(SignalKind s) const {
    if (s == SignalKind::Any || s == SignalKind::HetAll) return any;
    return by_signal[static_cast<std::size_t>(s)];
  }
};

// Edge file: headerless TSV lines  query_id  product_id  signal  weight.
// Repeated (q, p, signal) lines accumulate their weights.
inline GraphSet load_edges(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open edge file: " + path);
  GraphSet gs;
  struct RawEdge {
    int q, p, sig;
    double w;
  };
  std::vector<RawEdge> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tsv(line);
    if (fields.size() != 4) {
      throw DataError("edge file " + path + " line " + std::to_string(line_no) +
                      ": expected 4 fields");
    }
    SignalKind sig;
    try {
      sig = signal_from_string(fields[2]);
    } catch (const DataError& e) {
      throw DataError("edge file " + path + " line " + std::to_string(line_no) + ": " +
                      e.what());
    }
    if (sig == SignalKind::Any || sig == SignalKind::HetAll) {
      throw DataError("edge file " + path + " line " + std::to_string(line_no) +
                      ": derived signal '" + std::string(fields[2]) +
                      "' is not storable");
    }
    const double w = parse_double(fields[3]);
    if (!(w > 0.0)) {
      throw DataError("edge file " + path + " line " + std::to_string(line_no) +
                      ": weight must be > 0");
    }
    const int q = gs.nodes.intern_query(unescape_field(fields[0]));
    const int p = gs.nodes.intern_product(unescape_field(fields[1]));
    raw.push_back({q, p, static_cast<int>(sig), w});
  }

  const int n = gs.nodes.n_nodes();
  const int nq = gs.nodes.n_queries();
  for (int s = 0; s < kNumBaseSignals; ++s) {
    gs.by_signal[static_cast<std::size_t>(s)].signal = static_cast<SignalKind>(s);
    gs.by_signal[static_cast<std::size_t>(s)].adj.resize(static_cast<std::size_t>(n));
  }
  gs.any.signal = SignalKind::Any;
  gs.any.adj.resize(static_cast<std::size_t>(n));

  // Collapse duplicates per signal, then mirror into both directions.
  std::map<std::tuple<int, int, int>, double> merged;
  for (const auto& e : raw) merged[{e.q, e.p + nq, e.sig}] += e.w;
  std::map<std::pair<int, int>, double> merged_any;
  for (const auto& [key, w] : merged) {
    const auto [q, p, sig] = key;
    auto& g = gs.by_signal[static_cast<std::size_t>(sig)];
    g.adj[static_cast<std::size_t>(q)].push_back({p, w});
    g.adj[static_cast<std::size_t>(p)].push_back({q, w});
    merged_any[{q, p}] += w;
  }
  for (const auto& [key, w] : merged_any) {
    gs.any.adj[static_cast<std::size_t>(key.first)].push_back({key.second, w});
    gs.any.adj[static_cast<std::size_t>(key.second)].push_back({key.first, w});
  }
  return gs;
}

// ── subgraphs ────────────────────────────────────────────────────────────

struct SubNode {
  bool is_query = false;
  std::string id;

  // Ordering key used by the cap tie-break and serialization.
  std::string key() const { return (is_query ? "q:" : "p:") + id; }
  bool operator==(const SubNode& o) const {
    return is_query == o.is_query && id == o.id;
  }
};

struct SubEdge {
  int u = 0;  // index into nodes
  int v = 0;
  SignalKind signal = SignalKind::Impressions;
  double weight = 0.0;
};

struct Subgraph {
  std::vector<SubNode> nodes;
  std::vector<SubEdge> edges;
  int anchor_query = 0;    // position of q in nodes
  int anchor_product = 1;  // position of p in nodes

  int size() const { return static_cast<int>(nodes.size()); }
};

// Breadth-first neighborhood around both anchors over the union graph,
// truncated to `cap` nodes. Unknown anchors yield an anchors-only subgraph.
inline Subgraph extract(const GraphSet& gs, const std::string& query_id,
                        const std::string& product_id, int k, int cap) {
  if (k < 0) throw ConfigError("extract: k must be >= 0");
  if (cap < 2) throw ConfigError("extract: cap must be >= 2");

  const int qn = gs.nodes.find_query(query_id);
  const int pn_raw = gs.nodes.find_product(product_id);
  const int pn = pn_raw < 0 ? -1 : pn_raw + gs.nodes.n_queries();

  Subgraph sub;
  sub.nodes.push_back({true, query_id});
  sub.nodes.push_back({false, product_id});
  sub.anchor_query = 0;
  sub.anchor_product = 1;

  // An unknown anchor yields the anchors-only subgraph.
  if (qn < 0 || pn < 0) return sub;

  // Multi-source BFS distance from {q, p}.
  std::unordered_map<int, int> dist;
  std::vector<int> frontier;
  dist[qn] = 0;
  frontier.push_back(qn);
  if (pn != qn) {
    dist[pn] = 0;
    frontier.push_back(pn);
  }
  for (int hop = 1; hop <= k && !frontier.empty(); ++hop) {
    std::vector<int> next;
    for (int u : frontier) {
      for (const auto& e : gs.any.adj[static_cast<std::size_t>(u)]) {
        if (dist.emplace(e.to, hop).second) next.push_back(e.to);
      }
    }
    frontier = std::move(next);
  }

  // Candidate order: ascending distance, then descending weight to the
  // previous layer, then lexicographic key. Anchors are pinned up front.
  struct Cand {
    int node;
    int dist;
    double layer_weight;
    std::string key;
  };
  std::vector<Cand> cands;
  cands.reserve(dist.size());
  for (const auto& [node, d] : dist) {
    if (node == qn || node == pn) continue;
    double lw = 0.0;
    for (const auto& e : gs.any.adj[static_cast<std::size_t>(node)]) {
      const auto it = dist.find(e.to);
      if (it != dist.end() && it->second == d - 1) lw += e.weight;
    }
    const bool is_q = gs.nodes.is_query_node(node);
    cands.push_back({node, d, lw, (is_q ? "q:" : "p:") + gs.nodes.node_id(node)});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.layer_weight != b.layer_weight) return a.layer_weight > b.layer_weight;
    return a.key < b.key;
  });

  std::unordered_map<int, int> position;  // graph node -> subgraph index
  position[qn] = 0;
  position[pn] = 1;
  for (const auto& c : cands) {
    if (sub.size() >= cap) break;
    position[c.node] = sub.size();
    sub.nodes.push_back({gs.nodes.is_query_node(c.node), gs.nodes.node_id(c.node)});
  }

  // Induced edges per base signal, each stored once with u < v.
  for (int s = 0; s < kNumBaseSignals; ++s) {
    const auto& g = gs.by_signal[static_cast<std::size_t>(s)];
    for (const auto& [node, pos] : position) {
      for (const auto& e : g.adj[static_cast<std::size_t>(node)]) {
        const auto it = position.find(e.to);
        if (it == position.end() || pos >= it->second) continue;
        sub.edges.push_back({pos, it->second, static_cast<SignalKind>(s), e.weight});
      }
    }
  }
  std::sort(sub.edges.begin(), sub.edges.end(), [](const SubEdge& a, const SubEdge& b) {
    if (a.u != b.u) return a.u < b.u;
    if (a.v != b.v) return a.v < b.v;
    return static_cast<int>(a.signal) < static_cast<int>(b.signal);
  });
  return sub;
}

// ── cache ────────────────────────────────────────────────────────────────

// Exact-match key; subgraphs are stored under the union traversal signal.
inline std::string cache_key(const std::string& query_id, const std::string& product_id,
                             const std::string& signal = "union") {
  return escape_field(query_id) + '\t' + escape_field(product_id) + '\t' + signal;
}

struct SubgraphCache {
  std::map<std::string, Subgraph> entries;

  const Subgraph* find(const std::string& query_id, const std::string& product_id) const {
    const auto it = entries.find(cache_key(query_id, product_id));
    return it == entries.end() ? nullptr : &it->second;
  }
  std::size_t size() const { return entries.size(); }
};

inline SubgraphCache build_cache(const std::vector<QueryProductPair>& pairs,
                                 const GraphSet& gs, int k, int cap, int workers) {
  if (workers < 1) throw ConfigError("build_cache: worker count must be >= 1");
  std::vector<std::pair<std::string, std::string>> todo;
  {
    std::map<std::string, bool> seen;
    for (const auto& p : pairs) {
      const std::string key = cache_key(p.query_id, p.product_id);
      if (seen.emplace(key, true).second) todo.emplace_back(p.query_id, p.product_id);
    }
  }
  std::vector<Subgraph> slots(todo.size());
  parallel_for(todo.size(), workers, [&](std::size_t i) {
    slots[i] = extract(gs, todo[i].first, todo[i].second, k, cap);
  });
  SubgraphCache cache;
  for (std::size_t i = 0; i < todo.size(); ++i) {
    cache.entries.emplace(cache_key(todo[i].first, todo[i].second), std::move(slots[i]));
  }
  return cache;
}

// ── cache serialization ──────────────────────────────────────────────────

inline constexpr const char* kCacheVersion = "relens.cache.v1";

inline void save_cache(const SubgraphCache& cache, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write cache file: " + path);
  out << kCacheVersion << '\n';
  for (const auto& [key, sub] : cache.entries) {
    out << "entry\t" << key << '\n';
    out << "nodes\t" << sub.nodes.size() << '\t' << sub.anchor_query << '\t'
        << sub.anchor_product << '\n';
    for (const auto& n : sub.nodes) {
      out << (n.is_query ? 'q' : 'p') << '\t' << escape_field(n.id) << '\n';
    }
    out << "edges\t" << sub.edges.size() << '\n';
    for (const auto& e : sub.edges) {
      out << e.u << '\t' << e.v << '\t' << to_string(e.signal) << '\t'
          << fmt_double(e.weight) << '\n';
    }
  }
  if (!out) throw DataError("I/O failure writing " + path);
}

inline SubgraphCache load_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open cache file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCacheVersion) {
    throw DataError("cache file " + path + ": bad version header");
  }
  SubgraphCache cache;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_tsv(line);
    if (fields.size() != 4 || fields[0] != "entry") {
      throw DataError("cache file " + path + ": expected entry line");
    }
    const std::string key =
        std::string(fields[1]) + '\t' + std::string(fields[2]) + '\t' + std::string(fields[3]);
    Subgraph sub;
    if (!std::getline(in, line)) throw DataError("cache file " + path + ": truncated");
    fields = split_tsv(line);
    if (fields.size() != 4 || fields[0] != "nodes") {
      throw DataError("cache file " + path + ": expected nodes line");
    }
    const auto n_nodes = static_cast<std::size_t>(parse_int(fields[1]));
    sub.anchor_query = static_cast<int>(parse_int(fields[2]));
    sub.anchor_product = static_cast<int>(parse_int(fields[3]));
    sub.nodes.reserve(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
      if (!std::getline(in, line)) throw DataError("cache file " + path + ": truncated");
      fields = split_tsv(line);
      if (fields.size() != 2 || (fields[0] != "q" && fields[0] != "p")) {
        throw DataError("cache file " + path + ": bad node line");
      }
      sub.nodes.push_back({fields[0] == "q", unescape_field(fields[1])});
    }
    if (!std::getline(in, line)) throw DataError("cache file " + path + ": truncated");
    fields = split_tsv(line);
    if (fields.size() != 2 || fields[0] != "edges") {
      throw DataError("cache file " + path + ": expected edges line");
    }
    const auto n_edges = static_cast<std::size_t>(parse_int(fields[1]));
    sub.edges.reserve(n_edges);
    for (std::size_t i = 0; i < n_edges; ++i) {
      if (!std::getline(in, line)) throw DataError("cache file " + path + ": truncated");
      fields = split_tsv(line);
      if (fields.size() != 4) throw DataError("cache file " + path + ": bad edge line");
      SubEdge e;
      e.u = static_cast<int>(parse_int(fields[0]));
      e.v = static_cast<int>(parse_int(fields[1]));
      e.signal = signal_from_string(fields[2]);
      e.weight = parse_double(fields[3]);
      sub.edges.push_back(e);
    }
    cache.entries.emplace(key, std::move(sub));
  }
  return cache;
}

}  // namespace relens
