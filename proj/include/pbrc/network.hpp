#pragma once

#include <pbrc/rng.hpp>

#include <algorithm>
#include <deque>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pbrc {

// Directed communication graph over agents 0..n-1. An edge u -> v means u's
// messages reach v.
struct Graph {
  int n = 0;
  std::vector<std::vector<int>> out;
  std::vector<std::vector<int>> in;

  explicit Graph(int agents = 0) : n(agents), out(agents), in(agents) {}

  static Graph from_edges(int agents, const std::vector<std::pair<int, int>>& edges) {
    Graph g(agents);
    for (auto [u, v] : edges) g.add_edge(u, v);
    return g;
  }

  void add_edge(int u, int v) {
    if (u < 0 || v < 0 || u >= n || v >= n) throw std::out_of_range("edge endpoint out of range");
    if (u == v || has_edge(u, v)) return;
    out[u].push_back(v);
    in[v].push_back(u);
  }

  void add_undirected(int u, int v) {
    add_edge(u, v);
    add_edge(v, u);
  }

  bool has_edge(int u, int v) const {
    return std::find(out[u].begin(), out[u].end(), v) != out[u].end();
  }

  std::size_t edge_count() const {
    std::size_t c = 0;
    for (const auto& a : out) c += a.size();
    return c;
  }
};

inline Graph ring(int n) {
  Graph g(n);
  for (int i = 0; i < n; ++i) g.add_undirected(i, (i + 1) % n);
  return g;
}

inline Graph complete(int n) {
  Graph g(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) g.add_undirected(i, j);
  }
  return g;
}

// Hub is agent 0.
inline Graph star(int n) {
  Graph g(n);
  for (int i = 1; i < n; ++i) g.add_undirected(0, i);
  return g;
}

inline Graph grid(int rows, int cols) {
  Graph g(rows * cols);
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (r + 1 < rows) g.add_undirected(id(r, c), id(r + 1, c));
      if (c + 1 < cols) g.add_undirected(id(r, c), id(r, c + 1));
    }
  }
  return g;
}

inline Graph erdos_renyi(int n, double p, Xoshiro256ss& rng) {
  Graph g(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.bernoulli(p)) g.add_undirected(i, j);
    }
  }
  return g;
}

// BFS distances from source along out-edges; -1 marks unreachable.
inline std::vector<int> bfs_dist(const Graph& g, int source) {
  std::vector<int> dist(g.n, -1);
  std::deque<int> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : g.out[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

inline std::optional<int> dist(const Graph& g, int u, int v) {
  const int d = bfs_dist(g, u)[v];
  if (d < 0) return std::nullopt;
  return d;
}

inline std::vector<std::vector<int>> distance_matrix(const Graph& g) {
  std::vector<std::vector<int>> m;
  m.reserve(g.n);
  for (int u = 0; u < g.n; ++u) m.push_back(bfs_dist(g, u));
  return m;
}

inline std::optional<int> diameter(const Graph& g) {
  int d = 0;
  for (int u = 0; u < g.n; ++u) {
    auto row = bfs_dist(g, u);
    for (int v = 0; v < g.n; ++v) {
      if (row[v] < 0) return std::nullopt;
      d = std::max(d, row[v]);
    }
  }
  return d;
}

inline bool is_strongly_connected(const Graph& g) {
  if (g.n == 0) return true;
  for (int u = 0; u < g.n; ++u) {
    auto row = bfs_dist(g, u);
    if (std::any_of(row.begin(), row.end(), [](int d) { return d < 0; })) return false;
  }
  return true;
}

inline Graph connected_erdos_renyi(int n, double p, Xoshiro256ss& rng, int max_tries = 1000) {
  for (int t = 0; t < max_tries; ++t) {
    Graph g = erdos_renyi(n, p, rng);
    if (is_strongly_connected(g)) return g;
  }
  throw std::runtime_error("could not sample a connected graph; raise p or n*p");
}

// initial[i] = ids of the tokens agent i holds before round 0.
using TokenPlacement = std::vector<std::vector<std::string>>;

inline TokenPlacement unique_placement(const Graph& g) {
  TokenPlacement p(g.n);
  for (int i = 0; i < g.n; ++i) p[i] = {"tok" + std::to_string(i)};
  return p;
}

// Deterministic epidemic dissemination: each round every agent forwards its
// whole holding to all out-neighbors and keeps everything it has seen.
//   knowledge[t][i] = holdings of agent i after t rounds (t = 0..horizon)
//   exposure[t][i]  = what i's in-neighbors held at time t (t = 0..horizon-1),
//                     i.e. what arrives at i during round t.
struct FloodResult {
  std::vector<std::vector<std::set<std::string>>> knowledge;
  std::vector<std::vector<std::set<std::string>>> exposure;
};

inline FloodResult flood(const Graph& g, const TokenPlacement& initial, int horizon) {
  if (static_cast<int>(initial.size()) != g.n) {
    throw std::invalid_argument("placement size must match agent count");
  }
  FloodResult r;
  std::vector<std::set<std::string>> k(g.n);
  for (int i = 0; i < g.n; ++i) k[i] = {initial[i].begin(), initial[i].end()};
  r.knowledge.push_back(k);
  for (int t = 0; t < horizon; ++t) {
    std::vector<std::set<std::string>> expo(g.n);
    for (int i = 0; i < g.n; ++i) {
      for (int j : g.in[i]) expo[i].insert(k[j].begin(), k[j].end());
    }
    std::vector<std::set<std::string>> next = k;
    for (int i = 0; i < g.n; ++i) next[i].insert(expo[i].begin(), expo[i].end());
    r.exposure.push_back(std::move(expo));
    k = next;
    r.knowledge.push_back(k);
  }
  return r;
}

// First round by which every agent holds every placed token; nullopt when
// dissemination reaches a fixpoint short of that.
inline std::optional<int> closure_time(const Graph& g, const TokenPlacement& initial) {
  std::set<std::string> everything;
  for (const auto& ids : initial) everything.insert(ids.begin(), ids.end());
  std::vector<std::set<std::string>> k(g.n);
  for (int i = 0; i < g.n; ++i) k[i] = {initial[i].begin(), initial[i].end()};
  for (int t = 0;; ++t) {
    if (std::all_of(k.begin(), k.end(),
                    [&](const std::set<std::string>& s) { return s == everything; })) {
      return t;
    }
    std::vector<std::set<std::string>> next = k;
    for (int i = 0; i < g.n; ++i) {
      for (int j : g.in[i]) next[i].insert(k[j].begin(), k[j].end());
    }
    if (next == k) return std::nullopt;
    k = std::move(next);
  }
}

// Do a and b give every agent the same reach for every horizon up to T?
// Equivalently: under flooding with per-agent unique tokens, both graphs
// produce identical exposure traces for rounds 0..T-1.
inline bool reach_equiv(const Graph& a, const Graph& b, int horizon) {
  if (a.n != b.n) return false;
  auto da = distance_matrix(a);
  auto db = distance_matrix(b);
  for (int u = 0; u < a.n; ++u) {
    for (int v = 0; v < a.n; ++v) {
      for (int t = 0; t <= horizon; ++t) {
        const bool ra = da[u][v] >= 0 && da[u][v] <= t;
        const bool rb = db[u][v] >= 0 && db[u][v] <= t;
        if (ra != rb) return false;
      }
    }
  }
  return true;
}

}  // namespace pbrc
