#include "pcir/causal.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <fstream>
#include <sstream>

#include "pcir/tensor.hpp"

namespace pcir::causal {

namespace {

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string without_underscores(std::string s) {
  s.erase(std::remove(s.begin(), s.end(), '_'), s.end());
  return s;
}

}  // namespace

CausalGraph::CausalGraph(std::vector<std::string> nodes, std::vector<std::pair<std::string, std::string>> edges,
                         std::set<std::string> latent)
    : names_(std::move(nodes)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw ConfigError("graph: empty node name");
    if (!index_.emplace(names_[i], static_cast<int>(i)).second)
      throw ConfigError("graph: duplicate node '" + names_[i] + "'");
  }
  parents_.resize(names_.size());
  children_.resize(names_.size());
  auto lookup = [&](const std::string& n) {
    auto it = index_.find(n);
    if (it == index_.end()) throw ConfigError("graph: edge endpoint '" + n + "' is not a node");
    return it->second;
  };
  for (const auto& [from, to] : edges) {
    const int a = lookup(from), b = lookup(to);
    if (a == b) throw ConfigError("graph: self-loop on '" + from + "'");
    if (has_edge(a, b)) continue;
    edges_.emplace_back(a, b);
    children_[static_cast<std::size_t>(a)].push_back(b);
    parents_[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& v : parents_) std::sort(v.begin(), v.end());
  for (auto& v : children_) std::sort(v.begin(), v.end());
  for (const auto& n : latent) latent_.insert(lookup(n));

  // Kahn's algorithm; leftover nodes sit on a cycle.
  std::vector<std::size_t> indeg(names_.size());
  for (std::size_t v = 0; v < names_.size(); ++v) indeg[v] = parents_[v].size();
  std::deque<int> ready;
  for (std::size_t v = 0; v < names_.size(); ++v)
    if (indeg[v] == 0) ready.push_back(static_cast<int>(v));
  std::size_t seen = 0;
  while (!ready.empty()) {
    const int v = ready.front();
    ready.pop_front();
    ++seen;
    for (int c : children(v))
      if (--indeg[static_cast<std::size_t>(c)] == 0) ready.push_back(c);
  }
  if (seen != names_.size()) throw ConfigError("graph: edges contain a directed cycle");
}

bool CausalGraph::has_edge(int from, int to) const {
  const auto& c = children_[static_cast<std::size_t>(from)];
  return std::find(c.begin(), c.end(), to) != c.end();
}

int CausalGraph::id(const std::string& name) const {
  if (auto it = index_.find(name); it != index_.end()) return it->second;
  const std::string key = without_underscores(name);
  int found = -1;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (without_underscores(names_[i]) != key) continue;
    if (found >= 0) throw ConfigError("ambiguous node name '" + name + "'");
    found = static_cast<int>(i);
  }
  if (found < 0) throw ConfigError("unknown node '" + name + "'");
  return found;
}

std::set<int> CausalGraph::descendants_inclusive(int v) const {
  std::set<int> out{v};
  std::vector<int> stack{v};
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int c : children(u))
      if (out.insert(c).second) stack.push_back(c);
  }
  return out;
}

void IndependenceQuery::validate(const CausalGraph& g) const {
  if (sources.empty() || targets.empty()) throw ConfigError("query: both sides need at least one node");
  auto check = [&](const std::set<int>& s) {
    for (int v : s)
      if (v < 0 || static_cast<std::size_t>(v) >= g.size()) throw ConfigError("query: unknown node id");
  };
  check(sources);
  check(targets);
  check(observed);
  auto disjoint = [](const std::set<int>& a, const std::set<int>& b) {
    return std::none_of(a.begin(), a.end(), [&](int v) { return b.count(v) > 0; });
  };
  if (!disjoint(sources, targets) || !disjoint(sources, observed) || !disjoint(targets, observed))
    throw ConfigError("query: source, target and observed sets must be disjoint");
}

IndependenceQuery parse_query(const CausalGraph& g, const std::string& text) {
  const auto sep = text.find("_||_");
  if (sep == std::string::npos) throw ConfigError("query: expected 'A _||_ B [| C]', got '" + text + "'");
  const std::string lhs = text.substr(0, sep);
  std::string rhs = text.substr(sep + 4), given;
  if (const auto bar = rhs.find('|'); bar != std::string::npos) {
    given = rhs.substr(bar + 1);
    rhs = rhs.substr(0, bar);
  }
  auto names = [&](const std::string& part) {
    std::set<int> out;
    std::stringstream ss(part);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = strip(tok);
      if (!tok.empty()) out.insert(g.id(tok));
    }
    return out;
  };
  IndependenceQuery q{names(lhs), names(rhs), names(given)};
  q.validate(g);
  return q;
}

CausalGraph build_ad_graph(bool confounded) {
  std::vector<std::pair<std::string, std::string>> edges{
      {"E", "X_e"}, {"W", "X_a"}, {"W", "X_e"}, {"X_a", "Z"}, {"X_e", "Z"}};
  if (confounded) {
    edges.emplace_back("U", "W");
    edges.emplace_back("U", "E");
  }
  return CausalGraph({"U", "W", "E", "X_a", "X_e", "Z"}, edges, {"U"});
}

bool d_separated(const CausalGraph& g, const IndependenceQuery& q) {
  q.validate(g);
  // Observed nodes and their ancestors: a collider here can be activated.
  std::set<int> activating;
  std::vector<int> stack(q.observed.begin(), q.observed.end());
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (!activating.insert(v).second) continue;
    for (int p : g.parents(v)) stack.push_back(p);
  }

  // Traversal state: (node, arrived from a child = up / from a parent = down).
  enum Dir { Up = 0, Down = 1 };
  std::vector<std::array<bool, 2>> visited(g.size(), {false, false});
  std::vector<std::pair<int, Dir>> frontier;
  for (int s : q.sources) frontier.emplace_back(s, Up);
  while (!frontier.empty()) {
    const auto [v, dir] = frontier.back();
    frontier.pop_back();
    if (visited[static_cast<std::size_t>(v)][dir]) continue;
    visited[static_cast<std::size_t>(v)][dir] = true;
    const bool obs = q.observed.count(v) > 0;
    if (!obs && q.targets.count(v)) return false;
    if (dir == Up && !obs) {
      for (int p : g.parents(v)) frontier.emplace_back(p, Up);
      for (int c : g.children(v)) frontier.emplace_back(c, Down);
    } else if (dir == Down) {
      if (!obs)
        for (int c : g.children(v)) frontier.emplace_back(c, Down);
      if (activating.count(v))
        for (int p : g.parents(v)) frontier.emplace_back(p, Up);
    }
  }
  return true;
}

std::vector<Path> enumerate_paths(const CausalGraph& g, int a, int b) {
  if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= g.size() || static_cast<std::size_t>(b) >= g.size())
    throw ConfigError("enumerate_paths: unknown node");
  if (a == b) throw ConfigError("enumerate_paths: endpoints must differ");
  std::vector<std::vector<int>> nbrs(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    auto& n = nbrs[v];
    n = g.parents(static_cast<int>(v));
    n.insert(n.end(), g.children(static_cast<int>(v)).begin(), g.children(static_cast<int>(v)).end());
    std::sort(n.begin(), n.end());
  }
  std::vector<Path> out;
  std::vector<int> cur{a};
  std::vector<bool> on_path(g.size(), false);
  on_path[static_cast<std::size_t>(a)] = true;
  auto dfs = [&](auto&& self, int v) -> void {
    if (v == b) {
      Path p{cur, {}};
      for (std::size_t i = 1; i + 1 < cur.size(); ++i)
        if (g.has_edge(cur[i - 1], cur[i]) && g.has_edge(cur[i + 1], cur[i])) p.collisions.push_back(cur[i]);
      out.push_back(std::move(p));
      return;
    }
    for (int w : nbrs[static_cast<std::size_t>(v)]) {
      if (on_path[static_cast<std::size_t>(w)]) continue;
      on_path[static_cast<std::size_t>(w)] = true;
      cur.push_back(w);
      self(self, w);
      cur.pop_back();
      on_path[static_cast<std::size_t>(w)] = false;
    }
  };
  dfs(dfs, a);
  return out;
}

PathVerdict explain_path(const CausalGraph& g, const Path& p, const std::set<int>& observed) {
  PathVerdict v{p, false, "open: no interior node blocks it"};
  for (std::size_t i = 1; i + 1 < p.nodes.size(); ++i) {
    const int node = p.nodes[i];
    const bool collision = std::find(p.collisions.begin(), p.collisions.end(), node) != p.collisions.end();
    if (collision) {
      const auto desc = g.descendants_inclusive(node);
      const bool activated =
          std::any_of(desc.begin(), desc.end(), [&](int d) { return observed.count(d) > 0; });
      if (!activated) {
        v.blocked = true;
        v.reason = g.name(node) + " is a collision and neither it nor any descendant is observed";
        return v;
      }
    } else if (observed.count(node)) {
      v.blocked = true;
      v.reason = g.name(node) + " is observed and not a collision";
      return v;
    }
  }
  return v;
}

bool d_separated_by_paths(const CausalGraph& g, const IndependenceQuery& q) {
  q.validate(g);
  for (int a : q.sources)
    for (int b : q.targets)
      for (const auto& p : enumerate_paths(g, a, b))
        if (!explain_path(g, p, q.observed).blocked) return false;
  return true;
}

std::string format_path(const CausalGraph& g, const PathVerdict& v) {
  std::string s;
  for (std::size_t i = 0; i < v.path.nodes.size(); ++i) {
    if (i > 0) {
      const int prev = v.path.nodes[i - 1], cur = v.path.nodes[i];
      s += g.has_edge(prev, cur) ? " -> " : " <- ";
    }
    s += g.name(v.path.nodes[i]);
  }
  return s + (v.blocked ? "  [blocked: " : "  [") + v.reason + "]";
}

Theorem1Verdict verify_theorem1(bool confounded) {
  const CausalGraph g = build_ad_graph(confounded);
  const int xa = g.id("X_a"), e = g.id("E"), w = g.id("W");
  const IndependenceQuery marginal{{xa}, {e}, {}};
  const IndependenceQuery conditional{{xa}, {e}, {w}};

  Theorem1Verdict v;
  v.confounded = confounded;
  v.xa_indep_e = d_separated(g, marginal);
  v.xa_indep_e_given_w = d_separated(g, conditional);
  v.oracle_agrees = v.xa_indep_e == d_separated_by_paths(g, marginal) &&
                    v.xa_indep_e_given_w == d_separated_by_paths(g, conditional);
  for (const auto& p : enumerate_paths(g, xa, e)) {
    v.marginal_paths.push_back(explain_path(g, p, marginal.observed));
    v.conditional_paths.push_back(explain_path(g, p, conditional.observed));
  }
  const bool claim = confounded ? (v.xa_indep_e_given_w && !v.xa_indep_e) : v.xa_indep_e;
  v.passed = claim && v.oracle_agrees;
  return v;
}

CausalGraph parse_graph(const std::string& text) {
  std::vector<std::string> nodes;
  std::set<std::string> known, latent;
  std::vector<std::pair<std::string, std::string>> edges;
  auto declare = [&](const std::string& n) {
    if (known.insert(n).second) nodes.push_back(n);
  };
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = strip(line);
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw ConfigError("graph line " + std::to_string(lineno) + ": " + why + ": '" + line + "'");
    };
    if (const auto arrow = line.find("->"); arrow != std::string::npos) {
      const std::string from = strip(line.substr(0, arrow)), to = strip(line.substr(arrow + 2));
      if (from.empty() || to.empty() || to.find("->") != std::string::npos) fail("expected 'parent -> child'");
      declare(from);
      declare(to);
      edges.emplace_back(from, to);
    } else if (const auto colon = line.find(':'); colon != std::string::npos) {
      const std::string key = strip(line.substr(0, colon)), value = strip(line.substr(colon + 1));
      if (value.empty()) fail("missing node name");
      if (key == "latent") {
        declare(value);
        latent.insert(value);
      } else if (key == "node") {
        declare(value);
      } else {
        fail("unknown directive '" + key + "'");
      }
    } else {
      fail("expected an edge or a directive");
    }
  }
  if (nodes.empty()) throw ConfigError("graph: no nodes declared");
  return CausalGraph(nodes, edges, latent);
}

CausalGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open graph file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_graph(buf.str());
}

}  // namespace pcir::causal
