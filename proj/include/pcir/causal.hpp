#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace pcir::causal {

/// Directed acyclic graph over named nodes. Acyclicity is checked on
/// construction; latent markings are informational and never change
/// d-separation results.
class CausalGraph {
 public:
  CausalGraph(std::vector<std::string> nodes, std::vector<std::pair<std::string, std::string>> edges,
              std::set<std::string> latent = {});

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& parents(int v) const { return parents_[static_cast<std::size_t>(v)]; }
  const std::vector<int>& children(int v) const { return children_[static_cast<std::size_t>(v)]; }
  bool is_latent(int v) const { return latent_.count(v) > 0; }
  bool has_edge(int from, int to) const;
  std::size_t degree(int v) const { return parents(v).size() + children(v).size(); }

  /// Node id by name. An exact match wins; otherwise underscores are ignored,
  /// so "Xa" resolves to "X_a". Throws on unknown or ambiguous names.
  int id(const std::string& name) const;
  const std::string& name(int v) const { return names_[static_cast<std::size_t>(v)]; }

  /// Node itself plus everything reachable along directed edges.
  std::set<int> descendants_inclusive(int v) const;

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> index_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> parents_;
  std::vector<std::vector<int>> children_;
  std::set<int> latent_;
};

/// Is A independent of B given the observed set O? Sets must be pairwise
/// disjoint and non-empty for A and B.
struct IndependenceQuery {
  std::set<int> sources;
  std::set<int> targets;
  std::set<int> observed;

  void validate(const CausalGraph& g) const;
};

/// Parses "A, B _||_ C | D, E" against the graph's node names.
IndependenceQuery parse_query(const CausalGraph& g, const std::string& text);

/// Builds the anomaly-detection graph over U, W, E, X_a, X_e, Z. The
/// unconfounded variant leaves U isolated; the confounded one adds U -> W and
/// U -> E. U is always latent.
CausalGraph build_ad_graph(bool confounded);

/// Reachability (Bayes-ball) d-separation test.
bool d_separated(const CausalGraph& g, const IndependenceQuery& q);

struct Path {
  std::vector<int> nodes;
  /// Interior nodes that are children of both path neighbours.
  std::vector<int> collisions;
};

/// All simple paths between a and b in the skeleton, in DFS order over
/// sorted neighbour ids.
std::vector<Path> enumerate_paths(const CausalGraph& g, int a, int b);

/// Why a path is (or is not) blocked under an observed set.
struct PathVerdict {
  Path path;
  bool blocked = false;
  std::string reason;
};

PathVerdict explain_path(const CausalGraph& g, const Path& p, const std::set<int>& observed);

/// Brute-force d-separation: every path between every (a, b) pair must be
/// blocked. Independent of `d_separated`.
bool d_separated_by_paths(const CausalGraph& g, const IndependenceQuery& q);

std::string format_path(const CausalGraph& g, const PathVerdict& v);

struct Theorem1Verdict {
  bool confounded = false;
  bool xa_indep_e = false;          // X_a _||_ E
  bool xa_indep_e_given_w = false;  // X_a _||_ E | W
  bool oracle_agrees = false;       // both verdicts reproduced by path enumeration
  bool passed = false;
  std::vector<PathVerdict> marginal_paths;
  std::vector<PathVerdict> conditional_paths;
};

/// Checks, at the level of X_a, that unconfounded graphs give X_a _||_ E and
/// confounded graphs give X_a _||_ E | W while X_a and E are marginally
/// dependent.
Theorem1Verdict verify_theorem1(bool confounded);

/// Graph description text: one `parent -> child` per line, `latent: X` and
/// `node: X` directives, `#` comments. Errors name the offending line.
CausalGraph parse_graph(const std::string& text);
CausalGraph load_graph(const std::string& path);

}  // namespace pcir::causal
