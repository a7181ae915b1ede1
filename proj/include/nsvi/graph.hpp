#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace nsvi {

// Undirected, connected, simple graph over nodes 0..K-1.
class Graph {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  // Throws DataError on self-loops, out-of-range ids, isolated nodes or
  // disconnected topologies. Duplicate edges are merged.
  Graph(std::size_t num_nodes, std::vector<Edge> edges);

  static Graph single();
  static Graph line(std::size_t n);
  static Graph star(std::size_t n);  // hub is node 0
  static Graph complete(std::size_t n);
  // "line:N", "star:N", "full:N", "single", or a named preset.
  static Graph from_preset(const std::string& name);

  // Edge-list text, one "a b" pair per line; '#' starts a comment.
  static Graph parse(const std::string& text);
  static Graph load(const std::filesystem::path& path);
  std::string serialize() const;

  std::size_t num_nodes() const { return neighbors_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  // Ascending neighbor ids of node k.
  const std::vector<std::size_t>& neighbors(std::size_t k) const {
    return neighbors_.at(k);
  }

 private:
  std::vector<Edge> edges_;  // a < b, sorted
  std::vector<std::vector<std::size_t>> neighbors_;
};

}  // namespace nsvi
