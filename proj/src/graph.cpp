#include "nsvi/graph.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "nsvi/corpus.hpp"
#include "nsvi/error.hpp"

namespace nsvi {

namespace {

std::string describe_components(const std::vector<std::size_t>& component,
                                std::size_t count) {
  std::vector<std::vector<std::size_t>> groups(count);
  for (std::size_t v = 0; v < component.size(); ++v) groups[component[v]].push_back(v);
  std::ostringstream out;
  for (std::size_t c = 0; c < count; ++c) {
    out << (c ? " " : "") << "{";
    for (std::size_t i = 0; i < groups[c].size(); ++i) {
      out << (i ? "," : "") << groups[c][i];
    }
    out << "}";
  }
  return out.str();
}

}  // namespace

Graph::Graph(std::size_t num_nodes, std::vector<Edge> edges) {
  if (num_nodes == 0) throw DataError("graph needs at least one node");
  for (auto& [a, b] : edges) {
    if (a == b) throw DataError("graph self-loop at node " + std::to_string(a));
    if (a >= num_nodes || b >= num_nodes) {
      throw DataError("graph edge (" + std::to_string(a) + ", " +
                      std::to_string(b) + ") references a node outside 0.." +
                      std::to_string(num_nodes - 1));
    }
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  neighbors_.assign(num_nodes, {});
  for (const auto& [a, b] : edges_) {
    neighbors_[a].push_back(b);
    neighbors_[b].push_back(a);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());

  if (num_nodes > 1) {
    std::vector<std::size_t> isolated;
    for (std::size_t v = 0; v < num_nodes; ++v) {
      if (neighbors_[v].empty()) isolated.push_back(v);
    }
    if (!isolated.empty()) {
      std::string list;
      for (auto v : isolated) list += (list.empty() ? "" : ",") + std::to_string(v);
      throw DataError("graph has isolated nodes: " + list);
    }
  }

  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> component(num_nodes, kUnset);
  std::size_t count = 0;
  for (std::size_t start = 0; start < num_nodes; ++start) {
    if (component[start] != kUnset) continue;
    std::vector<std::size_t> stack{start};
    component[start] = count;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (auto u : neighbors_[v]) {
        if (component[u] == kUnset) {
          component[u] = count;
          stack.push_back(u);
        }
      }
    }
    ++count;
  }
  if (count > 1) {
    throw DataError("graph is disconnected; components: " +
                    describe_components(component, count));
  }
}

Graph Graph::single() { return Graph(1, {}); }

Graph Graph::line(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return Graph(n, std::move(edges));
}

Graph Graph::star(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t i = 1; i < n; ++i) edges.emplace_back(0, i);
  return Graph(n, std::move(edges));
}

Graph Graph::complete(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  }
  return Graph(n, std::move(edges));
}

Graph Graph::from_preset(const std::string& name) {
  if (name == "single") return single();
  if (name == "line5") return line(5);
  if (name == "star5") return star(5);
  if (name == "four-fully-connected") return complete(4);
  if (name == "example8") {
    // 8 nodes, 8 edges; node 4 has the largest neighborhood {2,3,5,6}.
    return Graph(8, {{0, 1}, {1, 2}, {2, 3}, {2, 4}, {3, 4}, {4, 5}, {4, 6}, {6, 7}});
  }
  const auto colon = name.find(':');
  if (colon != std::string::npos) {
    const std::string kind = name.substr(0, colon);
    const std::string num = name.substr(colon + 1);
    std::size_t n = 0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), n);
    if (ec == std::errc() && ptr == num.data() + num.size() && n > 0) {
      if (kind == "line") return line(n);
      if (kind == "star") return star(n);
      if (kind == "full") return complete(n);
    }
  }
  throw UsageError("unknown graph preset '" + name + "'");
}

Graph Graph::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<Edge> edges;
  std::size_t max_id = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string a_text, b_text, extra;
    if (!(fields >> a_text)) continue;
    if (!(fields >> b_text) || (fields >> extra)) {
      throw DataError("graph line " + std::to_string(line_no) +
                      ": expected two node ids");
    }
    std::size_t a = 0, b = 0;
    auto pa = std::from_chars(a_text.data(), a_text.data() + a_text.size(), a);
    auto pb = std::from_chars(b_text.data(), b_text.data() + b_text.size(), b);
    if (pa.ec != std::errc() || pa.ptr != a_text.data() + a_text.size() ||
        pb.ec != std::errc() || pb.ptr != b_text.data() + b_text.size()) {
      throw DataError("graph line " + std::to_string(line_no) +
                      ": node ids must be non-negative integers");
    }
    max_id = std::max({max_id, a, b});
    edges.emplace_back(a, b);
  }
  if (edges.empty()) throw DataError("graph file contains no edges");
  return Graph(max_id + 1, std::move(edges));
}

Graph Graph::load(const std::filesystem::path& path) {
  try {
    return parse(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string Graph::serialize() const {
  std::string out;
  for (const auto& [a, b] : edges_) {
    out += std::to_string(a) + " " + std::to_string(b) + "\n";
  }
  return out;
}

}  // namespace nsvi
