#pragma once

#include <sstream>
#include <string>
#include <unordered_set>

#include "fishnet/bp_analyzer.hpp"
#include "fishnet/graph.hpp"

namespace fish {

// Graphviz text for a graph. Node labels carry the op kind and output shape;
// parameter/input leaves are folded away. With a report, isolated
// convolutions are filled red and blocked feature nodes drawn dashed.
template <typename S>
std::string to_dot(const Graph<S>& g, const BPReport* rep = nullptr) {
  std::unordered_set<NodeId> iconv;
  if (rep)
    for (NodeId id : rep->blocking_nodes) iconv.insert(id);
  std::ostringstream os;
  os << "digraph fishnet {\n  rankdir=TB;\n  node [shape=box, fontsize=10];\n";
  for (NodeId i = 0; i < static_cast<NodeId>(g.size()); ++i) {
    const auto& n = g.node(i);
    if (n.kind == OpKind::parameter) continue;
    os << "  n" << i << " [label=\"" << op_kind_name(n.kind) << "\\n"
       << shape_str(n.output.shape()) << "\"";
    os << ", tooltip=\"" << n.name << "\"";
    if (iconv.count(i)) os << ", style=filled, fillcolor=red";
    else if (rep && !rep->is_direct(i) && n.kind != OpKind::input)
      os << ", style=dashed";
    os << "];\n";
  }
  for (NodeId i = 0; i < static_cast<NodeId>(g.size()); ++i) {
    const auto& n = g.node(i);
    if (n.kind == OpKind::parameter) continue;
    for (NodeId in : n.inputs) {
      if (g.node(in).kind == OpKind::parameter) continue;
      os << "  n" << in << " -> n" << i << ";\n";
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace fish
