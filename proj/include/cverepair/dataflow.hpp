#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "cverepair/ast.hpp"

namespace cverepair::metric {

// One def-use edge. Variables are normalized to their first-appearance
// index (`var`), so the edge set is invariant under consistent renaming.
// def_occurrence / use_occurrence are 0-based ordinals of the defining and
// using appearances among all tracked appearances of that variable, in
// traversal order.
struct DataflowEdge {
  int var = 0;
  int def_occurrence = 0;
  int use_occurrence = 0;

  auto operator<=>(const DataflowEdge&) const = default;
};

struct DataflowGraph {
  std::set<DataflowEdge> edges;
  int variable_count = 0;
};

// Reaching-definition extraction over the snippet's syntax tree.
//
// Tracked variables are plain `identifier` leaves in value positions.
// Function names in call position, field names, labels, and type names are
// never variables. Definitions are: function parameters, declarators with
// an initializer, assignment left-hand sides that are bare identifiers
// (compound assignments and ++/-- count as a use followed by a def at the
// same appearance), each killing prior definitions of the name. Uses are
// identifier reads; one edge is recorded per (reaching definition, use).
//
// Control flow is structural: branches of if/switch/?: merge by union,
// loops iterate body+condition to a fixpoint so loop-carried definitions
// reach earlier uses, goto/break/continue are ignored, and error nodes
// contribute nothing.
DataflowGraph extract_dataflow(const SyntaxTree& tree);

}  // namespace cverepair::metric
