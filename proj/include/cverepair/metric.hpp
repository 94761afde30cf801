#pragma once

#include <array>
#include <optional>
#include <string_view>

#include <json.hpp>

#include "cverepair/ast.hpp"
#include "cverepair/dataflow.hpp"
#include "cverepair/lexer.hpp"

namespace cverepair::metric {

enum class Smoothing { None, AddOne };

struct NgramScore {
  double score = 0.0;
  bool empty_input = false;  // both sequences were empty
};

// Four sub-scores and their weighted composite. ast/dataflow are absent
// when the reference has no qualifying subtrees / no edges; the composite
// renormalizes the remaining weights.
struct SimilarityBreakdown {
  double ngram = 0.0;
  double weighted_ngram = 0.0;
  std::optional<double> ast;
  std::optional<double> dataflow;
  double composite = 0.0;
  std::array<double, 4> weights{0.25, 0.25, 0.25, 0.25};
  bool empty_input = false;
};

struct MetricConfig {
  int max_n = 4;
  double keyword_weight = 5.0;
  Smoothing smoothing = Smoothing::AddOne;
  // Order: ngram, weighted_ngram, ast, dataflow. Must be non-negative and
  // sum to 1.
  std::array<double, 4> weights{0.25, 0.25, 0.25, 0.25};
};

// BLEU over token lexemes: geometric mean of clipped modified n-gram
// precisions (n-gram levels longer than the candidate are skipped) times
// the brevity penalty. Add-one smoothing replaces a zero match count at
// level n with (0+1)/(total_n+1).
NgramScore ngram_match(const TokenSequence& candidate, const TokenSequence& reference,
                       int max_n = 4, Smoothing smoothing = Smoothing::AddOne);

// Same as ngram_match but each n-gram containing at least one C keyword
// carries keyword_weight times the mass of other n-grams, on both the
// match and total sides.
NgramScore weighted_ngram_match(const TokenSequence& candidate, const TokenSequence& reference,
                                double keyword_weight = 5.0, int max_n = 4,
                                Smoothing smoothing = Smoothing::AddOne);

// Fraction of the reference's subtrees of height >= 2 whose kind-only
// shape occurs somewhere in the candidate. Leaf lexemes never participate,
// so identifiers and literals act as wildcards. Absent when the reference
// has no qualifying subtree.
std::optional<double> syntax_match(const SyntaxTree& candidate, const SyntaxTree& reference);

// |candidate_edges ∩ reference_edges| / |reference_edges|; absent when the
// reference graph has no edges.
std::optional<double> dataflow_match(const DataflowGraph& candidate,
                                     const DataflowGraph& reference);

// Full CodeBLEU on two C snippets. Throws EmptyComparison when both inputs
// lex to nothing, ConfigError on invalid weights.
SimilarityBreakdown codebleu(std::string_view candidate, std::string_view reference,
                             const MetricConfig& config = {});

nlohmann::json breakdown_to_json(const SimilarityBreakdown& b);
SimilarityBreakdown breakdown_from_json(const nlohmann::json& j);

}  // namespace cverepair::metric
