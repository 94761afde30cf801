#include "cverepair/metric.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include "cverepair/errors.hpp"

namespace cverepair::metric {
namespace {

// Joins n consecutive lexemes with '\x1f' as the multiset key.
std::string gram_key(const std::vector<std::string>& toks, std::size_t start, int n) {
  std::string key;
  for (int i = 0; i < n; ++i) {
    if (i) key += '\x1f';
    key += toks[start + i];
  }
  return key;
}

bool gram_has_keyword(const std::vector<std::string>& toks, std::size_t start, int n) {
  for (int i = 0; i < n; ++i) {
    if (is_c_keyword(toks[start + i])) return true;
  }
  return false;
}

NgramScore bleu_core(const TokenSequence& cand, const TokenSequence& ref, int max_n,
                     Smoothing smoothing, double keyword_weight) {
  if (max_n < 1) throw ConfigError("max_n must be >= 1");
  const std::size_t c = cand.size();
  const std::size_t r = ref.size();
  if (c == 0 && r == 0) return {0.0, true};
  if (c == 0) return {0.0, false};

  double log_sum = 0.0;
  int levels = 0;
  for (int n = 1; n <= max_n; ++n) {
    if (c < static_cast<std::size_t>(n)) break;

    std::map<std::string, double> ref_counts;
    if (r >= static_cast<std::size_t>(n)) {
      for (std::size_t i = 0; i + n <= r; ++i) ref_counts[gram_key(ref.tokens, i, n)] += 1.0;
    }
    std::map<std::string, double> cand_counts;
    std::map<std::string, double> gram_weight;
    for (std::size_t i = 0; i + n <= c; ++i) {
      std::string key = gram_key(cand.tokens, i, n);
      if (!gram_weight.count(key)) {
        gram_weight[key] =
            gram_has_keyword(cand.tokens, i, n) ? keyword_weight : 1.0;
      }
      cand_counts[key] += 1.0;
    }

    double matched = 0.0;
    double total = 0.0;
    for (const auto& [key, count] : cand_counts) {
      const double w = gram_weight[key];
      total += w * count;
      auto it = ref_counts.find(key);
      if (it != ref_counts.end()) matched += w * std::min(count, it->second);
    }

    double p;
    if (matched > 0.0) {
      p = matched / total;
    } else if (smoothing == Smoothing::AddOne) {
      p = 1.0 / (total + 1.0);
    } else {
      return {0.0, false};
    }
    log_sum += std::log(p);
    ++levels;
  }
  if (levels == 0) return {0.0, false};

  const double brevity =
      c >= r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  const double score = brevity * std::exp(log_sum / levels);
  return {std::clamp(score, 0.0, 1.0), false};
}

void collect_shapes(const AstNode& node, std::string& shape_out,
                    std::vector<std::string>* sink) {
  if (node.children.empty()) {
    shape_out = node.kind;
    return;
  }
  std::string shape = "(" + node.kind;
  for (const auto& c : node.children) {
    std::string child_shape;
    collect_shapes(c, child_shape, sink);
    shape += ' ';
    shape += child_shape;
  }
  shape += ')';
  if (sink) sink->push_back(shape);
  shape_out = std::move(shape);
}

std::vector<std::string> qualifying_shapes(const AstNode& root) {
  std::vector<std::string> shapes;
  std::string ignored;
  collect_shapes(root, ignored, &shapes);
  return shapes;
}

}  // namespace

NgramScore ngram_match(const TokenSequence& candidate, const TokenSequence& reference,
                       int max_n, Smoothing smoothing) {
  return bleu_core(candidate, reference, max_n, smoothing, 1.0);
}

NgramScore weighted_ngram_match(const TokenSequence& candidate, const TokenSequence& reference,
                                double keyword_weight, int max_n, Smoothing smoothing) {
  if (keyword_weight < 1.0) throw ConfigError("keyword_weight must be >= 1");
  return bleu_core(candidate, reference, max_n, smoothing, keyword_weight);
}

std::optional<double> syntax_match(const SyntaxTree& candidate, const SyntaxTree& reference) {
  const std::vector<std::string> ref_shapes = qualifying_shapes(reference.root);
  if (ref_shapes.empty()) return std::nullopt;

  const std::vector<std::string> cand_list = qualifying_shapes(candidate.root);
  const std::unordered_set<std::string> cand_shapes(cand_list.begin(), cand_list.end());

  std::size_t matched = 0;
  for (const auto& s : ref_shapes) {
    if (cand_shapes.count(s)) ++matched;
  }
  return static_cast<double>(matched) / static_cast<double>(ref_shapes.size());
}

std::optional<double> dataflow_match(const DataflowGraph& candidate,
                                     const DataflowGraph& reference) {
  if (reference.edges.empty()) return std::nullopt;
  std::size_t matched = 0;
  for (const auto& e : reference.edges) {
    if (candidate.edges.count(e)) ++matched;
  }
  return static_cast<double>(matched) / static_cast<double>(reference.edges.size());
}

SimilarityBreakdown codebleu(std::string_view candidate, std::string_view reference,
                             const MetricConfig& config) {
  double weight_sum = 0.0;
  for (double w : config.weights) {
    if (w < 0.0) throw ConfigError("metric weights must be non-negative");
    weight_sum += w;
  }
  if (std::abs(weight_sum - 1.0) > 1e-9) throw ConfigError("metric weights must sum to 1");

  const TokenSequence cand_tokens = tokenize_code(candidate);
  const TokenSequence ref_tokens = tokenize_code(reference);
  if (cand_tokens.empty() && ref_tokens.empty()) {
    throw EmptyComparison("both comparison inputs are empty");
  }

  const SyntaxTree cand_tree = parse_c(candidate);
  const SyntaxTree ref_tree = parse_c(reference);
  const DataflowGraph cand_flow = extract_dataflow(cand_tree);
  const DataflowGraph ref_flow = extract_dataflow(ref_tree);

  SimilarityBreakdown out;
  out.weights = config.weights;
  const NgramScore ng = ngram_match(cand_tokens, ref_tokens, config.max_n, config.smoothing);
  out.ngram = ng.score;
  out.empty_input = ng.empty_input;
  out.weighted_ngram = weighted_ngram_match(cand_tokens, ref_tokens, config.keyword_weight,
                                            config.max_n, config.smoothing)
                           .score;
  out.ast = syntax_match(cand_tree, ref_tree);
  out.dataflow = dataflow_match(cand_flow, ref_flow);

  double score_sum = config.weights[0] * out.ngram + config.weights[1] * out.weighted_ngram;
  double present_weight = config.weights[0] + config.weights[1];
  if (out.ast) {
    score_sum += config.weights[2] * *out.ast;
    present_weight += config.weights[2];
  }
  if (out.dataflow) {
    score_sum += config.weights[3] * *out.dataflow;
    present_weight += config.weights[3];
  }
  out.composite = present_weight > 0.0 ? std::clamp(score_sum / present_weight, 0.0, 1.0) : 0.0;
  return out;
}

nlohmann::json breakdown_to_json(const SimilarityBreakdown& b) {
  nlohmann::json j;
  j["ngram"] = b.ngram;
  j["weighted_ngram"] = b.weighted_ngram;
  j["ast"] = b.ast ? nlohmann::json(*b.ast) : nlohmann::json(nullptr);
  j["dataflow"] = b.dataflow ? nlohmann::json(*b.dataflow) : nlohmann::json(nullptr);
  j["composite"] = b.composite;
  j["weights"] = b.weights;
  j["empty_input"] = b.empty_input;
  return j;
}

SimilarityBreakdown breakdown_from_json(const nlohmann::json& j) {
  SimilarityBreakdown b;
  b.ngram = j.at("ngram").get<double>();
  b.weighted_ngram = j.at("weighted_ngram").get<double>();
  if (!j.at("ast").is_null()) b.ast = j["ast"].get<double>();
  if (!j.at("dataflow").is_null()) b.dataflow = j["dataflow"].get<double>();
  b.composite = j.at("composite").get<double>();
  if (j.contains("weights")) {
    auto w = j["weights"].get<std::vector<double>>();
    for (std::size_t i = 0; i < b.weights.size() && i < w.size(); ++i) b.weights[i] = w[i];
  }
  if (j.contains("empty_input")) b.empty_input = j["empty_input"].get<bool>();
  return b;
}

}  // namespace cverepair::metric
