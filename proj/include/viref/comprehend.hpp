#pragma once

#include <string>
#include <vector>

#include "viref/dataset.hpp"
#include "viref/model.hpp"

namespace viref {

struct ScoredCandidate {
  std::string pair_id;
  double score = 0.0;  // log p(refexp | pair)
};

// Ordered candidate pairs for one comprehension query.
struct RankedRetrieval {
  std::string query;
  std::vector<ScoredCandidate> ranking;  // scores non-increasing
  int gt_rank = 0;                       // 1-based; 0 when unknown
};

// Scores every candidate by the generator's sequence log probability and
// sorts descending; exact ties keep the input order.
RankedRetrieval comprehend(ModelVariant<float>& model,
                           const TokenSequence& refexp,
                           const std::vector<const PairRecord*>& candidates,
                           FeatureCache& cache,
                           const std::string& ground_truth_pair = "");

}  // namespace viref
