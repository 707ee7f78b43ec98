#include "viref/comprehend.hpp"

#include <algorithm>

namespace viref {

RankedRetrieval comprehend(ModelVariant<float>& model,
                           const TokenSequence& refexp,
                           const std::vector<const PairRecord*>& candidates,
                           FeatureCache& cache,
                           const std::string& ground_truth_pair) {
  if (candidates.empty())
    fail(ErrorKind::degenerate, "comprehend: no candidate pairs");
  refexp.validate(model.cfg.vocab_size);

  RankedRetrieval out;
  for (const PairRecord* rec : candidates) {
    const FeatureSequence* seq =
        model.tag == VariantTag::viref_e ? nullptr : &cache.sequence(*rec);
    const ClipFeatureSet* clip =
        model.tag == VariantTag::viref_e ? &cache.clip(*rec) : nullptr;
    out.ranking.push_back(ScoredCandidate{
        rec->pair_id, sequence_log_prob(model, seq, clip, refexp)});
  }
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [](const ScoredCandidate& a, const ScoredCandidate& b) {
                     return a.score > b.score;
                   });
  if (!ground_truth_pair.empty()) {
    int hits = 0;
    for (std::size_t i = 0; i < out.ranking.size(); ++i) {
      if (out.ranking[i].pair_id == ground_truth_pair) {
        if (hits++ == 0) out.gt_rank = static_cast<int>(i) + 1;
      }
    }
    if (hits != 1)
      fail(ErrorKind::contract,
           "comprehend: ground-truth pair must appear exactly once");
  }
  return out;
}

}  // namespace viref
