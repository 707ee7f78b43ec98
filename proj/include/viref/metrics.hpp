#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "viref/vocab.hpp"

namespace viref {

// Unsmoothed sentence BLEU-4: modified n-gram precisions with clipped
// counts (clip = max count over references), brevity penalty exp(1 - r/c)
// for c <= r with r the closest reference length (ties toward shorter),
// geometric mean of p_1..p_4, hard zero when any p_n is zero.
double bleu4(const std::vector<std::string>& candidate,
             const std::vector<std::vector<std::string>>& references);

struct RetrievalReport {
  double map = 0.0;
  double rank1 = 0.0;
  double rank2 = 0.0;
  double rank3 = 0.0;
  std::vector<int> ranks;  // per query, 1-based
};

// AP of a query with a single relevant item retrieved at rank k is 1/k;
// rank-k accuracy is the fraction retrieved within the top k.
RetrievalReport retrieval_metrics(const std::vector<int>& ranks);

struct GenerationReport {
  double avg_bleu4 = 0.0;
  int distinct_words = 0;  // reserved tokens excluded
  std::optional<double> meteor;  // placeholder column for external scores
  struct Item {
    std::string pair_id;
    std::string text;
    double bleu4 = 0.0;
  };
  std::vector<Item> items;
};

GenerationReport generation_report(
    const std::map<std::string, std::vector<std::string>>& generated,
    const std::map<std::string, std::vector<std::vector<std::string>>>&
        references,
    const Vocabulary& vocab);

}  // namespace viref
