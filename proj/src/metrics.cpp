#include "viref/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

namespace viref {

namespace {

// n-gram -> count, n-grams packed as joined strings
std::unordered_map<std::string, int> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::unordered_map<std::string, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (int k = 0; k < n; ++k) {
      key += tokens[i + k];
      key += '\x1f';
    }
    counts[key] += 1;
  }
  return counts;
}

}  // namespace

double bleu4(const std::vector<std::string>& candidate,
             const std::vector<std::vector<std::string>>& references) {
  if (candidate.empty())
    fail(ErrorKind::degenerate, "bleu4: empty candidate");
  if (references.empty())
    fail(ErrorKind::degenerate, "bleu4: no references");

  const int c = static_cast<int>(candidate.size());
  int r = static_cast<int>(references[0].size());
  for (const auto& ref : references) {
    const int len = static_cast<int>(ref.size());
    const int d_new = std::abs(len - c);
    const int d_old = std::abs(r - c);
    if (d_new < d_old || (d_new == d_old && len < r)) r = len;
  }

  double log_precisions = 0.0;
  for (int n = 1; n <= 4; ++n) {
    auto cand = ngram_counts(candidate, n);
    std::unordered_map<std::string, int> clip;
    for (const auto& ref : references)
      for (const auto& [gram, count] : ngram_counts(ref, n)) {
        auto it = clip.find(gram);
        if (it == clip.end())
          clip.emplace(gram, count);
        else
          it->second = std::max(it->second, count);
      }
    long matched = 0;
    long total = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      auto it = clip.find(gram);
      if (it != clip.end()) matched += std::min(count, it->second);
    }
    if (total == 0 || matched == 0) return 0.0;
    log_precisions += std::log(static_cast<double>(matched) /
                               static_cast<double>(total));
  }

  const double bp = c <= r ? std::exp(1.0 - static_cast<double>(r) /
                                                static_cast<double>(c))
                           : 1.0;
  return bp * std::exp(log_precisions / 4.0);
}

RetrievalReport retrieval_metrics(const std::vector<int>& ranks) {
  if (ranks.empty())
    fail(ErrorKind::degenerate, "retrieval_metrics: no ranks");
  RetrievalReport rep;
  rep.ranks = ranks;
  for (int k : ranks) {
    if (k < 1)
      fail(ErrorKind::contract, "retrieval_metrics: ranks are 1-based");
    rep.map += 1.0 / static_cast<double>(k);
    rep.rank1 += k <= 1;
    rep.rank2 += k <= 2;
    rep.rank3 += k <= 3;
  }
  const double n = static_cast<double>(ranks.size());
  rep.map /= n;
  rep.rank1 /= n;
  rep.rank2 /= n;
  rep.rank3 /= n;
  return rep;
}

GenerationReport generation_report(
    const std::map<std::string, std::vector<std::string>>& generated,
    const std::map<std::string, std::vector<std::vector<std::string>>>&
        references,
    const Vocabulary& vocab) {
  std::string missing;
  for (const auto& [id, g] : generated)
    if (!references.count(id)) missing += " " + id;
  for (const auto& [id, r] : references)
    if (!generated.count(id)) missing += " " + id;
  if (!missing.empty())
    fail(ErrorKind::contract,
         "generation_report: generated/reference ids differ:" + missing);
  if (generated.empty())
    fail(ErrorKind::degenerate, "generation_report: nothing to score");

  GenerationReport rep;
  std::set<std::string> words;
  const std::set<std::string> reserved = {kStartTok, kEndTok, kUnkTok,
                                          kNilTok};
  for (const auto& [id, tokens] : generated) {
    GenerationReport::Item item;
    item.pair_id = id;
    for (const auto& t : tokens) {
      if (!item.text.empty()) item.text += ' ';
      item.text += t;
      if (!reserved.count(t)) words.insert(t);
    }
    item.bleu4 = bleu4(tokens, references.at(id));
    rep.avg_bleu4 += item.bleu4;
    rep.items.push_back(std::move(item));
  }
  rep.avg_bleu4 /= static_cast<double>(rep.items.size());
  rep.distinct_words = static_cast<int>(words.size());
  if (rep.distinct_words > vocab.size())
    fail(ErrorKind::contract,
         "generation_report: more distinct words than the vocabulary");
  return rep;
}

}  // namespace viref
