#include "viref/evaluate.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace viref {

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::string> words_of(const TokenSequence& seq,
                                  const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int id : seq.ids) {
    if (id == kStartId || id == kNilId) continue;
    if (id == kEndId) break;
    out.push_back(vocab.token(id));
  }
  return out;
}

}  // namespace

EvaluateResult evaluate_model(ModelVariant<float>& model, const Dataset& ds,
                              FeatureCache& cache, const Vocabulary& vocab,
                              const EvaluateOptions& opts) {
  const std::vector<int> test = ds.split_indices(Split::test);
  if (test.empty())
    fail(ErrorKind::degenerate, "evaluate: the test split is empty");

  EvaluateResult res;

  // generation
  std::map<std::string, std::vector<std::string>> generated;
  std::map<std::string, std::vector<std::vector<std::string>>> references;
  const auto gen_start = Clock::now();
  for (int idx : test) {
    const PairRecord& rec = ds.records[idx];
    const FeatureSequence* seq =
        model.tag == VariantTag::viref_e ? nullptr : &cache.sequence(rec);
    const ClipFeatureSet* clip =
        model.tag == VariantTag::viref_e ? &cache.clip(rec) : nullptr;
    GenerationResult g =
        generate(model, seq, clip, opts.beam, opts.max_len);
    generated[rec.pair_id] = words_of(g.sequence, vocab);
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : rec.refexps) refs.push_back(tokenize(r));
    references[rec.pair_id] = std::move(refs);
    res.outputs[rec.pair_id] = std::move(g);
  }
  res.gen_seconds_per_sample =
      seconds_since(gen_start) / static_cast<double>(test.size());
  res.gen = generation_report(generated, references, vocab);

  // comprehension: rank every pair of the query's video
  std::vector<int> ranks;
  const auto comp_start = Clock::now();
  for (int idx : test) {
    const PairRecord& rec = ds.records[idx];
    std::vector<const PairRecord*> candidates;
    for (int j : ds.by_video.at(rec.video_id))
      candidates.push_back(&ds.records[j]);
    RankedRetrieval rr =
        comprehend(model, encode_refexp(rec.refexps[0], vocab), candidates,
                   cache, rec.pair_id);
    rr.query = rec.refexps[0];
    ranks.push_back(rr.gt_rank);
    res.retrievals.push_back(std::move(rr));
  }
  res.comp_seconds_per_query =
      seconds_since(comp_start) / static_cast<double>(test.size());
  res.ret = retrieval_metrics(ranks);
  return res;
}

void write_reports(const std::string& dir, const std::string& method,
                   long parameter_count, const EvaluateResult& res) {
  fs::create_directories(dir);
  char buf[256];

  {
    std::ofstream os(fs::path(dir) / "generation_report.tsv");
    os << "method\tavg_bleu4\tavg_meteor\tdistinct_words\n";
    std::snprintf(buf, sizeof(buf), "%s\t%.4f\t%s\t%d\n", method.c_str(),
                  res.gen.avg_bleu4,
                  res.gen.meteor ? std::to_string(*res.gen.meteor).c_str()
                                 : "-",
                  res.gen.distinct_words);
    os << buf;
  }
  {
    std::ofstream os(fs::path(dir) / "retrieval_report.tsv");
    os << "method\tmap\trank1\trank2\trank3\n";
    std::snprintf(buf, sizeof(buf), "%s\t%.4f\t%.4f\t%.4f\t%.4f\n",
                  method.c_str(), res.ret.map, res.ret.rank1, res.ret.rank2,
                  res.ret.rank3);
    os << buf;
  }
  {
    std::ofstream os(fs::path(dir) / "timing.tsv");
    os << "method\tparameters\tgeneration_sec\tcomprehension_sec\n";
    std::snprintf(buf, sizeof(buf), "%s\t%ld\t%.6f\t%.6f\n", method.c_str(),
                  parameter_count, res.gen_seconds_per_sample,
                  res.comp_seconds_per_query);
    os << buf;
  }
  {
    std::ofstream os(fs::path(dir) / "generated.txt");
    for (const auto& item : res.gen.items) {
      const auto& g = res.outputs.at(item.pair_id);
      std::snprintf(buf, sizeof(buf), "%.9e", g.log_prob);
      os << item.pair_id << "\t" << buf << "\t" << item.text << "\n";
    }
  }
  {
    std::ofstream os(fs::path(dir) / "comprehension.jsonl");
    for (const auto& rr : res.retrievals) {
      nlohmann::json j;
      j["query"] = rr.query;
      j["gt_rank"] = rr.gt_rank;
      auto arr = nlohmann::json::array();
      for (const auto& c : rr.ranking) {
        std::snprintf(buf, sizeof(buf), "%.9e", c.score);
        arr.push_back({{"pair_id", c.pair_id}, {"score", buf}});
      }
      j["ranking"] = arr;
      os << j.dump() << "\n";
    }
  }
}

}  // namespace viref
