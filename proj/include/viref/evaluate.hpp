#pragma once

#include <map>
#include <string>
#include <vector>

#include "viref/beam.hpp"
#include "viref/comprehend.hpp"
#include "viref/dataset.hpp"
#include "viref/metrics.hpp"
#include "viref/model.hpp"

namespace viref {

struct EvaluateOptions {
  int beam = 3;
  int max_len = 25;
};

struct EvaluateResult {
  GenerationReport gen;
  RetrievalReport ret;
  std::vector<RankedRetrieval> retrievals;
  std::map<std::string, GenerationResult> outputs;  // pair_id -> generation
  double gen_seconds_per_sample = 0.0;
  double comp_seconds_per_query = 0.0;
};

// Runs both tasks over the test split: beam-search generation scored with
// BLEU-4 against each record's references, and comprehension ranking of
// every pair in the query's video.
EvaluateResult evaluate_model(ModelVariant<float>& model, const Dataset& ds,
                              FeatureCache& cache, const Vocabulary& vocab,
                              const EvaluateOptions& opts = {});

// generation_report.tsv / retrieval_report.tsv / generated.txt /
// comprehension.jsonl, plus timing.tsv (wall-clock means; kept separate so
// the other reports stay byte-reproducible).
void write_reports(const std::string& dir, const std::string& method,
                   long parameter_count, const EvaluateResult& res);

}  // namespace viref
