#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "viref/model.hpp"

namespace viref {

struct GenerationResult {
  TokenSequence sequence;  // <start> w.. [<end> when finished]
  double log_prob = 0.0;
  bool finished = false;
};

// Breadth-limited best-first decoding. Every unfinished hypothesis expands
// over all N tokens each step; finished hypotheses stay in the pool and
// compete unexpanded. No length normalization; ties break toward the
// lexicographically smaller token sequence (hence lower token id at the
// first difference). Stops when all survivors are finished or after
// max_len steps, then returns the best finished hypothesis, falling back
// to the best survivor when nothing finished.
template <typename S>
GenerationResult generate(ModelVariant<S>& model, const FeatureSequence* seq,
                          const ClipFeatureSet* clip, int beam_size = 3,
                          int max_len = 25) {
  if (beam_size < 1)
    fail(ErrorKind::config, "generate: beam size must be at least 1");
  if (max_len < 1)
    fail(ErrorKind::config, "generate: max_len must be at least 1");

  Tape<S> tape(Mode::eval, 0, false);
  PairInput<S> input = make_pair_input(tape, model, seq, clip);

  struct Hyp {
    std::vector<int> tokens;  // generated ids, <start> excluded
    double log_prob = 0.0;
    LstmStateVars<S> state;   // state after consuming tokens
    bool finished = false;
  };

  Hyp root;
  root.state = decoder_init(tape, model, input);
  std::vector<Hyp> beam = {std::move(root)};

  auto better = [](const Hyp& a, const Hyp& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.tokens < b.tokens;
  };

  for (int step = 0; step < max_len; ++step) {
    bool any_open = false;
    for (const auto& h : beam) any_open |= !h.finished;
    if (!any_open) break;

    std::vector<Hyp> pool;
    pool.reserve(beam.size() * static_cast<std::size_t>(model.cfg.vocab_size));
    for (auto& h : beam) {
      if (h.finished) {
        pool.push_back(std::move(h));
        continue;
      }
      const int last = h.tokens.empty() ? kStartId : h.tokens.back();
      DecodeStep<S> res = decode_step(tape, model, last, h.state, input);
      const auto& dist = res.distribution.value();
      for (int t = 0; t < model.cfg.vocab_size; ++t) {
        Hyp next;
        next.tokens = h.tokens;
        next.tokens.push_back(t);
        next.log_prob =
            h.log_prob + std::log(static_cast<double>(dist(t, 0)));
        next.state = res.state;
        next.finished = t == kEndId;
        pool.push_back(std::move(next));
      }
    }
    std::sort(pool.begin(), pool.end(), better);
    if (static_cast<int>(pool.size()) > beam_size) pool.resize(beam_size);
    beam = std::move(pool);
  }

  const Hyp* best = nullptr;
  for (const auto& h : beam)
    if (h.finished && (best == nullptr || better(h, *best))) best = &h;
  if (best == nullptr)
    for (const auto& h : beam)
      if (best == nullptr || better(h, *best)) best = &h;

  GenerationResult out;
  out.sequence.ids.push_back(kStartId);
  for (int t : best->tokens) out.sequence.ids.push_back(t);
  out.log_prob = best->log_prob;
  out.finished = best->finished;
  return out;
}

}  // namespace viref
