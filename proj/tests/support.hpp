#pragma once

// Shared helpers for the unit and acceptance suites.

#include <string>
#include <vector>

#include "viref/dataset.hpp"
#include "viref/model.hpp"
#include "viref/vocab.hpp"

namespace viref::testing {

inline Vocabulary make_vocab(int real_words) {
  std::vector<std::string> toks = {kStartTok, kEndTok, kUnkTok, kNilTok};
  for (int i = 0; i < real_words; ++i)
    toks.push_back("w" + (i < 10 ? std::string("0") : std::string()) +
                   std::to_string(i));
  return Vocabulary::from_tokens(std::move(toks));
}

inline VirefConfig tiny_config(int vocab_size, int layers = 2, int hidden = 6,
                               int dim = 6, int embed = 5) {
  VirefConfig cfg;
  cfg.encoder_layers = layers;
  cfg.decoder_layers = layers;
  cfg.hidden_dim = hidden;
  cfg.stream_dim = dim;
  cfg.vocab_size = vocab_size;
  cfg.embed_dim = embed;
  cfg.dropout_p = 0.2;  // irrelevant in eval mode
  return cfg;
}

inline FeatureSequence random_sequence(int frames, int dim, uint64_t seed) {
  FeatureSequence s;
  s.frames = frames;
  s.streams = kFrameStreams;
  s.dim = dim;
  Rng rng(seed);
  s.values.resize(std::size_t(frames) * kFrameStreams * dim);
  for (auto& v : s.values) v = float(rng.normal() * 0.5);
  return s;
}

inline ClipFeatureSet random_clip(int dim, uint64_t seed) {
  ClipFeatureSet c;
  c.frames = 1;
  c.streams = kClipStreams;
  c.dim = dim;
  Rng rng(seed);
  c.values.resize(std::size_t(kClipStreams) * dim);
  for (auto& v : c.values) v = float(rng.normal() * 0.5);
  return c;
}

inline TokenSequence make_tokens(const std::vector<int>& words) {
  TokenSequence t;
  t.ids.push_back(kStartId);
  for (int w : words) t.ids.push_back(w);
  t.ids.push_back(kEndId);
  return t;
}

template <typename S>
ModelVariant<S> tiny_model(VariantTag tag, const Vocabulary& vocab,
                           uint64_t seed, int layers = 2, int hidden = 6,
                           int dim = 6, int embed = 5) {
  VirefConfig cfg = tiny_config(vocab.size(), layers, hidden, dim, embed);
  EmbeddingTable emb = random_embeddings(vocab, embed, seed + 1);
  return build_model<S>(tag, cfg, emb, seed);
}

// Finite differences need a generic point: the training init leaves every
// activation near 1e-3, which parks rectifier preactivations within one FD
// step of their kinks and every gradient below the measurement floor.
// Re-drawing all parameters at O(scale) keeps the network well inside its
// smooth region without touching what the check verifies.
template <typename S>
void randomize_params(ParameterStore<S>& store, uint64_t seed,
                      double scale = 0.5) {
  for (auto& [name, entry] : store) {
    Rng rng(derive_seed(seed, "generic:" + name));
    auto& d = entry.value.data;
    for (long i = 0; i < d.size(); ++i)
      d(i) = static_cast<S>(rng.uniform(-scale, scale));
  }
}

}  // namespace viref::testing
