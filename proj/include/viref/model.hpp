#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "viref/dataset.hpp"
#include "viref/nn.hpp"
#include "viref/tape.hpp"
#include "viref/vocab.hpp"

namespace viref {

enum class VariantTag { viref, viref_a, viref_e };

inline const char* variant_name(VariantTag tag) {
  switch (tag) {
    case VariantTag::viref: return "viref";
    case VariantTag::viref_a: return "viref_a";
    case VariantTag::viref_e: return "viref_e";
  }
  return "viref";
}

inline VariantTag parse_variant(const std::string& s) {
  if (s == "viref") return VariantTag::viref;
  if (s == "viref_a") return VariantTag::viref_a;
  if (s == "viref_e") return VariantTag::viref_e;
  fail(ErrorKind::config, "unknown variant: " + s);
}

struct VirefConfig {
  int encoder_layers = 6;
  int decoder_layers = 6;
  int hidden_dim = 512;
  int stream_dim = 4096;
  int stream_count = kFrameStreams;
  int vocab_size = 0;
  int embed_dim = 50;
  double dropout_p = 0.2;
  // intermediate widths of the three-layer networks; 0 means hidden_dim
  int fan_hidden1 = 0, fan_hidden2 = 0;
  int wen_hidden1 = 0, wen_hidden2 = 0;
  int fpn_hidden1 = 0, fpn_hidden2 = 0;

  int encoder_input_dim() const { return stream_count * stream_dim; }
  int clip_input_dim() const { return kClipStreams * stream_dim; }
  int fh1() const { return fan_hidden1 > 0 ? fan_hidden1 : hidden_dim; }
  int fh2() const { return fan_hidden2 > 0 ? fan_hidden2 : hidden_dim; }
  int wh1() const { return wen_hidden1 > 0 ? wen_hidden1 : hidden_dim; }
  int wh2() const { return wen_hidden2 > 0 ? wen_hidden2 : hidden_dim; }
  int ph1() const { return fpn_hidden1 > 0 ? fpn_hidden1 : hidden_dim; }
  int ph2() const { return fpn_hidden2 > 0 ? fpn_hidden2 : hidden_dim; }

  void validate() const {
    if (stream_count != kFrameStreams)
      fail(ErrorKind::config, "stream count is fixed at 5");
    if (encoder_layers < 1 || decoder_layers < 1 || hidden_dim < 1 ||
        stream_dim < 1 || embed_dim < 1)
      fail(ErrorKind::config, "model dimensions must be positive");
    if (vocab_size < kReservedCount)
      fail(ErrorKind::config, "vocabulary too small");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
      fail(ErrorKind::config, "dropout must be in [0, 1)");
  }
};

// One model variant: configuration plus its named parameters. Forward
// passes are pure given the store, so a const variant can be shared across
// concurrent evaluations; training mutates the store and needs exclusive
// access.
template <typename S>
struct ModelVariant {
  VariantTag tag = VariantTag::viref;
  VirefConfig cfg;
  ParameterStore<S> params;

  // test hooks: freeze the FAN output and/or the initial attention to a
  // fixed vector (bypassing the softmax), used by the reduction checks
  std::optional<VecX<S>> fan_override;
  std::optional<VecX<S>> initial_attention_override;

  // counts encode passes (the per-step re-run contract is asserted on this)
  mutable long encoder_invocations = 0;

  LstmStack encoder_stack() const {
    return LstmStack{cfg.encoder_layers, cfg.encoder_input_dim(),
                     cfg.hidden_dim, "enc", cfg.dropout_p, true};
  }
  LstmStack decoder_stack() const {
    return LstmStack{cfg.decoder_layers, cfg.embed_dim, cfg.hidden_dim,
                     "dec", cfg.dropout_p, false};
  }
  AffineStack fan_stack() const {
    return AffineStack{"fan", cfg.hidden_dim,
                       {cfg.fh1(), cfg.fh2(), kFrameStreams}, cfg.dropout_p};
  }
  AffineStack wen_stack() const {
    const int in = tag == VariantTag::viref ? 2 * cfg.hidden_dim
                                            : cfg.hidden_dim;
    return AffineStack{"wen", in, {cfg.wh1(), cfg.wh2(), cfg.vocab_size},
                       cfg.dropout_p};
  }
  AffineStack fpn_stack() const {
    return AffineStack{"fpn", cfg.clip_input_dim(),
                       {cfg.ph1(), cfg.ph2(), cfg.hidden_dim}, cfg.dropout_p};
  }

  long parameter_count() const { return params.element_count(); }
};

template <typename S>
ModelVariant<S> build_model(VariantTag tag, VirefConfig cfg,
                            const EmbeddingTable& emb, uint64_t seed) {
  cfg.validate();
  if (emb.vocab_size() != cfg.vocab_size || emb.dim() != cfg.embed_dim)
    fail(ErrorKind::shape, "embedding table does not match model config");
  ModelVariant<S> m;
  m.tag = tag;
  m.cfg = cfg;
  m.params.add("embed.table",
               Tensor<float>::matrix(emb.table).template cast<S>(),
               emb.trainable);
  if (tag != VariantTag::viref_e)
    add_lstm_params(m.params, m.encoder_stack(), seed);
  add_lstm_params(m.params, m.decoder_stack(), seed);
  add_affine_params(m.params, m.wen_stack(), seed);
  if (tag == VariantTag::viref) {
    add_affine_params(m.params, m.fan_stack(), seed);
    // zero logits, so attention starts uniform
    m.params.add("attn0.logits", init_zeros_vec<S>(kFrameStreams));
  }
  if (tag == VariantTag::viref_e)
    add_affine_params(m.params, m.fpn_stack(), seed);
  return m;
}

// Installs checkpoint values into a freshly built model, verifying the name
// set and shapes match the architecture.
template <typename S>
void install_checkpoint(ModelVariant<S>& model,
                        const ParameterStore<float>& ckpt) {
  std::size_t matched = 0;
  for (auto& [name, entry] : model.params) {
    if (!ckpt.contains(name))
      fail(ErrorKind::format, "checkpoint missing parameter " + name);
    const Tensor<float>& t = ckpt.at(name);
    if (t.shape != entry.value.shape)
      fail(ErrorKind::shape, "checkpoint shape mismatch for " + name);
    entry.value = t.template cast<S>();
    ++matched;
  }
  if (matched != ckpt.size())
    fail(ErrorKind::format,
         "checkpoint has parameters unknown to this architecture");
}

// Per-frame stream leaves, created once per tape so all encoder re-runs on
// that tape share them.
template <typename S>
struct PairInput {
  std::vector<std::array<Var<S>, kFrameStreams>> frames;
  Var<S> clip;  // valid only for the no-encoder variant

  bool has_frames() const { return !frames.empty(); }
};

template <typename S>
PairInput<S> make_pair_input(Tape<S>& tape, const ModelVariant<S>& model,
                             const FeatureSequence* seq,
                             const ClipFeatureSet* clip) {
  PairInput<S> in;
  if (model.tag == VariantTag::viref_e) {
    if (clip == nullptr)
      fail(ErrorKind::contract, "viref_e needs clip features");
    if (clip->dim != model.cfg.stream_dim)
      fail(ErrorKind::shape, "clip feature dim does not match model");
    VecX<S> full(model.cfg.clip_input_dim());
    for (int s = 0; s < kClipStreams; ++s)
      full.segment(static_cast<long>(s) * clip->dim, clip->dim) =
          clip->stream(0, s).template cast<S>();
    in.clip = tape.constant_vec(std::move(full));
    return in;
  }
  if (seq == nullptr)
    fail(ErrorKind::contract, "recurrent variants need frame features");
  if (seq->frames < 1)
    fail(ErrorKind::contract, "empty feature sequence");
  if (seq->dim != model.cfg.stream_dim)
    fail(ErrorKind::shape, "feature dim does not match model");
  in.frames.resize(seq->frames);
  for (int f = 0; f < seq->frames; ++f)
    for (int s = 0; s < kFrameStreams; ++s)
      in.frames[f][s] =
          tape.constant_vec(seq->stream(f, s).template cast<S>());
  return in;
}

// Stream k of the frame scaled by a_k, concatenated in stream order.
template <typename S>
Var<S> scale_features(const std::array<Var<S>, kFrameStreams>& frame,
                      Var<S> a) {
  if (a.value().rows() != kFrameStreams || a.value().cols() != 1)
    fail(ErrorKind::shape, "attention weight vector must have 5 entries");
  std::vector<Var<S>> streams(frame.begin(), frame.end());
  return scale_concat(streams, a);
}

// Softmax of the trainable initial logits (uniform at initialization).
template <typename S>
Var<S> initial_attention_var(Tape<S>& tape, ModelVariant<S>& model) {
  if (model.tag != VariantTag::viref)
    fail(ErrorKind::unsupported,
         "initial attention exists only on the attention variant");
  if (model.initial_attention_override)
    return tape.constant_vec(*model.initial_attention_override);
  return softmax(tape.param(model.params, "attn0.logits"));
}

template <typename S>
VecX<S> initial_attention(ModelVariant<S>& model) {
  Tape<S> tape(Mode::eval, 0, false);
  return initial_attention_var(tape, model).value().col(0);
}

// Runs the encoder over all frames scaled by `a`, starting from the
// trainable initial state; returns the state after the last frame.
template <typename S>
LstmStateVars<S> encode_sequence(Tape<S>& tape, ModelVariant<S>& model,
                                 const PairInput<S>& input, Var<S> a) {
  if (model.tag == VariantTag::viref_e)
    fail(ErrorKind::unsupported, "viref_e has no recurrent encoder");
  if (!input.has_frames())
    fail(ErrorKind::contract, "empty feature sequence");
  model.encoder_invocations += 1;
  const LstmStack enc = model.encoder_stack();
  LstmStateVars<S> state = lstm_initial_state(tape, model.params, enc);
  for (const auto& frame : input.frames)
    state = lstm_step(tape, model.params, enc, scale_features(frame, a),
                      state);
  return state;
}

// Decoder start state per variant: the encoder's final state (all layers,
// hidden and cell) for the recurrent variants; the FPN output as every
// layer's hidden state with zero cells for the clip variant.
template <typename S>
LstmStateVars<S> decoder_init(Tape<S>& tape, ModelVariant<S>& model,
                              const PairInput<S>& input) {
  if (model.tag == VariantTag::viref_e) {
    if (!input.clip.valid())
      fail(ErrorKind::contract, "viref_e decoder_init needs clip features");
    Var<S> h = affine_stack_forward(tape, model.params, model.fpn_stack(),
                                    input.clip);
    LstmStateVars<S> st;
    Var<S> zero = tape.constant(MatX<S>::Zero(model.cfg.hidden_dim, 1));
    for (int l = 0; l < model.cfg.decoder_layers; ++l) {
      st.h.push_back(h);
      st.c.push_back(zero);
    }
    return st;
  }
  if (model.cfg.encoder_layers != model.cfg.decoder_layers)
    fail(ErrorKind::config,
         "state transfer requires equal encoder and decoder depth");
  Var<S> a = model.tag == VariantTag::viref
                 ? initial_attention_var(tape, model)
                 : tape.constant(MatX<S>::Ones(kFrameStreams, 1));
  return encode_sequence(tape, model, input, a);
}

template <typename S>
struct DecodeStep {
  Var<S> distribution;      // over the vocabulary, sums to 1
  LstmStateVars<S> state;   // decoder state after this step
  Var<S> attention;         // a_j; invalid for the baseline variants
};

// Advances the decoder by one word. For the attention variant this runs
// FAN on the new top hidden state, re-runs the full encoder with those
// weights, and feeds both halves to WEN; the baselines feed the hidden
// state alone.
template <typename S>
DecodeStep<S> decode_step(Tape<S>& tape, ModelVariant<S>& model, int word_id,
                          const LstmStateVars<S>& state,
                          const PairInput<S>& input) {
  if (word_id < 0 || word_id >= model.cfg.vocab_size)
    fail(ErrorKind::contract,
         "decode_step: invalid token id " + std::to_string(word_id));
  Var<S> emb = col(tape.param(model.params, "embed.table"), word_id);
  LstmStateVars<S> next = lstm_step(tape, model.params, model.decoder_stack(),
                                    emb, state);
  Var<S> hidden = next.h.back();
  DecodeStep<S> out;
  out.state = std::move(next);
  if (model.tag == VariantTag::viref) {
    Var<S> a;
    if (model.fan_override) {
      a = tape.constant_vec(*model.fan_override);
    } else {
      a = softmax(affine_stack_forward(tape, model.params, model.fan_stack(),
                                       hidden));
    }
    out.attention = a;
    LstmStateVars<S> rerun = encode_sequence(tape, model, input, a);
    Var<S> wen_in = concat<S>({hidden, rerun.h.back()});
    out.distribution = softmax(affine_stack_forward(
        tape, model.params, model.wen_stack(), wen_in));
  } else {
    out.distribution = softmax(affine_stack_forward(
        tape, model.params, model.wen_stack(), hidden));
  }
  return out;
}

// Teacher-forced distributions for each fed token (the inputs are
// <start>, w_1, ..., so step j's distribution scores target w_{j+1}).
template <typename S>
std::vector<Var<S>> forward_sequence(Tape<S>& tape, ModelVariant<S>& model,
                                     const PairInput<S>& input,
                                     const std::vector<int>& fed_tokens) {
  std::vector<Var<S>> dists;
  dists.reserve(fed_tokens.size());
  LstmStateVars<S> state = decoder_init(tape, model, input);
  for (int tok : fed_tokens) {
    DecodeStep<S> step = decode_step(tape, model, tok, state, input);
    dists.push_back(step.distribution);
    state = std::move(step.state);
  }
  return dists;
}

// log p(r | pair) with teacher forcing, eval mode: the sum of log
// probabilities of w_1 .. <end>. <start> is fed, never scored; trailing
// padding after <end> is ignored.
template <typename S>
double sequence_log_prob(ModelVariant<S>& model, const PairInput<S>& input,
                         Tape<S>& tape, const TokenSequence& tokens) {
  tokens.validate(model.cfg.vocab_size);
  std::vector<int> fed;
  std::vector<int> targets;
  for (std::size_t i = 0; i + 1 < tokens.ids.size(); ++i) {
    fed.push_back(tokens.ids[i]);
    targets.push_back(tokens.ids[i + 1]);
    if (tokens.ids[i + 1] == kEndId) break;
  }
  LstmStateVars<S> state = decoder_init(tape, model, input);
  double total = 0.0;
  for (std::size_t j = 0; j < fed.size(); ++j) {
    DecodeStep<S> step = decode_step(tape, model, fed[j], state, input);
    total += std::log(
        static_cast<double>(step.distribution.value()(targets[j], 0)));
    state = std::move(step.state);
  }
  return total;
}

template <typename S>
double sequence_log_prob(ModelVariant<S>& model, const FeatureSequence* seq,
                         const ClipFeatureSet* clip,
                         const TokenSequence& tokens) {
  Tape<S> tape(Mode::eval, 0, false);
  PairInput<S> input = make_pair_input(tape, model, seq, clip);
  return sequence_log_prob(model, input, tape, tokens);
}

}  // namespace viref
