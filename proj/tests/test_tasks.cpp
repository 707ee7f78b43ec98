#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "support.hpp"
#include "viref/beam.hpp"
#include "viref/comprehend.hpp"
#include "viref/synth.hpp"
#include "viref/train.hpp"

using namespace viref;
using namespace viref::testing;
namespace fs = std::filesystem;

namespace {

// Exhaustive search over every sequence of at most max_len tokens (a
// sequence ends at <end> or at the horizon), scoring each completion
// independently. Ties break toward the lexicographically smaller token
// list, matching the beam.
struct ExhaustiveBest {
  double log_prob = -std::numeric_limits<double>::infinity();
  std::vector<int> tokens;
  bool finished = false;
};

template <typename S>
void exhaustive_dfs(Tape<S>& tape, ModelVariant<S>& model,
                    const PairInput<S>& input, const LstmStateVars<S>& state,
                    int last_token, std::vector<int>& prefix, double lp,
                    int max_len, ExhaustiveBest& best) {
  auto consider = [&](double cand_lp, bool finished) {
    if (finished != best.finished) {
      if (finished && !best.finished) {
        // finished hypotheses always beat unfinished fallbacks
      } else if (!finished && best.finished) {
        return;
      }
      best.log_prob = cand_lp;
      best.tokens = prefix;
      best.finished = finished;
      return;
    }
    if (cand_lp > best.log_prob ||
        (cand_lp == best.log_prob && prefix < best.tokens)) {
      best.log_prob = cand_lp;
      best.tokens = prefix;
      best.finished = finished;
    }
  };
  if (static_cast<int>(prefix.size()) == max_len) {
    consider(lp, !prefix.empty() && prefix.back() == kEndId);
    return;
  }
  DecodeStep<S> step = decode_step(tape, model, last_token, state, input);
  for (int t = 0; t < model.cfg.vocab_size; ++t) {
    const double next_lp =
        lp + std::log(static_cast<double>(step.distribution.value()(t, 0)));
    prefix.push_back(t);
    if (t == kEndId)
      consider(next_lp, true);
    else
      exhaustive_dfs(tape, model, input, step.state, t, prefix, next_lp,
                     max_len, best);
    prefix.pop_back();
  }
}

template <typename S>
ExhaustiveBest exhaustive_argmax(ModelVariant<S>& model,
                                 const FeatureSequence& seq, int max_len) {
  Tape<S> tape(Mode::eval, 0, false);
  PairInput<S> input = make_pair_input(tape, model, &seq, nullptr);
  LstmStateVars<S> st = decoder_init(tape, model, input);
  std::vector<int> prefix;
  ExhaustiveBest best;
  exhaustive_dfs(tape, model, input, st, kStartId, prefix, 0.0, max_len,
                 best);
  return best;
}

struct TempCorpus {
  fs::path dir;
  Dataset ds;
  Vocabulary vocab;
  SynthDataset raw;

  explicit TempCorpus(const WorldConfig& cfg, const char* name) {
    dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    raw = generate_synthetic_dataset(cfg);
    write_synthetic_dataset(raw, dir.string());
    ds = Dataset::load((dir / "manifest.jsonl").string());
    vocab = Vocabulary::load((dir / "vocab.txt").string());
  }
  ~TempCorpus() { fs::remove_all(dir); }
};

WorldConfig small_world(uint64_t seed) {
  WorldConfig cfg;
  cfg.video_count = 4;
  cfg.pairs_per_video = 3;
  cfg.seed = seed;
  return cfg;
}

ModelVariant<float> small_model(VariantTag tag, const Vocabulary& vocab,
                                uint64_t seed) {
  VirefConfig cfg;
  cfg.encoder_layers = 2;
  cfg.decoder_layers = 2;
  cfg.hidden_dim = 12;
  cfg.stream_dim = 32;
  cfg.vocab_size = vocab.size();
  cfg.embed_dim = 8;
  cfg.dropout_p = 0.2;
  return build_model<float>(tag, cfg,
                            random_embeddings(vocab, 8, seed + 1), seed);
}

}  // namespace

TEST_CASE("beam: a near-deterministic model gives the same result at any width") {
  auto vocab = make_vocab(1);  // N = 5
  auto model = tiny_model<float>(VariantTag::viref_a, vocab, 7);
  for (auto& [k, e] : model.params) e.value.data.setZero();
  // one dominant token per step, <end> strongly suppressed
  model.params.at("wen.l2.b").data(4, 0) = 10.0f;
  model.params.at("wen.l2.b").data(kEndId, 0) = -10.0f;
  auto seq = random_sequence(3, 6, 9);

  auto g1 = generate(model, &seq, nullptr, 1, 6);
  auto g3 = generate(model, &seq, nullptr, 3, 6);
  CHECK(g1.sequence.ids == g3.sequence.ids);
  CHECK(g1.log_prob == doctest::Approx(g3.log_prob).epsilon(1e-12));
  CHECK(g1.sequence.ids.size() == 7);  // <start> + max_len tokens
  for (std::size_t i = 1; i < g1.sequence.ids.size(); ++i)
    CHECK(g1.sequence.ids[i] == 4);

  CHECK_THROWS_AS(generate(model, &seq, nullptr, 0, 6), Error);
}

TEST_CASE("beam: wide beam equals exhaustive argmax, narrow never exceeds it") {
  auto vocab = make_vocab(1);  // N = 5
  const int max_len = 4;
  for (uint64_t seed : {3u, 17u, 29u}) {
    auto model = tiny_model<float>(VariantTag::viref_a, vocab, seed, 1, 5, 4, 3);
    randomize_params(model.params, seed * 31 + 1, 0.8);
    auto seq = random_sequence(2, 4, seed + 100);

    auto oracle = exhaustive_argmax(model, seq, max_len);
    auto wide = generate(model, &seq, nullptr, 625, max_len);
    CHECK(wide.log_prob == doctest::Approx(oracle.log_prob).epsilon(1e-9));
    std::vector<int> wide_tokens(wide.sequence.ids.begin() + 1,
                                 wide.sequence.ids.end());
    CHECK(wide_tokens == oracle.tokens);

    auto narrow = generate(model, &seq, nullptr, 3, max_len);
    CHECK(narrow.log_prob <= oracle.log_prob + 1e-12);
    auto b1 = generate(model, &seq, nullptr, 1, max_len);
    CHECK(b1.log_prob <= narrow.log_prob + 1e-12);
  }
}

TEST_CASE("beam: returned log prob is the sequence log prob of the output") {
  auto vocab = make_vocab(4);
  auto model = tiny_model<float>(VariantTag::viref, vocab, 41);
  randomize_params(model.params, 43, 0.6);
  auto seq = random_sequence(3, 6, 45);
  auto g = generate(model, &seq, nullptr, 3, 8);
  if (g.finished) {
    double lp = sequence_log_prob(model, &seq, nullptr, g.sequence);
    CHECK(g.log_prob == doctest::Approx(lp).epsilon(1e-9));
  }
}

TEST_CASE("train: zero learning rate leaves parameters bit-identical") {
  TempCorpus corpus(small_world(11), "viref_tasks_lr0");
  auto model = small_model(VariantTag::viref_a, corpus.vocab, 13);
  ParameterStore<float> before = model.params;

  FeatureCache cache(corpus.ds);
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.max_epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 5;
  auto train_items = split_items(corpus.ds, corpus.vocab, Split::train, 25);
  auto val_items = split_items(corpus.ds, corpus.vocab, Split::val, 25);
  REQUIRE(!train_items.empty());
  REQUIRE(!val_items.empty());
  auto result = train(model, corpus.ds, cache, corpus.vocab, train_items,
                      val_items, cfg);
  CHECK(result.steps > 0);
  for (const auto& [name, entry] : model.params)
    CHECK((entry.value.data.array() == before.at(name).data.array()).all());
}

TEST_CASE("train: identical seeds give identical loss histories") {
  TempCorpus corpus(small_world(19), "viref_tasks_seeds");
  FeatureCache cache(corpus.ds);
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.max_epochs = 3;
  cfg.batch_size = 4;
  cfg.seed = 99;
  auto train_items = split_items(corpus.ds, corpus.vocab, Split::train, 25);
  auto val_items = split_items(corpus.ds, corpus.vocab, Split::val, 25);

  auto m1 = small_model(VariantTag::viref_a, corpus.vocab, 21);
  auto m2 = small_model(VariantTag::viref_a, corpus.vocab, 21);
  auto r1 = train(m1, corpus.ds, cache, corpus.vocab, train_items, val_items,
                  cfg);
  auto r2 = train(m2, corpus.ds, cache, corpus.vocab, train_items, val_items,
                  cfg);
  CHECK(r1.train_loss == r2.train_loss);
  CHECK(r1.val_loss == r2.val_loss);
  CHECK(r1.best_epoch == r2.best_epoch);
  for (const auto& [name, entry] : m1.params)
    CHECK((entry.value.data.array() == m2.params.at(name).data.array()).all());
}

TEST_CASE("train: early stopping returns the best-validation epoch") {
  TempCorpus corpus(small_world(23), "viref_tasks_early");
  FeatureCache cache(corpus.ds);
  TrainConfig cfg;
  cfg.lr = 2e-3;
  cfg.max_epochs = 12;
  cfg.patience = 2;
  cfg.batch_size = 4;
  cfg.seed = 7;
  auto train_items = split_items(corpus.ds, corpus.vocab, Split::train, 25);
  auto val_items = split_items(corpus.ds, corpus.vocab, Split::val, 25);
  auto model = small_model(VariantTag::viref_a, corpus.vocab, 25);
  auto res = train(model, corpus.ds, cache, corpus.vocab, train_items,
                   val_items, cfg);
  REQUIRE(res.best_epoch >= 0);
  for (double v : res.val_loss)
    CHECK(res.val_loss[res.best_epoch] <= v + 1e-12);
  // the returned parameters really are the best-epoch snapshot
  const double recomputed =
      items_cross_entropy(model, corpus.ds, cache, corpus.vocab, val_items);
  CHECK(recomputed == doctest::Approx(res.val_loss[res.best_epoch])
                          .epsilon(1e-9));

  TrainConfig bad = cfg;
  auto m2 = small_model(VariantTag::viref_a, corpus.vocab, 25);
  CHECK_THROWS_AS(
      train(m2, corpus.ds, cache, corpus.vocab, train_items, {}, bad),
      Error);
}

TEST_CASE("train: divergence aborts with a step diagnostic") {
  TempCorpus corpus(small_world(29), "viref_tasks_diverge");
  FeatureCache cache(corpus.ds);
  TrainConfig cfg;
  cfg.lr = 1e18;
  cfg.max_epochs = 50;
  cfg.batch_size = 4;
  cfg.seed = 3;
  auto train_items = split_items(corpus.ds, corpus.vocab, Split::train, 25);
  auto val_items = split_items(corpus.ds, corpus.vocab, Split::val, 25);
  auto model = small_model(VariantTag::viref_a, corpus.vocab, 31);
  try {
    train(model, corpus.ds, cache, corpus.vocab, train_items, val_items, cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::divergence);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("comprehend: stable tie order and score-sorted ranking") {
  TempCorpus corpus(small_world(37), "viref_tasks_comp");
  FeatureCache cache(corpus.ds);
  auto model = small_model(VariantTag::viref, corpus.vocab, 39);
  randomize_params(model.params, 41, 0.4);

  const auto& video = corpus.ds.by_video.begin()->second;
  std::vector<const PairRecord*> candidates;
  for (int idx : video) candidates.push_back(&corpus.ds.records[idx]);
  auto query = encode_refexp(corpus.ds.records[video[0]].refexps[0],
                             corpus.vocab);

  auto rr = comprehend(model, query, candidates, cache,
                       corpus.ds.records[video[0]].pair_id);
  REQUIRE(rr.ranking.size() == candidates.size());
  CHECK(rr.gt_rank >= 1);
  for (std::size_t i = 0; i + 1 < rr.ranking.size(); ++i)
    CHECK(rr.ranking[i].score >= rr.ranking[i + 1].score);

  // recomputing scores independently reproduces the returned order
  std::vector<ScoredCandidate> manual;
  for (const auto* rec : candidates) {
    double lp = sequence_log_prob(model, &cache.sequence(*rec), nullptr,
                                  query);
    manual.push_back({rec->pair_id, lp});
  }
  std::stable_sort(manual.begin(), manual.end(),
                   [](const auto& a, const auto& b) {
                     return a.score > b.score;
                   });
  for (std::size_t i = 0; i < manual.size(); ++i) {
    CHECK(manual[i].pair_id == rr.ranking[i].pair_id);
    CHECK(manual[i].score == doctest::Approx(rr.ranking[i].score));
  }

  // duplicated candidates score identically and keep their order
  std::vector<const PairRecord*> dups = {candidates[0], candidates[1],
                                         candidates[0]};
  auto rd = comprehend(model, query, dups, cache);
  double s0 = 0, s2 = 0;
  int first_pos = -1, second_pos = -1;
  for (std::size_t i = 0; i < rd.ranking.size(); ++i) {
    if (rd.ranking[i].pair_id == candidates[0]->pair_id) {
      if (first_pos < 0) {
        first_pos = int(i);
        s0 = rd.ranking[i].score;
      } else {
        second_pos = int(i);
        s2 = rd.ranking[i].score;
      }
    }
  }
  CHECK(s0 == s2);
  CHECK(first_pos >= 0);
  CHECK(second_pos == first_pos + 1);  // adjacent, original order

  CHECK_THROWS_AS(comprehend(model, query, {}, cache), Error);
}

TEST_CASE("comprehend: ranking is invariant under candidate permutation") {
  TempCorpus corpus(small_world(43), "viref_tasks_perm");
  FeatureCache cache(corpus.ds);
  auto model = small_model(VariantTag::viref_a, corpus.vocab, 45);
  randomize_params(model.params, 47, 0.4);

  const auto& video = corpus.ds.by_video.begin()->second;
  std::vector<const PairRecord*> candidates;
  for (int idx : video) candidates.push_back(&corpus.ds.records[idx]);
  auto query = encode_refexp(corpus.ds.records[video[1]].refexps[0],
                             corpus.vocab);
  auto r1 = comprehend(model, query, candidates, cache);
  std::reverse(candidates.begin(), candidates.end());
  auto r2 = comprehend(model, query, candidates, cache);
  REQUIRE(r1.ranking.size() == r2.ranking.size());
  for (std::size_t i = 0; i < r1.ranking.size(); ++i) {
    CHECK(r1.ranking[i].pair_id == r2.ranking[i].pair_id);
    CHECK(r1.ranking[i].score == doctest::Approx(r2.ranking[i].score));
  }
}
