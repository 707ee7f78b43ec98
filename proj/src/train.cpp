#include "viref/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace viref {

namespace {

struct Prepared {
  const PairRecord* rec = nullptr;
  std::vector<int> fed;      // <start> w_1 .. w_k
  std::vector<int> targets;  // w_1 .. <end>
};

Prepared prepare(const Dataset& ds, const Vocabulary& vocab,
                 const TrainItem& item) {
  Prepared p;
  p.rec = &ds.records[item.record];
  TokenSequence seq = encode_refexp(p.rec->refexps[item.refexp], vocab);
  for (std::size_t i = 0; i + 1 < seq.ids.size(); ++i) {
    p.fed.push_back(seq.ids[i]);
    p.targets.push_back(seq.ids[i + 1]);
  }
  return p;
}

// Per-token CE of a group of items on one tape. Every target is a real
// token or <end> (padding never reaches the decoder), so the mask is all
// true by construction.
Var<float> batch_loss(Tape<float>& tape, ModelVariant<float>& model,
                      FeatureCache& cache, const Dataset& ds,
                      const Vocabulary& vocab,
                      const std::vector<TrainItem>& items) {
  std::vector<Var<float>> dists;
  std::vector<int> targets;
  for (const auto& item : items) {
    Prepared p = prepare(ds, vocab, item);
    const FeatureSequence* seq =
        model.tag == VariantTag::viref_e ? nullptr : &cache.sequence(*p.rec);
    const ClipFeatureSet* clip =
        model.tag == VariantTag::viref_e ? &cache.clip(*p.rec) : nullptr;
    PairInput<float> input = make_pair_input(tape, model, seq, clip);
    auto step_dists = forward_sequence(tape, model, input, p.fed);
    for (std::size_t j = 0; j < step_dists.size(); ++j) {
      dists.push_back(step_dists[j]);
      targets.push_back(p.targets[j]);
    }
  }
  return cross_entropy(tape, dists, targets,
                       std::vector<bool>(targets.size(), true));
}

}  // namespace

std::vector<TrainItem> split_items(const Dataset& ds, const Vocabulary& vocab,
                                   Split split, int max_len,
                                   int refexp_limit) {
  std::vector<TrainItem> items;
  for (std::size_t r = 0; r < ds.records.size(); ++r) {
    if (ds.records[r].split != split) continue;
    const auto& refexps = ds.records[r].refexps;
    const int limit = refexp_limit > 0
                          ? std::min<int>(refexp_limit, refexps.size())
                          : static_cast<int>(refexps.size());
    for (int e = 0; e < limit; ++e) {
      TokenSequence seq = encode_refexp(refexps[e], vocab);
      if (seq.word_count() >= max_len) continue;
      items.push_back(TrainItem{static_cast<int>(r), e});
    }
  }
  return items;
}

double items_cross_entropy(ModelVariant<float>& model, const Dataset& ds,
                           FeatureCache& cache, const Vocabulary& vocab,
                           const std::vector<TrainItem>& items) {
  if (items.empty())
    fail(ErrorKind::degenerate, "cross entropy over an empty item set");
  double total = 0.0;
  long count = 0;
  for (const auto& item : items) {
    Tape<float> tape(Mode::eval, 0, false);
    Prepared p = prepare(ds, vocab, item);
    const FeatureSequence* seq =
        model.tag == VariantTag::viref_e ? nullptr : &cache.sequence(*p.rec);
    const ClipFeatureSet* clip =
        model.tag == VariantTag::viref_e ? &cache.clip(*p.rec) : nullptr;
    PairInput<float> input = make_pair_input(tape, model, seq, clip);
    auto dists = forward_sequence(tape, model, input, p.fed);
    for (std::size_t j = 0; j < dists.size(); ++j) {
      total -= std::log(
          static_cast<double>(dists[j].value()(p.targets[j], 0)));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

TrainResult train(ModelVariant<float>& model, const Dataset& ds,
                  FeatureCache& cache, const Vocabulary& vocab,
                  const std::vector<TrainItem>& train_items,
                  const std::vector<TrainItem>& val_items,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_items.empty() || val_items.empty())
    fail(ErrorKind::degenerate,
         "training needs non-empty train and val item sets");

  // target length per item, for the similar-length batch grouping
  std::vector<int> lengths(train_items.size());
  for (std::size_t i = 0; i < train_items.size(); ++i) {
    const auto& rec = ds.records[train_items[i].record];
    lengths[i] = static_cast<int>(
        tokenize(rec.refexps[train_items[i].refexp]).size());
  }

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  AdamState<float> adam_state;
  const double original_dropout = model.cfg.dropout_p;
  if (!cfg.dropout_enabled) model.cfg.dropout_p = 0.0;

  TrainResult result;
  ParameterStore<float> best_params = model.params;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  bool stopped = false;

  for (int epoch = 0; epoch < cfg.max_epochs && !stopped; ++epoch) {
    // shuffle, then group by similar length before batching
    std::vector<std::size_t> order(train_items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(cfg.seed,
                        "train.epoch:" + std::to_string(epoch)));
    for (std::size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[rng.uniform_int(i + 1)]);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                     std::size_t b) {
      return lengths[a] < lengths[b];
    });
    std::vector<std::vector<TrainItem>> batches;
    for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
      std::vector<TrainItem> batch;
      for (std::size_t j = i;
           j < std::min(order.size(), i + cfg.batch_size); ++j)
        batch.push_back(train_items[order[j]]);
      batches.push_back(std::move(batch));
    }
    for (std::size_t i = batches.size() - 1; i > 0; --i)
      std::swap(batches[i], batches[rng.uniform_int(i + 1)]);

    double epoch_total = 0.0;
    long epoch_tokens = 0;
    for (const auto& batch : batches) {
      Tape<float> tape(Mode::train,
                       derive_seed(cfg.seed, "train.dropout:" +
                                                 std::to_string(result.steps)),
                       true);
      Var<float> loss = batch_loss(tape, model, cache, ds, vocab, batch);
      const double loss_value = static_cast<double>(loss.scalar());
      if (!std::isfinite(loss_value))
        fail(ErrorKind::divergence,
             "training diverged: non-finite loss at step " +
                 std::to_string(result.steps));
      tape.backward(loss);
      adam_step(model.params, tape.gradients(), adam_state, adam_cfg);
      result.steps += 1;

      long tokens = 0;
      for (const auto& item : batch)
        tokens += encode_refexp(ds.records[item.record].refexps[item.refexp],
                                vocab)
                      .target_count();
      epoch_total += loss_value * static_cast<double>(tokens);
      epoch_tokens += tokens;
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) {
        stopped = true;
        break;
      }
    }
    result.train_loss.push_back(epoch_total /
                                static_cast<double>(epoch_tokens));

    const double val =
        items_cross_entropy(model, ds, cache, vocab, val_items);
    result.val_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      best_params = model.params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      stopped = true;
    }
  }

  model.params = std::move(best_params);
  model.cfg.dropout_p = original_dropout;
  return result;
}

void save_loss_history(const std::vector<double>& values,
                       const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::missing_file, "cannot write loss history: " + path);
  os.precision(10);
  for (std::size_t i = 0; i < values.size(); ++i)
    os << i << "\t" << values[i] << "\n";
}

}  // namespace viref
