// Command-line front end: synthesize data, train a variant, generate and
// comprehend referring expressions, evaluate, and verify gradients.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "viref/checkpoint.hpp"
#include "viref/evaluate.hpp"
#include "viref/runconfig.hpp"
#include "viref/verify.hpp"

namespace fs = std::filesystem;
using namespace viref;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::string> checkpoint;
  std::optional<std::string> out;
  std::optional<int> beam;
  std::optional<int> max_len;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "key/value config file");
  cmd->add_option("--seed", flags.seed, "master seed (u64)");
  cmd->add_option("--variant", flags.variant, "viref|viref_a|viref_e");
  cmd->add_option("--checkpoint", flags.checkpoint, "checkpoint file");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--beam", flags.beam, "beam size (default 3)");
  cmd->add_option("--max-len", flags.max_len,
                  "maximum generated length (default 25)");
}

RunConfig resolve_config(const CommonFlags& flags) {
  std::map<std::string, std::string> kv;
  if (!flags.config.empty()) kv = load_config_file(flags.config);
  RunConfig rc = parse_run_config(kv);
  if (flags.seed) {
    rc.seed = *flags.seed;
    rc.world.seed = *flags.seed;
    rc.train.seed = *flags.seed;
  }
  if (flags.variant) rc.variant = parse_variant(*flags.variant);
  if (flags.checkpoint) rc.checkpoint = *flags.checkpoint;
  if (flags.out) rc.out_dir = *flags.out;
  if (flags.beam) rc.beam = *flags.beam;
  if (flags.max_len) rc.max_len = *flags.max_len;
  return rc;
}

void require_path(const std::string& value, const char* key) {
  if (value.empty())
    fail(ErrorKind::config, std::string("missing required path: ") + key);
}

struct LoadedData {
  Dataset ds;
  Vocabulary vocab;
  int stream_dim = 0;
};

LoadedData load_data(const RunConfig& rc) {
  require_path(rc.manifest, "paths.manifest");
  require_path(rc.vocab_path, "paths.vocab");
  LoadedData data;
  data.ds = Dataset::load(rc.manifest);
  data.vocab = Vocabulary::load(rc.vocab_path);
  if (data.ds.records.empty())
    fail(ErrorKind::degenerate, "manifest has no records");
  const FeatureData probe =
      read_vrft(data.ds.resolve(data.ds.records[0].feature_path));
  data.stream_dim = probe.dim;
  return data;
}

ModelVariant<float> make_model(const RunConfig& rc, const LoadedData& data,
                               bool from_checkpoint) {
  EmbeddingTable emb =
      rc.embeddings.empty()
          ? random_embeddings(data.vocab, rc.embed_dim,
                              derive_seed(rc.seed, "embed"))
          : load_embeddings(rc.embeddings, data.vocab, rc.embed_dim,
                            derive_seed(rc.seed, "embed"));
  ModelVariant<float> model = build_model<float>(
      rc.variant, rc.model_config(data.stream_dim, data.vocab.size()), emb,
      derive_seed(rc.seed, "model.init"));
  if (from_checkpoint) {
    require_path(rc.checkpoint, "paths.checkpoint");
    install_checkpoint(model, load_checkpoint(rc.checkpoint));
  }
  return model;
}

int cmd_synth(const RunConfig& rc) {
  require_path(rc.out_dir, "paths.out");
  rc.world.validate();
  SynthDataset data = generate_synthetic_dataset(rc.world);
  write_synthetic_dataset(data, rc.out_dir);
  std::printf("synth: wrote %zu records (%d videos) to %s\n",
              data.records.size(), rc.world.video_count, rc.out_dir.c_str());
  std::printf("synth: vocabulary size %d\n", data.vocab.size());
  return 0;
}

int cmd_train(const RunConfig& rc) {
  require_path(rc.out_dir, "paths.out");
  LoadedData data = load_data(rc);
  ModelVariant<float> model = make_model(rc, data, false);
  FeatureCache cache(data.ds);
  auto train_items =
      split_items(data.ds, data.vocab, Split::train, rc.train.max_len);
  auto val_items =
      split_items(data.ds, data.vocab, Split::val, rc.train.max_len);
  TrainResult result = train(model, data.ds, cache, data.vocab, train_items,
                             val_items, rc.train);
  fs::create_directories(rc.out_dir);
  const std::string ckpt = (fs::path(rc.out_dir) / "checkpoint.vrfc").string();
  save_checkpoint(model.params, ckpt);
  save_loss_history(result.train_loss,
                    (fs::path(rc.out_dir) / "loss_train.tsv").string());
  save_loss_history(result.val_loss,
                    (fs::path(rc.out_dir) / "loss_val.tsv").string());
  std::printf(
      "train: %s, %zu train items, %zu val items, %ld steps, best epoch %d "
      "(val %.4f)\n",
      variant_name(model.tag), train_items.size(), val_items.size(),
      result.steps, result.best_epoch,
      result.best_epoch >= 0 ? result.val_loss[result.best_epoch] : 0.0);
  std::printf("train: checkpoint %s\n", ckpt.c_str());
  return 0;
}

int cmd_generate(const RunConfig& rc) {
  require_path(rc.out_dir, "paths.out");
  LoadedData data = load_data(rc);
  ModelVariant<float> model = make_model(rc, data, true);
  FeatureCache cache(data.ds);

  std::vector<int> targets;
  if (rc.pair_ids.empty()) {
    targets = data.ds.split_indices(Split::test);
  } else {
    std::stringstream ss(rc.pair_ids);
    std::string id;
    while (std::getline(ss, id, ',')) {
      bool found = false;
      for (std::size_t i = 0; i < data.ds.records.size(); ++i)
        if (data.ds.records[i].pair_id == id) {
          targets.push_back(static_cast<int>(i));
          found = true;
          break;
        }
      if (!found)
        fail(ErrorKind::config, "generate: unknown pair id " + id);
    }
  }
  if (targets.empty())
    fail(ErrorKind::degenerate, "generate: no pairs selected");

  fs::create_directories(rc.out_dir);
  std::ofstream os(fs::path(rc.out_dir) / "generated.txt");
  char buf[64];
  for (int idx : targets) {
    const PairRecord& rec = data.ds.records[idx];
    const FeatureSequence* seq =
        model.tag == VariantTag::viref_e ? nullptr : &cache.sequence(rec);
    const ClipFeatureSet* clip =
        model.tag == VariantTag::viref_e ? &cache.clip(rec) : nullptr;
    GenerationResult g = generate(model, seq, clip, rc.beam, rc.max_len);
    std::snprintf(buf, sizeof(buf), "%.9e", g.log_prob);
    os << rec.pair_id << "\t" << buf << "\t"
       << decode_tokens(g.sequence, data.vocab) << "\n";
  }
  std::printf("generate: %zu pairs -> %s/generated.txt\n", targets.size(),
              rc.out_dir.c_str());
  return 0;
}

int cmd_comprehend(const RunConfig& rc) {
  require_path(rc.out_dir, "paths.out");
  LoadedData data = load_data(rc);
  ModelVariant<float> model = make_model(rc, data, true);
  FeatureCache cache(data.ds);

  struct Query {
    std::string video;
    std::string text;
    std::string gt;
  };
  std::vector<Query> queries;
  if (!rc.queries.empty()) {
    if (!fs::exists(rc.queries))
      fail(ErrorKind::missing_file, "query file not found: " + rc.queries);
    std::ifstream is(rc.queries);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::stringstream ss(line);
      Query q;
      if (!std::getline(ss, q.video, '\t') || !std::getline(ss, q.text, '\t'))
        fail(ErrorKind::format, "query line " + std::to_string(line_no) +
                                    ": expected video_id<TAB>refexp");
      std::getline(ss, q.gt, '\t');
      queries.push_back(std::move(q));
    }
  } else {
    for (int idx : data.ds.split_indices(Split::test)) {
      const PairRecord& rec = data.ds.records[idx];
      queries.push_back({rec.video_id, rec.refexps[0], rec.pair_id});
    }
  }
  if (queries.empty())
    fail(ErrorKind::degenerate, "comprehend: no queries");

  fs::create_directories(rc.out_dir);
  std::ofstream os(fs::path(rc.out_dir) / "comprehension.jsonl");
  char buf[64];
  for (const auto& q : queries) {
    auto vit = data.ds.by_video.find(q.video);
    if (vit == data.ds.by_video.end())
      fail(ErrorKind::config, "comprehend: unknown video " + q.video);
    std::vector<const PairRecord*> candidates;
    for (int j : vit->second) candidates.push_back(&data.ds.records[j]);
    RankedRetrieval rr = comprehend(
        model, encode_refexp(q.text, data.vocab), candidates, cache, q.gt);
    rr.query = q.text;
    nlohmann::json j;
    j["video_id"] = q.video;
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
  std::printf("comprehend: %zu queries -> %s/comprehension.jsonl\n",
              queries.size(), rc.out_dir.c_str());
  return 0;
}

int cmd_evaluate(const RunConfig& rc) {
  require_path(rc.out_dir, "paths.out");
  LoadedData data = load_data(rc);
  ModelVariant<float> model = make_model(rc, data, true);
  FeatureCache cache(data.ds);
  EvaluateOptions opts;
  opts.beam = rc.beam;
  opts.max_len = rc.max_len;
  EvaluateResult res = evaluate_model(model, data.ds, cache, data.vocab, opts);
  write_reports(rc.out_dir, variant_name(model.tag), model.parameter_count(),
                res);
  std::printf("evaluate: %s bleu4=%.4f distinct=%d map=%.4f rank1=%.4f "
              "rank2=%.4f rank3=%.4f\n",
              variant_name(model.tag), res.gen.avg_bleu4,
              res.gen.distinct_words, res.ret.map, res.ret.rank1,
              res.ret.rank2, res.ret.rank3);
  std::printf("evaluate: reports in %s\n", rc.out_dir.c_str());
  return 0;
}

int cmd_gradcheck(const RunConfig& rc) {
  bool ok = true;
  auto run = [&](const char* label, ModelCheckSpec spec) {
    FdReport rep = model_gradient_check(spec);
    const bool pass = rep.max_rel_error < 1e-5;
    ok = ok && pass;
    std::printf("gradcheck %-14s max_rel_error=%.3e (%ld coordinates) %s\n",
                label, rep.max_rel_error, rep.coordinates,
                pass ? "PASS" : "FAIL");
  };
  for (auto tag :
       {VariantTag::viref, VariantTag::viref_a, VariantTag::viref_e}) {
    ModelCheckSpec spec;
    spec.tag = tag;
    spec.seed = rc.seed;
    run(variant_name(tag), spec);
  }
  ModelCheckSpec deep;
  deep.tag = VariantTag::viref;
  deep.layers = 6;
  deep.seed = rc.seed;
  run("viref(6-layer)", deep);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relational referring expressions for video object pairs"};
  app.require_subcommand(1);
  CommonFlags flags;

  CLI::App* synth = app.add_subcommand("synth", "write a synthetic corpus");
  CLI::App* train_cmd = app.add_subcommand("train", "train a model variant");
  CLI::App* gen = app.add_subcommand("generate", "beam-search expressions");
  CLI::App* comp = app.add_subcommand("comprehend", "rank pairs per video");
  CLI::App* eval = app.add_subcommand("evaluate", "run both tasks + reports");
  CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference check");
  for (CLI::App* cmd : {synth, train_cmd, gen, comp, eval, grad})
    add_common(cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << nlohmann::json{
                     {"error",
                      {{"kind", "usage"},
                       {"code", int(ErrorKind::usage)},
                       {"message", e.what()}}}}
                     .dump()
              << "\n";
    return int(ErrorKind::usage);
  }

  try {
    RunConfig rc = resolve_config(flags);
    if (synth->parsed()) return cmd_synth(rc);
    if (train_cmd->parsed()) return cmd_train(rc);
    if (gen->parsed()) return cmd_generate(rc);
    if (comp->parsed()) return cmd_comprehend(rc);
    if (eval->parsed()) return cmd_evaluate(rc);
    if (grad->parsed()) return cmd_gradcheck(rc);
    return int(ErrorKind::usage);
  } catch (const Error& e) {
    std::cerr << nlohmann::json{
                     {"error",
                      {{"kind", error_kind_name(e.kind())},
                       {"code", int(e.kind())},
                       {"message", e.what()}}}}
                     .dump()
              << "\n";
    return int(e.kind());
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error",
                                 {{"kind", "internal"},
                                  {"code", 1},
                                  {"message", e.what()}}}}
                     .dump()
              << "\n";
    return 1;
  }
}
