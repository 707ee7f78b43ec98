#pragma once

#include <map>
#include <string>

#include "viref/model.hpp"
#include "viref/synth.hpp"
#include "viref/train.hpp"

namespace viref {

// Everything one command run needs: variant, model dims, training setup,
// synthetic-world setup and file locations. Values come from a key/value
// config file (dotted keys, '#' comments) with command-line overrides on
// top; unknown keys are config errors.
struct RunConfig {
  uint64_t seed = 0;
  VariantTag variant = VariantTag::viref;

  WorldConfig world;

  // model dimensions; stream_dim and vocab_size always come from the data
  int encoder_layers = 6;
  int decoder_layers = 6;
  int hidden_dim = 512;
  int embed_dim = 50;
  double dropout_p = 0.2;
  int fan_hidden1 = 0, fan_hidden2 = 0;
  int wen_hidden1 = 0, wen_hidden2 = 0;
  int fpn_hidden1 = 0, fpn_hidden2 = 0;

  TrainConfig train;

  int beam = 3;
  int max_len = 25;

  std::string manifest;
  std::string vocab_path;
  std::string embeddings;
  std::string checkpoint;
  std::string out_dir;
  std::string queries;   // comprehend: optional query file
  std::string pair_ids;  // generate: optional comma-separated subset

  VirefConfig model_config(int stream_dim, int vocab_size) const;
};

std::map<std::string, std::string> load_config_file(const std::string& path);
RunConfig parse_run_config(const std::map<std::string, std::string>& kv);

}  // namespace viref
