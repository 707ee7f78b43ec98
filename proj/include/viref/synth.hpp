#pragma once

#include <array>
#include <string>
#include <vector>

#include "viref/dataset.hpp"
#include "viref/vocab.hpp"

namespace viref {

// Deterministic synthetic world. Every feature is a pure function of the
// latent attributes (plus optional seeded noise), so the corpus is byte
// reproducible and the latent -> feature map is injective at zero noise.
struct WorldConfig {
  int video_count = 40;
  int pairs_per_video = 5;
  int frame_count_min = 4;
  int frame_count_max = 8;
  int feature_dim = 32;
  std::vector<std::string> classes = {"car", "van", "truck", "bus"};
  std::vector<std::string> colors = {"red", "blue", "white", "black"};
  std::vector<std::string> motions = {"parked", "moving", "turning"};
  std::vector<std::string> relations = {"near", "behind", "beside",
                                        "leading"};
  double noise_std = 0.05;
  uint64_t seed = 0;
  std::array<double, 3> split_ratios = {0.6, 0.1, 0.3};

  void validate() const;
};

// What a referring expression describes: the main object's class, color and
// motion, the context object's class and color, and their spatial relation.
struct LatentPair {
  int main_class = 0;
  int main_color = 0;
  int main_motion = 0;
  int context_class = 0;
  int context_color = 0;
  int relation = 0;

  bool operator==(const LatentPair&) const = default;
};

struct SynthDataset {
  std::vector<PairRecord> records;
  std::vector<FeatureSequence> features;   // parallel to records
  std::vector<ClipFeatureSet> clips;       // parallel to records
  std::vector<LatentPair> latents;         // parallel to records
  Vocabulary vocab;                        // built from the train split
};

// Noise-free feature core for one latent pair (frame count derives from the
// latents, so equal latents give bit-identical sequences).
FeatureSequence synth_features(const LatentPair& latents,
                               const WorldConfig& config);
ClipFeatureSet synth_clip_features(const LatentPair& latents,
                                   const WorldConfig& config);
int synth_frame_count(const LatentPair& latents, const WorldConfig& config);

// The three templated referring expressions for one latent pair.
std::vector<std::string> synth_refexps(const LatentPair& latents,
                                       const WorldConfig& config);

SynthDataset generate_synthetic_dataset(const WorldConfig& config);

// Writes manifest.jsonl, vocab.txt and features/*.vrft under out_dir.
void write_synthetic_dataset(const SynthDataset& data,
                             const std::string& out_dir);

}  // namespace viref
