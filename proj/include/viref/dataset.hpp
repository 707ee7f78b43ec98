#pragma once

#include <array>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "viref/rng.hpp"
#include "viref/tensor.hpp"
#include "viref/types.hpp"
#include "viref/vocab.hpp"

namespace viref {

enum class Split { train, val, test };

const char* split_name(Split s);
Split parse_split(const std::string& s);

// One directed (main, context) pair in one video, with its referring
// expressions and pointers to the stored feature files.
struct PairRecord {
  std::string video_id;
  std::string pair_id;
  bool main_then_context = true;  // collection order flag
  int frame_count = 0;
  std::string feature_path;
  std::string clip_feature_path;
  std::vector<std::string> refexps;
  Split split = Split::train;
};

// Fixed stream order of the five per-frame streams.
enum FrameStream {
  kMainAppearance = 0,
  kContextAppearance = 1,
  kScene = 2,
  kMainMask = 3,
  kContextMask = 4,
};
inline constexpr int kFrameStreams = 5;
inline constexpr int kClipStreams = 6;

// Raw payload of a VRFT file: frames x streams x dim floats, frame-major
// then stream-major.
struct FeatureData {
  int frames = 0;
  int streams = 0;
  int dim = 0;
  std::vector<float> values;

  const float* stream_ptr(int frame, int stream) const {
    return values.data() + (static_cast<std::size_t>(frame) * streams +
                            stream) *
                               dim;
  }
  Eigen::Map<const VecXf> stream(int frame, int s) const {
    return Eigen::Map<const VecXf>(stream_ptr(frame, s), dim);
  }
  float* stream_ptr(int frame, int stream) {
    return values.data() + (static_cast<std::size_t>(frame) * streams +
                            stream) *
                               dim;
  }
};

// Per-frame bundle of the 5 feature streams for a pair.
struct FeatureSequence : FeatureData {};
// The 6 clip-level vectors consumed by the no-encoder variant.
struct ClipFeatureSet : FeatureData {};

inline constexpr uint32_t kFeatureVersion = 1;

void write_vrft(const FeatureData& data, const std::string& path);
FeatureData read_vrft(const std::string& path);
FeatureSequence load_feature_sequence(const std::string& path);
ClipFeatureSet load_clip_features(const std::string& path);

// Manifest: one JSON object per line with the PairRecord fields.
std::vector<PairRecord> load_manifest(const std::string& path);
void save_manifest(const std::vector<PairRecord>& records,
                   const std::string& path);

// Seeded shuffle, then partition with largest-remainder rounding.
std::vector<Split> split_dataset(std::size_t record_count,
                                 const std::array<double, 3>& ratios,
                                 uint64_t seed);

// Word-embedding table, one column per vocabulary token.
struct EmbeddingTable {
  MatXf table;  // dim x vocab size
  bool trainable = true;
  int dim() const { return static_cast<int>(table.rows()); }
  int vocab_size() const { return static_cast<int>(table.cols()); }
};

// Tokens found in the file take the stored vector; every other token gets a
// seeded uniform init in [-0.1, 0.1]. The table is trainable.
EmbeddingTable load_embeddings(const std::string& path,
                               const Vocabulary& vocab, int dim,
                               uint64_t seed);
EmbeddingTable random_embeddings(const Vocabulary& vocab, int dim,
                                 uint64_t seed);

// Manifest plus resolved file locations and a per-video index.
struct Dataset {
  std::string base_dir;
  std::vector<PairRecord> records;
  std::map<std::string, std::vector<int>> by_video;

  static Dataset load(const std::string& manifest_path);
  std::string resolve(const std::string& rel) const;
  std::vector<int> split_indices(Split s) const;
};

// Loads each feature file at most once; the cached data is immutable.
class FeatureCache {
 public:
  explicit FeatureCache(const Dataset& ds) : ds_(&ds) {}
  const FeatureSequence& sequence(const PairRecord& rec);
  const ClipFeatureSet& clip(const PairRecord& rec);

 private:
  const Dataset* ds_;
  std::unordered_map<std::string, FeatureSequence> seqs_;
  std::unordered_map<std::string, ClipFeatureSet> clips_;
};

}  // namespace viref
