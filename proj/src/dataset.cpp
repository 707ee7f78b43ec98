#include "viref/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace viref {

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  fail(ErrorKind::format, "unknown split: " + s);
}

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const std::string& path,
                 const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    fail(ErrorKind::format,
         std::string("feature file truncated (") + what + "): " + path);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
         uint32_t(b[3]) << 24;
}

}  // namespace

void write_vrft(const FeatureData& data, const std::string& path) {
  if (data.values.size() != static_cast<std::size_t>(data.frames) *
                                data.streams * data.dim)
    fail(ErrorKind::shape, "feature payload does not match header: " + path);
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::missing_file, "cannot write feature file: " + path);
  os.write("VRFT", 4);
  put_u32(os, kFeatureVersion);
  put_u32(os, static_cast<uint32_t>(data.frames));
  put_u32(os, static_cast<uint32_t>(data.streams));
  put_u32(os, static_cast<uint32_t>(data.dim));
  for (float v : data.values) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
  }
  if (!os) fail(ErrorKind::format, "feature file write failed: " + path);
}

FeatureData read_vrft(const std::string& path) {
  if (!fs::exists(path))
    fail(ErrorKind::missing_file, "feature file not found: " + path);
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::missing_file, "cannot open feature file: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "VRFT", 4) != 0)
    fail(ErrorKind::format, "bad magic in feature file: " + path);
  const uint32_t version = get_u32(is, path, "version");
  if (version != kFeatureVersion)
    fail(ErrorKind::format, "unsupported feature file version " +
                                std::to_string(version) + ": " + path);
  FeatureData data;
  data.frames = static_cast<int>(get_u32(is, path, "frame count"));
  data.streams = static_cast<int>(get_u32(is, path, "stream count"));
  data.dim = static_cast<int>(get_u32(is, path, "dim"));
  if (data.frames < 1 || data.dim < 1)
    fail(ErrorKind::format, "degenerate feature header: " + path);
  if (data.streams != kFrameStreams && data.streams != kClipStreams)
    fail(ErrorKind::format,
         "stream count " + std::to_string(data.streams) +
             " not supported (want 5 or 6): " + path);
  const std::size_t total = static_cast<std::size_t>(data.frames) *
                            data.streams * data.dim;
  data.values.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    uint32_t bits = get_u32(is, path, "payload");
    float v;
    std::memcpy(&v, &bits, 4);
    data.values[i] = v;
  }
  char extra;
  if (is.read(&extra, 1))
    fail(ErrorKind::format, "trailing bytes in feature file: " + path);
  return data;
}

FeatureSequence load_feature_sequence(const std::string& path) {
  FeatureData d = read_vrft(path);
  if (d.streams != kFrameStreams)
    fail(ErrorKind::format,
         "expected 5 streams, found " + std::to_string(d.streams) + ": " +
             path);
  FeatureSequence seq;
  static_cast<FeatureData&>(seq) = std::move(d);
  return seq;
}

ClipFeatureSet load_clip_features(const std::string& path) {
  FeatureData d = read_vrft(path);
  if (d.streams != kClipStreams)
    fail(ErrorKind::format,
         "expected 6 streams, found " + std::to_string(d.streams) + ": " +
             path);
  if (d.frames != 1)
    fail(ErrorKind::format, "clip features must have one frame: " + path);
  ClipFeatureSet clip;
  static_cast<FeatureData&>(clip) = std::move(d);
  return clip;
}

std::vector<PairRecord> load_manifest(const std::string& path) {
  if (!fs::exists(path))
    fail(ErrorKind::missing_file, "manifest not found: " + path);
  std::ifstream is(path);
  if (!is) fail(ErrorKind::missing_file, "cannot open manifest: " + path);
  std::vector<PairRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorKind::format, "manifest line " + std::to_string(line_no) +
                                  ": " + e.what());
    }
    try {
      PairRecord r;
      r.video_id = j.at("video_id").get<std::string>();
      r.pair_id = j.at("pair_id").get<std::string>();
      r.main_then_context = j.at("direction").get<std::string>() != "reverse";
      r.frame_count = j.at("frame_count").get<int>();
      r.feature_path = j.at("feature_path").get<std::string>();
      r.clip_feature_path = j.at("clip_feature_path").get<std::string>();
      r.refexps = j.at("refexps").get<std::vector<std::string>>();
      r.split = parse_split(j.at("split").get<std::string>());
      if (r.frame_count < 1)
        fail(ErrorKind::format, "manifest line " + std::to_string(line_no) +
                                    ": frame_count must be >= 1");
      if (r.refexps.empty())
        fail(ErrorKind::format, "manifest line " + std::to_string(line_no) +
                                    ": record has no referring expressions");
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      fail(ErrorKind::format, "manifest line " + std::to_string(line_no) +
                                  ": " + e.what());
    }
  }
  return records;
}

void save_manifest(const std::vector<PairRecord>& records,
                   const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::missing_file, "cannot write manifest: " + path);
  for (const auto& r : records) {
    json j;
    j["video_id"] = r.video_id;
    j["pair_id"] = r.pair_id;
    j["direction"] = r.main_then_context ? "straight" : "reverse";
    j["frame_count"] = r.frame_count;
    j["feature_path"] = r.feature_path;
    j["clip_feature_path"] = r.clip_feature_path;
    j["refexps"] = r.refexps;
    j["split"] = split_name(r.split);
    os << j.dump() << "\n";
  }
}

std::vector<Split> split_dataset(std::size_t record_count,
                                 const std::array<double, 3>& ratios,
                                 uint64_t seed) {
  double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9)
    fail(ErrorKind::config, "split ratios must sum to 1");
  if (record_count < 3)
    fail(ErrorKind::degenerate, "split needs at least 3 records");

  // largest-remainder rounding of the target sizes
  std::array<std::size_t, 3> counts;
  std::array<double, 3> frac;
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double want = ratios[i] * static_cast<double>(record_count);
    counts[i] = static_cast<std::size_t>(want);
    frac[i] = want - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<int, 3> order = {0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (frac[a] != frac[b]) return frac[a] > frac[b];
    return a < b;
  });
  for (std::size_t k = 0; assigned < record_count; ++k, ++assigned)
    counts[order[k % 3]] += 1;

  std::vector<std::size_t> idx(record_count);
  for (std::size_t i = 0; i < record_count; ++i) idx[i] = i;
  Rng rng(derive_seed(seed, "split"));
  for (std::size_t i = record_count - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.uniform_int(i + 1)]);

  std::vector<Split> out(record_count);
  std::size_t pos = 0;
  for (int s = 0; s < 3; ++s)
    for (std::size_t k = 0; k < counts[s]; ++k)
      out[idx[pos++]] = static_cast<Split>(s);
  return out;
}

EmbeddingTable random_embeddings(const Vocabulary& vocab, int dim,
                                 uint64_t seed) {
  EmbeddingTable emb;
  emb.table.resize(dim, vocab.size());
  for (int t = 0; t < vocab.size(); ++t) {
    Rng rng(derive_seed(seed, "embed.init:" + vocab.token(t)));
    for (int i = 0; i < dim; ++i)
      emb.table(i, t) = static_cast<float>(rng.uniform(-0.1, 0.1));
  }
  return emb;
}

EmbeddingTable load_embeddings(const std::string& path,
                               const Vocabulary& vocab, int dim,
                               uint64_t seed) {
  EmbeddingTable emb = random_embeddings(vocab, dim, seed);
  if (!fs::exists(path))
    fail(ErrorKind::missing_file, "embedding file not found: " + path);
  std::ifstream is(path);
  if (!is) fail(ErrorKind::missing_file, "cannot open embeddings: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<float> vals;
    float v;
    while (ss >> v) vals.push_back(v);
    if (!ss.eof() || static_cast<int>(vals.size()) != dim)
      fail(ErrorKind::format,
           "embedding line " + std::to_string(line_no) + ": expected token + " +
               std::to_string(dim) + " values");
    if (!vocab.contains(token)) continue;
    const int id = vocab.id(token);
    for (int i = 0; i < dim; ++i) emb.table(i, id) = vals[i];
  }
  return emb;
}

Dataset Dataset::load(const std::string& manifest_path) {
  Dataset ds;
  ds.records = load_manifest(manifest_path);
  ds.base_dir = fs::path(manifest_path).parent_path().string();
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    ds.by_video[ds.records[i].video_id].push_back(static_cast<int>(i));
  return ds;
}

std::string Dataset::resolve(const std::string& rel) const {
  fs::path p(rel);
  if (p.is_absolute() || base_dir.empty()) return rel;
  return (fs::path(base_dir) / p).string();
}

std::vector<int> Dataset::split_indices(Split s) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].split == s) out.push_back(static_cast<int>(i));
  return out;
}

const FeatureSequence& FeatureCache::sequence(const PairRecord& rec) {
  auto it = seqs_.find(rec.feature_path);
  if (it == seqs_.end())
    it = seqs_.emplace(rec.feature_path,
                       load_feature_sequence(ds_->resolve(rec.feature_path)))
             .first;
  return it->second;
}

const ClipFeatureSet& FeatureCache::clip(const PairRecord& rec) {
  auto it = clips_.find(rec.clip_feature_path);
  if (it == clips_.end())
    it = clips_.emplace(
                  rec.clip_feature_path,
                  load_clip_features(ds_->resolve(rec.clip_feature_path)))
             .first;
  return it->second;
}

}  // namespace viref
