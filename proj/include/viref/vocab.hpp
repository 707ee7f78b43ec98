#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "viref/types.hpp"

namespace viref {

inline constexpr int kStartId = 0;
inline constexpr int kEndId = 1;
inline constexpr int kUnkId = 2;
inline constexpr int kNilId = 3;
inline constexpr int kReservedCount = 4;

inline constexpr const char* kStartTok = "<start>";
inline constexpr const char* kEndTok = "<end>";
inline constexpr const char* kUnkTok = "<unk>";
inline constexpr const char* kNilTok = "<nil>";

// lowercase, whitespace split, punctuation split off as one-char tokens
std::vector<std::string> tokenize(const std::string& text);

class Vocabulary {
 public:
  // Tokens appearing at least twice in the training expressions, plus all
  // external words, plus the four reserved tokens. Order is reserved tokens
  // first, then alphabetical.
  static Vocabulary build(const std::vector<std::string>& train_refexps,
                          const std::vector<std::string>& external_words);

  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }

  // kUnkId for out-of-vocabulary tokens
  int id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnkId : it->second;
  }

  bool contains(const std::string& token) const {
    return ids_.count(token) != 0;
  }

  const std::string& token(int id) const {
    if (id < 0 || id >= size())
      fail(ErrorKind::contract, "vocabulary: id out of range");
    return tokens_[id];
  }

  const std::vector<std::string>& tokens() const { return tokens_; }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Encoded referring expression: <start> w_1 ... w_k <end>, optionally
// followed by <nil> padding in batch form (never before <end>).
struct TokenSequence {
  std::vector<int> ids;

  // words strictly between <start> and <end>
  int word_count() const { return static_cast<int>(ids.size()) - 2; }
  // prediction targets: the words plus <end>
  int target_count() const { return static_cast<int>(ids.size()) - 1; }

  void validate(int vocab_size) const;
};

TokenSequence encode_refexp(const std::string& text, const Vocabulary& vocab);
std::string decode_tokens(const TokenSequence& seq, const Vocabulary& vocab);

struct PaddedBatch {
  // all rows share one length: <start> w.. <end> <nil>..
  std::vector<std::vector<int>> rows;
  // one flag per prediction step (row length - 1); true when the target
  // position holds a real token or <end>
  std::vector<std::vector<bool>> masks;
  std::vector<std::size_t> kept;  // indices into the input list
  std::size_t dropped = 0;
};

// Drops sequences whose word count is max_len or greater, pads the rest
// with <nil> to the batch maximum.
PaddedBatch filter_and_pad(const std::vector<TokenSequence>& seqs,
                           int max_len = 25);

}  // namespace viref
