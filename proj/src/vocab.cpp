#include "viref/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

namespace viref {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c) && c != '<' && c != '>') {
      flush();
      out.push_back(std::string(1, static_cast<char>(c)));
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& train_refexps,
                             const std::vector<std::string>& external_words) {
  std::map<std::string, int> counts;
  for (const auto& re : train_refexps)
    for (const auto& tok : tokenize(re)) counts[tok] += 1;

  std::set<std::string> words;
  for (const auto& [tok, n] : counts)
    if (n >= 2) words.insert(tok);
  for (const auto& w : external_words)
    for (const auto& tok : tokenize(w)) words.insert(tok);

  std::vector<std::string> tokens = {kStartTok, kEndTok, kUnkTok, kNilTok};
  for (const auto& w : words) {
    if (w == kStartTok || w == kEndTok || w == kUnkTok || w == kNilTok)
      continue;
    tokens.push_back(w);
  }
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  if (v.tokens_.size() < kReservedCount ||
      v.tokens_[kStartId] != kStartTok || v.tokens_[kEndId] != kEndTok ||
      v.tokens_[kUnkId] != kUnkTok || v.tokens_[kNilId] != kNilTok)
    fail(ErrorKind::format,
         "vocabulary: reserved tokens missing or out of order");
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.ids_.emplace(v.tokens_[i], static_cast<int>(i)).second)
      fail(ErrorKind::format, "vocabulary: duplicate token " + v.tokens_[i]);
  }
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::missing_file, "cannot write vocabulary: " + path);
  for (const auto& t : tokens_) os << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  if (!std::filesystem::exists(path))
    fail(ErrorKind::missing_file, "vocabulary not found: " + path);
  std::ifstream is(path);
  if (!is) fail(ErrorKind::missing_file, "cannot open vocabulary: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

void TokenSequence::validate(int vocab_size) const {
  if (ids.size() < 2 || ids.front() != kStartId)
    fail(ErrorKind::contract, "token sequence must begin with <start>");
  bool seen_end = false;
  for (std::size_t i = 1; i < ids.size(); ++i) {
    const int t = ids[i];
    if (t < 0 || t >= vocab_size)
      fail(ErrorKind::contract, "token id out of range");
    if (!seen_end) {
      if (t == kNilId)
        fail(ErrorKind::contract, "padding before <end> in token sequence");
      if (t == kEndId) seen_end = true;
    } else if (t != kNilId) {
      fail(ErrorKind::contract, "real token after <end>");
    }
  }
  if (!seen_end)
    fail(ErrorKind::contract, "token sequence has no <end>");
}

TokenSequence encode_refexp(const std::string& text,
                            const Vocabulary& vocab) {
  const auto words = tokenize(text);
  if (words.empty())
    fail(ErrorKind::contract, "encode_refexp: empty referring expression");
  TokenSequence seq;
  seq.ids.reserve(words.size() + 2);
  seq.ids.push_back(kStartId);
  for (const auto& w : words) seq.ids.push_back(vocab.id(w));
  seq.ids.push_back(kEndId);
  return seq;
}

std::string decode_tokens(const TokenSequence& seq, const Vocabulary& vocab) {
  std::string out;
  for (int t : seq.ids) {
    if (t == kStartId || t == kNilId) continue;
    if (t == kEndId) break;
    if (!out.empty()) out += ' ';
    out += vocab.token(t);
  }
  return out;
}

PaddedBatch filter_and_pad(const std::vector<TokenSequence>& seqs,
                           int max_len) {
  if (max_len < 2)
    fail(ErrorKind::config, "filter_and_pad: max_len must be at least 2");
  PaddedBatch batch;
  std::size_t width = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (seqs[i].word_count() >= max_len) {
      ++batch.dropped;
      continue;
    }
    batch.kept.push_back(i);
    width = std::max(width, seqs[i].ids.size());
  }
  if (batch.kept.empty())
    fail(ErrorKind::degenerate,
         "filter_and_pad: every sequence exceeded max_len");
  for (std::size_t i : batch.kept) {
    std::vector<int> row = seqs[i].ids;
    row.resize(width, kNilId);
    std::vector<bool> mask(width - 1);
    for (std::size_t j = 0; j + 1 < width; ++j) mask[j] = row[j + 1] != kNilId;
    batch.rows.push_back(std::move(row));
    batch.masks.push_back(std::move(mask));
  }
  return batch;
}

}  // namespace viref
