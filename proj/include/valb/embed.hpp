#pragma once

// Word and character vocabularies, pretrained vector loading, and the
// numeric encoding of a log for the tagger.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "valb/corpus.hpp"
#include "valb/errors.hpp"
#include "valb/tensor.hpp"
#include "valb/util.hpp"

namespace valb {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;

/// ASCII lowercasing; other bytes are left untouched.
inline std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

class WordVocab {
 public:
  WordVocab() : words_{"<pad>", "<unk>"} {}

  /// Builds from words in index order; entries 0 and 1 must be the
  /// reserved PAD and UNK markers.
  static WordVocab from_words(std::vector<std::string> words, int min_freq = 1) {
    if (words.size() < 2 || words[0] != "<pad>" || words[1] != "<unk>")
      throw FormatError("word vocabulary must start with <pad>, <unk>");
    WordVocab v;
    v.words_ = std::move(words);
    v.min_freq_ = min_freq;
    for (std::size_t i = 2; i < v.words_.size(); ++i)
      if (!v.index_.emplace(v.words_[i], static_cast<int>(i)).second)
        throw FormatError("duplicate vocabulary word '" + v.words_[i] + "'");
    return v;
  }

  int add(const std::string& word) {
    auto [it, inserted] = index_.emplace(word, static_cast<int>(words_.size()));
    if (inserted) words_.push_back(word);
    return it->second;
  }

  /// Lookup of an already-lowercased word.
  int id(std::string_view word) const {
    auto it = index_.find(std::string(word));
    return it == index_.end() ? kUnkId : it->second;
  }
  int lookup(std::string_view token) const { return id(lowercase(token)); }
  bool contains(std::string_view word) const {
    return index_.count(std::string(word)) > 0;
  }

  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& words() const { return words_; }
  std::size_t size() const { return words_.size(); }
  int min_freq() const { return min_freq_; }

  friend bool operator==(const WordVocab& a, const WordVocab& b) {
    return a.words_ == b.words_ && a.min_freq_ == b.min_freq_;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
  int min_freq_ = 1;
};

/// Characters are Unicode code points, case preserved.
class CharVocab {
 public:
  CharVocab() : chars_{0, 0} {}

  static CharVocab from_chars(std::span<const char32_t> chars) {
    CharVocab v;
    for (char32_t c : chars)
      if (!v.index_.emplace(c, static_cast<int>(v.chars_.size())).second)
        throw FormatError("duplicate character in vocabulary");
      else
        v.chars_.push_back(c);
    return v;
  }

  int add(char32_t c) {
    auto [it, inserted] = index_.emplace(c, static_cast<int>(chars_.size()));
    if (inserted) chars_.push_back(c);
    return it->second;
  }

  int id(char32_t c) const {
    auto it = index_.find(c);
    return it == index_.end() ? kUnkId : it->second;
  }

  /// Characters in index order, excluding the two reserved entries.
  std::vector<char32_t> characters() const {
    return {chars_.begin() + 2, chars_.end()};
  }
  std::size_t size() const { return chars_.size(); }

  friend bool operator==(const CharVocab& a, const CharVocab& b) {
    return a.chars_ == b.chars_;
  }

 private:
  std::vector<char32_t> chars_;  // [0] and [1] are placeholders for PAD/UNK
  std::unordered_map<char32_t, int> index_;
};

/// Words with at least `min_freq` lowercased occurrences enter the word
/// vocabulary in first-seen order; every character seen enters the char
/// vocabulary in first-seen order.
inline std::pair<WordVocab, CharVocab> build_vocabs(
    std::span<const AnnotatedLog> train, int min_freq = 1) {
  if (train.empty()) throw std::invalid_argument("empty training set");
  if (min_freq < 1) throw std::invalid_argument("min_freq must be >= 1");
  std::unordered_map<std::string, int> counts;
  std::vector<std::string> order;
  CharVocab chars;
  for (const auto& log : train) {
    for (const auto& tok : log.tokens) {
      std::string w = lowercase(tok);
      if (counts[w]++ == 0) order.push_back(std::move(w));
      for (char32_t c : decode_utf8(tok)) chars.add(c);
    }
  }
  std::vector<std::string> words = {"<pad>", "<unk>"};
  for (auto& w : order)
    if (counts[w] >= min_freq) words.push_back(std::move(w));
  return {WordVocab::from_words(std::move(words), min_freq), std::move(chars)};
}

// ---------------------------------------------------------------------------

struct PretrainedVectors {
  int dimension = 0;
  std::unordered_map<std::string, std::vector<float>> vectors;
};

/// Reads "word f1 ... fD" lines. A leading "<count> <dim>" header line (as
/// written by word2vec) is skipped.
inline PretrainedVectors parse_word_vectors(std::string_view text, int dim) {
  PretrainedVectors out;
  out.dimension = dim;
  const auto lines = split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    std::vector<std::string_view> fields;
    std::string_view line = lines[n];
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && is_space(line[i])) ++i;
      std::size_t start = i;
      while (i < line.size() && !is_space(line[i])) ++i;
      if (i > start) fields.push_back(line.substr(start, i - start));
    }
    if (fields.empty()) continue;
    if (n == 0 && fields.size() == 2) {
      long a = 0, b = 0;
      auto r1 = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), a);
      auto r2 = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), b);
      if (r1.ec == std::errc() && r2.ec == std::errc() &&
          r1.ptr == fields[0].data() + fields[0].size() &&
          r2.ptr == fields[1].data() + fields[1].size())
        continue;
    }
    if (fields.size() != static_cast<std::size_t>(dim) + 1) {
      if (fields.size() >= 2)
        throw DimensionMismatch("line " + std::to_string(n + 1) + ": expected " +
                                std::to_string(dim) + " values, got " +
                                std::to_string(fields.size() - 1));
      throw FormatError("expected 'word f1 ... fD'", n + 1);
    }
    std::vector<float> vec(static_cast<std::size_t>(dim));
    for (int d = 0; d < dim; ++d) {
      const auto f = fields[static_cast<std::size_t>(d) + 1];
      // from_chars for floating point is available in libstdc++ 11.
      auto res = std::from_chars(f.data(), f.data() + f.size(), vec[static_cast<std::size_t>(d)]);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size() ||
          !std::isfinite(vec[static_cast<std::size_t>(d)]))
        throw FormatError("bad number '" + std::string(f) + "'", n + 1);
    }
    out.vectors.emplace(std::string(fields[0]), std::move(vec));
  }
  return out;
}

struct EmbeddingInit {
  Matrix<float> matrix;   // |vocab| x dim
  double coverage = 0.0;  // found / (|vocab| - 2)
  std::size_t found = 0;
};

/// Rows of vocabulary words present in `vectors` are copied; other rows
/// are uniform in [-0.25, 0.25]; the PAD row is zero.
inline EmbeddingInit make_embedding_matrix(const PretrainedVectors* vectors,
                                           const WordVocab& vocab, int dim,
                                           Rng& rng) {
  if (vectors && vectors->dimension != dim)
    throw DimensionMismatch("pretrained vectors have dimension " +
                            std::to_string(vectors->dimension) + ", expected " +
                            std::to_string(dim));
  EmbeddingInit out;
  out.matrix.resize(static_cast<Eigen::Index>(vocab.size()), dim);
  for (Eigen::Index r = 0; r < out.matrix.rows(); ++r)
    for (Eigen::Index c = 0; c < dim; ++c)
      out.matrix(r, c) = static_cast<float>(rng.uniform(-0.25, 0.25));
  out.matrix.row(kPadId).setZero();
  if (vectors) {
    for (std::size_t i = 2; i < vocab.size(); ++i) {
      auto it = vectors->vectors.find(vocab.word(static_cast<int>(i)));
      if (it == vectors->vectors.end()) continue;
      for (int c = 0; c < dim; ++c)
        out.matrix(static_cast<Eigen::Index>(i), c) = it->second[static_cast<std::size_t>(c)];
      ++out.found;
    }
  }
  out.coverage = vocab.size() > 2 ? double(out.found) / double(vocab.size() - 2) : 0.0;
  return out;
}

inline EmbeddingInit load_word_vectors(const std::filesystem::path& path,
                                       const WordVocab& vocab, int dim,
                                       std::uint64_t seed = 42) {
  const PretrainedVectors vecs = parse_word_vectors(read_file(path), dim);
  Rng rng(seed);
  return make_embedding_matrix(&vecs, vocab, dim, rng);
}

// ---------------------------------------------------------------------------

struct EncodedLog {
  std::vector<int> word_ids;      // length T
  IdMatrix char_ids;              // T x max_word_len, PAD right-padded
  std::vector<int> char_lengths;  // non-PAD prefix length per token
  std::size_t truncated = 0;      // tokens cut to max_word_len

  std::size_t token_count() const { return word_ids.size(); }
};

inline EncodedLog encode_tokens(std::span<const Token> tokens,
                                const WordVocab& wv, const CharVocab& cv,
                                int max_word_len) {
  if (max_word_len < 1) throw std::invalid_argument("max_word_len must be >= 1");
  if (tokens.empty()) throw EmptyLog();
  EncodedLog enc;
  const auto T = static_cast<Eigen::Index>(tokens.size());
  enc.word_ids.reserve(tokens.size());
  enc.char_ids = IdMatrix::Constant(T, max_word_len, kPadId);
  enc.char_lengths.resize(tokens.size());
  for (Eigen::Index t = 0; t < T; ++t) {
    const Token& tok = tokens[static_cast<std::size_t>(t)];
    enc.word_ids.push_back(wv.lookup(tok));
    const std::u32string chars = decode_utf8(tok);
    const auto len = std::min<std::size_t>(chars.size(), static_cast<std::size_t>(max_word_len));
    if (chars.size() > len) ++enc.truncated;
    for (std::size_t p = 0; p < len; ++p)
      enc.char_ids(t, static_cast<Eigen::Index>(p)) = cv.id(chars[p]);
    enc.char_lengths[static_cast<std::size_t>(t)] = static_cast<int>(len);
  }
  return enc;
}

inline EncodedLog encode_log(const AnnotatedLog& log, const WordVocab& wv,
                             const CharVocab& cv, int max_word_len) {
  return encode_tokens(log.tokens, wv, cv, max_word_len);
}

}  // namespace valb
