#pragma once

// Model container:
//
//   "VALB" | u32 format version | u64 metadata length | metadata (JSON, UTF-8)
//   | u32 tensor count | tensors... | u64 FNV-1a checksum of all prior bytes
//
// Each tensor is: u32 name length | name | u32 rank | u64 dims[rank] |
// float32 values, row-major. All integers and floats are little-endian.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "valb/errors.hpp"
#include "valb/model.hpp"
#include "valb/taxonomy.hpp"
#include "valb/util.hpp"

namespace valb {

inline constexpr char kModelMagic[4] = {'V', 'A', 'L', 'B'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "model I/O assumes a little-endian host");

namespace detail {

class ByteWriter {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void put_bytes(std::string_view s) { buf_.append(s); }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view get_bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError("model file ends unexpectedly");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

inline nlohmann::json metadata(const Hyperparams& hp, Mode mode,
                               const std::vector<Tag>& tags, const WordVocab& words,
                               const CharVocab& chars) {
  nlohmann::json j;
  j["mode"] = to_string(mode);
  j["n_tags"] = tags.size();
  j["hyperparams"] = {{"word_dim", hp.word_dim},
                      {"char_emb_dim", hp.char_emb_dim},
                      {"char_filters", hp.char_filters},
                      {"char_kernel", hp.char_kernel},
                      {"lstm_hidden", hp.lstm_hidden},
                      {"dropout", hp.dropout},
                      {"max_word_len", hp.max_word_len},
                      {"use_char", hp.use_char}};
  auto& t = j["tags"] = nlohmann::json::array();
  for (const Tag& tag : tags) t.push_back(to_string(tag));
  j["word_vocab"] = words.words();
  j["word_min_freq"] = words.min_freq();
  auto& c = j["char_vocab"] = nlohmann::json::array();
  for (char32_t ch : chars.characters()) c.push_back(static_cast<std::uint32_t>(ch));
  return j;
}

}  // namespace detail

inline std::string serialize_model(const TaggerModel<float>& model) {
  detail::ByteWriter w;
  w.put_bytes(std::string_view(kModelMagic, 4));
  w.put<std::uint32_t>(kModelFormatVersion);
  const std::string meta =
      detail::metadata(model.hp, model.mode, model.tags, model.words, model.chars)
          .dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  w.put<std::uint64_t>(meta.size());
  w.put_bytes(meta);

  std::uint32_t count = 0;
  model.visit([&](std::string_view, const auto&, const auto&) { ++count; });
  w.put<std::uint32_t>(count);
  model.visit([&](std::string_view name, const auto& tensor, const auto& shape) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) w.put<std::uint64_t>(static_cast<std::uint64_t>(d));
    w.put_bytes(std::string_view(reinterpret_cast<const char*>(tensor.data()),
                                 static_cast<std::size_t>(tensor.size()) * sizeof(float)));
  });
  const std::string& buf = w.buffer();
  w.put<std::uint64_t>(fnv1a64(buf));
  return std::move(w.buffer());
}

inline TaggerModel<float> deserialize_model(std::string_view data) {
  if (data.size() < 4 || std::memcmp(data.data(), kModelMagic, 4) != 0)
    throw FormatError("not a model file (bad magic)");
  if (data.size() < 4 + 4 + 8)
    throw ChecksumError("model file truncated");
  const std::string_view body = data.substr(0, data.size() - 8);
  std::uint64_t stored;
  std::memcpy(&stored, data.data() + body.size(), 8);
  if (fnv1a64(body) != stored) throw ChecksumError("model file checksum mismatch");

  detail::ByteReader r(body);
  r.get_bytes(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kModelFormatVersion)
    throw VersionError("unsupported model format version " + std::to_string(version));

  const auto meta_len = r.get<std::uint64_t>();
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.get_bytes(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad model metadata: ") + e.what());
  }

  TaggerModel<float> m;
  try {
    const auto mode = parse_mode(meta.at("mode").get<std::string>());
    if (!mode) throw FormatError("unknown model mode");
    m.mode = *mode;
    const auto& h = meta.at("hyperparams");
    m.hp.word_dim = h.at("word_dim");
    m.hp.char_emb_dim = h.at("char_emb_dim");
    m.hp.char_filters = h.at("char_filters");
    m.hp.char_kernel = h.at("char_kernel");
    m.hp.lstm_hidden = h.at("lstm_hidden");
    m.hp.dropout = h.at("dropout");
    m.hp.max_word_len = h.at("max_word_len");
    m.hp.use_char = h.at("use_char");
    for (const auto& t : meta.at("tags")) {
      auto tag = parse_tag(t.get<std::string>());
      if (!tag) throw FormatError("unknown tag in model metadata");
      m.tags.push_back(*tag);
    }
    if (m.tags != tag_vocabulary(m.mode))
      throw FormatError("model tag ordering does not match the " +
                        std::string(to_string(m.mode)) + " tag vocabulary");
    if (meta.at("n_tags").get<std::size_t>() != m.tags.size())
      throw FormatError("n_tags does not match tag list");
    m.words = WordVocab::from_words(meta.at("word_vocab").get<std::vector<std::string>>(),
                                    meta.value("word_min_freq", 1));
    std::vector<char32_t> chars;
    for (const auto& c : meta.at("char_vocab")) chars.push_back(c.get<std::uint32_t>());
    m.chars = CharVocab::from_chars(chars);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad model metadata: ") + e.what());
  }
  m.hp.validate();

  std::map<std::string, std::pair<std::vector<std::uint64_t>, std::vector<float>>> tensors;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name(r.get_bytes(name_len));
    const auto rank = r.get<std::uint32_t>();
    std::vector<std::uint64_t> dims(rank);
    std::uint64_t total = 1;
    for (auto& d : dims) {
      d = r.get<std::uint64_t>();
      total *= d;
    }
    std::vector<float> values(total);
    const auto bytes = r.get_bytes(total * sizeof(float));
    std::memcpy(values.data(), bytes.data(), bytes.size());
    tensors[name] = {std::move(dims), std::move(values)};
  }
  if (!r.done()) throw FormatError("trailing bytes after tensors");

  // Shapes implied by the metadata.
  const auto n = static_cast<Eigen::Index>(m.tags.size());
  const Eigen::Index H = m.hp.lstm_hidden, in = m.hp.input_dim();
  auto& p = m.params;
  if (m.hp.use_char) {
    p.char_embedding.resize(static_cast<Eigen::Index>(m.chars.size()), m.hp.char_emb_dim);
    p.conv_kernel.resize(m.hp.char_kernel * m.hp.char_emb_dim, m.hp.char_filters);
    p.conv_bias.resize(m.hp.char_filters);
  }
  p.word_embedding.resize(static_cast<Eigen::Index>(m.words.size()), m.hp.word_dim);
  p.fw_input.resize(4 * H, in);
  p.bw_input.resize(4 * H, in);
  p.fw_recurrent.resize(4 * H, H);
  p.bw_recurrent.resize(4 * H, H);
  p.fw_bias.resize(4 * H);
  p.bw_bias.resize(4 * H);
  p.projection.resize(n, 2 * H);
  p.projection_bias.resize(n);
  p.transitions.resize(n, n);
  p.start.resize(n);
  p.end.resize(n);

  std::size_t used = 0;
  m.visit([&](std::string_view name, auto& tensor, const auto& shape) {
    auto it = tensors.find(std::string(name));
    if (it == tensors.end()) throw FormatError("missing tensor " + std::string(name));
    const auto& [dims, values] = it->second;
    if (dims.size() != shape.size() ||
        !std::equal(dims.begin(), dims.end(), shape.begin(),
                    [](std::uint64_t a, std::int64_t b) { return a == static_cast<std::uint64_t>(b); }))
      throw FormatError("tensor " + std::string(name) + " has unexpected shape");
    std::memcpy(tensor.data(), values.data(), values.size() * sizeof(float));
    if (!tensor.allFinite()) throw FormatError("tensor " + std::string(name) + " has non-finite values");
    ++used;
  });
  if (used != tensors.size()) throw FormatError("unexpected extra tensors");
  return m;
}

/// Atomic write (temporary file, then rename).
inline void save_model(const TaggerModel<float>& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(model));
}

inline TaggerModel<float> load_model(const std::filesystem::path& path) {
  return deserialize_model(read_file(path));
}

}  // namespace valb
