#pragma once

// Variable categories, the IOB tag alphabet and its well-formedness rules.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "valb/errors.hpp"

namespace valb {

/// Categories of dynamic variables. The first ten are the real taxonomy;
/// `Var` is a reserved pseudo-category used only by binary (static vs.
/// variable) annotations and models.
enum class Category : std::uint8_t {
  OID,  // object id
  LOI,  // location indicator
  OBN,  // object name
  TID,  // type indicator
  SID,  // switch indicator
  TDA,  // time/duration of an action
  CRS,  // computing resources
  OBA,  // object amount
  STC,  // status code
  OTP,  // other parameters
  Var,
};

inline constexpr std::size_t kNumCategories = 10;

inline constexpr std::array<Category, kNumCategories> kCategories = {
    Category::OID, Category::LOI, Category::OBN, Category::TID, Category::SID,
    Category::TDA, Category::CRS, Category::OBA, Category::STC, Category::OTP};

inline constexpr std::string_view abbreviation(Category c) {
  constexpr std::array<std::string_view, kNumCategories + 1> names = {
      "OID", "LOI", "OBN", "TID", "SID", "TDA",
      "CRS", "OBA", "STC", "OTP", "VAR"};
  return names[static_cast<std::size_t>(c)];
}

inline constexpr std::string_view category_name(Category c) {
  constexpr std::array<std::string_view, kNumCategories + 1> names = {
      "Object ID",
      "Location Indicator",
      "Object Name",
      "Type Indicator",
      "Switch Indicator",
      "Time/Duration of an Action",
      "Computing Resources",
      "Object Amount",
      "Status Code",
      "Other Parameters",
      "Variable"};
  return names[static_cast<std::size_t>(c)];
}

/// Parses one of the ten real abbreviations. "VAR" is accepted only when
/// `allow_pseudo` is set.
inline std::optional<Category> parse_category(std::string_view s,
                                              bool allow_pseudo = false) {
  for (Category c : kCategories)
    if (abbreviation(c) == s) return c;
  if (allow_pseudo && s == abbreviation(Category::Var)) return Category::Var;
  return std::nullopt;
}

enum class TagKind : std::uint8_t { Outside, Begin, Inside };

struct Tag {
  TagKind kind = TagKind::Outside;
  Category category = Category::OID;  // ignored when kind == Outside

  static constexpr Tag outside() { return {}; }
  static constexpr Tag begin(Category c) { return {TagKind::Begin, c}; }
  static constexpr Tag inside(Category c) { return {TagKind::Inside, c}; }

  constexpr bool is_outside() const { return kind == TagKind::Outside; }
  constexpr bool is_variable() const { return kind != TagKind::Outside; }

  friend constexpr bool operator==(const Tag& a, const Tag& b) {
    if (a.kind != b.kind) return false;
    return a.kind == TagKind::Outside || a.category == b.category;
  }
};

inline std::string to_string(const Tag& t) {
  switch (t.kind) {
    case TagKind::Outside:
      return "O";
    case TagKind::Begin:
      return "B-" + std::string(abbreviation(t.category));
    case TagKind::Inside:
      return "I-" + std::string(abbreviation(t.category));
  }
  return "O";
}

inline std::optional<Tag> parse_tag(std::string_view s) {
  if (s == "O") return Tag::outside();
  if (s.size() < 3 || s[1] != '-') return std::nullopt;
  auto cat = parse_category(s.substr(2), /*allow_pseudo=*/true);
  if (!cat) return std::nullopt;
  if (s[0] == 'B') return Tag::begin(*cat);
  if (s[0] == 'I') return Tag::inside(*cat);
  return std::nullopt;
}

/// Annotation scheme a model or tag set belongs to.
enum class Mode : std::uint8_t { Multiclass, Binary };

inline std::string_view to_string(Mode m) {
  return m == Mode::Multiclass ? "multiclass" : "binary";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "multiclass") return Mode::Multiclass;
  if (s == "binary") return Mode::Binary;
  return std::nullopt;
}

/// The 21-tag alphabet: O, then B-X, I-X for each category in taxonomy
/// order (B-OID, I-OID, B-LOI, I-LOI, ...). Model files store this ordering
/// and it is checked on load.
inline std::vector<Tag> tag_vocabulary() {
  std::vector<Tag> tags;
  tags.reserve(2 * kNumCategories + 1);
  tags.push_back(Tag::outside());
  for (Category c : kCategories) {
    tags.push_back(Tag::begin(c));
    tags.push_back(Tag::inside(c));
  }
  return tags;
}

/// O, B-VAR, I-VAR.
inline std::vector<Tag> binary_tag_vocabulary() {
  return {Tag::outside(), Tag::begin(Category::Var),
          Tag::inside(Category::Var)};
}

inline std::vector<Tag> tag_vocabulary(Mode mode) {
  return mode == Mode::Multiclass ? tag_vocabulary() : binary_tag_vocabulary();
}

/// `prev` is nullopt at sequence start; `next` is nullopt at sequence end.
/// An Inside tag must follow a Begin or Inside tag of the same category.
inline constexpr bool is_valid_transition(std::optional<Tag> prev,
                                          std::optional<Tag> next) {
  if (!next || next->kind != TagKind::Inside) return true;
  if (!prev || prev->kind == TagKind::Outside) return false;
  return prev->category == next->category;
}

inline bool is_well_formed(std::span<const Tag> tags) {
  std::optional<Tag> prev;
  for (const Tag& t : tags) {
    if (!is_valid_transition(prev, t)) return false;
    prev = t;
  }
  return true;
}

enum class BinaryTag : std::uint8_t { Static, Variable };

inline std::vector<BinaryTag> collapse_binary(std::span<const Tag> tags) {
  std::vector<BinaryTag> out;
  out.reserve(tags.size());
  for (const Tag& t : tags)
    out.push_back(t.is_outside() ? BinaryTag::Static : BinaryTag::Variable);
  return out;
}

/// Maps every variable tag onto the VAR pseudo-category, keeping B/I.
inline std::vector<Tag> collapse_to_pseudo(std::span<const Tag> tags) {
  std::vector<Tag> out(tags.begin(), tags.end());
  for (Tag& t : out)
    if (t.is_variable()) t.category = Category::Var;
  return out;
}

}  // namespace valb
