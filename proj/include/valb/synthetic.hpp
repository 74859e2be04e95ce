#pragma once

// Seeded synthetic log corpora with ground-truth tags: random templates of
// static words and typed variable slots, filled with values whose lexical
// shape follows the slot category.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "valb/corpus.hpp"
#include "valb/taxonomy.hpp"
#include "valb/util.hpp"

namespace valb {

struct SyntheticOptions {
  std::uint64_t seed = 42;
  std::size_t n_templates = 20;
  std::size_t n_logs = 2000;
  /// The static-word lexicon is split into `lexicon_partitions` disjoint
  /// parts; templates draw static words from part `family` only. Corpora
  /// from different families share no static words.
  std::size_t lexicon_partitions = 1;
  std::size_t family = 0;
  /// When set, every slot of an id-like category (OID, OBN, OTP) draws its
  /// category and shape per log from those three, so the surrounding words
  /// no longer tell the categories apart; only the value's shape does.
  bool mixed_id_slots = false;
};

/// Categories whose values are identifier-shaped strings.
inline constexpr std::array<Category, 3> kIdLikeCategories = {Category::OID, Category::OBN,
                                                              Category::OTP};

struct TemplateSlot {
  Category category;
  int style;  // index of the value shape used by this slot
  bool mixed = false;  // category redrawn per log among kIdLikeCategories
};

/// One template element: a static word, or a slot when `slot` is set.
struct TemplatePart {
  std::string word;
  std::optional<TemplateSlot> slot;
};

struct SyntheticTemplate {
  std::vector<TemplatePart> parts;

  /// Static words verbatim, each slot as "<*>".
  std::string canonical() const {
    std::string out;
    for (const auto& p : parts) {
      if (!out.empty()) out += ' ';
      out += p.slot ? "<*>" : p.word;
    }
    return out;
  }
  /// Static words verbatim, each slot as "<ABBREV>".
  std::string pattern() const {
    std::string out;
    for (const auto& p : parts) {
      if (!out.empty()) out += ' ';
      if (!p.slot)
        out += p.word;
      else if (p.slot->mixed)
        out += "<ID>";
      else
        out += "<" + std::string(abbreviation(p.slot->category)) + ">";
    }
    return out;
  }
};

struct GeneratorSpec {
  SyntheticOptions options;
  std::vector<SyntheticTemplate> templates;
  /// Index into `templates` for each generated log.
  std::vector<std::size_t> log_template;
  /// Variable occurrences per category over the generated logs.
  std::map<Category, std::size_t> category_counts;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["seed"] = options.seed;
    j["n_templates"] = options.n_templates;
    j["n_logs"] = options.n_logs;
    j["lexicon_partitions"] = options.lexicon_partitions;
    j["family"] = options.family;
    j["mixed_id_slots"] = options.mixed_id_slots;
    auto& ts = j["templates"] = nlohmann::json::array();
    for (std::size_t i = 0; i < templates.size(); ++i) {
      std::size_t count = 0;
      for (std::size_t t : log_template) count += (t == i);
      nlohmann::json slots = nlohmann::json::array();
      for (const auto& p : templates[i].parts)
        if (p.slot)
          slots.push_back({{"category", p.slot->mixed ? std::string("ID")
                                                      : std::string(abbreviation(p.slot->category))},
                           {"style", p.slot->style}});
      ts.push_back({{"id", i},
                    {"pattern", templates[i].pattern()},
                    {"canonical", templates[i].canonical()},
                    {"slots", slots},
                    {"count", count}});
    }
    auto& cc = j["category_counts"] = nlohmann::json::object();
    for (Category c : kCategories) {
      auto it = category_counts.find(c);
      cc[std::string(abbreviation(c))] =
          it == category_counts.end() ? 0 : it->second;
    }
    return j;
  }
};

struct SyntheticCorpus {
  std::vector<AnnotatedLog> logs;
  GeneratorSpec spec;
};

namespace detail {

inline constexpr std::string_view kLexicon[] = {
    "Starting", "executor", "ID", "on", "host", "Took",
    "seconds", "to", "spawn", "the", "instance", "hypervisor",
    "Added", "attempt", "list", "of", "failed", "maps",
    "Adding", "path", "spec", "domain", "is", "full",
    "Using", "configuration", "type", "Saw", "change", "in",
    "network", "reachability", "Scheduled", "snapshot", "period", "at",
    "Combo", "kernel", "LOWMEM", "available", "Total", "ddr",
    "errors", "detected", "and", "corrected", "child", "workerEnv",
    "error", "state", "payload", "Data", "Receiving", "block",
    "src", "dest", "PacketResponder", "for", "terminating", "Verification",
    "succeeded", "Deleting", "file", "Served", "Connection", "closed",
    "by", "session", "opened", "user", "authentication", "failure",
    "Accepted", "password", "from", "port", "Invalid", "Received",
    "disconnect", "Registered", "signal", "handler", "Got", "assigned",
    "task", "Running", "stage", "Finished", "bytes", "result",
    "sent", "driver", "Removed", "broadcast", "memory", "Block",
    "stored", "as", "values", "estimated", "size", "free",
    "Successfully", "started", "service", "listening", "Stopping", "container",
    "Container", "transitioned", "Assigned", "Launching", "Reading", "variable",
    "took", "ms", "Input", "split", "Memory", "limit",
    "exceeded", "Killing", "process", "tree", "Job", "completed",
    "Application", "submitted", "queue", "Resource", "request", "granted",
    "Node", "heartbeat", "timeout", "Lost", "Reconnecting", "Shutting",
    "down", "Cleaning", "up", "temporary", "directory", "Opened",
    "socket", "Closed", "Created", "table", "Dropped", "index",
    "Flushing", "region", "Compaction", "Split", "Replica", "synced",
    "leader", "follower", "election", "Voting", "term", "Sending",
    "notification", "Interrupted", "while", "waiting", "Failed", "connect",
    "Retrying", "Backoff", "Caught", "exception", "Unable", "resolve",
    "address", "Mounted", "filesystem", "Unmounted", "device", "Power",
    "supply", "fan", "speed", "temperature", "threshold", "crossed",
    "Interface", "link", "Generating", "core", "Loading", "module",
    "Unloading", "Checking", "integrity", "Verified", "checksum", "Writing",
    "record", "cache", "miss", "hit", "ratio", "Evicted",
    "entry", "Registering", "worker", "Heartbeat", "received", "Released",
    "lock", "Acquired", "Waiting", "Updating", "status", "Refreshing",
    "token", "Expired", "credentials", "Renewed", "lease", "Scanning",
    "volume", "Reported", "usage", "Allocated", "buffer", "Dispatching",
    "event", "Queued", "message", "Delivered", "packet", "frame",
    "Rebuilt", "route", "Bound", "listener", "Pinging", "peer",
    "Handshake",
};

/// Number of value shapes per category.
inline constexpr std::array<int, kNumCategories> kStyles = {4, 4, 4, 2, 4,
                                                            5, 3, 1, 3, 3};

inline std::string digits(Rng& rng, int n) {
  std::string s;
  for (int i = 0; i < n; ++i)
    s.push_back(static_cast<char>('0' + rng.below(i == 0 ? 9 : 10) + (i == 0)));
  return s;
}

inline std::string hex(Rng& rng, int n) {
  static constexpr char h[] = "0123456789abcdef";
  std::string s;
  for (int i = 0; i < n; ++i) s.push_back(h[rng.below(16)]);
  return s;
}

inline std::string alnum(Rng& rng, int n) {
  static constexpr char a[] = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::string s;
  for (int i = 0; i < n; ++i) s.push_back(a[rng.below(36)]);
  return s;
}

inline std::string lower_word(Rng& rng, int lo, int hi) {
  std::string s;
  const auto n = rng.between(lo, hi);
  for (int i = 0; i < n; ++i)
    s.push_back(static_cast<char>('a' + rng.below(26)));
  return s;
}

inline std::string two_digit(std::int64_t v) {
  return (v < 10 ? "0" : "") + std::to_string(v);
}

/// Tokens of one value for a slot.
inline std::vector<std::string> fill_slot(const TemplateSlot& slot, Rng& rng) {
  const int style = slot.style;
  switch (slot.category) {
    case Category::OID:
      switch (style) {
        case 0:
          return {digits(rng, static_cast<int>(rng.between(6, 13)))};
        case 1:
          return {"blk_" + std::string(rng.bernoulli(0.5) ? "-" : "") +
                  digits(rng, static_cast<int>(rng.between(10, 19)))};
        case 2:
          return {"0x" + hex(rng, static_cast<int>(rng.between(4, 8)))};
        default:
          return {hex(rng, 8) + "-" + hex(rng, 4) + "-" + hex(rng, 4)};
      }
    case Category::LOI:
      switch (style) {
        case 0: {
          std::string p;
          const auto depth = rng.between(1, 4);
          for (int i = 0; i < depth; ++i) p += "/" + lower_word(rng, 3, 8);
          return {p};
        }
        case 1:
          return {"10." + std::to_string(rng.below(256)) + "." +
                  std::to_string(rng.below(256)) + "." +
                  std::to_string(rng.below(256))};
        case 2:
          return {std::to_string(rng.between(10, 223)) + "." +
                  std::to_string(rng.below(256)) + "." +
                  std::to_string(rng.below(256)) + "." +
                  std::to_string(rng.below(256)) + ":" +
                  std::to_string(rng.between(1024, 65535))};
        default:
          return {"hdfs://" + lower_word(rng, 4, 8) + ":" +
                  std::to_string(rng.between(8000, 9999)) + "/" +
                  lower_word(rng, 3, 8)};
      }
    case Category::OBN:
      switch (style) {
        case 0:
          return {lower_word(rng, 3, 6) + "-" + two_digit(rng.between(0, 99))};
        case 1:
          return {lower_word(rng, 3, 6) + std::to_string(rng.between(1, 99)) +
                  "-" + lower_word(rng, 3, 6)};
        case 2:
          return {"job_" + lower_word(rng, 4, 8)};
        default:
          return {lower_word(rng, 2, 4) + "-" + lower_word(rng, 3, 6) + "-" +
                  std::to_string(rng.between(1, 9))};
      }
    case Category::TID:
      if (style == 0) return {std::to_string(rng.between(0, 9))};
      return {"T" + std::to_string(rng.between(1, 20))};
    case Category::SID: {
      static constexpr std::array<std::array<std::string_view, 2>, 4> pairs = {
          {{"true", "false"}, {"0", "1"}, {"on", "off"}, {"enabled", "disabled"}}};
      return {std::string(pairs[static_cast<std::size_t>(style)][rng.below(2)])};
    }
    case Category::TDA:
      switch (style) {
        case 0:
          return {std::to_string(rng.between(1, 3600))};
        case 1:
          return {std::to_string(rng.between(0, 99)) + "." +
                  digits(rng, 3).substr(0, 3)};
        case 2:
          return {std::to_string(rng.between(1, 999)) + "ms"};
        case 3:
          return {"2015-" + two_digit(rng.between(1, 12)) + "-" +
                      two_digit(rng.between(1, 28)),
                  two_digit(rng.between(0, 23)) + ":" +
                      two_digit(rng.between(0, 59)) + ":" +
                      two_digit(rng.between(0, 59))};
        default:
          return {two_digit(rng.between(0, 23)) + ":" +
                  two_digit(rng.between(0, 59)) + ":" +
                  two_digit(rng.between(0, 59))};
      }
    case Category::CRS:
      switch (style) {
        case 0: {
          static constexpr std::array<std::string_view, 3> units = {"MB", "KB",
                                                                    "GB"};
          return {std::to_string(rng.between(1, 4096)) +
                  std::string(units[rng.below(3)])};
        }
        case 1:
          return {std::to_string(rng.between(0, 100)) + "%"};
        default:
          return {"cpu" + std::to_string(rng.between(0, 63))};
      }
    case Category::OBA:
      return {std::to_string(rng.between(0, 100000))};
    case Category::STC:
      switch (style) {
        case 0: {
          static constexpr std::array<int, 8> codes = {200, 201, 204, 301,
                                                       400, 403, 404, 500};
          return {std::to_string(codes[rng.below(codes.size())])};
        }
        case 1:
          return {std::to_string(rng.between(-5, 15))};
        default:
          return {"E" + std::to_string(rng.between(100, 999))};
      }
    case Category::OTP:
      switch (style) {
        case 0:
          return {"0" + digits(rng, 3)};
        case 1:
          return {alnum(rng, static_cast<int>(rng.between(3, 7)))};
        default:
          return {lower_word(rng, 2, 4) + "=" + alnum(rng, 3)};
      }
    case Category::Var:
      break;
  }
  return {alnum(rng, 5)};
}

}  // namespace detail

/// Generates `n_logs` annotated logs from `n_templates` random templates.
/// Each template has 2-8 static words and 1-4 non-adjacent slots; slot
/// categories cycle through shuffled permutations of all ten categories, so
/// every category is present once there are at least ten slots. Templates
/// are used in equal proportion (up to one) and the log order is shuffled.
inline SyntheticCorpus generate_synthetic(const SyntheticOptions& opts) {
  if (opts.n_templates < 5)
    throw std::invalid_argument("generate_synthetic needs n_templates >= 5");
  if (opts.n_logs < 10 * opts.n_templates)
    throw std::invalid_argument("generate_synthetic needs n_logs >= 10 * n_templates");
  if (opts.lexicon_partitions == 0 || opts.family >= opts.lexicon_partitions)
    throw std::invalid_argument("family must be < lexicon_partitions");

  Rng rng(opts.seed);
  std::vector<std::string_view> lexicon;
  for (std::size_t i = 0; i < std::size(detail::kLexicon); ++i)
    if (i % opts.lexicon_partitions == opts.family)
      lexicon.push_back(detail::kLexicon[i]);

  // Shapes first: static word count and slot count per template.
  std::vector<int> n_static(opts.n_templates), n_slots(opts.n_templates);
  std::size_t total_slots = 0;
  for (std::size_t t = 0; t < opts.n_templates; ++t) {
    n_static[t] = static_cast<int>(rng.between(2, 8));
    n_slots[t] = static_cast<int>(
        std::min<std::int64_t>(rng.between(1, 4), n_static[t] + 1));
    total_slots += n_slots[t];
  }
  for (std::size_t t = 0; total_slots < kNumCategories; t = (t + 1) % opts.n_templates) {
    if (n_slots[t] < std::min(4, n_static[t] + 1)) {
      ++n_slots[t];
      ++total_slots;
    }
  }
  std::vector<Category> slot_categories;
  while (slot_categories.size() < total_slots) {
    std::vector<Category> perm(kCategories.begin(), kCategories.end());
    rng.shuffle(perm);
    slot_categories.insert(slot_categories.end(), perm.begin(), perm.end());
  }

  SyntheticCorpus out;
  out.spec.options = opts;
  std::set<std::string> seen;
  std::size_t next_slot = 0;
  for (std::size_t t = 0; t < opts.n_templates; ++t) {
    SyntheticTemplate tmpl;
    do {
      tmpl.parts.clear();
      // Slots go into gaps between static words; gap 0 (before the first
      // word) only when the other gaps are exhausted.
      std::vector<int> gaps;
      for (int g = 1; g <= n_static[t]; ++g) gaps.push_back(g);
      rng.shuffle(gaps);
      if (n_slots[t] > n_static[t]) gaps.push_back(0);
      std::vector<bool> slot_at(static_cast<std::size_t>(n_static[t]) + 1, false);
      for (int s = 0; s < n_slots[t]; ++s) slot_at[static_cast<std::size_t>(gaps[s])] = true;

      std::size_t k = next_slot;
      for (int g = 0; g <= n_static[t]; ++g) {
        if (slot_at[static_cast<std::size_t>(g)]) {
          const Category c = slot_categories[k++];
          const int style = static_cast<int>(
              rng.below(detail::kStyles[static_cast<std::size_t>(c)]));
          const bool mixed =
              opts.mixed_id_slots && std::find(kIdLikeCategories.begin(),
                                               kIdLikeCategories.end(), c) != kIdLikeCategories.end();
          tmpl.parts.push_back({"", TemplateSlot{c, style, mixed}});
        }
        if (g < n_static[t])
          tmpl.parts.push_back({std::string(rng.pick(lexicon)), std::nullopt});
      }
    } while (!seen.insert(tmpl.canonical()).second);
    next_slot += static_cast<std::size_t>(n_slots[t]);
    out.spec.templates.push_back(std::move(tmpl));
  }

  std::vector<std::size_t> assignment(opts.n_logs);
  for (std::size_t i = 0; i < opts.n_logs; ++i)
    assignment[i] = i % opts.n_templates;
  rng.shuffle(assignment);

  out.logs.reserve(opts.n_logs);
  for (std::size_t i = 0; i < opts.n_logs; ++i) {
    const auto& tmpl = out.spec.templates[assignment[i]];
    AnnotatedLog log;
    for (const auto& part : tmpl.parts) {
      if (!part.slot) {
        log.tokens.push_back(part.word);
        log.tags.push_back(Tag::outside());
        continue;
      }
      TemplateSlot slot = *part.slot;
      if (slot.mixed) {
        slot.category = kIdLikeCategories[rng.below(kIdLikeCategories.size())];
        slot.style = static_cast<int>(
            rng.below(detail::kStyles[static_cast<std::size_t>(slot.category)]));
      }
      const auto value = detail::fill_slot(slot, rng);
      for (std::size_t v = 0; v < value.size(); ++v) {
        log.tokens.push_back(value[v]);
        log.tags.push_back(v == 0 ? Tag::begin(slot.category) : Tag::inside(slot.category));
      }
      ++out.spec.category_counts[slot.category];
    }
    out.logs.push_back(std::move(log));
  }
  out.spec.log_template = std::move(assignment);
  return out;
}

inline SyntheticCorpus generate_synthetic(std::uint64_t seed,
                                          std::size_t n_templates,
                                          std::size_t n_logs) {
  return generate_synthetic(SyntheticOptions{seed, n_templates, n_logs});
}

}  // namespace valb
