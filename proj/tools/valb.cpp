// valb: command-line front end for splitting, training, tagging, parsing
// and scoring annotated logs.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "valb/valb.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

/// A bad flag value detected after parsing; reported like a CLI11 error.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void diagnostic(std::string_view level, std::string_view kind, std::string_view message,
                json extra = json::object()) {
  extra["level"] = level;
  extra["kind"] = kind;
  extra["message"] = message;
  std::cerr << extra.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
}

unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("VALB_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

std::string_view error_kind(const valb::Error& e) {
  if (dynamic_cast<const valb::TagError*>(&e)) return "TagError";
  if (dynamic_cast<const valb::IOBError*>(&e)) return "IOBError";
  if (dynamic_cast<const valb::FormatError*>(&e)) return "FormatError";
  if (dynamic_cast<const valb::ChecksumError*>(&e)) return "ChecksumError";
  if (dynamic_cast<const valb::VersionError*>(&e)) return "VersionError";
  if (dynamic_cast<const valb::ModeError*>(&e)) return "ModeError";
  if (dynamic_cast<const valb::DivergenceError*>(&e)) return "DivergenceError";
  if (dynamic_cast<const valb::AlignmentError*>(&e)) return "AlignmentError";
  if (dynamic_cast<const valb::DimensionMismatch*>(&e)) return "DimensionMismatch";
  if (dynamic_cast<const valb::EmptyLog*>(&e)) return "EmptyLog";
  return "Error";
}

fs::path dir_of(const fs::path& file) {
  const fs::path parent = file.parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

/// Writes the fully resolved options of `cmd` as key = value lines.
void echo_config(const CLI::App& cmd, const fs::path& dir) {
  fs::create_directories(dir);
  std::string text = "# " + cmd.get_name() + "\n";
  text += cmd.config_to_str(true, false);
  valb::write_file_atomic(dir / "run-config.txt", text);
}

std::vector<std::string> read_lines(const fs::path& path) {
  return valb::split_lines(valb::read_file(path));
}

std::vector<valb::AnnotatedLog> read_logs(const fs::path& path) {
  return valb::read_annotations(path);
}

// ---------------------------------------------------------------------------

struct ModelFlags {
  valb::Hyperparams hp;
  bool no_char = false;
  std::string embeddings;
  int min_freq = 1;

  void add(CLI::App* cmd) {
    cmd->add_option("--word-dim", hp.word_dim, "Word embedding size")->capture_default_str();
    cmd->add_option("--char-emb-dim", hp.char_emb_dim, "Character embedding size")
        ->capture_default_str();
    cmd->add_option("--char-filters", hp.char_filters, "CNN filters")->capture_default_str();
    cmd->add_option("--char-kernel", hp.char_kernel, "CNN kernel width")->capture_default_str();
    cmd->add_option("--hidden", hp.lstm_hidden, "LSTM units per direction")
        ->capture_default_str();
    cmd->add_option("--dropout", hp.dropout, "Dropout rate")->capture_default_str();
    cmd->add_option("--max-word-len", hp.max_word_len, "Characters kept per token")
        ->capture_default_str();
    cmd->add_flag("--no-char", no_char, "Drop the character channel (baseline)");
    cmd->add_option("--embeddings", embeddings, "Pretrained word vectors (text format)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--min-freq", min_freq, "Minimum word count for the vocabulary")
        ->capture_default_str();
  }
};

struct TrainFlags {
  valb::TrainConfig cfg;
  std::string selection = "variable_aware_accuracy";
  std::string history;

  void add(CLI::App* cmd) {
    cmd->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch-size", cfg.batch_size, "Logs per batch")->capture_default_str();
    cmd->add_option("--lr", cfg.learning_rate, "Adam learning rate")->capture_default_str();
    cmd->add_option("--clip", cfg.gradient_clip_norm, "Global gradient norm clip (<= 0: off)")
        ->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    cmd->add_flag("--freeze-embeddings", cfg.freeze_word_embeddings,
                  "Keep word embeddings fixed");
    cmd->add_option("--selection-metric", selection, "Checkpoint selection metric")
        ->check(CLI::IsMember({"variable_aware_accuracy", "general_accuracy"}))
        ->capture_default_str();
    cmd->add_option("--history", history, "Write per-epoch history as JSON");
  }

  void resolve() { cfg.selection_metric = *valb::parse_selection_metric(selection); }
};

json history_json(const std::vector<valb::EpochRecord>& history, int best_epoch, bool flagged) {
  json epochs = json::array();
  for (const auto& e : history)
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_general_accuracy", e.val_general_accuracy},
                      {"val_variable_aware_accuracy", e.val_variable_aware_accuracy},
                      {"val_metric", e.val_metric}});
  return {{"epochs", epochs}, {"best_epoch", best_epoch}, {"loss_flagged", flagged}};
}

void report_epoch(const valb::EpochRecord& e) {
  std::fprintf(stderr, "epoch %3d  loss %.5f  val general %.4f  val variable-aware %.4f\n",
               e.epoch, e.train_loss, e.val_general_accuracy, e.val_variable_aware_accuracy);
}

void finish_training(const valb::TrainResult<float>& r, const std::string& out,
                     const std::string& history) {
  valb::save_model(r.best.model, out);
  if (!history.empty())
    valb::write_file_atomic(history, history_json(r.history, r.best.epoch, r.loss_flagged).dump(2) + "\n");
  if (r.loss_flagged)
    diagnostic("warning", "LossTrend",
               "training loss rose by more than 5% over a 5-epoch window");
  std::fprintf(stderr, "best epoch %d (validation metric %.4f), saved %s\n", r.best.epoch,
               r.best.val_metric, out.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable-aware log abstraction: tag log tokens with variable categories "
               "and build templates that keep chosen categories."};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  // split
  auto* split = app.add_subcommand("split", "Split an annotation file into train/val/test");
  std::string split_input, split_out = ".", split_ratios = "0.2,0.2,0.6";
  std::uint64_t split_seed = 42;
  split->add_option("--input", split_input, "Annotation file")->required()->check(CLI::ExistingFile);
  split->add_option("--ratios", split_ratios, "train,val,test fractions")->capture_default_str();
  split->add_option("--seed", split_seed, "Shuffle seed")->capture_default_str();
  split->add_option("--out-dir", split_out, "Directory for train.txt, val.txt, test.txt")
      ->capture_default_str();
  split->set_config("--config", "", "Read key = value options from a file");

  // train
  auto* train = app.add_subcommand("train", "Train a tagger and save the best checkpoint");
  std::string train_file, val_file, model_out, mode_name = "multiclass";
  ModelFlags model_flags;
  TrainFlags train_flags;
  train->add_option("--train", train_file, "Training annotations")->required()->check(CLI::ExistingFile);
  train->add_option("--val", val_file, "Validation annotations")->required()->check(CLI::ExistingFile);
  train->add_option("--out", model_out, "Output model file")->required();
  train->add_option("--mode", mode_name, "multiclass or binary")
      ->check(CLI::IsMember({"multiclass", "binary"}))
      ->capture_default_str();
  model_flags.add(train);
  train_flags.add(train);
  train->set_config("--config", "", "Read key = value options from a file");

  // finetune
  auto* finetune = app.add_subcommand("finetune", "Continue training a model on target logs");
  std::string ft_model, ft_train, ft_val, ft_out;
  TrainFlags ft_flags;
  finetune->add_option("--model", ft_model, "Pretrained model")->required()->check(CLI::ExistingFile);
  finetune->add_option("--train", ft_train, "Target training annotations")
      ->required()
      ->check(CLI::ExistingFile);
  finetune->add_option("--val", ft_val, "Target validation annotations")
      ->required()
      ->check(CLI::ExistingFile);
  finetune->add_option("--out", ft_out, "Output model file")->required();
  ft_flags.add(finetune);
  finetune->set_config("--config", "", "Read key = value options from a file");

  // tag
  auto* tag = app.add_subcommand("tag", "Tag raw log lines");
  std::string tag_model, tag_input, tag_output;
  tag->add_option("--model", tag_model, "Model file")->required()->check(CLI::ExistingFile);
  tag->add_option("--input", tag_input, "Raw logs, one per line")->required()->check(CLI::ExistingFile);
  tag->add_option("--output", tag_output, "Output annotation file")->required();

  // parse
  auto* parse = app.add_subcommand("parse", "Extract variable-aware templates");
  std::string parse_model, parse_input, parse_output, parse_templates, preserve_list,
      wildcard = std::string(valb::kWildcard);
  parse->add_option("--model", parse_model, "Model file")->required()->check(CLI::ExistingFile);
  parse->add_option("--input", parse_input, "Raw logs, one per line")
      ->required()
      ->check(CLI::ExistingFile);
  parse->add_option("--preserve", preserve_list,
                    "Comma-separated categories whose values stay in the template");
  parse->add_option("--output", parse_output, "Per-line results (JSON lines)")->required();
  parse->add_option("--templates", parse_templates, "Template summary (JSON)");
  parse->add_option("--wildcard", wildcard, "Placeholder for abstracted variables")
      ->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "Score predictions against gold annotations");
  std::string eval_gold, eval_pred, eval_report;
  valb::EvalOptions eval_opts;
  eval->add_option("--gold", eval_gold, "Gold annotations")->required()->check(CLI::ExistingFile);
  eval->add_option("--pred", eval_pred, "Predicted annotations")->required()->check(CLI::ExistingFile);
  eval->add_option("--report", eval_report, "Write the report as JSON");
  eval->add_flag("--token-level", eval_opts.token_level, "Token-level instead of span-level P/R/F1");
  eval->add_flag("--collapse", eval_opts.collapse,
                 "Map every category to VAR before scoring (binary comparison)");

  // derive-annotations
  auto* derive = app.add_subcommand("derive-annotations",
                                    "Binary annotations from a structured benchmark file");
  std::string derive_in, derive_out, derive_errors, content_col = "Content",
                                                    template_col = "EventTemplate";
  char delimiter = ',';
  derive->add_option("--structured", derive_in, "Delimited file with a header row")
      ->required()
      ->check(CLI::ExistingFile);
  derive->add_option("--content-col", content_col, "Message column")->capture_default_str();
  derive->add_option("--template-col", template_col, "Template column")->capture_default_str();
  derive->add_option("--delimiter", delimiter, "Field delimiter")->capture_default_str();
  derive->add_option("--out", derive_out, "Output annotation file")->required();
  derive->add_option("--errors", derive_errors, "Unalignable rows (default: OUT.errors.jsonl)");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic annotated corpus");
  valb::SyntheticOptions synth_opts;
  std::string synth_out, synth_spec;
  synth->add_option("--seed", synth_opts.seed, "Generator seed")->capture_default_str();
  synth->add_option("--templates", synth_opts.n_templates, "Number of templates")->capture_default_str();
  synth->add_option("--logs", synth_opts.n_logs, "Number of logs")->capture_default_str();
  synth->add_option("--lexicon-partitions", synth_opts.lexicon_partitions,
                    "Split the static-word lexicon into this many disjoint parts")
      ->capture_default_str();
  synth->add_option("--family", synth_opts.family, "Lexicon part used for static words")
      ->capture_default_str();
  synth->add_flag("--mixed-id-slots", synth_opts.mixed_id_slots,
                  "Id-like slots draw their category per log");
  synth->add_option("--out", synth_out, "Output annotation file")->required();
  synth->add_option("--spec", synth_spec, "Generator spec sidecar (default: OUT.spec.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    diagnostic("error", "UsageError", e.what());
    return kExitUsage;
  }

  try {
    if (*split) {
      valb::SplitSpec spec;
      spec.seed = split_seed;
      std::vector<double> r;
      std::stringstream ss(split_ratios);
      std::string item;
      while (std::getline(ss, item, ',')) {
        try {
          r.push_back(std::stod(item));
        } catch (const std::exception&) {
          throw UsageError("--ratios: '" + item + "' is not a number");
        }
      }
      if (r.size() != 3) throw UsageError("--ratios needs three comma-separated fractions");
      spec.train_frac = r[0];
      spec.val_frac = r[1];
      spec.test_frac = r[2];
      try {
        spec.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--ratios: ") + e.what());
      }
      const auto logs = read_logs(split_input);
      const auto parts = valb::split_dataset(logs, spec);
      const fs::path dir(split_out);
      fs::create_directories(dir);
      valb::write_annotations(parts.train, dir / "train.txt");
      valb::write_annotations(parts.val, dir / "val.txt");
      valb::write_annotations(parts.test, dir / "test.txt");
      echo_config(*split, dir);
      std::printf("train %zu  val %zu  test %zu\n", parts.train.size(), parts.val.size(),
                  parts.test.size());
      return 0;
    }

    if (*train) {
      const auto mode = *valb::parse_mode(mode_name);
      train_flags.resolve();
      train_flags.cfg.mode = mode;
      auto hp = model_flags.hp;
      hp.use_char = !model_flags.no_char;
      auto train_logs = read_logs(train_file);
      auto val_logs = read_logs(val_file);
      if (mode == valb::Mode::Binary) {
        for (auto& log : train_logs) log.tags = valb::collapse_to_pseudo(log.tags);
        for (auto& log : val_logs) log.tags = valb::collapse_to_pseudo(log.tags);
      }
      auto [words, chars] = valb::build_vocabs(train_logs, model_flags.min_freq);
      std::optional<valb::PretrainedVectors> vectors;
      if (!model_flags.embeddings.empty()) {
        vectors = valb::parse_word_vectors(valb::read_file(model_flags.embeddings), hp.word_dim);
      }
      auto init = valb::init_model<float>(hp, mode, std::move(words), std::move(chars),
                                          vectors ? &*vectors : nullptr, train_flags.cfg.seed);
      if (vectors) {
        valb::Rng scratch(0);
        const auto emb = valb::make_embedding_matrix(&*vectors, init.words, hp.word_dim, scratch);
        std::fprintf(stderr, "pretrained vector coverage %.4f (%zu words)\n", emb.coverage,
                     emb.found);
      }
      const auto r = valb::train(std::move(init), train_logs, val_logs, train_flags.cfg,
                                 report_epoch);
      finish_training(r, model_out, train_flags.history);
      echo_config(*train, dir_of(model_out));
      return 0;
    }

    if (*finetune) {
      ft_flags.resolve();
      const auto base = valb::load_model(ft_model);
      auto train_logs = read_logs(ft_train);
      auto val_logs = read_logs(ft_val);
      if (train_logs.empty()) throw UsageError("--train: no logs in " + ft_train);
      if (base.mode == valb::Mode::Binary) {
        for (auto& log : train_logs) log.tags = valb::collapse_to_pseudo(log.tags);
        for (auto& log : val_logs) log.tags = valb::collapse_to_pseudo(log.tags);
      }
      const auto r = valb::finetune(base, train_logs, val_logs, ft_flags.cfg, report_epoch);
      finish_training(r, ft_out, ft_flags.history);
      echo_config(*finetune, dir_of(ft_out));
      return 0;
    }

    if (*tag) {
      const auto model = valb::load_model(tag_model);
      const auto lines = read_lines(tag_input);
      const auto tagged = valb::tag_lines(model, lines, worker_count());
      std::vector<valb::AnnotatedLog> logs;
      for (std::size_t i = 0; i < tagged.size(); ++i) {
        if (tagged[i].log)
          logs.push_back(*tagged[i].log);
        else
          diagnostic("warning", "EmptyLog", "skipped empty line", {{"line", i + 1}});
      }
      valb::write_annotations(logs, tag_output);
      echo_config(*tag, dir_of(tag_output));
      return 0;
    }

    if (*parse) {
      valb::PreserveSet preserve;
      try {
        preserve = valb::parse_preserve_list(preserve_list);
      } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--preserve: ") + e.what());
      }
      if (valb::tokenize(wildcard).size() != 1 || wildcard.find_first_of(" \t") != std::string::npos)
        throw UsageError("--wildcard must be a single token without whitespace");
      const auto model = valb::load_model(parse_model);
      const auto lines = read_lines(parse_input);
      const auto result = valb::parse_corpus(model, lines, preserve, wildcard, worker_count());
      for (const auto& e : result.errors)
        diagnostic("warning", "EmptyLog", "skipped empty line", {{"line", e.line_index + 1}});
      std::string out;
      for (std::size_t i = 0; i < result.results.size(); ++i)
        if (result.results[i])
          out += valb::to_json(*result.results[i], i + 1)
                     .dump(-1, ' ', false, json::error_handler_t::replace) +
                 "\n";
      valb::write_file_atomic(parse_output, out);
      if (!parse_templates.empty()) {
        json t = json::array();
        for (const auto& e : result.store.entries()) t.push_back(valb::to_json(e));
        valb::write_file_atomic(parse_templates,
                                json{{"templates", t}, {"count", result.store.size()}}
                                        .dump(2, ' ', false, json::error_handler_t::replace) +
                                    "\n");
      }
      echo_config(*parse, dir_of(parse_output));
      std::printf("%zu lines, %zu templates\n", lines.size(), result.store.size());
      return 0;
    }

    if (*eval) {
      const auto gold = read_logs(eval_gold);
      const auto pred = read_logs(eval_pred);
      const auto report = valb::evaluate(pred, gold, eval_opts);
      std::fputs(report.to_text().c_str(), stdout);
      if (!eval_report.empty()) {
        valb::write_file_atomic(eval_report, report.to_json().dump(2) + "\n");
        echo_config(*eval, dir_of(eval_report));
      }
      return 0;
    }

    if (*derive) {
      const auto rows = valb::parse_csv(valb::read_file(derive_in), delimiter);
      if (rows.empty()) throw valb::FormatError("structured file has no header row", 1);
      const auto column = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < rows[0].size(); ++i)
          if (rows[0][i] == name) return i;
        throw UsageError("column '" + name + "' not found in " + derive_in);
      };
      const std::size_t ci = column(content_col), ti = column(template_col);
      std::vector<valb::AnnotatedLog> logs;
      std::string errors;
      for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        json err{{"row", r}};
        try {
          if (std::max(ci, ti) >= row.size()) throw valb::FormatError("row has too few fields", r + 1);
          logs.push_back(valb::derive_binary_annotations(row[ci], row[ti]));
          continue;
        } catch (const valb::AlignmentError& e) {
          err["reason"] = e.what();
        } catch (const valb::EmptyLog& e) {
          err["reason"] = e.what();
        } catch (const valb::FormatError& e) {
          err["reason"] = e.what();
        }
        errors += err.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
      }
      valb::write_annotations(logs, derive_out);
      valb::write_file_atomic(derive_errors.empty() ? derive_out + ".errors.jsonl" : derive_errors,
                              errors);
      echo_config(*derive, dir_of(derive_out));
      std::printf("%zu rows aligned, %zu rejected\n", logs.size(), rows.size() - 1 - logs.size());
      return 0;
    }

    if (*synth) {
      const auto corpus = valb::generate_synthetic(synth_opts);
      valb::write_annotations(corpus.logs, synth_out);
      valb::write_file_atomic(synth_spec.empty() ? synth_out + ".spec.json" : synth_spec,
                              corpus.spec.to_json().dump(2) + "\n");
      echo_config(*synth, dir_of(synth_out));
      std::printf("%zu logs from %zu templates\n", corpus.logs.size(),
                  corpus.spec.templates.size());
      for (valb::Category c : valb::kCategories) {
        const auto it = corpus.spec.category_counts.find(c);
        std::printf("  %-4s %zu\n", std::string(valb::abbreviation(c)).c_str(),
                    it == corpus.spec.category_counts.end() ? 0 : it->second);
      }
      return 0;
    }
  } catch (const UsageError& e) {
    diagnostic("error", "UsageError", e.what());
    return kExitUsage;
  } catch (const valb::TokenMismatch& e) {
    diagnostic("error", "TokenMismatch", e.what(), {{"log_index", e.index()}});
    return kExitError;
  } catch (const valb::FormatError& e) {
    diagnostic("error", error_kind(e), e.what(), {{"line", e.line()}});
    return kExitError;
  } catch (const valb::Error& e) {
    diagnostic("error", error_kind(e), e.what());
    return kExitError;
  } catch (const std::invalid_argument& e) {
    diagnostic("error", "InvalidArgument", e.what());
    return kExitError;
  } catch (const std::exception& e) {
    diagnostic("error", "Error", e.what());
    return kExitError;
  }
  return 0;
}
