#pragma once

// Batch commands behind the command-line tool. Every command validates its
// configuration, computes all outputs in memory, and only then writes files,
// so a failed run leaves the output directory untouched.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "prokwo/cooccurrence.hpp"
#include "prokwo/corpus.hpp"
#include "prokwo/correlation.hpp"
#include "prokwo/csv.hpp"
#include "prokwo/error.hpp"
#include "prokwo/glmm.hpp"
#include "prokwo/lexicon.hpp"
#include "prokwo/manifest.hpp"
#include "prokwo/parallel.hpp"
#include "prokwo/predictors.hpp"
#include "prokwo/random.hpp"
#include "prokwo/regression.hpp"
#include "prokwo/statistics.hpp"
#include "prokwo/svg.hpp"

namespace prokwo {

// ---------------------------------------------------------------------------
// Configuration

enum class CorpusFormat { chat, normalized };

inline std::string_view to_string(CorpusFormat f) { return f == CorpusFormat::chat ? "chat" : "normalized"; }

inline CorpusFormat parse_corpus_format(std::string_view text) {
  if (text == "chat") return CorpusFormat::chat;
  if (text == "normalized") return CorpusFormat::normalized;
  throw ConfigError("--corpus-format must be 'chat' or 'normalized', got '" + std::string(text) + "'");
}

inline std::string_view to_string(WindowFillers f) { return f == WindowFillers::all_tokens ? "all" : "mcdi-only"; }

inline WindowFillers parse_window_fillers(std::string_view text) {
  if (text == "all") return WindowFillers::all_tokens;
  if (text == "mcdi-only") return WindowFillers::mcdi_only;
  throw ConfigError("--window-fillers must be 'all' or 'mcdi-only', got '" + std::string(text) + "'");
}

// "16..30", "18,21,24", or a mix such as "18,24..26". Result is sorted and unique.
inline std::vector<int> parse_ages(std::string_view text) {
  auto number = [&](std::string_view s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError("--ages: '" + std::string(s) + "' is not an integer");
    }
    return v;
  };
  std::vector<int> ages;
  for (auto part : detail::split(text, ',')) {
    part = detail::trim(part);
    const auto dots = part.find("..");
    if (dots == std::string_view::npos) {
      ages.push_back(number(part));
      continue;
    }
    const int lo = number(part.substr(0, dots));
    const int hi = number(part.substr(dots + 2));
    if (hi < lo) throw ConfigError("--ages: empty range '" + std::string(part) + "'");
    for (int a = lo; a <= hi; ++a) ages.push_back(a);
  }
  std::sort(ages.begin(), ages.end());
  ages.erase(std::unique(ages.begin(), ages.end()), ages.end());
  return ages;
}

enum class Command { ingest, mcdip, predictors, correlate, shuffle, fit, report };

inline std::string_view to_string(Command c) {
  switch (c) {
    case Command::ingest: return "ingest";
    case Command::mcdip: return "mcdip";
    case Command::predictors: return "predictors";
    case Command::correlate: return "correlate";
    case Command::shuffle: return "shuffle";
    case Command::fit: return "fit";
    case Command::report: return "report";
  }
  return "?";
}

struct RunConfig {
  std::filesystem::path corpus_path;
  CorpusFormat corpus_format = CorpusFormat::chat;
  std::filesystem::path lexicon_path;
  std::filesystem::path exclusions_path;       // optional word list
  std::filesystem::path administrations_path;
  std::filesystem::path mcdip_path;            // optional: resume from mcdip.csv
  std::filesystem::path predictors_path;       // optional: resume from predictors.csv
  std::vector<int> ages = parse_ages("16..30");
  CooccurrenceOptions cooccurrence;
  SpeakerFilter speakers;
  std::size_t shuffles = 1000;
  std::uint64_t seed = kDefaultSeed;
  std::string model = "full";
  std::filesystem::path out_dir = "out";
  unsigned threads = 1;
  bool svg = false;
  bool dump_cooccurrence = false;
  bool check_published_patterns = false;
};

inline nlohmann::json config_to_json(const RunConfig& c) {
  return {
      {"corpus", c.corpus_path.generic_string()},
      {"corpus_format", std::string(to_string(c.corpus_format))},
      {"lexicon", c.lexicon_path.generic_string()},
      {"exclusions", c.exclusions_path.generic_string()},
      {"administrations", c.administrations_path.generic_string()},
      {"mcdip", c.mcdip_path.generic_string()},
      {"predictors", c.predictors_path.generic_string()},
      {"ages", c.ages},
      {"window", c.cooccurrence.window},
      {"include_diagonal", c.cooccurrence.include_diagonal},
      {"window_fillers", std::string(to_string(c.cooccurrence.fillers))},
      {"include_child_speech", c.speakers.include_target_child},
      {"shuffles", c.shuffles},
      {"seed", c.seed},
      {"model", c.model},
      {"out", c.out_dir.generic_string()},
      {"threads", c.threads},
      {"svg", c.svg},
      {"dump_cooccurrence", c.dump_cooccurrence},
      {"check_published_patterns", c.check_published_patterns},
  };
}

namespace detail {

inline void require_readable(const std::filesystem::path& path, const std::string& flag, bool directory_ok) {
  if (path.empty()) throw ConfigError(flag + " is required for this command");
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) throw ConfigError(flag + ": '" + path.string() + "' does not exist");
  if (std::filesystem::is_directory(path, ec)) {
    if (!directory_ok) throw ConfigError(flag + ": '" + path.string() + "' is a directory, expected a file");
    std::filesystem::directory_iterator probe(path, ec);
    if (ec) throw ConfigError(flag + ": '" + path.string() + "' is not readable");
    return;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(flag + ": '" + path.string() + "' is not readable");
}

inline void optional_readable(const std::filesystem::path& path, const std::string& flag) {
  if (!path.empty()) require_readable(path, flag, false);
}

}  // namespace detail

// Checks everything that can be checked without reading file contents.
inline void validate(const RunConfig& c, Command command) {
  if (c.ages.empty()) throw ConfigError("--ages: at least one age is required");
  for (int a : c.ages) {
    if (a < kMinAgeMonths || a > kMaxAgeMonths) {
      throw ConfigError("--ages: " + std::to_string(a) + " outside [" + std::to_string(kMinAgeMonths) + ", " +
                        std::to_string(kMaxAgeMonths) + "]");
    }
  }
  if (c.cooccurrence.window < 1) throw ConfigError("--window must be >= 1");
  if (c.shuffles < 1) throw ConfigError("--shuffles must be >= 1");
  if (c.threads < 1) throw ConfigError("--threads must be >= 1");
  if (c.out_dir.empty()) throw ConfigError("--out is required");
  if (std::filesystem::exists(c.out_dir) && !std::filesystem::is_directory(c.out_dir)) {
    throw ConfigError("--out: '" + c.out_dir.string() + "' exists and is not a directory");
  }
  detail::optional_readable(c.exclusions_path, "--exclusions");

  const bool need_corpus_for_predictors = c.predictors_path.empty();
  auto need_corpus = [&] {
    detail::require_readable(c.corpus_path, "--corpus-dir", true);
  };
  auto need_outcome = [&] {
    if (c.mcdip_path.empty()) {
      detail::require_readable(c.administrations_path, "--administrations", false);
    } else {
      detail::require_readable(c.mcdip_path, "--mcdip", false);
    }
  };
  auto need_predictors = [&] {
    if (need_corpus_for_predictors) {
      need_corpus();
      need_outcome();
    } else {
      detail::require_readable(c.predictors_path, "--predictors", false);
    }
  };

  switch (command) {
    case Command::ingest:
      need_corpus();
      return;
    case Command::mcdip:
      detail::require_readable(c.lexicon_path, "--lexicon", false);
      detail::require_readable(c.administrations_path, "--administrations", false);
      return;
    case Command::predictors:
      detail::require_readable(c.lexicon_path, "--lexicon", false);
      need_corpus();
      need_outcome();
      return;
    case Command::correlate:
      detail::require_readable(c.lexicon_path, "--lexicon", false);
      need_predictors();
      need_outcome();
      return;
    case Command::shuffle:
      detail::require_readable(c.lexicon_path, "--lexicon", false);
      need_corpus();
      need_outcome();
      return;
    case Command::fit:
      parse_model_selector(c.model);
      detail::require_readable(c.lexicon_path, "--lexicon", false);
      detail::require_readable(c.administrations_path, "--administrations", false);
      need_predictors();
      return;
    case Command::report:
      detail::require_readable(c.lexicon_path, "--lexicon", false);
      detail::require_readable(c.administrations_path, "--administrations", false);
      need_corpus();
      return;
  }
}

// ---------------------------------------------------------------------------
// Session: lazily loaded inputs shared by the commands of one run

class Session {
 public:
  explicit Session(RunConfig config) : config_(std::move(config)) {
    std::sort(config_.ages.begin(), config_.ages.end());
    config_.ages.erase(std::unique(config_.ages.begin(), config_.ages.end()), config_.ages.end());
  }

  const RunConfig& config() const { return config_; }
  RunManifest& manifest() { return manifest_; }
  std::vector<std::string>& warnings() { return warnings_; }

  const Corpus& corpus() {
    if (!corpus_) {
      manifest_.add_input("corpus", config_.corpus_path);
      auto loaded = manifest_.timed(
          "load_corpus",
          [&] {
            return config_.corpus_format == CorpusFormat::chat ? load_chat_directory(config_.corpus_path)
                                                               : load_normalized_path(config_.corpus_path);
          },
          [](const LoadedCorpus& l) { return l.corpus.size(); });
      for (auto& w : loaded.warnings) warnings_.push_back(std::move(w));
      corpus_ = std::move(loaded.corpus);
    }
    return *corpus_;
  }

  const Lexicon& lexicon() {
    if (!lexicon_) {
      std::set<std::string> exclusions;
      if (!config_.exclusions_path.empty()) {
        manifest_.add_input("exclusions", config_.exclusions_path);
        exclusions = read_word_list(config_.exclusions_path);
      }
      manifest_.add_input("lexicon", config_.lexicon_path);
      lexicon_ = manifest_.timed(
          "load_lexicon", [&] { return read_lexicon_csv(config_.lexicon_path, exclusions); },
          [](const Lexicon& l) { return l.size(); });
    }
    return *lexicon_;
  }

  const std::vector<Administration>& administrations() {
    if (!administrations_) {
      const auto& lex = lexicon();
      manifest_.add_input("administrations", config_.administrations_path);
      administrations_ = manifest_.timed(
          "load_administrations", [&] { return read_administrations_csv(config_.administrations_path, lex); },
          [](const std::vector<Administration>& a) { return a.size(); });
    }
    return *administrations_;
  }

  const McdipTable& mcdip() {
    if (!mcdip_) {
      const auto& lex = lexicon();
      if (!config_.mcdip_path.empty()) {
        manifest_.add_input("mcdip", config_.mcdip_path);
        mcdip_ = manifest_.timed(
            "load_mcdip", [&] { return read_mcdip_csv(config_.mcdip_path, lex); },
            [](const McdipTable& t) { return t.ages().size() * t.word_count(); });
      } else {
        const auto& admins = administrations();
        mcdip_ = manifest_.timed(
            "mcdip", [&] { return compute_mcdip(admins, lex); },
            [](const McdipTable& t) { return t.ages().size() * t.word_count(); });
      }
    }
    return *mcdip_;
  }

  // MCDIp must exist at every requested age before any downstream stage runs.
  void require_outcome_ages() {
    const auto& table = mcdip();
    for (int a : config_.ages) {
      if (!table.available(a)) {
        const auto source = config_.mcdip_path.empty() ? config_.administrations_path : config_.mcdip_path;
        throw DataError(source.string() + ": age_months has no rows for requested age " + std::to_string(a));
      }
    }
  }

  const std::vector<AgeCounts>& counts() {
    if (!counts_) {
      const auto& c = corpus();
      const auto& lex = lexicon();
      counts_ = manifest_.timed(
          "cooccurrence", [&] { return count_by_age(c, lex, config_.ages, predictor_options()); },
          [](const std::vector<AgeCounts>& v) {
            std::size_t nnz = 0;
            for (const auto& a : v) nnz += a.matrix.nonzeros();
            return nnz;
          });
    }
    return *counts_;
  }

  const PredictorTable& predictors() {
    if (!predictors_) {
      const auto& lex = lexicon();
      if (!config_.predictors_path.empty()) {
        manifest_.add_input("predictors", config_.predictors_path);
        predictors_ = manifest_.timed(
            "load_predictors", [&] { return read_predictors_csv(config_.predictors_path, lex); },
            [](const PredictorTable& t) { return t.rows().size(); });
        for (int a : config_.ages) {
          if (!predictors_->has_age(a)) {
            throw DataError(config_.predictors_path.string() + ": age_months has no rows for requested age " +
                            std::to_string(a));
          }
        }
      } else {
        require_outcome_ages();
        const auto& c = corpus();
        const auto& table = mcdip();
        std::vector<AgeCounts> counts;
        predictors_ = manifest_.timed(
            "predictors",
            [&] { return predictor_table(c, lex, table, config_.ages, predictor_options(), &counts); },
            [](const PredictorTable& t) { return t.rows().size(); });
        if (!counts_) counts_ = std::move(counts);
      }
    }
    return *predictors_;
  }

  const std::vector<ProductionRecord>& records() {
    if (!records_) records_ = production_records(administrations(), lexicon());
    return *records_;
  }

 private:
  PredictorOptions predictor_options() const {
    PredictorOptions o;
    o.cooccurrence = config_.cooccurrence;
    o.speakers = config_.speakers;
    o.threads = config_.threads;
    return o;
  }

  RunConfig config_;
  RunManifest manifest_;
  std::vector<std::string> warnings_;
  std::optional<Corpus> corpus_;
  std::optional<Lexicon> lexicon_;
  std::optional<std::vector<Administration>> administrations_;
  std::optional<McdipTable> mcdip_;
  std::optional<std::vector<AgeCounts>> counts_;
  std::optional<PredictorTable> predictors_;
  std::optional<std::vector<ProductionRecord>> records_;
};

// ---------------------------------------------------------------------------
// Outputs

class OutputSet {
 public:
  void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }

  template <typename Writer>
  void add_with(std::string name, Writer&& write) {
    std::ostringstream out;
    write(out);
    add(std::move(name), out.str());
  }

  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

  const std::string* find(const std::string& name) const {
    for (const auto& [n, c] : files_) {
      if (n == name) return &c;
    }
    return nullptr;
  }

  // Writes every file, then the manifest describing them.
  std::vector<std::string> commit(const std::filesystem::path& dir, RunManifest& manifest) const {
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;
    for (const auto& [name, content] : files_) {
      write_file(dir / name, content);
      manifest.add_output(name, content);
      written.push_back(name);
    }
    write_file(dir / "run_manifest.json", manifest.to_json().dump(2) + "\n");
    written.emplace_back("run_manifest.json");
    return written;
  }

 private:
  static void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(path.string() + ": cannot open for writing");
    out << content;
    if (!out) throw Error(path.string() + ": write failed");
  }

  std::vector<std::pair<std::string, std::string>> files_;
};

struct CommandResult {
  std::vector<std::string> files;
  std::vector<std::string> warnings;
  std::vector<std::string> nonconverged;  // model ids with a failed fit
  bool converged() const { return nonconverged.empty(); }
};

// ---------------------------------------------------------------------------
// Model fitting shared by fit and report

struct ModelOutcome {
  ModelSpec spec;
  std::optional<FitResult> fit;
  std::string status;
  std::size_t rows = 0;
  std::optional<ItemErrorReport> items;             // predictions include the random-effect modes
  std::optional<ItemErrorReport> items_fixed_only;  // fixed effects alone
};

inline std::vector<ModelOutcome> fit_models(Session& session, const std::vector<ModelSpec>& specs,
                                            const std::vector<bool>& want_items) {
  const auto& records = session.records();
  const auto& table = session.predictors();
  const auto& lexicon = session.lexicon();
  const auto& mcdip = session.mcdip();
  // Designs are built serially so data errors surface deterministically.
  std::vector<DesignMatrix> designs;
  for (const auto& spec : specs) designs.push_back(build_design(records, table, spec));
  std::vector<ModelOutcome> out(specs.size());
  const auto start = std::chrono::steady_clock::now();
  parallel_for(specs.size(), session.config().threads, [&](std::size_t i) {
    auto& o = out[i];
    o.spec = specs[i];
    o.rows = designs[i].rows();
    try {
      o.fit = fit_glmm_laplace(designs[i], specs[i]);
      o.status = std::string(to_string(o.fit->convergence.status));
      if (want_items[i]) {
        o.items = item_prediction_error(*o.fit, designs[i], mcdip.values(specs[i].age_months), lexicon);
        o.items_fixed_only = item_prediction_error(*o.fit, designs[i], mcdip.values(specs[i].age_months), lexicon, false);
      }
    } catch (const SeparationError&) {
      o.status = "separation";
    } catch (const NumericalError&) {
      o.status = "numerical_failure";
    }
  });
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  std::size_t rows = 0;
  for (const auto& o : out) rows += o.rows;
  session.manifest().add_stage("fit", rows, elapsed.count());
  return out;
}

namespace detail {

inline void write_fits(std::ostream& out, const std::vector<ModelOutcome>& outcomes) {
  csv::Writer w(out);
  w.row("age_months", "model_id", "term", "estimate", "std_error", "z", "p", "ci_low", "ci_high");
  for (const auto& o : outcomes) {
    if (!o.fit) continue;
    for (const auto& t : o.fit->terms) {
      w.row(o.spec.age_months, o.spec.model_id(), t.term, t.estimate, t.std_error, t.z, t.p, t.ci_low, t.ci_high);
    }
  }
}

inline void write_variance_components(std::ostream& out, const std::vector<ModelOutcome>& outcomes) {
  csv::Writer w(out);
  w.row("age_months", "model_id", "factor", "variance");
  for (const auto& o : outcomes) {
    if (!o.fit) continue;
    if (o.fit->has_child_effects) w.row(o.spec.age_months, o.spec.model_id(), "child", o.fit->var_child);
    if (o.fit->has_word_effects) w.row(o.spec.age_months, o.spec.model_id(), "word", o.fit->var_word);
  }
}

inline void write_convergence(std::ostream& out, const std::vector<ModelOutcome>& outcomes) {
  csv::Writer w(out);
  w.row("age_months", "model_id", "status", "iterations", "gradient_norm", "boundary", "rows");
  for (const auto& o : outcomes) {
    if (o.fit) {
      w.row(o.spec.age_months, o.spec.model_id(), o.status, o.fit->convergence.iterations,
            o.fit->convergence.gradient_norm, o.fit->convergence.boundary, o.rows);
    } else {
      w.row(o.spec.age_months, o.spec.model_id(), o.status, "", "", "", o.rows);
    }
  }
}

inline void write_item_errors(std::ostream& out, const std::vector<ModelOutcome>& outcomes, const Lexicon& lexicon,
                              bool include_modes = true) {
  csv::Writer w(out);
  w.row("word", "grammatical_class", "age_months", "mean_error", "mcdip");
  for (const auto& o : outcomes) {
    const auto& items = include_modes ? o.items : o.items_fixed_only;
    if (!items) continue;
    for (const auto& e : items->items) {
      w.row(lexicon.word(e.word_index), to_string(e.grammatical_class), e.age_months, e.mean_error, e.mcdip);
    }
  }
}

inline void write_item_error_correlations(std::ostream& out, const std::vector<ModelOutcome>& outcomes) {
  csv::Writer w(out);
  w.row("age_months", "model_id", "r", "n", "p");
  for (const auto& o : outcomes) {
    if (!o.items) continue;
    w.row(o.spec.age_months, o.spec.model_id(), o.items->r, o.items->n, o.items->p);
  }
}

inline void add_fit_outputs(OutputSet& outputs, const std::vector<ModelOutcome>& outcomes, const Lexicon& lexicon) {
  outputs.add_with("fits.csv", [&](std::ostream& o) { write_fits(o, outcomes); });
  outputs.add_with("variance_components.csv", [&](std::ostream& o) { write_variance_components(o, outcomes); });
  outputs.add_with("convergence.csv", [&](std::ostream& o) { write_convergence(o, outcomes); });
  outputs.add_with("item_errors.csv", [&](std::ostream& o) { write_item_errors(o, outcomes, lexicon); });
  outputs.add_with("item_errors_fixed_only.csv", [&](std::ostream& o) { write_item_errors(o, outcomes, lexicon, false); });
  outputs.add_with("item_error_correlations.csv", [&](std::ostream& o) { write_item_error_correlations(o, outcomes); });
}

inline void collect_nonconverged(CommandResult& result, const std::vector<ModelOutcome>& outcomes) {
  for (const auto& o : outcomes) {
    if (!o.fit || !o.fit->converged()) {
      result.nonconverged.push_back(o.spec.model_id() + "@" + std::to_string(o.spec.age_months) + " (" + o.status + ")");
    }
  }
}

inline std::vector<CorrelationReport> all_correlations(Session& session) {
  const auto& table = session.predictors();
  const auto& lexicon = session.lexicon();
  const auto& mcdip = session.mcdip();
  session.require_outcome_ages();
  const auto& ages = session.config().ages;
  std::vector<CorrelationReport> out;
  for (auto grouping : {Grouping::all, Grouping::by_class}) {
    auto pairs = correlate_predictors(table, lexicon, ages, grouping);
    out.insert(out.end(), pairs.begin(), pairs.end());
  }
  for (auto grouping : {Grouping::all, Grouping::by_class}) {
    auto outcome = correlate_with_outcome(table, mcdip, lexicon, ages, grouping);
    out.insert(out.end(), outcome.begin(), outcome.end());
  }
  return out;
}

inline std::vector<std::string> predictor_labels() {
  std::vector<std::string> labels;
  for (auto p : kPredictors) labels.emplace_back(to_string(p));
  return labels;
}

inline std::string correlogram_for_age(const std::vector<CorrelationReport>& reports, int age) {
  std::vector<svg::Cell> cells;
  for (const auto& label : predictor_labels()) cells.push_back({label, label, 1.0, std::nullopt, 0});
  for (const auto& r : reports) {
    if (r.grouping != "all" || r.age_months != age || r.var_b == "mcdip") continue;
    cells.push_back({r.var_b, r.var_a, r.r, r.p, r.n});
  }
  return svg::correlogram("Predictor correlations at " + std::to_string(age) + " months", predictor_labels(), cells);
}

// One series per predictor (and optionally the shuffle baseline) across ages.
inline std::string outcome_chart(const std::vector<CorrelationReport>& reports, const std::string& grouping,
                                 const std::map<int, double>* shuffle_means) {
  std::vector<svg::Series> series;
  for (const auto& label : predictor_labels()) {
    svg::Series s{label, {}};
    for (const auto& r : reports) {
      if (r.grouping == grouping && r.var_b == "mcdip" && r.var_a == label) {
        s.points.push_back({static_cast<double>(r.age_months), r.r, std::nullopt, std::nullopt});
      }
    }
    series.push_back(std::move(s));
  }
  if (shuffle_means) {
    svg::Series s{"pro_kwo_shuffle", {}};
    for (const auto& [age, r] : *shuffle_means) s.points.push_back({static_cast<double>(age), r, std::nullopt, std::nullopt});
    series.push_back(std::move(s));
  }
  return svg::line_chart("Correlation with MCDIp (" + grouping + ")", "age (months)", "Pearson r", series);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands. Each returns the outputs it would write; run_command commits them.

inline OutputSet cmd_ingest(Session& session) {
  OutputSet out;
  const auto& corpus = session.corpus();
  out.add("corpus.jsonl", serialize_normalized(corpus));
  out.add_with("skipped_documents.csv", [&](std::ostream& o) {
    csv::Writer w(o);
    w.row("doc_id", "reason");
    for (const auto& s : skipped_documents(corpus)) w.row(s.doc_id, s.reason);
  });
  return out;
}

inline OutputSet cmd_mcdip(Session& session) {
  OutputSet out;
  const auto& table = session.mcdip();
  out.add_with("mcdip.csv", [&](std::ostream& o) { write_mcdip_csv(o, table, session.lexicon()); });
  return out;
}

inline OutputSet cmd_predictors(Session& session) {
  OutputSet out;
  const auto& table = session.predictors();
  out.add_with("predictors.csv", [&](std::ostream& o) { write_predictors_csv(o, table, session.lexicon()); });
  if (session.config().dump_cooccurrence) {
    std::vector<CooccurrenceMatrix> matrices;
    for (const auto& c : session.counts()) matrices.push_back(c.matrix);
    out.add_with("cooccurrence.csv", [&](std::ostream& o) { write_cooccurrence_csv(o, matrices, session.lexicon()); });
  }
  return out;
}

inline OutputSet cmd_correlate(Session& session) {
  OutputSet out;
  const auto reports = detail::all_correlations(session);
  out.add_with("correlations.csv", [&](std::ostream& o) { write_correlations_csv(o, reports); });
  if (session.config().svg) {
    for (int age : session.config().ages) {
      out.add("figure1_correlogram_" + std::to_string(age) + ".svg", detail::correlogram_for_age(reports, age));
    }
    out.add("figure2_outcome_correlations.svg", detail::outcome_chart(reports, "all", nullptr));
  }
  return out;
}

struct AgeShuffle {
  int age_months = 0;
  ShuffleResult result;
};

inline std::vector<AgeShuffle> run_shuffles(Session& session) {
  session.require_outcome_ages();
  const auto& counts = session.counts();
  const auto& mcdip = session.mcdip();
  const auto& cfg = session.config();
  return session.manifest().timed(
      "shuffle",
      [&] {
        std::vector<AgeShuffle> out;
        for (const auto& c : counts) {
          const auto& row = mcdip.values(c.age_months);
          out.push_back({c.age_months, pro_kwo_shuffle(c.matrix, row, row, cfg.shuffles, cfg.seed, cfg.threads)});
        }
        return out;
      },
      [](const std::vector<AgeShuffle>& v) { return v.size() * (v.empty() ? 0 : v.front().result.correlations.size()); });
}

inline void write_shuffle_report(std::ostream& out, const std::vector<AgeShuffle>& shuffles) {
  csv::Writer w(out);
  w.row("age_months", "iteration", "r");
  for (const auto& s : shuffles) {
    for (std::size_t k = 0; k < s.result.correlations.size(); ++k) w.row(s.age_months, k, s.result.correlations[k]);
    w.row(s.age_months, "mean", s.result.mean_r);
  }
}

inline OutputSet cmd_shuffle(Session& session) {
  OutputSet out;
  const auto shuffles = run_shuffles(session);
  out.add_with("shuffle_report.csv", [&](std::ostream& o) { write_shuffle_report(o, shuffles); });
  return out;
}

inline OutputSet cmd_fit(Session& session, CommandResult& result) {
  const auto predictors = parse_model_selector(session.config().model);
  session.predictors();
  std::vector<ModelSpec> specs;
  for (int age : session.config().ages) specs.push_back({age, predictors, true, true});
  session.require_outcome_ages();
  const auto outcomes = fit_models(session, specs, std::vector<bool>(specs.size(), true));
  OutputSet out;
  detail::add_fit_outputs(out, outcomes, session.lexicon());
  detail::collect_nonconverged(result, outcomes);
  return out;
}

// ---------------------------------------------------------------------------
// Qualitative checks against the published pattern of results

struct PatternCheck {
  std::string check;
  std::optional<int> age_months;
  std::string status;  // "pass", "fail", or "unavailable"
  std::string detail;
};

inline std::vector<PatternCheck> published_pattern_checks(const std::vector<CorrelationReport>& reports,
                                                          const std::vector<ModelOutcome>& outcomes,
                                                          const std::vector<int>& ages) {
  std::vector<PatternCheck> checks;
  auto find = [&](int age, const std::string& a, const std::string& b) -> std::optional<double> {
    for (const auto& r : reports) {
      if (r.grouping == "all" && r.age_months == age &&
          ((r.var_a == a && r.var_b == b) || (r.var_a == b && r.var_b == a))) {
        return r.r;
      }
    }
    return std::nullopt;
  };
  auto verdict = [](bool ok) { return std::string(ok ? "pass" : "fail"); };

  for (int age : ages) {
    const auto pk = find(age, "pro_kwo", "mcdip");
    bool ok = pk.has_value();
    std::string detail = "pro_kwo r=" + csv::format_optional(pk);
    for (auto p : kPredictors) {
      if (p == Predictor::pro_kwo) continue;
      const auto other = find(age, std::string(to_string(p)), "mcdip");
      detail += "; " + std::string(to_string(p)) + " r=" + csv::format_optional(other);
      if (other && pk && !(*pk > *other)) ok = false;
    }
    checks.push_back({"pro_kwo_strongest_outcome_correlation", age, pk ? verdict(ok) : "unavailable", detail});
  }

  std::map<int, double> estimates;
  for (int age : ages) {
    const ModelOutcome* found = nullptr;
    for (const auto& o : outcomes) {
      if (o.spec.age_months == age && o.spec.model_id() == "single:pro_kwo") found = &o;
    }
    if (!found || !found->fit) {
      checks.push_back({"pro_kwo_effect_positive_p_lt_0.001", age, "unavailable", "no single:pro_kwo fit"});
      continue;
    }
    const auto& term = found->fit->terms.at(1);
    estimates[age] = term.estimate;
    checks.push_back({"pro_kwo_effect_positive_p_lt_0.001", age, verdict(term.estimate > 0.0 && term.p < 0.001),
                      "estimate=" + csv::format_double(term.estimate) + "; p=" + csv::format_double(term.p)});
  }
  if (estimates.size() >= 2) {
    const auto first = *estimates.begin();
    const auto last = *estimates.rbegin();
    checks.push_back({"pro_kwo_effect_increases_with_age", std::nullopt, verdict(last.second > first.second),
                      std::to_string(first.first) + "mo=" + csv::format_double(first.second) + "; " +
                          std::to_string(last.first) + "mo=" + csv::format_double(last.second)});
  } else {
    checks.push_back({"pro_kwo_effect_increases_with_age", std::nullopt, "unavailable", "needs two or more ages"});
  }

  // Signs of the predictor intercorrelations: the three corpus measures agree
  // positively, Pro-KWo relates negatively to each of them.
  const std::vector<std::tuple<std::string, std::string, int>> signs = {
      {"frequency", "lexical_diversity", 1},   {"frequency", "document_diversity", 1},
      {"lexical_diversity", "document_diversity", 1}, {"frequency", "pro_kwo", -1},
      {"lexical_diversity", "pro_kwo", -1},   {"document_diversity", "pro_kwo", -1}};
  for (int age : ages) {
    bool ok = true, available = true;
    std::string detail;
    for (const auto& [a, b, sign] : signs) {
      const auto r = find(age, a, b);
      if (!detail.empty()) detail += "; ";
      detail += a + "~" + b + "=" + csv::format_optional(r);
      if (!r) {
        available = false;
      } else if (!(sign * *r > 0.0)) {
        ok = false;
      }
    }
    checks.push_back({"predictor_correlation_signs", age, available ? verdict(ok) : "unavailable", detail});
  }
  return checks;
}

inline void write_pattern_checks(std::ostream& out, const std::vector<PatternCheck>& checks) {
  csv::Writer w(out);
  w.row("check", "age_months", "status", "detail");
  for (const auto& c : checks) {
    w.row(c.check, c.age_months ? std::to_string(*c.age_months) : std::string(), c.status, c.detail);
  }
}

// ---------------------------------------------------------------------------
// Consolidated report

inline OutputSet cmd_report(Session& session, CommandResult& result) {
  const auto& cfg = session.config();
  const auto& lexicon = session.lexicon();
  session.require_outcome_ages();
  const auto& table = session.predictors();
  const auto reports = detail::all_correlations(session);
  const auto shuffles = run_shuffles(session);

  std::vector<ModelSpec> specs;
  std::vector<bool> want_items;
  for (int age : cfg.ages) {
    for (auto p : kPredictors) {
      specs.push_back({age, {p}, true, true});
      want_items.push_back(p == Predictor::pro_kwo);
    }
    specs.push_back({age, {kPredictors.begin(), kPredictors.end()}, true, true});
    want_items.push_back(false);
  }
  const auto outcomes = fit_models(session, specs, want_items);
  detail::collect_nonconverged(result, outcomes);

  OutputSet out;
  out.add_with("mcdip.csv", [&](std::ostream& o) { write_mcdip_csv(o, session.mcdip(), lexicon); });
  out.add_with("predictors.csv", [&](std::ostream& o) { write_predictors_csv(o, table, lexicon); });
  out.add_with("correlations.csv", [&](std::ostream& o) { write_correlations_csv(o, reports); });
  out.add_with("shuffle_report.csv", [&](std::ostream& o) { write_shuffle_report(o, shuffles); });
  detail::add_fit_outputs(out, outcomes, lexicon);

  // Wide layout for table2_predictor_correlations.csv: one row per predictor pair, one r/p/significance triple per age.
  out.add_with("table2_predictor_correlations.csv", [&](std::ostream& o) {
    csv::Writer w(o);
    std::vector<std::string> header = {"var_a", "var_b"};
    for (int age : cfg.ages) {
      header.push_back("r_" + std::to_string(age));
      header.push_back("p_" + std::to_string(age));
      header.push_back("significant_01_" + std::to_string(age));
    }
    w.row(header);
    for (std::size_t i = 0; i < kPredictors.size(); ++i) {
      for (std::size_t j = i + 1; j < kPredictors.size(); ++j) {
        std::vector<std::string> row = {std::string(to_string(kPredictors[i])), std::string(to_string(kPredictors[j]))};
        for (int age : cfg.ages) {
          const CorrelationReport* rep = nullptr;
          for (const auto& r : reports) {
            if (r.grouping == "all" && r.age_months == age && r.var_a == row[0] && r.var_b == row[1]) rep = &r;
          }
          row.push_back(rep ? csv::format_optional(rep->r) : "");
          row.push_back(rep ? csv::format_optional(rep->p) : "");
          row.push_back(rep && rep->r ? (rep->significant_01 ? "1" : "0") : "");
        }
        w.row(row);
      }
    }
  });

  auto term_table = [&](std::ostream& o, bool single) {
    csv::Writer w(o);
    w.row("age_months", "model_id", "term", "estimate", "std_error", "z", "p", "ci_low", "ci_high", "status");
    for (const auto& oc : outcomes) {
      if ((oc.spec.predictors.size() == 1) != single) continue;
      if (!oc.fit) {
        w.row(oc.spec.age_months, oc.spec.model_id(), "", "", "", "", "", "", "", oc.status);
        continue;
      }
      for (const auto& t : oc.fit->terms) {
        if (single && t.term == "(Intercept)") continue;
        w.row(oc.spec.age_months, oc.spec.model_id(), t.term, t.estimate, t.std_error, t.z, t.p, t.ci_low, t.ci_high,
              oc.status);
      }
    }
  };
  out.add_with("table3_single_predictor_models.csv", [&](std::ostream& o) { term_table(o, true); });
  out.add_with("table4_full_models.csv", [&](std::ostream& o) { term_table(o, false); });

  std::map<int, double> shuffle_means;
  for (const auto& s : shuffles) shuffle_means[s.age_months] = s.result.mean_r;
  out.add_with("figure2_outcome_correlations.csv", [&](std::ostream& o) {
    csv::Writer w(o);
    w.row("age_months", "predictor", "r", "n", "p", "significant_01");
    for (int age : cfg.ages) {
      for (const auto& r : reports) {
        if (r.grouping == "all" && r.age_months == age && r.var_b == "mcdip") {
          w.row(age, r.var_a, r.r, r.n, r.p, r.significant_01);
        }
      }
      // The shuffle baseline is summarized by its mean r over the same words.
      const auto n = lexicon.size();
      const auto pv = pearson_pvalue(shuffle_means.at(age), n);
      w.row(age, "pro_kwo_shuffle", shuffle_means.at(age), n, pv.p, pv.p < kSignificanceLevel);
    }
  });
  out.add_with("figure6_class_outcome_correlations.csv", [&](std::ostream& o) {
    csv::Writer w(o);
    w.row("grouping", "age_months", "predictor", "r", "n", "p", "significant_01");
    for (const auto& r : reports) {
      if (r.grouping != "all" && r.var_b == "mcdip") w.row(r.grouping, r.age_months, r.var_a, r.r, r.n, r.p, r.significant_01);
    }
  });

  if (cfg.svg) {
    for (int age : cfg.ages) {
      out.add("figure1_correlogram_" + std::to_string(age) + ".svg", detail::correlogram_for_age(reports, age));
    }
    out.add("figure2_outcome_correlations.svg", detail::outcome_chart(reports, "all", &shuffle_means));

    std::vector<svg::Series> effects;
    for (auto p : kPredictors) {
      svg::Series s{std::string(to_string(p)), {}};
      for (const auto& oc : outcomes) {
        if (oc.spec.predictors.size() != 1 || oc.spec.predictors.front() != p) continue;
        if (oc.fit) {
          const auto& t = oc.fit->terms.at(1);
          s.points.push_back({static_cast<double>(oc.spec.age_months), t.estimate, t.ci_low, t.ci_high});
        } else {
          s.points.push_back({static_cast<double>(oc.spec.age_months), std::nullopt, std::nullopt, std::nullopt});
        }
      }
      effects.push_back(std::move(s));
    }
    out.add("figure3_single_predictor_effects.svg",
            svg::line_chart("Fixed effects, single-predictor models", "age (months)", "estimate (95% Wald CI)", effects));

    std::vector<std::string> classes;
    for (auto c : kGrammaticalClasses) classes.emplace_back(to_string(c));
    for (const auto& c : classes) {
      bool present = false;
      for (const auto& r : reports) present = present || r.grouping == c;
      if (present) out.add("figure6_outcome_correlations_" + c + ".svg", detail::outcome_chart(reports, c, nullptr));
    }
    for (const auto& oc : outcomes) {
      if (!oc.items) continue;
      std::vector<svg::ScatterPoint> points;
      for (const auto& e : oc.items->items) {
        points.push_back({lexicon.word(e.word_index), std::string(to_string(e.grammatical_class)), e.mcdip, e.mean_error});
      }
      out.add("figure7_item_errors_" + std::to_string(oc.spec.age_months) + ".svg",
              svg::scatter("Mean prediction error by word, " + oc.spec.model_id() + " at " +
                               std::to_string(oc.spec.age_months) + " months",
                           "MCDIp", "mean error (predicted - observed)", points, classes));
    }
  }

  if (cfg.check_published_patterns) {
    const auto checks = published_pattern_checks(reports, outcomes, cfg.ages);
    out.add_with("published_pattern_checks.csv", [&](std::ostream& o) { write_pattern_checks(o, checks); });
    for (const auto& c : checks) {
      if (c.status != "pass") {
        result.warnings.push_back("published pattern check " + c.check +
                                  (c.age_months ? " at " + std::to_string(*c.age_months) + " months" : std::string()) +
                                  ": " + c.status + " (" + c.detail + ")");
      }
    }
  }
  return out;
}

// Validate, compute, then write. Exceptions propagate before any file exists.
inline CommandResult run_command(Command command, const RunConfig& config) {
  validate(config, command);
  Session session(config);
  session.manifest().set_command(std::string(to_string(command)));
  session.manifest().set_config(config_to_json(config));
  CommandResult result;
  OutputSet outputs;
  switch (command) {
    case Command::ingest: outputs = cmd_ingest(session); break;
    case Command::mcdip: outputs = cmd_mcdip(session); break;
    case Command::predictors: outputs = cmd_predictors(session); break;
    case Command::correlate: outputs = cmd_correlate(session); break;
    case Command::shuffle: outputs = cmd_shuffle(session); break;
    case Command::fit: outputs = cmd_fit(session, result); break;
    case Command::report: outputs = cmd_report(session, result); break;
  }
  auto warnings = session.warnings();
  warnings.insert(warnings.end(), result.warnings.begin(), result.warnings.end());
  result.warnings = std::move(warnings);
  result.files = outputs.commit(config.out_dir, session.manifest());
  return result;
}

}  // namespace prokwo
