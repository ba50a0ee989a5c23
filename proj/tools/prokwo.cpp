// Command-line front end. Exit codes: 0 success, 1 usage or configuration
// error, 2 data error, 3 a model failed to converge (outputs still written).

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prokwo/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNonConvergence = 3 };

struct RawOptions {
  std::string corpus_dir;
  std::string corpus_format = "chat";
  std::string lexicon;
  std::string exclusions;
  std::string administrations;
  std::string mcdip;
  std::string predictors;
  std::string ages = "16..30";
  std::size_t window = 7;
  bool include_child_speech = false;
  bool no_diagonal = false;
  std::string window_fillers = "all";
  std::size_t shuffles = 1000;
  std::uint64_t seed = prokwo::kDefaultSeed;
  std::string model = "full";
  std::string out = "out";
  unsigned threads = 1;
  bool svg = false;
  bool dump_cooccurrence = false;
  bool check_published_patterns = false;
};

void add_common_options(CLI::App& cmd, RawOptions& o) {
  cmd.add_option("--corpus-dir", o.corpus_dir, "CHAT directory, or normalized .jsonl file/directory");
  cmd.add_option("--corpus-format", o.corpus_format, "chat | normalized")->capture_default_str();
  cmd.add_option("--lexicon", o.lexicon, "lexicon.csv");
  cmd.add_option("--exclusions", o.exclusions, "optional newline-separated words to exclude");
  cmd.add_option("--administrations", o.administrations, "administrations.csv (long format)");
  cmd.add_option("--mcdip", o.mcdip, "resume from an existing mcdip.csv");
  cmd.add_option("--predictors", o.predictors, "resume from an existing predictors.csv");
  cmd.add_option("--ages", o.ages, "ages in months, e.g. 16..30 or 18,21,24")->capture_default_str();
  cmd.add_option("--window", o.window, "forward window size")->capture_default_str();
  cmd.add_flag("--include-child-speech", o.include_child_speech, "count the target child's own utterances");
  cmd.add_flag("--no-diagonal", o.no_diagonal, "drop self co-occurrences");
  cmd.add_option("--window-fillers", o.window_fillers, "all | mcdi-only")->capture_default_str();
  cmd.add_option("--shuffles", o.shuffles, "shuffle baseline iterations")->capture_default_str();
  cmd.add_option("--seed", o.seed, "random seed")->capture_default_str();
  cmd.add_option("--model", o.model, "single:<predictor> | full")->capture_default_str();
  cmd.add_option("--out", o.out, "output directory")->capture_default_str();
  cmd.add_option("--threads", o.threads, "worker threads")->capture_default_str();
  cmd.add_flag("--svg", o.svg, "also write SVG figures");
  cmd.add_flag("--dump-cooccurrence", o.dump_cooccurrence, "predictors: also write cooccurrence.csv");
  cmd.add_flag("--check-published-patterns", o.check_published_patterns,
               "report: check the qualitative published pattern of results");
}

prokwo::RunConfig to_config(const RawOptions& o) {
  prokwo::RunConfig c;
  c.corpus_path = o.corpus_dir;
  c.corpus_format = prokwo::parse_corpus_format(o.corpus_format);
  c.lexicon_path = o.lexicon;
  c.exclusions_path = o.exclusions;
  c.administrations_path = o.administrations;
  c.mcdip_path = o.mcdip;
  c.predictors_path = o.predictors;
  c.ages = prokwo::parse_ages(o.ages);
  c.cooccurrence.window = o.window;
  c.cooccurrence.include_diagonal = !o.no_diagonal;
  c.cooccurrence.fillers = prokwo::parse_window_fillers(o.window_fillers);
  c.speakers.include_target_child = o.include_child_speech;
  c.shuffles = o.shuffles;
  c.seed = o.seed;
  c.model = o.model;
  c.out_dir = o.out;
  c.threads = o.threads;
  c.svg = o.svg;
  c.dump_cooccurrence = o.dump_cooccurrence;
  c.check_published_patterns = o.check_published_patterns;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prokwo: corpus statistics for child vocabulary acquisition"};
  app.require_subcommand(1);
  RawOptions options;
  const std::vector<std::pair<prokwo::Command, std::string>> commands = {
      {prokwo::Command::ingest, "Parse a corpus into normalized JSONL"},
      {prokwo::Command::mcdip, "Per-age proportion of children producing each word"},
      {prokwo::Command::predictors, "Frequency, lexical diversity, document diversity, Pro-KWo"},
      {prokwo::Command::correlate, "Predictor intercorrelations and correlations with MCDIp"},
      {prokwo::Command::shuffle, "Pro-KWo shuffle baseline"},
      {prokwo::Command::fit, "Mixed-effects logistic models of word production"},
      {prokwo::Command::report, "Every analysis plus consolidated tables and figures"},
  };
  std::vector<std::pair<prokwo::Command, CLI::App*>> subcommands;
  for (const auto& [command, help] : commands) {
    auto* sub = app.add_subcommand(std::string(prokwo::to_string(command)), help);
    add_common_options(*sub, options);
    subcommands.emplace_back(command, sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  prokwo::Command command = prokwo::Command::report;
  for (const auto& [c, sub] : subcommands) {
    if (sub->parsed()) command = c;
  }

  try {
    const auto result = prokwo::run_command(command, to_config(options));
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "wrote " << result.files.size() << " file(s) to " << options.out << '\n';
    if (!result.converged()) {
      for (const auto& m : result.nonconverged) std::cerr << "error: model did not converge: " << m << '\n';
      return kNonConvergence;
    }
    return kOk;
  } catch (const prokwo::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const prokwo::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const prokwo::SeparationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNonConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
}
