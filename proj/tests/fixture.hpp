#pragma once

// The committed fixture and the exact configuration of the golden run. The
// update_golden build target passes the same flags to the command-line tool.

#include <filesystem>
#include <set>
#include <string>

#include "prokwo/pipeline.hpp"

namespace fixture {

inline std::filesystem::path data_dir() { return PROKWO_TEST_DATA_DIR; }
inline std::filesystem::path fixture_dir() { return data_dir() / "fixture"; }
inline std::filesystem::path golden_dir() { return data_dir() / "golden"; }

inline prokwo::RunConfig golden_config(const std::filesystem::path& out) {
  prokwo::RunConfig c;
  c.corpus_path = fixture_dir() / "corpus";
  c.lexicon_path = fixture_dir() / "lexicon.csv";
  c.administrations_path = fixture_dir() / "administrations.csv";
  c.ages = {18, 21, 24};
  c.shuffles = 200;
  c.out_dir = out;
  return c;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("prokwo_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

struct GoldenComparison {
  std::set<std::string> missing;     // golden file not produced
  std::set<std::string> unexpected;  // produced CSV without a golden file
  std::set<std::string> different;   // byte mismatch
  bool ok() const { return missing.empty() && unexpected.empty() && different.empty(); }
};

inline GoldenComparison compare_with_golden(const std::filesystem::path& produced) {
  GoldenComparison cmp;
  auto csvs = [](const std::filesystem::path& dir) {
    std::set<std::string> names;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      if (e.path().extension() == ".csv") names.insert(e.path().filename().string());
    }
    return names;
  };
  const auto golden = csvs(golden_dir());
  const auto actual = csvs(produced);
  for (const auto& name : golden) {
    if (!actual.count(name)) {
      cmp.missing.insert(name);
    } else if (prokwo::read_text_file(golden_dir() / name) != prokwo::read_text_file(produced / name)) {
      cmp.different.insert(name);
    }
  }
  for (const auto& name : actual) {
    if (!golden.count(name)) cmp.unexpected.insert(name);
  }
  if (golden.empty()) cmp.missing.insert("(no golden files committed)");
  return cmp;
}

}  // namespace fixture
