#pragma once

// Transcript ingestion: minimal CHAT parsing, the normalized JSON-lines
// record format, token normalization and cumulative age slices.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "prokwo/error.hpp"

namespace prokwo {

inline constexpr int kMinAgeMonths = 16;
inline constexpr int kMaxAgeMonths = 30;

struct Utterance {
  std::string speaker;
  std::vector<std::string> tokens;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Document {
  std::string doc_id;
  std::optional<int> child_age_months;
  std::vector<Utterance> utterances;
  std::string source;

  friend bool operator==(const Document&, const Document&) = default;
};

class Corpus {
 public:
  Corpus() = default;

  void add(Document doc) {
    if (doc.doc_id.empty()) throw DataError("document with empty doc_id");
    if (doc.child_age_months && *doc.child_age_months < 0) {
      throw DataError(doc.doc_id + ": negative child_age_months");
    }
    auto [it, inserted] = index_.emplace(doc.doc_id, documents_.size());
    if (!inserted) throw DataError("duplicate doc_id '" + doc.doc_id + "'");
    documents_.push_back(std::move(doc));
  }

  // Merge order is irrelevant to the result except for document order.
  void merge(Corpus other) {
    for (auto& doc : other.documents_) add(std::move(doc));
  }

  const std::vector<Document>& documents() const { return documents_; }
  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }

  const Document* find(const std::string& doc_id) const {
    auto it = index_.find(doc_id);
    return it == index_.end() ? nullptr : &documents_[it->second];
  }

  std::size_t age_tagged_count() const {
    return static_cast<std::size_t>(std::count_if(documents_.begin(), documents_.end(),
                                                  [](const Document& d) { return d.child_age_months.has_value(); }));
  }

  friend bool operator==(const Corpus& a, const Corpus& b) { return a.documents_ == b.documents_; }

 private:
  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct SpeakerFilter {
  bool include_target_child = false;
  std::string target_child_code = "CHI";

  bool accepts(std::string_view speaker) const { return include_target_child || speaker != target_child_code; }
};

struct SkippedDocument {
  std::string doc_id;
  std::string reason;
};

// Documents up to an age cutoff. Holds indices into a Corpus that must outlive it.
struct CorpusSlice {
  const Corpus* corpus = nullptr;
  int age_cutoff_months = 0;
  std::vector<std::size_t> document_indices;
  SpeakerFilter speaker_filter;
  std::vector<SkippedDocument> skipped;

  std::size_t size() const { return document_indices.size(); }
  const Document& document(std::size_t i) const { return corpus->documents()[document_indices[i]]; }
};

// ---------------------------------------------------------------------------
// Tokenization

namespace detail {

inline bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '\'' || c == '_' || c >= 0x80; }

inline std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Drops bracketed material ([...] and <...>, nesting allowed) and CHAT media
// bullets delimited by U+0015. Unmatched closers are dropped as well.
inline std::string strip_bracketed(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  int square = 0;
  int angle = 0;
  bool bullet = false;
  for (char c : text) {
    if (c == '\x15') {
      bullet = !bullet;
      out.push_back(' ');
      continue;
    }
    if (bullet) continue;
    if (c == '[') {
      ++square;
    } else if (c == ']') {
      if (square > 0) --square;
      out.push_back(' ');
    } else if (c == '<') {
      ++angle;
    } else if (c == '>') {
      if (angle > 0) --angle;
      out.push_back(' ');
    } else if (square == 0 && angle == 0) {
      out.push_back(c);
    }
  }
  return out;
}

inline std::optional<std::string> clean_token(std::string_view raw) {
  if (raw.empty() || raw.front() == '&' || raw.front() == '@') return std::nullopt;
  // "word@c" style special-form codes: keep the word, drop the code.
  if (auto at = raw.find('@'); at != std::string_view::npos) raw = raw.substr(0, at);
  std::string token;
  token.reserve(raw.size());
  for (char c : raw) {
    // CHAT marks omitted sounds with parentheses: "(be)cause" -> "because".
    if (c == '(' || c == ')') continue;
    token.push_back(c);
  }
  std::size_t begin = 0;
  std::size_t end = token.size();
  while (begin < end && !is_word_char(static_cast<unsigned char>(token[begin]))) ++begin;
  while (end > begin && !is_word_char(static_cast<unsigned char>(token[end - 1]))) --end;
  token = token.substr(begin, end - begin);
  if (token.empty()) return std::nullopt;
  const bool has_alnum = std::any_of(token.begin(), token.end(), [](unsigned char c) { return std::isalnum(c) || c >= 0x80; });
  if (!has_alnum) return std::nullopt;
  return to_lower(token);
}

}  // namespace detail

// Lowercased whitespace tokens with CHAT markup removed.
inline std::vector<std::string> normalize_tokens(std::string_view raw_utterance) {
  const std::string stripped = detail::strip_bracketed(raw_utterance);
  std::vector<std::string> tokens;
  std::istringstream words(stripped);
  std::string word;
  while (words >> word) {
    if (auto token = detail::clean_token(word)) tokens.push_back(std::move(*token));
  }
  return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

// ---------------------------------------------------------------------------
// CHAT

struct ChatParseResult {
  Document document;
  std::vector<std::string> warnings;
};

// Parses a CHAT age field "Y;MM.DD" into whole months (days truncated).
inline std::optional<int> parse_chat_age(std::string_view field) {
  const auto semi = field.find(';');
  if (semi == std::string_view::npos || semi == 0) return std::nullopt;
  auto digits = [](std::string_view s) -> std::optional<int> {
    if (s.empty()) return 0;
    int v = 0;
    for (char c : s) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
      v = v * 10 + (c - '0');
    }
    return v;
  };
  const auto years = digits(field.substr(0, semi));
  std::string_view rest = field.substr(semi + 1);
  if (auto dot = rest.find('.'); dot != std::string_view::npos) rest = rest.substr(0, dot);
  const auto months = digits(rest);
  if (!years || !months || *months >= 12) return std::nullopt;
  return *years * 12 + *months;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

}  // namespace detail

// Parses CHAT text. The target child is the @ID participant whose role is
// Target_Child, falling back to the participant coded CHI.
inline ChatParseResult parse_chat(std::string_view raw_text, const std::string& doc_id, const std::string& source = "chat") {
  ChatParseResult result;
  result.document.doc_id = doc_id;
  result.document.source = source;

  // Join tab-initial continuation lines onto the line they continue.
  struct Line {
    std::size_t number;
    std::string text;
  };
  std::vector<Line> lines;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= raw_text.size()) {
    auto end = raw_text.find('\n', pos);
    if (end == std::string_view::npos) end = raw_text.size();
    std::string_view line = raw_text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++number;
    if (!line.empty() && line.front() == '\t' && !lines.empty()) {
      lines.back().text += ' ';
      lines.back().text += line.substr(1);
    } else {
      lines.push_back({number, std::string(line)});
    }
    if (end == raw_text.size()) break;
    pos = end + 1;
  }

  std::optional<int> role_age;
  bool role_found = false;
  std::optional<int> chi_age;
  bool chi_found = false;

  for (const auto& [line_no, text] : lines) {
    if (text.empty()) continue;
    if (text.front() == '@') {
      if (text.rfind("@ID:", 0) != 0) continue;
      const auto fields = detail::split(detail::trim(std::string_view(text).substr(4)), '|');
      if (fields.size() < 4) continue;
      const auto code = detail::trim(fields[2]);
      const auto age = parse_chat_age(detail::trim(fields[3]));
      const bool target_role = fields.size() > 7 && detail::trim(fields[7]) == "Target_Child";
      if (target_role && !role_found) {
        role_found = true;
        role_age = age;
      }
      if (code == "CHI" && !chi_found) {
        chi_found = true;
        chi_age = age;
      }
    } else if (text.front() == '*') {
      const auto colon = text.find(':');
      if (colon == std::string::npos) throw ParseError(source, line_no, "utterance line without ':'");
      Utterance u;
      u.speaker = std::string(detail::trim(std::string_view(text).substr(1, colon - 1)));
      u.tokens = normalize_tokens(std::string_view(text).substr(colon + 1));
      result.document.utterances.push_back(std::move(u));
    }
    // '%' dependent tiers and anything else are ignored.
  }

  if (role_found || chi_found) {
    result.document.child_age_months = role_found ? role_age : chi_age;
    if (!result.document.child_age_months) result.warnings.push_back(doc_id + ": target child @ID has no usable age");
  } else {
    result.warnings.push_back(doc_id + ": no target child @ID line");
  }
  return result;
}

// ---------------------------------------------------------------------------
// Normalized records (one JSON object per line)

inline Document document_from_record(const nlohmann::json& record, const std::string& where) {
  if (!record.is_object()) throw DataError(where + ": record is not a JSON object");
  auto id = record.find("doc_id");
  if (id == record.end() || !id->is_string() || id->get<std::string>().empty()) {
    throw DataError(where + ": record missing doc_id");
  }
  Document doc;
  doc.doc_id = id->get<std::string>();
  if (auto age = record.find("child_age_months"); age != record.end() && !age->is_null()) {
    if (!age->is_number_integer()) throw DataError(where + ": child_age_months must be an integer");
    doc.child_age_months = age->get<int>();
  }
  if (auto src = record.find("source"); src != record.end() && src->is_string()) doc.source = src->get<std::string>();
  if (auto utts = record.find("utterances"); utts != record.end()) {
    if (!utts->is_array()) throw DataError(where + ": utterances must be an array");
    for (const auto& u : *utts) {
      Utterance out;
      out.speaker = u.value("speaker", std::string());
      if (auto toks = u.find("tokens"); toks != u.end()) {
        for (const auto& t : *toks) out.tokens.push_back(detail::to_lower(t.get<std::string>()));
      } else if (auto text = u.find("text"); text != u.end()) {
        out.tokens = normalize_tokens(text->get<std::string>());
      } else {
        throw DataError(where + ": utterance needs 'tokens' or 'text'");
      }
      doc.utterances.push_back(std::move(out));
    }
  }
  return doc;
}

inline nlohmann::json document_to_record(const Document& doc) {
  nlohmann::json record;
  record["doc_id"] = doc.doc_id;
  record["child_age_months"] = doc.child_age_months ? nlohmann::json(*doc.child_age_months) : nlohmann::json(nullptr);
  record["source"] = doc.source;
  auto utts = nlohmann::json::array();
  for (const auto& u : doc.utterances) utts.push_back({{"speaker", u.speaker}, {"tokens", u.tokens}});
  record["utterances"] = std::move(utts);
  return record;
}

inline Corpus parse_normalized(std::istream& in, const std::string& source = "normalized") {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
    const std::string where = source + ":" + std::to_string(line_no);
    try {
      corpus.add(document_from_record(record, where));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const DataError& e) {
      if (std::string_view(e.what()).rfind(where, 0) == 0) throw;
      throw DataError(where + ": " + e.what());
    }
  }
  return corpus;
}

inline Corpus parse_normalized(std::string_view text, const std::string& source = "normalized") {
  std::istringstream in{std::string(text)};
  return parse_normalized(in, source);
}

inline void write_normalized(std::ostream& out, const Corpus& corpus) {
  for (const auto& doc : corpus.documents()) out << document_to_record(doc).dump() << '\n';
}

inline std::string serialize_normalized(const Corpus& corpus) {
  std::ostringstream out;
  write_normalized(out, corpus);
  return out.str();
}

// ---------------------------------------------------------------------------
// Loading from disk

struct LoadedCorpus {
  Corpus corpus;
  std::vector<std::string> warnings;
};

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Files matching `extension` under `dir`, recursively, in lexicographic path order.
inline std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir, const std::string& extension) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError(dir.string() + ": not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == extension) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

// doc_id is the path relative to `dir` without extension.
inline LoadedCorpus load_chat_directory(const std::filesystem::path& dir) {
  LoadedCorpus loaded;
  for (const auto& path : list_files(dir, ".cha")) {
    auto id = std::filesystem::relative(path, dir).replace_extension().generic_string();
    auto parsed = parse_chat(read_text_file(path), id, std::filesystem::relative(path, dir).generic_string());
    loaded.corpus.add(std::move(parsed.document));
    for (auto& w : parsed.warnings) loaded.warnings.push_back(std::move(w));
  }
  return loaded;
}

inline LoadedCorpus load_normalized_path(const std::filesystem::path& path) {
  LoadedCorpus loaded;
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    files = list_files(path, ".jsonl");
  } else {
    files.push_back(path);
  }
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError(file.string() + ": cannot open file");
    loaded.corpus.merge(parse_normalized(in, file.string()));
  }
  return loaded;
}

// ---------------------------------------------------------------------------
// Slicing

inline CorpusSlice cumulative_slice(const Corpus& corpus, int age_cutoff_months, SpeakerFilter filter = {}) {
  if (age_cutoff_months < kMinAgeMonths || age_cutoff_months > kMaxAgeMonths) {
    throw ConfigError("age cutoff " + std::to_string(age_cutoff_months) + " outside [16, 30]");
  }
  CorpusSlice slice;
  slice.corpus = &corpus;
  slice.age_cutoff_months = age_cutoff_months;
  slice.speaker_filter = std::move(filter);
  const auto& docs = corpus.documents();
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!docs[i].child_age_months) {
      slice.skipped.push_back({docs[i].doc_id, "missing-age"});
    } else if (*docs[i].child_age_months <= age_cutoff_months) {
      slice.document_indices.push_back(i);
    }
  }
  return slice;
}

inline std::vector<SkippedDocument> skipped_documents(const Corpus& corpus) {
  std::vector<SkippedDocument> skipped;
  for (const auto& doc : corpus.documents()) {
    if (!doc.child_age_months) skipped.push_back({doc.doc_id, "missing-age"});
  }
  return skipped;
}

}  // namespace prokwo
