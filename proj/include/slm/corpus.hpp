#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "slm/error.hpp"
#include "slm/meta.hpp"
#include "slm/random.hpp"
#include "slm/text.hpp"

namespace slm::corpus {

/// A story with its sentences in gold order.
struct Story {
  std::string story_id;
  std::vector<std::string> sentences;

  std::size_t size() const noexcept { return sentences.size(); }
  friend bool operator==(const Story&, const Story&) = default;
};

/// A story whose sentences were permuted. `gold_perm[k]` is the gold position
/// of the sentence now at index k.
struct ShuffledStory {
  std::string story_id;
  std::vector<std::string> sentences;
  std::vector<std::size_t> gold_perm;

  friend bool operator==(const ShuffledStory&, const ShuffledStory&) = default;
};

enum class Format { CsvRoc, Jsonl };

inline Format parse_format(std::string_view name) {
  if (name == "csv-roc" || name == "csv") return Format::CsvRoc;
  if (name == "jsonl") return Format::Jsonl;
  throw ValidationError("unknown corpus format '" + std::string(name) + "'");
}

// Picks a format from the file extension; .csv is csv-roc, anything else jsonl.
inline Format guess_format(std::string_view path) {
  return path.size() >= 4 && path.substr(path.size() - 4) == ".csv" ? Format::CsvRoc
                                                                     : Format::Jsonl;
}

namespace detail {

struct CsvRecord {
  std::size_t line = 0;  // line on which the record starts
  std::vector<std::string> fields;
};

// RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF terminators and
// line breaks inside quotes.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  std::optional<CsvRecord> next() {
    CsvRecord rec;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    bool any = false;
    rec.line = line_;
    int ch;
    while ((ch = in_.get()) != EOF) {
      any = true;
      const char c = static_cast<char>(ch);
      if (in_quotes) {
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            in_quotes = false;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(c);
        }
        continue;
      }
      if (c == '"') {
        if (!field.empty() || field_was_quoted) {
          throw ParseError(line_, "stray quote inside unquoted field");
        }
        in_quotes = true;
        field_was_quoted = true;
      } else if (c == ',') {
        rec.fields.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
      } else if (c == '\r') {
        if (in_.peek() != '\n') throw ParseError(line_, "bare carriage return");
      } else if (c == '\n') {
        ++line_;
        rec.fields.push_back(std::move(field));
        return rec;
      } else {
        if (field_was_quoted) throw ParseError(line_, "text after closing quote");
        field.push_back(c);
      }
    }
    if (in_quotes) throw ParseError(rec.line, "unterminated quoted field");
    if (!any) return std::nullopt;
    rec.fields.push_back(std::move(field));
    return rec;
  }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
};

inline bool blank_record(const CsvRecord& r) {
  return r.fields.size() == 1 && text::trim(r.fields[0]).empty();
}

inline void strip_bom(std::string& s) {
  if (s.size() >= 3 && s.compare(0, 3, "\xEF\xBB\xBF") == 0) s.erase(0, 3);
}

inline void check_unique(std::unordered_set<std::string>& seen, const std::string& id,
                         std::size_t line) {
  if (!seen.insert(id).second) throw ParseError(line, "duplicate story_id '" + id + "'");
}

inline std::string checked_sentence(std::string_view raw, const std::string& id,
                                    std::size_t index, std::size_t line) {
  auto s = text::trim(raw);
  if (s.empty()) {
    throw ParseError(line, "story '" + id + "': sentence" + std::to_string(index + 1) +
                               " is empty");
  }
  return std::string(s);
}

inline constexpr std::string_view kRocHeader[] = {"storyid",   "storytitle", "sentence1",
                                                  "sentence2", "sentence3",  "sentence4",
                                                  "sentence5"};

inline std::vector<Story> read_csv_roc(std::istream& in) {
  CsvReader reader(in);
  auto header = reader.next();
  if (!header) throw ParseError(1, "empty file, expected csv-roc header");
  if (!header->fields.empty()) strip_bom(header->fields[0]);
  for (const auto& f : header->fields) {
    if (f.find("RandomFifthSentenceQuiz") != std::string::npos) {
      throw TwoChoiceStoryError(
          "line 1: two-choice ending records (RandomFifthSentenceQuiz1/2) have no single "
          "gold order and are not accepted");
    }
  }
  const bool header_ok = header->fields.size() == std::size(kRocHeader) &&
                         std::equal(header->fields.begin(), header->fields.end(),
                                    std::begin(kRocHeader),
                                    [](const std::string& a, std::string_view b) {
                                      return text::trim(a) == b;
                                    });
  if (!header_ok) {
    throw ParseError(1, "expected header storyid,storytitle,sentence1,...,sentence5");
  }

  std::vector<Story> stories;
  std::unordered_set<std::string> seen;
  while (auto rec = reader.next()) {
    if (blank_record(*rec)) continue;
    if (rec->fields.size() > std::size(kRocHeader)) {
      throw TwoChoiceStoryError("line " + std::to_string(rec->line) + ": record has " +
                                std::to_string(rec->fields.size()) +
                                " fields; multi-ending records are not accepted");
    }
    if (rec->fields.size() != std::size(kRocHeader)) {
      throw ParseError(rec->line, "expected 7 fields, found " +
                                      std::to_string(rec->fields.size()));
    }
    Story story;
    story.story_id = std::string(text::trim(rec->fields[0]));
    if (story.story_id.empty()) throw ParseError(rec->line, "empty storyid");
    check_unique(seen, story.story_id, rec->line);
    for (std::size_t k = 0; k < 5; ++k) {
      story.sentences.push_back(checked_sentence(rec->fields[k + 2], story.story_id, k, rec->line));
    }
    stories.push_back(std::move(story));
  }
  return stories;
}

inline std::vector<Story> read_jsonl(std::istream& in) {
  std::vector<Story> stories;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) strip_bom(line);
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
    if (is_metadata_record(j)) continue;
    if (!j.is_object() || !j.contains("story_id") || !j["story_id"].is_string() ||
        !j.contains("sentences") || !j["sentences"].is_array()) {
      throw ParseError(lineno, "expected {\"story_id\": str, \"sentences\": [str,...]}");
    }
    Story story;
    story.story_id = j["story_id"].get<std::string>();
    if (story.story_id.empty()) throw ParseError(lineno, "empty story_id");
    check_unique(seen, story.story_id, lineno);
    const auto& arr = j["sentences"];
    if (arr.empty()) throw ParseError(lineno, "story '" + story.story_id + "' has no sentences");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      if (!arr[k].is_string()) throw ParseError(lineno, "sentence is not a string");
      story.sentences.push_back(
          checked_sentence(arr[k].get<std::string>(), story.story_id, k, lineno));
    }
    stories.push_back(std::move(story));
  }
  return stories;
}

}  // namespace detail

inline std::vector<Story> read_corpus(std::istream& in, Format format) {
  return format == Format::CsvRoc ? detail::read_csv_roc(in) : detail::read_jsonl(in);
}

inline std::vector<Story> load_corpus(const std::string& path, Format format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open corpus file '" + path + "'");
  return read_corpus(in, format);
}

inline std::vector<Story> load_corpus(const std::string& path) {
  return load_corpus(path, guess_format(path));
}

inline nlohmann::json to_json(const Story& s) {
  return {{"story_id", s.story_id}, {"sentences", s.sentences}};
}

inline void write_jsonl(std::ostream& out, const std::vector<Story>& stories) {
  for (const auto& s : stories) out << to_json(s).dump() << '\n';
}

// Writes csv-roc; only valid for five-sentence stories. Story titles are not
// retained by the loader, so the title column is left empty.
inline void write_csv_roc(std::ostream& out, const std::vector<Story>& stories) {
  const auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q.push_back('"');
      q.push_back(c);
    }
    return q + "\"";
  };
  out << "storyid,storytitle,sentence1,sentence2,sentence3,sentence4,sentence5\n";
  for (const auto& s : stories) {
    if (s.size() != 5) {
      throw ValidationError("csv-roc requires five sentences, story '" + s.story_id + "' has " +
                            std::to_string(s.size()));
    }
    out << quote(s.story_id) << ",";
    for (const auto& sentence : s.sentences) out << "," << quote(sentence);
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Shuffling

inline ShuffledStory shuffle_story(const Story& story, std::uint64_t seed) {
  std::vector<std::size_t> order(story.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  ShuffledStory out;
  out.story_id = story.story_id;
  out.gold_perm = order;
  out.sentences.reserve(order.size());
  for (auto idx : order) out.sentences.push_back(story.sentences[idx]);
  return out;
}

inline Story unshuffle(const ShuffledStory& s) {
  Story story{s.story_id, std::vector<std::string>(s.sentences.size())};
  for (std::size_t k = 0; k < s.sentences.size(); ++k) {
    story.sentences.at(s.gold_perm.at(k)) = s.sentences[k];
  }
  return story;
}

// ---------------------------------------------------------------------------
// Splitting

/// Exact non-negative rational.
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  friend bool operator==(const Fraction&, const Fraction&) = default;
};

// Parses "4/5", "0.8" or "1" into an exact fraction.
inline Fraction parse_fraction(std::string_view s) {
  s = text::trim(s);
  const auto digits = [&](std::string_view d) {
    if (d.empty() || d.size() > 15 ||
        !std::all_of(d.begin(), d.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw ValidationError("invalid fraction '" + std::string(s) + "'");
    }
    return std::stoll(std::string(d));
  };
  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    Fraction f{digits(s.substr(0, slash)), digits(s.substr(slash + 1))};
    if (f.den == 0) throw ValidationError("zero denominator in '" + std::string(s) + "'");
    return f;
  }
  if (auto dot = s.find('.'); dot != std::string_view::npos) {
    const auto whole = s.substr(0, dot);
    const auto frac = s.substr(dot + 1);
    std::int64_t den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    return {(whole.empty() ? 0 : digits(whole)) * den + digits(frac), den};
  }
  return {digits(s), 1};
}

struct SplitSpec {
  Fraction train{4, 5};
  Fraction validation{1, 10};
  Fraction test{1, 10};
  std::uint64_t seed = 0;
};

inline void validate(const SplitSpec& spec) {
  for (const Fraction* f : {&spec.train, &spec.validation, &spec.test}) {
    if (f->den <= 0 || f->num <= 0 || f->num >= f->den) {
      throw ValidationError("split fractions must lie strictly between 0 and 1");
    }
  }
  using i128 = __int128;
  const i128 a = spec.train.num, b = spec.train.den;
  const i128 c = spec.validation.num, d = spec.validation.den;
  const i128 e = spec.test.num, f = spec.test.den;
  if (a * d * f + c * b * f + e * b * d != b * d * f) {
    throw ValidationError("split fractions must sum to exactly 1");
  }
}

template <typename T>
struct SplitOf {
  std::vector<T> train, validation, test;
};

using Split = SplitOf<Story>;

/// Seeded partition. Validation and test sizes are floor(N * fraction); the
/// remainder goes to train.
template <typename T>
SplitOf<T> split_items(const std::vector<T>& items, const SplitSpec& spec) {
  validate(spec);
  if (items.empty()) throw ValidationError("cannot split an empty corpus");
  const auto n = static_cast<__int128>(items.size());
  const auto n_val = static_cast<std::size_t>(n * spec.validation.num / spec.validation.den);
  const auto n_test = static_cast<std::size_t>(n * spec.test.num / spec.test.den);
  const std::size_t n_train = items.size() - n_val - n_test;

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  rng.shuffle(order);

  SplitOf<T> out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& bucket = k < n_train ? out.train : (k < n_train + n_val ? out.validation : out.test);
    bucket.push_back(items[order[k]]);
  }
  return out;
}

inline Split split_corpus(const std::vector<Story>& stories, const SplitSpec& spec) {
  return split_items(stories, spec);
}

}  // namespace slm::corpus
