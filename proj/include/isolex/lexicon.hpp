#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <regex>
#include <stdexcept>
#include <string>
#include <vector>

#include "isolex/corpus.hpp"
#include "isolex/enums.hpp"

namespace isolex {

class LexiconError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-topic case-insensitive regex patterns, compiled at construction.
class Lexicon {
 public:
  struct Pattern {
    std::string source;
    std::regex regex;
  };

  Lexicon(std::string name, std::string version, const std::map<TopicId, std::vector<std::string>>& patterns);

  const std::string& name() const { return name_; }
  const std::string& version() const { return version_; }
  const std::map<TopicId, std::vector<Pattern>>& patterns() const { return patterns_; }
  bool covers(TopicId topic) const { return patterns_.count(topic) != 0; }

  std::map<TopicId, std::vector<std::string>> sources() const;

 private:
  std::string name_;
  std::string version_;
  std::map<TopicId, std::vector<Pattern>> patterns_;
};

/// Parses a lexicon JSON document. Errors name the topic and pattern index.
Lexicon parse_lexicon(std::string_view json_text);
Lexicon compile_lexicon(const std::filesystem::path& path);

/// Half-open byte interval.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const Span&) const = default;
  auto operator<=>(const Span&) const = default;
};

enum class NarrativeField { LeNarrative, CmeNarrative };

template <>
struct EnumTraits<NarrativeField> {
  static constexpr std::array<std::string_view, 2> names{"LE_NARRATIVE", "CME_NARRATIVE"};
};

struct MatchRecord {
  std::string decedent_id;
  TopicId topic{};
  NarrativeField field{};
  std::size_t pattern_index = 0;
  Span span;
  std::string matched_text;

  bool operator==(const MatchRecord&) const = default;
};

/// Every (pattern, field) hit in a text, spans widened to UTF-8 boundaries.
std::vector<MatchRecord> match_text(const Lexicon& lexicon, std::string_view text, const std::string& decedent_id,
                                    NarrativeField field);

struct MatchSet {
  std::size_t total_decedents = 0;
  // Sorted by (decedent corpus position, field, span start, topic, pattern).
  std::vector<MatchRecord> records;
  // Corpus positions of flagged decedents, ascending.
  std::map<TopicId, std::vector<std::size_t>> flagged;
  std::vector<std::string> decedent_ids;  // corpus order, for position lookup
  std::size_t decedents_with_any_match = 0;
  std::size_t fields_with_any_match = 0;
  std::size_t fields_scanned = 0;

  std::size_t flagged_count(TopicId topic) const;
  bool is_flagged(TopicId topic, std::size_t position) const;
};

/// Scans LE/CME narratives only. `workers` > 1 fans out across records; the
/// result does not depend on the worker count.
MatchSet match_corpus(const Corpus& corpus, const Lexicon& lexicon, unsigned workers = 1);

struct MatchRateRow {
  TopicId topic{};
  std::size_t count = 0;
  double percent = 0.0;
};

std::vector<MatchRateRow> match_rate_table(const MatchSet& matches, std::size_t total_decedents);

/// 100*count/total at 2 decimals.
std::string format_match_percent(double percent);

std::string match_set_csv(const MatchSet& matches);
/// Rebuilds a MatchSet from its CSV export plus the corpus it was run on.
MatchSet match_set_from_csv(std::string_view csv_text, const Corpus& corpus);

struct AnnotationItem {
  std::string decedent_id;
  std::string text;         // narrative_text() of the decedent
  std::vector<Span> spans;  // sorted, deduplicated, within text
};

struct AnnotationBatch {
  TopicId topic{};
  std::vector<AnnotationItem> items;
  std::uint64_t sample_seed = 0;
  std::size_t size = 0;
  bool short_of_requested = false;
};

/// Uniform sample without replacement of flagged decedents for `topic`.
AnnotationBatch sample_for_annotation(const MatchSet& matches, const Corpus& corpus, TopicId topic, int n,
                                      std::uint64_t seed);

}  // namespace isolex
