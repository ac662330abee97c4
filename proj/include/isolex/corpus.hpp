#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isolex/enums.hpp"

namespace isolex {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inclusive range of incident years.
struct YearRange {
  int first = 2002;
  int last = 2020;

  bool contains(int year) const { return year >= first && year <= last; }
  bool operator==(const YearRange&) const = default;
};

struct NarrativeBundle {
  std::optional<std::string> le_narrative;
  std::optional<std::string> cme_narrative;
  std::optional<std::string> le_summary;
  std::optional<std::string> cme_summary;

  bool has_narrative() const {
    return (le_narrative && !le_narrative->empty()) || (cme_narrative && !cme_narrative->empty());
  }
  bool operator==(const NarrativeBundle&) const = default;
};

struct DecedentRecord {
  std::string id;
  int incident_year = 2002;
  Sex sex = Sex::Unknown;
  std::optional<int> age;
  RaceEthnicity race_ethnicity = RaceEthnicity::Unknown;
  SexualOrientation sexual_orientation = SexualOrientation::NotReported;
  Transgender transgender = Transgender::NoOrUnknown;
  MaritalStatus marital_status = MaritalStatus::Unknown;
  RelationshipStatus relationship_status = RelationshipStatus::Unknown;
  Homeless homeless = Homeless::Unknown;
  PhysicalHealth physical_health_problem = PhysicalHealth::NoOrUnknown;
  std::optional<int> num_substances;
  NarrativeBundle narratives;
  // Populated for synthetic corpora only; empty means absent.
  std::map<TopicId, bool> ground_truth;

  bool operator==(const DecedentRecord&) const = default;
};

using Corpus = std::vector<DecedentRecord>;

/// Full-length narrative text presented to annotators and classifiers:
/// LE then CME, separated by a blank line when both are present.
std::string narrative_text(const DecedentRecord& record);

/// Byte offset at which the CME narrative starts inside narrative_text().
std::size_t cme_offset(const DecedentRecord& record);

struct LoadResult {
  Corpus records;
  std::size_t rejected_out_of_window = 0;
  std::size_t with_narrative = 0;
  std::vector<std::string> warnings;
};

/// One JSON object per line. Throws CorpusError naming the line on any schema
/// violation or duplicate id; out-of-window years are counted and skipped.
LoadResult load_corpus(const std::filesystem::path& path, YearRange window = {});
LoadResult parse_corpus(std::string_view jsonl, YearRange window = {});

std::string serialize_record(const DecedentRecord& record);
std::string serialize_corpus(const Corpus& corpus);
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

// ---------------------------------------------------------------------------
// Table-1 style summary

struct CategoryRow {
  std::string variable;
  std::string level;  // enum name, e.g. "MALE"
  std::string label;  // display label, e.g. "Male"
  std::size_t count = 0;
  double percent = 0.0;
};

struct ContinuousRow {
  std::string variable;
  std::size_t n = 0;
  std::size_t missing = 0;
  double mean = 0.0;
  double sd = 0.0;  // n-1 denominator; 0 when n < 2
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct DemographicSummary {
  std::size_t total = 0;
  std::vector<CategoryRow> categories;
  std::vector<ContinuousRow> continuous;

  const CategoryRow& category(std::string_view variable, std::string_view level) const;
  const ContinuousRow& continuous_row(std::string_view variable) const;
};

DemographicSummary demographic_summary(const Corpus& corpus);

/// "239,616 (78.1%)" style cell.
std::string format_count_percent(std::size_t count, double percent, int decimals = 1);

std::string demographic_summary_csv(const DemographicSummary& summary);

// ---------------------------------------------------------------------------
// Synthetic corpora

/// Category probabilities per demographic field, indexed by enum order.
struct DemographicMarginals {
  std::vector<double> sex;
  std::vector<double> race_ethnicity;
  std::vector<double> sexual_orientation;
  std::vector<double> transgender;
  std::vector<double> marital_status;
  std::vector<double> relationship_status;
  std::vector<double> homeless;
  std::vector<double> physical_health_problem;

  /// Marginals from the 2002-2020 national suicide decedent table.
  static DemographicMarginals national_defaults();
};

/// Multiplies the probability of `level` of `field` for decedents flagged
/// with `topic`; the marginal is renormalized afterwards. Field and level use
/// the corpus JSON names, e.g. {"sex", "MALE"}.
struct AssociationMultiplier {
  TopicId topic;
  std::string field;
  std::string level;
  double multiplier = 1.0;
};

struct TopicPhraseBank {
  std::vector<std::string> narrative;  // relevant sentences, lexicon-matchable
  std::vector<std::string> decoy;      // lexicon-matchable but not relevant
  std::vector<std::string> summary;    // short circumstance summaries
};

struct PhraseBanks {
  std::map<TopicId, TopicPhraseBank> topics;
  std::vector<std::string> filler_opening;
  std::vector<std::string> filler_closing;
  std::vector<std::string> background_summary;

  static PhraseBanks defaults();
};

struct SyntheticConfig {
  std::size_t n_records = 1000;
  std::map<TopicId, double> topic_prevalence;
  // Probability that a record not flagged for a topic still carries one of
  // that topic's decoy sentences.
  std::map<TopicId, double> decoy_rate;
  // Mean age shift (years) applied to decedents flagged for a topic.
  std::map<TopicId, double> age_shift;
  double summary_presence_rate = 0.17;
  double narrative_presence_rate = 0.705;
  double age_missing_rate = 0.001;
  double num_substances_missing_rate = 0.567;
  YearRange year_range{};
  DemographicMarginals demographic_marginals = DemographicMarginals::national_defaults();
  std::vector<AssociationMultiplier> associations;
  PhraseBanks phrases = PhraseBanks::defaults();
  std::uint64_t seed = 42;

  /// Throws std::invalid_argument when a probability or marginal is invalid.
  void validate() const;

  /// Six planted topics at surveillance-like prevalences, with decoy rates,
  /// age shifts and association multipliers whose signs follow the national
  /// odds-ratio table.
  static SyntheticConfig defaults();
};

Corpus generate_synthetic(const SyntheticConfig& config);

}  // namespace isolex
