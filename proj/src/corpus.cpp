#include "isolex/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "isolex/util.hpp"
#include "json.hpp"

namespace isolex {

using nlohmann::json;
using nlohmann::ordered_json;

std::string narrative_text(const DecedentRecord& record) {
  const auto& n = record.narratives;
  const bool le = n.le_narrative && !n.le_narrative->empty();
  const bool cme = n.cme_narrative && !n.cme_narrative->empty();
  if (le && cme) return *n.le_narrative + "\n\n" + *n.cme_narrative;
  if (le) return *n.le_narrative;
  if (cme) return *n.cme_narrative;
  return {};
}

std::size_t cme_offset(const DecedentRecord& record) {
  const auto& n = record.narratives;
  if (n.le_narrative && !n.le_narrative->empty()) return n.le_narrative->size() + 2;
  return 0;
}

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw CorpusError("line " + std::to_string(line) + ": " + what);
}

template <typename E>
E required_enum(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(line, std::string("missing field \"") + key + "\"");
  if (!it->is_string()) fail(line, std::string("field \"") + key + "\" must be a string");
  auto value = parse_enum<E>(it->get<std::string>());
  if (!value) fail(line, std::string("invalid value for \"") + key + "\": " + it->get<std::string>());
  return *value;
}

std::optional<int> optional_int(const json& obj, const char* key, int lo, int hi, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) fail(line, std::string("field \"") + key + "\" must be an integer");
  const auto v = it->get<long long>();
  if (v < lo || v > hi)
    fail(line, std::string("field \"") + key + "\" out of range [" + std::to_string(lo) + ", " +
                   std::to_string(hi) + "]");
  return static_cast<int>(v);
}

std::optional<std::string> optional_text(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) fail(line, std::string("field \"") + key + "\" must be a string");
  return it->get<std::string>();
}

DecedentRecord record_from_json(const json& obj, std::size_t line) {
  if (!obj.is_object()) fail(line, "expected a JSON object");
  DecedentRecord r;
  auto id = obj.find("id");
  if (id == obj.end()) fail(line, "missing field \"id\"");
  if (!id->is_string() || id->get<std::string>().empty()) fail(line, "field \"id\" must be a non-empty string");
  r.id = id->get<std::string>();

  auto year = obj.find("incident_year");
  if (year == obj.end()) fail(line, "missing field \"incident_year\"");
  if (!year->is_number_integer()) fail(line, "field \"incident_year\" must be an integer");
  r.incident_year = year->get<int>();

  r.sex = required_enum<Sex>(obj, "sex", line);
  r.age = optional_int(obj, "age", 0, 130, line);
  r.race_ethnicity = required_enum<RaceEthnicity>(obj, "race_ethnicity", line);
  r.sexual_orientation = required_enum<SexualOrientation>(obj, "sexual_orientation", line);
  r.transgender = required_enum<Transgender>(obj, "transgender", line);
  r.marital_status = required_enum<MaritalStatus>(obj, "marital_status", line);
  r.relationship_status = required_enum<RelationshipStatus>(obj, "relationship_status", line);
  r.homeless = required_enum<Homeless>(obj, "homeless", line);
  r.physical_health_problem = required_enum<PhysicalHealth>(obj, "physical_health_problem", line);
  r.num_substances = optional_int(obj, "num_substances", 0, 1'000'000, line);
  r.narratives.le_narrative = optional_text(obj, "le_narrative", line);
  r.narratives.cme_narrative = optional_text(obj, "cme_narrative", line);
  r.narratives.le_summary = optional_text(obj, "le_summary", line);
  r.narratives.cme_summary = optional_text(obj, "cme_summary", line);

  if (auto gt = obj.find("ground_truth"); gt != obj.end() && !gt->is_null()) {
    if (!gt->is_object()) fail(line, "field \"ground_truth\" must be an object");
    for (const auto& [key, value] : gt->items()) {
      auto topic = parse_enum<TopicId>(key);
      if (!topic) fail(line, "unknown ground_truth topic: " + key);
      if (!value.is_boolean()) fail(line, "ground_truth values must be booleans");
      r.ground_truth[*topic] = value.get<bool>();
    }
  }
  return r;
}

ordered_json record_to_json(const DecedentRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["incident_year"] = r.incident_year;
  j["sex"] = to_string(r.sex);
  if (r.age) j["age"] = *r.age;
  j["race_ethnicity"] = to_string(r.race_ethnicity);
  j["sexual_orientation"] = to_string(r.sexual_orientation);
  j["transgender"] = to_string(r.transgender);
  j["marital_status"] = to_string(r.marital_status);
  j["relationship_status"] = to_string(r.relationship_status);
  j["homeless"] = to_string(r.homeless);
  j["physical_health_problem"] = to_string(r.physical_health_problem);
  if (r.num_substances) j["num_substances"] = *r.num_substances;
  const auto& n = r.narratives;
  if (n.le_narrative) j["le_narrative"] = *n.le_narrative;
  if (n.cme_narrative) j["cme_narrative"] = *n.cme_narrative;
  if (n.le_summary) j["le_summary"] = *n.le_summary;
  if (n.cme_summary) j["cme_summary"] = *n.cme_summary;
  if (!r.ground_truth.empty()) {
    ordered_json gt = ordered_json::object();
    for (const auto& [topic, flag] : r.ground_truth) gt[std::string(to_string(topic))] = flag;
    j["ground_truth"] = gt;
  }
  return j;
}

}  // namespace

LoadResult parse_corpus(std::string_view jsonl, YearRange window) {
  LoadResult result;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    const auto end = jsonl.find('\n', pos);
    std::string_view line = jsonl.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? jsonl.size() : end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(line_no, std::string("malformed JSON: ") + e.what());
    }
    DecedentRecord record = record_from_json(obj, line_no);
    if (!seen.insert(record.id).second) fail(line_no, "duplicate id " + record.id);
    if (!window.contains(record.incident_year)) {
      ++result.rejected_out_of_window;
      result.warnings.push_back("line " + std::to_string(line_no) + ": incident_year " +
                                std::to_string(record.incident_year) + " outside study window; record rejected");
      continue;
    }
    if (record.narratives.has_narrative()) ++result.with_narrative;
    result.records.push_back(std::move(record));
  }
  return result;
}

LoadResult load_corpus(const std::filesystem::path& path, YearRange window) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw CorpusError(e.what());
  }
  return parse_corpus(text, window);
}

std::string serialize_record(const DecedentRecord& record) { return record_to_json(record).dump(); }

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& r : corpus) {
    out += serialize_record(r);
    out += '\n';
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  write_text_file(path, serialize_corpus(corpus));
}

// ---------------------------------------------------------------------------

namespace {

template <typename E>
void add_categorical(DemographicSummary& out, const Corpus& corpus, std::string variable,
                     std::initializer_list<std::string_view> labels, E DecedentRecord::*field) {
  std::vector<std::size_t> counts(enum_count<E>(), 0);
  for (const auto& r : corpus) ++counts[enum_index(r.*field)];
  auto label = labels.begin();
  for (std::size_t i = 0; i < counts.size(); ++i, ++label) {
    out.categories.push_back({variable, std::string(to_string(enum_from_index<E>(i))), std::string(*label),
                              counts[i], 100.0 * static_cast<double>(counts[i]) / static_cast<double>(out.total)});
  }
}

ContinuousRow describe(std::string variable, std::vector<double> values, std::size_t missing) {
  ContinuousRow row;
  row.variable = std::move(variable);
  row.n = values.size();
  row.missing = missing;
  if (values.empty()) return row;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  row.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - row.mean) * (v - row.mean);
    row.sd = std::sqrt(ss / (n - 1.0));
  }
  const std::size_t mid = values.size() / 2;
  row.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  row.min = values.front();
  row.max = values.back();
  return row;
}

}  // namespace

const CategoryRow& DemographicSummary::category(std::string_view variable, std::string_view level) const {
  for (const auto& row : categories)
    if (row.variable == variable && (row.level == level || row.label == level)) return row;
  throw std::out_of_range("no demographic row " + std::string(variable) + "/" + std::string(level));
}

const ContinuousRow& DemographicSummary::continuous_row(std::string_view variable) const {
  for (const auto& row : continuous)
    if (row.variable == variable) return row;
  throw std::out_of_range("no continuous row " + std::string(variable));
}

DemographicSummary demographic_summary(const Corpus& corpus) {
  if (corpus.empty()) throw CorpusError("demographic summary of an empty corpus");
  DemographicSummary s;
  s.total = corpus.size();
  add_categorical(s, corpus, "Sex", {"Female", "Male", "Unknown"}, &DecedentRecord::sex);
  add_categorical(s, corpus, "Race/Ethnicity",
                  {"American Indian/Alaska Native, non-Hispanic", "Asian/Pacific Islander, non-Hispanic",
                   "Black or African American, non-Hispanic", "Hispanic", "Other/Unspecified, non-Hispanic",
                   "Two or more races, non-Hispanic", "White, non-Hispanic", "Unknown"},
                  &DecedentRecord::race_ethnicity);
  add_categorical(s, corpus, "Sexual Orientation",
                  {"Bisexual", "Gay", "Heterosexual", "Lesbian", "Unspecified sexual minority",
                   "Not explicitly reported"},
                  &DecedentRecord::sexual_orientation);
  add_categorical(s, corpus, "Transgender", {"Yes", "No, not available, unknown"}, &DecedentRecord::transgender);
  add_categorical(s, corpus, "Marital Status",
                  {"Divorced", "Married/Civil Union/Domestic Partnership",
                   "Married/Civil Union/Domestic Partnership, but separated", "Never Married",
                   "Single, not otherwise specified", "Widowed", "Unknown"},
                  &DecedentRecord::marital_status);
  add_categorical(s, corpus, "Relationship Status",
                  {"Currently in a relationship", "Not currently in a relationship", "Unknown"},
                  &DecedentRecord::relationship_status);
  add_categorical(s, corpus, "Homeless", {"Yes", "No", "Unknown"}, &DecedentRecord::homeless);
  add_categorical(s, corpus, "Physical Health Problem", {"Yes", "No, not available, unknown"},
                  &DecedentRecord::physical_health_problem);

  std::vector<double> ages, substances;
  for (const auto& r : corpus) {
    if (r.age) ages.push_back(*r.age);
    if (r.num_substances) substances.push_back(*r.num_substances);
  }
  const std::size_t age_missing = corpus.size() - ages.size();
  const std::size_t subst_missing = corpus.size() - substances.size();
  s.continuous.push_back(describe("Age (years)", std::move(ages), age_missing));
  s.continuous.push_back(describe("Number of Substances", std::move(substances), subst_missing));
  return s;
}

std::string format_count_percent(std::size_t count, double percent, int decimals) {
  std::string digits = std::to_string(count);
  std::string grouped;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (digits.size() - i) % 3 == 0) grouped.push_back(',');
    grouped.push_back(digits[i]);
  }
  return grouped + " (" + format_fixed(percent, decimals) + "%)";
}

std::string demographic_summary_csv(const DemographicSummary& s) {
  std::ostringstream out;
  out << "variable,level,count,percent,mean,sd,median,min,max,missing\n";
  auto q = [](const std::string& v) { return v.find(',') == std::string::npos ? v : "\"" + v + "\""; };
  for (const auto& row : s.categories)
    out << q(row.variable) << ',' << q(row.label) << ',' << row.count << ',' << format_fixed(row.percent, 1)
        << ",,,,,,\n";
  for (const auto& row : s.continuous)
    out << q(row.variable) << ",," << row.n << ",," << format_fixed(row.mean, 2) << ','
        << format_fixed(row.sd, 2) << ',' << format_double(row.median) << ',' << format_double(row.min) << ','
        << format_double(row.max) << ',' << row.missing << '\n';
  return out.str();
}

}  // namespace isolex
