#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "isolex/corpus.hpp"
#include "isolex/util.hpp"

using namespace isolex;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "isolex_corpus_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

SyntheticConfig small_config(std::size_t n, std::uint64_t seed) {
  SyntheticConfig c = SyntheticConfig::defaults();
  c.n_records = n;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(CorpusLoad, TwoValidLines) {
  const std::string text =
      R"({"id":"A","incident_year":2010,"sex":"MALE","race_ethnicity":"WHITE","sexual_orientation":"NOT_REPORTED","transgender":"NO_OR_UNKNOWN","marital_status":"MARRIED","relationship_status":"UNKNOWN","homeless":"NO","physical_health_problem":"YES","age":40,"le_narrative":"text"})"
      "\n"
      R"({"id":"B","incident_year":2011,"sex":"FEMALE","race_ethnicity":"HISPANIC","sexual_orientation":"NOT_REPORTED","transgender":"NO_OR_UNKNOWN","marital_status":"UNKNOWN","relationship_status":"UNKNOWN","homeless":"UNKNOWN","physical_health_problem":"NO_OR_UNKNOWN"})"
      "\n";
  const auto path = temp_file("two.jsonl");
  write_text_file(path, text);
  const LoadResult r = load_corpus(path);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[0].id, "A");
  EXPECT_EQ(r.records[1].sex, Sex::Female);
  EXPECT_EQ(r.with_narrative, 1u);
  EXPECT_FALSE(r.records[1].age.has_value());
}

TEST(CorpusLoad, MissingIdNamesLine) {
  try {
    parse_corpus(R"({"incident_year":2010,"sex":"MALE"})");
    FAIL();
  } catch (const CorpusError& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("id"), std::string::npos);
  }
}

TEST(CorpusLoad, MalformedAndDuplicateLines) {
  SyntheticConfig c = small_config(2, 1);
  const Corpus corpus = generate_synthetic(c);
  const std::string line = serialize_record(corpus[0]);
  EXPECT_THROW(parse_corpus(line + "\n{not json\n"), CorpusError);
  try {
    parse_corpus(line + "\n" + line + "\n");
    FAIL();
  } catch (const CorpusError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  }
}

TEST(CorpusLoad, OutOfWindowRejectedNotFatal) {
  Corpus corpus = generate_synthetic(small_config(3, 2));
  corpus[1].incident_year = 1999;
  const LoadResult r = parse_corpus(serialize_corpus(corpus), YearRange{2002, 2020});
  EXPECT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.rejected_out_of_window, 1u);
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(CorpusLoad, SyntheticRoundTrip) {
  const Corpus corpus = generate_synthetic(small_config(500, 7));
  const auto path = temp_file("roundtrip.jsonl");
  write_corpus(path, corpus);
  const LoadResult loaded = load_corpus(path, corpus.front().incident_year > 0 ? YearRange{} : YearRange{});
  ASSERT_EQ(loaded.records.size(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& a = corpus[i];
    const auto& b = loaded.records[i];
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.incident_year, b.incident_year);
    EXPECT_EQ(a.sex, b.sex);
    EXPECT_EQ(a.age, b.age);
    EXPECT_EQ(a.race_ethnicity, b.race_ethnicity);
    EXPECT_EQ(a.sexual_orientation, b.sexual_orientation);
    EXPECT_EQ(a.transgender, b.transgender);
    EXPECT_EQ(a.marital_status, b.marital_status);
    EXPECT_EQ(a.relationship_status, b.relationship_status);
    EXPECT_EQ(a.homeless, b.homeless);
    EXPECT_EQ(a.physical_health_problem, b.physical_health_problem);
    EXPECT_EQ(a.num_substances, b.num_substances);
    EXPECT_EQ(a.narratives, b.narratives);
    EXPECT_EQ(a.ground_truth, b.ground_truth);
  }
  EXPECT_EQ(serialize_corpus(loaded.records), serialize_corpus(corpus));
}

TEST(CorpusSerialize, AbsentOptionalFieldsOmitted) {
  DecedentRecord r;
  r.id = "X";
  const std::string line = serialize_record(r);
  EXPECT_EQ(line.find("null"), std::string::npos);
  EXPECT_EQ(line.find("age"), std::string::npos);
  EXPECT_EQ(line.find("le_narrative"), std::string::npos);
}

TEST(Synthetic, PrevalenceWithinBinomialBandAndDeterministic) {
  SyntheticConfig c = small_config(1000, 42);
  c.topic_prevalence[TopicId::BreakUp] = 0.04;
  const Corpus a = generate_synthetic(c);
  std::size_t k = 0;
  for (const auto& r : a) k += r.ground_truth.at(TopicId::BreakUp);
  // Central 99.9% interval of Bin(1000, 0.04), computed from the exact pmf.
  std::vector<double> pmf(1001);
  for (int i = 0; i <= 1000; ++i)
    pmf[i] = std::exp(std::lgamma(1001.0) - std::lgamma(i + 1.0) - std::lgamma(1001.0 - i) + i * std::log(0.04) +
                      (1000 - i) * std::log(0.96));
  double acc = 0.0;
  int lo = 0, hi = 1000;
  for (int i = 0; i <= 1000; ++i) {
    acc += pmf[i];
    if (acc >= 0.0005) {
      lo = i;
      break;
    }
  }
  acc = 0.0;
  for (int i = 1000; i >= 0; --i) {
    acc += pmf[i];
    if (acc >= 0.0005) {
      hi = i;
      break;
    }
  }
  EXPECT_GE(static_cast<int>(k), lo);
  EXPECT_LE(static_cast<int>(k), hi);
  EXPECT_EQ(serialize_corpus(generate_synthetic(c)), serialize_corpus(a));
}

TEST(Synthetic, ZeroPrevalenceMeansNoTruth) {
  SyntheticConfig c = small_config(500, 3);
  for (TopicId t : kAllTopics) c.topic_prevalence[t] = 0.0;
  for (const auto& r : generate_synthetic(c))
    for (const auto& [t, v] : r.ground_truth) EXPECT_FALSE(v);
}

TEST(Synthetic, DifferentSeedsDiffer) {
  EXPECT_NE(serialize_corpus(generate_synthetic(small_config(200, 42))),
            serialize_corpus(generate_synthetic(small_config(200, 43))));
}

TEST(Synthetic, PlantedPhraseOccursInNarrative) {
  SyntheticConfig c = small_config(3000, 11);
  for (TopicId t : kAllTopics) c.topic_prevalence[t] = 0.05;
  const Corpus corpus = generate_synthetic(c);
  std::size_t checked = 0;
  for (const auto& r : corpus) {
    for (const auto& [t, truth] : r.ground_truth) {
      if (!truth) continue;
      const std::string text = narrative_text(r);
      bool found = false;
      for (const auto& phrase : c.phrases.topics.at(t).narrative) found = found || text.find(phrase) != std::string::npos;
      EXPECT_TRUE(found) << r.id << " " << to_string(t);
      ++checked;
    }
  }
  EXPECT_GT(checked, 500u);
}

TEST(Synthetic, InvalidConfigRejected) {
  SyntheticConfig c = small_config(0, 1);
  EXPECT_ANY_THROW(generate_synthetic(c));
  c = small_config(10, 1);
  c.topic_prevalence[TopicId::Divorce] = 0.1;
  c.phrases.topics[TopicId::Divorce].narrative.clear();
  EXPECT_ANY_THROW(generate_synthetic(c));
}

TEST(Demographics, PaperMaleShare) {
  Corpus corpus(306817);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    corpus[i].id = std::to_string(i);
    corpus[i].sex = i < 239616 ? Sex::Male : Sex::Female;
  }
  const auto s = demographic_summary(corpus);
  const auto& male = s.category("Sex", "MALE");
  EXPECT_EQ(male.count, 239616u);
  EXPECT_EQ(format_fixed(male.percent, 1), "78.1");
  EXPECT_EQ(format_count_percent(male.count, male.percent), "239,616 (78.1%)");
}

TEST(Demographics, SingleFemale) {
  Corpus corpus(1);
  corpus[0].id = "F";
  corpus[0].sex = Sex::Female;
  const auto s = demographic_summary(corpus);
  EXPECT_DOUBLE_EQ(s.category("Sex", "FEMALE").percent, 100.0);
  EXPECT_DOUBLE_EQ(s.category("Sex", "MALE").percent, 0.0);
}

TEST(Demographics, AgeOrderStatistics) {
  Corpus corpus(4);
  const std::vector<std::optional<int>> ages{106, 10, std::nullopt, 46};
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    corpus[i].id = std::to_string(i);
    corpus[i].age = ages[i];
  }
  const auto& row = demographic_summary(corpus).continuous_row("Age (years)");
  std::vector<double> sorted{10, 46, 106};
  EXPECT_EQ(row.n, 3u);
  EXPECT_EQ(row.missing, 1u);
  EXPECT_DOUBLE_EQ(row.median, sorted[1]);
  EXPECT_DOUBLE_EQ(row.min, sorted.front());
  EXPECT_DOUBLE_EQ(row.max, sorted.back());
  const double mean = (10 + 46 + 106) / 3.0;
  EXPECT_NEAR(row.mean, mean, 1e-12);
  const double var = ((10 - mean) * (10 - mean) + (46 - mean) * (46 - mean) + (106 - mean) * (106 - mean)) / 2.0;
  EXPECT_NEAR(row.sd, std::sqrt(var), 1e-12);
}

TEST(Demographics, PercentagesSumToHundred) {
  const auto s = demographic_summary(generate_synthetic(small_config(2000, 5)));
  std::map<std::string, double> sums;
  for (const auto& row : s.categories) sums[row.variable] += row.percent;
  EXPECT_EQ(sums.size(), 8u);
  for (const auto& [var, total] : sums) EXPECT_NEAR(total, 100.0, 0.1) << var;
}

TEST(Demographics, EmptyCorpusThrows) { EXPECT_THROW(demographic_summary({}), CorpusError); }

TEST(Narrative, JoinedTextAndCmeOffset) {
  DecedentRecord r;
  r.narratives.le_narrative = "abc";
  r.narratives.cme_narrative = "def";
  const std::string text = narrative_text(r);
  EXPECT_EQ(text.substr(cme_offset(r)), "def");
  r.narratives.le_narrative.reset();
  EXPECT_EQ(cme_offset(r), 0u);
  EXPECT_EQ(narrative_text(r), "def");
}
