#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "isolex/rng.hpp"
#include "isolex/stats.hpp"

using namespace isolex;
using namespace isolex::stats;

namespace {

// Binary predictor (level "B" vs reference "A") with the given 2x2 cells.
struct Table {
  int a_events, a_non, b_events, b_non;
};

std::pair<std::vector<bool>, CategoricalPredictor> expand(const Table& t) {
  std::vector<bool> y;
  CategoricalPredictor p{"group", "A", {"B"}, {}};
  auto add = [&](const char* level, int n, bool event) {
    for (int i = 0; i < n; ++i) {
      y.push_back(event);
      p.values.emplace_back(level);
    }
  };
  add("A", t.a_events, true);
  add("A", t.a_non, false);
  add("B", t.b_events, true);
  add("B", t.b_non, false);
  return {y, p};
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Two-sided Student t tail probability by Simpson integration of the density.
double t_two_sided(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  auto pdf = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const double a = 0.0, b = std::fabs(t);
  const int n = 20000;
  const double h = (b - a) / n;
  double s = pdf(a) + pdf(b);
  for (int i = 1; i < n; ++i) s += pdf(a + i * h) * (i % 2 ? 4 : 2);
  return 1.0 - 2.0 * s * h / 3.0;
}

}  // namespace

TEST(Kappa, HandComputed) {
  std::vector<bool> a, b;
  auto add = [&](int n, bool x, bool y) {
    for (int i = 0; i < n; ++i) a.push_back(x), b.push_back(y);
  };
  add(20, true, true);
  add(5, true, false);
  add(5, false, true);
  add(20, false, false);
  const AgreementResult r = cohen_kappa(a, b);
  EXPECT_NEAR(*r.kappa, 0.6, 1e-12);
  EXPECT_NEAR(r.percent_agreement, 0.8, 1e-12);
  EXPECT_NEAR(r.p_expected, 0.5, 1e-12);
  ASSERT_TRUE(r.p_value.has_value());
  EXPECT_LT(*r.p_value, 1e-3);
}

TEST(Kappa, DualAllPositiveIsNa) {
  const std::vector<bool> ones(50, true);
  const AgreementResult r = cohen_kappa(ones, ones);
  EXPECT_FALSE(r.kappa.has_value());
  EXPECT_DOUBLE_EQ(r.percent_agreement, 1.0);
  EXPECT_EQ(format_p(r.p_value), "NA");
  EXPECT_THROW(cohen_kappa({}, {}), StatsError);
  EXPECT_THROW(cohen_kappa({true}, {true, false}), StatsError);
}

TEST(Kappa, ChanceAgreementIsZero) {
  // Rater B labels positive exactly half of each of rater A's classes.
  const std::vector<bool> a{true, true, false, false, true, true, false, false};
  const std::vector<bool> b{true, false, true, false, true, false, true, false};
  EXPECT_NEAR(*cohen_kappa(a, b).kappa, 0.0, 1e-12);
  EXPECT_NEAR(*cohen_kappa(a, b).p_value, 1.0, 1e-12);
}

TEST(Kappa, RandomPairsMatchBruteForce) {
  std::mt19937 gen(1);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<bool> a(50), b(50);
    const unsigned bias = 1 + gen() % 9;
    for (int i = 0; i < 50; ++i) a[i] = gen() % 10 < bias, b[i] = gen() % 10 < bias;
    double agree = 0, a1 = 0, b1 = 0;
    for (int i = 0; i < 50; ++i) agree += a[i] == b[i], a1 += a[i], b1 += b[i];
    const double po = agree / 50, pe = (a1 / 50) * (b1 / 50) + (1 - a1 / 50) * (1 - b1 / 50);
    const AgreementResult r = cohen_kappa(a, b);
    if (pe == 1.0) {
      EXPECT_FALSE(r.kappa.has_value());
      continue;
    }
    ASSERT_NEAR(*r.kappa, (po - pe) / (1 - pe), 1e-12) << trial;
    ASSERT_NEAR(r.p_observed, po, 1e-12);
    ASSERT_NEAR(r.p_expected, pe, 1e-12);
  }
}

TEST(Bonferroni, ThresholdAndTiers) {
  EXPECT_NEAR(bonferroni(0.05, 30), 0.0016667, 1e-7);
  EXPECT_DOUBLE_EQ(bonferroni(0.05, 1), 0.05);
  EXPECT_THROW(bonferroni(0.05, 0), StatsError);
  const double thr = bonferroni();
  EXPECT_EQ(tier_for(5e-5, thr), Tier::Strong);
  EXPECT_EQ(tier_for(1e-3, thr), Tier::Bonferroni);
  EXPECT_EQ(tier_for(0.01, thr), Tier::NotSignificant);
  EXPECT_EQ(tier_for(std::nullopt, thr), Tier::NotSignificant);
  for (int m = 1; m < 60; ++m) EXPECT_GT(bonferroni(0.05, m), bonferroni(0.05, m + 1));
}

TEST(OddsRatio, HandComputedTable) {
  // 30 of 100 exposed vs 10 of 100 reference.
  const auto [y, p] = expand({10, 90, 30, 70});
  const auto rows = bivariate_logit(TopicId::Divorce, y, p, bonferroni());
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(rows[0].odds_ratio, 3.857, 5e-4);
  EXPECT_NEAR(rows[0].standard_error, 0.3984, 5e-5);
  EXPECT_NEAR(rows[0].ci_low, 1.77, 5e-3);
  EXPECT_NEAR(rows[0].ci_high, 8.42, 5e-3);
  EXPECT_EQ(rows[0].n_used, 200u);
  EXPECT_FALSE(rows[0].separation);
}

TEST(OddsRatio, RandomTablesMatchWoolf) {
  std::mt19937 gen(77);
  std::uniform_int_distribution<int> cell(5, 500);
  for (int trial = 0; trial < 200; ++trial) {
    const Table t{cell(gen), cell(gen), cell(gen), cell(gen)};
    const auto [y, p] = expand(t);
    const OddsResult r = bivariate_logit(TopicId::BreakUp, y, p, bonferroni())[0];
    const double oratio = (static_cast<double>(t.b_events) * t.a_non) / (static_cast<double>(t.b_non) * t.a_events);
    const double se = std::sqrt(1.0 / t.a_events + 1.0 / t.a_non + 1.0 / t.b_events + 1.0 / t.b_non);
    ASSERT_NEAR(r.odds_ratio / oratio, 1.0, 1e-6) << trial;
    ASSERT_NEAR(r.standard_error / se, 1.0, 1e-6) << trial;
    ASSERT_NEAR(r.ci_low, std::exp(std::log(oratio) - 1.959963984540054 * se), 1e-6 * oratio);
    const double z = std::log(oratio) / se;
    ASSERT_NEAR(*r.p_value, 2.0 * (1.0 - normal_cdf(std::fabs(z))), 1e-9);
  }
}

TEST(OddsRatio, ZeroEventLevelAndReferenceSwap) {
  const auto [y, p] = expand({10, 90, 0, 50});
  const OddsResult zero = bivariate_logit(TopicId::PetLoss, y, p, bonferroni())[0];
  EXPECT_DOUBLE_EQ(zero.odds_ratio, 0.0);
  EXPECT_DOUBLE_EQ(zero.ci_low, 0.0);
  EXPECT_DOUBLE_EQ(zero.ci_high, 0.0);
  EXPECT_TRUE(zero.separation);
  EXPECT_NE(odds_csv_row(zero).find(",1"), std::string::npos);

  const auto [y2, p2] = expand({12, 40, 25, 33});
  auto swapped = p2;
  swapped.reference = "B";
  swapped.levels = {"A"};
  const OddsResult fwd = bivariate_logit(TopicId::PetLoss, y2, p2, 0.05)[0];
  const OddsResult rev = bivariate_logit(TopicId::PetLoss, y2, swapped, 0.05)[0];
  EXPECT_NEAR(fwd.odds_ratio * rev.odds_ratio, 1.0, 1e-9);
  EXPECT_NEAR(fwd.ci_low * rev.ci_high, 1.0, 1e-9);
  EXPECT_NEAR(*fwd.p_value, *rev.p_value, 1e-9);
}

TEST(OddsRatio, IndependentPredictorCoverage) {
  int covered = 0;
  const int reps = 400;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(mix_seed(5, rep));
    std::vector<bool> y;
    CategoricalPredictor p{"g", "A", {"B"}, {}};
    for (int i = 0; i < 600; ++i) {
      p.values.emplace_back(rng.bernoulli(0.4) ? "B" : "A");
      y.push_back(rng.bernoulli(0.2));
    }
    const OddsResult r = bivariate_logit(TopicId::Divorce, y, p, 0.05)[0];
    covered += r.ci_low <= 1.0 && 1.0 <= r.ci_high;
  }
  EXPECT_GE(covered, static_cast<int>(0.93 * reps));
}

TEST(OddsRatio, ContinuousPredictorMatchesLogSlope) {
  Rng rng(3);
  std::vector<bool> y;
  std::vector<std::optional<double>> x;
  for (int i = 0; i < 4000; ++i) {
    const double v = static_cast<double>(rng.below(5));
    x.push_back(i % 50 == 0 ? std::nullopt : std::optional<double>(v));
    y.push_back(rng.bernoulli(1.0 / (1.0 + std::exp(-(-2.0 + 0.4 * v)))));
  }
  const OddsResult r = bivariate_logit_continuous(TopicId::Divorce, y, "num_substances", x, 0.05);
  EXPECT_NEAR(std::log(r.odds_ratio), 0.4, 0.1);
  EXPECT_EQ(r.n_used, 4000u - 80u);
}

TEST(Logit, InterceptOnlyRecoversLogOdds) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(10, 1);
  const std::vector<int> y{1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  const LogitFit f = fit_logit(x, y);
  EXPECT_TRUE(f.converged);
  EXPECT_NEAR(f.coefficients(0), std::log(3.0 / 7.0), 1e-10);
  EXPECT_NEAR(f.standard_errors(0), std::sqrt(1.0 / 3 + 1.0 / 7), 1e-8);
}

TEST(Welch, IdenticalGroupsAndZeroVariance) {
  const std::vector<bool> flags{true, true, true, false, false, false};
  const std::vector<std::optional<int>> ages{30, 40, 50, 30, 40, 50};
  const AgeDifference same = age_difference(flags, ages);
  EXPECT_DOUBLE_EQ(same.difference, 0.0);
  EXPECT_NEAR(*same.p_value, 1.0, 1e-12);
  const AgeDifference flat = age_difference(flags, {40, 40, 40, 30, 30, std::nullopt});
  EXPECT_TRUE(flat.zero_variance);
  EXPECT_DOUBLE_EQ(flat.difference, 10.0);
  EXPECT_FALSE(flat.p_value.has_value());
  EXPECT_THROW(age_difference({true, false, false}, {1, 2, 3}), StatsError);
}

TEST(Welch, ShiftAgainstIndependentT) {
  Rng rng(8);
  std::vector<bool> flags;
  std::vector<std::optional<int>> ages;
  for (int i = 0; i < 300; ++i) {
    const bool f = i < 60;
    flags.push_back(f);
    ages.push_back(static_cast<int>(std::lround(rng.normal(f ? 30.0 : 45.0, f ? 8.0 : 14.0))));
  }
  const AgeDifference r = age_difference(flags, ages);
  double m1 = 0, m0 = 0, n1 = 0, n0 = 0;
  for (int i = 0; i < 300; ++i) (flags[i] ? m1 : m0) += *ages[i], (flags[i] ? n1 : n0) += 1;
  m1 /= n1, m0 /= n0;
  double s1 = 0, s0 = 0;
  for (int i = 0; i < 300; ++i) {
    const double d = *ages[i] - (flags[i] ? m1 : m0);
    (flags[i] ? s1 : s0) += d * d;
  }
  const double v1 = s1 / (n1 - 1) / n1, v0 = s0 / (n0 - 1) / n0;
  const double t = (m1 - m0) / std::sqrt(v1 + v0);
  const double df = (v1 + v0) * (v1 + v0) / (v1 * v1 / (n1 - 1) + v0 * v0 / (n0 - 1));
  EXPECT_NEAR(r.difference, m1 - m0, 1e-9);
  EXPECT_NEAR(r.difference, -15.0, 3.0);
  EXPECT_NEAR(r.t_statistic, t, 1e-9);
  EXPECT_NEAR(r.degrees_of_freedom, df, 1e-9);
  const double p = t_two_sided(t, df);
  EXPECT_NEAR(*r.p_value, p, 1e-9 + 1e-6 * p);
  EXPECT_LT(r.ci_high, 0.0);
}

TEST(Rates, PublishedRows) {
  EXPECT_NEAR(rate_per_1000(1198, 306817), 3.905, 1e-3);
  EXPECT_NEAR(rate_per_1000(1231, 306817), 4.012, 1e-3);
  EXPECT_DOUBLE_EQ(rate_per_1000(12311, 306817), 12311.0 / 306.817);
  EXPECT_EQ(format_rate(rate_per_1000(1198, 306817)), "3.905");
  EXPECT_EQ(format_rate(rate_per_1000(12311, 306817)), "40.125");
  EXPECT_EQ(format_rate(rate_per_1000(1231, 306817)), "4.012");
  EXPECT_EQ(format_rate(rate_per_1000(0, 306817)), "0.000");
  EXPECT_THROW(rate_per_1000(1, 0), StatsError);
  EXPECT_THROW(rate_per_1000(5, 4), StatsError);
}

TEST(Trends, PerYearRatesAndWeightedMean) {
  Corpus corpus;
  std::vector<bool> flags;
  for (int year = 2002; year <= 2004; ++year)
    for (int i = 0; i < 10 * (year - 2001); ++i) {
      DecedentRecord r;
      r.id = std::to_string(year) + "-" + std::to_string(i);
      r.incident_year = year;
      corpus.push_back(r);
      flags.push_back(i == 0);
    }
  const RateSeries s = yearly_trend(TopicId::Divorce, flags, corpus, {2002, 2005});
  EXPECT_DOUBLE_EQ(s.by_year.at(2002), 100.0);
  EXPECT_DOUBLE_EQ(s.by_year.at(2003), 50.0);
  EXPECT_EQ(s.by_year.count(2005), 0u);
  EXPECT_EQ(s.warnings.size(), 1u);
  double weighted = 0.0;
  for (const auto& [y, rate] : s.by_year) weighted += rate * s.total_by_year.at(y);
  EXPECT_NEAR(weighted / corpus.size(), s.overall, 1e-12);
  EXPECT_EQ(trend_csv({s}).find("year,topic,rate_per_1000\n2002,DIVORCE,100.000\n"), 0u);
}

TEST(Trends, UniformFlagsStayInBinomialBand) {
  Rng rng(4);
  Corpus corpus;
  std::vector<bool> flags;
  for (int i = 0; i < 19000; ++i) {
    DecedentRecord r;
    r.id = std::to_string(i);
    r.incident_year = 2002 + i % 19;
    corpus.push_back(r);
    flags.push_back(rng.bernoulli(0.05));
  }
  const RateSeries s = yearly_trend(TopicId::Divorce, flags, corpus);
  ASSERT_EQ(s.by_year.size(), 19u);
  const double sd = 1000.0 * std::sqrt(0.05 * 0.95 / 1000.0);
  for (const auto& [y, rate] : s.by_year) EXPECT_NEAR(rate, 50.0, 4.5 * sd) << y;
  EXPECT_TRUE(s.warnings.empty());
}

TEST(Trends, SingleYear) {
  Corpus corpus(4);
  for (int i = 0; i < 4; ++i) corpus[i].id = std::to_string(i), corpus[i].incident_year = 2010;
  const RateSeries s = yearly_trend(TopicId::PetLoss, {true, false, false, false}, corpus, {2010, 2010});
  EXPECT_EQ(s.by_year.size(), 1u);
  EXPECT_DOUBLE_EQ(s.by_year.at(2010), 250.0);
  EXPECT_DOUBLE_EQ(s.overall, 250.0);
}

TEST(Format, PValues) {
  EXPECT_EQ(format_p(std::nullopt), "NA");
  EXPECT_EQ(format_p(0.04321), "0.0432");
  EXPECT_EQ(format_p(1.234e-5), "1.234e-05");
}
