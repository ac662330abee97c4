#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "isolex/classify.hpp"
#include "isolex/rng.hpp"
#include "isolex/util.hpp"

using namespace isolex;
using namespace isolex::classify;

namespace {

LabeledDoc example(const std::string& id, const std::string& text, bool label) {
  return {id, topic::tokenize(text, id), label};
}

SparseVector sparse(std::initializer_list<std::pair<std::uint32_t, double>> entries) {
  SparseVector v;
  for (const auto& [i, x] : entries) {
    v.index.push_back(i);
    v.value.push_back(x);
  }
  return v;
}

std::vector<LabeledDoc> themed_examples(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<std::string> pos{"recent break up with girlfriend", "ended the relationship with boyfriend",
                                     "broke up last week after argument"};
  const std::vector<std::string> neg{"watched a movie about a break up", "break up of the ice on the lake",
                                     "song about a break up on the radio"};
  std::vector<LabeledDoc> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool label = rng.bernoulli(0.5);
    const auto& bank = label ? pos : neg;
    out.push_back(example("e" + std::to_string(i), bank[rng.below(bank.size())] + " family reported", label));
  }
  return out;
}

// Straightforward definitions, scoring a zero denominator as 0.
std::array<double, 7> brute_metrics(const std::vector<bool>& pred, const std::vector<bool>& truth) {
  double tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] && pred[i]) tp += 1;
    if (!truth[i] && pred[i]) fp += 1;
    if (truth[i] && !pred[i]) fn += 1;
    if (!truth[i] && !pred[i]) tn += 1;
  }
  auto div = [](double a, double b) { return b == 0 ? 0.0 : a / b; };
  const double p1 = div(tp, tp + fp), r1 = div(tp, tp + fn), f1 = div(2 * p1 * r1, p1 + r1);
  const double p0 = div(tn, tn + fn), r0 = div(tn, tn + fp), f0 = div(2 * p0 * r0, p0 + r0);
  return {div(tp + tn, tp + fp + fn + tn), p1, r1, f1, (p1 + p0) / 2, (r1 + r0) / 2, (f1 + f0) / 2};
}

}  // namespace

TEST(Split, StratifiedCounts) {
  std::vector<LabeledDoc> ex;
  for (int i = 0; i < 100; ++i) ex.push_back(example("d" + std::to_string(i), "text", i < 94));
  const DataSplit s = split(ex, 0.8, 3);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.test.size(), 20u);
  const auto pos_train = std::count_if(s.train.begin(), s.train.end(), [](const auto& d) { return d.label; });
  const auto pos_test = std::count_if(s.test.begin(), s.test.end(), [](const auto& d) { return d.label; });
  EXPECT_NEAR(static_cast<double>(pos_train), 75.0, 1.0);
  EXPECT_NEAR(static_cast<double>(pos_test), 19.0, 1.0);
  std::set<std::string> ids;
  for (const auto& d : s.train) ids.insert(d.decedent_id);
  for (const auto& d : s.test) ids.insert(d.decedent_id);
  EXPECT_EQ(ids.size(), 100u);
}

TEST(Split, SingleClassAndDeterminism) {
  std::vector<LabeledDoc> ex;
  for (int i = 0; i < 10; ++i) ex.push_back(example("d" + std::to_string(i), "text", false));
  const DataSplit s = split(ex, 0.8, 1);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.test.size(), 2u);
  const auto many = themed_examples(60, 4);
  const DataSplit a = split(many, 0.8, 9), b = split(many, 0.8, 9);
  ASSERT_EQ(a.test.size(), b.test.size());
  for (std::size_t i = 0; i < a.test.size(); ++i) EXPECT_EQ(a.test[i].decedent_id, b.test[i].decedent_id);
}

TEST(NaiveBayes, HandComputedLikelihoods) {
  // Positive class has one occurrence of term 0 over 2 features: (1+1)/(1+2) and (0+1)/(1+2).
  const std::vector<SparseVector> counts{sparse({{0, 1.0}}), sparse({{1, 2.0}})};
  const NaiveBayesModel m = fit_naive_bayes(counts, {1, 0}, 2, 1.0);
  EXPECT_NEAR(std::exp(m.log_likelihood[1][1]), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(std::exp(m.log_likelihood[1][0]), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(std::exp(m.log_likelihood[0][1]), 3.0 / 4.0, 1e-12);
  EXPECT_NEAR(std::exp(m.log_prior[1]), 0.5, 1e-12);
  for (int c = 0; c < 2; ++c) {
    double total = 0.0;
    for (double l : m.log_likelihood[c]) total += std::exp(l);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  EXPECT_TRUE(m.predict(sparse({{0, 1.0}})));
  EXPECT_FALSE(m.predict(sparse({{1, 1.0}})));
}

TEST(NaiveBayes, FiveTermToyCorpus) {
  // Positive class: term 0 twice among 4 tokens, 5 features, alpha 1.
  const std::vector<SparseVector> counts{sparse({{0, 2.0}, {1, 1.0}}), sparse({{2, 1.0}}), sparse({{3, 1.0}, {4, 1.0}})};
  const NaiveBayesModel m = fit_naive_bayes(counts, {1, 1, 0}, 5, 1.0);
  EXPECT_DOUBLE_EQ(std::exp(m.log_likelihood[1][0]), (2.0 + 1.0) / (4.0 + 5.0));
  EXPECT_NEAR(std::exp(m.log_likelihood[1][0]), 1.0 / 3.0, 1e-15);
}

TEST(NaiveBayes, LargeAlphaIsUniformAndOovFollowsPrior) {
  const std::vector<SparseVector> counts{sparse({{0, 3.0}}), sparse({{1, 1.0}}), sparse({{2, 1.0}})};
  const NaiveBayesModel smooth = fit_naive_bayes(counts, {1, 0, 0}, 3, 1e6);
  for (double l : smooth.log_likelihood[1]) EXPECT_NEAR(std::exp(l), 1.0 / 3.0, 1e-5);
  const NaiveBayesModel m = fit_naive_bayes(counts, {1, 0, 0}, 3, 1.0);
  EXPECT_FALSE(m.predict(SparseVector{}));
  const NaiveBayesModel flipped = fit_naive_bayes(counts, {1, 1, 0}, 3, 1.0);
  EXPECT_TRUE(flipped.predict(SparseVector{}));
}

TEST(Logistic, GradientMatchesFiniteDifferences) {
  Rng rng(12);
  Eigen::MatrixXd x(10, 8);
  std::vector<int> y(10);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 8; ++j) x(i, j) = rng.normal();
    y[i] = rng.bernoulli(0.5);
  }
  Eigen::VectorXd w(8);
  for (int j = 0; j < 8; ++j) w(j) = rng.normal(0, 0.5);
  const double b = 0.3, C = 0.7, h = 1e-5;
  const LogisticObjective o = logistic_objective(x, y, w, b, C);
  for (int j = 0; j < 8; ++j) {
    Eigen::VectorXd wp = w, wm = w;
    wp(j) += h;
    wm(j) -= h;
    const double fd = (logistic_objective(x, y, wp, b, C).loss - logistic_objective(x, y, wm, b, C).loss) / (2 * h);
    EXPECT_LT(std::abs(fd - o.grad_w(j)) / std::max(1e-8, std::abs(fd)), 1e-4) << j;
  }
  const double fd_b = (logistic_objective(x, y, w, b + h, C).loss - logistic_objective(x, y, w, b - h, C).loss) / (2 * h);
  EXPECT_LT(std::abs(fd_b - o.grad_b) / std::abs(fd_b), 1e-4);
  // Loss by definition.
  double expect = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double z = x.row(i).dot(w) + b;
    expect += y[i] ? std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  }
  expect = expect / 10 + w.squaredNorm() / (2 * C * 10);
  EXPECT_NEAR(o.loss, expect, 1e-12);
}

TEST(Logistic, SeparableDataStaysFiniteUnderStrongPenalty) {
  Eigen::MatrixXd x(6, 1);
  x << -3, -2, -1, 1, 2, 3;
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  const LogisticModel strong = fit_logistic(x, y, 0.01);
  const LogisticModel weak = fit_logistic(x, y, 1.0);
  EXPECT_TRUE(std::isfinite(strong.weights(0)));
  EXPECT_GT(strong.weights(0), 0.0);
  EXPECT_LT(strong.weights(0), weak.weights(0));
  EXPECT_LT(strong.gradient_norm, 1e-5);
  for (std::size_t i = 1; i < strong.loss_history.size(); ++i)
    EXPECT_LE(strong.loss_history[i], strong.loss_history[i - 1] + 1e-12);
}

TEST(Logistic, SymmetricDataHasZeroIntercept) {
  Eigen::MatrixXd x(8, 2);
  x << 1, 2, 2, 1, -1, -2, -2, -1, 0.5, -1, -0.5, 1, 3, 0, -3, 0;
  const std::vector<int> y{1, 1, 0, 0, 1, 0, 0, 1};
  const LogisticModel m = fit_logistic(x, y, 1.0);
  EXPECT_NEAR(m.intercept, 0.0, 1e-6);
  EXPECT_LT(m.gradient_norm, 1e-5);
}

TEST(Forest, RecoversSingleFeatureRule) {
  Rng rng(3);
  Eigen::MatrixXd x(80, 4);
  std::vector<int> y(80);
  for (int i = 0; i < 80; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = rng.uniform();
    y[i] = x(i, 2) > 0.5;
  }
  const ForestModel f = fit_forest(x, y, {50, std::nullopt, 2}, 7);
  int correct = 0;
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd v(4);
    for (int j = 0; j < 4; ++j) v(j) = rng.uniform();
    correct += f.predict(v) == (v(2) > 0.5);
  }
  EXPECT_GE(correct, 180);
  const ForestModel g = fit_forest(x, y, {50, std::nullopt, 2}, 7);
  for (std::size_t t = 0; t < f.trees.size(); ++t) ASSERT_EQ(f.trees[t].nodes.size(), g.trees[t].nodes.size());
}

TEST(Forest, StumpsCannotLearnXor) {
  Eigen::MatrixXd x(40, 2);
  std::vector<int> y(40);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = (i / 10) % 2;
    x(i, 1) = (i / 20) % 2;
    y[i] = static_cast<int>(x(i, 0)) ^ static_cast<int>(x(i, 1));
  }
  // The best single stump on balanced XOR is no better than chance.
  double best_stump = 0.0;
  for (int feature = 0; feature < 2; ++feature)
    for (int polarity = 0; polarity < 2; ++polarity) {
      int correct = 0;
      for (int i = 0; i < 40; ++i) correct += ((x(i, feature) > 0.5) ^ polarity) == y[i];
      best_stump = std::max(best_stump, correct / 40.0);
    }
  EXPECT_DOUBLE_EQ(best_stump, 0.5);
  auto accuracy = [&](const ForestModel& f) {
    int correct = 0;
    for (int i = 0; i < 40; ++i) correct += f.predict(Eigen::VectorXd(x.row(i).transpose())) == (y[i] == 1);
    return correct / 40.0;
  };
  const ForestModel stumps = fit_forest(x, y, {25, 1, 2}, 1);
  for (const auto& t : stumps.trees) EXPECT_LE(t.depth(), 1u);
  EXPECT_LE(accuracy(stumps), 0.75);
  EXPECT_DOUBLE_EQ(accuracy(fit_forest(x, y, {25, std::nullopt, 2}, 1)), 1.0);
}

TEST(Metrics, HandComputedConfusion) {
  const Confusion c{3, 1, 1, 5};
  const Metrics m = metrics_from_confusion(c);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.8);
  EXPECT_DOUBLE_EQ(m.precision_pos, 0.75);
  EXPECT_DOUBLE_EQ(m.recall_pos, 0.75);
  EXPECT_DOUBLE_EQ(m.f1_pos, 0.75);
  EXPECT_NEAR(m.macro_precision, (0.75 + 5.0 / 6.0) / 2, 1e-12);
  EXPECT_NEAR(m.macro_f1, 0.7917, 5e-5);
  const auto undefined = metric_values(Confusion{0, 0, 3, 7}, UndefinedPolicy::Undefined);
  EXPECT_FALSE(undefined[static_cast<std::size_t>(MetricId::PrecisionPos)].has_value());
  EXPECT_TRUE(undefined[static_cast<std::size_t>(MetricId::Accuracy)].has_value());
  const Metrics none = metrics_from_confusion(Confusion{0, 0, 3, 7});
  EXPECT_DOUBLE_EQ(none.precision_pos, 0.0);
  EXPECT_DOUBLE_EQ(none.f1_pos, 0.0);
}

TEST(Metrics, RandomVectorsAgreeWithBruteForce) {
  std::mt19937 gen(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + gen() % 40;
    std::vector<bool> pred(n), truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = gen() % 2;
      truth[i] = gen() % 3 == 0;
    }
    const auto expect = brute_metrics(pred, truth);
    const auto got = evaluate_predictions(pred, truth).values();
    for (std::size_t k = 0; k < 7; ++k) ASSERT_NEAR(got[k], expect[k], 1e-12) << trial << " " << k;
  }
}

TEST(Bootstrap, AllCorrectAndFullFraction) {
  std::vector<bool> v(40);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i % 2;
  const Metrics m = bootstrap_ci(v, v, {200, 0.8, 1});
  for (std::size_t k = 0; k < kMetricCount; ++k) {
    EXPECT_DOUBLE_EQ(m.ci[k]->low, 1.0);
    EXPECT_DOUBLE_EQ(m.ci[k]->high, 1.0);
  }
  std::vector<bool> pred = v;
  pred[0] = !pred[0];
  pred[5] = !pred[5];
  const Metrics full = bootstrap_ci(pred, v, {50, 1.0, 1});
  const auto point = full.values();
  for (std::size_t k = 0; k < kMetricCount; ++k) {
    EXPECT_NEAR(full.ci[k]->low, point[k], 1e-12);
    EXPECT_NEAR(full.ci[k]->high, point[k], 1e-12);
  }
  EXPECT_THROW(bootstrap_ci(pred, v, {50, 0.0, 1}), ClassifyError);
  EXPECT_THROW(bootstrap_ci({true, false}, {true, false}, {50, 0.8, 1}), ClassifyError);
}

TEST(Bootstrap, AgreesWithIndependentResampler) {
  std::mt19937 gen(5);
  const std::size_t n = 200;
  std::vector<bool> pred(n), truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = gen() % 2;
    pred[i] = gen() % 10 < 8 ? truth[i] : !truth[i];
  }
  const Metrics m = bootstrap_ci(pred, truth, {1000, 0.8, 17});
  std::vector<std::size_t> idx(n);
  std::array<std::vector<double>, 7> samples;
  std::mt19937 oracle(2024);
  for (int it = 0; it < 1000; ++it) {
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), oracle);
    std::vector<bool> p, t;
    for (std::size_t k = 0; k < 160; ++k) p.push_back(pred[idx[k]]), t.push_back(truth[idx[k]]);
    const auto v = brute_metrics(p, t);
    for (std::size_t k = 0; k < 7; ++k) samples[k].push_back(v[k]);
  }
  for (std::size_t k = 0; k < 7; ++k) {
    std::sort(samples[k].begin(), samples[k].end());
    EXPECT_NEAR(m.ci[k]->low, percentile(samples[k], 0.025), 0.02) << k;
    EXPECT_NEAR(m.ci[k]->high, percentile(samples[k], 0.975), 0.02) << k;
  }
}

TEST(Bootstrap, BracketsPointAndNarrowsWithN) {
  auto make = [](std::size_t n) {
    std::vector<bool> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = i % 2;
      pred[i] = i % 10 < 8 ? truth[i] : !truth[i];
    }
    return std::make_pair(pred, truth);
  };
  const auto [p50, t50] = make(50);
  const auto [p500, t500] = make(500);
  const Metrics small = bootstrap_ci(p50, t50, {1000, 0.8, 3});
  const Metrics large = bootstrap_ci(p500, t500, {1000, 0.8, 3});
  EXPECT_DOUBLE_EQ(small.accuracy, 0.8);
  EXPECT_LE(small.ci[0]->low, 0.8);
  EXPECT_GE(small.ci[0]->high, 0.8);
  EXPECT_LT(large.ci[0]->high - large.ci[0]->low, small.ci[0]->high - small.ci[0]->low);
}

TEST(Bootstrap, InvariantToPairOrder) {
  std::mt19937 gen(8);
  std::vector<bool> pred(60), truth(60);
  for (std::size_t i = 0; i < 60; ++i) pred[i] = gen() % 2, truth[i] = gen() % 2;
  std::vector<std::size_t> perm(60);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);
  std::vector<bool> p2(60), t2(60);
  for (std::size_t i = 0; i < 60; ++i) p2[i] = pred[perm[i]], t2[i] = truth[perm[i]];
  const Metrics a = bootstrap_ci(pred, truth, {300, 0.8, 4}), b = bootstrap_ci(p2, t2, {300, 0.8, 4});
  for (std::size_t k = 0; k < kMetricCount; ++k) {
    EXPECT_DOUBLE_EQ(a.ci[k]->low, b.ci[k]->low);
    EXPECT_DOUBLE_EQ(a.ci[k]->high, b.ci[k]->high);
  }
}

TEST(Selection, HigherMacroF1WinsAndTiesPreferNaiveBayes) {
  Candidate nb, lr;
  nb.spec.kind = ModelKind::NaiveBayes;
  lr.spec.kind = ModelKind::LogisticRegression;
  nb.metrics.macro_f1 = 0.47;
  lr.metrics.macro_f1 = 0.92;
  EXPECT_EQ(select_best({nb, lr}), 1u);
  nb.metrics = lr.metrics;
  EXPECT_EQ(select_best({lr, nb}), 1u);
  EXPECT_THROW(select_best({}), ClassifyError);
}

TEST(Grid, ExpandAndValidate) {
  HyperGrid g;
  const auto specs = g.expand();
  EXPECT_EQ(specs.size(), 3u + 3u + 27u);
  EXPECT_EQ(specs.front().kind, ModelKind::NaiveBayes);
  EXPECT_EQ(specs.back().kind, ModelKind::RandomForest);
  g.logreg_C = {0.0};
  EXPECT_THROW(g.validate(), ClassifyError);
}

TEST(TrainTopic, LearnsThemeAndFallsBackOnOneClass) {
  const auto ex = themed_examples(100, 21);
  HyperGrid g;
  g.rf_n_estimators = {20};
  g.rf_max_depth = {std::nullopt};
  g.rf_min_samples_split = {2};
  TrainOptions opt;
  opt.bootstrap.iterations = 100;
  const TopicTrainingResult r = train_topic(TopicId::BreakUp, ex, g, opt);
  EXPECT_FALSE(r.fallback);
  EXPECT_EQ(r.n_train + r.n_test, 100u);
  EXPECT_EQ(r.kinds.size(), 3u);
  EXPECT_GE(r.leaderboard[r.best_candidate].metrics.macro_f1, 0.9);

  std::vector<LabeledDoc> neg;
  for (int i = 0; i < 10; ++i) neg.push_back(example("n" + std::to_string(i), "nothing relevant", false));
  const TopicTrainingResult f = train_topic(TopicId::PetLoss, neg, g, opt);
  EXPECT_TRUE(f.fallback);
  EXPECT_EQ(f.best_model.kind, ModelKind::Constant);
  EXPECT_FALSE(f.note.empty());
}

TEST(Models, JsonRoundTripPreservesPredictions) {
  const auto ex = themed_examples(80, 2);
  const TrainingData data = TrainingData::build(ex);
  std::vector<topic::TokenizedDoc> docs;
  for (const auto& e : themed_examples(50, 3)) docs.push_back(e.doc);
  for (const TrainedModel& m : {train_nb(data, 0.5), train_logreg(data, 1.0, 1), train_rf(data, 15, 10, 2, 1),
                                constant_model(data, true)}) {
    const TrainedModel back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
    EXPECT_EQ(back.kind, m.kind);
    EXPECT_EQ(back.predict_all(docs), m.predict_all(docs)) << to_string(m.kind);
  }
  std::vector<LabeledDoc> one_class(ex.begin(), ex.end());
  for (auto& e : one_class) e.label = true;
  EXPECT_THROW(train_nb(TrainingData::build(one_class), 1.0), ClassifyError);
}

TEST(Predict, MatchedOnlyAndFraction) {
  const TrainingData data = TrainingData::build(themed_examples(30, 4));
  Corpus corpus(4);
  for (int i = 0; i < 4; ++i) {
    corpus[i].id = "D" + std::to_string(i);
    corpus[i].narratives.le_narrative = "text " + std::to_string(i);
  }
  MatchSet m;
  m.total_decedents = 4;
  for (const auto& r : corpus) m.decedent_ids.push_back(r.id);
  m.flagged[TopicId::Divorce] = {1, 3};
  const PredictionSet p = predict_matched(constant_model(data, true), m, corpus, TopicId::Divorce);
  EXPECT_EQ(p.decedent_ids, (std::vector<std::string>{"D1", "D3"}));
  EXPECT_DOUBLE_EQ(p.fraction_positive(), 1.0);
  const PredictionSet empty = predict_matched(constant_model(data, true), m, corpus, TopicId::PetLoss);
  EXPECT_EQ(empty.matched_count(), 0u);
  EXPECT_DOUBLE_EQ(empty.fraction_positive(), 0.0);

  PredictionSet big;
  big.decedent_ids.resize(29977);
  big.positive_count = 9468;
  EXPECT_EQ(format_fixed(big.fraction_positive(), 3), "0.316");
}

TEST(Labels, ParseLatestAndConsensus) {
  const std::string csv = std::string(kLabelsHeader) +
                          "\nD1,DIVORCE,A1,1,2024-01-01T00:00:00Z"
                          "\nD1,DIVORCE,A2,0,2024-01-01T00:00:01Z"
                          "\nD1,DIVORCE,ADJUDICATED,1,2024-01-01T00:00:02Z"
                          "\nD2,DIVORCE,A1,0,2024-01-01T00:00:03Z"
                          "\nD2,DIVORCE,A1,1,2024-01-01T00:00:04Z"
                          "\nD3,PET_LOSS,A1,1,2024-01-01T00:00:05+02:00\n";
  const auto rows = parse_labels_csv(csv);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(labels_csv(rows), csv);
  EXPECT_EQ(latest_labels(rows).size(), 5u);
  const auto consensus = consensus_labels(rows);
  ASSERT_EQ(consensus.size(), 3u);
  EXPECT_EQ(consensus[0].decedent_id, "D1");
  EXPECT_TRUE(consensus[0].relevant);
  EXPECT_TRUE(consensus[0].adjudicated);
  EXPECT_EQ(consensus[0].n_annotators, 2u);
  EXPECT_TRUE(consensus[1].relevant);

  const auto disagree = parse_labels_csv(std::string(kLabelsHeader) +
                                         "\nD1,DIVORCE,A1,1,2024-01-01T00:00:00Z\nD1,DIVORCE,A2,0,2024-01-01T00:00:00Z\n");
  EXPECT_THROW(consensus_labels(disagree), ClassifyError);
}

TEST(Labels, RejectsMalformedRows) {
  const std::string h = std::string(kLabelsHeader) + "\n";
  EXPECT_THROW(parse_labels_csv(""), ClassifyError);
  EXPECT_THROW(parse_labels_csv("id,topic\n"), ClassifyError);
  EXPECT_THROW(parse_labels_csv(h + "D1,NOPE,A1,1,2024-01-01T00:00:00Z\n"), ClassifyError);
  EXPECT_THROW(parse_labels_csv(h + "D1,DIVORCE,A1,yes,2024-01-01T00:00:00Z\n"), ClassifyError);
  EXPECT_THROW(parse_labels_csv(h + "D1,DIVORCE,A1,1,yesterday\n"), ClassifyError);
  EXPECT_THROW(parse_labels_csv(h + "D1,DIVORCE,A1,1\n"), ClassifyError);
  EXPECT_TRUE(is_rfc3339("2020-02-29T23:59:60.5Z"));
  EXPECT_FALSE(is_rfc3339("2020-13-01T00:00:00Z"));
}
