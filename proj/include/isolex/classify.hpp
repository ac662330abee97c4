#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "isolex/corpus.hpp"
#include "isolex/enums.hpp"
#include "isolex/lexicon.hpp"
#include "isolex/topicmodel.hpp"
#include "json.hpp"

namespace isolex::classify {

class ClassifyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using topic::SparseVector;
using topic::TokenizedDoc;

// ---------------------------------------------------------------------------
// Examples and splitting

struct LabeledDoc {
  std::string decedent_id;
  TokenizedDoc doc;
  bool label = false;
};

struct DataSplit {
  std::vector<LabeledDoc> train;
  std::vector<LabeledDoc> test;
};

/// Per-class shuffle then round(fraction * class size) into train. Both halves
/// keep input order.
DataSplit split(const std::vector<LabeledDoc>& examples, double train_fraction, std::uint64_t seed);

/// Train-split vocabulary plus both featurizations of every training row.
struct TrainingData {
  topic::TfidfModel tfidf;
  std::vector<SparseVector> counts;  // raw term counts (NB)
  std::vector<SparseVector> tfidf_rows;
  std::vector<int> labels;  // 0/1

  static TrainingData build(const std::vector<LabeledDoc>& train);
  std::size_t n_features() const { return tfidf.terms.size(); }
};

Eigen::MatrixXd densify(const std::vector<SparseVector>& rows, std::size_t n_features);

// ---------------------------------------------------------------------------
// Models

enum class ModelKind { NaiveBayes, LogisticRegression, RandomForest, Constant };

struct ModelSpec {
  ModelKind kind = ModelKind::NaiveBayes;
  double alpha = 1.0;                    // NB
  double C = 1.0;                        // LogReg
  std::size_t n_estimators = 100;        // RF
  std::optional<std::size_t> max_depth;  // RF; absent = unbounded
  std::size_t min_samples_split = 2;     // RF
  bool constant_label = false;           // Constant

  std::string describe() const;
  bool operator==(const ModelSpec&) const = default;
};

struct HyperGrid {
  std::vector<double> logreg_C{0.01, 0.1, 1.0};
  std::vector<std::size_t> rf_n_estimators{100, 200, 300};
  std::vector<std::optional<std::size_t>> rf_max_depth{std::nullopt, 10, 20};
  std::vector<std::size_t> rf_min_samples_split{2, 5, 10};
  std::vector<double> nb_alpha{0.1, 0.5, 1.0};

  void validate() const;
  /// NB grid, then LogReg, then RF (n_estimators, max_depth, min_samples_split).
  std::vector<ModelSpec> expand() const;
};

struct NaiveBayesModel {
  double alpha = 1.0;
  std::array<double, 2> log_prior{};
  std::array<std::vector<double>, 2> log_likelihood;  // [class][term]

  /// Per-class joint log score; index 1 is the positive class.
  std::array<double, 2> scores(const SparseVector& counts) const;
  bool predict(const SparseVector& counts) const;  // ties go negative
};

/// P(t|c) = (count(t,c) + alpha) / (total(c) + alpha * n_features).
NaiveBayesModel fit_naive_bayes(const std::vector<SparseVector>& counts, const std::vector<int>& labels,
                                std::size_t n_features, double alpha);

struct LogisticModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  double C = 1.0;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
  std::vector<double> loss_history;

  double decision(const SparseVector& x) const;
  double decision(const Eigen::VectorXd& x) const;
  bool predict(const SparseVector& x) const { return decision(x) > 0.0; }
};

struct LogisticObjective {
  double loss = 0.0;
  Eigen::VectorXd grad_w;
  double grad_b = 0.0;
};

/// mean log-loss + ||w||^2 / (2 C n), intercept unpenalized.
LogisticObjective logistic_objective(const Eigen::MatrixXd& x, const std::vector<int>& y, const Eigen::VectorXd& w,
                                     double b, double C);

/// L-BFGS with Armijo backtracking; stops at gradient norm < 1e-5 or 1000 iterations.
LogisticModel fit_logistic(const Eigen::MatrixXd& x, const std::vector<int>& y, double C);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;   // x[feature] <= threshold
  int right = -1;  // x[feature] > threshold
  std::array<double, 2> counts{};

  bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // root at 0

  bool predict(const SparseVector& x) const;
  bool predict(const Eigen::VectorXd& x) const;
  std::size_t depth() const;
};

struct ForestParams {
  std::size_t n_estimators = 100;
  std::optional<std::size_t> max_depth;
  std::size_t min_samples_split = 2;
};

struct ForestModel {
  ForestParams params;
  std::size_t n_features = 0;
  std::vector<DecisionTree> trees;

  std::size_t positive_votes(const SparseVector& x) const;
  bool predict(const SparseVector& x) const;  // strict majority, ties go negative
  bool predict(const Eigen::VectorXd& x) const;
};

/// Bagged Gini CART, ceil(sqrt(d)) candidate features per node, midpoint thresholds.
ForestModel fit_forest(const Eigen::MatrixXd& x, const std::vector<int>& y, const ForestParams& params,
                       std::uint64_t seed);

struct TrainedModel {
  ModelKind kind = ModelKind::NaiveBayes;
  ModelSpec spec;
  topic::TfidfModel tfidf;
  std::uint64_t seed = 0;
  NaiveBayesModel nb;
  LogisticModel logreg;
  ForestModel forest;

  bool predict(const TokenizedDoc& doc) const;
  std::vector<bool> predict_all(const std::vector<TokenizedDoc>& docs) const;
};

TrainedModel train_nb(const TrainingData& data, double alpha);
TrainedModel train_logreg(const TrainingData& data, double C, std::uint64_t seed);
TrainedModel train_rf(const TrainingData& data, std::size_t n_estimators, std::optional<std::size_t> max_depth,
                      std::size_t min_samples_split, std::uint64_t seed);
/// Dispatches on spec.kind. Every trainer rejects a single-class training set.
TrainedModel train_model(const TrainingData& data, const ModelSpec& spec, std::uint64_t seed);
/// Fallback for annotation samples that contain one class only.
TrainedModel constant_model(const TrainingData& data, bool label);

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Metrics

enum class MetricId { Accuracy, PrecisionPos, RecallPos, F1Pos, MacroPrecision, MacroRecall, MacroF1 };
inline constexpr std::size_t kMetricCount = 7;

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t n() const { return tp + fp + fn + tn; }
  bool operator==(const Confusion&) const = default;
};

Confusion confusion(const std::vector<bool>& predictions, const std::vector<bool>& labels);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

struct Metrics {
  double accuracy = 0.0;
  double precision_pos = 0.0;
  double recall_pos = 0.0;
  double f1_pos = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::size_t n = 0;
  std::array<std::optional<Interval>, kMetricCount> ci{};
  std::array<std::size_t, kMetricCount> excluded{};

  double value(MetricId id) const;
  std::array<double, kMetricCount> values() const;
};

/// How a zero denominator is treated: scored 0, or left undefined.
enum class UndefinedPolicy { Zero, Undefined };

/// Per-metric values; nullopt only under UndefinedPolicy::Undefined.
std::array<std::optional<double>, kMetricCount> metric_values(const Confusion& c, UndefinedPolicy policy);

/// Point metrics with the zero-denominator-is-zero convention.
Metrics metrics_from_confusion(const Confusion& c);
Metrics evaluate_predictions(const std::vector<bool>& predictions, const std::vector<bool>& labels);
Metrics evaluate(const TrainedModel& model, const std::vector<LabeledDoc>& test);

struct BootstrapOptions {
  std::size_t iterations = 1000;
  double fraction = 0.8;
  std::uint64_t seed = 0;
  UndefinedPolicy policy = UndefinedPolicy::Zero;
};

/// Percentile bootstrap over slices of ceil(fraction * n) pairs drawn without
/// replacement; iteration i draws from Rng(seed + i).
Metrics bootstrap_ci(const std::vector<bool>& predictions, const std::vector<bool>& labels,
                     const BootstrapOptions& options);

/// Linear interpolation between order statistics at rank q * (n - 1).
double percentile(const std::vector<double>& sorted, double q);

// ---------------------------------------------------------------------------
// Selection and per-topic training

struct Candidate {
  ModelSpec spec;
  Metrics metrics;
  std::size_t grid_index = 0;
};

/// Index of the winner on (macro_f1, recall_pos, accuracy), ties to kind order
/// NB < LogReg < RF, then grid order.
std::size_t select_best(const std::vector<Candidate>& candidates);

enum class BootstrapScope { AllSamples, TestOnly };

struct TrainOptions {
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
  std::uint64_t model_seed = 0;
  BootstrapOptions bootstrap;
  BootstrapScope scope = BootstrapScope::AllSamples;
  unsigned workers = 1;
};

struct KindReport {
  ModelKind kind{};
  std::size_t candidate_index = 0;
  Metrics test_metrics;
  Metrics bootstrap;  // point = metrics over the bootstrap population
};

struct TopicTrainingResult {
  TopicId topic{};
  std::size_t n_examples = 0, n_train = 0, n_test = 0, n_positive = 0;
  std::vector<Candidate> leaderboard;
  std::vector<KindReport> kinds;  // one per model kind present in the grid
  std::size_t best_candidate = 0;
  TrainedModel best_model;
  bool fallback = false;
  std::string note;
};

/// Split, grid search within each kind on the held-out split, then across
/// kinds. A sample with one class yields a Constant fallback model.
TopicTrainingResult train_topic(TopicId topic, const std::vector<LabeledDoc>& examples, const HyperGrid& grid,
                                const TrainOptions& options);

std::string metrics_csv_header();
std::string metrics_csv_row(TopicId topic, ModelKind kind, const Metrics& m);
std::string leaderboard_csv(TopicId topic, const std::vector<Candidate>& candidates);

// ---------------------------------------------------------------------------
// Two-stage prediction

struct PredictionSet {
  TopicId topic{};
  std::vector<std::string> decedent_ids;  // lexicon-flagged only, corpus order
  std::vector<bool> predictions;
  std::size_t positive_count = 0;
  std::size_t matched_count() const { return decedent_ids.size(); }
  double fraction_positive() const;  // 0 for an empty set
};

PredictionSet predict_matched(const TrainedModel& model, const MatchSet& matches, const Corpus& corpus,
                              TopicId topic);

// ---------------------------------------------------------------------------
// Annotation labels

inline constexpr std::string_view kAdjudicatedAnnotator = "ADJUDICATED";
inline constexpr std::string_view kLabelsHeader = "decedent_id,topic,annotator_id,relevant,timestamp";

struct LabelRow {
  std::string decedent_id;
  TopicId topic{};
  std::string annotator_id;
  bool relevant = false;
  std::string timestamp;  // RFC 3339

  bool operator==(const LabelRow&) const = default;
};

bool is_rfc3339(std::string_view timestamp);
std::vector<LabelRow> parse_labels_csv(std::string_view text);
std::string labels_csv_row(const LabelRow& row);
std::string labels_csv(const std::vector<LabelRow>& rows);

/// Latest row per (decedent, topic, annotator) in file order.
std::vector<LabelRow> latest_labels(const std::vector<LabelRow>& rows);

struct ConsensusLabel {
  std::string decedent_id;
  TopicId topic{};
  bool relevant = false;
  std::size_t n_annotators = 0;
  bool adjudicated = false;
};

/// Agreeing annotators give their label; an ADJUDICATED row settles any item.
/// Throws listing the items whose annotators disagree without adjudication.
std::vector<ConsensusLabel> consensus_labels(const std::vector<LabelRow>& rows);

}  // namespace isolex::classify

namespace isolex {
template <>
struct EnumTraits<classify::ModelKind> {
  static constexpr std::array<std::string_view, 4> names{"NAIVE_BAYES", "LOGISTIC_REGRESSION", "RANDOM_FOREST",
                                                         "CONSTANT"};
};
}  // namespace isolex
