#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "json.hpp"

namespace isolex::topic {

class TopicModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Tokenization

/// Lowercase unigrams followed by the bigrams of adjacent kept unigrams.
struct TokenizedDoc {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::size_t n_unigrams = 0;
};

bool is_stop_word(std::string_view word);

/// Splits on runs of non-[a-z0-9] bytes after ASCII lowercasing, drops stop
/// words, then appends space-joined bigrams of the surviving unigrams.
TokenizedDoc tokenize(std::string_view text, std::string doc_id = {});

// ---------------------------------------------------------------------------
// TF-IDF

struct SparseVector {
  std::vector<std::uint32_t> index;  // ascending
  std::vector<double> value;

  bool empty() const { return index.empty(); }
  double norm() const;
  double dot(const SparseVector& other) const;
  double at(std::uint32_t column) const;  // 0 when absent
};

/// Row-compressed matrix of sparse rows.
struct SparseMatrix {
  std::size_t cols = 0;
  std::vector<SparseVector> rows;

  std::size_t n_rows() const { return rows.size(); }
  Eigen::MatrixXd multiply(const Eigen::MatrixXd& dense) const;            // A * D
  Eigen::MatrixXd transpose_multiply(const Eigen::MatrixXd& dense) const;  // A^T * D
  Eigen::MatrixXd to_dense() const;
};

struct TfidfModel {
  std::map<std::string, std::uint32_t> vocabulary;  // term -> column, lexicographic
  std::vector<std::string> terms;                   // column -> term
  std::vector<std::size_t> document_frequency;
  std::vector<double> idf;
  std::size_t n_docs = 0;
  std::size_t min_df = 1;

  /// Raw term counts over the vocabulary (unnormalized).
  SparseVector counts(const TokenizedDoc& doc) const;
  /// count * idf, L2-normalized; the zero vector when no term is in vocabulary.
  SparseVector transform(const TokenizedDoc& doc) const;
  SparseMatrix transform_all(const std::vector<TokenizedDoc>& docs) const;
};

/// idf(t) = ln((1 + n)/(1 + df(t))) + 1; throws if no term reaches min_df.
TfidfModel fit_tfidf(const std::vector<TokenizedDoc>& docs, std::size_t min_df);

nlohmann::json tfidf_to_json(const TfidfModel& model);
TfidfModel tfidf_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Reduction and clustering

struct Embedding {
  Eigen::MatrixXd coords;      // n_docs x k, U * Sigma
  Eigen::VectorXd singular_values;
  Eigen::MatrixXd components;  // n_terms x k, right singular vectors
  bool rank_limited = false;
  std::string warning;
};

/// Truncated SVD by randomized subspace iteration, columns by decreasing
/// singular value. Deterministic for a fixed seed.
Embedding reduce(const SparseMatrix& matrix, std::size_t n_components, std::uint64_t seed);

struct TopicHyperParams {
  std::size_t n_components = 5;
  std::size_t n_clusters = 8;
  std::size_t min_cluster_size = 10;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TopicHyperParams&) const = default;
};

struct ClusterResult {
  std::vector<int> labels;  // -1 = outlier; others renumbered by decreasing size
  std::vector<int> raw_labels;
  std::vector<double> objective_history;  // within-cluster SS per iteration
  std::size_t iterations = 0;
};

/// k-means++ seeded Lloyd iterations (<= 300, or centroid shift < 1e-6); clusters
/// smaller than min_cluster_size are relabeled -1.
ClusterResult cluster(const Eigen::MatrixXd& embedding, const TopicHyperParams& params);

// ---------------------------------------------------------------------------
// Topic terms and coherence

struct TermWeight {
  std::string term;
  double weight = 0.0;
};

struct TopicTerms {
  int label = -1;
  std::size_t size = 0;
  std::vector<TermWeight> top_terms;
};

/// Class-based TF-IDF: weight = tf(t,c) * ln(1 + A / f(t)). Returns one entry
/// per label present (outlier label -1 included), ordered by label. Only terms
/// occurring in a topic are ranked for it; ties break lexicographically.
std::vector<TopicTerms> ctfidf_top_terms(const std::vector<TokenizedDoc>& docs, const std::vector<int>& labels,
                                         std::size_t top_n = 50,
                                         const std::unordered_set<std::string>* vocabulary = nullptr);

struct CoherenceResult {
  double coherence = 0.0;
  std::vector<double> per_topic;  // NaN for topics without a scored pair
  std::size_t scored_pairs = 0;
  std::size_t skipped_pairs = 0;
  std::size_t skipped_topics = 0;  // fewer than two terms
};

/// UMass coherence over the first `terms_per_topic` terms of each list.
/// Throws when every pair is skipped.
CoherenceResult umass_coherence(const std::vector<std::vector<std::string>>& topic_terms,
                                const std::vector<TokenizedDoc>& docs, std::size_t terms_per_topic = 10);

// ---------------------------------------------------------------------------
// Model fit and grid search

struct TopicModelResult {
  std::vector<std::string> doc_ids;
  std::vector<int> assignments;
  std::vector<TopicTerms> topics;
  double coherence = 0.0;
  TopicHyperParams hyperparams;

  std::size_t n_topics() const;  // excluding the outlier topic
};

/// Precomputed inputs shared by every grid point.
struct TopicCorpus {
  std::vector<TokenizedDoc> docs;
  TfidfModel tfidf;
  SparseMatrix matrix;
  std::unordered_set<std::string> vocabulary;

  static TopicCorpus build(std::vector<TokenizedDoc> docs, std::size_t min_df);
};

TopicModelResult fit_topic_model(const TopicCorpus& corpus, const TopicHyperParams& params);

struct LeaderboardRow {
  TopicHyperParams hyperparams;
  double coherence = 0.0;
  std::size_t n_topics = 0;
};

struct GridSearchResult {
  TopicModelResult best;
  std::size_t best_index = 0;
  std::vector<LeaderboardRow> leaderboard;  // grid order
};

/// Evaluates every grid point; argmax coherence, ties to fewer topics then
/// earlier grid position.
GridSearchResult grid_search_topics(const TopicCorpus& corpus, const std::vector<TopicHyperParams>& grid,
                                    unsigned workers = 1);

/// 3 x 6 x 3 = 54 combinations.
std::vector<TopicHyperParams> default_topic_grid(std::uint64_t seed);

std::string leaderboard_csv(const std::vector<LeaderboardRow>& rows);
nlohmann::json topic_report_json(const TopicModelResult& result);

}  // namespace isolex::topic
