#include "isolex/topicmodel.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <optional>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "isolex/rng.hpp"
#include "isolex/util.hpp"

namespace isolex::topic {

namespace {

// English function words; contractions appear split at the apostrophe.
constexpr std::array<std::string_view, 153> kStopWords{
    "a",        "about",   "above",     "after",    "again",   "against", "ain",     "all",      "am",
    "an",       "and",     "any",       "are",      "aren",    "as",      "at",      "be",       "because",
    "been",     "before",  "being",     "below",    "between", "both",    "but",     "by",       "can",
    "couldn",   "d",       "did",       "didn",     "do",      "does",    "doesn",   "doing",    "don",
    "down",     "during",  "each",      "few",      "for",     "from",    "further", "had",      "hadn",
    "has",      "hasn",    "have",      "haven",    "having",  "he",      "her",     "here",     "hers",
    "herself",  "him",     "himself",   "his",      "how",     "i",       "if",      "in",       "into",
    "is",       "isn",     "it",        "its",      "itself",  "just",    "ll",      "m",        "ma",
    "me",       "mightn",  "more",      "most",     "mustn",   "my",      "myself",  "needn",    "no",
    "nor",      "not",     "now",       "o",        "of",      "off",     "on",      "once",     "only",
    "or",       "other",   "our",       "ours",     "ourselves", "out",   "over",    "own",      "re",
    "s",        "same",    "shan",      "she",      "should",  "shouldn", "so",      "some",     "such",
    "t",        "than",    "that",      "the",      "their",   "theirs",  "them",    "themselves", "then",
    "there",    "these",   "they",      "this",     "those",   "through", "to",      "too",      "under",
    "until",    "up",      "ve",        "very",     "was",     "wasn",    "we",      "were",     "weren",
    "what",     "when",    "where",     "which",    "while",   "who",     "whom",    "why",      "will",
    "with",     "won",     "wouldn",    "y",        "you",     "your",    "yours",   "yourself", "yourselves"};

const std::unordered_set<std::string_view>& stop_set() {
  static const std::unordered_set<std::string_view> set(kStopWords.begin(), kStopWords.end());
  return set;
}

}  // namespace

bool is_stop_word(std::string_view word) { return stop_set().count(word) != 0; }

TokenizedDoc tokenize(std::string_view text, std::string doc_id) {
  TokenizedDoc doc;
  doc.doc_id = std::move(doc_id);
  std::string current;
  auto flush = [&] {
    if (!current.empty() && !is_stop_word(current)) doc.tokens.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  doc.n_unigrams = doc.tokens.size();
  for (std::size_t i = 0; i + 1 < doc.n_unigrams; ++i) doc.tokens.push_back(doc.tokens[i] + " " + doc.tokens[i + 1]);
  return doc;
}

// ---------------------------------------------------------------------------

double SparseVector::norm() const {
  double s = 0.0;
  for (double v : value) s += v * v;
  return std::sqrt(s);
}

double SparseVector::dot(const SparseVector& other) const {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < index.size() && j < other.index.size()) {
    if (index[i] == other.index[j]) {
      s += value[i++] * other.value[j++];
    } else if (index[i] < other.index[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return s;
}

double SparseVector::at(std::uint32_t column) const {
  auto it = std::lower_bound(index.begin(), index.end(), column);
  return it != index.end() && *it == column ? value[static_cast<std::size_t>(it - index.begin())] : 0.0;
}

Eigen::MatrixXd SparseMatrix::multiply(const Eigen::MatrixXd& dense) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), dense.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].index.size(); ++k)
      out.row(static_cast<Eigen::Index>(i)) += rows[i].value[k] * dense.row(rows[i].index[k]);
  return out;
}

Eigen::MatrixXd SparseMatrix::transpose_multiply(const Eigen::MatrixXd& dense) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cols), dense.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].index.size(); ++k)
      out.row(rows[i].index[k]) += rows[i].value[k] * dense.row(static_cast<Eigen::Index>(i));
  return out;
}

Eigen::MatrixXd SparseMatrix::to_dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].index.size(); ++k)
      out(static_cast<Eigen::Index>(i), rows[i].index[k]) = rows[i].value[k];
  return out;
}

SparseVector TfidfModel::counts(const TokenizedDoc& doc) const {
  std::map<std::uint32_t, double> acc;
  for (const auto& tok : doc.tokens)
    if (auto it = vocabulary.find(tok); it != vocabulary.end()) acc[it->second] += 1.0;
  SparseVector v;
  for (const auto& [col, c] : acc) {
    v.index.push_back(col);
    v.value.push_back(c);
  }
  return v;
}

SparseVector TfidfModel::transform(const TokenizedDoc& doc) const {
  SparseVector v = counts(doc);
  for (std::size_t k = 0; k < v.index.size(); ++k) v.value[k] *= idf[v.index[k]];
  const double n = v.norm();
  if (n > 0.0)
    for (double& x : v.value) x /= n;
  return v;
}

SparseMatrix TfidfModel::transform_all(const std::vector<TokenizedDoc>& docs) const {
  SparseMatrix m;
  m.cols = terms.size();
  m.rows.reserve(docs.size());
  for (const auto& d : docs) m.rows.push_back(transform(d));
  return m;
}

TfidfModel fit_tfidf(const std::vector<TokenizedDoc>& docs, std::size_t min_df) {
  if (docs.empty()) throw TopicModelError("fit_tfidf needs at least one document");
  std::map<std::string, std::size_t> df;
  for (const auto& d : docs) {
    std::vector<std::string> uniq(d.tokens);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (auto& t : uniq) ++df[t];
  }
  TfidfModel m;
  m.n_docs = docs.size();
  m.min_df = min_df;
  const double n = static_cast<double>(docs.size());
  for (const auto& [term, count] : df) {
    if (count < min_df) continue;
    m.vocabulary.emplace(term, static_cast<std::uint32_t>(m.terms.size()));
    m.terms.push_back(term);
    m.document_frequency.push_back(count);
    m.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  if (m.terms.empty())
    throw TopicModelError("empty vocabulary: no term reaches min_df=" + std::to_string(min_df) + " over " +
                          std::to_string(docs.size()) + " documents");
  return m;
}

nlohmann::json tfidf_to_json(const TfidfModel& model) {
  return {{"terms", model.terms},
          {"document_frequency", model.document_frequency},
          {"idf", model.idf},
          {"n_docs", model.n_docs},
          {"min_df", model.min_df}};
}

TfidfModel tfidf_from_json(const nlohmann::json& j) {
  TfidfModel m;
  m.terms = j.at("terms").get<std::vector<std::string>>();
  m.document_frequency = j.at("document_frequency").get<std::vector<std::size_t>>();
  m.idf = j.at("idf").get<std::vector<double>>();
  m.n_docs = j.at("n_docs").get<std::size_t>();
  m.min_df = j.at("min_df").get<std::size_t>();
  if (m.terms.size() != m.idf.size() || m.terms.size() != m.document_frequency.size())
    throw TopicModelError("tfidf archive has inconsistent array lengths");
  for (std::size_t i = 0; i < m.terms.size(); ++i) m.vocabulary.emplace(m.terms[i], static_cast<std::uint32_t>(i));
  return m;
}

// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  const Eigen::Index cols = std::min(y.rows(), y.cols());
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), cols);
}

}  // namespace

Embedding reduce(const SparseMatrix& matrix, std::size_t n_components, std::uint64_t seed) {
  const std::size_t n = matrix.n_rows(), d = matrix.cols;
  if (n_components == 0) throw TopicModelError("n_components must be at least 1");
  if (n_components > std::min(n, d))
    throw TopicModelError("n_components=" + std::to_string(n_components) + " exceeds min(n_docs, n_terms)=" +
                          std::to_string(std::min(n, d)));

  const std::size_t sketch = std::min(n_components + 10, std::min(n, d));
  Rng rng(seed);
  Eigen::MatrixXd omega(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(sketch));
  for (Eigen::Index j = 0; j < omega.cols(); ++j)
    for (Eigen::Index i = 0; i < omega.rows(); ++i) omega(i, j) = rng.normal();

  Eigen::MatrixXd q = orthonormal_basis(matrix.multiply(omega));
  for (int iter = 0; iter < 4; ++iter) {
    const Eigen::MatrixXd z = orthonormal_basis(matrix.transpose_multiply(q));
    q = orthonormal_basis(matrix.multiply(z));
  }
  const Eigen::MatrixXd b = matrix.transpose_multiply(q).transpose();  // sketch x d
  Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();

  std::size_t rank = 0;
  const double tol = sigma.size() ? sigma(0) * 1e-10 : 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > tol && sigma(i) > 1e-300) ++rank;
  if (rank == 0) throw TopicModelError("cannot reduce a zero matrix");

  Embedding e;
  std::size_t k = n_components;
  if (rank < k) {
    e.rank_limited = true;
    e.warning = "requested " + std::to_string(k) + " components but matrix rank is " + std::to_string(rank);
    k = rank;
  }
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd u = q * svd.matrixU().leftCols(kk);
  Eigen::MatrixXd v = svd.matrixV().leftCols(kk);
  for (Eigen::Index c = 0; c < kk; ++c) {
    Eigen::Index arg = 0;
    v.col(c).cwiseAbs().maxCoeff(&arg);
    if (v(arg, c) < 0) {
      v.col(c) *= -1.0;
      u.col(c) *= -1.0;
    }
  }
  e.singular_values = sigma.head(kk);
  e.coords = u * e.singular_values.asDiagonal();
  e.components = std::move(v);
  return e;
}

void TopicHyperParams::validate() const {
  if (n_components < 1) throw TopicModelError("n_components must be >= 1");
  if (n_clusters < 2) throw TopicModelError("n_clusters must be >= 2");
  if (min_cluster_size < 1) throw TopicModelError("min_cluster_size must be >= 1");
}

ClusterResult cluster(const Eigen::MatrixXd& x, const TopicHyperParams& params) {
  params.validate();
  const auto n = static_cast<std::size_t>(x.rows());
  if (n == 0 || x.cols() == 0) throw TopicModelError("cannot cluster an empty embedding");
  const std::size_t k = params.n_clusters;
  if (k > n) throw TopicModelError("n_clusters exceeds number of documents");

  Rng rng(mix_seed(params.seed, 0x6b6d65616e73ull));
  Eigen::MatrixXd centers(static_cast<Eigen::Index>(k), x.cols());
  std::vector<char> chosen(n, 0);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t pick = first;
    if (c > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
      if (total > 0.0) {
        const double u = rng.uniform() * total;
        double acc = 0.0;
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (chosen[i]) continue;
          acc += d2[i];
          if (u < acc) {
            pick = i;
            break;
          }
        }
        if (pick == n)
          for (std::size_t i = n; i-- > 0;)
            if (!chosen[i] && d2[i] > 0) {
              pick = i;
              break;
            }
      } else {
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < n; ++i)
          if (!chosen[i]) rest.push_back(i);
        pick = rest[rng.below(rest.size())];
      }
    }
    chosen[pick] = 1;
    centers.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (x.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(c))).squaredNorm());
  }

  ClusterResult result;
  std::vector<int> assign(n, 0);
  for (std::size_t iter = 1; iter <= 300; ++iter) {
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double dist =
            (x.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(c))).squaredNorm();
        if (dist < best) {
          best = dist;
          arg = static_cast<int>(c);
        }
      }
      assign[i] = arg;
      objective += best;
    }
    result.objective_history.push_back(objective);
    result.iterations = iter;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(centers.rows(), centers.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(assign[i]) += x.row(static_cast<Eigen::Index>(i));
      ++counts[static_cast<std::size_t>(assign[i])];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      const Eigen::RowVectorXd updated = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
      shift = std::max(shift, (updated - centers.row(static_cast<Eigen::Index>(c))).norm());
      centers.row(static_cast<Eigen::Index>(c)) = updated;
    }
    if (shift < 1e-6) break;
  }

  std::vector<std::size_t> sizes(k, 0);
  for (int a : assign) ++sizes[static_cast<std::size_t>(a)];
  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < k; ++c)
    if (sizes[c] >= params.min_cluster_size) order.push_back(c);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
  std::vector<int> relabel(k, -1);
  for (std::size_t r = 0; r < order.size(); ++r) relabel[order[r]] = static_cast<int>(r);

  result.raw_labels = assign;
  result.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.labels[i] = relabel[static_cast<std::size_t>(assign[i])];
  return result;
}

// ---------------------------------------------------------------------------

std::vector<TopicTerms> ctfidf_top_terms(const std::vector<TokenizedDoc>& docs, const std::vector<int>& labels,
                                         std::size_t top_n, const std::unordered_set<std::string>* vocabulary) {
  if (docs.size() != labels.size()) throw TopicModelError("ctfidf: docs and labels differ in length");
  std::map<int, std::unordered_map<std::string, double>> tf;
  std::map<int, std::size_t> sizes;
  std::unordered_map<std::string, double> f;
  double total_tokens = 0.0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto& bucket = tf[labels[i]];
    ++sizes[labels[i]];
    for (const auto& tok : docs[i].tokens) {
      if (vocabulary && !vocabulary->count(tok)) continue;
      bucket[tok] += 1.0;
      f[tok] += 1.0;
      total_tokens += 1.0;
    }
  }
  const double avg = tf.empty() ? 0.0 : total_tokens / static_cast<double>(tf.size());

  std::vector<TopicTerms> out;
  for (const auto& [label, counts] : tf) {
    TopicTerms t;
    t.label = label;
    t.size = sizes[label];
    for (const auto& [term, count] : counts) t.top_terms.push_back({term, count * std::log(1.0 + avg / f[term])});
    std::sort(t.top_terms.begin(), t.top_terms.end(), [](const TermWeight& a, const TermWeight& b) {
      if (a.weight != b.weight) return a.weight > b.weight;
      return a.term < b.term;
    });
    if (t.top_terms.size() > top_n) t.top_terms.resize(top_n);
    out.push_back(std::move(t));
  }
  return out;
}

CoherenceResult umass_coherence(const std::vector<std::vector<std::string>>& topic_terms,
                                const std::vector<TokenizedDoc>& docs, std::size_t terms_per_topic) {
  std::unordered_map<std::string, std::vector<std::uint32_t>> postings;
  for (const auto& terms : topic_terms)
    for (std::size_t i = 0; i < std::min(terms.size(), terms_per_topic); ++i) postings.emplace(terms[i], std::vector<std::uint32_t>{});
  for (std::size_t d = 0; d < docs.size(); ++d) {
    std::unordered_set<std::string_view> seen;
    for (const auto& tok : docs[d].tokens) {
      if (!seen.insert(tok).second) continue;
      if (auto it = postings.find(tok); it != postings.end()) it->second.push_back(static_cast<std::uint32_t>(d));
    }
  }
  auto co_count = [](const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
    std::size_t n = 0, i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] == b[j]) {
        ++n, ++i, ++j;
      } else if (a[i] < b[j]) {
        ++i;
      } else {
        ++j;
      }
    }
    return n;
  };

  CoherenceResult r;
  double sum_topics = 0.0;
  std::size_t n_topics = 0;
  for (const auto& terms : topic_terms) {
    const std::size_t m = std::min(terms.size(), terms_per_topic);
    if (m < 2) {
      ++r.skipped_topics;
      r.per_topic.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    double s = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 1; i < m; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        const auto& pj = postings[terms[j]];
        if (pj.empty()) {
          ++r.skipped_pairs;
          continue;
        }
        const double joint = static_cast<double>(co_count(postings[terms[i]], pj));
        s += std::log((joint + 1.0) / static_cast<double>(pj.size()));
        ++pairs;
      }
    }
    r.scored_pairs += pairs;
    if (pairs == 0) {
      r.per_topic.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double c = s / static_cast<double>(pairs);
    r.per_topic.push_back(c);
    sum_topics += c;
    ++n_topics;
  }
  if (n_topics == 0) throw TopicModelError("umass coherence: every term pair was skipped");
  r.coherence = sum_topics / static_cast<double>(n_topics);
  return r;
}

// ---------------------------------------------------------------------------

std::size_t TopicModelResult::n_topics() const {
  std::size_t n = 0;
  for (const auto& t : topics)
    if (t.label >= 0) ++n;
  return n;
}

TopicCorpus TopicCorpus::build(std::vector<TokenizedDoc> docs, std::size_t min_df) {
  TopicCorpus c;
  c.docs = std::move(docs);
  c.tfidf = fit_tfidf(c.docs, min_df);
  c.matrix = c.tfidf.transform_all(c.docs);
  c.vocabulary.insert(c.tfidf.terms.begin(), c.tfidf.terms.end());
  return c;
}

TopicModelResult fit_topic_model(const TopicCorpus& corpus, const TopicHyperParams& params) {
  params.validate();
  Embedding emb = reduce(corpus.matrix, params.n_components, params.seed);
  // Cosine geometry: cluster on unit-length rows of the LSA embedding.
  for (Eigen::Index i = 0; i < emb.coords.rows(); ++i) {
    const double norm = emb.coords.row(i).norm();
    if (norm > 0) emb.coords.row(i) /= norm;
  }
  ClusterResult clusters = cluster(emb.coords, params);

  TopicModelResult result;
  result.hyperparams = params;
  result.assignments = clusters.labels;
  for (const auto& d : corpus.docs) result.doc_ids.push_back(d.doc_id);
  result.topics = ctfidf_top_terms(corpus.docs, clusters.labels, 50, &corpus.vocabulary);

  std::vector<std::vector<std::string>> lists;
  for (const auto& t : result.topics) {
    if (t.label < 0) continue;
    std::vector<std::string> terms;
    for (const auto& tw : t.top_terms) terms.push_back(tw.term);
    lists.push_back(std::move(terms));
  }
  if (lists.empty()) throw TopicModelError("every document was assigned to the outlier topic");
  result.coherence = umass_coherence(lists, corpus.docs, 10).coherence;
  return result;
}

namespace {

std::string describe(const TopicHyperParams& p) {
  return "n_components=" + std::to_string(p.n_components) + " n_clusters=" + std::to_string(p.n_clusters) +
         " min_cluster_size=" + std::to_string(p.min_cluster_size) + " seed=" + std::to_string(p.seed);
}

}  // namespace

GridSearchResult grid_search_topics(const TopicCorpus& corpus, const std::vector<TopicHyperParams>& grid,
                                    unsigned workers) {
  if (grid.empty()) throw TopicModelError("grid search needs at least one combination");
  std::vector<std::optional<TopicModelResult>> results(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        results[i] = fit_topic_model(corpus, grid[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(grid.size())));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw TopicModelError("grid point " + std::to_string(i) + " (" + describe(grid[i]) + "): " + e.what());
    }
  }

  GridSearchResult out;
  for (std::size_t i = 0; i < grid.size(); ++i)
    out.leaderboard.push_back({grid[i], results[i]->coherence, results[i]->n_topics()});
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const auto& cand = out.leaderboard[i];
    const auto& best = out.leaderboard[out.best_index];
    if (cand.coherence > best.coherence || (cand.coherence == best.coherence && cand.n_topics < best.n_topics))
      out.best_index = i;
  }
  out.best = std::move(*results[out.best_index]);
  return out;
}

std::vector<TopicHyperParams> default_topic_grid(std::uint64_t seed) {
  std::vector<TopicHyperParams> grid;
  for (std::size_t comps : {5, 10, 15})
    for (std::size_t k : {8, 12, 16, 20, 24, 32})
      for (std::size_t mcs : {5, 10, 20}) grid.push_back({comps, k, mcs, seed});
  return grid;
}

std::string leaderboard_csv(const std::vector<LeaderboardRow>& rows) {
  std::ostringstream out;
  out << "n_components,n_clusters,min_cluster_size,seed,coherence,n_topics\n";
  for (const auto& r : rows)
    out << r.hyperparams.n_components << ',' << r.hyperparams.n_clusters << ',' << r.hyperparams.min_cluster_size
        << ',' << r.hyperparams.seed << ',' << format_fixed(r.coherence, 6) << ',' << r.n_topics << '\n';
  return out.str();
}

nlohmann::json topic_report_json(const TopicModelResult& result) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : result.topics) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& tw : t.top_terms) terms.push_back({tw.term, tw.weight});
    out.push_back({{"label", t.label}, {"size", t.size}, {"top_terms", terms}});
  }
  return out;
}

}  // namespace isolex::topic
