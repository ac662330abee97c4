#include "isolex/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "isolex/csv.hpp"
#include "isolex/rng.hpp"
#include "isolex/util.hpp"

namespace isolex::classify {

namespace {

void require_two_classes(const std::vector<int>& labels, std::string_view who) {
  std::size_t pos = 0;
  for (int y : labels) pos += y != 0;
  if (pos == 0 || pos == labels.size())
    throw ClassifyError(std::string(who) + ": training set has a single class (" + std::to_string(pos) + " of " +
                        std::to_string(labels.size()) + " positive)");
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------

DataSplit split(const std::vector<LabeledDoc>& examples, double train_fraction, std::uint64_t seed) {
  if (examples.size() < 5) throw ClassifyError("split needs at least 5 examples, got " + std::to_string(examples.size()));
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ClassifyError("train_fraction must lie in (0, 1)");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < examples.size(); ++i) by_class[examples[i].label ? 1 : 0].push_back(i);

  Rng rng(seed);
  std::vector<char> in_train(examples.size(), 0);
  for (auto& members : by_class) {
    for (std::size_t i = 0; i + 1 < members.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(members.size() - i));
      std::swap(members[i], members[j]);
    }
    const auto take = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < take; ++i) in_train[members[i]] = 1;
  }
  DataSplit out;
  for (std::size_t i = 0; i < examples.size(); ++i) (in_train[i] ? out.train : out.test).push_back(examples[i]);
  if (out.train.empty() || out.test.empty())
    throw ClassifyError("split left an empty side (train " + std::to_string(out.train.size()) + ", test " +
                        std::to_string(out.test.size()) + ")");
  return out;
}

TrainingData TrainingData::build(const std::vector<LabeledDoc>& train) {
  if (train.empty()) throw ClassifyError("empty training set");
  std::vector<TokenizedDoc> docs;
  docs.reserve(train.size());
  for (const auto& ex : train) docs.push_back(ex.doc);
  TrainingData data;
  data.tfidf = topic::fit_tfidf(docs, 1);
  for (const auto& ex : train) {
    data.counts.push_back(data.tfidf.counts(ex.doc));
    data.tfidf_rows.push_back(data.tfidf.transform(ex.doc));
    data.labels.push_back(ex.label ? 1 : 0);
  }
  return data;
}

Eigen::MatrixXd densify(const std::vector<SparseVector>& rows, std::size_t n_features) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_features));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].index.size(); ++k) x(static_cast<Eigen::Index>(i), rows[i].index[k]) = rows[i].value[k];
  return x;
}

// ---------------------------------------------------------------------------

std::string ModelSpec::describe() const {
  switch (kind) {
    case ModelKind::NaiveBayes:
      return "alpha=" + format_double(alpha);
    case ModelKind::LogisticRegression:
      return "C=" + format_double(C);
    case ModelKind::RandomForest:
      return "n_estimators=" + std::to_string(n_estimators) +
             " max_depth=" + (max_depth ? std::to_string(*max_depth) : std::string("none")) +
             " min_samples_split=" + std::to_string(min_samples_split);
    case ModelKind::Constant:
      return std::string("label=") + (constant_label ? "1" : "0");
  }
  return {};
}

void HyperGrid::validate() const {
  for (double c : logreg_C)
    if (!(c > 0)) throw ClassifyError("logreg_C values must be positive");
  for (auto n : rf_n_estimators)
    if (n < 1) throw ClassifyError("rf_n_estimators values must be positive");
  for (const auto& d : rf_max_depth)
    if (d && *d < 1) throw ClassifyError("rf_max_depth values must be positive or null");
  for (auto s : rf_min_samples_split)
    if (s < 2) throw ClassifyError("rf_min_samples_split values must be >= 2");
  for (double a : nb_alpha)
    if (!(a > 0)) throw ClassifyError("nb_alpha values must be positive");
  if (logreg_C.empty() && nb_alpha.empty() &&
      (rf_n_estimators.empty() || rf_max_depth.empty() || rf_min_samples_split.empty()))
    throw ClassifyError("classifier grid is empty");
}

std::vector<ModelSpec> HyperGrid::expand() const {
  std::vector<ModelSpec> out;
  for (double a : nb_alpha) {
    ModelSpec s;
    s.kind = ModelKind::NaiveBayes;
    s.alpha = a;
    out.push_back(s);
  }
  for (double c : logreg_C) {
    ModelSpec s;
    s.kind = ModelKind::LogisticRegression;
    s.C = c;
    out.push_back(s);
  }
  for (auto n : rf_n_estimators)
    for (const auto& d : rf_max_depth)
      for (auto m : rf_min_samples_split) {
        ModelSpec s;
        s.kind = ModelKind::RandomForest;
        s.n_estimators = n;
        s.max_depth = d;
        s.min_samples_split = m;
        out.push_back(s);
      }
  return out;
}

// ---------------------------------------------------------------------------
// Naive Bayes

std::array<double, 2> NaiveBayesModel::scores(const SparseVector& counts) const {
  std::array<double, 2> s = log_prior;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t k = 0; k < counts.index.size(); ++k)
      if (counts.index[k] < log_likelihood[c].size()) s[c] += counts.value[k] * log_likelihood[c][counts.index[k]];
  return s;
}

bool NaiveBayesModel::predict(const SparseVector& counts) const {
  const auto s = scores(counts);
  return s[1] > s[0];
}

NaiveBayesModel fit_naive_bayes(const std::vector<SparseVector>& counts, const std::vector<int>& labels,
                                std::size_t n_features, double alpha) {
  if (counts.size() != labels.size()) throw ClassifyError("naive bayes: rows and labels differ in length");
  if (!(alpha > 0)) throw ClassifyError("naive bayes: alpha must be positive");
  if (n_features == 0) throw ClassifyError("naive bayes: empty vocabulary");
  require_two_classes(labels, "naive bayes");
  NaiveBayesModel m;
  m.alpha = alpha;
  std::array<std::vector<double>, 2> tally{std::vector<double>(n_features, 0.0), std::vector<double>(n_features, 0.0)};
  std::array<double, 2> docs{}, totals{};
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const int c = labels[i] ? 1 : 0;
    docs[c] += 1.0;
    for (std::size_t k = 0; k < counts[i].index.size(); ++k) {
      if (counts[i].index[k] >= n_features) throw ClassifyError("naive bayes: feature index out of range");
      tally[c][counts[i].index[k]] += counts[i].value[k];
      totals[c] += counts[i].value[k];
    }
  }
  const double n = docs[0] + docs[1];
  for (std::size_t c = 0; c < 2; ++c) {
    m.log_prior[c] = std::log(docs[c] / n);
    const double denom = totals[c] + alpha * static_cast<double>(n_features);
    m.log_likelihood[c].resize(n_features);
    for (std::size_t t = 0; t < n_features; ++t) m.log_likelihood[c][t] = std::log((tally[c][t] + alpha) / denom);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Logistic regression

double LogisticModel::decision(const SparseVector& x) const {
  double z = intercept;
  for (std::size_t k = 0; k < x.index.size(); ++k)
    if (x.index[k] < weights.size()) z += weights(x.index[k]) * x.value[k];
  return z;
}

double LogisticModel::decision(const Eigen::VectorXd& x) const { return intercept + weights.dot(x); }

LogisticObjective logistic_objective(const Eigen::MatrixXd& x, const std::vector<int>& y, const Eigen::VectorXd& w,
                                     double b, double C) {
  const auto n = static_cast<double>(x.rows());
  const Eigen::VectorXd z = (x * w).array() + b;
  Eigen::VectorXd resid(x.rows());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double yi = y[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    loss += softplus(z(i)) - yi * z(i);
    resid(i) = sigmoid(z(i)) - yi;
  }
  LogisticObjective out;
  out.loss = loss / n + w.squaredNorm() / (2.0 * C * n);
  out.grad_w = x.transpose() * resid / n + w / (C * n);
  out.grad_b = resid.sum() / n;
  return out;
}

LogisticModel fit_logistic(const Eigen::MatrixXd& x, const std::vector<int>& y, double C) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw ClassifyError("logistic: rows and labels differ in length");
  if (!(C > 0)) throw ClassifyError("logistic: C must be positive");
  require_two_classes(y, "logistic regression");
  const Eigen::Index d = x.cols();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  auto eval = [&](const Eigen::VectorXd& t, Eigen::VectorXd* grad) {
    const LogisticObjective o = logistic_objective(x, y, t.head(d), t(d), C);
    if (grad) {
      grad->resize(d + 1);
      grad->head(d) = o.grad_w;
      (*grad)(d) = o.grad_b;
    }
    return o.loss;
  };

  LogisticModel m;
  m.C = C;
  Eigen::VectorXd g;
  double f = eval(theta, &g);
  m.loss_history.push_back(f);
  constexpr std::size_t kMemory = 10;
  std::vector<Eigen::VectorXd> s_hist, y_hist;
  std::vector<double> rho;
  while (m.iterations < 1000 && g.norm() >= 1e-5) {
    Eigen::VectorXd q = g;
    std::vector<double> a(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      a[i] = rho[i] * s_hist[i].dot(q);
      q -= a[i] * y_hist[i];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < s_hist.size(); ++i) q += s_hist[i] * (a[i] - rho[i] * y_hist[i].dot(q));
    Eigen::VectorXd p = -q;
    double slope = g.dot(p);
    if (!(slope < 0)) {
      s_hist.clear(), y_hist.clear(), rho.clear();
      p = -g;
      slope = -g.squaredNorm();
    }
    double step = s_hist.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
    Eigen::VectorXd next, g_next;
    double f_next = f;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      next = theta + step * p;
      f_next = eval(next, &g_next);
      if (f_next <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || !(f_next <= f)) break;
    Eigen::VectorXd s = next - theta, yv = g_next - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12) {
      if (s_hist.size() == kMemory) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho.erase(rho.begin());
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho.push_back(1.0 / sy);
    }
    theta = std::move(next);
    g = std::move(g_next);
    f = f_next;
    m.loss_history.push_back(f);
    ++m.iterations;
  }
  m.weights = theta.head(d);
  m.intercept = theta(d);
  m.gradient_norm = g.norm();
  return m;
}

// ---------------------------------------------------------------------------
// Random forest

namespace {

template <typename Lookup>
bool tree_predict(const DecisionTree& tree, Lookup&& value) {
  std::size_t at = 0;
  while (!tree.nodes[at].is_leaf()) {
    const auto& node = tree.nodes[at];
    at = static_cast<std::size_t>(value(node.feature) <= node.threshold ? node.left : node.right);
  }
  const auto& leaf = tree.nodes[at];
  return leaf.counts[1] > leaf.counts[0];
}

double gini(double neg, double pos) {
  const double n = neg + pos;
  if (n <= 0) return 0.0;
  const double a = neg / n, b = pos / n;
  return 1.0 - a * a - b * b;
}

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const std::vector<int>& y, const ForestParams& params, Rng& rng)
      : x_(x), y_(y), params_(params), rng_(rng), perm_(static_cast<std::size_t>(x.cols())) {
    std::iota(perm_.begin(), perm_.end(), 0);
    mtry_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols())))));
  }

  DecisionTree build(std::vector<std::size_t> samples) {
    tree_.nodes.clear();
    grow(samples, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = std::numeric_limits<double>::infinity();
  };

  int grow(std::vector<std::size_t>& samples, std::size_t depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::array<double, 2> counts{};
    for (auto i : samples) counts[y_[i] ? 1 : 0] += 1.0;
    tree_.nodes[static_cast<std::size_t>(id)].counts = counts;

    const bool pure = counts[0] == 0 || counts[1] == 0;
    const bool depth_cap = params_.max_depth && depth >= *params_.max_depth;
    if (pure || depth_cap || samples.size() < params_.min_samples_split) return id;

    const Split best = find_split(samples, counts);
    if (best.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto i : samples)
      (x_(static_cast<Eigen::Index>(i), best.feature) <= best.threshold ? left : right).push_back(i);
    samples.clear();
    samples.shrink_to_fit();
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  Split find_split(const std::vector<std::size_t>& samples, const std::array<double, 2>& counts) {
    Split best;
    const std::size_t d = perm_.size();
    std::size_t evaluated = 0;
    std::vector<std::pair<double, int>> column(samples.size());
    for (std::size_t k = 0; k < d && evaluated < mtry_; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng_.below(d - k));
      std::swap(perm_[k], perm_[j]);
      const int f = static_cast<int>(perm_[k]);
      for (std::size_t s = 0; s < samples.size(); ++s)
        column[s] = {x_(static_cast<Eigen::Index>(samples[s]), f), y_[samples[s]] ? 1 : 0};
      auto [lo, hi] = std::minmax_element(column.begin(), column.end());
      if (lo->first == hi->first) continue;  // constant here; does not count toward mtry
      ++evaluated;
      std::sort(column.begin(), column.end());
      std::array<double, 2> left{};
      const double n = static_cast<double>(samples.size());
      for (std::size_t s = 0; s + 1 < column.size(); ++s) {
        left[static_cast<std::size_t>(column[s].second)] += 1.0;
        if (column[s].first == column[s + 1].first) continue;
        const double nl = left[0] + left[1], nr = n - nl;
        const double imp = (nl * gini(left[0], left[1]) + nr * gini(counts[0] - left[0], counts[1] - left[1])) / n;
        if (imp < best.impurity) {
          double mid = 0.5 * (column[s].first + column[s + 1].first);
          if (!(mid < column[s + 1].first)) mid = column[s].first;
          best = {f, mid, imp};
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  const std::vector<int>& y_;
  const ForestParams& params_;
  Rng& rng_;
  std::vector<std::size_t> perm_;
  std::size_t mtry_ = 1;
  DecisionTree tree_;
};

}  // namespace

bool DecisionTree::predict(const SparseVector& x) const {
  return tree_predict(*this, [&](int f) { return x.at(static_cast<std::uint32_t>(f)); });
}

bool DecisionTree::predict(const Eigen::VectorXd& x) const {
  return tree_predict(*this, [&](int f) { return f < x.size() ? x(f) : 0.0; });
}

std::size_t DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  std::size_t best = 0;
  while (!stack.empty()) {
    auto [at, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes[at].is_leaf()) {
      stack.push_back({static_cast<std::size_t>(nodes[at].left), d + 1});
      stack.push_back({static_cast<std::size_t>(nodes[at].right), d + 1});
    }
  }
  return best;
}

std::size_t ForestModel::positive_votes(const SparseVector& x) const {
  std::size_t votes = 0;
  for (const auto& t : trees) votes += t.predict(x);
  return votes;
}

bool ForestModel::predict(const SparseVector& x) const { return 2 * positive_votes(x) > trees.size(); }

bool ForestModel::predict(const Eigen::VectorXd& x) const {
  std::size_t votes = 0;
  for (const auto& t : trees) votes += t.predict(x);
  return 2 * votes > trees.size();
}

ForestModel fit_forest(const Eigen::MatrixXd& x, const std::vector<int>& y, const ForestParams& params,
                       std::uint64_t seed) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw ClassifyError("forest: rows and labels differ in length");
  if (params.n_estimators < 1) throw ClassifyError("forest: n_estimators must be positive");
  if (params.min_samples_split < 2) throw ClassifyError("forest: min_samples_split must be >= 2");
  if (x.cols() == 0) throw ClassifyError("forest: no features");
  require_two_classes(y, "random forest");
  ForestModel m;
  m.params = params;
  m.n_features = static_cast<std::size_t>(x.cols());
  const std::size_t n = y.size();
  for (std::size_t t = 0; t < params.n_estimators; ++t) {
    Rng rng(mix_seed(seed, t));
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = static_cast<std::size_t>(rng.below(n));
    std::sort(sample.begin(), sample.end());
    TreeBuilder builder(x, y, m.params, rng);
    m.trees.push_back(builder.build(std::move(sample)));
  }
  return m;
}

// ---------------------------------------------------------------------------

bool TrainedModel::predict(const TokenizedDoc& doc) const {
  switch (kind) {
    case ModelKind::NaiveBayes:
      return nb.predict(tfidf.counts(doc));
    case ModelKind::LogisticRegression:
      return logreg.predict(tfidf.transform(doc));
    case ModelKind::RandomForest:
      return forest.predict(tfidf.transform(doc));
    case ModelKind::Constant:
      return spec.constant_label;
  }
  return false;
}

std::vector<bool> TrainedModel::predict_all(const std::vector<TokenizedDoc>& docs) const {
  std::vector<bool> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(predict(d));
  return out;
}

TrainedModel train_nb(const TrainingData& data, double alpha) {
  TrainedModel m;
  m.kind = m.spec.kind = ModelKind::NaiveBayes;
  m.spec.alpha = alpha;
  m.tfidf = data.tfidf;
  m.nb = fit_naive_bayes(data.counts, data.labels, data.n_features(), alpha);
  return m;
}

TrainedModel train_logreg(const TrainingData& data, double C, std::uint64_t seed) {
  TrainedModel m;
  m.kind = m.spec.kind = ModelKind::LogisticRegression;
  m.spec.C = C;
  m.seed = seed;
  m.tfidf = data.tfidf;
  m.logreg = fit_logistic(densify(data.tfidf_rows, data.n_features()), data.labels, C);
  return m;
}

TrainedModel train_rf(const TrainingData& data, std::size_t n_estimators, std::optional<std::size_t> max_depth,
                      std::size_t min_samples_split, std::uint64_t seed) {
  TrainedModel m;
  m.kind = m.spec.kind = ModelKind::RandomForest;
  m.spec.n_estimators = n_estimators;
  m.spec.max_depth = max_depth;
  m.spec.min_samples_split = min_samples_split;
  m.seed = seed;
  m.tfidf = data.tfidf;
  m.forest = fit_forest(densify(data.tfidf_rows, data.n_features()), data.labels,
                        {n_estimators, max_depth, min_samples_split}, seed);
  return m;
}

TrainedModel train_model(const TrainingData& data, const ModelSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case ModelKind::NaiveBayes:
      return train_nb(data, spec.alpha);
    case ModelKind::LogisticRegression:
      return train_logreg(data, spec.C, seed);
    case ModelKind::RandomForest:
      return train_rf(data, spec.n_estimators, spec.max_depth, spec.min_samples_split, seed);
    case ModelKind::Constant:
      return constant_model(data, spec.constant_label);
  }
  throw ClassifyError("unknown model kind");
}

TrainedModel constant_model(const TrainingData& data, bool label) {
  TrainedModel m;
  m.kind = m.spec.kind = ModelKind::Constant;
  m.spec.constant_label = label;
  m.tfidf = data.tfidf;
  return m;
}

// ---------------------------------------------------------------------------
// Archive

namespace {

constexpr int kArchiveVersion = 1;

nlohmann::json spec_to_json(const ModelSpec& s) {
  nlohmann::json j{{"kind", to_string(s.kind)}};
  switch (s.kind) {
    case ModelKind::NaiveBayes:
      j["alpha"] = s.alpha;
      break;
    case ModelKind::LogisticRegression:
      j["C"] = s.C;
      break;
    case ModelKind::RandomForest:
      j["n_estimators"] = s.n_estimators;
      j["max_depth"] = s.max_depth ? nlohmann::json(*s.max_depth) : nlohmann::json(nullptr);
      j["min_samples_split"] = s.min_samples_split;
      break;
    case ModelKind::Constant:
      j["label"] = s.constant_label;
      break;
  }
  return j;
}

ModelKind kind_from_json(const nlohmann::json& j) {
  const auto name = j.get<std::string>();
  auto kind = parse_enum<ModelKind>(name);
  if (!kind) throw ClassifyError("unknown model kind \"" + name + "\"");
  return *kind;
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.kind = kind_from_json(j.at("kind"));
  switch (s.kind) {
    case ModelKind::NaiveBayes:
      s.alpha = j.at("alpha").get<double>();
      break;
    case ModelKind::LogisticRegression:
      s.C = j.at("C").get<double>();
      break;
    case ModelKind::RandomForest:
      s.n_estimators = j.at("n_estimators").get<std::size_t>();
      if (!j.at("max_depth").is_null()) s.max_depth = j.at("max_depth").get<std::size_t>();
      s.min_samples_split = j.at("min_samples_split").get<std::size_t>();
      break;
    case ModelKind::Constant:
      s.constant_label = j.at("label").get<bool>();
      break;
  }
  return s;
}

}  // namespace

nlohmann::json model_to_json(const TrainedModel& model) {
  nlohmann::json params;
  switch (model.kind) {
    case ModelKind::NaiveBayes:
      params = {{"log_prior", model.nb.log_prior},
                {"log_likelihood", {model.nb.log_likelihood[0], model.nb.log_likelihood[1]}}};
      break;
    case ModelKind::LogisticRegression:
      params = {{"weights", std::vector<double>(model.logreg.weights.data(),
                                                model.logreg.weights.data() + model.logreg.weights.size())},
                {"intercept", model.logreg.intercept},
                {"iterations", model.logreg.iterations},
                {"gradient_norm", model.logreg.gradient_norm}};
      break;
    case ModelKind::RandomForest: {
      nlohmann::json trees = nlohmann::json::array();
      for (const auto& t : model.forest.trees) {
        std::vector<int> feature, left, right;
        std::vector<double> threshold, neg, pos;
        for (const auto& n : t.nodes) {
          feature.push_back(n.feature);
          threshold.push_back(n.threshold);
          left.push_back(n.left);
          right.push_back(n.right);
          neg.push_back(n.counts[0]);
          pos.push_back(n.counts[1]);
        }
        trees.push_back({{"feature", feature},
                         {"threshold", threshold},
                         {"left", left},
                         {"right", right},
                         {"neg", neg},
                         {"pos", pos}});
      }
      params = {{"n_features", model.forest.n_features}, {"trees", trees}};
      break;
    }
    case ModelKind::Constant:
      params = nlohmann::json::object();
      break;
  }
  nlohmann::json j;
  j["format"] = "isolex-model";
  j["version"] = kArchiveVersion;
  j["kind"] = to_string(model.kind);
  j["hyperparams"] = spec_to_json(model.spec);
  j["seed"] = model.seed;
  j["vocabulary"] = topic::tfidf_to_json(model.tfidf);
  j["parameters"] = params;
  return j;
}

TrainedModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "isolex-model") throw ClassifyError("not a model archive");
  if (j.at("version").get<int>() != kArchiveVersion)
    throw ClassifyError("unsupported model archive version " + j.at("version").dump());
  TrainedModel m;
  m.kind = kind_from_json(j.at("kind"));
  m.spec = spec_from_json(j.at("hyperparams"));
  if (m.spec.kind != m.kind) throw ClassifyError("model archive kind does not match its hyperparams");
  m.seed = j.at("seed").get<std::uint64_t>();
  m.tfidf = topic::tfidf_from_json(j.at("vocabulary"));
  const auto& p = j.at("parameters");
  const std::size_t d = m.tfidf.terms.size();
  switch (m.kind) {
    case ModelKind::NaiveBayes: {
      m.nb.alpha = m.spec.alpha;
      m.nb.log_prior = p.at("log_prior").get<std::array<double, 2>>();
      const auto& ll = p.at("log_likelihood");
      for (std::size_t c = 0; c < 2; ++c) m.nb.log_likelihood[c] = ll.at(c).get<std::vector<double>>();
      if (m.nb.log_likelihood[0].size() != d || m.nb.log_likelihood[1].size() != d)
        throw ClassifyError("naive bayes archive: likelihood length differs from vocabulary");
      break;
    }
    case ModelKind::LogisticRegression: {
      const auto w = p.at("weights").get<std::vector<double>>();
      if (w.size() != d) throw ClassifyError("logistic archive: weight length differs from vocabulary");
      m.logreg.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
      m.logreg.intercept = p.at("intercept").get<double>();
      m.logreg.iterations = p.at("iterations").get<std::size_t>();
      m.logreg.gradient_norm = p.at("gradient_norm").get<double>();
      m.logreg.C = m.spec.C;
      break;
    }
    case ModelKind::RandomForest: {
      m.forest.params = {m.spec.n_estimators, m.spec.max_depth, m.spec.min_samples_split};
      m.forest.n_features = p.at("n_features").get<std::size_t>();
      for (const auto& tj : p.at("trees")) {
        const auto feature = tj.at("feature").get<std::vector<int>>();
        const auto threshold = tj.at("threshold").get<std::vector<double>>();
        const auto left = tj.at("left").get<std::vector<int>>();
        const auto right = tj.at("right").get<std::vector<int>>();
        const auto neg = tj.at("neg").get<std::vector<double>>();
        const auto pos = tj.at("pos").get<std::vector<double>>();
        const std::size_t n = feature.size();
        if (threshold.size() != n || left.size() != n || right.size() != n || neg.size() != n || pos.size() != n || n == 0)
          throw ClassifyError("forest archive: inconsistent node arrays");
        DecisionTree t;
        for (std::size_t i = 0; i < n; ++i) {
          TreeNode node{feature[i], threshold[i], left[i], right[i], {neg[i], pos[i]}};
          if (!node.is_leaf() && (node.left <= 0 || node.right <= 0 || static_cast<std::size_t>(node.left) >= n ||
                                  static_cast<std::size_t>(node.right) >= n))
            throw ClassifyError("forest archive: child index out of range");
          t.nodes.push_back(node);
        }
        m.forest.trees.push_back(std::move(t));
      }
      break;
    }
    case ModelKind::Constant:
      break;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Metrics

Confusion confusion(const std::vector<bool>& predictions, const std::vector<bool>& labels) {
  if (predictions.size() != labels.size()) throw ClassifyError("predictions and labels differ in length");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) {
      ++(predictions[i] ? c.tp : c.fn);
    } else {
      ++(predictions[i] ? c.fp : c.tn);
    }
  }
  return c;
}

double Metrics::value(MetricId id) const { return values()[static_cast<std::size_t>(id)]; }

std::array<double, kMetricCount> Metrics::values() const {
  return {accuracy, precision_pos, recall_pos, f1_pos, macro_precision, macro_recall, macro_f1};
}

std::array<std::optional<double>, kMetricCount> metric_values(const Confusion& c, UndefinedPolicy policy) {
  using Opt = std::optional<double>;
  const bool zero = policy == UndefinedPolicy::Zero;
  auto ratio = [&](double num, double den) -> Opt {
    if (den > 0) return num / den;
    return zero ? Opt(0.0) : std::nullopt;
  };
  auto f1 = [](Opt p, Opt r) -> Opt {
    if (!p || !r) return std::nullopt;
    return (*p + *r) > 0 ? 2.0 * *p * *r / (*p + *r) : 0.0;
  };
  auto mean = [](Opt a, Opt b) -> Opt {
    if (!a || !b) return std::nullopt;
    return 0.5 * (*a + *b);
  };
  const auto tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn),
             tn = static_cast<double>(c.tn);
  const Opt p_pos = ratio(tp, tp + fp), r_pos = ratio(tp, tp + fn);
  const Opt p_neg = ratio(tn, tn + fn), r_neg = ratio(tn, tn + fp);
  const Opt f_pos = f1(p_pos, r_pos), f_neg = f1(p_neg, r_neg);
  return {ratio(tp + tn, static_cast<double>(c.n())), p_pos, r_pos, f_pos, mean(p_neg, p_pos), mean(r_neg, r_pos),
          mean(f_neg, f_pos)};
}

Metrics metrics_from_confusion(const Confusion& c) {
  const auto v = metric_values(c, UndefinedPolicy::Zero);
  Metrics m;
  m.accuracy = *v[0];
  m.precision_pos = *v[1];
  m.recall_pos = *v[2];
  m.f1_pos = *v[3];
  m.macro_precision = *v[4];
  m.macro_recall = *v[5];
  m.macro_f1 = *v[6];
  m.n = c.n();
  return m;
}

Metrics evaluate_predictions(const std::vector<bool>& predictions, const std::vector<bool>& labels) {
  if (labels.empty()) throw ClassifyError("evaluate needs a non-empty test set");
  return metrics_from_confusion(confusion(predictions, labels));
}

Metrics evaluate(const TrainedModel& model, const std::vector<LabeledDoc>& test) {
  std::vector<bool> preds, labels;
  for (const auto& ex : test) {
    preds.push_back(model.predict(ex.doc));
    labels.push_back(ex.label);
  }
  return evaluate_predictions(preds, labels);
}

double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ClassifyError("percentile of an empty sample");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

Metrics bootstrap_ci(const std::vector<bool>& predictions, const std::vector<bool>& labels,
                     const BootstrapOptions& options) {
  if (predictions.size() != labels.size()) throw ClassifyError("bootstrap: predictions and labels differ in length");
  const std::size_t n = labels.size();
  if (n < 5) throw ClassifyError("bootstrap needs at least 5 pairs, got " + std::to_string(n));
  if (!(options.fraction > 0.0 && options.fraction <= 1.0)) throw ClassifyError("bootstrap fraction must lie in (0, 1]");
  if (options.iterations < 1) throw ClassifyError("bootstrap needs at least one iteration");

  std::vector<std::pair<bool, bool>> pairs(n);
  for (std::size_t i = 0; i < n; ++i) pairs[i] = {labels[i], predictions[i]};
  std::sort(pairs.begin(), pairs.end());

  const auto m = std::max<std::size_t>(
      1, std::min(n, static_cast<std::size_t>(std::ceil(options.fraction * static_cast<double>(n) - 1e-9))));
  std::array<std::vector<double>, kMetricCount> samples;
  for (auto& s : samples) s.reserve(options.iterations);
  std::vector<std::size_t> idx(n);
  for (std::size_t it = 0; it < options.iterations; ++it) {
    Rng rng(options.seed + it);
    std::iota(idx.begin(), idx.end(), 0);
    Confusion c;
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng.below(n - k));
      std::swap(idx[k], idx[j]);
      const auto& [label, pred] = pairs[idx[k]];
      if (label) {
        ++(pred ? c.tp : c.fn);
      } else {
        ++(pred ? c.fp : c.tn);
      }
    }
    const auto v = metric_values(c, options.policy);
    for (std::size_t k = 0; k < kMetricCount; ++k)
      if (v[k]) samples[k].push_back(*v[k]);
  }

  Metrics out = evaluate_predictions(predictions, labels);
  static constexpr std::array<std::string_view, kMetricCount> names{
      "accuracy", "precision_pos", "recall_pos", "f1_pos", "macro_precision", "macro_recall", "macro_f1"};
  for (std::size_t k = 0; k < kMetricCount; ++k) {
    out.excluded[k] = options.iterations - samples[k].size();
    if (samples[k].empty())
      throw ClassifyError("bootstrap: " + std::string(names[k]) + " is undefined in every iteration");
    std::sort(samples[k].begin(), samples[k].end());
    out.ci[k] = Interval{percentile(samples[k], 0.025), percentile(samples[k], 0.975)};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Selection

std::size_t select_best(const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw ClassifyError("select_best needs at least one candidate");
  auto key = [](const Candidate& c) {
    return std::make_tuple(c.metrics.macro_f1, c.metrics.recall_pos, c.metrics.accuracy);
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& a = candidates[i];
    const auto& b = candidates[best];
    if (key(a) > key(b)) {
      best = i;
    } else if (key(a) == key(b)) {
      const auto ka = enum_index(a.spec.kind), kb = enum_index(b.spec.kind);
      if (ka < kb || (ka == kb && a.grid_index < b.grid_index)) best = i;
    }
  }
  return best;
}

TopicTrainingResult train_topic(TopicId topic, const std::vector<LabeledDoc>& examples, const HyperGrid& grid,
                                const TrainOptions& options) {
  grid.validate();
  if (examples.empty()) throw ClassifyError(std::string(to_string(topic)) + ": no labeled examples");
  TopicTrainingResult r;
  r.topic = topic;
  r.n_examples = examples.size();
  for (const auto& ex : examples) r.n_positive += ex.label;

  std::vector<bool> all_labels;
  for (const auto& ex : examples) all_labels.push_back(ex.label);

  if (r.n_positive == 0 || r.n_positive == r.n_examples) {
    const bool label = r.n_positive != 0;
    r.fallback = true;
    r.note = std::string("annotation sample is single-class; constant ") + (label ? "positive" : "negative") +
             " model used";
    r.n_train = r.n_examples;
    r.best_model = constant_model(TrainingData::build(examples), label);
    KindReport k;
    k.kind = ModelKind::Constant;
    const std::vector<bool> preds(examples.size(), label);
    k.test_metrics = evaluate_predictions(preds, all_labels);
    k.bootstrap = examples.size() >= 5 ? bootstrap_ci(preds, all_labels, options.bootstrap) : k.test_metrics;
    r.leaderboard.push_back({r.best_model.spec, k.test_metrics, 0});
    r.kinds.push_back(k);
    return r;
  }

  const DataSplit parts = split(examples, options.train_fraction, options.split_seed);
  r.n_train = parts.train.size();
  r.n_test = parts.test.size();
  const TrainingData data = TrainingData::build(parts.train);
  std::vector<bool> test_labels;
  for (const auto& ex : parts.test) test_labels.push_back(ex.label);

  const auto specs = grid.expand();
  std::vector<std::optional<TrainedModel>> models(specs.size());
  r.leaderboard.resize(specs.size());
  parallel_for(specs.size(), options.workers, [&](std::size_t i) {
    models[i] = train_model(data, specs[i], options.model_seed);
    std::vector<bool> preds;
    for (const auto& ex : parts.test) preds.push_back(models[i]->predict(ex.doc));
    r.leaderboard[i] = {specs[i], evaluate_predictions(preds, test_labels), i};
  });

  std::vector<Candidate> winners;
  for (ModelKind kind : {ModelKind::NaiveBayes, ModelKind::LogisticRegression, ModelKind::RandomForest}) {
    std::vector<Candidate> of_kind;
    for (const auto& c : r.leaderboard)
      if (c.spec.kind == kind) of_kind.push_back(c);
    if (of_kind.empty()) continue;
    const Candidate& win = of_kind[select_best(of_kind)];
    KindReport k;
    k.kind = kind;
    k.candidate_index = win.grid_index;
    k.test_metrics = win.metrics;
    const TrainedModel& model = *models[win.grid_index];
    std::vector<bool> preds, labels;
    const auto& population = options.scope == BootstrapScope::AllSamples ? examples : parts.test;
    for (const auto& ex : population) {
      preds.push_back(model.predict(ex.doc));
      labels.push_back(ex.label);
    }
    k.bootstrap = population.size() >= 5 ? bootstrap_ci(preds, labels, options.bootstrap)
                                         : evaluate_predictions(preds, labels);
    r.kinds.push_back(k);
    winners.push_back(win);
  }
  r.best_candidate = winners[select_best(winners)].grid_index;
  r.best_model = std::move(*models[r.best_candidate]);
  return r;
}

std::string metrics_csv_header() {
  std::string h = "topic,model";
  for (std::string_view name :
       {"accuracy", "precision_pos", "recall_pos", "f1_pos", "macro_precision", "macro_recall", "macro_f1"}) {
    h += ",";
    h += name;
    h += ",";
    h += name;
    h += "_lo,";
    h += name;
    h += "_hi";
  }
  return h;
}

std::string metrics_csv_row(TopicId topic, ModelKind kind, const Metrics& m) {
  std::string row = std::string(to_string(topic)) + "," + std::string(to_string(kind));
  const auto v = m.values();
  for (std::size_t k = 0; k < kMetricCount; ++k) {
    row += "," + format_fixed(v[k], 4);
    if (m.ci[k]) {
      row += "," + format_fixed(m.ci[k]->low, 4) + "," + format_fixed(m.ci[k]->high, 4);
    } else {
      row += ",NA,NA";
    }
  }
  return row;
}

std::string leaderboard_csv(TopicId topic, const std::vector<Candidate>& candidates) {
  std::ostringstream out;
  out << "topic,grid_index,model,hyperparams,accuracy,precision_pos,recall_pos,f1_pos,macro_precision,macro_recall,"
         "macro_f1\n";
  for (const auto& c : candidates) {
    out << to_string(topic) << ',' << c.grid_index << ',' << to_string(c.spec.kind) << ','
        << csv::escape(c.spec.describe());
    for (double v : c.metrics.values()) out << ',' << format_fixed(v, 4);
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

double PredictionSet::fraction_positive() const {
  return decedent_ids.empty() ? 0.0 : static_cast<double>(positive_count) / static_cast<double>(decedent_ids.size());
}

PredictionSet predict_matched(const TrainedModel& model, const MatchSet& matches, const Corpus& corpus,
                              TopicId topic) {
  if (matches.decedent_ids.size() != corpus.size())
    throw ClassifyError("match set covers " + std::to_string(matches.decedent_ids.size()) +
                        " decedents but the corpus has " + std::to_string(corpus.size()));
  PredictionSet out;
  out.topic = topic;
  auto it = matches.flagged.find(topic);
  if (it == matches.flagged.end()) return out;
  for (std::size_t pos : it->second) {
    const auto& rec = corpus.at(pos);
    if (rec.id != matches.decedent_ids[pos]) throw ClassifyError("match set does not belong to this corpus");
    const bool p = model.predict(topic::tokenize(narrative_text(rec), rec.id));
    out.decedent_ids.push_back(rec.id);
    out.predictions.push_back(p);
    out.positive_count += p;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Labels

bool is_rfc3339(std::string_view timestamp) {
  static const std::regex re(
      R"(^\d{4}-(0[1-9]|1[0-2])-(0[1-9]|[12]\d|3[01])[Tt ]([01]\d|2[0-3]):[0-5]\d:([0-5]\d|60)(\.\d+)?([Zz]|[+-]([01]\d|2[0-3]):[0-5]\d)$)");
  return std::regex_match(timestamp.begin(), timestamp.end(), re);
}

std::vector<LabelRow> parse_labels_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw ClassifyError("labels CSV is empty");
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  if (header != kLabelsHeader) throw ClassifyError("labels CSV header must be \"" + std::string(kLabelsHeader) + "\"");
  std::vector<LabelRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "labels CSV row " + std::to_string(r + 1) + ": ";
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != 5) throw ClassifyError(where + "expected 5 fields, got " + std::to_string(row.size()));
    LabelRow l;
    l.decedent_id = row[0];
    if (l.decedent_id.empty()) throw ClassifyError(where + "empty decedent_id");
    auto topic = parse_enum<TopicId>(row[1]);
    if (!topic) throw ClassifyError(where + "unknown topic \"" + row[1] + "\"");
    l.topic = *topic;
    l.annotator_id = row[2];
    if (l.annotator_id.empty()) throw ClassifyError(where + "empty annotator_id");
    if (row[3] != "0" && row[3] != "1") throw ClassifyError(where + "relevant must be 0 or 1, got \"" + row[3] + "\"");
    l.relevant = row[3] == "1";
    l.timestamp = row[4];
    if (!is_rfc3339(l.timestamp)) throw ClassifyError(where + "timestamp \"" + l.timestamp + "\" is not RFC 3339");
    out.push_back(std::move(l));
  }
  return out;
}

std::string labels_csv_row(const LabelRow& row) {
  std::ostringstream out;
  csv::write_row(out, {row.decedent_id, std::string(to_string(row.topic)), row.annotator_id, row.relevant ? "1" : "0",
                       row.timestamp});
  return out.str();
}

std::string labels_csv(const std::vector<LabelRow>& rows) {
  std::string out = std::string(kLabelsHeader) + "\n";
  for (const auto& r : rows) out += labels_csv_row(r);
  return out;
}

std::vector<LabelRow> latest_labels(const std::vector<LabelRow>& rows) {
  std::map<std::tuple<std::string, TopicId, std::string>, std::size_t> last;
  for (std::size_t i = 0; i < rows.size(); ++i) last[{rows[i].decedent_id, rows[i].topic, rows[i].annotator_id}] = i;
  std::vector<std::size_t> keep;
  for (const auto& [key, i] : last) keep.push_back(i);
  std::sort(keep.begin(), keep.end());
  std::vector<LabelRow> out;
  for (auto i : keep) out.push_back(rows[i]);
  return out;
}

std::vector<ConsensusLabel> consensus_labels(const std::vector<LabelRow>& rows) {
  struct Acc {
    std::size_t first_seen = 0;
    std::set<bool> votes;
    std::size_t annotators = 0;
    std::optional<bool> adjudicated;
  };
  std::map<std::pair<TopicId, std::string>, Acc> items;
  const auto latest = latest_labels(rows);
  for (std::size_t i = 0; i < latest.size(); ++i) {
    const auto& r = latest[i];
    auto [it, inserted] = items.try_emplace({r.topic, r.decedent_id});
    if (inserted) it->second.first_seen = i;
    if (r.annotator_id == kAdjudicatedAnnotator) {
      it->second.adjudicated = r.relevant;
    } else {
      it->second.votes.insert(r.relevant);
      ++it->second.annotators;
    }
  }
  std::vector<std::pair<std::size_t, ConsensusLabel>> ordered;
  std::vector<std::string> unresolved;
  for (const auto& [key, acc] : items) {
    ConsensusLabel c;
    c.topic = key.first;
    c.decedent_id = key.second;
    c.n_annotators = acc.annotators;
    if (acc.adjudicated) {
      c.relevant = *acc.adjudicated;
      c.adjudicated = true;
    } else if (acc.votes.size() == 1) {
      c.relevant = *acc.votes.begin();
    } else {
      unresolved.push_back(std::string(to_string(key.first)) + "/" + key.second);
      continue;
    }
    ordered.emplace_back(acc.first_seen, std::move(c));
  }
  if (!unresolved.empty()) {
    std::string msg = std::to_string(unresolved.size()) + " item(s) have disagreeing annotators and no " +
                      std::string(kAdjudicatedAnnotator) + " row:";
    for (std::size_t i = 0; i < unresolved.size() && i < 10; ++i) msg += " " + unresolved[i];
    if (unresolved.size() > 10) msg += " ...";
    throw ClassifyError(msg);
  }
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<ConsensusLabel> out;
  for (auto& [_, c] : ordered) out.push_back(std::move(c));
  return out;
}

}  // namespace isolex::classify
