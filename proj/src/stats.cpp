#include "isolex/stats.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "isolex/util.hpp"

namespace isolex::stats {

namespace {

double two_sided_normal_p(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZ975 = 1.959963984540054;

}  // namespace

AgreementResult cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.size() != b.size())
    throw StatsError("kappa: label sequences differ in length (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  if (a.empty()) throw StatsError("kappa: no items");
  const auto n = static_cast<double>(a.size());
  double table[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < a.size(); ++i) table[a[i]][b[i]] += 1.0;
  const double row[2] = {(table[0][0] + table[0][1]) / n, (table[1][0] + table[1][1]) / n};
  const double col[2] = {(table[0][0] + table[1][0]) / n, (table[0][1] + table[1][1]) / n};

  AgreementResult r;
  r.n_items = a.size();
  r.p_observed = (table[0][0] + table[1][1]) / n;
  r.percent_agreement = r.p_observed;
  r.p_expected = row[0] * col[0] + row[1] * col[1];
  if (r.p_expected >= 1.0) return r;
  const double pe = r.p_expected;
  r.kappa = (r.p_observed - pe) / (1.0 - pe);
  double cross = 0.0;
  for (int k = 0; k < 2; ++k) cross += row[k] * col[k] * (row[k] + col[k]);
  const double var0 = (pe + pe * pe - cross) / (n * (1.0 - pe) * (1.0 - pe));
  if (var0 > 0.0) r.p_value = two_sided_normal_p(*r.kappa / std::sqrt(var0));
  return r;
}

double bonferroni(double alpha, int m) {
  if (m < 1) throw StatsError("bonferroni: m must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw StatsError("bonferroni: alpha must lie in (0, 1)");
  return alpha / m;
}

Tier tier_for(std::optional<double> p, double threshold) {
  if (!p || std::isnan(*p)) return Tier::NotSignificant;
  if (*p < 1e-4) return Tier::Strong;
  if (*p < threshold) return Tier::Bonferroni;
  return Tier::NotSignificant;
}

// ---------------------------------------------------------------------------

LogitFit fit_logit(const Eigen::MatrixXd& x, const std::vector<int>& y) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw StatsError("logit: rows and outcomes differ in length");
  if (x.rows() == 0 || x.cols() == 0) throw StatsError("logit: empty design");
  Eigen::VectorXd yv(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) yv(i) = y[static_cast<std::size_t>(i)] ? 1.0 : 0.0;

  LogitFit fit;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  Eigen::MatrixXd info(x.cols(), x.cols());
  auto information = [&](const Eigen::VectorXd& p) {
    const Eigen::VectorXd w = (p.array() * (1.0 - p.array())).matrix();
    return Eigen::MatrixXd(x.transpose() * w.asDiagonal() * x);
  };
  auto probs = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd eta = x * b;
    return Eigen::VectorXd(eta.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); }));
  };
  for (;;) {
    const Eigen::VectorXd p = probs(beta);
    const Eigen::VectorXd grad = x.transpose() * (yv - p);
    fit.gradient_norm = grad.norm();
    if (fit.gradient_norm < 1e-8) {
      fit.converged = true;
      break;
    }
    if (fit.iterations >= 50) break;
    info = information(p);
    const Eigen::VectorXd step = info.ldlt().solve(grad);
    if (!step.allFinite()) {
      fit.diverged = true;
      break;
    }
    beta += step;
    ++fit.iterations;
    if (beta.cwiseAbs().maxCoeff() > 30.0) {
      fit.diverged = true;
      break;
    }
  }
  if (beta.size() && beta.cwiseAbs().maxCoeff() > 30.0) fit.diverged = true;
  info = information(probs(beta));
  const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
  fit.coefficients = beta;
  fit.standard_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return fit;
}

namespace {

void finish_from_fit(OddsResult& r, double coef, double se, bool diverged, double threshold) {
  r.coefficient = coef;
  r.standard_error = se;
  r.odds_ratio = std::exp(coef);
  r.ci_low = std::exp(coef - kZ975 * se);
  r.ci_high = std::exp(coef + kZ975 * se);
  r.separation = diverged;
  if (diverged || !(se > 0.0) || !std::isfinite(se)) {
    r.p_value = std::nullopt;
    r.tier = Tier::NotSignificant;
  } else {
    r.p_value = two_sided_normal_p(coef / se);
    r.tier = tier_for(r.p_value, threshold);
  }
}

}  // namespace

std::vector<OddsResult> bivariate_logit(TopicId topic, const std::vector<bool>& outcome,
                                        const CategoricalPredictor& predictor, double threshold) {
  if (outcome.size() != predictor.values.size())
    throw StatsError("bivariate_logit(" + predictor.name + "): outcome and predictor differ in length");

  struct Tally {
    std::size_t events = 0, total = 0;
  };
  std::map<std::string, Tally> tally;
  std::size_t used = 0, events = 0;
  for (std::size_t i = 0; i < outcome.size(); ++i) {
    if (!predictor.values[i]) continue;
    auto& t = tally[*predictor.values[i]];
    ++t.total;
    t.events += outcome[i];
    ++used;
    events += outcome[i];
  }
  for (const auto& [level, t] : tally)
    if (level != predictor.reference &&
        std::find(predictor.levels.begin(), predictor.levels.end(), level) == predictor.levels.end())
      throw StatsError("bivariate_logit(" + predictor.name + "): undeclared level \"" + level + "\"");
  if (events == 0 || events == used)
    throw StatsError("bivariate_logit(" + predictor.name + "): outcome has a single value among " +
                     std::to_string(used) + " analysed records");

  auto base = [&](const std::string& level) {
    OddsResult r;
    r.topic = topic;
    r.predictor = predictor.name;
    r.level = level;
    r.reference = predictor.reference;
    r.n_used = used;
    return r;
  };
  const Tally ref = tally.count(predictor.reference) ? tally.at(predictor.reference) : Tally{};

  // Levels fitted by the regression; degenerate ones are reported directly.
  std::vector<std::string> fitted;
  std::map<std::string, OddsResult> direct;
  for (const auto& level : predictor.levels) {
    const Tally t = tally.count(level) ? tally.at(level) : Tally{};
    OddsResult r = base(level);
    if (t.total == 0 || ref.total == 0) {
      r.odds_ratio = r.ci_low = r.ci_high = kNaN;
      direct.emplace(level, r);
    } else if (t.events == 0) {
      r.odds_ratio = r.ci_low = r.ci_high = 0.0;
      r.separation = true;
      direct.emplace(level, r);
    } else if (t.events == t.total) {
      r.odds_ratio = r.ci_low = r.ci_high = kInf;
      r.separation = true;
      direct.emplace(level, r);
    } else {
      fitted.push_back(level);
    }
  }

  std::map<std::string, OddsResult> from_fit;
  if (!fitted.empty()) {
    std::map<std::string, Eigen::Index> column;
    for (std::size_t k = 0; k < fitted.size(); ++k) column[fitted[k]] = static_cast<Eigen::Index>(k + 1);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < outcome.size(); ++i) {
      if (!predictor.values[i]) continue;
      const auto& v = *predictor.values[i];
      if (v == predictor.reference || column.count(v)) rows.push_back(i);
    }
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                              static_cast<Eigen::Index>(fitted.size() + 1));
    std::vector<int> y(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto i = rows[r];
      x(static_cast<Eigen::Index>(r), 0) = 1.0;
      if (auto it = column.find(*predictor.values[i]); it != column.end()) x(static_cast<Eigen::Index>(r), it->second) = 1.0;
      y[r] = outcome[i] ? 1 : 0;
    }
    const LogitFit fit = fit_logit(x, y);
    for (const auto& [level, col] : column) {
      OddsResult r = base(level);
      const bool diverged =
          fit.diverged && (std::fabs(fit.coefficients(col)) > 30.0 || std::fabs(fit.coefficients(0)) > 30.0);
      finish_from_fit(r, fit.coefficients(col), fit.standard_errors(col), diverged, threshold);
      from_fit.emplace(level, r);
    }
  }

  std::vector<OddsResult> out;
  for (const auto& level : predictor.levels) {
    if (auto it = direct.find(level); it != direct.end()) {
      out.push_back(it->second);
    } else {
      out.push_back(from_fit.at(level));
    }
  }
  return out;
}

OddsResult bivariate_logit_continuous(TopicId topic, const std::vector<bool>& outcome, const std::string& name,
                                      const std::vector<std::optional<double>>& values, double threshold) {
  if (outcome.size() != values.size())
    throw StatsError("bivariate_logit(" + name + "): outcome and predictor differ in length");
  std::vector<std::size_t> rows;
  std::size_t events = 0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i]) {
      rows.push_back(i);
      events += outcome[i];
    }
  if (events == 0 || events == rows.size())
    throw StatsError("bivariate_logit(" + name + "): outcome has a single value among " + std::to_string(rows.size()) +
                     " analysed records");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), 2);
  std::vector<int> y(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    x(static_cast<Eigen::Index>(r), 0) = 1.0;
    x(static_cast<Eigen::Index>(r), 1) = *values[rows[r]];
    y[r] = outcome[rows[r]] ? 1 : 0;
  }
  OddsResult r;
  r.topic = topic;
  r.predictor = name;
  r.level = "PER_UNIT";
  r.n_used = rows.size();
  const Eigen::VectorXd col = x.col(1);
  if (col.maxCoeff() == col.minCoeff()) {
    r.odds_ratio = r.ci_low = r.ci_high = kNaN;
    return r;
  }
  const LogitFit fit = fit_logit(x, y);
  finish_from_fit(r, fit.coefficients(1), fit.standard_errors(1), fit.diverged, threshold);
  return r;
}

namespace {

template <typename E>
CategoricalPredictor make_predictor(const Corpus& corpus, std::string name, E reference,
                                    std::initializer_list<E> excluded, E DecedentRecord::*field) {
  CategoricalPredictor p;
  p.name = std::move(name);
  p.reference = std::string(to_string(reference));
  for (E v : all_values<E>()) {
    if (v == reference || std::find(excluded.begin(), excluded.end(), v) != excluded.end()) continue;
    p.levels.emplace_back(to_string(v));
  }
  p.values.reserve(corpus.size());
  for (const auto& rec : corpus) {
    const E v = rec.*field;
    if (std::find(excluded.begin(), excluded.end(), v) != excluded.end()) {
      p.values.emplace_back(std::nullopt);
    } else {
      p.values.emplace_back(std::string(to_string(v)));
    }
  }
  return p;
}

}  // namespace

std::vector<CategoricalPredictor> standard_predictors(const Corpus& corpus) {
  std::vector<CategoricalPredictor> out;
  out.push_back(make_predictor(corpus, "sex", Sex::Female, {Sex::Unknown}, &DecedentRecord::sex));
  out.push_back(make_predictor(corpus, "race_ethnicity", RaceEthnicity::White, {RaceEthnicity::Unknown},
                               &DecedentRecord::race_ethnicity));
  out.push_back(make_predictor(corpus, "sexual_orientation", SexualOrientation::Heterosexual,
                               {SexualOrientation::NotReported}, &DecedentRecord::sexual_orientation));
  out.push_back(make_predictor(corpus, "transgender", Transgender::NoOrUnknown, {}, &DecedentRecord::transgender));
  out.push_back(make_predictor(corpus, "marital_status", MaritalStatus::Married, {MaritalStatus::Unknown},
                               &DecedentRecord::marital_status));
  out.push_back(make_predictor(corpus, "relationship_status", RelationshipStatus::InRelationship,
                               {RelationshipStatus::Unknown}, &DecedentRecord::relationship_status));
  out.push_back(make_predictor(corpus, "homeless", Homeless::No, {Homeless::Unknown}, &DecedentRecord::homeless));
  out.push_back(make_predictor(corpus, "physical_health_problem", PhysicalHealth::NoOrUnknown, {},
                               &DecedentRecord::physical_health_problem));
  return out;
}

std::vector<OddsResult> odds_table(TopicId topic, const std::vector<bool>& outcome, const Corpus& corpus,
                                   double threshold) {
  if (outcome.size() != corpus.size()) throw StatsError("odds_table: outcome and corpus differ in length");
  std::vector<OddsResult> out;
  for (const auto& p : standard_predictors(corpus)) {
    auto rows = bivariate_logit(topic, outcome, p, threshold);
    out.insert(out.end(), rows.begin(), rows.end());
  }
  std::vector<std::optional<double>> substances;
  substances.reserve(corpus.size());
  for (const auto& rec : corpus)
    substances.push_back(rec.num_substances ? std::optional<double>(*rec.num_substances) : std::nullopt);
  out.push_back(bivariate_logit_continuous(topic, outcome, "num_substances", substances, threshold));
  return out;
}

std::string odds_csv_header() {
  return "topic,predictor,level,reference,odds_ratio,ci_low,ci_high,p_value,tier,n_used,separation_flag";
}

std::string odds_csv_row(const OddsResult& r) {
  std::ostringstream out;
  out << to_string(r.topic) << ',' << r.predictor << ',' << r.level << ',' << r.reference << ','
      << format_fixed(r.odds_ratio, 4) << ',' << format_fixed(r.ci_low, 4) << ',' << format_fixed(r.ci_high, 4) << ','
      << format_p(r.p_value) << ',' << to_string(r.tier) << ',' << r.n_used << ',' << (r.separation ? 1 : 0);
  return out.str();
}

// ---------------------------------------------------------------------------

AgeDifference age_difference(const std::vector<bool>& flags, const std::vector<std::optional<int>>& ages) {
  if (flags.size() != ages.size()) throw StatsError("age_difference: flags and ages differ in length");
  std::vector<double> g1, g0;
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (ages[i]) (flags[i] ? g1 : g0).push_back(static_cast<double>(*ages[i]));
  if (g1.size() < 2 || g0.size() < 2)
    throw StatsError("age_difference: each group needs at least 2 aged records (flagged " + std::to_string(g1.size()) +
                     ", unflagged " + std::to_string(g0.size()) + ")");
  auto moments = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double a : v) mean += a;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double a : v) ss += (a - mean) * (a - mean);
    return std::pair{mean, ss / static_cast<double>(v.size() - 1)};
  };
  const auto [m1, v1] = moments(g1);
  const auto [m0, v0] = moments(g0);
  const double n1 = static_cast<double>(g1.size()), n0 = static_cast<double>(g0.size());

  AgeDifference r;
  r.n_flagged = g1.size();
  r.n_unflagged = g0.size();
  r.difference = m1 - m0;
  const double a = v1 / n1, b = v0 / n0;
  const double se = std::sqrt(a + b);
  if (!(se > 0.0)) {
    r.zero_variance = true;
    r.ci_low = r.ci_high = r.difference;
    return r;
  }
  r.degrees_of_freedom = (a + b) * (a + b) / (a * a / (n1 - 1.0) + b * b / (n0 - 1.0));
  r.t_statistic = r.difference / se;
  const boost::math::students_t dist(r.degrees_of_freedom);
  const double crit = boost::math::quantile(boost::math::complement(dist, 0.025));
  r.ci_low = r.difference - crit * se;
  r.ci_high = r.difference + crit * se;
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t_statistic)));
  return r;
}

AgeDifference age_difference(const std::vector<bool>& flags, const Corpus& corpus) {
  std::vector<std::optional<int>> ages;
  ages.reserve(corpus.size());
  for (const auto& rec : corpus) ages.push_back(rec.age);
  return age_difference(flags, ages);
}

double rate_per_1000(std::size_t count, std::size_t total) {
  if (total == 0) throw StatsError("rate_per_1000: zero total");
  if (count > total) throw StatsError("rate_per_1000: count exceeds total");
  return 1000.0 * static_cast<double>(count) / static_cast<double>(total);
}

std::string format_rate(double rate) { return format_fixed(rate, 3); }

RateSeries yearly_trend(TopicId topic, const std::vector<bool>& flags, const Corpus& corpus, YearRange window) {
  if (corpus.empty()) throw StatsError("yearly_trend: empty corpus");
  if (flags.size() != corpus.size()) throw StatsError("yearly_trend: flags and corpus differ in length");
  RateSeries s;
  s.topic = topic;
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    ++s.total_by_year[corpus[i].incident_year];
    s.flagged_by_year[corpus[i].incident_year] += flags[i];
    flagged += flags[i];
  }
  for (int y = window.first; y <= window.last; ++y)
    if (!s.total_by_year.count(y)) s.warnings.push_back("no decedents in " + std::to_string(y) + "; year omitted");
  for (const auto& [year, total] : s.total_by_year) s.by_year[year] = rate_per_1000(s.flagged_by_year[year], total);
  s.overall = rate_per_1000(flagged, corpus.size());
  return s;
}

std::string trend_csv(const std::vector<RateSeries>& series) {
  std::ostringstream out;
  out << "year,topic,rate_per_1000\n";
  std::map<int, std::vector<std::pair<TopicId, double>>> by_year;
  for (const auto& s : series)
    for (const auto& [y, r] : s.by_year) by_year[y].emplace_back(s.topic, r);
  for (const auto& [y, rows] : by_year)
    for (const auto& [t, r] : rows) out << y << ',' << to_string(t) << ',' << format_rate(r) << '\n';
  return out.str();
}

std::string agreement_csv_header() { return "topic,n_items,percent_agreement,kappa,p_value"; }

std::string agreement_csv_row(TopicId topic, const AgreementResult& a) {
  std::ostringstream out;
  out << to_string(topic) << ',' << a.n_items << ',' << format_fixed(a.percent_agreement, 4) << ','
      << (a.kappa ? format_fixed(*a.kappa, 4) : std::string("NA")) << ',' << format_p(a.p_value);
  return out.str();
}

std::string format_p(std::optional<double> p) {
  if (!p || std::isnan(*p)) return "NA";
  char buf[32];
  if (*p < 1e-3) {
    std::snprintf(buf, sizeof buf, "%.3e", *p);
  } else {
    std::snprintf(buf, sizeof buf, "%.4f", *p);
  }
  return buf;
}

}  // namespace isolex::stats
