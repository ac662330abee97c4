#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isolex/corpus.hpp"
#include "isolex/enums.hpp"

namespace isolex::stats {

class StatsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Agreement

struct AgreementResult {
  std::size_t n_items = 0;
  double percent_agreement = 0.0;  // fraction in [0, 1]
  double p_observed = 0.0;
  double p_expected = 0.0;
  std::optional<double> kappa;  // NA iff p_expected == 1
  std::optional<double> p_value;
};

/// Cohen's kappa; two-sided p from the large-sample null variance of kappa.
AgreementResult cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b);

// ---------------------------------------------------------------------------
// Significance

enum class Tier { NotSignificant, Bonferroni, Strong };

/// alpha / m.
double bonferroni(double alpha = 0.05, int m = 30);

/// p < 1e-4 -> Strong; p < threshold -> Bonferroni; else NotSignificant.
Tier tier_for(std::optional<double> p, double threshold);

// ---------------------------------------------------------------------------
// Logistic regression

struct LogitFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd standard_errors;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
  bool diverged = false;  // some |coefficient| > 30
};

/// Newton/IRLS on a design matrix that already carries its intercept column;
/// stops at gradient norm < 1e-8 or 50 iterations.
LogitFit fit_logit(const Eigen::MatrixXd& design, const std::vector<int>& y);

struct OddsResult {
  TopicId topic{};
  std::string predictor;
  std::string level;
  std::string reference;
  double odds_ratio = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::optional<double> p_value;
  Tier tier = Tier::NotSignificant;
  std::size_t n_used = 0;
  bool separation = false;  // zero-event level or divergent coefficient
  double coefficient = 0.0;
  double standard_error = 0.0;
};

/// A categorical predictor: values[i] is the level of record i, nullopt when
/// excluded (Unknown / NotReported).
struct CategoricalPredictor {
  std::string name;
  std::string reference;
  std::vector<std::string> levels;  // reporting order, reference excluded
  std::vector<std::optional<std::string>> values;
};

/// One regression (intercept + indicators of every non-reference level).
std::vector<OddsResult> bivariate_logit(TopicId topic, const std::vector<bool>& outcome,
                                        const CategoricalPredictor& predictor, double threshold);

/// Per-unit odds ratio of a numeric predictor; nullopt values are excluded.
OddsResult bivariate_logit_continuous(TopicId topic, const std::vector<bool>& outcome, const std::string& name,
                                      const std::vector<std::optional<double>>& values, double threshold);

/// Sex, race/ethnicity, orientation, transgender, marital, relationship,
/// homelessness and physical health with their reporting references.
std::vector<CategoricalPredictor> standard_predictors(const Corpus& corpus);

/// Every standard predictor plus number of substances.
std::vector<OddsResult> odds_table(TopicId topic, const std::vector<bool>& outcome, const Corpus& corpus,
                                   double threshold);

std::string odds_csv_header();
std::string odds_csv_row(const OddsResult& r);

// ---------------------------------------------------------------------------
// Age, rates and trends

struct AgeDifference {
  double difference = 0.0;  // mean(flagged) - mean(unflagged)
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::optional<double> p_value;
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  bool zero_variance = false;
  std::size_t n_flagged = 0;
  std::size_t n_unflagged = 0;
};

/// Welch two-sample comparison; records without an age are excluded.
AgeDifference age_difference(const std::vector<bool>& flags, const std::vector<std::optional<int>>& ages);
AgeDifference age_difference(const std::vector<bool>& flags, const Corpus& corpus);

double rate_per_1000(std::size_t count, std::size_t total);
/// Three decimals.
std::string format_rate(double rate);

struct RateSeries {
  TopicId topic{};
  std::map<int, double> by_year;
  std::map<int, std::size_t> flagged_by_year;
  std::map<int, std::size_t> total_by_year;
  double overall = 0.0;
  std::vector<std::string> warnings;
};

/// Years of `window` without decedents are omitted with a warning.
RateSeries yearly_trend(TopicId topic, const std::vector<bool>& flags, const Corpus& corpus, YearRange window = {});

std::string trend_csv(const std::vector<RateSeries>& series);
std::string agreement_csv_header();
std::string agreement_csv_row(TopicId topic, const AgreementResult& a);

/// "NA" for nullopt, otherwise up to 4 significant digits in scientific form
/// below 1e-3.
std::string format_p(std::optional<double> p);

}  // namespace isolex::stats

namespace isolex {
template <>
struct EnumTraits<stats::Tier> {
  static constexpr std::array<std::string_view, 3> names{"NOT_SIGNIFICANT", "BONFERRONI", "STRONG"};
};
}  // namespace isolex
