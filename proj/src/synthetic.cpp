#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "isolex/corpus.hpp"
#include "isolex/rng.hpp"

namespace isolex {

namespace {

std::vector<double> normalized(std::initializer_list<double> counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  std::vector<double> out;
  for (double c : counts) out.push_back(c / total);
  return out;
}

constexpr std::array<std::string_view, 8> kFieldNames{
    "sex",          "race_ethnicity",      "sexual_orientation", "transgender",
    "marital_status", "relationship_status", "homeless",           "physical_health_problem"};

std::optional<std::size_t> field_index(std::string_view field) {
  for (std::size_t i = 0; i < kFieldNames.size(); ++i)
    if (kFieldNames[i] == field) return i;
  return std::nullopt;
}

template <typename E>
std::optional<std::size_t> level_of(std::string_view level) {
  if (auto v = parse_enum<E>(level)) return enum_index(*v);
  return std::nullopt;
}

std::optional<std::size_t> level_index(std::size_t field, std::string_view level) {
  switch (field) {
    case 0: return level_of<Sex>(level);
    case 1: return level_of<RaceEthnicity>(level);
    case 2: return level_of<SexualOrientation>(level);
    case 3: return level_of<Transgender>(level);
    case 4: return level_of<MaritalStatus>(level);
    case 5: return level_of<RelationshipStatus>(level);
    case 6: return level_of<Homeless>(level);
    case 7: return level_of<PhysicalHealth>(level);
  }
  return std::nullopt;
}

std::array<const std::vector<double>*, 8> marginal_list(const DemographicMarginals& m) {
  return {&m.sex,           &m.race_ethnicity,      &m.sexual_orientation, &m.transgender,
          &m.marital_status, &m.relationship_status, &m.homeless,           &m.physical_health_problem};
}

constexpr std::array<std::size_t, 8> kFieldSizes{
    enum_count<Sex>(),           enum_count<RaceEthnicity>(),      enum_count<SexualOrientation>(),
    enum_count<Transgender>(),   enum_count<MaritalStatus>(),      enum_count<RelationshipStatus>(),
    enum_count<Homeless>(),      enum_count<PhysicalHealth>()};

std::size_t sample_categorical(Rng& rng, const std::vector<double>& weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0) return i;
  return weights.size() - 1;
}

const std::string& pick(Rng& rng, const std::vector<std::string>& bank) { return bank[rng.below(bank.size())]; }

void check_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(what + " must be a probability in [0,1]");
}

}  // namespace

DemographicMarginals DemographicMarginals::national_defaults() {
  DemographicMarginals m;
  m.sex = normalized({67192, 239616, 9});
  m.race_ethnicity = normalized({3928, 7024, 19949, 19337, 894, 3423, 251997, 265});
  m.sexual_orientation = normalized({217, 1045, 30819, 514, 159, 274063});
  m.transgender = normalized({554, 306263});
  m.marital_status = normalized({65080, 99590, 7534, 109189, 3959, 17878, 3587});
  m.relationship_status = normalized({82535, 18194, 206088});
  m.homeless = normalized({3520, 287594, 15703});
  m.physical_health_problem = normalized({58553, 248264});
  return m;
}

PhraseBanks PhraseBanks::defaults() {
  PhraseBanks b;
  b.topics[TopicId::ChronicSocialIsolation] = {
      {"The victim's sister explained that the victim was very much a loner and was very cynical.",
       "Neighbors reported the victim was socially isolated and rarely left the apartment.",
       "According to relatives, the victim had isolated himself from everyone for several years.",
       "The victim had no friends and spent most days alone without visitors.",
       "The building manager described the victim as a loner who had not spoken with relatives in years."},
      {"Friends stated the victim was not a loner and was active in the church choir.",
       "Coworkers said the victim had many close friends at the plant and was never socially isolated.",
       "A witness described a loner walking a bicycle near the park earlier that evening."},
      {"victim was a loner with no friends", "socially isolated lived alone no contact with family",
       "isolated loner rarely left home", "lonely and isolated no friends or family contact"}};
  b.topics[TopicId::Divorce] = {
      {"The victim and the victim's spouse are in the process of getting a divorce.",
       "The victim's wife had recently filed for divorce and taken the children to her mother's house.",
       "The victim was distraught over the impending divorce from her husband.",
       "The couple finalized their divorce last month and the victim struggled with the separation."},
      {"The victim's parents went through a divorce decades ago when the victim was a toddler.",
       "The victim worked as a paralegal handling divorce paperwork at a downtown law office.",
       "The victim's adult daughter mentioned her own divorce while speaking with detectives."},
      {"going through divorce with wife", "wife recently filed for divorce",
       "divorce proceedings pending with husband", "distraught over impending divorce from spouse"}};
  b.topics[TopicId::EvictionMove] = {
      {"The day of the incident the victim was being evicted from their residence.",
       "The victim had received an eviction notice and was due to leave the apartment.",
       "The victim recently moved to a new town after losing the lease and knew no one there.",
       "The victim was facing eviction after falling behind on rent for several months."},
      {"The victim worked for a property company and had helped serve an eviction notice to a tenant last year.",
       "The victim's neighbor recently moved away and the victim seemed unbothered by it.",
       "The victim's mother had been evicted from a rental long ago, before the victim was born."},
      {"being evicted from apartment", "eviction notice received days prior", "facing eviction behind on rent",
       "recently moved after losing lease"}};
  b.topics[TopicId::BreakUp] = {
      {"Family members stated that the victim had been upset over the recent break up with his girlfriend.",
       "The victim's boyfriend ended the relationship two days before the incident.",
       "The victim had broken up with a partner of several years and was heartbroken.",
       "Friends said the victim was devastated after the breakup with his fiancee."},
      {"Officers were called to break up a fight at a nearby bar earlier that night, unrelated to the victim.",
       "The victim's roommate had broken up with someone, according to a statement that did not involve the "
       "victim.",
       "The victim's coworkers planned to break up the team project into smaller tasks."},
      {"recent break up with girlfriend", "girlfriend ended the relationship", "upset over breakup with boyfriend",
       "partner broke up with victim"}};
  b.topics[TopicId::ChildCustodyLoss] = {
      {"She lost custody of their children due to domestic violence issues with their former spouse.",
       "The victim had recently lost custody of his son in a family court hearing.",
       "The victim was upset that the judge awarded full custody of the children to the ex wife.",
       "The victim learned that custody of the kids would be given to the grandparents."},
      {"The victim had been taken into protective custody by police two years prior for an unrelated matter.",
       "A suspect in a separate case was in police custody at the time of the incident.",
       "Deputies placed the victim's belongings in custody of the property room."},
      {"lost custody of children", "custody hearing lost kids to ex", "child custody dispute lost children",
       "judge awarded custody of kids to ex"}};
  b.topics[TopicId::PetLoss] = {
      {"The victim's dog died recently and she was very upset about that.",
       "The victim's cat had to be euthanized last week and the victim was grieving deeply.",
       "The victim's brother said the victim never recovered after the family dog passed away.",
       "The victim had been mourning since the victim's pet was put down a few days ago."},
      {"The victim's dog was found unharmed inside the residence and was taken by animal control.",
       "The victim's cat was left with a neighbor while family members traveled to the scene.",
       "Responding deputies secured the family dog in the garage before entering."},
      {"dog died recently very upset", "grieving death of pet cat", "pet dog put down last week",
       "mourning loss of family dog"}};
  b.filler_opening = {
      "The victim was found deceased in the residence by a family member.",
      "Officers responded to a call for a welfare check at the victim's home.",
      "The victim was located in a vehicle parked behind the residence.",
      "A coworker found the victim unresponsive and called emergency services.",
      "Emergency medical services pronounced the victim deceased at the scene.",
  };
  b.filler_closing = {
      "The victim had a history of depression and had been prescribed medication.",
      "No note was found at the scene.",
      "The victim left a note for family members.",
      "The victim had been drinking alcohol prior to the incident.",
      "The victim had recently lost a job and was worried about finances.",
      "Family reported the victim had been experiencing chronic pain.",
      "The victim had disclosed suicidal thoughts to a friend weeks earlier.",
      "There was no history of prior suicide attempts.",
  };
  b.background_summary = {
      "financial problems and mounting debt", "history of depression and treatment",
      "chronic pain and health problems",     "job loss and unemployment",
      "pending criminal charges legal problems", "alcohol abuse and recent relapse",
      "argument with family member prior",    "recent diagnosis of cancer",
      "military veteran with ptsd",           "prior suicide attempt history",
  };
  return b;
}

SyntheticConfig SyntheticConfig::defaults() {
  SyntheticConfig c;
  c.topic_prevalence = {{TopicId::ChronicSocialIsolation, 0.004}, {TopicId::Divorce, 0.05},
                        {TopicId::EvictionMove, 0.03},           {TopicId::BreakUp, 0.04},
                        {TopicId::ChildCustodyLoss, 0.004},      {TopicId::PetLoss, 0.004}};
  c.decoy_rate = {{TopicId::ChronicSocialIsolation, 0.002}, {TopicId::Divorce, 0.03},
                  {TopicId::EvictionMove, 0.04},           {TopicId::BreakUp, 0.015},
                  {TopicId::ChildCustodyLoss, 0.004},      {TopicId::PetLoss, 0.006}};
  c.age_shift = {{TopicId::ChronicSocialIsolation, -1.28}, {TopicId::Divorce, -1.44},
                 {TopicId::EvictionMove, -1.0},           {TopicId::BreakUp, -15.11},
                 {TopicId::ChildCustodyLoss, -9.28}};
  c.associations = {
      {TopicId::ChronicSocialIsolation, "sex", "MALE", 1.44},
      {TopicId::ChronicSocialIsolation, "sexual_orientation", "GAY", 3.68},
      {TopicId::ChronicSocialIsolation, "marital_status", "NEVER_MARRIED", 5.81},
      {TopicId::ChronicSocialIsolation, "relationship_status", "NOT_IN_RELATIONSHIP", 6.97},
      {TopicId::Divorce, "marital_status", "MARRIED_SEPARATED", 6.61},
      {TopicId::Divorce, "sex", "MALE", 1.31},
      {TopicId::EvictionMove, "homeless", "YES", 1.42},
      {TopicId::BreakUp, "relationship_status", "NOT_IN_RELATIONSHIP", 11.42},
      {TopicId::BreakUp, "marital_status", "NEVER_MARRIED", 12.89},
      {TopicId::ChildCustodyLoss, "sex", "MALE", 0.57},
      {TopicId::ChildCustodyLoss, "race_ethnicity", "AMERICAN_INDIAN_ALASKA_NATIVE", 3.02},
  };
  return c;
}

void SyntheticConfig::validate() const {
  if (n_records == 0) throw std::invalid_argument("synthetic config: n_records must be positive");
  if (year_range.first > year_range.last) throw std::invalid_argument("synthetic config: empty year range");
  for (const auto& [topic, p] : topic_prevalence) check_probability(p, "prevalence of " + std::string(to_string(topic)));
  for (const auto& [topic, p] : decoy_rate) check_probability(p, "decoy rate of " + std::string(to_string(topic)));
  check_probability(summary_presence_rate, "summary_presence_rate");
  check_probability(narrative_presence_rate, "narrative_presence_rate");
  check_probability(age_missing_rate, "age_missing_rate");
  check_probability(num_substances_missing_rate, "num_substances_missing_rate");

  const auto marginals = marginal_list(demographic_marginals);
  for (std::size_t f = 0; f < marginals.size(); ++f) {
    const auto& m = *marginals[f];
    const std::string name(kFieldNames[f]);
    if (m.size() != kFieldSizes[f])
      throw std::invalid_argument("marginal " + name + " needs " + std::to_string(kFieldSizes[f]) + " entries");
    double sum = 0.0;
    for (double p : m) {
      check_probability(p, "marginal " + name);
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("marginal " + name + " must sum to 1");
  }
  for (const auto& a : associations) {
    auto field = field_index(a.field);
    if (!field) throw std::invalid_argument("association: unknown field " + a.field);
    if (!level_index(*field, a.level)) throw std::invalid_argument("association: unknown level " + a.level);
    if (!(a.multiplier > 0.0) || !std::isfinite(a.multiplier))
      throw std::invalid_argument("association multiplier must be positive");
  }
  for (const auto& [topic, p] : topic_prevalence) {
    if (p <= 0.0) continue;
    auto it = phrases.topics.find(topic);
    if (it == phrases.topics.end() || it->second.narrative.empty() || it->second.summary.empty())
      throw std::invalid_argument("empty phrase bank for enabled topic " + std::string(to_string(topic)));
  }
  for (const auto& [topic, p] : decoy_rate) {
    if (p <= 0.0) continue;
    auto it = phrases.topics.find(topic);
    if (it == phrases.topics.end() || it->second.decoy.empty())
      throw std::invalid_argument("empty decoy bank for topic " + std::string(to_string(topic)));
  }
  if (phrases.filler_opening.empty() || phrases.filler_closing.empty() || phrases.background_summary.empty())
    throw std::invalid_argument("synthetic config: filler and background banks must be non-empty");
}

namespace {

double lookup(const std::map<TopicId, double>& m, TopicId t) {
  auto it = m.find(t);
  return it == m.end() ? 0.0 : it->second;
}

struct ResolvedAssociation {
  TopicId topic;
  std::size_t field;
  std::size_t level;
  double multiplier;
};

std::string make_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "SYN%07zu", i + 1);
  return buf;
}

}  // namespace

Corpus generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  std::vector<ResolvedAssociation> assoc;
  for (const auto& a : config.associations) {
    const auto field = *field_index(a.field);
    assoc.push_back({a.topic, field, *level_index(field, a.level), a.multiplier});
  }
  const auto marginals = marginal_list(config.demographic_marginals);
  const auto& banks = config.phrases;
  const auto year_span = static_cast<std::uint64_t>(config.year_range.last - config.year_range.first + 1);

  Rng rng(config.seed);
  Corpus corpus;
  corpus.reserve(config.n_records);
  for (std::size_t i = 0; i < config.n_records; ++i) {
    DecedentRecord r;
    r.id = make_id(i);
    r.incident_year = config.year_range.first + static_cast<int>(rng.below(year_span));

    bool any_topic = false;
    for (TopicId t : kAllTopics) {
      const bool flag = rng.uniform() < lookup(config.topic_prevalence, t);
      r.ground_truth[t] = flag;
      any_topic = any_topic || flag;
    }

    std::array<std::size_t, 8> levels{};
    for (std::size_t f = 0; f < marginals.size(); ++f) {
      std::vector<double> w = *marginals[f];
      for (const auto& a : assoc)
        if (a.field == f && r.ground_truth[a.topic]) w[a.level] *= a.multiplier;
      levels[f] = sample_categorical(rng, w);
    }
    r.sex = enum_from_index<Sex>(levels[0]);
    r.race_ethnicity = enum_from_index<RaceEthnicity>(levels[1]);
    r.sexual_orientation = enum_from_index<SexualOrientation>(levels[2]);
    r.transgender = enum_from_index<Transgender>(levels[3]);
    r.marital_status = enum_from_index<MaritalStatus>(levels[4]);
    r.relationship_status = enum_from_index<RelationshipStatus>(levels[5]);
    r.homeless = enum_from_index<Homeless>(levels[6]);
    r.physical_health_problem = enum_from_index<PhysicalHealth>(levels[7]);

    const bool age_missing = rng.bernoulli(config.age_missing_rate);
    double age = rng.normal(46.3, 18.4);
    for (TopicId t : kAllTopics)
      if (r.ground_truth[t]) age += lookup(config.age_shift, t);
    if (!age_missing) r.age = std::clamp(static_cast<int>(std::lround(age)), 10, 106);

    const bool subst_missing = rng.bernoulli(config.num_substances_missing_rate);
    int substances = 1;
    while (rng.uniform() < 2.6 / 3.6 && substances < 132) ++substances;
    if (!subst_missing) r.num_substances = substances;

    const bool narrative = rng.bernoulli(config.narrative_presence_rate) || any_topic;
    std::vector<const std::string*> inserts;
    for (TopicId t : kAllTopics) {
      if (r.ground_truth[t]) {
        inserts.push_back(&pick(rng, banks.topics.at(t).narrative));
      } else if (rng.uniform() < lookup(config.decoy_rate, t)) {
        inserts.push_back(&pick(rng, banks.topics.at(t).decoy));
      }
    }
    if (narrative) {
      const auto layout = rng.below(10);  // 0-2 LE only, 3-4 CME only, else both
      const bool le = layout < 3 || layout >= 5;
      const bool cme = layout >= 3;
      std::string le_text, cme_text;
      auto open = [&](std::string& text) { text = pick(rng, banks.filler_opening); };
      if (le) open(le_text);
      if (cme) open(cme_text);
      for (const auto* sentence : inserts) {
        std::string& target = (le && cme) ? (rng.below(2) ? cme_text : le_text) : (le ? le_text : cme_text);
        target += ' ';
        target += *sentence;
      }
      auto close = [&](std::string& text) {
        const auto n = 1 + rng.below(2);
        for (std::uint64_t k = 0; k < n; ++k) {
          text += ' ';
          text += pick(rng, banks.filler_closing);
        }
      };
      if (le) {
        close(le_text);
        r.narratives.le_narrative = std::move(le_text);
      }
      if (cme) {
        close(cme_text);
        r.narratives.cme_narrative = std::move(cme_text);
      }
    }

    if (rng.bernoulli(config.summary_presence_rate)) {
      const auto layout = rng.below(3);  // LE, CME, both
      auto summary = [&]() {
        std::string text;
        for (TopicId t : kAllTopics) {
          if (!r.ground_truth[t]) continue;
          if (!text.empty()) text += "; ";
          text += pick(rng, banks.topics.at(t).summary);
        }
        if (text.empty()) text = pick(rng, banks.background_summary);
        return text;
      };
      if (layout == 0 || layout == 2) r.narratives.le_summary = summary();
      if (layout == 1 || layout == 2) r.narratives.cme_summary = summary();
    }
    corpus.push_back(std::move(r));
  }
  return corpus;
}

}  // namespace isolex
