#include <algorithm>
#include <set>

#include "isolex/pipeline.hpp"
#include "isolex/util.hpp"

namespace isolex::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& message) { throw PipelineError("config", message); }

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) config_error(where + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      config_error("unknown key \"" + key + "\" in " + where);
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    config_error(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void get_into(const json& j, const char* key, T& out, const std::string& where) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

fs::path resolve(const fs::path& p, const fs::path& base) { return p.is_absolute() ? p : (base / p).lexically_normal(); }

template <typename E>
E enum_key(const std::string& text, const std::string& where) {
  auto v = parse_enum<E>(text);
  if (!v) config_error(where + ": unknown value \"" + text + "\"");
  return *v;
}

std::map<TopicId, double> merge_topic_map(std::map<TopicId, double> base, const json& j, const std::string& where) {
  if (!j.is_object()) config_error(where + " must map topic names to numbers");
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) config_error(where + "." + key + " must be a number");
    base[enum_key<TopicId>(key, where)] = value.get<double>();
  }
  return base;
}

json topic_map_json(const std::map<TopicId, double>& m) {
  json j = json::object();
  for (const auto& [t, v] : m) j[std::string(to_string(t))] = v;
  return j;
}

std::vector<std::string> string_list(const json& j, const std::string& where) {
  if (!j.is_array()) config_error(where + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) config_error(where + " must be an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

json synthetic_to_json(const SyntheticConfig& c) {
  json j;
  j["n_records"] = c.n_records;
  j["seed"] = c.seed;
  j["topic_prevalence"] = topic_map_json(c.topic_prevalence);
  j["decoy_rate"] = topic_map_json(c.decoy_rate);
  j["age_shift"] = topic_map_json(c.age_shift);
  j["summary_presence_rate"] = c.summary_presence_rate;
  j["narrative_presence_rate"] = c.narrative_presence_rate;
  j["age_missing_rate"] = c.age_missing_rate;
  j["num_substances_missing_rate"] = c.num_substances_missing_rate;
  j["year_range"] = {{"first", c.year_range.first}, {"last", c.year_range.last}};
  json assoc = json::array();
  for (const auto& a : c.associations)
    assoc.push_back({{"topic", to_string(a.topic)}, {"field", a.field}, {"level", a.level}, {"multiplier", a.multiplier}});
  j["associations"] = assoc;
  const auto& m = c.demographic_marginals;
  j["demographic_marginals"] = {{"sex", m.sex},
                                {"race_ethnicity", m.race_ethnicity},
                                {"sexual_orientation", m.sexual_orientation},
                                {"transgender", m.transgender},
                                {"marital_status", m.marital_status},
                                {"relationship_status", m.relationship_status},
                                {"homeless", m.homeless},
                                {"physical_health_problem", m.physical_health_problem}};
  json topics = json::object();
  for (const auto& [t, bank] : c.phrases.topics)
    topics[std::string(to_string(t))] = {{"narrative", bank.narrative}, {"decoy", bank.decoy}, {"summary", bank.summary}};
  j["phrases"] = {{"topics", topics},
                  {"filler_opening", c.phrases.filler_opening},
                  {"filler_closing", c.phrases.filler_closing},
                  {"background_summary", c.phrases.background_summary}};
  return j;
}

SyntheticConfig synthetic_from_json(const json& j) {
  const std::string w = "synthetic";
  check_keys(j,
             {"n_records", "seed", "topic_prevalence", "decoy_rate", "age_shift", "summary_presence_rate",
              "narrative_presence_rate", "age_missing_rate", "num_substances_missing_rate", "year_range",
              "associations", "demographic_marginals", "phrases"},
             w);
  SyntheticConfig c = SyntheticConfig::defaults();
  get_into(j, "n_records", c.n_records, w);
  get_into(j, "seed", c.seed, w);
  if (j.contains("topic_prevalence")) c.topic_prevalence = merge_topic_map(c.topic_prevalence, j["topic_prevalence"], w + ".topic_prevalence");
  if (j.contains("decoy_rate")) c.decoy_rate = merge_topic_map(c.decoy_rate, j["decoy_rate"], w + ".decoy_rate");
  if (j.contains("age_shift")) c.age_shift = merge_topic_map(c.age_shift, j["age_shift"], w + ".age_shift");
  get_into(j, "summary_presence_rate", c.summary_presence_rate, w);
  get_into(j, "narrative_presence_rate", c.narrative_presence_rate, w);
  get_into(j, "age_missing_rate", c.age_missing_rate, w);
  get_into(j, "num_substances_missing_rate", c.num_substances_missing_rate, w);
  if (j.contains("year_range")) {
    const auto& y = j["year_range"];
    check_keys(y, {"first", "last"}, w + ".year_range");
    get_into(y, "first", c.year_range.first, w + ".year_range");
    get_into(y, "last", c.year_range.last, w + ".year_range");
  }
  if (j.contains("associations")) {
    if (!j["associations"].is_array()) config_error(w + ".associations must be an array");
    c.associations.clear();
    for (const auto& a : j["associations"]) {
      check_keys(a, {"topic", "field", "level", "multiplier"}, w + ".associations[]");
      c.associations.push_back({enum_key<TopicId>(get<std::string>(a, "topic", w), w + ".associations[].topic"),
                                get<std::string>(a, "field", w), get<std::string>(a, "level", w),
                                get<double>(a, "multiplier", w)});
    }
  }
  if (j.contains("demographic_marginals")) {
    const auto& m = j["demographic_marginals"];
    const std::string mw = w + ".demographic_marginals";
    check_keys(m,
               {"sex", "race_ethnicity", "sexual_orientation", "transgender", "marital_status", "relationship_status",
                "homeless", "physical_health_problem"},
               mw);
    auto& d = c.demographic_marginals;
    get_into(m, "sex", d.sex, mw);
    get_into(m, "race_ethnicity", d.race_ethnicity, mw);
    get_into(m, "sexual_orientation", d.sexual_orientation, mw);
    get_into(m, "transgender", d.transgender, mw);
    get_into(m, "marital_status", d.marital_status, mw);
    get_into(m, "relationship_status", d.relationship_status, mw);
    get_into(m, "homeless", d.homeless, mw);
    get_into(m, "physical_health_problem", d.physical_health_problem, mw);
  }
  if (j.contains("phrases")) {
    const auto& p = j["phrases"];
    const std::string pw = w + ".phrases";
    check_keys(p, {"topics", "filler_opening", "filler_closing", "background_summary"}, pw);
    if (p.contains("filler_opening")) c.phrases.filler_opening = string_list(p["filler_opening"], pw + ".filler_opening");
    if (p.contains("filler_closing")) c.phrases.filler_closing = string_list(p["filler_closing"], pw + ".filler_closing");
    if (p.contains("background_summary"))
      c.phrases.background_summary = string_list(p["background_summary"], pw + ".background_summary");
    if (p.contains("topics")) {
      if (!p["topics"].is_object()) config_error(pw + ".topics must be an object");
      for (const auto& [key, bank] : p["topics"].items()) {
        const std::string bw = pw + ".topics." + key;
        check_keys(bank, {"narrative", "decoy", "summary"}, bw);
        auto& target = c.phrases.topics[enum_key<TopicId>(key, pw + ".topics")];
        if (bank.contains("narrative")) target.narrative = string_list(bank["narrative"], bw + ".narrative");
        if (bank.contains("decoy")) target.decoy = string_list(bank["decoy"], bw + ".decoy");
        if (bank.contains("summary")) target.summary = string_list(bank["summary"], bw + ".summary");
      }
    }
  }
  return c;
}

// ---------------------------------------------------------------------------

const SeedSet& RunConfig::active_seeds() const {
  auto it = seeds.find(seed_set);
  if (it == seeds.end()) config_error("seed set \"" + seed_set + "\" is not defined");
  return it->second;
}

std::vector<TopicId> RunConfig::stats_topics() const {
  std::vector<TopicId> out;
  for (TopicId t : kAllTopics)
    if (t != TopicId::PetLoss || include_pet_loss_in_stats) out.push_back(t);
  return out;
}

void RunConfig::validate() const {
  if (corpus_path.has_value() == synthetic.has_value())
    config_error("exactly one of corpus_path and synthetic must be given");
  if (corpus_path && !fs::exists(*corpus_path)) config_error("corpus_path does not exist: " + corpus_path->string());
  if (lexicon_path.empty()) config_error("lexicon_path is required");
  if (!fs::exists(lexicon_path)) config_error("lexicon_path does not exist: " + lexicon_path.string());
  if (labels_path && !fs::exists(*labels_path)) config_error("labels_path does not exist: " + labels_path->string());
  if (synthetic) {
    try {
      synthetic->validate();
    } catch (const std::exception& e) {
      config_error(std::string("synthetic: ") + e.what());
    }
  }
  if (year_range.first > year_range.last) config_error("year_range.first exceeds year_range.last");
  active_seeds();
  if (topic_grid.empty()) config_error("topic_grid is empty");
  for (const auto& p : topic_grid) {
    try {
      p.validate();
    } catch (const std::exception& e) {
      config_error(std::string("topic_grid: ") + e.what());
    }
  }
  if (topic_min_df < 1) config_error("topic_min_df must be >= 1");
  try {
    classifier_grid.validate();
  } catch (const std::exception& e) {
    config_error(std::string("classifier_grid: ") + e.what());
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) config_error("train_fraction must lie in (0, 1)");
  if (annotation_sample_size < 1) config_error("annotation_sample_size must be >= 1");
  if (bootstrap.iterations < 1) config_error("bootstrap.iterations must be >= 1");
  if (!(bootstrap.fraction > 0.0 && bootstrap.fraction <= 1.0)) config_error("bootstrap.fraction must lie in (0, 1]");
  if (bonferroni_m < 1) config_error("bonferroni_m must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) config_error("alpha must lie in (0, 1)");
  if (!(simulate_annotators.error_rate >= 0.0 && simulate_annotators.error_rate < 0.5))
    config_error("simulate_annotators.error_rate must lie in [0, 0.5)");
  if (output_dir.empty()) config_error("output_dir is required");
}

RunConfig config_from_json(const json& j, const fs::path& base) {
  const std::string w = "config";
  check_keys(j,
             {"corpus_path", "synthetic", "lexicon_path", "year_range", "topic_grid", "topic_min_df", "classifier_grid",
              "train_fraction", "annotation_sample_size", "agreement_prefix_size", "bootstrap", "seeds", "seed_set",
              "output_dir", "bonferroni_m", "alpha", "include_pet_loss_in_stats", "labels_path", "simulate_annotators",
              "workers"},
             w);
  RunConfig c;
  if (j.contains("corpus_path")) c.corpus_path = resolve(get<std::string>(j, "corpus_path", w), base);
  if (j.contains("synthetic")) c.synthetic = synthetic_from_json(j["synthetic"]);
  if (j.contains("lexicon_path")) c.lexicon_path = resolve(get<std::string>(j, "lexicon_path", w), base);
  if (j.contains("year_range")) {
    check_keys(j["year_range"], {"first", "last"}, w + ".year_range");
    get_into(j["year_range"], "first", c.year_range.first, w + ".year_range");
    get_into(j["year_range"], "last", c.year_range.last, w + ".year_range");
  }
  if (j.contains("topic_grid")) {
    if (!j["topic_grid"].is_array()) config_error("topic_grid must be an array");
    for (const auto& g : j["topic_grid"]) {
      check_keys(g, {"n_components", "n_clusters", "min_cluster_size"}, w + ".topic_grid[]");
      topic::TopicHyperParams p;
      get_into(g, "n_components", p.n_components, w + ".topic_grid[]");
      get_into(g, "n_clusters", p.n_clusters, w + ".topic_grid[]");
      get_into(g, "min_cluster_size", p.min_cluster_size, w + ".topic_grid[]");
      c.topic_grid.push_back(p);
    }
  } else {
    c.topic_grid = topic::default_topic_grid(0);
  }
  get_into(j, "topic_min_df", c.topic_min_df, w);
  if (j.contains("classifier_grid")) {
    const auto& g = j["classifier_grid"];
    const std::string gw = w + ".classifier_grid";
    check_keys(g, {"logreg_C", "rf_n_estimators", "rf_max_depth", "rf_min_samples_split", "nb_alpha"}, gw);
    get_into(g, "logreg_C", c.classifier_grid.logreg_C, gw);
    get_into(g, "rf_n_estimators", c.classifier_grid.rf_n_estimators, gw);
    get_into(g, "rf_min_samples_split", c.classifier_grid.rf_min_samples_split, gw);
    get_into(g, "nb_alpha", c.classifier_grid.nb_alpha, gw);
    if (g.contains("rf_max_depth")) {
      if (!g["rf_max_depth"].is_array()) config_error(gw + ".rf_max_depth must be an array");
      c.classifier_grid.rf_max_depth.clear();
      for (const auto& d : g["rf_max_depth"]) {
        if (d.is_null()) {
          c.classifier_grid.rf_max_depth.emplace_back(std::nullopt);
        } else if (d.is_number_unsigned()) {
          c.classifier_grid.rf_max_depth.emplace_back(d.get<std::size_t>());
        } else {
          config_error(gw + ".rf_max_depth entries must be positive integers or null");
        }
      }
    }
  }
  get_into(j, "train_fraction", c.train_fraction, w);
  get_into(j, "annotation_sample_size", c.annotation_sample_size, w);
  get_into(j, "agreement_prefix_size", c.agreement_prefix_size, w);
  if (j.contains("bootstrap")) {
    check_keys(j["bootstrap"], {"iterations", "fraction", "test_only"}, w + ".bootstrap");
    get_into(j["bootstrap"], "iterations", c.bootstrap.iterations, w + ".bootstrap");
    get_into(j["bootstrap"], "fraction", c.bootstrap.fraction, w + ".bootstrap");
    get_into(j["bootstrap"], "test_only", c.bootstrap.test_only, w + ".bootstrap");
  }
  if (j.contains("seeds")) {
    if (!j["seeds"].is_object()) config_error("seeds must map seed-set names to seed objects");
    c.seeds.clear();
    for (const auto& [name, s] : j["seeds"].items()) {
      const std::string sw = w + ".seeds." + name;
      check_keys(s, {"corpus", "topic", "sample", "annotators", "split", "model", "bootstrap"}, sw);
      SeedSet set;
      get_into(s, "corpus", set.corpus, sw);
      get_into(s, "topic", set.topic, sw);
      get_into(s, "sample", set.sample, sw);
      get_into(s, "annotators", set.annotators, sw);
      get_into(s, "split", set.split, sw);
      get_into(s, "model", set.model, sw);
      get_into(s, "bootstrap", set.bootstrap, sw);
      c.seeds[name] = set;
    }
  }
  get_into(j, "seed_set", c.seed_set, w);
  if (j.contains("output_dir")) c.output_dir = resolve(get<std::string>(j, "output_dir", w), base);
  get_into(j, "bonferroni_m", c.bonferroni_m, w);
  get_into(j, "alpha", c.alpha, w);
  get_into(j, "include_pet_loss_in_stats", c.include_pet_loss_in_stats, w);
  if (j.contains("labels_path")) c.labels_path = resolve(get<std::string>(j, "labels_path", w), base);
  if (j.contains("simulate_annotators")) {
    check_keys(j["simulate_annotators"], {"enabled", "error_rate"}, w + ".simulate_annotators");
    get_into(j["simulate_annotators"], "enabled", c.simulate_annotators.enabled, w + ".simulate_annotators");
    get_into(j["simulate_annotators"], "error_rate", c.simulate_annotators.error_rate, w + ".simulate_annotators");
  }
  get_into(j, "workers", c.workers, w);
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    config_error(e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    config_error(path.string() + ": " + e.what());
  }
  return config_from_json(j, fs::absolute(path).parent_path());
}

json config_to_json(const RunConfig& c) {
  json j;
  if (c.corpus_path) j["corpus_path"] = c.corpus_path->string();
  if (c.synthetic) j["synthetic"] = synthetic_to_json(*c.synthetic);
  j["lexicon_path"] = c.lexicon_path.string();
  j["year_range"] = {{"first", c.year_range.first}, {"last", c.year_range.last}};
  json grid = json::array();
  for (const auto& p : c.topic_grid)
    grid.push_back({{"n_components", p.n_components}, {"n_clusters", p.n_clusters}, {"min_cluster_size", p.min_cluster_size}});
  j["topic_grid"] = grid;
  j["topic_min_df"] = c.topic_min_df;
  json depths = json::array();
  for (const auto& d : c.classifier_grid.rf_max_depth) depths.push_back(d ? json(*d) : json(nullptr));
  j["classifier_grid"] = {{"logreg_C", c.classifier_grid.logreg_C},
                          {"rf_n_estimators", c.classifier_grid.rf_n_estimators},
                          {"rf_max_depth", depths},
                          {"rf_min_samples_split", c.classifier_grid.rf_min_samples_split},
                          {"nb_alpha", c.classifier_grid.nb_alpha}};
  j["train_fraction"] = c.train_fraction;
  j["annotation_sample_size"] = c.annotation_sample_size;
  j["agreement_prefix_size"] = c.agreement_prefix_size;
  j["bootstrap"] = {{"iterations", c.bootstrap.iterations},
                    {"fraction", c.bootstrap.fraction},
                    {"test_only", c.bootstrap.test_only}};
  json seeds = json::object();
  for (const auto& [name, s] : c.seeds)
    seeds[name] = {{"corpus", s.corpus}, {"topic", s.topic},   {"sample", s.sample},      {"annotators", s.annotators},
                   {"split", s.split},   {"model", s.model},   {"bootstrap", s.bootstrap}};
  j["seeds"] = seeds;
  j["seed_set"] = c.seed_set;
  j["output_dir"] = c.output_dir.string();
  j["bonferroni_m"] = c.bonferroni_m;
  j["alpha"] = c.alpha;
  j["include_pet_loss_in_stats"] = c.include_pet_loss_in_stats;
  if (c.labels_path) j["labels_path"] = c.labels_path->string();
  j["simulate_annotators"] = {{"enabled", c.simulate_annotators.enabled},
                              {"error_rate", c.simulate_annotators.error_rate}};
  j["workers"] = c.workers;
  return j;
}

}  // namespace isolex::pipeline
