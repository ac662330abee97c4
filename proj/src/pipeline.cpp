#include "isolex/pipeline.hpp"

#include <algorithm>
#include <ctime>
#include <set>
#include <sstream>

#include "isolex/csv.hpp"
#include "isolex/rng.hpp"
#include "isolex/util.hpp"

namespace isolex::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::vector<std::string>>& upstream() {
  static const std::map<std::string, std::vector<std::string>> deps{
      {"corpus", {}},           {"topic-model", {"corpus"}}, {"match", {"corpus"}},
      {"sample", {"match"}},    {"labels", {"sample"}},      {"train", {"labels"}},
      {"predict", {"train"}},   {"analyze", {"predict"}},    {"report", {"analyze", "topic-model"}}};
  return deps;
}

std::string topic_file(const std::string& dir, TopicId t, const std::string& ext) {
  return dir + "/" + std::string(to_string(t)) + ext;
}

std::string json_digest(const json& j) { return sha256_hex(j.dump()); }

json config_identity(const RunConfig& c) {
  json j = config_to_json(c);
  j.erase("output_dir");
  j.erase("workers");
  return j;
}

std::string metrics_cell(const std::optional<double>& v, int decimals = 4) {
  return v ? format_fixed(*v, decimals) : std::string("NA");
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"corpus", "topic-model", "match",   "sample", "labels",
                                              "train",  "predict",     "analyze", "report"};
  return names;
}

// ---------------------------------------------------------------------------
// Manifest

json RunManifest::to_json() const {
  json stages_j = json::object();
  for (const auto& [name, s] : stages)
    stages_j[name] = {{"completed", s.completed}, {"inputs", s.inputs}, {"outputs", s.outputs}, {"note", s.note}};
  return {{"run_id", run_id},         {"tool_version", tool_version}, {"config_digest", config_digest},
          {"seed_set", seed_set},     {"status", status},             {"stages", stages_j}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.tool_version = j.at("tool_version").get<std::string>();
  m.config_digest = j.at("config_digest").get<std::string>();
  m.seed_set = j.at("seed_set").get<std::string>();
  m.status = j.value("status", std::string{});
  for (const auto& [name, s] : j.at("stages").items()) {
    StageRecord r;
    r.completed = s.at("completed").get<bool>();
    r.inputs = s.at("inputs").get<std::map<std::string, std::string>>();
    r.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
    r.note = s.value("note", std::string{});
    m.stages[name] = std::move(r);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Shared helpers

std::optional<std::string> summary_text(const DecedentRecord& r) {
  const auto& n = r.narratives;
  const bool le = n.le_summary && !n.le_summary->empty();
  const bool cme = n.cme_summary && !n.cme_summary->empty();
  if (le && cme) return *n.le_summary + " " + *n.cme_summary;
  if (le) return *n.le_summary;
  if (cme) return *n.cme_summary;
  return std::nullopt;
}

json batch_to_json(const AnnotationBatch& b) {
  json items = json::array();
  for (const auto& it : b.items) {
    json spans = json::array();
    for (const auto& s : it.spans) spans.push_back({s.start, s.end});
    items.push_back({{"decedent_id", it.decedent_id}, {"text", it.text}, {"spans", spans}});
  }
  return {{"topic", to_string(b.topic)},
          {"sample_seed", b.sample_seed},
          {"size", b.size},
          {"short_of_requested", b.short_of_requested},
          {"items", items}};
}

AnnotationBatch batch_from_json(const json& j) {
  AnnotationBatch b;
  b.topic = parse_topic(j.at("topic").get<std::string>());
  b.sample_seed = j.at("sample_seed").get<std::uint64_t>();
  b.short_of_requested = j.at("short_of_requested").get<bool>();
  for (const auto& it : j.at("items")) {
    AnnotationItem item;
    item.decedent_id = it.at("decedent_id").get<std::string>();
    item.text = it.at("text").get<std::string>();
    for (const auto& s : it.at("spans")) item.spans.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
    b.items.push_back(std::move(item));
  }
  b.size = b.items.size();
  if (j.at("size").get<std::size_t>() != b.size) throw std::runtime_error("batch size field disagrees with its items");
  return b;
}

std::string rfc3339_utc(std::int64_t seconds) {
  const std::time_t t = static_cast<std::time_t>(seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<classify::LabelRow> simulate_labels(const std::vector<AnnotationBatch>& batches, const Corpus& corpus,
                                                std::size_t prefix, double error_rate, std::uint64_t seed) {
  std::unordered_map<std::string, const DecedentRecord*> by_id;
  for (const auto& r : corpus) by_id.emplace(r.id, &r);
  std::vector<classify::LabelRow> rows;
  std::int64_t clock = 1704067200;  // 2024-01-01T00:00:00Z
  for (const auto& batch : batches) {
    Rng rng(mix_seed(seed, enum_index(batch.topic)));
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
      const auto& id = batch.items[i].decedent_id;
      auto it = by_id.find(id);
      if (it == by_id.end()) throw std::runtime_error("simulated annotation: unknown decedent " + id);
      const auto& gt = it->second->ground_truth;
      auto truth_it = gt.find(batch.topic);
      if (truth_it == gt.end())
        throw std::runtime_error("simulated annotation needs ground truth, missing for " + id + " / " +
                                 std::string(to_string(batch.topic)));
      const bool truth = truth_it->second;
      const bool a1 = rng.bernoulli(error_rate) ? !truth : truth;
      rows.push_back({id, batch.topic, "A1", a1, rfc3339_utc(clock++)});
      if (i < prefix) {
        const bool a2 = rng.bernoulli(error_rate) ? !truth : truth;
        rows.push_back({id, batch.topic, "A2", a2, rfc3339_utc(clock++)});
        if (a1 != a2) rows.push_back({id, batch.topic, std::string(classify::kAdjudicatedAnnotator), truth, rfc3339_utc(clock++)});
      }
    }
  }
  return rows;
}

AgreementStatus topic_agreement(const AnnotationBatch& batch, const std::vector<classify::LabelRow>& labels,
                                std::size_t prefix) {
  AgreementStatus st;
  const auto latest = classify::latest_labels(labels);
  std::vector<std::string> annotators;
  std::map<std::string, std::map<std::string, bool>> by_annotator;
  for (const auto& r : latest) {
    if (r.topic != batch.topic || r.annotator_id == classify::kAdjudicatedAnnotator) continue;
    if (!by_annotator.count(r.annotator_id)) annotators.push_back(r.annotator_id);
    by_annotator[r.annotator_id][r.decedent_id] = r.relevant;
  }
  st.n_annotators = annotators.size();
  if (annotators.size() < 2) return st;
  st.annotator_a = annotators[0];
  st.annotator_b = annotators[1];
  const auto& a = by_annotator[st.annotator_a];
  const auto& b = by_annotator[st.annotator_b];
  std::vector<bool> la, lb;
  for (const auto& item : batch.items) {
    if (la.size() >= prefix) break;
    auto ia = a.find(item.decedent_id), ib = b.find(item.decedent_id);
    if (ia == a.end() || ib == b.end()) continue;
    la.push_back(ia->second);
    lb.push_back(ib->second);
  }
  if (la.empty()) return st;
  st.sufficient = true;
  st.result = stats::cohen_kappa(la, lb);
  return st;
}

// ---------------------------------------------------------------------------
// Pipeline plumbing

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)) {
  config_.validate();
  const json identity = config_identity(config_);
  const std::string digest = json_digest(identity);
  const fs::path manifest_path = path("manifest.json");
  if (fs::exists(manifest_path)) {
    try {
      manifest_ = RunManifest::from_json(json::parse(read_text_file(manifest_path)));
    } catch (const std::exception& e) {
      throw PipelineError("manifest", "cannot read " + manifest_path.string() + ": " + e.what());
    }
  }
  manifest_.config_digest = digest;
  manifest_.run_id = digest.substr(0, 16);
  manifest_.tool_version = std::string(kToolVersion);
  manifest_.seed_set = config_.seed_set;
  fs::create_directories(config_.output_dir);
  json provenance = config_to_json(config_);
  write_text_file(path("config.json"), provenance.dump(2) + "\n");
}

void Pipeline::write(const std::string& relative, std::string_view content) const {
  write_text_file(path(relative), content);
}

std::string Pipeline::read(const std::string& relative, const std::string& stage) const {
  const fs::path p = path(relative);
  if (!fs::exists(p)) throw PipelineError(stage, "missing upstream artifact " + p.string());
  return read_text_file(p);
}

void Pipeline::save_manifest() const { write("manifest.json", manifest_.to_json().dump(2) + "\n"); }

Pipeline::Inputs Pipeline::stage_inputs(const std::string& name) const {
  const SeedSet& seeds = config_.active_seeds();
  Inputs in;
  auto file = [&](const std::string& rel) {
    const fs::path p = path(rel);
    in[rel] = fs::exists(p) ? file_sha256(p) : std::string("missing");
  };
  auto outputs_of = [&](const std::string& stage) {
    auto it = manifest_.stages.find(stage);
    if (it == manifest_.stages.end()) return;
    for (const auto& [rel, digest] : it->second.outputs) in[rel] = digest;
  };
  json params;
  params["tool_version"] = kToolVersion;
  if (name == "corpus") {
    if (config_.corpus_path) {
      in["source:corpus"] = file_sha256(*config_.corpus_path);
    } else {
      params["synthetic"] = synthetic_to_json(*config_.synthetic);
      params["seed"] = seeds.corpus;
    }
    params["year_range"] = {config_.year_range.first, config_.year_range.last};
  } else if (name == "topic-model") {
    outputs_of("corpus");
    params["grid"] = config_to_json(config_)["topic_grid"];
    params["min_df"] = config_.topic_min_df;
    params["seed"] = seeds.topic;
  } else if (name == "match") {
    outputs_of("corpus");
    in["source:lexicon"] = file_sha256(config_.lexicon_path);
  } else if (name == "sample") {
    outputs_of("match");
    params["size"] = config_.annotation_sample_size;
    params["seed"] = seeds.sample;
  } else if (name == "labels") {
    outputs_of("sample");
    if (config_.labels_path) {
      in["source:labels"] = file_sha256(*config_.labels_path);
    } else if (config_.simulate_annotators.enabled) {
      params["simulate"] = {config_.simulate_annotators.error_rate, seeds.annotators, config_.agreement_prefix_size};
    } else {
      file("annotation/labels.csv");
    }
  } else if (name == "train") {
    outputs_of("labels");
    outputs_of("sample");
    params["grid"] = config_to_json(config_)["classifier_grid"];
    params["train_fraction"] = config_.train_fraction;
    params["bootstrap"] = config_to_json(config_)["bootstrap"];
    params["seeds"] = {seeds.split, seeds.model, seeds.bootstrap};
  } else if (name == "predict") {
    outputs_of("train");
    outputs_of("match");
  } else if (name == "analyze") {
    outputs_of("predict");
    outputs_of("labels");
    params["bonferroni_m"] = config_.bonferroni_m;
    params["alpha"] = config_.alpha;
    params["include_pet_loss"] = config_.include_pet_loss_in_stats;
    params["prefix"] = config_.agreement_prefix_size;
  } else if (name == "report") {
    outputs_of("analyze");
    params["bonferroni_m"] = config_.bonferroni_m;
    params["alpha"] = config_.alpha;
    outputs_of("topic-model");
  }
  in["params"] = json_digest(params);
  return in;
}

bool Pipeline::up_to_date(const std::string& name, const Inputs& inputs) const {
  auto it = manifest_.stages.find(name);
  if (it == manifest_.stages.end() || !it->second.completed || it->second.inputs != inputs) return false;
  for (const auto& [rel, digest] : it->second.outputs) {
    const fs::path p = path(rel);
    if (!fs::exists(p) || file_sha256(p) != digest) return false;
  }
  return true;
}

void Pipeline::record(const std::string& name, Inputs inputs, const std::vector<std::string>& outputs, std::string note) {
  StageRecord r;
  r.completed = true;
  r.inputs = std::move(inputs);
  for (const auto& rel : outputs) r.outputs[rel] = file_sha256(path(rel));
  r.note = std::move(note);
  manifest_.stages[name] = std::move(r);
  save_manifest();
}

StageOutcome Pipeline::run_stage(const std::string& name) {
  if (!upstream().count(name)) throw PipelineError(name, "unknown stage");
  for (const auto& dep : upstream().at(name)) {
    auto it = manifest_.stages.find(dep);
    if (it == manifest_.stages.end() || !it->second.completed)
      throw PipelineError(name, "upstream stage \"" + dep + "\" has not completed");
  }
  const Inputs inputs = stage_inputs(name);
  if (up_to_date(name, inputs)) {
    log(name + ": up to date, skipped");
    return StageOutcome::Skipped;
  }
  manifest_.stages[name].completed = false;
  last_outputs_.clear();
  std::string note;
  try {
    if (name == "corpus") stage_corpus();
    if (name == "topic-model") stage_topic_model();
    if (name == "match") stage_match();
    if (name == "sample") stage_sample();
    if (name == "labels" && !stage_labels()) {
      manifest_.status = "awaiting_labels";
      save_manifest();
      log("labels: awaiting labels; serve-annotate or import-labels, then rerun");
      return StageOutcome::Awaiting;
    }
    if (name == "train") stage_train();
    if (name == "predict") stage_predict();
    if (name == "analyze") stage_analyze();
    if (name == "report") stage_report();
  } catch (const PipelineError&) {
    manifest_.status = "failed: " + name;
    save_manifest();
    throw;
  } catch (const std::exception& e) {
    manifest_.status = "failed: " + name;
    save_manifest();
    throw PipelineError(name, e.what());
  }
  record(name, stage_inputs(name), last_outputs_, note);
  log(name + ": done");
  return StageOutcome::Ran;
}

RunManifest Pipeline::run_all() {
  for (const auto& name : stage_names()) {
    if (run_stage(name) == StageOutcome::Awaiting) return manifest_;
  }
  manifest_.status = "complete";
  save_manifest();
  return manifest_;
}

void Pipeline::import_labels(const fs::path& labels_csv) {
  const std::string text = read_text_file(labels_csv);
  try {
    classify::parse_labels_csv(text);
  } catch (const std::exception& e) {
    throw PipelineError("labels", e.what());
  }
  write("annotation/labels.csv", text);
  manifest_.stages["labels"].completed = false;
  run_stage("labels");
}

Corpus Pipeline::load_run_corpus(const std::string& stage) const {
  const std::string text = read("corpus.jsonl", stage);
  return parse_corpus(text, config_.year_range).records;
}

std::vector<AnnotationBatch> Pipeline::load_batches() const {
  std::vector<AnnotationBatch> out;
  for (TopicId t : kAllTopics) {
    const std::string rel = topic_file("annotation/batches", t, ".json");
    out.push_back(batch_from_json(json::parse(read(rel, "sample"))));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages

void Pipeline::stage_corpus() {
  json info;
  if (config_.corpus_path) {
    LoadResult loaded = load_corpus(*config_.corpus_path, config_.year_range);
    write("corpus.jsonl", serialize_corpus(loaded.records));
    info = {{"source", "file"},
            {"records", loaded.records.size()},
            {"rejected_out_of_window", loaded.rejected_out_of_window},
            {"with_narrative", loaded.with_narrative},
            {"warnings", loaded.warnings}};
  } else {
    SyntheticConfig syn = *config_.synthetic;
    syn.seed = config_.active_seeds().corpus;
    const Corpus corpus = generate_synthetic(syn);
    const std::string text = serialize_corpus(corpus);
    const LoadResult loaded = parse_corpus(text, config_.year_range);
    write("corpus.jsonl", serialize_corpus(loaded.records));
    info = {{"source", "synthetic"},
            {"records", loaded.records.size()},
            {"rejected_out_of_window", loaded.rejected_out_of_window},
            {"with_narrative", loaded.with_narrative},
            {"warnings", loaded.warnings}};
  }
  write("corpus_info.json", info.dump(2) + "\n");
  last_outputs_ = {"corpus.jsonl", "corpus_info.json"};
}

void Pipeline::stage_topic_model() {
  const Corpus corpus = load_run_corpus("topic-model");
  std::vector<topic::TokenizedDoc> docs;
  for (const auto& r : corpus)
    if (auto s = summary_text(r)) docs.push_back(topic::tokenize(*s, r.id));
  if (docs.empty()) throw PipelineError("topic-model", "no circumstance summaries in the corpus");
  const topic::TopicCorpus tc = topic::TopicCorpus::build(std::move(docs), config_.topic_min_df);
  std::vector<topic::TopicHyperParams> grid = config_.topic_grid;
  for (auto& p : grid) p.seed = config_.active_seeds().topic;
  const topic::GridSearchResult gs = topic::grid_search_topics(tc, grid, config_.workers);

  write("topics/leaderboard.csv", topic::leaderboard_csv(gs.leaderboard));
  const auto& best = gs.best;
  json report = {{"best_index", gs.best_index},
                 {"hyperparams",
                  {{"n_components", best.hyperparams.n_components},
                   {"n_clusters", best.hyperparams.n_clusters},
                   {"min_cluster_size", best.hyperparams.min_cluster_size},
                   {"seed", best.hyperparams.seed}}},
                 {"coherence", best.coherence},
                 {"n_docs", best.doc_ids.size()},
                 {"n_topics", best.n_topics()},
                 {"vocabulary_size", tc.tfidf.terms.size()},
                 {"topics", topic::topic_report_json(best)}};
  write("topics/topics.json", report.dump(2) + "\n");
  std::ostringstream assign;
  assign << "decedent_id,topic\n";
  for (std::size_t i = 0; i < best.doc_ids.size(); ++i) assign << best.doc_ids[i] << ',' << best.assignments[i] << '\n';
  write("topics/assignments.csv", assign.str());
  last_outputs_ = {"topics/leaderboard.csv", "topics/topics.json", "topics/assignments.csv"};
}

void Pipeline::stage_match() {
  const Corpus corpus = load_run_corpus("match");
  const Lexicon lexicon = compile_lexicon(config_.lexicon_path);
  const MatchSet matches = match_corpus(corpus, lexicon, config_.workers);
  write("matches.csv", match_set_csv(matches));
  json info = {{"lexicon", lexicon.name()},
               {"lexicon_version", lexicon.version()},
               {"total_decedents", matches.total_decedents},
               {"decedents_with_any_match", matches.decedents_with_any_match},
               {"fields_with_any_match", matches.fields_with_any_match},
               {"fields_scanned", matches.fields_scanned}};
  json counts = json::object();
  for (TopicId t : kAllTopics) counts[std::string(to_string(t))] = matches.flagged_count(t);
  info["flagged"] = counts;
  write("match_info.json", info.dump(2) + "\n");
  last_outputs_ = {"matches.csv", "match_info.json"};
}

void Pipeline::stage_sample() {
  const Corpus corpus = load_run_corpus("sample");
  const MatchSet matches = match_set_from_csv(read("matches.csv", "sample"), corpus);
  for (TopicId t : kAllTopics) {
    const auto batch = sample_for_annotation(matches, corpus, t, static_cast<int>(config_.annotation_sample_size),
                                             mix_seed(config_.active_seeds().sample, enum_index(t)));
    const std::string rel = topic_file("annotation/batches", t, ".json");
    write(rel, batch_to_json(batch).dump(2) + "\n");
    last_outputs_.push_back(rel);
    if (batch.short_of_requested)
      log("sample: " + std::string(to_string(t)) + " has only " + std::to_string(batch.size) + " flagged decedents");
  }
}

bool Pipeline::stage_labels() {
  const std::string rel = "annotation/labels.csv";
  if (config_.labels_path) {
    const std::string text = read_text_file(*config_.labels_path);
    classify::parse_labels_csv(text);
    write(rel, text);
  } else if (config_.simulate_annotators.enabled) {
    const Corpus corpus = load_run_corpus("labels");
    const auto rows = simulate_labels(load_batches(), corpus, config_.agreement_prefix_size,
                                      config_.simulate_annotators.error_rate, config_.active_seeds().annotators);
    write(rel, classify::labels_csv(rows));
  } else {
    if (!fs::exists(path(rel))) return false;
    if (classify::parse_labels_csv(read_text_file(path(rel))).empty()) return false;
  }
  last_outputs_ = {rel};
  return true;
}

void Pipeline::stage_train() {
  const Corpus corpus = load_run_corpus("train");
  std::unordered_map<std::string, const DecedentRecord*> by_id;
  for (const auto& r : corpus) by_id.emplace(r.id, &r);
  const auto labels = classify::parse_labels_csv(read("annotation/labels.csv", "train"));
  const auto consensus = classify::consensus_labels(labels);
  const auto batches = load_batches();
  const SeedSet& seeds = config_.active_seeds();

  std::string metrics = classify::metrics_csv_header() + "\n";
  json summary = json::object();
  for (const auto& batch : batches) {
    const TopicId t = batch.topic;
    const std::string name(to_string(t));
    std::map<std::string, bool> topic_labels;
    for (const auto& c : consensus)
      if (c.topic == t) topic_labels[c.decedent_id] = c.relevant;
    std::vector<classify::LabeledDoc> examples;
    for (const auto& item : batch.items) {
      auto it = topic_labels.find(item.decedent_id);
      if (it == topic_labels.end()) continue;
      examples.push_back({item.decedent_id, topic::tokenize(item.text, item.decedent_id), it->second});
    }
    if (examples.empty()) {
      summary[name] = {{"trained", false}, {"note", "no labeled examples"}};
      log("train: " + name + " has no labels; no model");
      continue;
    }
    classify::TrainOptions opts;
    opts.train_fraction = config_.train_fraction;
    opts.split_seed = mix_seed(seeds.split, enum_index(t));
    opts.model_seed = mix_seed(seeds.model, enum_index(t));
    opts.bootstrap.iterations = config_.bootstrap.iterations;
    opts.bootstrap.fraction = config_.bootstrap.fraction;
    opts.bootstrap.seed = mix_seed(seeds.bootstrap, enum_index(t));
    opts.scope = config_.bootstrap.test_only ? classify::BootstrapScope::TestOnly : classify::BootstrapScope::AllSamples;
    opts.workers = config_.workers;
    const auto result = classify::train_topic(t, examples, config_.classifier_grid, opts);

    const std::string model_rel = topic_file("models", t, ".json");
    write(model_rel, classify::model_to_json(result.best_model).dump() + "\n");
    const std::string board_rel = topic_file("train", t, "_leaderboard.csv");
    write(board_rel, classify::leaderboard_csv(t, result.leaderboard));
    last_outputs_.push_back(model_rel);
    last_outputs_.push_back(board_rel);

    json kinds = json::object();
    for (const auto& k : result.kinds) {
      metrics += classify::metrics_csv_row(t, k.kind, k.bootstrap) + "\n";
      json km = json::object();
      const auto names = std::array<std::string, 7>{"accuracy",        "precision_pos", "recall_pos", "f1_pos",
                                                    "macro_precision", "macro_recall",  "macro_f1"};
      const auto v = k.test_metrics.values();
      for (std::size_t i = 0; i < v.size(); ++i) km[names[i]] = v[i];
      kinds[std::string(to_string(k.kind))] = {
          {"hyperparams", result.leaderboard[k.candidate_index].spec.describe()}, {"test_metrics", km}};
    }
    const auto& best = result.leaderboard[result.best_candidate];
    summary[name] = {{"trained", true},
                     {"n_examples", result.n_examples},
                     {"n_positive", result.n_positive},
                     {"n_train", result.n_train},
                     {"n_test", result.n_test},
                     {"best_kind", to_string(best.spec.kind)},
                     {"best_hyperparams", best.spec.describe()},
                     {"best_test_macro_f1", best.metrics.macro_f1},
                     {"fallback", result.fallback},
                     {"note", result.note},
                     {"kinds", kinds}};
    log("train: " + name + " best " + std::string(to_string(best.spec.kind)) + " (" + best.spec.describe() +
        ") macro_f1=" + format_fixed(best.metrics.macro_f1, 4));
  }
  write("train/metrics.csv", metrics);
  write("train/summary.json", summary.dump(2) + "\n");
  last_outputs_.push_back("train/metrics.csv");
  last_outputs_.push_back("train/summary.json");
}

void Pipeline::stage_predict() {
  const Corpus corpus = load_run_corpus("predict");
  const MatchSet matches = match_set_from_csv(read("matches.csv", "predict"), corpus);
  std::ostringstream summary;
  summary << "topic,regex_n,refined_n,fraction_positive,model\n";
  for (TopicId t : kAllTopics) {
    const std::string model_rel = topic_file("models", t, ".json");
    classify::PredictionSet preds;
    preds.topic = t;
    std::string kind = "NONE";
    if (fs::exists(path(model_rel))) {
      const auto model = classify::model_from_json(json::parse(read_text_file(path(model_rel))));
      kind = std::string(to_string(model.kind));
      preds = classify::predict_matched(model, matches, corpus, t);
    }
    std::ostringstream rows;
    rows << "decedent_id,prediction\n";
    for (std::size_t i = 0; i < preds.decedent_ids.size(); ++i)
      rows << preds.decedent_ids[i] << ',' << (preds.predictions[i] ? 1 : 0) << '\n';
    const std::string rel = topic_file("predictions", t, ".csv");
    write(rel, rows.str());
    last_outputs_.push_back(rel);
    summary << to_string(t) << ',' << matches.flagged_count(t) << ',' << preds.positive_count << ','
            << format_fixed(preds.fraction_positive(), 3) << ',' << kind << '\n';
  }
  write("predictions/summary.csv", summary.str());
  last_outputs_.push_back("predictions/summary.csv");
}

void Pipeline::stage_analyze() {
  const Corpus corpus = load_run_corpus("analyze");
  const MatchSet matches = match_set_from_csv(read("matches.csv", "analyze"), corpus);
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < corpus.size(); ++i) position.emplace(corpus[i].id, i);
  const double threshold = stats::bonferroni(config_.alpha, config_.bonferroni_m);
  std::vector<std::string> warnings;

  std::map<TopicId, std::vector<bool>> outcome;
  std::map<TopicId, std::size_t> refined;
  for (TopicId t : kAllTopics) {
    std::vector<bool> flags(corpus.size(), false);
    std::size_t n = 0;
    const auto rows = csv::parse(read(topic_file("predictions", t, ".csv"), "analyze"));
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() != 2) continue;
      auto it = position.find(rows[r][0]);
      if (it == position.end()) throw PipelineError("analyze", "prediction for unknown decedent " + rows[r][0]);
      if (rows[r][1] == "1") {
        flags[it->second] = true;
        ++n;
      }
    }
    outcome[t] = std::move(flags);
    refined[t] = n;
  }

  std::ostringstream rates;
  rates << "topic,regex_n,regex_percent,refined_n,fraction_positive,rate_per_1000\n";
  for (TopicId t : kAllTopics) {
    const std::size_t regex_n = matches.flagged_count(t);
    const double frac = regex_n ? static_cast<double>(refined[t]) / static_cast<double>(regex_n) : 0.0;
    rates << to_string(t) << ',' << regex_n << ','
          << format_match_percent(100.0 * static_cast<double>(regex_n) / static_cast<double>(corpus.size())) << ','
          << refined[t] << ',' << format_fixed(frac, 3) << ','
          << stats::format_rate(stats::rate_per_1000(refined[t], corpus.size())) << '\n';
  }
  write("analysis/rates.csv", rates.str());

  std::string odds = stats::odds_csv_header() + "\n";
  std::ostringstream ages;
  ages << "topic,difference,ci_low,ci_high,p_value,df,n_flagged,n_unflagged,zero_variance\n";
  std::vector<stats::RateSeries> series;
  for (TopicId t : config_.stats_topics()) {
    const std::string name(to_string(t));
    try {
      for (const auto& r : stats::odds_table(t, outcome[t], corpus, threshold)) odds += stats::odds_csv_row(r) + "\n";
    } catch (const stats::StatsError& e) {
      warnings.push_back("odds " + name + ": " + e.what());
    }
    try {
      const auto a = stats::age_difference(outcome[t], corpus);
      ages << name << ',' << format_fixed(a.difference, 4) << ',' << format_fixed(a.ci_low, 4) << ','
           << format_fixed(a.ci_high, 4) << ',' << stats::format_p(a.p_value) << ','
           << format_fixed(a.degrees_of_freedom, 2) << ',' << a.n_flagged << ',' << a.n_unflagged << ','
           << (a.zero_variance ? 1 : 0) << '\n';
    } catch (const stats::StatsError& e) {
      warnings.push_back("age " + name + ": " + e.what());
    }
    auto s = stats::yearly_trend(t, outcome[t], corpus, config_.year_range);
    for (const auto& w : s.warnings) warnings.push_back("trend " + name + ": " + w);
    series.push_back(std::move(s));
  }
  write("analysis/odds.csv", odds);
  write("analysis/ages.csv", ages.str());
  write("analysis/trends.csv", stats::trend_csv(series));

  const auto labels = classify::parse_labels_csv(read("annotation/labels.csv", "analyze"));
  std::ostringstream agreement;
  agreement << stats::agreement_csv_header() << '\n';
  for (const auto& batch : load_batches()) {
    const auto st = topic_agreement(batch, labels, config_.agreement_prefix_size);
    if (!st.sufficient) {
      agreement << to_string(batch.topic) << ",0,NA,NA,NA\n";
      continue;
    }
    agreement << stats::agreement_csv_row(batch.topic, st.result) << '\n';
  }
  write("analysis/agreement.csv", agreement.str());

  std::string warn_text;
  for (const auto& w : warnings) warn_text += w + "\n";
  write("analysis/warnings.txt", warn_text);
  last_outputs_ = {"analysis/rates.csv", "analysis/odds.csv",      "analysis/ages.csv",
                   "analysis/trends.csv", "analysis/agreement.csv", "analysis/warnings.txt"};
}

void Pipeline::stage_report() {
  const Corpus corpus = load_run_corpus("report");
  const MatchSet matches = match_set_from_csv(read("matches.csv", "report"), corpus);
  const auto summary = demographic_summary(corpus);
  write("report/table1_demographics.csv", demographic_summary_csv(summary));

  const auto labels = classify::parse_labels_csv(read("annotation/labels.csv", "report"));
  std::vector<classify::ConsensusLabel> consensus;
  try {
    consensus = classify::consensus_labels(labels);
  } catch (const std::exception& e) {
    throw PipelineError("report", e.what());
  }
  const auto batches = load_batches();
  const double total = static_cast<double>(corpus.size());
  std::ostringstream t2;
  t2 << "topic,label,regex_count,percent_of_total,sample_n,sample_relevant,sample_percent_relevant,agreement_n,"
        "percent_agreement,kappa,kappa_p_value\n";
  for (const auto& batch : batches) {
    const TopicId t = batch.topic;
    std::set<std::string> in_batch;
    for (const auto& item : batch.items) in_batch.insert(item.decedent_id);
    std::size_t labeled = 0, relevant = 0;
    for (const auto& c : consensus)
      if (c.topic == t && in_batch.count(c.decedent_id)) {
        ++labeled;
        relevant += c.relevant;
      }
    const auto st = topic_agreement(batch, labels, config_.agreement_prefix_size);
    const std::size_t n = matches.flagged_count(t);
    t2 << to_string(t) << ',' << csv::escape(topic_label(t)) << ',' << n << ','
       << format_match_percent(100.0 * static_cast<double>(n) / total) << ',' << labeled << ',' << relevant << ','
       << (labeled ? format_fixed(100.0 * static_cast<double>(relevant) / static_cast<double>(labeled), 1) : "NA")
       << ',' << (st.sufficient ? st.result.n_items : 0) << ','
       << (st.sufficient ? format_fixed(100.0 * st.result.percent_agreement, 1) : "NA") << ','
       << (st.sufficient ? metrics_cell(st.result.kappa, 3) : "NA") << ','
       << (st.sufficient ? stats::format_p(st.result.p_value) : "NA") << '\n';
  }
  t2 << "ANY,\"Total narratives with at least one match\"," << matches.decedents_with_any_match << ','
     << format_match_percent(100.0 * static_cast<double>(matches.decedents_with_any_match) / total)
     << ",,,,,,,\n";
  t2 << "ANY_FIELD,\"Narrative fields with at least one match (percent of fields scanned)\","
     << matches.fields_with_any_match << ','
     << format_match_percent(matches.fields_scanned ? 100.0 * static_cast<double>(matches.fields_with_any_match) /
                                                          static_cast<double>(matches.fields_scanned)
                                                    : 0.0)
     << ",,,,,,,\n";
  write("report/table2_matches.csv", t2.str());

  write("report/supp_table1_metrics.csv", read("train/metrics.csv", "report"));

  const auto rate_rows = csv::parse(read("analysis/rates.csv", "report"));
  std::ostringstream s2;
  s2 << "topic,label,regex_n,refined_n,fraction_positive,rate_per_1000\n";
  for (std::size_t r = 1; r < rate_rows.size(); ++r) {
    const auto& row = rate_rows[r];
    if (row.size() != 6) continue;
    s2 << row[0] << ',' << csv::escape(topic_label(parse_topic(row[0]))) << ',' << row[1] << ',' << row[3] << ','
       << row[4] << ',' << row[5] << '\n';
  }
  write("report/supp_table2_predictions.csv", s2.str());
  write("report/table3_odds.csv", read("analysis/odds.csv", "report"));
  write("report/fig1_trends.csv", read("analysis/trends.csv", "report"));

  const json topics = json::parse(read("topics/topics.json", "report"));
  const auto with_narrative = static_cast<std::size_t>(
      std::count_if(corpus.begin(), corpus.end(), [](const DecedentRecord& r) { return r.narratives.has_narrative(); }));
  std::ostringstream txt;
  txt << "isolex run " << manifest_.run_id << " (tool " << kToolVersion << ", seed set " << config_.seed_set << ")\n\n";
  txt << "Corpus: " << corpus.size() << " decedents, "
      << format_count_percent(with_narrative, 100.0 * static_cast<double>(with_narrative) / total)
      << " with a narrative\n";
  txt << "Topic model: " << topics["n_topics"].get<std::size_t>() << " topics over "
      << topics["n_docs"].get<std::size_t>() << " summaries, UMass coherence "
      << format_fixed(topics["coherence"].get<double>(), 4) << "\n";
  const auto& hp = topics["hyperparams"];
  txt << "  best grid point: n_components=" << hp["n_components"].get<std::size_t>()
      << " n_clusters=" << hp["n_clusters"].get<std::size_t>()
      << " min_cluster_size=" << hp["min_cluster_size"].get<std::size_t>() << "\n\n";
  txt << "Lexicon matches and refined predictions:\n";
  for (std::size_t r = 1; r < rate_rows.size(); ++r) {
    const auto& row = rate_rows[r];
    if (row.size() != 6) continue;
    txt << "  " << topic_label(parse_topic(row[0])) << ": regex " << row[1] << " (" << row[2] << "%), refined "
        << row[3] << " (fraction " << row[4] << "), " << row[5] << " per 1000\n";
  }
  txt << "  any topic: " << matches.decedents_with_any_match << " decedents\n\n";
  const json train = json::parse(read("train/summary.json", "report"));
  txt << "Classifiers (held-out split):\n";
  for (const auto& [name, s] : train.items()) {
    if (!s["trained"].get<bool>()) {
      txt << "  " << name << ": " << s["note"].get<std::string>() << "\n";
      continue;
    }
    txt << "  " << name << ": " << s["best_kind"].get<std::string>() << " " << s["best_hyperparams"].get<std::string>()
        << ", macro F1 " << format_fixed(s["best_test_macro_f1"].get<double>(), 3) << " (" << s["n_train"].get<std::size_t>()
        << " train / " << s["n_test"].get<std::size_t>() << " test)";
    if (s["fallback"].get<bool>()) txt << " [" << s["note"].get<std::string>() << "]";
    txt << "\n";
  }
  const std::string warnings = read("analysis/warnings.txt", "report");
  txt << "\nBonferroni threshold: " << format_fixed(stats::bonferroni(config_.alpha, config_.bonferroni_m), 6) << " ("
      << config_.bonferroni_m << " tests)\n";
  if (!warnings.empty()) txt << "\nWarnings:\n" << warnings;
  write("report/summary.txt", txt.str());

  last_outputs_ = {"report/table1_demographics.csv", "report/table2_matches.csv",       "report/supp_table1_metrics.csv",
                   "report/supp_table2_predictions.csv", "report/table3_odds.csv", "report/fig1_trends.csv",
                   "report/summary.txt"};
}

}  // namespace isolex::pipeline
