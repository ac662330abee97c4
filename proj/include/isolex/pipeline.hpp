#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isolex/classify.hpp"
#include "isolex/corpus.hpp"
#include "isolex/lexicon.hpp"
#include "isolex/stats.hpp"
#include "isolex/topicmodel.hpp"
#include "json.hpp"

namespace isolex::pipeline {

inline constexpr std::string_view kToolVersion = "0.1.0";

class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& message)
      : std::runtime_error("[" + stage + "] " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// ---------------------------------------------------------------------------
// Configuration

struct SeedSet {
  std::uint64_t corpus = 42;
  std::uint64_t topic = 7;
  std::uint64_t sample = 11;
  std::uint64_t annotators = 23;
  std::uint64_t split = 13;
  std::uint64_t model = 17;
  std::uint64_t bootstrap = 19;

  bool operator==(const SeedSet&) const = default;
};

struct BootstrapConfig {
  std::size_t iterations = 1000;
  double fraction = 0.8;
  bool test_only = false;  // default: bootstrap over every annotated sample
};

/// Stand-in annotators that label from planted ground truth.
struct SimulatedAnnotators {
  bool enabled = false;
  double error_rate = 0.0;  // per-label flip probability
};

struct RunConfig {
  std::optional<std::filesystem::path> corpus_path;
  std::optional<SyntheticConfig> synthetic;
  std::filesystem::path lexicon_path;
  YearRange year_range{};
  std::vector<topic::TopicHyperParams> topic_grid;  // seeds filled from the seed set
  std::size_t topic_min_df = 2;
  classify::HyperGrid classifier_grid;
  double train_fraction = 0.8;
  std::size_t annotation_sample_size = 100;
  std::size_t agreement_prefix_size = 50;
  BootstrapConfig bootstrap;
  std::map<std::string, SeedSet> seeds{{"default", SeedSet{}}};
  std::string seed_set = "default";
  std::filesystem::path output_dir = "run";
  int bonferroni_m = 30;
  double alpha = 0.05;
  bool include_pet_loss_in_stats = false;
  std::optional<std::filesystem::path> labels_path;
  SimulatedAnnotators simulate_annotators;
  unsigned workers = 1;

  const SeedSet& active_seeds() const;
  /// Topics analysed by the stats stage.
  std::vector<TopicId> stats_topics() const;
  /// Throws PipelineError("config", ...) on invalid values or missing paths.
  void validate() const;
};

/// Relative paths resolve against `base_dir`. Unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);
/// Fully resolved form, also written into the run directory.
nlohmann::json config_to_json(const RunConfig& config);
nlohmann::json synthetic_to_json(const SyntheticConfig& config);
SyntheticConfig synthetic_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Manifest

struct StageRecord {
  bool completed = false;
  std::map<std::string, std::string> inputs;   // name -> sha256
  std::map<std::string, std::string> outputs;  // run-relative path -> sha256
  std::string note;
};

struct RunManifest {
  std::string run_id;
  std::string tool_version{kToolVersion};
  std::string config_digest;
  std::string seed_set;
  std::string status;  // "complete", "awaiting_labels", "failed: <stage>", "partial"
  std::map<std::string, StageRecord> stages;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

/// Stage names in execution order.
const std::vector<std::string>& stage_names();

enum class StageOutcome { Ran, Skipped, Awaiting };

class Pipeline {
 public:
  explicit Pipeline(RunConfig config);

  const RunConfig& config() const { return config_; }
  const std::filesystem::path& run_dir() const { return config_.output_dir; }
  const RunManifest& manifest() const { return manifest_; }

  /// Runs one stage when its upstream stages are complete; skipped when the
  /// recorded input and output digests still match.
  StageOutcome run_stage(const std::string& name);
  /// Every stage in order; stops (status "awaiting_labels") when no labels exist.
  RunManifest run_all();
  /// Copies a validated labels CSV into the run and records it.
  void import_labels(const std::filesystem::path& labels_csv);

  /// Run-relative artifact paths.
  std::filesystem::path path(const std::string& relative) const { return config_.output_dir / relative; }

  std::vector<AnnotationBatch> load_batches() const;

  std::function<void(const std::string&)> log = [](const std::string&) {};

 private:
  using Inputs = std::map<std::string, std::string>;
  Inputs stage_inputs(const std::string& name) const;
  bool up_to_date(const std::string& name, const Inputs& inputs) const;
  void record(const std::string& name, Inputs inputs, const std::vector<std::string>& outputs, std::string note = {});
  void save_manifest() const;
  void write(const std::string& relative, std::string_view content) const;
  std::string read(const std::string& relative, const std::string& stage) const;

  void stage_corpus();
  void stage_topic_model();
  void stage_match();
  void stage_sample();
  bool stage_labels();
  void stage_train();
  void stage_predict();
  void stage_analyze();
  void stage_report();

  Corpus load_run_corpus(const std::string& stage) const;

  RunConfig config_;
  RunManifest manifest_;
  std::vector<std::string> last_outputs_;
};

// ---------------------------------------------------------------------------
// Shared helpers

/// le_summary and cme_summary joined; nullopt when neither is present.
std::optional<std::string> summary_text(const DecedentRecord& record);

nlohmann::json batch_to_json(const AnnotationBatch& batch);
AnnotationBatch batch_from_json(const nlohmann::json& j);

/// Deterministic RFC 3339 UTC timestamp for seconds since the Unix epoch.
std::string rfc3339_utc(std::int64_t seconds);

/// Labels from ground truth: the first `prefix` items are coded by A1 and
/// A2, the rest by A1; disagreements get an ADJUDICATED row.
std::vector<classify::LabelRow> simulate_labels(const std::vector<AnnotationBatch>& batches, const Corpus& corpus,
                                                std::size_t prefix, double error_rate, std::uint64_t seed);

struct AgreementStatus {
  bool sufficient = false;
  std::size_t n_annotators = 0;
  std::string annotator_a, annotator_b;
  stats::AgreementResult result;
};

/// Kappa over the first `prefix` batch items coded by both of the first two
/// annotators (in label order) of this topic. ADJUDICATED rows are ignored.
AgreementStatus topic_agreement(const AnnotationBatch& batch, const std::vector<classify::LabelRow>& labels,
                                std::size_t prefix);

}  // namespace isolex::pipeline
