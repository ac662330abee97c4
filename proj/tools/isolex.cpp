#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "isolex/annotate.hpp"
#include "isolex/pipeline.hpp"
#include "isolex/util.hpp"

namespace fs = std::filesystem;
using namespace isolex;

namespace {

struct Globals {
  std::string config;
  std::string output;
  std::string seed_set;
  unsigned workers = 0;
  bool quiet = false;
};

pipeline::Pipeline open_pipeline(const Globals& g) {
  pipeline::RunConfig c = pipeline::load_config(g.config);
  if (!g.output.empty()) c.output_dir = fs::absolute(g.output);
  if (!g.seed_set.empty()) c.seed_set = g.seed_set;
  if (g.workers) c.workers = g.workers;
  pipeline::Pipeline p(std::move(c));
  if (!g.quiet) p.log = [](const std::string& line) { std::cerr << line << '\n'; };
  return p;
}

// Runs the named stage after bringing every upstream stage up to date.
int run_through(const Globals& g, const std::string& target) {
  auto p = open_pipeline(g);
  for (const auto& name : pipeline::stage_names()) {
    if (target != "topic-model" && name == "topic-model" && target != "report") continue;
    if (p.run_stage(name) == pipeline::StageOutcome::Awaiting) return 3;
    if (name == target) break;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"isolex: lexicon, topic model and classifier pipeline for death-narrative themes"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--output", g.output, "Run directory; overrides output_dir");
  app.add_option("--seed-set", g.seed_set, "Named seed set from the configuration");
  app.add_option("--workers", g.workers, "Worker threads; overrides the configuration");
  app.add_flag("--quiet", g.quiet, "No progress output");

  std::string corpus_out;
  auto* gen = app.add_subcommand("gen-corpus", "Generate (or load) the corpus into the run directory");
  gen->add_option("--out", corpus_out, "Also copy the corpus JSONL here");

  app.add_subcommand("topic-model", "Grid-search the topic model over circumstance summaries");
  app.add_subcommand("match", "Apply the lexicon to every narrative");
  app.add_subcommand("sample", "Draw annotation batches from the lexicon matches");

  auto* serve = app.add_subcommand("serve-annotate", "Serve the annotation API over the run's batches");
  annotate::ServeOptions serve_opts;
  std::string static_dir;
  serve->add_option("--host", serve_opts.host, "Bind address")->capture_default_str();
  serve->add_option("--port", serve_opts.port, "Port")->capture_default_str();
  serve->add_option("--static-dir", static_dir, "Directory mounted at /ui")->check(CLI::ExistingDirectory);

  std::string labels_file;
  auto* imp = app.add_subcommand("import-labels", "Validate and import a labels CSV");
  imp->add_option("--labels", labels_file, "Labels CSV")->required()->check(CLI::ExistingFile);

  app.add_subcommand("train", "Train and select classifiers per topic");
  app.add_subcommand("predict", "Apply the selected classifiers to lexicon matches");
  app.add_subcommand("analyze", "Odds ratios, age differences, rates, trends and agreement");
  app.add_subcommand("report", "Write report tables");
  app.add_subcommand("run", "Run every stage; stops when labels are missing");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      auto p = open_pipeline(g);
      p.run_stage("corpus");
      if (!corpus_out.empty()) fs::copy_file(p.path("corpus.jsonl"), corpus_out, fs::copy_options::overwrite_existing);
      return 0;
    }
    if (serve->parsed()) {
      auto p = open_pipeline(g);
      for (const auto& name : {"corpus", "match", "sample"}) p.run_stage(name);
      if (!static_dir.empty()) serve_opts.static_dir = static_dir;
      annotate::AnnotationService service(p.load_batches(), p.path("annotation/labels.csv"),
                                          p.config().agreement_prefix_size);
      std::cerr << "serving " << p.run_dir().string() << " on http://" << serve_opts.host << ':' << serve_opts.port
                << '\n';
      annotate::serve(service, serve_opts);
      return 0;
    }
    if (imp->parsed()) {
      auto p = open_pipeline(g);
      for (const auto& name : {"corpus", "match", "sample"}) p.run_stage(name);
      p.import_labels(labels_file);
      return 0;
    }
    if (app.got_subcommand("run")) {
      auto p = open_pipeline(g);
      const auto m = p.run_all();
      std::cout << "run " << m.run_id << ": " << m.status << '\n';
      return m.status == "complete" ? 0 : 3;
    }
    for (const char* stage : {"topic-model", "match", "sample", "train", "predict", "analyze", "report"})
      if (app.got_subcommand(stage)) return run_through(g, stage);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
