#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "isolex/classify.hpp"
#include "isolex/lexicon.hpp"

namespace isolex::annotate {

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// HTTP-independent core of the annotation service. Labels are appended to
/// `labels_path`; rows already there are loaded on construction.
class AnnotationService {
 public:
  using Clock = std::function<std::int64_t()>;  // seconds since the epoch

  AnnotationService(std::vector<AnnotationBatch> batches, std::filesystem::path labels_path,
                    std::size_t agreement_prefix, Clock clock = {});

  Response handle(const std::string& method, const std::string& path,
                  const std::map<std::string, std::string>& query, const std::string& body);

  std::vector<classify::LabelRow> labels() const;

 private:
  Response topics() const;
  Response queue(const std::string& topic, const std::map<std::string, std::string>& query) const;
  Response post_label(const std::string& body);
  Response agreement(const std::string& topic) const;
  Response export_labels() const;
  const AnnotationBatch* find_batch(const std::string& topic) const;

  std::vector<AnnotationBatch> batches_;
  std::filesystem::path labels_path_;
  std::size_t agreement_prefix_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::vector<classify::LabelRow> rows_;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> static_dir;
  /// Called once listening; port 0 binds a free port, reported here.
  std::function<void(int port, std::function<void()> stop)> on_ready;
};

/// Blocks until the server stops. Throws std::runtime_error when binding fails.
void serve(AnnotationService& service, const ServeOptions& options);

}  // namespace isolex::annotate
