#include "isolex/annotate.hpp"

#include <chrono>
#include <fstream>
#include <set>

#include "isolex/pipeline.hpp"
#include "isolex/util.hpp"
#include "json.hpp"

namespace isolex::annotate {

using nlohmann::json;

namespace {

Response json_response(int status, const json& body) { return {status, "application/json", body.dump() + "\n"}; }

Response error(int status, const std::string& message) { return json_response(status, {{"error", message}}); }

std::int64_t system_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

AnnotationService::AnnotationService(std::vector<AnnotationBatch> batches, std::filesystem::path labels_path,
                                     std::size_t agreement_prefix, Clock clock)
    : batches_(std::move(batches)),
      labels_path_(std::move(labels_path)),
      agreement_prefix_(agreement_prefix),
      clock_(clock ? std::move(clock) : Clock(system_seconds)) {
  if (std::filesystem::exists(labels_path_)) rows_ = classify::parse_labels_csv(read_text_file(labels_path_));
}

std::vector<classify::LabelRow> AnnotationService::labels() const {
  std::lock_guard lock(mutex_);
  return rows_;
}

const AnnotationBatch* AnnotationService::find_batch(const std::string& topic) const {
  const auto id = parse_enum<TopicId>(topic);
  if (!id) return nullptr;
  for (const auto& b : batches_)
    if (b.topic == *id) return &b;
  return nullptr;
}

Response AnnotationService::handle(const std::string& method, const std::string& path,
                                   const std::map<std::string, std::string>& query, const std::string& body) {
  auto tail = [&](const std::string& prefix) -> std::optional<std::string> {
    if (path.size() <= prefix.size() || path.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
    const std::string rest = path.substr(prefix.size());
    if (rest.find('/') != std::string::npos) return std::nullopt;
    return rest;
  };
  if (method == "GET") {
    if (path == "/topics") return topics();
    if (path == "/export/labels") return export_labels();
    if (auto t = tail("/queue/")) return queue(*t, query);
    if (auto t = tail("/agreement/")) return agreement(*t);
  } else if (method == "POST" && path == "/label") {
    return post_label(body);
  }
  return error(404, "no route for " + method + " " + path);
}

Response AnnotationService::topics() const {
  std::lock_guard lock(mutex_);
  const auto latest = classify::latest_labels(rows_);
  json out = json::array();
  for (const auto& b : batches_) {
    std::map<std::string, std::size_t> per_annotator;
    for (const auto& r : latest)
      if (r.topic == b.topic) ++per_annotator[r.annotator_id];
    out.push_back({{"topic", to_string(b.topic)},
                   {"label", topic_label(b.topic)},
                   {"total", b.size},
                   {"labeled", per_annotator}});
  }
  return json_response(200, out);
}

Response AnnotationService::queue(const std::string& topic, const std::map<std::string, std::string>& query) const {
  const AnnotationBatch* batch = find_batch(topic);
  if (!batch) return error(404, "unknown topic " + topic);
  auto it = query.find("annotator");
  if (it == query.end() || it->second.empty()) return error(400, "annotator query parameter is required");
  const std::string& annotator = it->second;
  std::set<std::string> done;
  {
    std::lock_guard lock(mutex_);
    for (const auto& r : rows_)
      if (r.topic == batch->topic && r.annotator_id == annotator) done.insert(r.decedent_id);
  }
  for (std::size_t i = 0; i < batch->items.size(); ++i) {
    const auto& item = batch->items[i];
    if (done.count(item.decedent_id)) continue;
    json spans = json::array();
    for (const auto& s : item.spans) spans.push_back({s.start, s.end});
    return json_response(200, {{"decedent_id", item.decedent_id},
                               {"topic", to_string(batch->topic)},
                               {"text", item.text},
                               {"spans", spans},
                               {"position", i},
                               {"total", batch->items.size()}});
  }
  return json_response(200, {{"complete", true}, {"topic", to_string(batch->topic)}, {"total", batch->items.size()}});
}

Response AnnotationService::post_label(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    return error(400, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) return error(400, "label body must be an object");
  for (const char* key : {"decedent_id", "topic", "annotator_id"})
    if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty())
      return error(400, std::string("missing or invalid field ") + key);
  if (!j.contains("relevant") || !j["relevant"].is_boolean()) return error(400, "relevant must be a boolean");
  const bool overwrite = j.contains("overwrite") && j["overwrite"].is_boolean() && j["overwrite"].get<bool>();
  for (const auto& [key, value] : j.items())
    if (key != "decedent_id" && key != "topic" && key != "annotator_id" && key != "relevant" && key != "overwrite")
      return error(400, "unknown field " + key);

  classify::LabelRow row;
  row.decedent_id = j["decedent_id"].get<std::string>();
  row.annotator_id = j["annotator_id"].get<std::string>();
  row.relevant = j["relevant"].get<bool>();
  if (row.annotator_id.find_first_of(",\"\r\n") != std::string::npos)
    return error(400, "annotator_id may not contain commas, quotes or newlines");
  const AnnotationBatch* batch = find_batch(j["topic"].get<std::string>());
  if (!batch) return error(404, "unknown topic " + j["topic"].get<std::string>());
  row.topic = batch->topic;
  bool known = false;
  for (const auto& item : batch->items) known = known || item.decedent_id == row.decedent_id;
  if (!known) return error(404, "decedent " + row.decedent_id + " is not in the " + std::string(to_string(row.topic)) + " batch");

  std::lock_guard lock(mutex_);
  for (const auto& r : rows_) {
    if (r.decedent_id == row.decedent_id && r.topic == row.topic && r.annotator_id == row.annotator_id && !overwrite)
      return error(409, "label exists; resend with \"overwrite\": true to replace it");
  }
  row.timestamp = pipeline::rfc3339_utc(clock_());
  const bool fresh = !std::filesystem::exists(labels_path_) || std::filesystem::file_size(labels_path_) == 0;
  if (!labels_path_.parent_path().empty()) std::filesystem::create_directories(labels_path_.parent_path());
  std::ofstream out(labels_path_, std::ios::app | std::ios::binary);
  if (!out) return error(500, "cannot write " + labels_path_.string());
  if (fresh) out << classify::kLabelsHeader << '\n';
  out << classify::labels_csv_row(row);
  out.flush();
  if (!out) return error(500, "cannot write " + labels_path_.string());
  rows_.push_back(row);
  return json_response(201, {{"decedent_id", row.decedent_id},
                             {"topic", to_string(row.topic)},
                             {"annotator_id", row.annotator_id},
                             {"relevant", row.relevant},
                             {"timestamp", row.timestamp}});
}

Response AnnotationService::agreement(const std::string& topic) const {
  const AnnotationBatch* batch = find_batch(topic);
  if (!batch) return error(404, "unknown topic " + topic);
  std::vector<classify::LabelRow> rows;
  {
    std::lock_guard lock(mutex_);
    rows = rows_;
  }
  const auto st = pipeline::topic_agreement(*batch, rows, agreement_prefix_);
  if (!st.sufficient)
    return json_response(200, {{"topic", to_string(batch->topic)},
                               {"status", "insufficient_annotators"},
                               {"n_annotators", st.n_annotators}});
  return json_response(200, {{"topic", to_string(batch->topic)},
                             {"annotators", {st.annotator_a, st.annotator_b}},
                             {"n", st.result.n_items},
                             {"percent", st.result.percent_agreement},
                             {"kappa", nullable(st.result.kappa)},
                             {"kappa_na", !st.result.kappa.has_value()},
                             {"p_value", nullable(st.result.p_value)}});
}

Response AnnotationService::export_labels() const {
  std::lock_guard lock(mutex_);
  return {200, "text/csv", classify::labels_csv(rows_)};
}

}  // namespace isolex::annotate
