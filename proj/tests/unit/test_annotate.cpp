#include <gtest/gtest.h>

#include <filesystem>
#include <future>
#include <thread>

#include "isolex/annotate.hpp"
#include "isolex/stats.hpp"
#include "isolex/util.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace isolex;
using namespace isolex::annotate;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_labels(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "isolex_annotate_test";
  fs::create_directories(dir);
  fs::remove(dir / name);
  return dir / name;
}

std::vector<AnnotationBatch> batches(std::size_t n) {
  AnnotationBatch b;
  b.topic = TopicId::BreakUp;
  for (std::size_t i = 0; i < n; ++i)
    b.items.push_back({"D" + std::to_string(i), "after a recent break up " + std::to_string(i), {{8, 23}}});
  b.size = n;
  AnnotationBatch pet;
  pet.topic = TopicId::PetLoss;
  pet.items.push_back({"P0", "his dog died", {{4, 12}}});
  pet.size = 1;
  return {b, pet};
}

AnnotationService::Clock fixed_clock() {
  auto t = std::make_shared<std::int64_t>(1704067200);
  return [t] { return (*t)++; };
}

json body(const std::string& id, const std::string& annotator, bool relevant, const char* topic = "BREAK_UP") {
  return {{"decedent_id", id}, {"topic", topic}, {"annotator_id", annotator}, {"relevant", relevant}};
}

Response post(AnnotationService& s, const json& b) { return s.handle("POST", "/label", {}, b.dump()); }

json parsed(const Response& r) { return json::parse(r.body); }

}  // namespace

TEST(Annotate, QueueAdvancesAfterLabel) {
  AnnotationService s(batches(3), fresh_labels("queue.csv"), 50, fixed_clock());
  json q = parsed(s.handle("GET", "/queue/BREAK_UP", {{"annotator", "A1"}}, ""));
  EXPECT_EQ(q["decedent_id"], "D0");
  EXPECT_EQ(q["position"], 0);
  EXPECT_EQ(q["total"], 3);
  EXPECT_EQ(q["spans"][0], json({8, 23}));
  const Response r = post(s, body("D0", "A1", true));
  EXPECT_EQ(r.status, 201);
  EXPECT_EQ(parsed(r)["timestamp"], "2024-01-01T00:00:00Z");
  EXPECT_EQ(parsed(s.handle("GET", "/queue/BREAK_UP", {{"annotator", "A1"}}, ""))["decedent_id"], "D1");
  EXPECT_EQ(parsed(s.handle("GET", "/queue/BREAK_UP", {{"annotator", "A2"}}, ""))["decedent_id"], "D0");
  post(s, body("D1", "A1", false));
  post(s, body("D2", "A1", false));
  const json done = parsed(s.handle("GET", "/queue/BREAK_UP", {{"annotator", "A1"}}, ""));
  EXPECT_TRUE(done["complete"].get<bool>());

  const json topics = parsed(s.handle("GET", "/topics", {}, ""));
  ASSERT_EQ(topics.size(), 2u);
  EXPECT_EQ(topics[0]["topic"], "BREAK_UP");
  EXPECT_EQ(topics[0]["labeled"]["A1"], 3);
  EXPECT_EQ(topics[1]["total"], 1);
}

TEST(Annotate, ErrorStatuses) {
  AnnotationService s(batches(2), fresh_labels("errors.csv"), 50, fixed_clock());
  EXPECT_EQ(s.handle("GET", "/queue/NOT_A_TOPIC", {{"annotator", "A1"}}, "").status, 404);
  EXPECT_EQ(s.handle("GET", "/queue/DIVORCE", {{"annotator", "A1"}}, "").status, 404);
  EXPECT_EQ(s.handle("GET", "/queue/BREAK_UP", {}, "").status, 400);
  EXPECT_EQ(s.handle("GET", "/nowhere", {}, "").status, 404);
  EXPECT_EQ(s.handle("POST", "/label", {}, "{not json").status, 400);
  EXPECT_EQ(post(s, {{"decedent_id", "D0"}, {"topic", "BREAK_UP"}, {"annotator_id", "A1"}}).status, 400);
  EXPECT_EQ(post(s, {{"decedent_id", "D0"}, {"topic", "BREAK_UP"}, {"annotator_id", "A1"}, {"relevant", "yes"}}).status,
            400);
  json extra = body("D0", "A1", true);
  extra["note"] = "x";
  EXPECT_EQ(post(s, extra).status, 400);
  EXPECT_EQ(post(s, body("D0", "A,1", true)).status, 400);
  EXPECT_EQ(post(s, body("D0", "A1", true, "DIVORCE")).status, 404);
  EXPECT_EQ(post(s, body("NOPE", "A1", true)).status, 404);
  EXPECT_TRUE(s.labels().empty());
}

TEST(Annotate, ConflictAndOverwrite) {
  const fs::path path = fresh_labels("conflict.csv");
  AnnotationService s(batches(2), path, 50, fixed_clock());
  EXPECT_EQ(post(s, body("D0", "A1", true)).status, 201);
  EXPECT_EQ(post(s, body("D0", "A1", false)).status, 409);
  json again = body("D0", "A1", false);
  again["overwrite"] = true;
  EXPECT_EQ(post(s, again).status, 201);
  const auto latest = classify::latest_labels(s.labels());
  ASSERT_EQ(latest.size(), 1u);
  EXPECT_FALSE(latest[0].relevant);
  EXPECT_EQ(classify::parse_labels_csv(read_text_file(path)).size(), 2u);
}

TEST(Annotate, AgreementEndpoint) {
  AnnotationService s(batches(60), fresh_labels("agreement.csv"), 50, fixed_clock());
  EXPECT_EQ(parsed(s.handle("GET", "/agreement/BREAK_UP", {}, ""))["status"], "insufficient_annotators");
  for (int i = 0; i < 50; ++i) {
    post(s, body("D" + std::to_string(i), "A1", true));
    post(s, body("D" + std::to_string(i), "A2", true));
  }
  const json all_pos = parsed(s.handle("GET", "/agreement/BREAK_UP", {}, ""));
  EXPECT_EQ(all_pos["n"], 50);
  EXPECT_DOUBLE_EQ(all_pos["percent"].get<double>(), 1.0);
  EXPECT_TRUE(all_pos["kappa_na"].get<bool>());
  EXPECT_TRUE(all_pos["kappa"].is_null());

  AnnotationService mixed(batches(60), fresh_labels("agreement_mixed.csv"), 50, fixed_clock());
  std::vector<bool> a, b;
  for (int i = 0; i < 55; ++i) {
    const bool x = i % 3 == 0, y = i % 4 == 0;
    post(mixed, body("D" + std::to_string(i), "A1", x));
    post(mixed, body("D" + std::to_string(i), "A2", y));
    if (i < 50) a.push_back(x), b.push_back(y);
  }
  const json k = parsed(mixed.handle("GET", "/agreement/BREAK_UP", {}, ""));
  const auto offline = stats::cohen_kappa(a, b);
  EXPECT_EQ(k["n"], 50);
  EXPECT_DOUBLE_EQ(k["kappa"].get<double>(), *offline.kappa);
  EXPECT_DOUBLE_EQ(k["p_value"].get<double>(), *offline.p_value);
}

TEST(Annotate, ExportAndRestart) {
  const fs::path path = fresh_labels("restart.csv");
  {
    AnnotationService s(batches(3), path, 50, fixed_clock());
    post(s, body("D0", "A1", true));
    post(s, body("D1", "A1", false));
    const Response e = s.handle("GET", "/export/labels", {}, "");
    EXPECT_EQ(e.content_type, "text/csv");
    EXPECT_EQ(e.body, read_text_file(path));
  }
  AnnotationService restarted(batches(3), path, 50, fixed_clock());
  EXPECT_EQ(restarted.labels().size(), 2u);
  EXPECT_EQ(parsed(restarted.handle("GET", "/queue/BREAK_UP", {{"annotator", "A1"}}, ""))["decedent_id"], "D2");
  EXPECT_EQ(post(restarted, body("D0", "A1", true)).status, 409);
}

TEST(Annotate, ConcurrentWritersAreSerialized) {
  const fs::path path = fresh_labels("concurrent.csv");
  AnnotationService s(batches(40), path, 50, fixed_clock());
  std::vector<std::thread> threads;
  for (int w = 0; w < 4; ++w)
    threads.emplace_back([&, w] {
      for (int i = 0; i < 40; ++i) post(s, body("D" + std::to_string(i), "A" + std::to_string(w), i % 2 == 0));
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(classify::parse_labels_csv(read_text_file(path)).size(), 160u);
}

TEST(Annotate, HttpRoundTrip) {
  const fs::path path = fresh_labels("http.csv");
  AnnotationService s(batches(10), path, 50, fixed_clock());
  std::promise<int> port_promise;
  std::function<void()> stop;
  ServeOptions opt;
  opt.port = 0;
  opt.on_ready = [&](int port, std::function<void()> stopper) {
    stop = std::move(stopper);
    port_promise.set_value(port);
  };
  std::thread server([&] { serve(s, opt); });
  const int port = port_promise.get_future().get();

  httplib::Client client("127.0.0.1", port);
  std::vector<bool> a, b;
  for (int i = 0; i < 10; ++i) {
    for (const char* who : {"A1", "A2"}) {
      auto q = client.Get(("/queue/BREAK_UP?annotator=" + std::string(who)).c_str());
      ASSERT_TRUE(q);
      ASSERT_EQ(q->status, 200);
      const std::string id = json::parse(q->body)["decedent_id"];
      EXPECT_EQ(id, "D" + std::to_string(i));
      const bool label = who[1] == '1' ? i % 2 == 0 : i % 3 == 0;
      (who[1] == '1' ? a : b).push_back(label);
      auto r = client.Post("/label", body(id, who, label).dump(), "application/json");
      ASSERT_TRUE(r);
      EXPECT_EQ(r->status, 201);
    }
  }
  auto exported = client.Get("/export/labels");
  ASSERT_TRUE(exported);
  const auto rows = classify::parse_labels_csv(exported->body);
  EXPECT_EQ(rows.size(), 20u);
  auto agreement = client.Get("/agreement/BREAK_UP");
  ASSERT_TRUE(agreement);
  EXPECT_DOUBLE_EQ(json::parse(agreement->body)["kappa"].get<double>(), *stats::cohen_kappa(a, b).kappa);
  auto missing = client.Get("/queue/DIVORCE?annotator=A1");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);

  stop();
  server.join();
}
