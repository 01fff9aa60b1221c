#include <thread>

#include <httplib.h>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "batchline/http_service.hpp"
#include "oracles.hpp"

namespace batchline {
namespace {

using nlohmann::json;

constexpr const char* kS1 = "stups:sample/sample1";
constexpr const char* kS2 = "stups:sample/sample2";

class Http : public ::testing::Test {
protected:
    void SetUp() override {
        SessionConfig config{testing::source_dir() / "schema" / "drug-domain.json", testing::fixture("vd/rules.dsl"),
                             testing::fixture("vd/dataset.json"), std::nullopt, true, {}};
        service = std::make_unique<HttpService>(Session::open(config), ServiceOptions{.port = 0});
        port = service->start();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
    }
    void TearDown() override { service->stop(); }

    json get(const std::string& path, int expected = 200) {
        auto res = client->Get(path);
        EXPECT_TRUE(res) << path;
        if (!res) return {};
        EXPECT_EQ(res->status, expected) << path << ": " << res->body;
        return json::parse(res->body);
    }
    json post(const std::string& path, const json& body, int expected) {
        auto res = client->Post(path, body.dump(), "application/json");
        EXPECT_TRUE(res) << path;
        if (!res) return {};
        EXPECT_EQ(res->status, expected) << res->body;
        return json::parse(res->body);
    }

    std::unique_ptr<HttpService> service;
    std::unique_ptr<httplib::Client> client;
    int port = 0;
};

TEST_F(Http, Health) {
    auto h = get("/health");
    EXPECT_EQ(h["status"], "ok");
    EXPECT_GT(h["graphSize"].get<int>(), 0);
    EXPECT_EQ(h["reportStale"], false);
}

TEST_F(Http, Schema) {
    auto s = get("/schema");
    EXPECT_EQ(s["classes"].size(), 20u);
}

TEST_F(Http, Samples) {
    auto s = get(std::string("/samples/") + kS1);
    EXPECT_EQ(s["id"], kS1);
    bool width = false;
    for (const auto& t : s["triples"])
        if (t["predicate"] == "stups:width") width = t["object"] == "\"200.0\"^^float" && t["inferred"] == false;
    EXPECT_TRUE(width);
    get("/samples/stups:sample/none", 404);
}

TEST_F(Http, PairsListAndFilters) {
    auto all = get("/pairs");
    EXPECT_EQ(all["total"], 1);
    ASSERT_EQ(all["pairs"].size(), 1u);
    const auto& p = all["pairs"][0];
    EXPECT_EQ(p["s1"], kS1);
    EXPECT_EQ(p["status"], "pending");
    EXPECT_EQ(p["verdicts"]["sameDrugType"], "MATCH");
    EXPECT_EQ(p["verdicts"]["sameChemicalForm"], "MATCH");
    EXPECT_EQ(p["verdicts"]["closeWidth"], "NO_MATCH");
    EXPECT_EQ(p["verdicts"]["closeHeight"], "MATCH");
    EXPECT_EQ(get("/pairs?rule=closeWidth")["total"], 0);
    EXPECT_EQ(get("/pairs?rule=closeHeight&status=pending")["total"], 1);
    EXPECT_EQ(get("/pairs?status=accepted")["total"], 0);
    EXPECT_EQ(get("/pairs?page=2")["pairs"].size(), 0u);
    get("/pairs?rule=nope", 400);
    get("/pairs?status=maybe", 400);
    get("/pairs?page=0", 400);
}

TEST_F(Http, PairDetail) {
    auto d = get(std::string("/pairs/") + kS1 + "/" + kS2);
    EXPECT_EQ(d["s1"], kS1);
    EXPECT_EQ(d["verdicts"]["closeWidth"]["value"], "NO_MATCH");
    EXPECT_FALSE(d["verdicts"]["closeWidth"]["support"].empty());
    EXPECT_EQ(d["verdicts"]["closeWidth"]["bindings"]["w1"], "\"200.0\"^^float");
    EXPECT_EQ(d["status"], "pending");
    EXPECT_EQ(get(std::string("/pairs/") + kS2 + "/" + kS1)["s1"], kS1);
    get("/pairs/stups:sample/sample1/stups:sample/zzz", 404);
}

TEST_F(Http, DecisionFlow) {
    auto rec = post("/decisions", {{"s1", kS2}, {"s2", kS1}, {"action", "accept"}, {"expert", "ana"}, {"comment", "same press"}}, 201);
    EXPECT_EQ(rec["pair"], json::array({kS1, kS2}));
    EXPECT_EQ(rec["expert"], "ana");
    EXPECT_FALSE(rec["verdictSnapshotHash"].get<std::string>().empty());

    auto batches = get("/batches")["batches"];
    ASSERT_EQ(batches.size(), 1u);
    EXPECT_EQ(batches[0]["members"], json::array({kS1, kS2}));
    EXPECT_EQ(get("/pairs?status=accepted")["total"], 1);
    EXPECT_EQ(get("/pairs?status=pending")["total"], 0);
    EXPECT_EQ(get(std::string("/decisions?pair=") + kS1 + "," + kS2)["decisions"].size(), 1u);
    EXPECT_EQ(get("/decisions")["decisions"].size(), 1u);
    EXPECT_EQ(get("/health")["reportStale"], true);
    auto detail = get(std::string("/pairs/") + kS1 + "/" + kS2);
    EXPECT_EQ(detail["status"], "accepted");
    EXPECT_EQ(detail["decisions"].size(), 1u);

    auto samples = get(std::string("/samples/") + kS1);
    bool close = false;
    for (const auto& t : samples["triples"]) close |= t["predicate"] == "stups:isCloseTo" && t["object"] == kS2;
    EXPECT_TRUE(close);

    post("/decisions", {{"s1", kS1}, {"s2", kS2}, {"action", "reject"}, {"expert", "ana"}}, 201);
    EXPECT_TRUE(get("/batches")["batches"].empty());
    EXPECT_EQ(get("/pairs?status=rejected")["total"], 1);
}

TEST_F(Http, DecisionErrors) {
    auto err = post("/decisions", {{"s1", kS1}, {"s2", "stups:sample/ghost"}, {"action", "accept"}, {"expert", "ana"}}, 404);
    EXPECT_EQ(err["error"]["code"], "unknown-pair");
    post("/decisions", {{"s1", kS1}, {"s2", kS2}, {"action", "maybe"}, {"expert", "ana"}}, 400);
    post("/decisions", {{"s1", kS1}, {"s2", kS2}, {"action", "accept"}}, 400);
    post("/decisions", {{"s1", kS1}, {"s2", kS2}, {"action", "accept"}, {"expert", ""}}, 400);
    auto res = client->Post("/decisions", "{oops", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
    get("/decisions?pair=nocomma", 400);
    EXPECT_TRUE(get("/decisions")["decisions"].empty());
}

TEST_F(Http, EvaluateRefreshesReport) {
    post("/decisions", {{"s1", kS1}, {"s2", kS2}, {"action", "accept"}, {"expert", "ana"}}, 201);
    auto summary = post("/evaluate", json::object(), 200);
    EXPECT_EQ(summary["pairs"], 1);
    EXPECT_EQ(summary["byRule"]["closeHeight"]["MATCH"], 1);
    EXPECT_EQ(get("/health")["reportStale"], false);
}

TEST_F(Http, ConcurrentDecisionsAreSerialized) {
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([this, i] {
            httplib::Client c("127.0.0.1", port);
            for (int k = 0; k < 5; ++k) {
                json body{{"s1", kS1}, {"s2", kS2}, {"action", (i + k) % 2 ? "accept" : "reject"}, {"expert", "e" + std::to_string(i)}};
                auto res = c.Post("/decisions", body.dump(), "application/json");
                ASSERT_TRUE(res);
                ASSERT_EQ(res->status, 201);
                auto health = c.Get("/health");
                ASSERT_TRUE(health);
                ASSERT_EQ(health->status, 200);
            }
        });
    }
    for (auto& t : threads) t.join();
    auto [decisions, status] = service->inspect([](const Session& s) { return std::pair{s.decisions(), s.status(kS1, kS2)}; });
    ASSERT_FALSE(decisions.empty());
    EXPECT_EQ(status, decisions.back().action == DecisionAction::Accept ? ReviewStatus::Accepted : ReviewStatus::Rejected);
    for (std::size_t i = 1; i < decisions.size(); ++i) EXPECT_NE(decisions[i].action, decisions[i - 1].action);
}

TEST(ParseAddress, Forms) {
    auto a = parse_address("0.0.0.0:9000");
    EXPECT_EQ(a.host, "0.0.0.0");
    EXPECT_EQ(a.port, 9000);
    auto b = parse_address("9001");
    EXPECT_EQ(b.host, "127.0.0.1");
    EXPECT_EQ(b.port, 9001);
    EXPECT_ANY_THROW(parse_address("host:notaport"));
}

} // namespace
} // namespace batchline
