#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "batchline/service.hpp"
#include "batchline/synthetic.hpp"
#include "oracles.hpp"

namespace batchline {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("batchline-test-" + std::to_string(::getpid()));
    fs::create_directories(dir);
    auto path = dir / name;
    fs::remove(path);
    return path;
}

Session small_session(std::uint64_t seed, std::size_t samples = 24) {
    Schema schema = load_schema_file(testing::source_dir() / "schema" / "drug-domain.json");
    LoadedDataset data = populate_synthetic(generate_synthetic({.seed = seed, .samples = samples}), schema);
    return Session(schema, load_ruleset_file(testing::source_dir() / "rules" / "matching.dsl"), std::move(data.graph),
                   data.id, true, {.block = true});
}

DecisionRecord decision(const std::string& a, const std::string& b, DecisionAction action) {
    DecisionRecord r;
    r.s1 = a;
    r.s2 = b;
    r.action = action;
    r.expert = "expert-1";
    return r;
}

std::set<std::set<std::string>> batch_sets(const Session& s) {
    std::set<std::set<std::string>> out;
    for (const auto& b : s.batches()) out.emplace(b.members.begin(), b.members.end());
    return out;
}

// Components of the accepted pairs, computed by flooding.
std::set<std::set<std::string>> expected_batches(const Session& s) {
    std::map<std::string, std::set<std::string>> adj;
    for (const auto& [pair, st] : s.statuses()) {
        if (st != ReviewStatus::Accepted) continue;
        adj[pair.first].insert(pair.second);
        adj[pair.second].insert(pair.first);
    }
    std::set<std::set<std::string>> out;
    std::set<std::string> seen;
    for (const auto& [start, _] : adj) {
        if (seen.count(start)) continue;
        std::set<std::string> comp;
        std::vector<std::string> stack{start};
        while (!stack.empty()) {
            auto v = stack.back();
            stack.pop_back();
            if (!comp.insert(v).second) continue;
            for (const auto& w : adj[v]) stack.push_back(w);
        }
        seen.insert(comp.begin(), comp.end());
        out.insert(comp);
    }
    return out;
}

TEST(DecisionRecord, JsonRoundTrip) {
    DecisionRecord r = decision("stups:sample/a", "stups:sample/b", DecisionAction::Reject);
    r.timestamp = "2024-01-02T03:04:05.678Z";
    r.comment = "different logo";
    r.verdict_snapshot_hash = "abc";
    EXPECT_EQ(DecisionRecord::from_json(r.to_json()), r);
    EXPECT_EQ(r.to_json().at("pair"), nlohmann::json::array({"stups:sample/a", "stups:sample/b"}));
    EXPECT_EQ(r.to_json().at("action"), "reject");
}

TEST(Timestamp, Format) {
    const auto ts = utc_timestamp();
    ASSERT_EQ(ts.size(), 24u);
    EXPECT_EQ(ts[10], 'T');
    EXPECT_EQ(ts.back(), 'Z');
}

TEST(DecisionLog, MalformedLineIsNamed) {
    DecisionRecord r = decision("stups:sample/a", "stups:sample/b", DecisionAction::Accept);
    r.timestamp = "t";
    std::stringstream in;
    in << r.to_json().dump() << "\n\n" << "{not json\n" << r.to_json().dump() << "\n";
    try {
        read_decisions(in);
        FAIL();
    } catch (const DecisionError& e) {
        EXPECT_EQ(e.kind(), DecisionError::Kind::MalformedLog);
        EXPECT_EQ(e.line(), 3u);
    }
    std::stringstream missing_field("{\"timestamp\": \"t\", \"pair\": [\"a\", \"b\"], \"action\": \"accept\"}\n");
    EXPECT_THROW(read_decisions(missing_field), DecisionError);
}

TEST(Session, AcceptRejectAndBatches) {
    Session s = small_session(1);
    ASSERT_GE(s.report().pairs.size(), 3u);
    const auto& p = s.report().pairs;
    const auto before = s.graph().content_hash();

    auto rec = s.record_decision(decision(p[0].s2, p[0].s1, DecisionAction::Accept));
    EXPECT_EQ(rec.s1, p[0].s1);
    EXPECT_FALSE(rec.timestamp.empty());
    EXPECT_EQ(rec.verdict_snapshot_hash, s.verdict_hash(p[0].s1, p[0].s2));
    EXPECT_EQ(s.status(p[0].s1, p[0].s2), ReviewStatus::Accepted);
    EXPECT_TRUE(s.graph().contains({entity(p[0].s1), entity("stups:isCloseTo"), entity(p[0].s2)}));
    EXPECT_TRUE(s.graph().contains({entity(p[0].s2), entity("stups:isCloseTo"), entity(p[0].s1)}));
    ASSERT_EQ(s.batches().size(), 1u);
    EXPECT_EQ(s.batches()[0].members, (std::vector<std::string>{p[0].s1, p[0].s2}));
    EXPECT_TRUE(s.report_stale());

    s.record_decision(decision(p[0].s1, p[0].s2, DecisionAction::Reject));
    EXPECT_EQ(s.status(p[0].s1, p[0].s2), ReviewStatus::Rejected);
    EXPECT_TRUE(s.batches().empty());
    EXPECT_EQ(s.graph().content_hash(), before);
    EXPECT_EQ(s.decisions(std::pair{p[0].s1, p[0].s2}).size(), 2u);
}

TEST(Session, RepeatedDecisionIsRecordedOnce) {
    Session s = small_session(2);
    const auto& p = s.report().pairs.front();
    auto first = s.record_decision(decision(p.s1, p.s2, DecisionAction::Accept));
    auto second = s.record_decision(decision(p.s1, p.s2, DecisionAction::Accept));
    EXPECT_EQ(first, second);
    EXPECT_EQ(s.decisions().size(), 1u);
}

TEST(Session, RejectsUnknownPairsAndBadRecords) {
    Session s = small_session(3);
    const auto hash = s.graph().content_hash();
    try {
        s.record_decision(decision("stups:sample/nope", s.report().pairs[0].s1, DecisionAction::Accept));
        FAIL();
    } catch (const DecisionError& e) {
        EXPECT_EQ(e.kind(), DecisionError::Kind::UnknownPair);
    }
    auto no_expert = decision(s.report().pairs[0].s1, s.report().pairs[0].s2, DecisionAction::Accept);
    no_expert.expert.clear();
    EXPECT_THROW(s.record_decision(no_expert), DecisionError);
    EXPECT_THROW(s.record_decision(decision("a", "a", DecisionAction::Accept)), DecisionError);
    EXPECT_TRUE(s.decisions().empty());
    EXPECT_EQ(s.graph().content_hash(), hash);
}

TEST(Session, LiveEqualsReplay) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(seed);
        Session live = small_session(100 + seed % 5);
        const auto log_path = scratch("live-" + std::to_string(seed) + ".jsonl");
        live.attach_log(log_path);
        const auto& pairs = live.report().pairs;
        const std::size_t steps = 1 + rng() % 30;
        for (std::size_t k = 0; k < steps; ++k) {
            const auto& p = pairs[rng() % std::min<std::size_t>(pairs.size(), 12)];
            live.record_decision(decision(p.s1, p.s2, rng() % 3 ? DecisionAction::Accept : DecisionAction::Reject));
        }
        Session replayed = small_session(100 + seed % 5);
        replayed.replay(read_decisions(log_path));
        ASSERT_EQ(replayed.graph().content_hash(), live.graph().content_hash()) << "seed " << seed;
        ASSERT_EQ(replayed.statuses(), live.statuses());
        ASSERT_EQ(replayed.decisions(), live.decisions());
        EXPECT_EQ(batch_sets(live), expected_batches(live));

        // The graph depends only on the final decisions, not on the path taken.
        Session direct = small_session(100 + seed % 5);
        std::vector<DecisionRecord> finals;
        for (const auto& [pair, st] : live.statuses())
            if (st == ReviewStatus::Accepted) finals.push_back(decision(pair.first, pair.second, DecisionAction::Accept));
        direct.replay(finals);
        EXPECT_EQ(direct.graph().content_hash(), live.graph().content_hash()) << "seed " << seed;

        for (const auto& [pair, st] : live.statuses()) {
            if (st != ReviewStatus::Accepted) continue;
            EXPECT_TRUE(live.graph().contains({entity(pair.first), entity("stups:isCloseTo"), entity(pair.second)}));
            EXPECT_TRUE(live.graph().contains({entity(pair.second), entity("stups:isCloseTo"), entity(pair.first)}));
        }
    }
}

TEST(Session, OpenReplaysExistingLog) {
    const auto log_path = scratch("open.jsonl");
    SessionConfig config{testing::source_dir() / "schema" / "drug-domain.json", testing::fixture("vd/rules.dsl"),
                         testing::fixture("vd/dataset.json"), log_path, true, {}};
    std::string hash;
    {
        Session s = Session::open(config);
        ASSERT_EQ(s.report().pairs.size(), 1u);
        const auto& p = s.report().pairs[0];
        s.record_decision(decision(p.s1, p.s2, DecisionAction::Accept));
        hash = s.graph().content_hash();
        ASSERT_EQ(s.batches().size(), 1u);
        EXPECT_EQ(s.batches()[0].id, "stups:batch/sample-sample1");
    }
    Session again = Session::open(config);
    EXPECT_EQ(again.graph().content_hash(), hash);
    EXPECT_EQ(again.decisions().size(), 1u);
    EXPECT_TRUE(again.graph().contains(
        {entity("stups:sample/sample2"), entity("stups:isInBatch"), entity("stups:batch/sample-sample1")}));
}

TEST(Session, OpenRefusesInvalidRules) {
    const auto rules = scratch("bad.dsl");
    std::ofstream(rules) << "r(s1, s2) := Sample(s1) AND Sample(s2) AND colour(s1, c) AND colour(s2, c);\n";
    SessionConfig config{testing::source_dir() / "schema" / "drug-domain.json", rules, testing::fixture("vd/dataset.json"),
                         std::nullopt, true, {}};
    EXPECT_ANY_THROW(Session::open(config));
}

TEST(Session, ReevaluateClearsStaleFlag) {
    Session s = small_session(4);
    const auto& p = s.report().pairs.front();
    s.record_decision(decision(p.s1, p.s2, DecisionAction::Accept));
    EXPECT_TRUE(s.report_stale());
    s.evaluate();
    EXPECT_FALSE(s.report_stale());
}

} // namespace
} // namespace batchline
