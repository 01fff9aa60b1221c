#include <random>

#include <gtest/gtest.h>

#include "batchline/graph.hpp"
#include "oracles.hpp"

namespace batchline {
namespace {

Graph random_graph(std::uint64_t seed, std::vector<Triple>* order = nullptr) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> node(0, 7), pred(0, 3), kind(0, 4), triples(0, 120);
    Graph g;
    const int n = triples(rng);
    for (int i = 0; i < n; ++i) {
        Term s = entity("stups:n" + std::to_string(node(rng)));
        Term p = entity("stups:p" + std::to_string(pred(rng)));
        Term o = kind(rng) == 0 ? Term(Literal::of_integer(node(rng))) : entity("stups:n" + std::to_string(node(rng)));
        Triple t{s, p, o};
        if (g.insert(t) && order) order->push_back(t);
    }
    return g;
}

std::vector<Pattern> all_shapes(const Triple& t) {
    std::vector<Pattern> out;
    for (int mask = 0; mask < 8; ++mask) {
        Pattern p;
        if (mask & 1) p.subject = t.subject;
        if (mask & 2) p.predicate = t.predicate;
        if (mask & 4) p.object = t.object;
        out.push_back(p);
    }
    return out;
}

bool matches(const Pattern& p, const Triple& t) {
    return (!p.subject || *p.subject == t.subject) && (!p.predicate || *p.predicate == t.predicate) &&
           (!p.object || *p.object == t.object);
}

TEST(Graph, MatchAgreesWithLinearScan) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Graph g = random_graph(seed);
        ASSERT_TRUE(g.indexes_coherent());
        const auto all = testing::triples_of(g);
        std::vector<Triple> probes(all.begin(), all.end());
        probes.push_back({entity("stups:n1"), entity("stups:p9"), entity("stups:n2")});
        for (const auto& probe : probes) {
            for (const auto& pattern : all_shapes(probe)) {
                std::vector<Triple> expected;
                for (const auto& t : all)
                    if (matches(pattern, t)) expected.push_back(t);
                auto got = g.match(pattern);
                std::sort(got.begin(), got.end());
                ASSERT_EQ(got, expected) << "seed " << seed;
                if (auto ids = g.resolve(pattern)) {
                    ASSERT_EQ(g.count(*ids), expected.size());
                }
            }
        }
    }
}

TEST(Graph, IndexesStayCoherentUnderRetraction) {
    std::vector<Triple> order;
    Graph g = random_graph(42, &order);
    for (std::size_t i = 0; i < order.size(); i += 2) {
        EXPECT_TRUE(g.retract(order[i]));
        EXPECT_FALSE(g.retract(order[i]));
        ASSERT_TRUE(g.indexes_coherent());
    }
    EXPECT_EQ(g.size(), order.size() / 2);
}

TEST(Graph, InsertIsIdempotent) {
    Graph g;
    Triple t{entity("stups:a"), entity("stups:p"), entity("stups:b")};
    EXPECT_TRUE(g.insert(t));
    const auto gen = g.generation();
    EXPECT_FALSE(g.insert(t));
    EXPECT_EQ(g.generation(), gen);
    EXPECT_EQ(g.size(), 1u);
}

TEST(Graph, ProvenanceUpgradeAndClearInferred) {
    Graph g;
    Triple a{entity("stups:a"), entity("stups:p"), entity("stups:b")};
    Triple b{entity("stups:b"), entity("stups:p"), entity("stups:c")};
    g.insert(a, Provenance::Inferred);
    g.insert(b, Provenance::Inferred);
    EXPECT_FALSE(g.insert(a, Provenance::Asserted));
    IdTriple ida{*g.lookup(a.subject), *g.lookup(a.predicate), *g.lookup(a.object)};
    EXPECT_EQ(g.provenance(ida), Provenance::Asserted);
    EXPECT_EQ(g.clear_inferred(), 1u);
    EXPECT_TRUE(g.contains(a));
    EXPECT_FALSE(g.contains(b));
}

TEST(Graph, RejectsLiteralSubjectOrPredicate) {
    Graph g;
    EXPECT_THROW(g.insert({Literal::of_integer(1), entity("stups:p"), entity("stups:b")}), MalformedTriple);
    EXPECT_THROW(g.insert({entity("stups:a"), Literal::of_integer(1), entity("stups:b")}), MalformedTriple);
}

TEST(GraphHash, EmptyGraph) { EXPECT_EQ(Graph{}.content_hash(), Graph::kEmptyHash); }

TEST(GraphHash, IndependentOfInsertionOrderAndProvenance) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::vector<Triple> order;
        Graph g = random_graph(seed, &order);
        Graph reversed;
        for (auto it = order.rbegin(); it != order.rend(); ++it)
            reversed.insert(*it, std::distance(order.rbegin(), it) % 2 ? Provenance::Inferred : Provenance::Asserted);
        EXPECT_EQ(g.content_hash(), reversed.content_hash());
    }
}

TEST(GraphHash, ChangesWithContent) {
    Graph g = random_graph(3);
    const auto before = g.content_hash();
    g.insert({entity("stups:fresh"), entity("stups:p"), Literal::of_string("x")});
    EXPECT_NE(g.content_hash(), before);
}

TEST(GraphText, SerializeParseRoundTrip) {
    Graph g = random_graph(9);
    g.insert({entity("stups:s"), entity("stups:label"), Literal::of_string("two words \"quoted\"")});
    Graph back = Graph::parse("# comment\n\n" + g.serialize());
    EXPECT_EQ(back.content_hash(), g.content_hash());
    EXPECT_EQ(back.canonical_lines(), g.canonical_lines());
}

TEST(GraphText, MalformedLineNamesLine) {
    try {
        Graph::parse("stups:a stups:p stups:b\nstups:a stups:p\n");
        FAIL();
    } catch (const MalformedTriple& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

} // namespace
} // namespace batchline
