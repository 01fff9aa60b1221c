#include <random>

#include <gtest/gtest.h>

#include "batchline/ruledsl.hpp"
#include "oracles.hpp"

namespace batchline {
namespace {

RuleErrorCode error_code(std::string_view text) {
    try {
        parse_ruleset(text);
    } catch (const RuleParseError& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error for: " << text;
    return RuleErrorCode::Syntax;
}

RuleAst random_rule(std::mt19937_64& rng, int index) {
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    const std::vector<std::string> vars = {"a", "b", "s1", "s_2", "longName"};
    const std::vector<std::string> classes = {"Sample", "A", "Seized_Item"};
    const std::vector<std::string> props = {"drugType", "p", "has_value2"};
    const std::vector<std::string> strings = {"", "x", "two words", "quote \" and \\ slash", "tab\tnew\nline"};
    const std::vector<double> numbers = {0, 1, -2.5, 0.1, 1e-9, 123456789.125, -1e300, 0.05};

    RuleAst r;
    r.name = "rule" + std::to_string(index);
    std::vector<std::string> bound;
    const std::size_t n_atoms = 1 + pick(4);
    for (std::size_t k = 0; k < n_atoms; ++k) {
        if (pick(2) == 0) {
            ClassAtom c{classes[pick(classes.size())], vars[pick(vars.size())], {}};
            bound.push_back(c.var);
            r.body.push_back(c);
        } else {
            PropertyAtom p{props[pick(props.size())], vars[pick(vars.size())], vars[pick(vars.size())], {}};
            bound.push_back(p.subject);
            bound.push_back(p.object);
            r.body.push_back(p);
        }
    }
    const std::size_t n_heads = 1 + pick(3);
    for (std::size_t k = 0; k < n_heads; ++k) {
        const auto& v = bound[pick(bound.size())];
        if (std::find(r.head.begin(), r.head.end(), v) == r.head.end()) r.head.push_back(v);
    }
    auto operand = [&]() -> Operand {
        switch (pick(3)) {
            case 0: return Variable{bound[pick(bound.size())]};
            case 1: return StringConst{strings[pick(strings.size())]};
            default: return NumberConst{numbers[pick(numbers.size())]};
        }
    };
    const std::size_t n_cmp = pick(4);
    for (std::size_t k = 0; k < n_cmp; ++k) {
        if (pick(3) == 0) {
            r.body.push_back(RelDiffAtom{bound[pick(bound.size())], bound[pick(bound.size())],
                                         std::uniform_real_distribution<double>(0.001, 0.999)(rng), {}});
        } else {
            CompareAtom c{operand(), static_cast<CompareOp>(pick(6)), operand(), {}};
            r.body.push_back(c);
        }
    }
    std::shuffle(r.body.begin(), r.body.end(), rng);
    return r;
}

TEST(RuleDsl, PrintParseRoundTrip) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        RuleAst rule = random_rule(rng, i);
        const auto text = print_rule(rule);
        RuleAst back = parse_rule(text);
        ASSERT_EQ(back, rule) << text;
        ASSERT_EQ(print_rule(back), text);
    }
}

TEST(RuleDsl, RuleSetRoundTrip) {
    std::mt19937_64 rng(12);
    RuleSet rules;
    for (int i = 0; i < 20; ++i) rules.add(random_rule(rng, i));
    RuleSet back = parse_ruleset(print_ruleset(rules));
    ASSERT_EQ(back.size(), rules.size());
    for (std::size_t i = 0; i < rules.size(); ++i) EXPECT_EQ(back.rules()[i], rules.rules()[i]);
}

TEST(RuleDsl, ParsesShippedRules) {
    RuleSet rules = load_ruleset_file(testing::source_dir() / "rules" / "matching.dsl");
    EXPECT_EQ(rules.size(), 7u);
    ASSERT_NE(rules.find("closeWidth"), nullptr);
    const auto& body = rules.find("closeWidth")->body;
    auto* rd = std::get_if<RelDiffAtom>(&body[4]);
    ASSERT_NE(rd, nullptr);
    EXPECT_DOUBLE_EQ(rd->tolerance, 0.05);
    EXPECT_EQ(span_of(body[0]).line, rules.find("closeWidth")->span.line);
}

TEST(RuleDsl, SafetyNamesEveryUnboundVariable) {
    try {
        parse_rule("r(x, y) := Sample(x) AND z > 1");
        FAIL();
    } catch (const RuleParseError& e) {
        EXPECT_EQ(e.code(), RuleErrorCode::Safety);
        EXPECT_EQ(e.names(), (std::vector<std::string>{"z", "y"}));
        EXPECT_NE(std::string(e.what()).find("variables z, y"), std::string::npos) << e.what();
    }
}

TEST(RuleDsl, ErrorKinds) {
    EXPECT_EQ(error_code("r(x) := A(x) AND x = 1;"), RuleErrorCode::Lexical);
    EXPECT_EQ(error_code("r(x) := A(x) AND x @ 1;"), RuleErrorCode::Lexical);
    EXPECT_EQ(error_code("r(x) := A(x)"), RuleErrorCode::Syntax);
    EXPECT_EQ(error_code("r(x) := A(x, y);"), RuleErrorCode::Syntax);
    EXPECT_EQ(error_code("r(x) := p(x);"), RuleErrorCode::Syntax);
    EXPECT_EQ(error_code("r(x) := A(x) AND reldiff(x, x, 1.5);"), RuleErrorCode::Syntax);
    EXPECT_EQ(error_code("r(x) := A(x);\nr(y) := B(y);"), RuleErrorCode::DuplicateRule);
    EXPECT_EQ(error_code("r(x) := A(y);"), RuleErrorCode::Safety);
}

TEST(RuleDsl, SyntaxErrorPosition) {
    try {
        parse_ruleset("# comment\nr(x) :=\n  A(x) AND AND B(x);");
        FAIL();
    } catch (const RuleParseError& e) {
        EXPECT_EQ(e.code(), RuleErrorCode::Syntax);
        EXPECT_EQ(e.where().line, 3u);
        EXPECT_EQ(e.where().column, 12u);
        EXPECT_FALSE(e.expected().empty());
    }
}

TEST(RuleDsl, FuzzNeverCrashes) {
    const std::string seed_text = print_ruleset(load_ruleset_file(testing::source_dir() / "rules" / "matching.dsl"));
    const std::string alphabet = "abAB01(),;:=!<>\"\\#. \n\t-e";
    std::mt19937_64 rng(3);
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    for (int i = 0; i < 3000; ++i) {
        std::string text = seed_text;
        const std::size_t edits = 1 + pick(8);
        for (std::size_t k = 0; k < edits; ++k) {
            const std::size_t at = pick(text.size());
            switch (pick(3)) {
                case 0: text.erase(at, 1 + pick(5)); break;
                case 1: text.insert(at, 1, alphabet[pick(alphabet.size())]); break;
                default: text[at] = static_cast<char>(pick(256)); break;
            }
        }
        try {
            parse_ruleset(text);
        } catch (const RuleParseError&) {
        }
    }
    for (int i = 0; i < 2000; ++i) {
        std::string text(pick(64), '\0');
        for (auto& c : text) c = alphabet[pick(alphabet.size())];
        try {
            parse_ruleset(text);
        } catch (const RuleParseError&) {
        }
    }
}

class Validation : public ::testing::Test {
protected:
    Schema schema = load_schema_file(testing::source_dir() / "schema" / "drug-domain.json");

    std::vector<RuleDiagnostic> check(std::string_view text) { return validate_rule(parse_rule(text), schema); }
};

TEST_F(Validation, ShippedRulesAreClean) {
    for (const auto& rule : load_ruleset_file(testing::source_dir() / "rules" / "matching.dsl"))
        EXPECT_TRUE(validate_rule(rule, schema).empty()) << rule.name;
}

TEST_F(Validation, UnknownPredicateCarriesReviseHint) {
    auto d = check("r(s1, s2) := Sample(s1) AND Sample(s2) AND colour(s1, c) AND colour(s2, c)");
    ASSERT_EQ(d.size(), 2u);
    EXPECT_EQ(d[0].code, RuleDiagnosticCode::UnknownPredicate);
    EXPECT_EQ(d[0].name, "colour");
    EXPECT_NE(d[0].hint.find("revise the TBox"), std::string::npos);
    EXPECT_NE(d[0].describe().find("colour"), std::string::npos);
}

TEST_F(Validation, ReldiffOverTextIsDatatypeMismatch) {
    auto d = check("r(s1, s2) := Sample(s1) AND Sample(s2) AND drugType(s1, a) AND drugType(s2, b) "
                   "AND reldiff(a, b, 0.05)");
    ASSERT_EQ(d.size(), 2u);
    EXPECT_EQ(d[0].code, RuleDiagnosticCode::DatatypeMismatch);
}

TEST_F(Validation, ComparisonTyping) {
    EXPECT_TRUE(check("r(s) := Sample(s) AND height(s, h) AND h > 10").empty());
    EXPECT_TRUE(check("r(s) := Sample(s) AND drugType(s, d) AND d == \"cannabis\"").empty());
    EXPECT_EQ(check("r(s) := Sample(s) AND drugType(s, d) AND d > 3").at(0).code, RuleDiagnosticCode::DatatypeMismatch);
    EXPECT_EQ(check("r(s, t) := Sample(s) AND Sample(t) AND s < t").at(0).code, RuleDiagnosticCode::DatatypeMismatch);
}

TEST_F(Validation, TypeConflict) {
    auto d = check("r(s) := Sample(s) AND height(s, h) AND Sample(h)");
    ASSERT_FALSE(d.empty());
    EXPECT_EQ(d[0].code, RuleDiagnosticCode::TypeConflict);
    EXPECT_EQ(d[0].name, "h");
}

TEST_F(Validation, KindMismatch) {
    schema.data_properties.emplace("Weight", DataPropertyDef{"Weight", "Sample", {Datatype::Float, {}}, false, "w"});
    auto d = check("r(s) := Weight(s)");
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].code, RuleDiagnosticCode::KindMismatch);
}

} // namespace
} // namespace batchline
