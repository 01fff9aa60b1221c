#include "batchline/reasoner.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace batchline {

namespace {

using nlohmann::json;

constexpr std::array kAllKinds = {RuleKind::Inverse,     RuleKind::Symmetric, RuleKind::Transitive,
                                  RuleKind::Subproperty, RuleKind::Subclass,  RuleKind::DomainTyping,
                                  RuleKind::RangeTyping};

// Rules keyed by the predicate (or, for subclass, the class) that triggers them.
struct CompiledRules {
    struct Edge {
        RuleKind kind;
        TermId target;
    };
    TermId type_id{};
    std::unordered_map<std::uint32_t, std::vector<Edge>> by_predicate;
    std::unordered_map<std::uint32_t, std::vector<TermId>> superclasses;
    std::set<std::uint32_t> transitive;
    std::set<std::uint32_t> symmetric;
};

std::uint32_t raw(TermId id) { return static_cast<std::uint32_t>(id); }

CompiledRules compile(Graph& graph, const Schema& schema, const std::vector<EntailmentRule>& rules) {
    CompiledRules c;
    c.type_id = graph.intern(entity(std::string(kRdfType)));
    auto id = [&](const std::string& name) { return graph.intern(entity(schema.iri(name))); };
    for (const auto& r : rules) {
        switch (r.kind) {
            case RuleKind::Inverse:
                c.by_predicate[raw(id(r.first))].push_back({r.kind, id(r.second)});
                if (r.first != r.second) c.by_predicate[raw(id(r.second))].push_back({r.kind, id(r.first)});
                break;
            case RuleKind::Symmetric: c.symmetric.insert(raw(id(r.first))); break;
            case RuleKind::Transitive: c.transitive.insert(raw(id(r.first))); break;
            case RuleKind::Subproperty:
            case RuleKind::DomainTyping:
            case RuleKind::RangeTyping: c.by_predicate[raw(id(r.first))].push_back({r.kind, id(r.second)}); break;
            case RuleKind::Subclass: c.superclasses[raw(id(r.first))].push_back(id(r.second)); break;
        }
    }
    return c;
}

} // namespace

std::string_view to_string(RuleKind kind) noexcept {
    switch (kind) {
        case RuleKind::Inverse: return "inverse";
        case RuleKind::Symmetric: return "symmetric";
        case RuleKind::Transitive: return "transitive";
        case RuleKind::Subproperty: return "subproperty";
        case RuleKind::Subclass: return "subclass";
        case RuleKind::DomainTyping: return "domain";
        case RuleKind::RangeTyping: return "range";
    }
    return "unknown";
}

std::string EntailmentRule::describe() const {
    std::string out(to_string(kind));
    out += "(" + first;
    if (!second.empty()) out += ", " + second;
    return out + ")";
}

std::vector<EntailmentRule> derive_rules(const Schema& schema) {
    std::vector<EntailmentRule> rules;
    for (const auto& [name, p] : schema.object_properties) {
        if (p.inverse && name <= *p.inverse) rules.push_back({RuleKind::Inverse, name, *p.inverse});
        if (p.symmetric) rules.push_back({RuleKind::Symmetric, name, ""});
        if (p.transitive) rules.push_back({RuleKind::Transitive, name, ""});
        if (p.parent) rules.push_back({RuleKind::Subproperty, name, *p.parent});
        if (!p.domain.empty()) rules.push_back({RuleKind::DomainTyping, name, p.domain});
        if (!p.range.empty()) rules.push_back({RuleKind::RangeTyping, name, p.range});
    }
    for (const auto& [name, c] : schema.classes)
        if (c.parent) rules.push_back({RuleKind::Subclass, name, *c.parent});
    return rules;
}

json MaterializationStats::to_json() const {
    return json{{"before", before}, {"after", after},     {"added", added},
                {"iterations", iterations}, {"byRule", by_rule}, {"ignored", ignored}};
}

MaterializationStats materialize(Graph& graph, const Schema& schema) {
    MaterializationStats stats;
    for (auto kind : kAllKinds) stats.by_rule[std::string(to_string(kind))] = 0;
    stats.before = graph.size();

    const auto rules = compile(graph, schema, derive_rules(schema));
    std::set<std::uint32_t> declared{raw(rules.type_id)};
    for (const auto& [name, _] : schema.object_properties) declared.insert(raw(graph.intern(entity(schema.iri(name)))));
    for (const auto& [name, _] : schema.data_properties) declared.insert(raw(graph.intern(entity(schema.iri(name)))));

    std::vector<IdTriple> delta;
    delta.reserve(graph.size());
    graph.for_each([&](IdTriple t, Provenance) {
        if (declared.count(raw(t.p))) delta.push_back(t);
        else ++stats.ignored;
    });

    std::map<IdTriple, RuleKind> fresh;
    auto derive = [&](IdTriple t, RuleKind kind) {
        if (!graph.contains(t)) fresh.emplace(t, kind);
    };
    auto is_entity = [&](TermId id) { return graph.term(id).is_entity(); };

    do {
        if (++stats.iterations > kMaxIterations)
            throw std::logic_error("materialization exceeded the iteration cap");
        fresh.clear();
        for (const IdTriple& t : delta) {
            const auto p = raw(t.p);
            if (t.p == rules.type_id) {
                if (auto it = rules.superclasses.find(raw(t.o)); it != rules.superclasses.end())
                    for (TermId super : it->second) derive({t.s, rules.type_id, super}, RuleKind::Subclass);
                continue;
            }
            if (auto it = rules.by_predicate.find(p); it != rules.by_predicate.end()) {
                for (const auto& edge : it->second) {
                    switch (edge.kind) {
                        case RuleKind::Inverse:
                            if (is_entity(t.o)) derive({t.o, edge.target, t.s}, edge.kind);
                            break;
                        case RuleKind::Subproperty: derive({t.s, edge.target, t.o}, edge.kind); break;
                        case RuleKind::DomainTyping: derive({t.s, rules.type_id, edge.target}, edge.kind); break;
                        case RuleKind::RangeTyping:
                            if (is_entity(t.o)) derive({t.o, rules.type_id, edge.target}, edge.kind);
                            break;
                        default: break;
                    }
                }
            }
            if (rules.symmetric.count(p) && is_entity(t.o)) derive({t.o, t.p, t.s}, RuleKind::Symmetric);
            if (rules.transitive.count(p)) {
                // delta joined with the full graph on both sides; the graph already holds the delta.
                graph.for_each_match(IdPattern{t.o, t.p, std::nullopt},
                                     [&](IdTriple next) { derive({t.s, t.p, next.o}, RuleKind::Transitive); });
                graph.for_each_match(IdPattern{std::nullopt, t.p, t.s},
                                     [&](IdTriple prev) { derive({prev.s, t.p, t.o}, RuleKind::Transitive); });
            }
        }
        delta.clear();
        for (const auto& [t, kind] : fresh) {
            if (graph.insert(t, Provenance::Inferred)) {
                delta.push_back(t);
                ++stats.by_rule[std::string(to_string(kind))];
            }
        }
    } while (!delta.empty());

    stats.after = graph.size();
    stats.added = stats.after - stats.before;
    return stats;
}

json ConsistencyViolation::to_json() const {
    return json{{"kind", kind == Kind::EnumOutOfRange ? "enum-out-of-range" : "functional-conflict"},
                {"subject", subject},
                {"property", property},
                {"values", values}};
}

std::vector<ConsistencyViolation> check_consistency(const Graph& graph, const Schema& schema) {
    std::vector<ConsistencyViolation> out;
    for (const auto& [name, def] : schema.data_properties) {
        auto pid = graph.lookup(entity(schema.iri(name)));
        if (!pid) continue;
        std::map<TermId, std::vector<std::string>> values_by_subject;
        graph.for_each_match(IdPattern{std::nullopt, *pid, std::nullopt}, [&](IdTriple t) {
            const Term& value = graph.term(t.o);
            std::string text = value.is_literal() ? value.literal().lexical() : value.to_text();
            if (def.range.is_enumeration() && !def.range.admits(text))
                out.push_back({ConsistencyViolation::Kind::EnumOutOfRange, graph.term(t.s).to_text(), name, {text}});
            if (def.functional) values_by_subject[t.s].push_back(std::move(text));
        });
        for (auto& [subject, values] : values_by_subject) {
            if (values.size() < 2) continue;
            std::sort(values.begin(), values.end());
            out.push_back({ConsistencyViolation::Kind::FunctionalConflict, graph.term(subject).to_text(), name,
                           std::move(values)});
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.subject, a.property, a.kind) < std::tie(b.subject, b.property, b.kind);
    });
    return out;
}

} // namespace batchline
