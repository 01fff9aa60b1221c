#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace batchline::testing {

namespace {

using Rng = std::mt19937_64;

std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
bool chance(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

Term type_term() { return entity(std::string(kRdfType)); }

} // namespace

std::filesystem::path source_dir() { return BATCHLINE_SOURCE_DIR; }

std::filesystem::path fixture(std::string_view relative) { return source_dir() / "data" / "fixtures" / relative; }

std::set<Triple> triples_of(const Graph& graph) {
    std::set<Triple> out;
    graph.for_each([&](IdTriple t, Provenance) { out.insert(graph.decode(t)); });
    return out;
}

ReasonerCase random_reasoner_case(std::uint64_t seed) {
    Rng rng(seed);
    ReasonerCase c;
    const std::size_t n_classes = 1 + pick(rng, 4);
    for (std::size_t i = 0; i < n_classes; ++i) {
        ClassDef def{"C" + std::to_string(i), std::nullopt, "class"};
        if (i > 0 && chance(rng, 0.4)) def.parent = "C" + std::to_string(pick(rng, i));
        c.schema.classes.emplace(def.name, def);
    }
    auto some_class = [&]() -> std::string {
        return chance(rng, 0.5) ? "C" + std::to_string(pick(rng, n_classes)) : std::string();
    };
    const std::size_t n_props = 1 + pick(rng, 6);
    std::vector<ObjectPropertyDef> props(n_props);
    for (std::size_t i = 0; i < n_props; ++i) {
        auto& p = props[i];
        p.name = "p" + std::to_string(i);
        p.comment = "property";
        p.domain = some_class();
        p.range = some_class();
        p.transitive = chance(rng, 0.3);
        p.symmetric = chance(rng, 0.2);
        if (i > 0 && chance(rng, 0.3)) p.parent = "p" + std::to_string(pick(rng, i));
    }
    for (std::size_t i = 0; i < n_props; ++i) {
        if (props[i].inverse || !chance(rng, 0.35)) continue;
        std::size_t j = pick(rng, n_props);
        if (props[j].inverse) continue;
        props[i].inverse = props[j].name;
        props[j].inverse = props[i].name;
    }
    for (auto& p : props) c.schema.object_properties.emplace(p.name, p);

    const std::size_t n_entities = 3 + pick(rng, 10);
    auto node = [&]() { return entity("stups:e" + std::to_string(pick(rng, n_entities))); };
    const std::size_t n_triples = pick(rng, 201);
    for (std::size_t k = 0; k < n_triples; ++k) {
        const auto roll = pick(rng, 20);
        if (roll < 3) {
            c.graph.insert({node(), type_term(), entity(c.schema.iri("C" + std::to_string(pick(rng, n_classes))))});
        } else if (roll < 4) {
            c.graph.insert({node(), entity("stups:undeclared"), node()});
        } else {
            auto p = entity(c.schema.iri("p" + std::to_string(pick(rng, n_props))));
            if (roll < 5) c.graph.insert({node(), p, Literal::of_integer(static_cast<std::int64_t>(pick(rng, 3)))});
            else c.graph.insert({node(), p, node()});
        }
    }
    return c;
}

std::set<Triple> naive_fixpoint(std::set<Triple> triples, const Schema& schema) {
    const Term type = type_term();
    std::map<Term, const ObjectPropertyDef*> props;
    for (const auto& [name, def] : schema.object_properties) props.emplace(entity(schema.iri(name)), &def);
    std::map<Term, Term> class_parent;
    for (const auto& [name, def] : schema.classes)
        if (def.parent) class_parent.emplace(entity(schema.iri(name)), entity(schema.iri(*def.parent)));
    auto iri = [&](const std::string& name) { return entity(schema.iri(name)); };

    for (;;) {
        std::set<Triple> next = triples;
        for (const auto& t : triples) {
            if (t.predicate == type) {
                if (auto it = class_parent.find(t.object); it != class_parent.end())
                    next.insert({t.subject, type, it->second});
                continue;
            }
            auto it = props.find(t.predicate);
            if (it == props.end()) continue;
            const ObjectPropertyDef& p = *it->second;
            const bool object_is_entity = t.object.is_entity();
            if (p.inverse && object_is_entity) next.insert({t.object, iri(*p.inverse), t.subject});
            if (p.symmetric && object_is_entity) next.insert({t.object, t.predicate, t.subject});
            if (p.parent) next.insert({t.subject, iri(*p.parent), t.object});
            if (!p.domain.empty()) next.insert({t.subject, type, iri(p.domain)});
            if (!p.range.empty() && object_is_entity) next.insert({t.object, type, iri(p.range)});
            if (p.transitive)
                for (const auto& u : triples)
                    if (u.predicate == t.predicate && u.subject == t.object) next.insert({t.subject, t.predicate, u.object});
        }
        if (next.size() == triples.size()) return triples;
        triples = std::move(next);
    }
}

std::set<std::pair<int, int>> floyd_warshall_closure(int n, const std::set<std::pair<int, int>>& edges) {
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (auto [a, b] : edges) reach[a][b] = true;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (reach[i][k] && reach[k][j]) reach[i][j] = true;
    std::set<std::pair<int, int>> out;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (reach[i][j]) out.emplace(i, j);
    return out;
}

namespace {

constexpr std::string_view kCompilerSchema = R"({
  "classes": [
    {"name": "Thing", "comment": "Anything."},
    {"name": "Part", "comment": "A component."}
  ],
  "dataProperties": [
    {"name": "size", "domain": "Thing", "range": "float", "comment": "Size."},
    {"name": "weight", "domain": "Thing", "range": "float", "comment": "Weight."},
    {"name": "colour", "domain": "Thing", "range": "string", "comment": "Colour."}
  ],
  "objectProperties": [
    {"name": "link", "domain": "Thing", "range": "Thing", "comment": "Link."},
    {"name": "partOf", "domain": "Part", "range": "Thing", "comment": "Membership."}
  ]
})";

enum class Sort { Node, Number, Text };

} // namespace

CompilerCase random_compiler_case(std::uint64_t seed) {
    Rng rng(seed);
    CompilerCase c;
    c.schema = load_schema(kCompilerSchema);
    auto iri = [&](const char* name) { return entity(c.schema.iri(name)); };

    const std::size_t n_nodes = 3 + pick(rng, 6);
    auto node = [&]() { return entity("stups:n" + std::to_string(pick(rng, n_nodes))); };
    const std::array numbers = {1.0, 2.0, 2.05, 3.0, 10.0, 0.0};
    const std::array colours = {"red", "blue", "green"};
    const std::size_t n_triples = 5 + pick(rng, 56);
    while (c.graph.size() < n_triples) {
        switch (pick(rng, 7)) {
            case 0: c.graph.insert({node(), type_term(), chance(rng, 0.6) ? iri("Thing") : iri("Part")}); break;
            case 1:
            case 2: c.graph.insert({node(), iri("link"), node()}); break;
            case 3: c.graph.insert({node(), iri("partOf"), node()}); break;
            case 4: c.graph.insert({node(), iri("size"), Literal::of_float(numbers[pick(rng, numbers.size())])}); break;
            case 5: c.graph.insert({node(), iri("weight"), Literal::of_float(numbers[pick(rng, numbers.size())])}); break;
            default: c.graph.insert({node(), iri("colour"), Literal::of_string(colours[pick(rng, colours.size())])}); break;
        }
    }

    std::vector<std::string> head = {"x", "y"};
    if (chance(rng, 0.25)) head.pop_back();
    std::vector<std::string> body;
    std::map<std::string, Sort> bound;
    const std::array node_vars = {"x", "y", "z", "w"};
    std::size_t fresh = 0;
    auto node_var = [&]() {
        std::string v = node_vars[pick(rng, head.size() == 1 ? 3 : 4)];
        if (head.size() == 1 && v == "y") v = "z";
        return v;
    };

    const std::size_t n_atoms = 1 + pick(rng, 4);
    for (std::size_t k = 0; k < n_atoms; ++k) {
        const auto roll = pick(rng, 6);
        if (roll <= 1) {
            auto a = node_var(), b = node_var();
            body.push_back(std::string(roll == 0 ? "link" : "partOf") + "(" + a + ", " + b + ")");
            bound[a] = bound[b] = Sort::Node;
        } else if (roll == 2) {
            auto a = node_var();
            body.push_back(std::string(chance(rng, 0.5) ? "Thing" : "Part") + "(" + a + ")");
            bound[a] = Sort::Node;
        } else {
            auto a = node_var();
            const bool text = roll == 5;
            std::string v = (text ? "c" : "v") + std::to_string(fresh++);
            const char* prop = text ? "colour" : (roll == 3 ? "size" : "weight");
            body.push_back(std::string(prop) + "(" + a + ", " + v + ")");
            bound[a] = Sort::Node;
            bound[v] = text ? Sort::Text : Sort::Number;
        }
    }
    for (const auto& h : head) {
        if (bound.count(h)) continue;
        body.push_back((chance(rng, 0.5) ? "Thing(" : "Part(") + h + ")");
        bound[h] = Sort::Node;
    }

    auto of_sort = [&](Sort s) {
        std::vector<std::string> vars;
        for (const auto& [name, sort] : bound)
            if (sort == s) vars.push_back(name);
        return vars;
    };
    const std::array ops = {"==", "!=", "<", "<=", ">", ">="};
    const std::size_t n_compare = pick(rng, 4);
    for (std::size_t k = 0; k < n_compare; ++k) {
        const auto roll = pick(rng, 4);
        if (roll == 0) {
            auto nodes = of_sort(Sort::Node);
            body.push_back(nodes[pick(rng, nodes.size())] + (chance(rng, 0.5) ? " != " : " == ") +
                           nodes[pick(rng, nodes.size())]);
        } else if (roll == 1) {
            auto nums = of_sort(Sort::Number);
            if (nums.empty()) continue;
            const auto& a = nums[pick(rng, nums.size())];
            if (chance(rng, 0.3)) body.push_back(a + " " + ops[pick(rng, ops.size())] + " 2.5");
            else body.push_back(a + " " + ops[pick(rng, ops.size())] + " " + nums[pick(rng, nums.size())]);
        } else if (roll == 2) {
            auto nums = of_sort(Sort::Number);
            if (nums.empty()) continue;
            body.push_back("reldiff(" + nums[pick(rng, nums.size())] + ", " + nums[pick(rng, nums.size())] + ", 0.05)");
        } else {
            auto texts = of_sort(Sort::Text);
            if (texts.empty()) continue;
            const auto& a = texts[pick(rng, texts.size())];
            if (chance(rng, 0.5)) body.push_back(a + " == \"red\"");
            else body.push_back(a + " " + (chance(rng, 0.5) ? "!=" : "<") + " " + texts[pick(rng, texts.size())]);
        }
    }
    std::shuffle(body.begin(), body.end(), rng);

    c.text = "r" + std::to_string(seed) + "(" + head[0] + (head.size() > 1 ? ", " + head[1] : "") + ") := ";
    for (std::size_t k = 0; k < body.size(); ++k) c.text += (k ? " AND " : "") + body[k];
    c.rule = parse_rule(c.text);
    return c;
}

namespace {

struct Operand3 {
    const Term* term = nullptr;
    std::optional<double> number;
    std::optional<std::string> text;
};

Truth verdict_of(bool b) { return b ? Truth::True : Truth::False; }

template <typename T>
Truth apply(const T& a, CompareOp op, const T& b) {
    switch (op) {
        case CompareOp::Eq: return verdict_of(a == b);
        case CompareOp::Ne: return verdict_of(a != b);
        case CompareOp::Lt: return verdict_of(a < b);
        case CompareOp::Le: return verdict_of(a <= b);
        case CompareOp::Gt: return verdict_of(a > b);
        case CompareOp::Ge: return verdict_of(a >= b);
    }
    return Truth::Unknown;
}

std::optional<double> number_of(const Operand3& o) {
    if (o.number) return o.number;
    if (o.term && o.term->is_literal()) return o.term->literal().numeric();
    return std::nullopt;
}

std::optional<std::string> text_of(const Operand3& o) {
    if (o.text) return o.text;
    if (o.term && o.term->is_literal() && o.term->literal().datatype() == Datatype::String)
        return o.term->literal().lexical();
    return std::nullopt;
}

Truth compare3(const Operand3& a, CompareOp op, const Operand3& b) {
    if (auto x = number_of(a), y = number_of(b); x && y) return apply(*x, op, *y);
    const bool ea = a.term && a.term->is_entity(), eb = b.term && b.term->is_entity();
    if (ea && eb) {
        if (op != CompareOp::Eq && op != CompareOp::Ne) return Truth::Unknown;
        return apply(a.term->entity().id(), op, b.term->entity().id());
    }
    if (auto x = text_of(a), y = text_of(b); x && y && !(a.text && b.text)) return apply(*x, op, *y);
    return Truth::Unknown;
}

Truth and3(Truth a, Truth b) {
    if (a == Truth::False || b == Truth::False) return Truth::False;
    if (a == Truth::Unknown || b == Truth::Unknown) return Truth::Unknown;
    return Truth::True;
}

} // namespace

std::set<OracleRow> brute_force(const RuleAst& rule, const Graph& graph, const Schema& schema) {
    std::set<Term> domain;
    graph.for_each([&](IdTriple t, Provenance) {
        domain.insert(graph.term(t.s));
        domain.insert(graph.term(t.o));
    });
    const std::vector<Term> terms(domain.begin(), domain.end());

    std::vector<std::string> vars;
    auto note = [&](const std::string& v) {
        if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
    };
    for (const auto& atom : rule.body) {
        if (auto* c = std::get_if<ClassAtom>(&atom)) note(c->var);
        if (auto* p = std::get_if<PropertyAtom>(&atom)) {
            note(p->subject);
            note(p->object);
        }
    }

    std::map<std::string, Term> assignment;
    auto holds = [&](const Atom& atom) -> std::optional<bool> {
        if (auto* c = std::get_if<ClassAtom>(&atom)) {
            auto it = assignment.find(c->var);
            if (it == assignment.end()) return std::nullopt;
            if (!it->second.is_entity()) return false;
            return graph.contains({it->second, type_term(), entity(schema.iri(c->class_name))});
        }
        if (auto* p = std::get_if<PropertyAtom>(&atom)) {
            auto s = assignment.find(p->subject), o = assignment.find(p->object);
            if (s == assignment.end() || o == assignment.end()) return std::nullopt;
            if (!s->second.is_entity()) return false;
            return graph.contains({s->second, entity(schema.iri(p->property)), o->second});
        }
        return true;
    };
    auto operand = [&](const Operand& o) {
        Operand3 out;
        if (auto* v = std::get_if<Variable>(&o)) out.term = &assignment.at(v->name);
        else if (auto* n = std::get_if<NumberConst>(&o)) out.number = n->value;
        else out.text = std::get<StringConst>(o).value;
        return out;
    };
    auto head_only = [&](const std::vector<std::string>& names) {
        return std::all_of(names.begin(), names.end(), [&](const std::string& n) {
            return std::find(rule.head.begin(), rule.head.end(), n) != rule.head.end();
        });
    };

    std::set<OracleRow> out;
    std::function<void(std::size_t)> assign = [&](std::size_t k) {
        for (const auto& atom : rule.body)
            if (auto ok = holds(atom); ok && !*ok) return;
        if (k < vars.size()) {
            for (const auto& t : terms) {
                assignment.insert_or_assign(vars[k], t);
                assign(k + 1);
            }
            assignment.erase(vars[k]);
            return;
        }
        OracleRow row{assignment, Truth::True};
        for (const auto& atom : rule.body) {
            Truth t;
            std::vector<std::string> names;
            if (auto* c = std::get_if<CompareAtom>(&atom)) {
                for (const auto* o : {&c->left, &c->right})
                    if (auto* v = std::get_if<Variable>(o)) names.push_back(v->name);
                t = compare3(operand(c->left), c->op, operand(c->right));
            } else if (auto* r = std::get_if<RelDiffAtom>(&atom)) {
                names = {r->left, r->right};
                auto a = number_of(operand(Variable{r->left})), b = number_of(operand(Variable{r->right}));
                if (!a || !b || *a <= 0 || *b <= 0) t = Truth::Unknown;
                else t = verdict_of(std::fabs(*a - *b) / std::max(*a, *b) <= r->tolerance);
            } else {
                continue;
            }
            if (head_only(names)) {
                if (t != Truth::True) return;
            } else {
                row.verdict = and3(row.verdict, t);
            }
        }
        out.insert(std::move(row));
    };
    assign(0);
    return out;
}

std::set<OracleRow> rows_of(const BindingTable& table) {
    std::set<OracleRow> out;
    for (const auto& row : table.rows) {
        OracleRow r;
        r.verdict = row.verdict;
        for (std::size_t i = 0; i < table.columns.size(); ++i) r.values.emplace(table.columns[i], row.values[i]);
        out.insert(std::move(r));
    }
    return out;
}

} // namespace batchline::testing
