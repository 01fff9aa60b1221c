#include "batchline/planner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace batchline {

using nlohmann::json;

std::string_view to_string(Truth t) noexcept {
    switch (t) {
        case Truth::False: return "false";
        case Truth::True: return "true";
        case Truth::Unknown: return "unknown";
    }
    return "unknown";
}

Truth truth_and(Truth a, Truth b) noexcept {
    if (a == Truth::False || b == Truth::False) return Truth::False;
    if (a == Truth::Unknown || b == Truth::Unknown) return Truth::Unknown;
    return Truth::True;
}

bool reldiff_eval(double a, double b, double t) noexcept { return std::fabs(a - b) / std::max(a, b) <= t; }

Truth reldiff_truth(double a, double b, double t) noexcept {
    if (!(a > 0) || !(b > 0)) return Truth::Unknown;
    return reldiff_eval(a, b, t) ? Truth::True : Truth::False;
}

std::string_view to_string(VerdictValue v) noexcept {
    switch (v) {
        case VerdictValue::Match: return "MATCH";
        case VerdictValue::NoMatch: return "NO_MATCH";
        case VerdictValue::Inapplicable: return "INAPPLICABLE";
    }
    return "INAPPLICABLE";
}

std::optional<VerdictValue> parse_verdict(std::string_view text) noexcept {
    if (text == "MATCH") return VerdictValue::Match;
    if (text == "NO_MATCH") return VerdictValue::NoMatch;
    if (text == "INAPPLICABLE") return VerdictValue::Inapplicable;
    return std::nullopt;
}

namespace {

constexpr TermId kUnbound = static_cast<TermId>(std::numeric_limits<std::uint32_t>::max());

// Comparable view of a term or constant.
struct Value {
    enum class Kind : std::uint8_t { None, Entity, Number, Text, Date, Boolean, TextConst };

    Kind kind = Kind::None;
    double number = 0;
    std::string_view text;
    TermId id{};
};

Value value_of(const Term& term, TermId id) {
    Value v;
    v.id = id;
    if (term.is_entity()) {
        v.kind = Value::Kind::Entity;
        v.text = term.entity().id();
        return v;
    }
    const Literal& lit = term.literal();
    v.text = lit.lexical();
    switch (lit.datatype()) {
        case Datatype::Float:
        case Datatype::Integer:
            if (auto n = lit.numeric()) {
                v.kind = Value::Kind::Number;
                v.number = *n;
            }
            break;
        case Datatype::String: v.kind = Value::Kind::Text; break;
        case Datatype::Date: v.kind = Value::Kind::Date; break;
        case Datatype::Boolean: v.kind = Value::Kind::Boolean; break;
    }
    return v;
}

template <typename T>
Truth ordered(const T& a, CompareOp op, const T& b) {
    bool r = false;
    switch (op) {
        case CompareOp::Eq: r = a == b; break;
        case CompareOp::Ne: r = a != b; break;
        case CompareOp::Lt: r = a < b; break;
        case CompareOp::Le: r = a <= b; break;
        case CompareOp::Gt: r = a > b; break;
        case CompareOp::Ge: r = a >= b; break;
    }
    return r ? Truth::True : Truth::False;
}

bool is_equality(CompareOp op) { return op == CompareOp::Eq || op == CompareOp::Ne; }

Truth compare(const Value& a, CompareOp op, const Value& b) {
    using K = Value::Kind;
    if (a.kind == K::None || b.kind == K::None) return Truth::Unknown;
    if (a.kind == K::Number && b.kind == K::Number) return ordered(a.number, op, b.number);
    if (a.kind == K::Entity && b.kind == K::Entity)
        return is_equality(op) ? ordered(a.id, op, b.id) : Truth::Unknown;
    if (a.kind == K::Entity || b.kind == K::Entity || a.kind == K::Number || b.kind == K::Number)
        return Truth::Unknown;
    if (a.kind == b.kind) {
        if (a.kind == K::Boolean && !is_equality(op)) return Truth::Unknown;
        return ordered(a.text, op, b.text);
    }
    // One side is a string constant; read it in the other side's datatype.
    const bool left_const = a.kind == K::TextConst;
    const Value& typed = left_const ? b : a;
    const Value& constant = left_const ? a : b;
    std::string converted;
    switch (typed.kind) {
        case K::Text: converted = std::string(constant.text); break;
        case K::Date: {
            auto d = parse_date(constant.text);
            if (!d) return Truth::Unknown;
            converted = *d;
            break;
        }
        case K::Boolean: {
            if (!is_equality(op)) return Truth::Unknown;
            try {
                converted = Literal::make(Datatype::Boolean, constant.text).lexical();
            } catch (const InvalidTerm&) {
                return Truth::Unknown;
            }
            break;
        }
        default: return Truth::Unknown;
    }
    std::string_view c = converted;
    return left_const ? ordered(c, op, typed.text) : ordered(typed.text, op, c);
}

// Lazily filled comparable view of every term in a graph.
class ValueCache {
public:
    explicit ValueCache(const Graph& graph) : graph_(graph), values_(graph.term_count()), ready_(graph.term_count()) {}

    const Value& operator[](TermId id) {
        auto i = static_cast<std::size_t>(id);
        if (!ready_[i]) {
            values_[i] = value_of(graph_.term(id), id);
            ready_[i] = true;
        }
        return values_[i];
    }

    void prefill() {
        for (std::size_t i = 0; i < values_.size(); ++i) (*this)[static_cast<TermId>(i)];
    }

private:
    const Graph& graph_;
    std::vector<Value> values_;
    std::vector<bool> ready_;
};

Value operand_value(const PlanOperand& o, const TermId* row, ValueCache& cache) {
    if (auto* s = std::get_if<Slot>(&o)) {
        TermId id = row[s->index];
        if (id == kUnbound) return {};
        return cache[id];
    }
    Value v;
    if (auto* n = std::get_if<NumberConst>(&o)) {
        v.kind = Value::Kind::Number;
        v.number = n->value;
    } else {
        v.kind = Value::Kind::TextConst;
        v.text = std::get<StringConst>(o).value;
    }
    return v;
}

Truth evaluate(const Condition& c, const TermId* row, ValueCache& cache) {
    Value l = operand_value(c.left, row, cache);
    Value r = operand_value(c.right, row, cache);
    if (c.kind == Condition::Kind::RelDiff) {
        if (l.kind != Value::Kind::Number || r.kind != Value::Kind::Number) return Truth::Unknown;
        return reldiff_truth(l.number, r.number, c.tolerance);
    }
    return compare(l, c.op, r);
}

struct RuleVariables {
    std::vector<std::string> names;
    std::vector<std::size_t> head;
    std::map<std::string, std::size_t, std::less<>> slots;

    std::size_t slot(const std::string& name) const { return slots.at(name); }
};

RuleVariables number_variables(const RuleAst& rule) {
    RuleVariables v;
    auto add = [&](const std::string& name) {
        if (v.slots.emplace(name, v.names.size()).second) v.names.push_back(name);
    };
    for (const auto& h : rule.head) add(h);
    for (const auto& h : rule.head) v.head.push_back(v.slots.at(h));
    std::set<std::string> rest;
    auto note = [&](const std::string& name) {
        if (!v.slots.count(name)) rest.insert(name);
    };
    auto note_operand = [&](const Operand& o) {
        if (auto* var = std::get_if<Variable>(&o)) note(var->name);
    };
    for (const auto& atom : rule.body) {
        if (auto* c = std::get_if<ClassAtom>(&atom)) note(c->var);
        else if (auto* p = std::get_if<PropertyAtom>(&atom)) {
            note(p->subject);
            note(p->object);
        } else if (auto* c = std::get_if<CompareAtom>(&atom)) {
            note_operand(c->left);
            note_operand(c->right);
        } else {
            const auto& d = std::get<RelDiffAtom>(atom);
            note(d.left);
            note(d.right);
        }
    }
    for (const auto& name : rest) add(name);
    return v;
}

TripleScan make_scan(const Atom& atom, std::size_t index, const RuleVariables& vars, const Schema& schema) {
    TripleScan s;
    s.atom = index;
    if (auto* c = std::get_if<ClassAtom>(&atom)) {
        s.subject = Slot{vars.slot(c->var)};
        s.predicate = entity(std::string(kRdfType));
        s.object = entity(schema.iri(c->class_name));
    } else {
        const auto& p = std::get<PropertyAtom>(atom);
        s.subject = Slot{vars.slot(p.subject)};
        s.predicate = entity(schema.iri(p.property));
        s.object = Slot{vars.slot(p.object)};
    }
    return s;
}

bool is_scan(const Atom& atom) {
    return std::holds_alternative<ClassAtom>(atom) || std::holds_alternative<PropertyAtom>(atom);
}

Condition make_condition(const Atom& atom, const RuleVariables& vars) {
    auto operand = [&](const Operand& o) -> PlanOperand {
        if (auto* v = std::get_if<Variable>(&o)) return Slot{vars.slot(v->name)};
        if (auto* s = std::get_if<StringConst>(&o)) return *s;
        return std::get<NumberConst>(o);
    };
    Condition c;
    if (auto* cmp = std::get_if<CompareAtom>(&atom)) {
        c.kind = Condition::Kind::Compare;
        c.left = operand(cmp->left);
        c.op = cmp->op;
        c.right = operand(cmp->right);
    } else {
        const auto& d = std::get<RelDiffAtom>(atom);
        c.kind = Condition::Kind::RelDiff;
        c.left = Slot{vars.slot(d.left)};
        c.right = Slot{vars.slot(d.right)};
        c.tolerance = d.tolerance;
    }
    return c;
}

std::vector<std::size_t> slots_of(const TripleScan& s) {
    std::vector<std::size_t> out;
    for (const ScanTerm* t : {&s.subject, &s.predicate, &s.object})
        if (auto* slot = std::get_if<Slot>(t)) out.push_back(slot->index);
    return out;
}

std::vector<std::size_t> slots_of(const Condition& c) {
    std::vector<std::size_t> out;
    for (const PlanOperand* o : {&c.left, &c.right})
        if (auto* slot = std::get_if<Slot>(o)) out.push_back(slot->index);
    return out;
}

std::size_t estimate(const TripleScan& s, const Graph& graph) {
    IdPattern pattern;
    auto fix = [&](const ScanTerm& t, std::optional<TermId>& out) {
        if (auto* term = std::get_if<Term>(&t)) {
            auto id = graph.lookup(*term);
            if (!id) return false;
            out = *id;
        }
        return true;
    };
    if (!fix(s.subject, pattern.s) || !fix(s.predicate, pattern.p) || !fix(s.object, pattern.o)) return 0;
    return graph.count(pattern);
}

// Greedy join order: connected scans first, then ascending estimate, then source order.
std::vector<std::size_t> order_scans(const std::vector<TripleScan>& scans) {
    std::vector<std::size_t> order;
    std::vector<bool> used(scans.size());
    std::set<std::size_t> bound;
    while (order.size() < scans.size()) {
        std::optional<std::size_t> best;
        bool best_connected = false;
        for (std::size_t i = 0; i < scans.size(); ++i) {
            if (used[i]) continue;
            auto slots = slots_of(scans[i]);
            bool connected = std::any_of(slots.begin(), slots.end(), [&](auto s) { return bound.count(s); });
            if (!best || (connected && !best_connected) ||
                (connected == best_connected && scans[i].estimate < scans[*best].estimate)) {
                best = i;
                best_connected = connected;
            }
        }
        used[*best] = true;
        order.push_back(*best);
        for (auto s : slots_of(scans[*best])) bound.insert(s);
    }
    return order;
}

std::string slot_text(const ScanTerm& t, const std::vector<std::string>& names) {
    if (auto* s = std::get_if<Slot>(&t)) return "?" + names.at(s->index);
    return std::get<Term>(t).to_text();
}

std::string operand_text(const PlanOperand& o, const std::vector<std::string>& names) {
    if (auto* s = std::get_if<Slot>(&o)) return "?" + names.at(s->index);
    if (auto* n = std::get_if<NumberConst>(&o)) return format_float(n->value);
    return json(std::get<StringConst>(o).value).dump();
}

std::string condition_text(const Condition& c, const std::vector<std::string>& names) {
    if (c.kind == Condition::Kind::RelDiff)
        return "reldiff(" + operand_text(c.left, names) + ", " + operand_text(c.right, names) + ", " +
               format_float(c.tolerance) + ")";
    return operand_text(c.left, names) + " " + std::string(to_string(c.op)) + " " + operand_text(c.right, names);
}

std::string scan_text(const TripleScan& s, const std::vector<std::string>& names) {
    return "(" + slot_text(s.subject, names) + " " + slot_text(s.predicate, names) + " " +
           slot_text(s.object, names) + ")";
}

// Row-at-a-time evaluation of scans, filters and binds over flat TermId rows.
class Executor {
public:
    Executor(const Graph& graph, std::size_t width, ValueCache& cache) : graph_(graph), width_(width), cache_(cache) {
        rows_.assign(width_, kUnbound);
        verdicts_.push_back(Truth::True);
    }

    void scan(const TripleScan& s) {
        struct Pos {
            std::optional<std::size_t> slot;
            std::optional<TermId> id;
        };
        std::array<Pos, 3> pos;
        const ScanTerm* terms[3] = {&s.subject, &s.predicate, &s.object};
        for (int k = 0; k < 3; ++k) {
            if (auto* slot = std::get_if<Slot>(terms[k])) {
                pos[k].slot = slot->index;
            } else {
                pos[k].id = graph_.lookup(std::get<Term>(*terms[k]));
                if (!pos[k].id) {
                    rows_.clear();
                    verdicts_.clear();
                    return;
                }
            }
        }
        std::vector<TermId> out;
        std::vector<Truth> out_verdicts;
        std::vector<TermId> row(width_);
        const std::size_t n = verdicts_.size();
        for (std::size_t r = 0; r < n; ++r) {
            const TermId* in = &rows_[r * width_];
            IdPattern pattern;
            std::optional<TermId>* fields[3] = {&pattern.s, &pattern.p, &pattern.o};
            for (int k = 0; k < 3; ++k) {
                if (pos[k].id) *fields[k] = pos[k].id;
                else if (in[*pos[k].slot] != kUnbound) *fields[k] = in[*pos[k].slot];
            }
            graph_.for_each_match(pattern, [&](IdTriple t) {
                const TermId got[3] = {t.s, t.p, t.o};
                std::copy(in, in + width_, row.begin());
                for (int k = 0; k < 3; ++k) {
                    if (!pos[k].slot) continue;
                    TermId& cell = row[*pos[k].slot];
                    if (cell == kUnbound) cell = got[k];
                    else if (cell != got[k]) return;
                }
                out.insert(out.end(), row.begin(), row.end());
                out_verdicts.push_back(verdicts_[r]);
            });
        }
        rows_ = std::move(out);
        verdicts_ = std::move(out_verdicts);
    }

    void filter(const Condition& c) {
        std::size_t keep = 0;
        for (std::size_t r = 0; r < verdicts_.size(); ++r) {
            if (evaluate(c, &rows_[r * width_], cache_) != Truth::True) continue;
            if (keep != r) {
                std::copy_n(&rows_[r * width_], width_, &rows_[keep * width_]);
                verdicts_[keep] = verdicts_[r];
            }
            ++keep;
        }
        rows_.resize(keep * width_);
        verdicts_.resize(keep);
    }

    void bind(const Condition& c) {
        for (std::size_t r = 0; r < verdicts_.size(); ++r)
            verdicts_[r] = truth_and(verdicts_[r], evaluate(c, &rows_[r * width_], cache_));
    }

    void run(const std::vector<PlanStep>& steps) {
        for (const auto& step : steps) {
            if (auto* s = std::get_if<TripleScan>(&step)) scan(*s);
            else if (auto* j = std::get_if<Join>(&step)) scan(j->scan);
            else if (auto* f = std::get_if<Filter>(&step)) filter(f->condition);
            else bind(std::get<Bind>(step).condition);
        }
    }

    std::size_t size() const { return verdicts_.size(); }
    const TermId* row(std::size_t r) const { return &rows_[r * width_]; }
    Truth verdict(std::size_t r) const { return verdicts_[r]; }

private:
    const Graph& graph_;
    std::size_t width_;
    ValueCache& cache_;
    std::vector<TermId> rows_;
    std::vector<Truth> verdicts_;
};

std::string atom_text(const Atom& atom) {
    if (auto* c = std::get_if<ClassAtom>(&atom)) return c->class_name + "(" + c->var + ")";
    const auto& p = std::get<PropertyAtom>(atom);
    return p.property + "(" + p.subject + ", " + p.object + ")";
}

} // namespace

std::string QueryPlan::describe() const {
    std::string out = "plan " + rule + "(";
    for (std::size_t i = 0; i < head.size(); ++i) out += (i ? ", " : "") + variables.at(head[i]);
    out += ")\n";
    for (const auto& step : steps) {
        if (auto* s = std::get_if<TripleScan>(&step)) {
            out += "  scan " + scan_text(*s, variables) + " est=" + std::to_string(s->estimate) + "\n";
        } else if (auto* j = std::get_if<Join>(&step)) {
            out += "  join";
            if (j->on.empty()) out += " cross";
            for (std::size_t i = 0; i < j->on.size(); ++i) out += (i ? ", ?" : " on ?") + variables.at(j->on[i]);
            out += " " + scan_text(j->scan, variables) + " est=" + std::to_string(j->scan.estimate) + "\n";
        } else if (auto* f = std::get_if<Filter>(&step)) {
            out += "  filter " + condition_text(f->condition, variables) + "\n";
        } else {
            out += "  bind " + condition_text(std::get<Bind>(step).condition, variables) + "\n";
        }
    }
    return out;
}

QueryPlan compile(const RuleAst& rule, const Schema& schema, const Graph* graph) {
    const RuleVariables vars = number_variables(rule);
    QueryPlan plan;
    plan.rule = rule.name;
    plan.variables = vars.names;
    plan.head = vars.head;

    std::vector<TripleScan> scans;
    std::vector<std::pair<std::size_t, Condition>> conditions;
    for (std::size_t i = 0; i < rule.body.size(); ++i) {
        if (is_scan(rule.body[i])) {
            scans.push_back(make_scan(rule.body[i], i, vars, schema));
            if (graph) scans.back().estimate = estimate(scans.back(), *graph);
        } else {
            conditions.emplace_back(i, make_condition(rule.body[i], vars));
        }
    }

    const std::set<std::size_t> head(vars.head.begin(), vars.head.end());
    std::vector<bool> placed(conditions.size());
    std::set<std::size_t> bound;
    for (std::size_t pick : order_scans(scans)) {
        const TripleScan& s = scans[pick];
        auto slots = slots_of(s);
        if (plan.steps.empty()) {
            plan.steps.emplace_back(s);
        } else {
            Join j{s, {}};
            for (auto slot : slots)
                if (bound.count(slot) && std::find(j.on.begin(), j.on.end(), slot) == j.on.end()) j.on.push_back(slot);
            std::sort(j.on.begin(), j.on.end());
            plan.steps.emplace_back(std::move(j));
        }
        bound.insert(slots.begin(), slots.end());
        for (std::size_t c = 0; c < conditions.size(); ++c) {
            if (placed[c]) continue;
            auto used = slots_of(conditions[c].second);
            bool head_only = std::all_of(used.begin(), used.end(), [&](auto x) { return head.count(x); });
            bool ready = std::all_of(used.begin(), used.end(), [&](auto x) { return bound.count(x); });
            if (head_only && ready) {
                plan.steps.emplace_back(Filter{conditions[c].first, conditions[c].second});
                placed[c] = true;
            }
        }
    }
    for (std::size_t c = 0; c < conditions.size(); ++c)
        if (!placed[c]) plan.steps.emplace_back(Bind{conditions[c].first, conditions[c].second});
    return plan;
}

std::size_t BindingTable::column(std::string_view name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw std::out_of_range("no column " + std::string(name));
    return static_cast<std::size_t>(it - columns.begin());
}

BindingTable execute(const QueryPlan& plan, const Graph& graph) {
    ValueCache cache(graph);
    Executor ex(graph, plan.variables.size(), cache);
    ex.run(plan.steps);
    BindingTable table;
    table.columns = plan.variables;
    table.rows.reserve(ex.size());
    for (std::size_t r = 0; r < ex.size(); ++r) {
        BindingRow row;
        row.verdict = ex.verdict(r);
        for (std::size_t c = 0; c < plan.variables.size(); ++c) row.values.push_back(graph.term(ex.row(r)[c]));
        table.rows.push_back(std::move(row));
    }
    std::sort(table.rows.begin(), table.rows.end());
    table.rows.erase(std::unique(table.rows.begin(), table.rows.end()), table.rows.end());
    return table;
}

json Verdict::to_json() const {
    json support_lines = json::array();
    for (const auto& t : support) support_lines.push_back(to_text(t));
    json doc{{"value", to_string(value)}, {"bindings", bindings}, {"support", support_lines}};
    if (!missing.empty()) doc["missing"] = missing;
    return doc;
}

Verdict Verdict::from_json(const std::string& rule, const json& doc) {
    Verdict v;
    v.rule = rule;
    auto value = parse_verdict(doc.at("value").get<std::string>());
    if (!value) throw std::invalid_argument("unknown verdict value " + doc.at("value").dump());
    v.value = *value;
    if (doc.contains("bindings")) v.bindings = doc.at("bindings").get<std::map<std::string, std::string>>();
    if (doc.contains("support"))
        for (const auto& line : doc.at("support")) v.support.push_back(parse_triple(line.get<std::string>()));
    if (doc.contains("missing")) v.missing = doc.at("missing").get<std::vector<std::string>>();
    return v;
}

json PairResult::to_json() const {
    json verdict_map = json::object();
    for (const auto& [rule, v] : verdicts) verdict_map[rule] = v.to_json();
    return json{{"s1", s1}, {"s2", s2}, {"verdicts", verdict_map}};
}

void VerdictCounts::add(VerdictValue v) noexcept {
    switch (v) {
        case VerdictValue::Match: ++match; break;
        case VerdictValue::NoMatch: ++no_match; break;
        case VerdictValue::Inapplicable: ++inapplicable; break;
    }
}

json EvaluationSummary::to_json() const {
    json by = json::object();
    for (const auto& [rule, c] : by_rule)
        by[rule] = json{{"MATCH", c.match}, {"NO_MATCH", c.no_match}, {"INAPPLICABLE", c.inapplicable}};
    json errs = json::array();
    for (const auto& e : errors) errs.push_back(json{{"rule", e.rule}, {"message", e.message}});
    return json{{"rules", rules}, {"pairs", pairs}, {"byRule", by}, {"errors", errs}};
}

const PairResult* MatchReport::find(std::string_view s1, std::string_view s2) const {
    if (s2 < s1) std::swap(s1, s2);
    auto it = std::lower_bound(pairs.begin(), pairs.end(), std::pair{s1, s2}, [](const PairResult& p, const auto& key) {
        return std::pair<std::string_view, std::string_view>{p.s1, p.s2} < key;
    });
    if (it == pairs.end() || it->s1 != s1 || it->s2 != s2) return nullptr;
    return &*it;
}

json MatchReport::to_json() const {
    json list = json::array();
    for (const auto& p : pairs) list.push_back(p.to_json());
    return json{{"dataset", dataset}, {"pairs", list}, {"summary", summary.to_json()}};
}

MatchReport MatchReport::from_json(const json& doc) {
    MatchReport report;
    report.dataset = doc.value("dataset", "");
    for (const auto& p : doc.at("pairs")) {
        PairResult pr;
        pr.s1 = p.at("s1").get<std::string>();
        pr.s2 = p.at("s2").get<std::string>();
        for (const auto& [rule, v] : p.at("verdicts").items()) pr.verdicts.emplace(rule, Verdict::from_json(rule, v));
        report.pairs.push_back(std::move(pr));
    }
    std::sort(report.pairs.begin(), report.pairs.end(),
              [](const auto& a, const auto& b) { return std::tie(a.s1, a.s2) < std::tie(b.s1, b.s2); });
    const json& s = doc.at("summary");
    report.summary.rules = s.at("rules").get<std::vector<std::string>>();
    report.summary.pairs = s.at("pairs").get<std::size_t>();
    for (const auto& [rule, c] : s.at("byRule").items())
        report.summary.by_rule[rule] = {c.at("MATCH").get<std::size_t>(), c.at("NO_MATCH").get<std::size_t>(),
                                        c.at("INAPPLICABLE").get<std::size_t>()};
    if (s.contains("errors"))
        for (const auto& e : s.at("errors"))
            report.summary.errors.push_back({e.at("rule").get<std::string>(), e.at("message").get<std::string>()});
    return report;
}

std::string MatchReport::to_tsv() const {
    std::string out = "s1\ts2\trule\tverdict\n";
    for (const auto& p : pairs) {
        for (const auto& rule : summary.rules) {
            auto it = p.verdicts.find(rule);
            if (it == p.verdicts.end()) continue;
            out += p.s1 + "\t" + p.s2 + "\t" + rule + "\t" + std::string(to_string(it->second.value)) + "\n";
        }
    }
    return out;
}

namespace {

// A group of scan atoms connected through non-head variables, executed once
// over the whole graph and indexed by the head values it mentions.
struct Component {
    enum class Signature { First, Second, Both, Neither };

    Signature signature = Signature::Neither;
    std::vector<std::size_t> atoms; // body indices
    std::vector<TripleScan> scans;
    std::vector<std::size_t> inner; // non-head slots, stored per row
    std::vector<TermId> data;
    // First / Second: row range per candidate index. Both: keyed by index pair.
    std::vector<std::uint32_t> offsets;
    std::unordered_map<std::uint64_t, std::pair<std::uint32_t, std::uint32_t>> pair_ranges;

    std::pair<std::uint32_t, std::uint32_t> range(std::uint32_t i, std::uint32_t j) const {
        switch (signature) {
            case Signature::First: return {offsets[i], offsets[i + 1]};
            case Signature::Second: return {offsets[j], offsets[j + 1]};
            case Signature::Both: {
                auto it = pair_ranges.find((std::uint64_t{i} << 32) | j);
                return it == pair_ranges.end() ? std::pair<std::uint32_t, std::uint32_t>{0, 0} : it->second;
            }
            case Signature::Neither: return {0, static_cast<std::uint32_t>(offsets.at(0))};
        }
        return {0, 0};
    }
};

// Rules whose components each touch exactly one head variable, flattened to
// one row table per side: a pair then costs two range lookups.
struct FastSide {
    bool constrained = false;
    std::size_t width = 0;
    std::vector<std::uint32_t> offsets; // per candidate
    std::vector<const Value*> cells;
};

struct FastOperand {
    enum class Source : std::uint8_t { First, Second, SideA, SideB, Constant };
    Source source = Source::Constant;
    std::size_t index = 0;
    Value constant;
};

struct FastCondition {
    Condition::Kind kind = Condition::Kind::Compare;
    CompareOp op = CompareOp::Eq;
    double tolerance = 0;
    FastOperand left;
    FastOperand right;
};

struct FastRule {
    bool enabled = false;
    FastSide a;
    FastSide b;
    std::vector<FastCondition> conditions;
};

struct PreparedRule {
    const RuleAst* ast = nullptr;
    RuleVariables vars;
    std::size_t h1 = 0;
    std::size_t h2 = 0;
    std::vector<Condition> conditions;
    std::vector<Component> components;
    // Class atoms constraining each head variable.
    std::vector<std::string> first_classes;
    std::vector<std::string> second_classes;
    FastRule fast;
};

struct Witness {
    std::vector<TermId> assignment;
    std::vector<std::size_t> missing_components;
};

class PairEvaluator {
public:
    PairEvaluator(const RuleSet& rules, const Graph& graph, const Schema& schema, const EvaluationOptions& options)
        : graph_(graph), schema_(schema), options_(options), cache_(graph) {
        for (const auto& rule : rules) prepare(rule);
        build_candidates();
        cache_.prefill();
        for (auto& r : prepared_) {
            index(r);
            flatten(r);
        }
    }

    EvaluationSummary& summary() { return summary_; }
    const std::vector<PreparedRule>& prepared() const { return prepared_; }
    const std::vector<TermId>& candidates() const { return candidates_; }

    VerdictValue eval(const PreparedRule& r, std::uint32_t i, std::uint32_t j, Witness* witness) {
        if (!witness && r.fast.enabled) return eval_fast(r.fast, i, j);
        const std::size_t width = r.vars.names.size();
        assignment_.assign(width, kUnbound);
        assignment_[r.h1] = candidates_[i];
        assignment_[r.h2] = candidates_[j];

        const std::size_t nc = r.components.size();
        ranges_.resize(nc);
        bool missing = false;
        for (std::size_t c = 0; c < nc; ++c) {
            ranges_[c] = r.components[c].range(i, j);
            if (ranges_[c].first == ranges_[c].second) {
                missing = true;
                if (!witness) return VerdictValue::Inapplicable;
                witness->missing_components.push_back(c);
            }
        }
        if (missing) {
            witness->assignment = assignment_;
            return VerdictValue::Inapplicable;
        }

        cursor_.assign(nc, 0);
        for (std::size_t c = 0; c < nc; ++c) cursor_[c] = ranges_[c].first;
        bool saw_false = false;
        bool have_first = false;
        for (;;) {
            for (std::size_t c = 0; c < nc; ++c) {
                const auto& comp = r.components[c];
                const TermId* row = comp.data.data() + std::size_t{cursor_[c]} * comp.inner.size();
                for (std::size_t k = 0; k < comp.inner.size(); ++k) assignment_[comp.inner[k]] = row[k];
            }
            Truth t = Truth::True;
            for (const auto& cond : r.conditions) {
                t = truth_and(t, evaluate(cond, assignment_.data(), cache_));
                if (t == Truth::False) break;
            }
            if (witness && (!have_first || (t == Truth::False && !saw_false))) {
                witness->assignment = assignment_;
                have_first = true;
            }
            if (t == Truth::True) {
                if (witness) witness->assignment = assignment_;
                return VerdictValue::Match;
            }
            if (t == Truth::False) saw_false = true;
            std::size_t c = 0;
            for (; c < nc; ++c) {
                if (++cursor_[c] < ranges_[c].second) break;
                cursor_[c] = ranges_[c].first;
            }
            if (c == nc) break;
        }
        return saw_false ? VerdictValue::NoMatch : VerdictValue::Inapplicable;
    }

    // Calls fn(i, j) for each candidate pair; i < j.
    template <typename Fn>
    void for_each_pair(Fn&& fn) const {
        const auto n = static_cast<std::uint32_t>(candidates_.size());
        if (!options_.block) {
            for (std::uint32_t i = 0; i < n; ++i)
                for (std::uint32_t j = i + 1; j < n; ++j) fn(i, j);
            return;
        }
        for (std::uint32_t g = 0; g < blocks_.size(); ++g) {
            const auto& members = blocks_[g];
            for (std::size_t a = 0; a < members.size(); ++a) {
                for (std::size_t b = a + 1; b < members.size(); ++b) {
                    std::uint32_t i = members[a], j = members[b];
                    if ((keys_[i].size() > 1 || keys_[j].size() > 1) && first_shared(i, j) != g) continue;
                    fn(i, j);
                }
            }
        }
    }

private:
    const Value* fetch(const FastOperand& o, std::uint32_t i, std::uint32_t j, const Value* const* a,
                       const Value* const* b) {
        switch (o.source) {
            case FastOperand::Source::First: return &cache_[candidates_[i]];
            case FastOperand::Source::Second: return &cache_[candidates_[j]];
            case FastOperand::Source::SideA: return a[o.index];
            case FastOperand::Source::SideB: return b[o.index];
            case FastOperand::Source::Constant: return &o.constant;
        }
        return &o.constant;
    }

    VerdictValue eval_fast(const FastRule& f, std::uint32_t i, std::uint32_t j) {
        std::uint32_t ab = 0, ae = 1, bb = 0, be = 1;
        if (f.a.constrained) {
            ab = f.a.offsets[i];
            ae = f.a.offsets[i + 1];
            if (ab == ae) return VerdictValue::Inapplicable;
        }
        if (f.b.constrained) {
            bb = f.b.offsets[j];
            be = f.b.offsets[j + 1];
            if (bb == be) return VerdictValue::Inapplicable;
        }
        bool saw_false = false;
        for (std::uint32_t x = ab; x < ae; ++x) {
            const Value* const* arow = f.a.cells.data() + std::size_t{x} * f.a.width;
            for (std::uint32_t y = bb; y < be; ++y) {
                const Value* const* brow = f.b.cells.data() + std::size_t{y} * f.b.width;
                Truth t = Truth::True;
                for (const auto& c : f.conditions) {
                    const Value* l = fetch(c.left, i, j, arow, brow);
                    const Value* r = fetch(c.right, i, j, arow, brow);
                    Truth v;
                    if (c.kind == Condition::Kind::RelDiff)
                        v = l->kind == Value::Kind::Number && r->kind == Value::Kind::Number
                                ? reldiff_truth(l->number, r->number, c.tolerance)
                                : Truth::Unknown;
                    else
                        v = compare(*l, c.op, *r);
                    t = truth_and(t, v);
                    if (t == Truth::False) break;
                }
                if (t == Truth::True) return VerdictValue::Match;
                if (t == Truth::False) saw_false = true;
            }
        }
        return saw_false ? VerdictValue::NoMatch : VerdictValue::Inapplicable;
    }

    void flatten(PreparedRule& r) {
        using S = Component::Signature;
        for (const auto& comp : r.components)
            if (comp.signature == S::Both || comp.signature == S::Neither) return;
        FastRule& f = r.fast;
        std::map<std::size_t, std::size_t> a_cells, b_cells;
        const auto n = static_cast<std::uint32_t>(candidates_.size());
        auto build = [&](S side, FastSide& out, std::map<std::size_t, std::size_t>& cell_of) {
            std::vector<const Component*> comps;
            for (const auto& comp : r.components)
                if (comp.signature == side) comps.push_back(&comp);
            if (comps.empty()) return;
            out.constrained = true;
            for (const auto* comp : comps)
                for (auto slot : comp->inner) cell_of.emplace(slot, out.width++);
            out.offsets.assign(n + 1, 0);
            std::vector<std::uint32_t> cursor(comps.size());
            for (std::uint32_t i = 0; i < n; ++i) {
                out.offsets[i + 1] = out.offsets[i];
                bool empty = false;
                for (std::size_t c = 0; c < comps.size(); ++c) {
                    cursor[c] = comps[c]->offsets[i];
                    if (cursor[c] == comps[c]->offsets[i + 1]) empty = true;
                }
                if (empty) continue;
                for (;;) {
                    for (std::size_t c = 0; c < comps.size(); ++c) {
                        const auto* comp = comps[c];
                        for (std::size_t k = 0; k < comp->inner.size(); ++k)
                            out.cells.push_back(&cache_[comp->data[std::size_t{cursor[c]} * comp->inner.size() + k]]);
                    }
                    ++out.offsets[i + 1];
                    std::size_t c = 0;
                    for (; c < comps.size(); ++c) {
                        if (++cursor[c] < comps[c]->offsets[i + 1]) break;
                        cursor[c] = comps[c]->offsets[i];
                    }
                    if (c == comps.size()) break;
                }
            }
        };
        build(S::First, f.a, a_cells);
        build(S::Second, f.b, b_cells);
        auto operand = [&](const PlanOperand& o) {
            FastOperand out;
            if (auto* slot = std::get_if<Slot>(&o)) {
                if (slot->index == r.h1) out.source = FastOperand::Source::First;
                else if (slot->index == r.h2) out.source = FastOperand::Source::Second;
                else if (auto it = a_cells.find(slot->index); it != a_cells.end()) {
                    out.source = FastOperand::Source::SideA;
                    out.index = it->second;
                } else {
                    out.source = FastOperand::Source::SideB;
                    out.index = b_cells.at(slot->index);
                }
            } else if (auto* num = std::get_if<NumberConst>(&o)) {
                out.constant.kind = Value::Kind::Number;
                out.constant.number = num->value;
            } else {
                out.constant.kind = Value::Kind::TextConst;
                out.constant.text = std::get<StringConst>(o).value;
            }
            return out;
        };
        for (const auto& c : r.conditions)
            f.conditions.push_back({c.kind, c.op, c.tolerance, operand(c.left), operand(c.right)});
        f.enabled = true;
    }

    void fail(const RuleAst& rule, std::string message) { summary_.errors.push_back({rule.name, std::move(message)}); }

    void prepare(const RuleAst& rule) {
        auto diags = validate_rule(rule, schema_);
        if (!diags.empty()) {
            std::string msg;
            for (const auto& d : diags) msg += (msg.empty() ? "" : "; ") + d.describe();
            return fail(rule, msg);
        }
        if (rule.head.size() != 2) return fail(rule, "match rules take exactly two head variables");
        if (rule.head[0] == rule.head[1]) return fail(rule, "head variables must be distinct");

        PreparedRule r;
        r.ast = &rule;
        r.vars = number_variables(rule);
        r.h1 = r.vars.head[0];
        r.h2 = r.vars.head[1];
        for (const auto& atom : rule.body) {
            if (auto* c = std::get_if<ClassAtom>(&atom)) {
                if (c->var == rule.head[0]) r.first_classes.push_back(c->class_name);
                if (c->var == rule.head[1]) r.second_classes.push_back(c->class_name);
            }
        }
        if (r.first_classes.empty() || r.second_classes.empty())
            return fail(rule, "each head variable needs a class atom");

        // Union-find over scan atoms sharing a non-head variable.
        std::vector<std::size_t> scan_atoms;
        for (std::size_t i = 0; i < rule.body.size(); ++i) {
            if (is_scan(rule.body[i])) scan_atoms.push_back(i);
            else r.conditions.push_back(make_condition(rule.body[i], r.vars));
        }
        std::vector<std::size_t> parent(scan_atoms.size());
        std::iota(parent.begin(), parent.end(), 0);
        std::function<std::size_t(std::size_t)> root = [&](std::size_t x) {
            return parent[x] == x ? x : parent[x] = root(parent[x]);
        };
        std::map<std::size_t, std::size_t> owner; // inner slot -> scan position
        std::vector<TripleScan> scans;
        for (std::size_t k = 0; k < scan_atoms.size(); ++k) {
            scans.push_back(make_scan(rule.body[scan_atoms[k]], scan_atoms[k], r.vars, schema_));
            scans.back().estimate = estimate(scans.back(), graph_);
            for (auto slot : slots_of(scans.back())) {
                if (slot == r.h1 || slot == r.h2) continue;
                auto [it, fresh] = owner.emplace(slot, k);
                if (!fresh) parent[root(k)] = root(it->second);
            }
        }
        std::map<std::size_t, std::size_t> component_of_root;
        for (std::size_t k = 0; k < scan_atoms.size(); ++k) {
            auto [it, fresh] = component_of_root.emplace(root(k), r.components.size());
            if (fresh) r.components.emplace_back();
            Component& comp = r.components[it->second];
            comp.atoms.push_back(scan_atoms[k]);
            comp.scans.push_back(scans[k]);
        }
        for (auto& comp : r.components) {
            bool first = false, second = false;
            std::set<std::size_t> inner;
            for (const auto& s : comp.scans) {
                for (auto slot : slots_of(s)) {
                    if (slot == r.h1) first = true;
                    else if (slot == r.h2) second = true;
                    else inner.insert(slot);
                }
            }
            comp.inner.assign(inner.begin(), inner.end());
            using S = Component::Signature;
            comp.signature = first && second ? S::Both : first ? S::First : second ? S::Second : S::Neither;
        }
        summary_.rules.push_back(rule.name);
        summary_.by_rule[rule.name];
        prepared_.push_back(std::move(r));
    }

    std::vector<TermId> instances_of_all(const std::vector<std::string>& classes) {
        std::vector<TermId> out;
        auto type = graph_.lookup(entity(std::string(kRdfType)));
        if (!type) return out;
        bool first = true;
        for (const auto& name : classes) {
            std::vector<TermId> members;
            if (auto cls = graph_.lookup(entity(schema_.iri(name))))
                graph_.for_each_match(IdPattern{std::nullopt, *type, *cls}, [&](IdTriple t) { members.push_back(t.s); });
            std::sort(members.begin(), members.end());
            if (first) {
                out = std::move(members);
                first = false;
            } else {
                std::vector<TermId> both;
                std::set_intersection(out.begin(), out.end(), members.begin(), members.end(), std::back_inserter(both));
                out = std::move(both);
            }
        }
        return out;
    }

    void build_candidates() {
        std::set<TermId> all;
        for (const auto& r : prepared_) {
            for (auto id : instances_of_all(r.first_classes)) all.insert(id);
            for (auto id : instances_of_all(r.second_classes)) all.insert(id);
        }
        candidates_.assign(all.begin(), all.end());
        std::sort(candidates_.begin(), candidates_.end(),
                  [&](TermId a, TermId b) { return graph_.term(a).entity().id() < graph_.term(b).entity().id(); });
        position_.assign(graph_.term_count(), kNone);
        for (std::uint32_t i = 0; i < candidates_.size(); ++i)
            position_[static_cast<std::size_t>(candidates_[i])] = i;

        if (!options_.block) return;
        keys_.assign(candidates_.size(), {});
        auto prop = graph_.lookup(entity(schema_.iri(options_.blocking_property)));
        std::map<std::string, std::vector<std::uint32_t>> groups;
        if (prop) {
            for (std::uint32_t i = 0; i < candidates_.size(); ++i)
                graph_.for_each_match(IdPattern{candidates_[i], *prop, std::nullopt},
                                      [&](IdTriple t) { groups[graph_.term(t.o).to_text()].push_back(i); });
        }
        for (auto& [key, members] : groups) {
            const auto g = static_cast<std::uint32_t>(blocks_.size());
            for (auto i : members) keys_[i].push_back(g);
            blocks_.push_back(std::move(members));
        }
    }

    std::uint32_t first_shared(std::uint32_t i, std::uint32_t j) const {
        for (auto a : keys_[i])
            if (std::find(keys_[j].begin(), keys_[j].end(), a) != keys_[j].end()) return a;
        return kNone;
    }

    void index(PreparedRule& r) {
        const std::size_t width = r.vars.names.size();
        const auto n = static_cast<std::uint32_t>(candidates_.size());
        for (auto& comp : r.components) {
            Executor ex(graph_, width, cache_);
            for (auto pick : order_scans(comp.scans)) ex.scan(comp.scans[pick]);
            const std::size_t w = comp.inner.size();
            auto pos = [&](TermId id) { return position_[static_cast<std::size_t>(id)]; };
            auto copy_inner = [&](const TermId* row, std::vector<TermId>& out) {
                for (auto slot : comp.inner) out.push_back(row[slot]);
            };
            using S = Component::Signature;
            if (comp.signature == S::Neither) {
                for (std::size_t k = 0; k < ex.size(); ++k) copy_inner(ex.row(k), comp.data);
                comp.offsets = {static_cast<std::uint32_t>(ex.size())};
            } else if (comp.signature == S::Both) {
                std::map<std::uint64_t, std::vector<std::size_t>> by_pair;
                for (std::size_t k = 0; k < ex.size(); ++k) {
                    auto i = pos(ex.row(k)[r.h1]), j = pos(ex.row(k)[r.h2]);
                    if (i == kNone || j == kNone) continue;
                    by_pair[(std::uint64_t{i} << 32) | j].push_back(k);
                }
                std::uint32_t stored = 0;
                for (const auto& [key, rows] : by_pair) {
                    for (auto k : rows) copy_inner(ex.row(k), comp.data);
                    auto count = static_cast<std::uint32_t>(rows.size());
                    comp.pair_ranges[key] = {stored, stored + count};
                    stored += count;
                }
            } else {
                const std::size_t head = comp.signature == S::First ? r.h1 : r.h2;
                std::vector<std::uint32_t> counts(n + 1, 0);
                for (std::size_t k = 0; k < ex.size(); ++k)
                    if (auto i = pos(ex.row(k)[head]); i != kNone) ++counts[i + 1];
                for (std::uint32_t i = 0; i < n; ++i) counts[i + 1] += counts[i];
                comp.offsets = counts;
                comp.data.assign(std::size_t{counts[n]} * w, kUnbound);
                std::vector<std::uint32_t> fill(counts.begin(), counts.end() - 1);
                for (std::size_t k = 0; k < ex.size(); ++k) {
                    auto i = pos(ex.row(k)[head]);
                    if (i == kNone) continue;
                    auto at = fill[i]++;
                    for (std::size_t q = 0; q < w; ++q) comp.data[std::size_t{at} * w + q] = ex.row(k)[comp.inner[q]];
                }
            }
        }
    }

    static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

    const Graph& graph_;
    const Schema& schema_;
    EvaluationOptions options_;
    ValueCache cache_;
    EvaluationSummary summary_;
    std::vector<PreparedRule> prepared_;
    std::vector<TermId> candidates_;
    std::vector<std::uint32_t> position_;
    std::vector<std::vector<std::uint32_t>> blocks_;
    std::vector<std::vector<std::uint32_t>> keys_;

    std::vector<TermId> assignment_;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> ranges_;
    std::vector<std::uint32_t> cursor_;
};

Verdict explain(const PreparedRule& r, VerdictValue value, const Witness& w, const Graph& graph) {
    Verdict v;
    v.value = value;
    v.rule = r.ast->name;
    for (std::size_t s = 0; s < r.vars.names.size(); ++s)
        if (w.assignment[s] != kUnbound) v.bindings[r.vars.names[s]] = graph.term(w.assignment[s]).to_text();
    if (!w.missing_components.empty()) {
        for (auto c : w.missing_components)
            for (auto atom : r.components[c].atoms) v.missing.push_back(atom_text(r.ast->body[atom]));
        return v;
    }
    for (const auto& comp : r.components) {
        for (const auto& s : comp.scans) {
            auto resolve = [&](const ScanTerm& t) -> Term {
                if (auto* slot = std::get_if<Slot>(&t)) return graph.term(w.assignment[slot->index]);
                return std::get<Term>(t);
            };
            v.support.push_back({resolve(s.subject), resolve(s.predicate), resolve(s.object)});
        }
    }
    std::sort(v.support.begin(), v.support.end());
    return v;
}

} // namespace

EvaluationSummary evaluate_ruleset(const RuleSet& rules, const Graph& graph, const Schema& schema,
                                   const EvaluationOptions& options, const PairSink& sink) {
    PairEvaluator ev(rules, graph, schema, options);
    auto& summary = ev.summary();
    const auto& prepared = ev.prepared();
    std::vector<VerdictCounts> counts(prepared.size());
    std::vector<VerdictValue> verdicts(prepared.size());
    const auto& cands = ev.candidates();
    ev.for_each_pair([&](std::uint32_t i, std::uint32_t j) {
        for (std::size_t r = 0; r < prepared.size(); ++r) {
            verdicts[r] = ev.eval(prepared[r], i, j, nullptr);
            counts[r].add(verdicts[r]);
        }
        ++summary.pairs;
        if (sink) sink(cands[i], cands[j], verdicts);
    });
    for (std::size_t r = 0; r < prepared.size(); ++r) summary.by_rule[prepared[r].ast->name] = counts[r];
    return summary;
}

MatchReport evaluate_ruleset(const RuleSet& rules, const Graph& graph, const Schema& schema,
                             const EvaluationOptions& options, std::string dataset) {
    PairEvaluator ev(rules, graph, schema, options);
    MatchReport report;
    report.dataset = std::move(dataset);
    const auto& prepared = ev.prepared();
    const auto& cands = ev.candidates();
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    ev.for_each_pair([&](std::uint32_t i, std::uint32_t j) { pairs.emplace_back(i, j); });
    std::sort(pairs.begin(), pairs.end());
    for (auto [i, j] : pairs) {
        PairResult pr;
        pr.s1 = graph.term(cands[i]).to_text();
        pr.s2 = graph.term(cands[j]).to_text();
        for (const auto& r : prepared) {
            Witness w;
            VerdictValue value = ev.eval(r, i, j, &w);
            ev.summary().by_rule[r.ast->name].add(value);
            pr.verdicts.emplace(r.ast->name, explain(r, value, w, graph));
        }
        report.pairs.push_back(std::move(pr));
    }
    ev.summary().pairs = report.pairs.size();
    report.summary = ev.summary();
    return report;
}

} // namespace batchline
