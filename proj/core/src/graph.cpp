#include "batchline/graph.hpp"

#include <algorithm>

#include "sha256.hpp"

namespace batchline {

namespace {

std::string dictionary_key(const Term& term) {
    if (term.is_entity()) return "E" + term.entity().id();
    const auto& l = term.literal();
    std::string key = "L";
    key += static_cast<char>('0' + static_cast<int>(l.datatype()));
    key += l.lexical();
    return key;
}

} // namespace

std::string to_text(const Triple& t) {
    std::string line = t.subject.to_text();
    line += ' ';
    line += t.predicate.to_text();
    line += ' ';
    line += t.object.to_text();
    return line;
}

Triple parse_triple(std::string_view line) {
    auto first = line.find(' ');
    if (first == std::string_view::npos) throw MalformedTriple("expected three terms: " + std::string(line));
    auto second = line.find(' ', first + 1);
    if (second == std::string_view::npos) throw MalformedTriple("expected three terms: " + std::string(line));
    try {
        return Triple{Term(Entity(std::string(line.substr(0, first)))),
                      Term(Entity(std::string(line.substr(first + 1, second - first - 1)))),
                      Term::parse(line.substr(second + 1))};
    } catch (const InvalidTerm& e) {
        throw MalformedTriple(std::string(e.what()) + " in line: " + std::string(line));
    }
}

TermId Graph::intern(const Term& term) {
    auto key = dictionary_key(term);
    auto it = dictionary_.find(key);
    if (it != dictionary_.end()) return it->second;
    auto id = static_cast<TermId>(terms_.size());
    terms_.push_back(term);
    dictionary_.emplace(std::move(key), id);
    return id;
}

std::optional<TermId> Graph::lookup(const Term& term) const {
    auto it = dictionary_.find(dictionary_key(term));
    if (it == dictionary_.end()) return std::nullopt;
    return it->second;
}

bool Graph::insert(const Triple& t, Provenance prov) {
    if (!t.subject.is_entity())
        throw MalformedTriple("subject must be an entity: " + to_text(t));
    if (!t.predicate.is_entity())
        throw MalformedTriple("predicate must be an entity: " + to_text(t));
    return insert(IdTriple{intern(t.subject), intern(t.predicate), intern(t.object)}, prov);
}

bool Graph::insert(IdTriple t, Provenance prov) {
    auto [it, inserted] = spo_.emplace(t, prov);
    if (!inserted) {
        if (prov == Provenance::Asserted && it->second == Provenance::Inferred) {
            it->second = Provenance::Asserted;
            ++generation_;
        }
        return false;
    }
    pos_.insert(pos_key(t));
    osp_.insert(osp_key(t));
    ++generation_;
    return true;
}

bool Graph::retract(const Triple& t) {
    auto s = lookup(t.subject), p = lookup(t.predicate), o = lookup(t.object);
    if (!s || !p || !o) return false;
    return retract(IdTriple{*s, *p, *o});
}

bool Graph::retract(IdTriple t) {
    if (spo_.erase(t) == 0) return false;
    pos_.erase(pos_key(t));
    osp_.erase(osp_key(t));
    ++generation_;
    return true;
}

bool Graph::contains(const Triple& t) const {
    auto s = lookup(t.subject), p = lookup(t.predicate), o = lookup(t.object);
    return s && p && o && contains(IdTriple{*s, *p, *o});
}

std::optional<Provenance> Graph::provenance(IdTriple t) const {
    auto it = spo_.find(t);
    if (it == spo_.end()) return std::nullopt;
    return it->second;
}

std::optional<IdPattern> Graph::resolve(const Pattern& pattern) const {
    IdPattern out;
    auto bind = [this](const std::optional<Term>& term, std::optional<TermId>& slot) {
        if (!term) return true;
        slot = lookup(*term);
        return slot.has_value();
    };
    if (!bind(pattern.subject, out.s) || !bind(pattern.predicate, out.p) || !bind(pattern.object, out.o))
        return std::nullopt;
    return out;
}

std::vector<Triple> Graph::match(const Pattern& pattern) const {
    std::vector<Triple> out;
    auto resolved = resolve(pattern);
    if (!resolved) return out;
    for_each_match(*resolved, [&](IdTriple t) { out.push_back(decode(t)); });
    return out;
}

std::size_t Graph::count(const IdPattern& pattern) const {
    std::size_t n = 0;
    for_each_match(pattern, [&n](IdTriple) { ++n; });
    return n;
}

std::size_t Graph::clear_inferred() {
    std::vector<IdTriple> inferred;
    for (const auto& [t, prov] : spo_)
        if (prov == Provenance::Inferred) inferred.push_back(t);
    for (auto t : inferred) retract(t);
    return inferred.size();
}

std::vector<std::string> Graph::canonical_lines() const {
    std::vector<std::string> lines;
    lines.reserve(spo_.size());
    for (const auto& [t, prov] : spo_) lines.push_back(to_text(decode(t)));
    std::sort(lines.begin(), lines.end());
    return lines;
}

std::string Graph::serialize() const {
    std::string out;
    for (const auto& line : canonical_lines()) {
        out += line;
        out += '\n';
    }
    return out;
}

std::string Graph::content_hash() const {
    detail::Sha256 hasher;
    for (const auto& line : canonical_lines()) {
        hasher.update(line);
        hasher.update("\n");
    }
    return hasher.hex_digest();
}

Graph Graph::parse(std::string_view text) {
    Graph g;
    std::size_t pos = 0, line_no = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty() && line.front() != '#') {
            try {
                g.insert(parse_triple(line));
            } catch (const MalformedTriple& e) {
                throw MalformedTriple("line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return g;
}

bool Graph::indexes_coherent() const {
    if (pos_.size() != spo_.size() || osp_.size() != spo_.size()) return false;
    for (const auto& [t, prov] : spo_)
        if (!pos_.count(pos_key(t)) || !osp_.count(osp_key(t))) return false;
    for (const auto& k : pos_)
        if (!spo_.count(IdTriple{id(k[2]), id(k[0]), id(k[1])})) return false;
    for (const auto& k : osp_)
        if (!spo_.count(IdTriple{id(k[1]), id(k[2]), id(k[0])})) return false;
    return true;
}

} // namespace batchline
