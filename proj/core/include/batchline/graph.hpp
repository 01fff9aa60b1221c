#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "batchline/term.hpp"

namespace batchline {

inline constexpr std::string_view kRdfType = "rdf:type";
inline constexpr std::string_view kDefaultPrefix = "stups:";

struct Triple {
    Term subject;
    Term predicate;
    Term object;

    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

// One line of the canonical serialization: "<subject> <predicate> <object>".
std::string to_text(const Triple& t);
Triple parse_triple(std::string_view line);

class MalformedTriple : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class TermId : std::uint32_t {};

struct IdTriple {
    TermId s;
    TermId p;
    TermId o;

    friend bool operator==(const IdTriple&, const IdTriple&) = default;
    friend auto operator<=>(const IdTriple&, const IdTriple&) = default;
};

struct IdPattern {
    std::optional<TermId> s;
    std::optional<TermId> p;
    std::optional<TermId> o;
};

struct Pattern {
    std::optional<Term> subject;
    std::optional<Term> predicate;
    std::optional<Term> object;
};

enum class Provenance : std::uint8_t { Asserted, Inferred };

// In-memory triple store. Terms are interned into a dictionary; triples are held
// in three ordered indexes (SPO, POS, OSP) so that every pattern shape is served
// by a range scan. Not internally synchronized: callers provide single-writer /
// multi-reader exclusion.
class Graph {
public:
    // SHA-256 of the empty serialization.
    static constexpr std::string_view kEmptyHash =
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";

    TermId intern(const Term& term);
    std::optional<TermId> lookup(const Term& term) const;
    const Term& term(TermId id) const { return terms_.at(static_cast<std::size_t>(id)); }
    std::size_t term_count() const noexcept { return terms_.size(); }

    // Throws MalformedTriple when subject or predicate is not an entity.
    bool insert(const Triple& t, Provenance prov = Provenance::Asserted);
    // Ids must come from intern() on this graph. An inferred insert of an
    // asserted triple is a no-op; an asserted insert of an inferred triple
    // upgrades its provenance without counting as an insertion.
    bool insert(IdTriple t, Provenance prov = Provenance::Asserted);
    bool retract(const Triple& t);
    bool retract(IdTriple t);

    bool contains(const Triple& t) const;
    bool contains(IdTriple t) const { return spo_.count(t) != 0; }
    std::optional<Provenance> provenance(IdTriple t) const;

    std::vector<Triple> match(const Pattern& pattern) const;
    std::optional<IdPattern> resolve(const Pattern& pattern) const;

    template <typename Fn>
    void for_each_match(const IdPattern& pattern, Fn&& fn) const;
    std::size_t count(const IdPattern& pattern) const;

    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (const auto& [t, prov] : spo_) fn(t, prov);
    }

    Triple decode(IdTriple t) const { return {term(t.s), term(t.p), term(t.o)}; }

    std::size_t size() const noexcept { return spo_.size(); }
    bool empty() const noexcept { return spo_.empty(); }
    // Bumped on every successful mutation.
    std::uint64_t generation() const noexcept { return generation_; }

    // Drops every inferred triple, leaving the asserted core.
    std::size_t clear_inferred();

    std::vector<std::string> canonical_lines() const;
    std::string serialize() const;
    // Hex SHA-256 over the sorted canonical lines, each terminated by '\n'.
    std::string content_hash() const;

    // Parses the canonical text form (blank lines and '#' comments allowed).
    static Graph parse(std::string_view text);

    // Full comparison of the three indexes against the triple set.
    bool indexes_coherent() const;

private:
    using Key = std::array<std::uint32_t, 3>;

    static Key pos_key(IdTriple t) {
        return {static_cast<std::uint32_t>(t.p), static_cast<std::uint32_t>(t.o),
                static_cast<std::uint32_t>(t.s)};
    }
    static Key osp_key(IdTriple t) {
        return {static_cast<std::uint32_t>(t.o), static_cast<std::uint32_t>(t.s),
                static_cast<std::uint32_t>(t.p)};
    }
    static TermId id(std::uint32_t v) { return static_cast<TermId>(v); }

    std::vector<Term> terms_;
    std::unordered_map<std::string, TermId> dictionary_;
    std::map<IdTriple, Provenance> spo_;
    std::set<Key> pos_;
    std::set<Key> osp_;
    std::uint64_t generation_ = 0;
};

template <typename Fn>
void Graph::for_each_match(const IdPattern& pat, Fn&& fn) const {
    constexpr auto lo = std::uint32_t{0};
    constexpr auto hi = ~std::uint32_t{0};
    auto u = [](TermId t) { return static_cast<std::uint32_t>(t); };

    if (pat.s) {
        if (pat.p && pat.o) {
            IdTriple t{*pat.s, *pat.p, *pat.o};
            if (spo_.count(t)) fn(t);
            return;
        }
        if (pat.o) {
            auto it = osp_.lower_bound({u(*pat.o), u(*pat.s), lo});
            auto end = osp_.upper_bound({u(*pat.o), u(*pat.s), hi});
            for (; it != end; ++it) fn(IdTriple{id((*it)[1]), id((*it)[2]), id((*it)[0])});
            return;
        }
        IdTriple first{*pat.s, pat.p ? *pat.p : id(lo), id(lo)};
        IdTriple last{*pat.s, pat.p ? *pat.p : id(hi), id(hi)};
        auto it = spo_.lower_bound(first);
        auto end = spo_.upper_bound(last);
        for (; it != end; ++it) fn(it->first);
        return;
    }
    if (pat.p) {
        Key first{u(*pat.p), pat.o ? u(*pat.o) : lo, lo};
        Key last{u(*pat.p), pat.o ? u(*pat.o) : hi, hi};
        auto it = pos_.lower_bound(first);
        auto end = pos_.upper_bound(last);
        for (; it != end; ++it) fn(IdTriple{id((*it)[2]), id((*it)[0]), id((*it)[1])});
        return;
    }
    if (pat.o) {
        auto it = osp_.lower_bound({u(*pat.o), lo, lo});
        auto end = osp_.upper_bound({u(*pat.o), hi, hi});
        for (; it != end; ++it) fn(IdTriple{id((*it)[1]), id((*it)[2]), id((*it)[0])});
        return;
    }
    for (const auto& [t, prov] : spo_) fn(t);
}

} // namespace batchline
