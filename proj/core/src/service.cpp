#include "batchline/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <ctime>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "batchline/ingest.hpp"
#include "sha256.hpp"

namespace batchline {

using nlohmann::json;

std::string_view to_string(DecisionAction a) noexcept { return a == DecisionAction::Accept ? "accept" : "reject"; }

std::optional<DecisionAction> parse_action(std::string_view text) noexcept {
    if (text == "accept") return DecisionAction::Accept;
    if (text == "reject") return DecisionAction::Reject;
    return std::nullopt;
}

std::string_view to_string(ReviewStatus s) noexcept {
    switch (s) {
        case ReviewStatus::Pending: return "pending";
        case ReviewStatus::Accepted: return "accepted";
        case ReviewStatus::Rejected: return "rejected";
    }
    return "pending";
}

std::optional<ReviewStatus> parse_status(std::string_view text) noexcept {
    if (text == "pending") return ReviewStatus::Pending;
    if (text == "accepted") return ReviewStatus::Accepted;
    if (text == "rejected") return ReviewStatus::Rejected;
    return std::nullopt;
}

std::string utc_timestamp() {
    using namespace std::chrono;
    auto now = system_clock::now();
    auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    std::time_t secs = system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

json DecisionRecord::to_json() const {
    json doc{{"timestamp", timestamp},
             {"pair", {s1, s2}},
             {"action", to_string(action)},
             {"expert", expert},
             {"verdictSnapshotHash", verdict_snapshot_hash}};
    if (comment) doc["comment"] = *comment;
    return doc;
}

DecisionRecord DecisionRecord::from_json(const json& doc) {
    if (!doc.is_object()) throw std::invalid_argument("decision record must be a JSON object");
    DecisionRecord r;
    r.timestamp = doc.at("timestamp").get<std::string>();
    const auto& pair = doc.at("pair");
    if (!pair.is_array() || pair.size() != 2) throw std::invalid_argument("pair must hold two sample ids");
    r.s1 = pair[0].get<std::string>();
    r.s2 = pair[1].get<std::string>();
    auto action = parse_action(doc.at("action").get<std::string>());
    if (!action) throw std::invalid_argument("action must be accept or reject");
    r.action = *action;
    r.expert = doc.at("expert").get<std::string>();
    if (r.expert.empty()) throw std::invalid_argument("expert must not be empty");
    if (doc.contains("comment") && !doc.at("comment").is_null()) r.comment = doc.at("comment").get<std::string>();
    r.verdict_snapshot_hash = doc.value("verdictSnapshotHash", "");
    return r;
}

void DecisionLog::append(const DecisionRecord& record) const {
    const std::string line = record.to_json().dump() + "\n";
    int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0)
        throw DecisionError(DecisionError::Kind::LogWrite,
                            "cannot open decision log " + path_.string() + ": " + std::strerror(errno));
    std::size_t done = 0;
    while (done < line.size()) {
        ssize_t n = ::write(fd, line.data() + done, line.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            int err = errno;
            ::close(fd);
            throw DecisionError(DecisionError::Kind::LogWrite, "decision log write failed: " + std::string(std::strerror(err)));
        }
        done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        int err = errno;
        ::close(fd);
        throw DecisionError(DecisionError::Kind::LogWrite, "decision log fsync failed: " + std::string(std::strerror(err)));
    }
    ::close(fd);
}

std::vector<DecisionRecord> read_decisions(std::istream& in) {
    std::vector<DecisionRecord> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(DecisionRecord::from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw DecisionError(DecisionError::Kind::MalformedLog,
                                "malformed decision record at line " + std::to_string(number) + ": " + e.what(), number);
        }
    }
    return out;
}

std::vector<DecisionRecord> read_decisions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open decision log " + path.string());
    return read_decisions(in);
}

Session::Session(Schema schema, RuleSet rules, Graph base, std::string dataset, bool enrich,
                 EvaluationOptions evaluation)
    : schema_(std::move(schema)),
      rules_(std::move(rules)),
      base_(std::move(base)),
      graph_(base_),
      dataset_(std::move(dataset)),
      enrich_(enrich),
      evaluation_(std::move(evaluation)) {
    if (enrich_) enrichment_ = materialize(graph_, schema_);
    evaluate();
}

Session Session::open(const SessionConfig& config) {
    Schema schema = load_schema_file(config.schema);
    RuleSet rules = load_ruleset_file(config.rules);
    std::string problems;
    for (const auto& rule : rules)
        for (const auto& d : validate_rule(rule, schema)) problems += "\n  " + rule.name + ": " + d.describe();
    if (!problems.empty()) throw std::runtime_error("rule validation failed:" + problems);
    LoadedDataset data = load_dataset(config.data, schema);
    Session session(std::move(schema), std::move(rules), std::move(data.graph), data.id, config.enrich,
                    config.evaluation);
    if (config.log) {
        if (std::filesystem::exists(*config.log)) session.replay(read_decisions(*config.log));
        session.attach_log(*config.log);
    }
    return session;
}

const MatchReport& Session::evaluate() {
    report_ = evaluate_ruleset(rules_, graph_, schema_, evaluation_, dataset_);
    stale_ = false;
    report_time_ = std::chrono::steady_clock::now();
    return report_;
}

ReviewStatus Session::status(std::string_view s1, std::string_view s2) const {
    if (s2 < s1) std::swap(s1, s2);
    auto it = status_.find({std::string(s1), std::string(s2)});
    return it == status_.end() ? ReviewStatus::Pending : it->second;
}

std::vector<DecisionRecord> Session::decisions(std::optional<std::pair<std::string, std::string>> pair) const {
    if (!pair) return applied_;
    if (pair->second < pair->first) std::swap(pair->first, pair->second);
    std::vector<DecisionRecord> out;
    for (const auto& r : applied_)
        if (r.s1 == pair->first && r.s2 == pair->second) out.push_back(r);
    return out;
}

std::vector<Batch> Session::batches() const {
    std::map<std::string, std::size_t> index;
    std::vector<std::string> names;
    auto id = [&](const std::string& s) {
        auto [it, fresh] = index.emplace(s, names.size());
        if (fresh) names.push_back(s);
        return it->second;
    };
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& [pair, st] : status_)
        if (st == ReviewStatus::Accepted) edges.emplace_back(id(pair.first), id(pair.second));
    std::vector<std::size_t> parent(names.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> root = [&](std::size_t x) {
        return parent[x] == x ? x : parent[x] = root(parent[x]);
    };
    for (auto [a, b] : edges) parent[root(a)] = root(b);
    std::map<std::size_t, std::vector<std::string>> groups;
    for (std::size_t i = 0; i < names.size(); ++i) groups[root(i)].push_back(names[i]);
    std::vector<Batch> out;
    for (auto& [r, members] : groups) {
        std::sort(members.begin(), members.end());
        std::string local = schema_.local_name(members.front()).value_or(members.front());
        std::replace(local.begin(), local.end(), '/', '-');
        std::replace(local.begin(), local.end(), ':', '-');
        out.push_back({schema_.iri("batch/" + local), std::move(members)});
    }
    std::sort(out.begin(), out.end(), [](const Batch& a, const Batch& b) { return a.id < b.id; });
    return out;
}

std::set<Triple> Session::decision_triples() const {
    std::set<Triple> out;
    const Term close = entity(schema_.iri("isCloseTo"));
    const Term in_batch = entity(schema_.iri("isInBatch"));
    for (const auto& [pair, st] : status_)
        if (st == ReviewStatus::Accepted) out.insert({entity(pair.first), close, entity(pair.second)});
    for (const auto& b : batches())
        for (const auto& m : b.members) out.insert({entity(m), in_batch, entity(b.id)});
    return out;
}

std::string Session::verdict_hash(std::string_view s1, std::string_view s2) const {
    const PairResult* p = report_.find(s1, s2);
    if (!p) return {};
    return detail::sha256_hex(p->to_json().at("verdicts").dump());
}

DecisionRecord Session::record_decision(DecisionRecord record) {
    if (record.expert.empty()) throw DecisionError(DecisionError::Kind::InvalidRecord, "expert must not be empty");
    if (record.s1 == record.s2) throw DecisionError(DecisionError::Kind::InvalidRecord, "a pair needs two distinct samples");
    if (record.s2 < record.s1) std::swap(record.s1, record.s2);
    if (!report_.find(record.s1, record.s2))
        throw DecisionError(DecisionError::Kind::UnknownPair,
                            "pair (" + record.s1 + ", " + record.s2 + ") is not in the current report");
    // Repeating the decision that is already in force is a no-op.
    const auto target = record.action == DecisionAction::Accept ? ReviewStatus::Accepted : ReviewStatus::Rejected;
    if (status(record.s1, record.s2) == target) return decisions(std::pair{record.s1, record.s2}).back();
    if (record.timestamp.empty()) record.timestamp = utc_timestamp();
    if (record.verdict_snapshot_hash.empty()) record.verdict_snapshot_hash = verdict_hash(record.s1, record.s2);
    if (log_) log_->append(record);
    apply(record);
    return record;
}

void Session::replay(const std::vector<DecisionRecord>& records) {
    for (auto r : records) {
        if (r.s2 < r.s1) std::swap(r.s1, r.s2);
        apply(r);
    }
}

void Session::replay(std::istream& log) { replay(read_decisions(log)); }

void Session::apply(const DecisionRecord& record) {
    applied_.push_back(record);
    status_[{record.s1, record.s2}] =
        record.action == DecisionAction::Accept ? ReviewStatus::Accepted : ReviewStatus::Rejected;

    std::set<Triple> next = decision_triples();
    const std::set<Triple>& prev = current_decision_triples_;
    if (next == prev) return;
    const bool grows = std::includes(next.begin(), next.end(), prev.begin(), prev.end());
    if (grows) {
        for (const auto& t : next)
            if (!prev.count(t)) graph_.insert(t, Provenance::Asserted);
    } else {
        for (const auto& t : prev)
            if (!next.count(t) && !base_.contains(t)) graph_.retract(t);
        for (const auto& t : next) graph_.insert(t, Provenance::Asserted);
        graph_.clear_inferred();
    }
    if (enrich_) materialize(graph_, schema_);
    current_decision_triples_ = std::move(next);
    stale_ = true;
}

} // namespace batchline
