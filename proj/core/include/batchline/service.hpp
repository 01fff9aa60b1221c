#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "batchline/graph.hpp"
#include "batchline/planner.hpp"
#include "batchline/reasoner.hpp"
#include "batchline/ruledsl.hpp"
#include "batchline/schema.hpp"

namespace batchline {

enum class DecisionAction { Accept, Reject };
std::string_view to_string(DecisionAction a) noexcept;
std::optional<DecisionAction> parse_action(std::string_view text) noexcept;

// Current UTC time as YYYY-MM-DDTHH:MM:SS.mmmZ.
std::string utc_timestamp();

struct DecisionRecord {
    std::string timestamp;
    std::string s1; // s1 < s2 once recorded
    std::string s2;
    DecisionAction action = DecisionAction::Accept;
    std::string expert;
    std::optional<std::string> comment;
    std::string verdict_snapshot_hash;

    nlohmann::json to_json() const;
    static DecisionRecord from_json(const nlohmann::json& doc);

    friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};

class DecisionError : public std::runtime_error {
public:
    enum class Kind { UnknownPair, InvalidRecord, LogWrite, MalformedLog };

    DecisionError(Kind kind, std::string message, std::size_t line = 0)
        : std::runtime_error(std::move(message)), kind_(kind), line_(line) {}

    Kind kind() const noexcept { return kind_; }
    // 1-based line of a malformed log record.
    std::size_t line() const noexcept { return line_; }

private:
    Kind kind_;
    std::size_t line_;
};

// JSON-lines file, one record per line. Every append is flushed to stable
// storage before it returns.
class DecisionLog {
public:
    explicit DecisionLog(std::filesystem::path path) : path_(std::move(path)) {}

    const std::filesystem::path& path() const noexcept { return path_; }
    // Throws DecisionError(LogWrite).
    void append(const DecisionRecord& record) const;

private:
    std::filesystem::path path_;
};

// Parses a whole log before returning; throws DecisionError(MalformedLog)
// naming the first bad line.
std::vector<DecisionRecord> read_decisions(std::istream& in);
std::vector<DecisionRecord> read_decisions(const std::filesystem::path& path);

enum class ReviewStatus { Pending, Accepted, Rejected };
std::string_view to_string(ReviewStatus s) noexcept;
std::optional<ReviewStatus> parse_status(std::string_view text) noexcept;

struct Batch {
    std::string id;
    std::vector<std::string> members; // sorted
};

struct SessionConfig {
    std::filesystem::path schema;
    std::filesystem::path rules;
    std::filesystem::path data;
    std::optional<std::filesystem::path> log;
    bool enrich = true;
    EvaluationOptions evaluation;
};

// Graph, schema, rules, current report and review state of one dataset.
// Not internally synchronized.
class Session {
public:
    Session(Schema schema, RuleSet rules, Graph base, std::string dataset, bool enrich = true,
            EvaluationOptions evaluation = {});

    // Loads everything, evaluates, then replays the decision log if it exists.
    // Rules failing validation abort the load.
    static Session open(const SessionConfig& config);

    const Schema& schema() const noexcept { return schema_; }
    const RuleSet& rules() const noexcept { return rules_; }
    const Graph& graph() const noexcept { return graph_; }
    const std::string& dataset() const noexcept { return dataset_; }
    const MatchReport& report() const noexcept { return report_; }
    bool report_stale() const noexcept { return stale_; }
    std::chrono::steady_clock::time_point report_time() const noexcept { return report_time_; }
    const std::optional<MaterializationStats>& enrichment() const noexcept { return enrichment_; }

    void attach_log(std::filesystem::path path) { log_.emplace(std::move(path)); }
    const std::optional<DecisionLog>& log() const noexcept { return log_; }

    // Recomputes the report from the current graph.
    const MatchReport& evaluate();

    ReviewStatus status(std::string_view s1, std::string_view s2) const;
    const std::map<std::pair<std::string, std::string>, ReviewStatus>& statuses() const noexcept { return status_; }
    // All applied records, or those of one pair, in application order.
    std::vector<DecisionRecord> decisions(std::optional<std::pair<std::string, std::string>> pair = {}) const;
    std::vector<Batch> batches() const;

    // Canonicalizes the pair, checks it against the current report, fills in
    // timestamp and snapshot hash when empty, appends to the log, then applies.
    // A decision equal to the one in force returns the earlier record unlogged.
    // Throws DecisionError; on any throw nothing has changed.
    DecisionRecord record_decision(DecisionRecord record);

    // Applies records without logging them.
    void replay(const std::vector<DecisionRecord>& records);
    void replay(std::istream& log);

    // Digest of a pair's verdict map in the current report.
    std::string verdict_hash(std::string_view s1, std::string_view s2) const;

private:
    std::set<Triple> decision_triples() const;
    void apply(const DecisionRecord& record);

    Schema schema_;
    RuleSet rules_;
    Graph base_;
    Graph graph_;
    std::string dataset_;
    bool enrich_;
    EvaluationOptions evaluation_;
    std::optional<MaterializationStats> enrichment_;
    MatchReport report_;
    bool stale_ = false;
    std::chrono::steady_clock::time_point report_time_;
    std::optional<DecisionLog> log_;
    std::vector<DecisionRecord> applied_;
    std::map<std::pair<std::string, std::string>, ReviewStatus> status_;
    std::set<Triple> current_decision_triples_;
};

} // namespace batchline
