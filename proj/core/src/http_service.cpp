#include "batchline/http_service.hpp"

#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <thread>

#include <httplib.h>

namespace batchline {

using nlohmann::json;

ServiceOptions parse_address(const std::string& address, ServiceOptions base) {
    auto colon = address.rfind(':');
    std::string host = colon == std::string::npos ? "" : address.substr(0, colon);
    std::string port = colon == std::string::npos ? address : address.substr(colon + 1);
    std::size_t used = 0;
    int value = -1;
    try {
        value = std::stoi(port, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != port.size() || value < 0 || value > 65535)
        throw std::invalid_argument("bad address '" + address + "'; expected host:port");
    if (!host.empty()) base.host = host;
    base.port = value;
    return base;
}

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    reply(res, status, json{{"error", {{"code", code}, {"message", message}}}});
}

std::optional<std::string> resolve_id(const Session& s, const std::string& raw) {
    if (raw.empty()) return std::nullopt;
    for (const std::string& candidate : {raw, s.schema().iri(raw)}) {
        try {
            if (s.graph().lookup(entity(candidate))) return candidate;
        } catch (const InvalidTerm&) {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

// Sample ids may contain '/', so try every split of "s1/s2".
std::optional<std::pair<std::string, std::string>> resolve_pair(const Session& s, const std::string& rest) {
    for (auto at = rest.find('/'); at != std::string::npos; at = rest.find('/', at + 1)) {
        auto a = resolve_id(s, rest.substr(0, at));
        auto b = resolve_id(s, rest.substr(at + 1));
        if (a && b && s.report().find(*a, *b)) return std::pair{*a, *b};
    }
    return std::nullopt;
}

json compact_pair(const Session& s, const PairResult& p) {
    json verdicts = json::object();
    for (const auto& [rule, v] : p.verdicts) verdicts[rule] = to_string(v.value);
    return json{{"s1", p.s1}, {"s2", p.s2}, {"status", to_string(s.status(p.s1, p.s2))}, {"verdicts", verdicts}};
}

json batches_json(const Session& s) {
    json list = json::array();
    for (const auto& b : s.batches()) list.push_back(json{{"id", b.id}, {"members", b.members}});
    return list;
}

} // namespace

struct HttpService::Impl {
    Impl(Session s, ServiceOptions o) : session(std::move(s)), options(std::move(o)) {}

    Session session;
    ServiceOptions options;
    mutable std::shared_mutex state;
    httplib::Server server;
    int port = -1;
    std::thread listener;

    std::mutex queue_mutex;
    std::condition_variable queue_ready;
    std::deque<std::function<void()>> queue;
    bool closing = false;
    std::thread writer;

    void writer_loop() {
        for (;;) {
            std::function<void()> task;
            {
                std::unique_lock lock(queue_mutex);
                queue_ready.wait(lock, [&] { return closing || !queue.empty(); });
                if (queue.empty()) return;
                task = std::move(queue.front());
                queue.pop_front();
            }
            task();
        }
    }

    // Runs fn on the writer thread under the exclusive lock; waits for it.
    template <typename Fn>
    auto mutate(Fn fn) {
        using R = decltype(fn(session));
        auto task = std::make_shared<std::packaged_task<R()>>([this, fn = std::move(fn)]() mutable {
            std::unique_lock lock(state);
            return fn(session);
        });
        auto done = task->get_future();
        {
            std::lock_guard lock(queue_mutex);
            if (closing) throw std::runtime_error("service is shutting down");
            queue.emplace_back([task] { (*task)(); });
        }
        queue_ready.notify_one();
        return done.get();
    }

    template <typename Fn>
    void read(httplib::Response& res, Fn fn) const {
        std::shared_lock lock(state);
        fn(session, res);
    }

    void routes() {
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                error(res, 500, "internal", e.what());
            }
        });

        server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            read(res, [](const Session& s, httplib::Response& r) {
                auto age = std::chrono::duration<double>(std::chrono::steady_clock::now() - s.report_time()).count();
                reply(r, 200,
                      json{{"status", "ok"},
                           {"graphSize", s.graph().size()},
                           {"reportAge", age},
                           {"reportStale", s.report_stale()}});
            });
        });

        server.Get("/schema", [this](const httplib::Request&, httplib::Response& res) {
            read(res, [](const Session& s, httplib::Response& r) { reply(r, 200, to_json(s.schema())); });
        });

        server.Get(R"(/samples/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
            read(res, [&](const Session& s, httplib::Response& r) {
                auto id = resolve_id(s, req.matches[1]);
                if (!id) return error(r, 404, "unknown-sample", "no instance '" + std::string(req.matches[1]) + "'");
                const Graph& g = s.graph();
                TermId subject = *g.lookup(entity(*id));
                json triples = json::array();
                g.for_each_match(IdPattern{subject, std::nullopt, std::nullopt}, [&](IdTriple t) {
                    triples.push_back(json{{"predicate", g.term(t.p).to_text()},
                                           {"object", g.term(t.o).to_text()},
                                           {"inferred", g.provenance(t) == Provenance::Inferred}});
                });
                reply(r, 200, json{{"id", *id}, {"triples", triples}});
            });
        });

        server.Get("/pairs", [this](const httplib::Request& req, httplib::Response& res) {
            std::optional<ReviewStatus> status;
            if (req.has_param("status")) {
                status = parse_status(req.get_param_value("status"));
                if (!status) return error(res, 400, "bad-request", "status must be pending, accepted or rejected");
            }
            std::size_t page = 1, size = options.page_size;
            try {
                if (req.has_param("page")) page = std::stoul(req.get_param_value("page"));
                if (req.has_param("pageSize")) size = std::stoul(req.get_param_value("pageSize"));
            } catch (const std::exception&) {
                return error(res, 400, "bad-request", "page and pageSize must be positive integers");
            }
            if (page == 0 || size == 0) return error(res, 400, "bad-request", "page and pageSize must be positive integers");
            std::string rule = req.has_param("rule") ? req.get_param_value("rule") : "";
            read(res, [&](const Session& s, httplib::Response& r) {
                const auto& known = s.report().summary.rules;
                if (!rule.empty() && std::find(known.begin(), known.end(), rule) == known.end())
                    return error(r, 400, "unknown-rule", "no evaluated rule '" + rule + "'");
                json items = json::array();
                std::size_t total = 0;
                for (const auto& p : s.report().pairs) {
                    if (status && s.status(p.s1, p.s2) != *status) continue;
                    if (!rule.empty() && p.verdicts.at(rule).value != VerdictValue::Match) continue;
                    if (total >= (page - 1) * size && total < page * size) items.push_back(compact_pair(s, p));
                    ++total;
                }
                reply(r, 200,
                      json{{"page", page},
                           {"pageSize", size},
                           {"total", total},
                           {"rules", known},
                           {"stale", s.report_stale()},
                           {"pairs", items}});
            });
        });

        server.Get(R"(/pairs/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
            read(res, [&](const Session& s, httplib::Response& r) {
                auto pair = resolve_pair(s, req.matches[1]);
                if (!pair) return error(r, 404, "unknown-pair", "no pair '" + std::string(req.matches[1]) + "'");
                json doc = s.report().find(pair->first, pair->second)->to_json();
                doc["status"] = to_string(s.status(pair->first, pair->second));
                json history = json::array();
                for (const auto& d : s.decisions(*pair)) history.push_back(d.to_json());
                doc["decisions"] = history;
                reply(r, 200, doc);
            });
        });

        server.Post("/decisions", [this](const httplib::Request& req, httplib::Response& res) {
            DecisionRecord record;
            try {
                json body = json::parse(req.body);
                record.s1 = body.at("s1").get<std::string>();
                record.s2 = body.at("s2").get<std::string>();
                auto action = parse_action(body.at("action").get<std::string>());
                if (!action) throw std::invalid_argument("action must be accept or reject");
                record.action = *action;
                record.expert = body.at("expert").get<std::string>();
                if (body.contains("comment") && !body["comment"].is_null())
                    record.comment = body["comment"].get<std::string>();
            } catch (const std::exception& e) {
                return error(res, 400, "bad-request", e.what());
            }
            try {
                auto stored = mutate([record](Session& s) mutable {
                    if (auto a = resolve_id(s, record.s1)) record.s1 = *a;
                    if (auto b = resolve_id(s, record.s2)) record.s2 = *b;
                    return s.record_decision(std::move(record));
                });
                reply(res, 201, stored.to_json());
            } catch (const DecisionError& e) {
                switch (e.kind()) {
                    case DecisionError::Kind::UnknownPair: return error(res, 404, "unknown-pair", e.what());
                    case DecisionError::Kind::InvalidRecord: return error(res, 400, "bad-request", e.what());
                    default: return error(res, 500, "log-write", e.what());
                }
            }
        });

        server.Get("/decisions", [this](const httplib::Request& req, httplib::Response& res) {
            read(res, [&](const Session& s, httplib::Response& r) {
                std::optional<std::pair<std::string, std::string>> pair;
                if (req.has_param("pair")) {
                    std::string raw = req.get_param_value("pair");
                    auto comma = raw.find(',');
                    if (comma == std::string::npos)
                        return error(r, 400, "bad-request", "pair must be written s1,s2");
                    std::string a = raw.substr(0, comma), b = raw.substr(comma + 1);
                    pair = std::pair{resolve_id(s, a).value_or(a), resolve_id(s, b).value_or(b)};
                }
                json list = json::array();
                for (const auto& d : s.decisions(pair)) list.push_back(d.to_json());
                reply(r, 200, json{{"decisions", list}});
            });
        });

        server.Get("/batches", [this](const httplib::Request&, httplib::Response& res) {
            read(res, [](const Session& s, httplib::Response& r) { reply(r, 200, json{{"batches", batches_json(s)}}); });
        });

        server.Post("/evaluate", [this](const httplib::Request&, httplib::Response& res) {
            json summary = mutate([](Session& s) { return s.evaluate().summary.to_json(); });
            reply(res, 200, summary);
        });

        if (options.static_dir && !server.set_mount_point("/", *options.static_dir))
            throw std::runtime_error("static directory not found: " + *options.static_dir);
    }
};

HttpService::HttpService(Session session, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(session), std::move(options))) {
    impl_->routes();
    impl_->writer = std::thread([this] { impl_->writer_loop(); });
}

HttpService::~HttpService() {
    stop();
    {
        std::lock_guard lock(impl_->queue_mutex);
        impl_->closing = true;
    }
    impl_->queue_ready.notify_all();
    if (impl_->writer.joinable()) impl_->writer.join();
}

int HttpService::bind() {
    auto& o = impl_->options;
    int port = o.port == 0 ? impl_->server.bind_to_any_port(o.host)
                           : (impl_->server.bind_to_port(o.host, o.port) ? o.port : -1);
    if (port < 0) throw std::runtime_error("cannot bind " + o.host + ":" + std::to_string(o.port));
    impl_->port = port;
    return port;
}

void HttpService::run() {
    if (impl_->port < 0) throw std::logic_error("bind() first");
    impl_->server.listen_after_bind();
}

int HttpService::start() {
    int port = bind();
    impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void HttpService::stop() {
    impl_->server.stop();
    if (impl_->listener.joinable()) impl_->listener.join();
}

const Session& HttpService::session_locked_shared(std::shared_ptr<void>& guard) const {
    guard = std::make_shared<std::shared_lock<std::shared_mutex>>(impl_->state);
    return impl_->session;
}

} // namespace batchline
