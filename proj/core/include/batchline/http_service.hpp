#pragma once

#include <memory>
#include <optional>
#include <string>

#include "batchline/service.hpp"

namespace batchline {

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8080; // 0 picks a free port
    std::optional<std::string> static_dir;
    std::size_t page_size = 50;
};

// Parses "host:port" (as in BATCHLINE_ADDR). A bare port binds 127.0.0.1.
ServiceOptions parse_address(const std::string& address, ServiceOptions base = {});

// JSON over HTTP in front of one Session. Decisions run one at a time on a
// writer thread in arrival order; reads share a lock and see the state as of
// the last completed mutation.
//
//   GET  /schema                     GET  /batches
//   GET  /samples/{id}               GET  /decisions?pair=s1,s2
//   GET  /pairs?status=&rule=&page=  POST /decisions
//   GET  /pairs/{s1}/{s2}            POST /evaluate
//   GET  /health
class HttpService {
public:
    HttpService(Session session, ServiceOptions options);
    ~HttpService();

    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    // Binds the socket; returns the bound port. Throws on failure.
    int bind();
    // Serves until stop(). bind() must have succeeded.
    void run();
    // bind() plus run() on a background thread.
    int start();
    void stop();

    // Read-only access under the shared lock.
    template <typename Fn>
    auto inspect(Fn&& fn) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;

    const Session& session_locked_shared(std::shared_ptr<void>& guard) const;
};

template <typename Fn>
auto HttpService::inspect(Fn&& fn) const {
    std::shared_ptr<void> guard;
    const Session& s = session_locked_shared(guard);
    return fn(s);
}

} // namespace batchline
