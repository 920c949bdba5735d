// Collection service: an append-only session store in the ingest line format
// and its HTTP/JSON front end.
//
//   POST /v1/sessions                 {user, device}  -> 201 {id}
//   POST /v1/sessions/{id}/samples    {samples:[...]} -> 200 {accepted}
//   POST /v1/sessions/{id}/events     {events:[...]}  -> 200 {accepted}
//   POST /v1/sessions/{id}/close                      -> 200 {session}
//   GET  /v1/sessions/{id}                            -> 200 {session}
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinlog/core.hpp"

namespace httplib {
class Server;
}

namespace pinlog::server {

enum class SessionState { open, closed };

struct Session {
    std::string id;
    std::string user;
    std::string device;
    std::string created;
    SessionState state = SessionState::open;
};

std::string session_to_json(const Session& s);

class StoreError : public std::runtime_error {
public:
    enum class Kind { not_found, conflict, invalid, storage };
    StoreError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }
    int http_status() const;

private:
    Kind kind_;
};

/// Thread-safe store of session files <data_dir>/<id>.jsonl. Requests on one
/// session are serialized; different sessions proceed independently. A batch
/// is validated completely before any of it is written.
class SessionStore {
public:
    explicit SessionStore(std::filesystem::path data_dir);

    Session create_session(const std::string& user, const std::string& device);
    /// Samples must be non-decreasing in t and not before the last stored
    /// sample; ties between the two listener streams are resolved at merge.
    std::size_t append_batch(const std::string& id, const std::vector<SensorSample>& samples);
    /// Events must be non-decreasing in t and not before the last stored event.
    std::size_t append_events(const std::string& id, const std::vector<KeyEvent>& events);
    /// Idempotent.
    Session close_session(const std::string& id);
    Session get_session(const std::string& id) const;

    std::filesystem::path session_path(const std::string& id) const;

private:
    struct Entry {
        mutable std::mutex mutex;
        Session session;
        double last_sample_t = -1.0;
        double last_event_t = -1.0;
    };

    std::shared_ptr<Entry> find(const std::string& id) const;
    void append_lines(const std::string& id, const std::string& lines);
    void load_existing();
    std::string new_id();

    std::filesystem::path dir_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

struct ServerConfig {
    std::string bind_address = "127.0.0.1";
    int port = 8080;
    std::filesystem::path data_dir = "sessions";
    std::string allowed_origin = "*";
};

/// HTTP front end over a SessionStore.
class CollectServer {
public:
    CollectServer(SessionStore& store, ServerConfig cfg);
    ~CollectServer();
    CollectServer(const CollectServer&) = delete;
    CollectServer& operator=(const CollectServer&) = delete;

    /// Blocks serving on cfg.port until stop().
    bool listen();
    /// Binds an ephemeral port and returns it; call listen_after_bind() next.
    int bind_any_port();
    bool listen_after_bind();
    void wait_until_ready() const;
    void stop();

private:
    void install_routes();

    SessionStore& store_;
    ServerConfig cfg_;
    std::unique_ptr<httplib::Server> http_;
};

}  // namespace pinlog::server
