#include "pinlog/server.hpp"

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <json.hpp>
#include <random>

#include "pinlog/ingest.hpp"
#include "pinlog/text.hpp"

namespace pinlog::server {

using json = nlohmann::json;

std::string session_to_json(const Session& s) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["user"] = s.user;
    j["device"] = s.device;
    j["created"] = s.created;
    j["state"] = s.state == SessionState::open ? "open" : "closed";
    return j.dump();
}

int StoreError::http_status() const {
    switch (kind_) {
        case Kind::not_found: return 404;
        case Kind::conflict: return 409;
        case Kind::invalid: return 400;
        case Kind::storage: return 500;
    }
    return 500;
}

namespace {

std::string utc_now_iso8601() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

bool valid_id(const std::string& id) {
    return id.size() == 16 && std::all_of(id.begin(), id.end(), [](char c) {
               return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                      c == '_';
           });
}

}  // namespace

SessionStore::SessionStore(std::filesystem::path data_dir) : dir_(std::move(data_dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw StoreError(StoreError::Kind::storage, "cannot create data directory " + dir_.string());
    load_existing();
}

std::filesystem::path SessionStore::session_path(const std::string& id) const { return dir_ / (id + ".jsonl"); }

void SessionStore::load_existing() {
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (entry.path().extension() != ".jsonl") continue;
        const std::string id = entry.path().stem().string();
        if (!valid_id(id)) continue;
        try {
            const auto parsed = read_session_file(entry.path());
            auto e = std::make_shared<Entry>();
            e->session = {id, parsed.metadata.user_id, parsed.metadata.device_label, parsed.metadata.created,
                          std::filesystem::exists(dir_ / (id + ".closed")) ? SessionState::closed : SessionState::open};
            if (!parsed.trace.samples.empty()) e->last_sample_t = parsed.trace.samples.back().t;
            if (!parsed.events.empty()) e->last_event_t = parsed.events.back().t;
            sessions_[id] = std::move(e);
        } catch (const std::exception&) {
            // Unreadable files are left alone and not served.
        }
    }
}

std::string SessionStore::new_id() {
    static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    std::uniform_int_distribution<int> pick(0, 63);
    std::string id(16, ' ');
    for (char& c : id) c = kAlphabet[pick(rng)];
    return id;
}

Session SessionStore::create_session(const std::string& user, const std::string& device) {
    auto entry = std::make_shared<Entry>();
    std::string id;
    {
        std::lock_guard lock(mutex_);
        do {
            id = new_id();
        } while (sessions_.contains(id) || std::filesystem::exists(session_path(id)));
        entry->session = {id, user, device, utc_now_iso8601(), SessionState::open};
        sessions_[id] = entry;
    }
    std::lock_guard lock(entry->mutex);
    try {
        append_lines(id, header_line({id, user, device, entry->session.created}) + "\n");
    } catch (...) {
        std::lock_guard store_lock(mutex_);
        sessions_.erase(id);
        throw;
    }
    return entry->session;
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw StoreError(StoreError::Kind::not_found, "unknown session '" + id + "'");
    return it->second;
}

void SessionStore::append_lines(const std::string& id, const std::string& lines) {
    std::ofstream out(session_path(id), std::ios::binary | std::ios::app);
    if (!out) throw StoreError(StoreError::Kind::storage, "cannot open session file for " + id);
    out.write(lines.data(), static_cast<std::streamsize>(lines.size()));
    out.flush();
    if (!out) throw StoreError(StoreError::Kind::storage, "write failed for session " + id);
}

std::size_t SessionStore::append_batch(const std::string& id, const std::vector<SensorSample>& samples) {
    auto e = find(id);
    std::lock_guard lock(e->mutex);
    if (e->session.state == SessionState::closed) {
        throw StoreError(StoreError::Kind::conflict, "session '" + id + "' is closed");
    }
    double last = e->last_sample_t;
    std::string lines;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!std::isfinite(s.t) || s.t < 0.0 || s.t < last) {
            throw StoreError(StoreError::Kind::invalid, "sample " + std::to_string(i) +
                                                            ": t must be finite and not before " +
                                                            format_double(last));
        }
        const SensorTrace probe{{s}, {}, {}};
        if (const auto v = validate_trace(probe); !v.empty()) {
            throw StoreError(StoreError::Kind::invalid, "sample " + std::to_string(i) + ": " + v.front().rule);
        }
        last = s.t;
        lines += sample_line(s);
        lines += '\n';
    }
    if (!lines.empty()) append_lines(id, lines);
    e->last_sample_t = last;
    return samples.size();
}

std::size_t SessionStore::append_events(const std::string& id, const std::vector<KeyEvent>& events) {
    auto e = find(id);
    std::lock_guard lock(e->mutex);
    if (e->session.state == SessionState::closed) {
        throw StoreError(StoreError::Kind::conflict, "session '" + id + "' is closed");
    }
    double last = e->last_event_t;
    std::string lines;
    for (std::size_t i = 0; i < events.size(); ++i) {
        try {
            validate_key_event(events[i]);
        } catch (const ValidationError& err) {
            throw StoreError(StoreError::Kind::invalid, "event " + std::to_string(i) + ": " + err.what());
        }
        if (events[i].t < last) {
            throw StoreError(StoreError::Kind::invalid, "event " + std::to_string(i) + ": t goes backwards");
        }
        last = events[i].t;
        lines += event_line(events[i]);
        lines += '\n';
    }
    if (!lines.empty()) append_lines(id, lines);
    e->last_event_t = last;
    return events.size();
}

Session SessionStore::close_session(const std::string& id) {
    auto e = find(id);
    std::lock_guard lock(e->mutex);
    if (e->session.state == SessionState::open) {
        std::ofstream marker(dir_ / (id + ".closed"));
        if (!marker) throw StoreError(StoreError::Kind::storage, "cannot mark session " + id + " closed");
        e->session.state = SessionState::closed;
    }
    return e->session;
}

Session SessionStore::get_session(const std::string& id) const {
    auto e = find(id);
    std::lock_guard lock(e->mutex);
    return e->session;
}

CollectServer::CollectServer(SessionStore& store, ServerConfig cfg)
    : store_(store), cfg_(std::move(cfg)), http_(std::make_unique<httplib::Server>()) {
    install_routes();
}

CollectServer::~CollectServer() { stop(); }

namespace {

void send_json(httplib::Response& res, int status, const std::string& body) {
    res.status = status;
    res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, json{{"error", message}}.dump());
}

json parse_body(const httplib::Request& req) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
        throw StoreError(StoreError::Kind::invalid, "request body must be a JSON object");
    }
    return body;
}

const json& array_field(const json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end() || !it->is_array()) {
        throw StoreError(StoreError::Kind::invalid, std::string("body needs an array field '") + key + "'");
    }
    return *it;
}

template <class Handler>
httplib::Server::Handler guarded(Handler h) {
    return [h](const httplib::Request& req, httplib::Response& res) {
        try {
            h(req, res);
        } catch (const StoreError& e) {
            send_error(res, e.http_status(), e.what());
        } catch (const ValidationError& e) {
            send_error(res, 400, e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    };
}

}  // namespace

void CollectServer::install_routes() {
    auto& srv = *http_;
    const std::string origin = cfg_.allowed_origin;
    srv.set_default_headers({{"Access-Control-Allow-Origin", origin},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"}});
    srv.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    srv.Post("/v1/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const json body = parse_body(req);
                 const auto user = body.find("user");
                 const auto device = body.find("device");
                 if (user == body.end() || !user->is_string() || device == body.end() || !device->is_string()) {
                     throw StoreError(StoreError::Kind::invalid, "body needs string fields 'user' and 'device'");
                 }
                 const auto s = store_.create_session(user->get<std::string>(), device->get<std::string>());
                 send_json(res, 201, json{{"id", s.id}}.dump());
             }));

    srv.Post(R"(/v1/sessions/([A-Za-z0-9_-]+)/samples)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const json body = parse_body(req);
                 std::vector<SensorSample> samples;
                 const auto& arr = array_field(body, "samples");
                 for (std::size_t i = 0; i < arr.size(); ++i) {
                     try {
                         samples.push_back(sample_from_json_text(arr[i].dump()));
                     } catch (const ValidationError& e) {
                         throw StoreError(StoreError::Kind::invalid, "sample " + std::to_string(i) + ": " + e.what());
                     }
                 }
                 const auto n = store_.append_batch(req.matches[1], samples);
                 send_json(res, 200, json{{"accepted", n}}.dump());
             }));

    srv.Post(R"(/v1/sessions/([A-Za-z0-9_-]+)/events)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const json body = parse_body(req);
                 std::vector<KeyEvent> events;
                 const auto& arr = array_field(body, "events");
                 for (std::size_t i = 0; i < arr.size(); ++i) {
                     try {
                         events.push_back(event_from_json_text(arr[i].dump()));
                     } catch (const ValidationError& e) {
                         throw StoreError(StoreError::Kind::invalid, "event " + std::to_string(i) + ": " + e.what());
                     }
                 }
                 const auto n = store_.append_events(req.matches[1], events);
                 send_json(res, 200, json{{"accepted", n}}.dump());
             }));

    srv.Post(R"(/v1/sessions/([A-Za-z0-9_-]+)/close)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, "{\"session\":" + session_to_json(store_.close_session(req.matches[1])) + "}");
             }));

    srv.Get(R"(/v1/sessions/([A-Za-z0-9_-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, "{\"session\":" + session_to_json(store_.get_session(req.matches[1])) + "}");
            }));
}

bool CollectServer::listen() { return http_->listen(cfg_.bind_address, cfg_.port); }

int CollectServer::bind_any_port() { return http_->bind_to_any_port(cfg_.bind_address); }

bool CollectServer::listen_after_bind() { return http_->listen_after_bind(); }

void CollectServer::wait_until_ready() const { http_->wait_until_ready(); }

void CollectServer::stop() {
    if (http_) http_->stop();
}

}  // namespace pinlog::server
