#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <httplib.h>
#include <json.hpp>
#include <thread>

#include "pinlog/ingest.hpp"
#include "pinlog/server.hpp"
#include "pinlog/text.hpp"

using namespace pinlog;
using namespace pinlog::server;
using nlohmann::json;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("pinlog_server_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

std::size_t line_count(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

SensorSample sample_at(double t) {
    SensorSample s;
    s.t = t;
    s.acc = Vec3{0.1, 0.2, 0.3};
    s.accG = Vec3{0.1, 0.2, 9.9};
    s.rotR = Vec3{1, 2, 3};
    s.ori = Vec3{120, 30, 1};
    s.interval = 16;
    return s;
}

std::vector<SensorSample> batch(double t0, std::size_t n) {
    std::vector<SensorSample> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample_at(t0 + 16.0 * static_cast<double>(i)));
    return out;
}

std::vector<KeyEvent> pin_run(const std::string& pin, double t0, const std::string& entered) {
    std::vector<KeyEvent> out;
    for (int i = 0; i < 4; ++i) out.push_back({t0 + 400.0 * i, entered[i] - '0', i, pin, entered});
    return out;
}

// Server on an ephemeral port, running on a background thread.
struct LiveServer {
    SessionStore store;
    CollectServer server;
    int port = 0;
    std::thread thread;

    explicit LiveServer(const std::filesystem::path& dir, std::string origin = "*")
        : store(dir), server(store, ServerConfig{"127.0.0.1", 0, dir, std::move(origin)}) {
        port = server.bind_any_port();
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~LiveServer() {
        server.stop();
        thread.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_connection_timeout(5);
        return c;
    }
};

std::string create(httplib::Client& c, const std::string& user = "u1") {
    const auto res = c.Post("/v1/sessions", json{{"user", user}, {"device", "test"}}.dump(), "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 201);
    return json::parse(res->body).at("id").get<std::string>();
}

std::string samples_body(const std::vector<SensorSample>& samples) {
    std::string body = "{\"samples\":[";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        json j = json::parse(sample_line(samples[i]));
        j.erase("k");
        body += (i ? "," : "") + j.dump();
    }
    return body + "]}";
}

std::string events_body(const std::vector<KeyEvent>& events) {
    std::string body = "{\"events\":[";
    for (std::size_t i = 0; i < events.size(); ++i) {
        json j = json::parse(event_line(events[i]));
        j.erase("k");
        body += (i ? "," : "") + j.dump();
    }
    return body + "]}";
}

}  // namespace

TEST_CASE("create writes exactly one header line that round-trips") {
    const auto dir = fresh_dir("create");
    SessionStore store(dir);
    const auto s = store.create_session("alice", "Pixel \"7\"");
    CHECK(s.id.size() == 16);
    CHECK(line_count(store.session_path(s.id)) == 1);
    const auto parsed = read_session_file(store.session_path(s.id));
    CHECK(parsed.metadata.session_id == s.id);
    CHECK(parsed.metadata.user_id == "alice");
    CHECK(parsed.metadata.device_label == "Pixel \"7\"");
    CHECK(parsed.metadata.created == s.created);
    CHECK(store.create_session("bob", "x").id != s.id);
}

TEST_CASE("append_batch is all-or-nothing") {
    const auto dir = fresh_dir("batch");
    SessionStore store(dir);
    const auto id = store.create_session("u", "d").id;
    CHECK(store.append_batch(id, batch(0, 12)) == 12);
    CHECK(line_count(store.session_path(id)) == 13);

    auto bad = batch(1000, 6);
    bad[3].t = 500;
    try {
        store.append_batch(id, bad);
        FAIL("expected rejection");
    } catch (const StoreError& e) {
        CHECK(e.kind() == StoreError::Kind::invalid);
        CHECK(std::string(e.what()).find("sample 3") != std::string::npos);
    }
    CHECK(line_count(store.session_path(id)) == 13);
    // a batch may not start before the last stored sample
    CHECK_THROWS_AS(store.append_batch(id, batch(0, 1)), StoreError);
    CHECK_THROWS_AS(store.append_batch("nope", batch(0, 1)), StoreError);
}

TEST_CASE("events: validation and verbatim mismatches") {
    const auto dir = fresh_dir("events");
    SessionStore store(dir);
    const auto id = store.create_session("u", "d").id;
    CHECK(store.append_events(id, pin_run("1234", 100, "1234")) == 4);
    CHECK(store.append_events(id, pin_run("1234", 3000, "1235")) == 4);
    KeyEvent bad{9000, 10, 0, "1234", ""};
    try {
        store.append_events(id, {bad});
        FAIL("expected rejection");
    } catch (const StoreError& e) {
        CHECK(e.http_status() == 400);
    }
    const auto parsed = read_session_file(store.session_path(id));
    REQUIRE(parsed.events.size() == 8);
    CHECK(parsed.events[7].entered_pin == "1235");
    CHECK(parsed.events[7].expected_pin == "1234");
}

TEST_CASE("close is idempotent and blocks writes") {
    const auto dir = fresh_dir("close");
    SessionStore store(dir);
    const auto id = store.create_session("u", "d").id;
    store.append_batch(id, batch(0, 5));
    store.append_events(id, pin_run("1111", 10, "1111"));
    CHECK(store.close_session(id).state == SessionState::closed);
    CHECK(store.close_session(id).state == SessionState::closed);
    try {
        store.append_batch(id, batch(100, 1));
        FAIL("expected conflict");
    } catch (const StoreError& e) {
        CHECK(e.kind() == StoreError::Kind::conflict);
        CHECK(e.http_status() == 409);
    }
    const auto parsed = read_session_file(store.session_path(id));
    CHECK(validate_trace(merge_listener_streams(parsed.trace).trace).empty());

    // a restarted store remembers sessions and their state
    SessionStore reopened(dir);
    CHECK(reopened.get_session(id).state == SessionState::closed);
    CHECK(reopened.get_session(id).user == "u");
}

TEST_CASE("HTTP API round trip") {
    const auto dir = fresh_dir("http");
    LiveServer live(dir, "https://collector.example");
    auto c = live.client();
    const auto id = create(c);

    auto res = c.Post("/v1/sessions/" + id + "/samples", samples_body(batch(0, 12)), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body).at("accepted") == 12);
    CHECK(res->get_header_value("Access-Control-Allow-Origin") == "https://collector.example");

    res = c.Post("/v1/sessions/" + id + "/events", events_body(pin_run("2580", 50, "2580")), "application/json");
    REQUIRE(res);
    CHECK(json::parse(res->body).at("accepted") == 4);

    res = c.Get("/v1/sessions/" + id);
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body).at("session").at("state") == "open");

    res = c.Post("/v1/sessions/" + id + "/close", "", "application/json");
    REQUIRE(res);
    CHECK(json::parse(res->body).at("session").at("state") == "closed");
    res = c.Post("/v1/sessions/" + id + "/close", "", "application/json");
    CHECK(res->status == 200);
    res = c.Post("/v1/sessions/" + id + "/samples", samples_body(batch(1000, 1)), "application/json");
    CHECK(res->status == 409);

    const auto parsed = read_session_file(live.store.session_path(id));
    CHECK(parsed.trace.samples.size() == 12);
    CHECK(parsed.trace.samples[5] == sample_at(80));
    CHECK(parsed.events.size() == 4);
}

TEST_CASE("HTTP error statuses") {
    const auto dir = fresh_dir("http_err");
    LiveServer live(dir);
    auto c = live.client();
    CHECK(c.Get("/v1/sessions/AAAAAAAAAAAAAAAA")->status == 404);
    CHECK(c.Post("/v1/sessions", "not json", "application/json")->status == 400);
    CHECK(c.Post("/v1/sessions", R"({"user":1,"device":"x"})", "application/json")->status == 400);
    const auto id = create(c);
    auto res = c.Post("/v1/sessions/" + id + "/samples", R"({"samples":[{"t":-5}]})", "application/json");
    CHECK(res->status == 400);
    CHECK(json::parse(res->body).contains("error"));
    res = c.Post("/v1/sessions/" + id + "/samples", R"({"nope":[]})", "application/json");
    CHECK(res->status == 400);
    res = c.Post("/v1/sessions/" + id + "/events",
                 R"({"events":[{"t":1,"digit":10,"idx":0,"expected":"1234","entered":null}]})", "application/json");
    CHECK(res->status == 400);
    res = c.Options("/v1/sessions");
    REQUIRE(res);
    CHECK(res->status == 204);
    CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
}

TEST_CASE("collector-style capture with separate listener streams ingests cleanly") {
    const auto dir = fresh_dir("collector");
    LiveServer live(dir);
    auto c = live.client();
    const auto id = create(c);

    // 60 Hz motion events and orientation events that sometimes share a timestamp.
    const std::vector<std::string> targets{"1234", "5678", "9012", "3456", "7890"};
    std::vector<KeyEvent> events;
    for (std::size_t p = 0; p < targets.size(); ++p) {
        const auto run = pin_run(targets[p], 1000.0 + 2500.0 * static_cast<double>(p), targets[p]);
        events.insert(events.end(), run.begin(), run.end());
    }
    const double end_ms = 1000.0 + 2500.0 * 5;
    std::vector<json> pending;
    std::size_t sent = 0;
    auto flush = [&] {
        json body{{"samples", pending}};
        const auto res = c.Post("/v1/sessions/" + id + "/samples", body.dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        sent += pending.size();
        pending.clear();
    };
    for (int i = 0; 16.0 * i <= end_ms; ++i) {
        const double t = 16.0 * i;
        pending.push_back({{"t", t}, {"acc", {0.1, 0.0, 0.2}}, {"accG", {0.1, 0.0, 9.8}}, {"rotR", {1, 2, 3}},
                           {"ori", nullptr}, {"interval", 16}});
        const double to = i % 3 == 0 ? t : t + 5.0;
        pending.push_back({{"t", to}, {"acc", nullptr}, {"accG", nullptr}, {"rotR", nullptr},
                           {"ori", {120, 30, 0}}, {"interval", nullptr}});
        if (pending.size() >= 64) flush();
    }
    if (!pending.empty()) flush();
    auto res = c.Post("/v1/sessions/" + id + "/events", events_body(events), "application/json");
    REQUIRE(res->status == 200);
    c.Post("/v1/sessions/" + id + "/close", "", "application/json");

    const auto parsed = read_session_file(live.store.session_path(id));
    CHECK(parsed.trace.samples.size() == sent);
    const auto merged = merge_listener_streams(parsed.trace);
    CHECK(validate_trace(merged.trace).empty());
    CHECK(merged.dropped == 0);
    const auto segs = segment_pins(merged.trace, parsed.events, {});
    CHECK(segs.segments.size() == 5);
    const double expected = end_ms / 16.0 + 1;
    CHECK(std::abs(static_cast<double>(merged.trace.samples.size()) - expected) <= 0.2 * expected);
}

TEST_CASE("four concurrent clients, 1000 batches") {
    const auto dir = fresh_dir("concurrent");
    LiveServer live(dir);
    constexpr int kClients = 4;
    constexpr int kBatches = 250;
    std::vector<std::string> ids;
    {
        auto c = live.client();
        for (int i = 0; i < kClients; ++i) ids.push_back(create(c, "user" + std::to_string(i)));
    }
    std::vector<std::size_t> sent(kClients, 0);
    std::atomic<int> failures{0};
    std::vector<std::thread> threads;
    for (int k = 0; k < kClients; ++k) {
        threads.emplace_back([&, k] {
            auto c = live.client();
            c.set_keep_alive(true);
            double t = 0;
            for (int b = 0; b < kBatches; ++b) {
                const std::size_t n = 1 + static_cast<std::size_t>((b * 7 + k) % 9);
                const auto res = c.Post("/v1/sessions/" + ids[static_cast<std::size_t>(k)] + "/samples",
                                        samples_body(batch(t, n)), "application/json");
                if (!res || res->status != 200) {
                    ++failures;
                    continue;
                }
                sent[static_cast<std::size_t>(k)] += n;
                t += 16.0 * static_cast<double>(n);
            }
        });
    }
    for (auto& th : threads) th.join();
    CHECK(failures == 0);
    for (int k = 0; k < kClients; ++k) {
        const auto path = live.store.session_path(ids[static_cast<std::size_t>(k)]);
        CHECK(line_count(path) == sent[static_cast<std::size_t>(k)] + 1);
        const auto parsed = read_session_file(path);
        CHECK(parsed.metadata.user_id == "user" + std::to_string(k));
        CHECK(validate_trace(parsed.trace).empty());
    }
}
