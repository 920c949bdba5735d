#include <doctest.h>

#include <random>

#include "pinlog/activity.hpp"
#include "pinlog/synth.hpp"

using namespace pinlog;
using namespace pinlog::activity;
using synth::Activity;

namespace {

synth::ActivityTrace make(const std::vector<synth::ScriptStep>& script, double noise = 0.05, std::uint64_t seed = 1) {
    synth::SynthConfig cfg;
    cfg.noise_sigma = noise;
    cfg.seed = seed;
    return synth::gen_activity_trace(cfg, script);
}

}  // namespace

TEST_CASE("a flat trace has no events and sits still") {
    const auto t = make({{Activity::sitting, 30}}, 0.0);
    CHECK(detect_events(t.trace, {}).empty());
    for (const auto& w : classify_windows(t.trace, {})) CHECK(w.label == Label::sitting);
}

TEST_CASE("one call event is recovered within half a second") {
    const auto t = make({{Activity::sitting, 10}, {Activity::call_event, 10}, {Activity::sitting, 10}});
    const auto ev = detect_events(t.trace, {});
    REQUIRE(ev.size() == 1);
    CHECK(std::abs(ev[0].start_s - 10) <= 0.5);
    CHECK(std::abs(ev[0].end_s - 20) <= 0.5);
}

TEST_CASE("four call events come back in order") {
    std::vector<synth::ScriptStep> script;
    for (int i = 0; i < 4; ++i) {
        script.push_back({Activity::sitting, 8.0 + i});
        script.push_back({Activity::call_event, 6.0 + 2 * i});
    }
    script.push_back({Activity::sitting, 8});
    const auto t = make(script);
    const auto ev = detect_events(t.trace, {});
    REQUIRE(ev.size() == 4);
    std::size_t k = 0;
    for (const auto& iv : t.intervals) {
        if (iv.activity != Activity::call_event) continue;
        CHECK(std::abs(ev[k].start_s - iv.start_s) <= 0.5);
        CHECK(std::abs(ev[k].end_s - iv.end_s) <= 0.5);
        ++k;
    }
    for (std::size_t i = 1; i < ev.size(); ++i) CHECK(ev[i].start_s > ev[i - 1].end_s);
}

TEST_CASE("walking windows are labeled walking") {
    const auto t = make({{Activity::walking, 40}});
    for (const auto& w : classify_windows(t.trace, {})) CHECK(w.label == Label::walking);
}

TEST_CASE("running windows are labeled running") {
    const auto t = make({{Activity::running, 40}});
    for (const auto& w : classify_windows(t.trace, {})) CHECK(w.label == Label::running);
}

TEST_CASE("mixed script: interior windows match ground truth and counts follow the formula") {
    const auto t = make({{Activity::sitting, 22}, {Activity::walking, 34}, {Activity::running, 25}});
    ActivityWindowConfig cfg;
    const auto labels = classify_windows(t.trace, cfg);
    CHECK(labels.size() == static_cast<std::size_t>((81.0 - cfg.window_s) / cfg.hop_s) + 1);
    std::size_t interior = 0, correct = 0;
    for (const auto& w : labels) {
        for (const auto& iv : t.intervals) {
            if (w.window_start_s >= iv.start_s && w.window_start_s + cfg.window_s <= iv.end_s) {
                ++interior;
                if (to_string(w.label) == synth::to_string(iv.activity)) ++correct;
            }
        }
    }
    CHECK(interior > 60);
    CHECK(static_cast<double>(correct) >= 0.95 * static_cast<double>(interior));
}

TEST_CASE("activity input checks") {
    const auto t = make({{Activity::sitting, 2}});
    CHECK_THROWS_AS(detect_events(t.trace, {}), ValidationError);
    CHECK_THROWS_AS(classify_windows(t.trace, {}), ValidationError);
    ActivityWindowConfig bad;
    bad.walking_band_hz = {1.2, 3.0};
    CHECK_THROWS_AS(validate_config(bad), ValidationError);
    bad = {};
    bad.window_s = 0;
    CHECK_THROWS_AS(validate_config(bad), ValidationError);
    CHECK(sample_rate_hz(make({{Activity::sitting, 5}}).trace) == doctest::Approx(60.0));
}

TEST_CASE("outputs are deterministic and serialize") {
    const auto t = make({{Activity::sitting, 10}, {Activity::call_event, 6}, {Activity::walking, 10}});
    CHECK(events_to_json(detect_events(t.trace, {})) == events_to_json(detect_events(t.trace, {})));
    const auto js = labels_to_json(classify_windows(t.trace, {}));
    CHECK(js.find("\"window_start_s\"") != std::string::npos);
    CHECK(js.find("\"walking\"") != std::string::npos);
}
