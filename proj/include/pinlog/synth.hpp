// Synthetic PIN-entry sessions and activity traces with known ground truth.
//
// Tap model: keypad is a 3x4 grid ('0' bottom centre). A keydown on digit d
// with grid offset (dx, dy) from the device centre produces
//   acc, accG : half-sine pulse, x/y amplitude tap_amp*(dx, dy), fixed z amplitude
//   rotR      : derivative-shaped (cosine) pulse scaled by the same offsets
//   ori       : smoothed step held for the rest of the PIN entry, then a
//               smooth return to rest before the next PIN
// accG carries gravity on z. Each user has a gain 1 + user_jitter*eta and
// every channel gets N(0, noise_sigma) noise.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pinlog/core.hpp"
#include "pinlog/ingest.hpp"

namespace pinlog::synth {

struct SynthConfig {
    std::uint64_t seed = 1;
    double sample_rate_hz = 60.0;
    int n_users = 10;
    std::vector<std::string> pins;  // empty: make_pin_list(seed)
    int reps = 5;
    double tap_amp = 1.0;       // m/s^2 per grid unit
    double tap_width_ms = 120.0;
    double noise_sigma = 0.05;
    double user_jitter = 0.1;
    double inter_key_ms = 400.0;
    double error_rate = 0.0;    // probability an entry is mistyped
    double lead_in_ms = 1000.0;
    double pin_gap_ms = 1500.0;  // last keydown to next PIN's first keydown
};

void validate_config(const SynthConfig& cfg);

/// 50 distinct PINs in which every digit fills exactly 20 of the 200 slots.
std::vector<std::string> make_pin_list(std::uint64_t seed);

struct GridOffset {
    double dx = 0.0;
    double dy = 0.0;
};

GridOffset keypad_offset(int digit);

/// Stable seed for the (seed, user, rep) substream.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t user, std::uint64_t rep);

/// Per-user multiplicative gain 1 + user_jitter * eta, eta ~ N(0, 1).
double user_gain(const SynthConfig& cfg, int user);

struct GeneratedSession {
    SensorTrace trace;
    std::vector<KeyEvent> events;
    SessionMetadata metadata;
};

/// One session in which `user` enters each PIN of `pin_sequence` once.
/// `rep` selects the noise/error substream.
GeneratedSession gen_session(const SynthConfig& cfg, int user, int rep, const std::vector<std::string>& pin_sequence);

/// The standard protocol: per user and rep, one session over all PINs in a
/// shuffled order.
std::vector<GeneratedSession> gen_protocol(const SynthConfig& cfg);

/// Serializes a session in the ingest line format (header, samples, events).
std::string session_file_text(const GeneratedSession& s);

/// Writes gen_protocol sessions as <dir>/<session_id>.jsonl; returns the paths.
std::vector<std::filesystem::path> write_protocol(const SynthConfig& cfg, const std::filesystem::path& dir);

enum class Activity { sitting, walking, running, call_event };
std::string_view to_string(Activity a);
Activity activity_from_string(std::string_view s);

struct ScriptStep {
    Activity activity = Activity::sitting;
    double duration_s = 0.0;
};

struct ActivityInterval {
    Activity activity = Activity::sitting;
    double start_s = 0.0;
    double end_s = 0.0;
};

struct ActivityTrace {
    SensorTrace trace;
    std::vector<ActivityInterval> intervals;
};

/// Sitting is noise only; walking/running are 1.8 Hz/1.5 m/s^2 and
/// 3.0 Hz/4 m/s^2 oscillations; a call event has 2 s pick-up and put-down
/// transients with handling motion in between.
ActivityTrace gen_activity_trace(const SynthConfig& cfg, const std::vector<ScriptStep>& script);

/// Between-class over within-class scatter of standardized feature vectors.
double separation_statistic(const std::vector<std::array<double, 114>>& rows, const std::vector<std::string>& labels);

}  // namespace pinlog::synth
