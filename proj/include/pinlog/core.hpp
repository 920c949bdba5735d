// Domain types shared across the pinlog pipeline: sensor samples and traces,
// keydown events, labeled entry segments and datasets.
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pinlog {

/// Thrown for malformed input data (bad files, invariant violations, bad
/// arguments). The CLI maps it to exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Vec3 = std::array<double, 3>;

/// One merged reading of the motion and orientation listeners. Units follow
/// the W3C events: m/s^2 for acc/accG, deg/s for rotR, degrees for ori.
/// A channel triple is either wholly present or wholly missing.
struct SensorSample {
    double t = 0.0;  // ms since session start
    std::optional<Vec3> acc;
    std::optional<Vec3> accG;
    std::optional<Vec3> rotR;  // alpha, beta, gamma
    std::optional<Vec3> ori;   // alpha, beta, gamma
    std::optional<double> interval;  // ms

    bool complete() const { return acc && accG && rotR && ori; }
    bool operator==(const SensorSample&) const = default;
};

struct SensorTrace {
    std::vector<SensorSample> samples;
    std::string session_id;
    std::string device_label;
};

struct KeyEvent {
    double t = 0.0;  // ms
    int digit = 0;
    int entry_index = 0;
    std::string expected_pin;
    std::string entered_pin;  // empty until the entry completes

    bool operator==(const KeyEvent&) const = default;
};

/// True for exactly four ASCII decimal digits.
bool is_pin_string(std::string_view s);

/// Throws ValidationError when a key event breaks its field rules.
void validate_key_event(const KeyEvent& e);

/// Number of scalar channels and their canonical order.
inline constexpr std::size_t kChannelCount = 12;
inline constexpr std::array<std::string_view, kChannelCount> kChannelNames = {
    "acc.x",  "acc.y",  "acc.z",  "accG.x", "accG.y", "accG.z",
    "rotR.a", "rotR.b", "rotR.g", "ori.a",  "ori.b",  "ori.g"};

using ChannelSet = std::array<std::vector<double>, kChannelCount>;

/// Canonical 12-value view of a complete sample.
std::array<double, kChannelCount> channel_values(const SensorSample& s);

struct PinEntrySegment {
    ChannelSet channels;
    std::string label;  // PIN, digit or activity name depending on mode
    std::string user_id;
    bool valid = true;
    double t_start = 0.0;  // window bounds in ms
    double t_end = 0.0;
};

/// Throws ValidationError if any channel is shorter than two samples.
void validate_segment(const PinEntrySegment& seg);

enum class DatasetMode { pin50, digit10, activity3 };

std::string_view to_string(DatasetMode m);
DatasetMode dataset_mode_from_string(std::string_view s);
std::size_t expected_label_count(DatasetMode m);

struct Dataset {
    std::vector<PinEntrySegment> segments;
    std::vector<std::string> label_space;
    DatasetMode mode = DatasetMode::pin50;
};

/// Checks label-space size against the mode and segment membership.
void validate_dataset(const Dataset& ds);

/// Copy of the dataset without segments marked invalid.
Dataset valid_only(const Dataset& ds);

struct TraceViolation {
    std::size_t index = 0;  // sample index; 0 for whole-trace rules
    std::string rule;

    bool operator==(const TraceViolation&) const = default;
};

/// All invariant violations of a trace; empty means valid.
std::vector<TraceViolation> validate_trace(const SensorTrace& trace);

}  // namespace pinlog
