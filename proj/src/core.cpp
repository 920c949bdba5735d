#include "pinlog/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pinlog {

bool is_pin_string(std::string_view s) {
    return s.size() == 4 &&
           std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

void validate_key_event(const KeyEvent& e) {
    if (!std::isfinite(e.t) || e.t < 0.0) {
        throw ValidationError("key event: t must be finite and >= 0");
    }
    if (e.digit < 0 || e.digit > 9) {
        throw ValidationError("key event: digit " + std::to_string(e.digit) + " outside 0-9");
    }
    if (e.entry_index < 0 || e.entry_index > 3) {
        throw ValidationError("key event: idx " + std::to_string(e.entry_index) + " outside 0-3");
    }
    if (!is_pin_string(e.expected_pin)) {
        throw ValidationError("key event: expected PIN '" + e.expected_pin + "' is not 4 digits");
    }
    if (!e.entered_pin.empty() && !is_pin_string(e.entered_pin)) {
        throw ValidationError("key event: entered PIN '" + e.entered_pin + "' is not 4 digits");
    }
}

std::array<double, kChannelCount> channel_values(const SensorSample& s) {
    if (!s.complete()) {
        throw ValidationError("sample at t=" + std::to_string(s.t) + " has missing channels");
    }
    const Vec3& a = *s.acc;
    const Vec3& g = *s.accG;
    const Vec3& r = *s.rotR;
    const Vec3& o = *s.ori;
    return {a[0], a[1], a[2], g[0], g[1], g[2], r[0], r[1], r[2], o[0], o[1], o[2]};
}

void validate_segment(const PinEntrySegment& seg) {
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        if (seg.channels[c].size() < 2) {
            throw ValidationError("segment '" + seg.label + "': channel " +
                                  std::string(kChannelNames[c]) + " has fewer than 2 samples");
        }
    }
}

std::string_view to_string(DatasetMode m) {
    switch (m) {
        case DatasetMode::pin50: return "pin50";
        case DatasetMode::digit10: return "digit10";
        case DatasetMode::activity3: return "activity3";
    }
    return "?";
}

DatasetMode dataset_mode_from_string(std::string_view s) {
    if (s == "pin50") return DatasetMode::pin50;
    if (s == "digit10") return DatasetMode::digit10;
    if (s == "activity3") return DatasetMode::activity3;
    throw ValidationError("unknown dataset mode '" + std::string(s) + "'");
}

std::size_t expected_label_count(DatasetMode m) {
    switch (m) {
        case DatasetMode::pin50: return 50;
        case DatasetMode::digit10: return 10;
        case DatasetMode::activity3: return 3;
    }
    return 0;
}

void validate_dataset(const Dataset& ds) {
    if (ds.label_space.size() != expected_label_count(ds.mode)) {
        throw ValidationError("dataset mode " + std::string(to_string(ds.mode)) + " needs " +
                              std::to_string(expected_label_count(ds.mode)) + " labels, got " +
                              std::to_string(ds.label_space.size()));
    }
    const std::set<std::string> labels(ds.label_space.begin(), ds.label_space.end());
    if (labels.size() != ds.label_space.size()) {
        throw ValidationError("dataset label space has duplicates");
    }
    for (const auto& seg : ds.segments) {
        if (!labels.contains(seg.label)) {
            throw ValidationError("segment label '" + seg.label + "' not in label space");
        }
    }
}

Dataset valid_only(const Dataset& ds) {
    Dataset out{{}, ds.label_space, ds.mode};
    std::copy_if(ds.segments.begin(), ds.segments.end(), std::back_inserter(out.segments),
                 [](const PinEntrySegment& s) { return s.valid; });
    return out;
}

namespace {

bool triple_finite(const std::optional<Vec3>& v) {
    return !v || std::all_of(v->begin(), v->end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::vector<TraceViolation> validate_trace(const SensorTrace& trace) {
    std::vector<TraceViolation> out;
    if (trace.samples.empty()) {
        out.push_back({0, "empty trace"});
        return out;
    }
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        const auto& s = trace.samples[i];
        if (!std::isfinite(s.t) || s.t < 0.0) {
            out.push_back({i, "t not finite or negative"});
        }
        if (i > 0 && !(s.t > trace.samples[i - 1].t)) {
            out.push_back({i, "non-increasing t"});
        }
        if (!triple_finite(s.acc) || !triple_finite(s.accG) || !triple_finite(s.rotR) ||
            !triple_finite(s.ori)) {
            out.push_back({i, "non-finite channel value"});
        }
        if (s.interval && !(std::isfinite(*s.interval) && *s.interval > 0.0)) {
            out.push_back({i, "interval not positive"});
        }
    }
    return out;
}

}  // namespace pinlog
