// Device-event detection (e.g. phone calls) and sitting/walking/running
// classification from windowed motion statistics.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pinlog/core.hpp"

namespace pinlog::activity {

struct ActivityWindowConfig {
    double window_s = 4.0;
    double hop_s = 1.0;
    double event_var_threshold = 0.5;  // (m/s^2)^2, variance of |accG|
    double min_event_gap_s = 1.5;
    double refine_s = 0.5;             // short window used to place event endpoints
    std::pair<double, double> walking_band_hz{1.2, 2.4};
    std::pair<double, double> running_band_hz{2.4, 4.5};
    double sitting_energy_threshold = 0.2;  // (m/s^2)^2 per sample
};

void validate_config(const ActivityWindowConfig& cfg);

struct EventInterval {
    double start_s = 0.0;
    double end_s = 0.0;
};

/// Sliding-window variance of |accG|. Runs of windows above the threshold
/// form candidate intervals whose endpoints are then placed by a short
/// centred variance window; intervals closer than min_event_gap_s merge.
std::vector<EventInterval> detect_events(const SensorTrace& trace, const ActivityWindowConfig& cfg);

enum class Label { sitting, walking, running };
std::string_view to_string(Label l);

struct WindowLabel {
    double window_start_s = 0.0;
    Label label = Label::sitting;
};

/// Per window: mean-removed acc energy per sample below the sitting
/// threshold means sitting; otherwise the dominant non-DC frequency of the
/// acc signal along its principal axis picks the band (nearest band if none).
std::vector<WindowLabel> classify_windows(const SensorTrace& trace, const ActivityWindowConfig& cfg);

/// Sampling rate in Hz from the median sample spacing.
double sample_rate_hz(const SensorTrace& trace);

std::string events_to_json(const std::vector<EventInterval>& events);
std::string labels_to_json(const std::vector<WindowLabel>& labels);

}  // namespace pinlog::activity
