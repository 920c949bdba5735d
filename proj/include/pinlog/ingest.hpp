// Session files: parsing, listener-stream merging and keydown-anchored
// segmentation into labeled entry segments.
//
// Session file format (UTF-8, one JSON object per line):
//   {"k":"h","session":"<id>","user":"<id>","device":"<text>","created":"<ISO-8601>"}
//   {"k":"s","t":<ms>,"acc":[x,y,z],"accG":[x,y,z],"rotR":[a,b,g],"ori":[a,b,g],"interval":<ms|null>}
//   {"k":"e","t":<ms>,"digit":<0-9>,"idx":<0-3>,"expected":"dddd","entered":"dddd"|null}
// The header is optional but, when present, must be the first line.
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pinlog/core.hpp"

namespace pinlog {

class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct SessionMetadata {
    std::string session_id;
    std::string user_id;
    std::string device_label;
    std::string created;

    bool operator==(const SessionMetadata&) const = default;
};

struct ParsedSession {
    SensorTrace trace;
    std::vector<KeyEvent> events;
    SessionMetadata metadata;
};

ParsedSession parse_session(std::string_view bytes);
ParsedSession read_session_file(const std::filesystem::path& path);

// Line serializers; each returns one line without the trailing newline.
std::string header_line(const SessionMetadata& meta);
std::string sample_line(const SensorSample& s);
std::string event_line(const KeyEvent& e);

// Single-record parsers used by the HTTP service for request bodies.
SensorSample sample_from_json_text(std::string_view json_object);
KeyEvent event_from_json_text(std::string_view json_object);

struct MergeResult {
    SensorTrace trace;
    std::size_t dropped = 0;
};

/// Pairs motion-only samples (acc, accG, rotR) with the nearest
/// orientation-only sample within one sampling interval. Complete samples
/// pass through; unpaired or otherwise partial samples are dropped.
MergeResult merge_listener_streams(const SensorTrace& trace);

struct SegmentationConfig {
    double pin_pre_ms = 150.0;
    double pin_post_ms = 400.0;
    double digit_pre_ms = 100.0;
    double digit_post_ms = 300.0;
};

void validate_segmentation_config(const SegmentationConfig& cfg);

struct SegmentationResult {
    std::vector<PinEntrySegment> segments;
    std::size_t dropped_short = 0;    // fewer than 2 samples in the window
    std::size_t dropped_missing = 0;  // a sample in the window lacks a channel
};

/// One segment per complete run of four keydowns (idx 0..3, one expected
/// PIN), spanning [t_first - pre, t_last + post] clipped to the trace.
SegmentationResult segment_pins(const SensorTrace& trace, const std::vector<KeyEvent>& events,
                                const SegmentationConfig& cfg, const std::string& user_id = {});

/// One segment per keydown, labeled with the pressed digit.
SegmentationResult segment_digits(const SensorTrace& trace, const std::vector<KeyEvent>& events,
                                  const SegmentationConfig& cfg, const std::string& user_id = {});

/// Builds a dataset. An empty label_space means: "0".."9" for digit10,
/// sitting/walking/running for activity3, sorted distinct labels otherwise.
Dataset make_dataset(std::vector<PinEntrySegment> segments, DatasetMode mode,
                     std::vector<std::string> label_space = {});

std::string dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(std::string_view text);

}  // namespace pinlog
