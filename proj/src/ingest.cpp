#include "pinlog/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "pinlog/text.hpp"

namespace pinlog {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

ParseError::ParseError(std::size_t line, const std::string& what)
    : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::optional<Vec3> triple_from_json(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_array() || it->size() != 3) {
        throw ValidationError(std::string("field '") + key + "' must be a 3-element array or null");
    }
    Vec3 v{};
    for (std::size_t i = 0; i < 3; ++i) {
        if (!(*it)[i].is_number()) {
            throw ValidationError(std::string("field '") + key + "' has a non-numeric element");
        }
        v[i] = (*it)[i].get<double>();
    }
    return v;
}

double number_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(std::string("missing field '") + key + "'");
    if (!it->is_number()) throw ValidationError(std::string("field '") + key + "' is not a number");
    return it->get<double>();
}

std::string string_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(std::string("missing field '") + key + "'");
    if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' is not a string");
    return it->get<std::string>();
}

int int_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(std::string("missing field '") + key + "'");
    if (!it->is_number_integer()) {
        throw ValidationError(std::string("field '") + key + "' is not an integer");
    }
    return it->get<int>();
}

SensorSample sample_from_json(const json& obj) {
    SensorSample s;
    s.t = number_field(obj, "t");
    if (!std::isfinite(s.t) || s.t < 0.0) throw ValidationError("field 't' must be finite and >= 0");
    s.acc = triple_from_json(obj, "acc");
    s.accG = triple_from_json(obj, "accG");
    s.rotR = triple_from_json(obj, "rotR");
    s.ori = triple_from_json(obj, "ori");
    if (auto it = obj.find("interval"); it != obj.end() && !it->is_null()) {
        if (!it->is_number()) throw ValidationError("field 'interval' is not a number");
        s.interval = it->get<double>();
    }
    return s;
}

KeyEvent event_from_json(const json& obj) {
    KeyEvent e;
    e.t = number_field(obj, "t");
    e.digit = int_field(obj, "digit");
    e.entry_index = int_field(obj, "idx");
    e.expected_pin = string_field(obj, "expected");
    if (auto it = obj.find("entered"); it != obj.end() && !it->is_null()) {
        if (!it->is_string()) throw ValidationError("field 'entered' is not a string");
        e.entered_pin = it->get<std::string>();
    }
    validate_key_event(e);
    return e;
}

json parse_object(std::string_view text) {
    json obj = json::parse(text.begin(), text.end(), nullptr, false);
    if (obj.is_discarded()) throw ValidationError("invalid JSON");
    if (!obj.is_object()) throw ValidationError("record is not a JSON object");
    return obj;
}

ordered_json triple_to_json(const std::optional<Vec3>& v) {
    if (!v) return nullptr;
    return ordered_json::array({(*v)[0], (*v)[1], (*v)[2]});
}

}  // namespace

SensorSample sample_from_json_text(std::string_view text) { return sample_from_json(parse_object(text)); }

KeyEvent event_from_json_text(std::string_view text) { return event_from_json(parse_object(text)); }

ParsedSession parse_session(std::string_view bytes) {
    ParsedSession out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool seen_record = false;
    while (pos < bytes.size()) {
        std::size_t nl = bytes.find('\n', pos);
        if (nl == std::string_view::npos) nl = bytes.size();
        std::string_view line = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        try {
            const json obj = parse_object(line);
            const std::string kind = string_field(obj, "k");
            if (kind == "h") {
                if (seen_record) throw ValidationError("header must be the first line");
                out.metadata.session_id = string_field(obj, "session");
                out.metadata.user_id = string_field(obj, "user");
                out.metadata.device_label = string_field(obj, "device");
                if (auto it = obj.find("created"); it != obj.end() && it->is_string()) {
                    out.metadata.created = it->get<std::string>();
                }
            } else if (kind == "s") {
                out.trace.samples.push_back(sample_from_json(obj));
            } else if (kind == "e") {
                out.events.push_back(event_from_json(obj));
            } else {
                throw ValidationError("unknown record kind '" + kind + "'");
            }
            seen_record = true;
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(line_no, e.what());
        }
    }
    out.trace.session_id = out.metadata.session_id;
    out.trace.device_label = out.metadata.device_label;
    return out;
}

ParsedSession read_session_file(const std::filesystem::path& path) {
    try {
        return parse_session(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(e.line(), path.string() + ": " + e.what());
    }
}

std::string header_line(const SessionMetadata& meta) {
    ordered_json j;
    j["k"] = "h";
    j["session"] = meta.session_id;
    j["user"] = meta.user_id;
    j["device"] = meta.device_label;
    j["created"] = meta.created;
    return j.dump();
}

std::string sample_line(const SensorSample& s) {
    ordered_json j;
    j["k"] = "s";
    j["t"] = s.t;
    j["acc"] = triple_to_json(s.acc);
    j["accG"] = triple_to_json(s.accG);
    j["rotR"] = triple_to_json(s.rotR);
    j["ori"] = triple_to_json(s.ori);
    j["interval"] = s.interval ? ordered_json(*s.interval) : ordered_json(nullptr);
    return j.dump();
}

std::string event_line(const KeyEvent& e) {
    ordered_json j;
    j["k"] = "e";
    j["t"] = e.t;
    j["digit"] = e.digit;
    j["idx"] = e.entry_index;
    j["expected"] = e.expected_pin;
    j["entered"] = e.entered_pin.empty() ? ordered_json(nullptr) : ordered_json(e.entered_pin);
    return j.dump();
}

namespace {

bool motion_only(const SensorSample& s) { return s.acc && s.accG && s.rotR && !s.ori; }
bool orientation_only(const SensorSample& s) { return s.ori && !s.acc && !s.accG && !s.rotR; }

double median_step(const std::vector<double>& times) {
    if (times.size() < 2) return 0.0;
    std::vector<double> d;
    d.reserve(times.size() - 1);
    for (std::size_t i = 1; i < times.size(); ++i) d.push_back(times[i] - times[i - 1]);
    std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
    return d[d.size() / 2];
}

}  // namespace

MergeResult merge_listener_streams(const SensorTrace& trace) {
    MergeResult out;
    out.trace.session_id = trace.session_id;
    out.trace.device_label = trace.device_label;

    std::vector<double> ori_t;
    std::vector<const SensorSample*> ori_s;
    std::vector<double> motion_t;
    for (const auto& s : trace.samples) {
        if (orientation_only(s)) {
            ori_t.push_back(s.t);
            ori_s.push_back(&s);
        } else if (motion_only(s)) {
            motion_t.push_back(s.t);
        }
    }
    const double fallback_interval = median_step(motion_t);

    for (const auto& s : trace.samples) {
        if (s.complete()) {
            out.trace.samples.push_back(s);
            continue;
        }
        if (orientation_only(s)) continue;  // consumed by pairing
        if (!motion_only(s) || ori_t.empty()) {
            ++out.dropped;
            continue;
        }
        const double tol = s.interval ? *s.interval : fallback_interval;
        auto it = std::lower_bound(ori_t.begin(), ori_t.end(), s.t);
        std::size_t best = ori_t.size();
        double best_d = 0.0;
        if (it != ori_t.end()) {
            best = static_cast<std::size_t>(it - ori_t.begin());
            best_d = *it - s.t;
        }
        if (it != ori_t.begin()) {
            const auto prev = static_cast<std::size_t>(it - ori_t.begin()) - 1;
            const double d = s.t - ori_t[prev];
            if (best == ori_t.size() || d <= best_d) {
                best = prev;
                best_d = d;
            }
        }
        if (best == ori_t.size() || best_d > tol) {
            ++out.dropped;
            continue;
        }
        SensorSample merged = s;
        merged.ori = ori_s[best]->ori;
        out.trace.samples.push_back(merged);
    }
    // Output must be strictly increasing in t; duplicates count as drops.
    std::stable_sort(out.trace.samples.begin(), out.trace.samples.end(),
                     [](const SensorSample& a, const SensorSample& b) { return a.t < b.t; });
    auto last = std::unique(out.trace.samples.begin(), out.trace.samples.end(),
                            [](const SensorSample& a, const SensorSample& b) { return a.t == b.t; });
    out.dropped += static_cast<std::size_t>(out.trace.samples.end() - last);
    out.trace.samples.erase(last, out.trace.samples.end());
    return out;
}

void validate_segmentation_config(const SegmentationConfig& cfg) {
    for (double v : {cfg.pin_pre_ms, cfg.pin_post_ms, cfg.digit_pre_ms, cfg.digit_post_ms}) {
        if (!std::isfinite(v) || v < 0.0) {
            throw ValidationError("segmentation windows must be finite and >= 0");
        }
    }
}

namespace {

void check_event_order(const std::vector<KeyEvent>& events) {
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (events[i].t < events[i - 1].t) {
            throw ValidationError("key events out of time order at event " + std::to_string(i));
        }
    }
}

// Slices [lo, hi] (clipped to the trace) into a segment; updates drop counters.
std::optional<PinEntrySegment> cut_window(const SensorTrace& trace, double lo, double hi,
                                          SegmentationResult& counters) {
    const auto& samples = trace.samples;
    if (samples.empty()) {
        ++counters.dropped_short;
        return std::nullopt;
    }
    lo = std::max(lo, samples.front().t);
    hi = std::min(hi, samples.back().t);
    // Bounds that fall on the sample grid must not depend on rounding of t.
    constexpr double kEdgeTolMs = 1e-6;
    auto first = std::lower_bound(samples.begin(), samples.end(), lo - kEdgeTolMs,
                                  [](const SensorSample& s, double t) { return s.t < t; });
    auto last = std::upper_bound(samples.begin(), samples.end(), hi + kEdgeTolMs,
                                 [](double t, const SensorSample& s) { return t < s.t; });
    if (last - first < 2) {
        ++counters.dropped_short;
        return std::nullopt;
    }
    PinEntrySegment seg;
    seg.t_start = lo;
    seg.t_end = hi;
    for (auto& ch : seg.channels) ch.reserve(static_cast<std::size_t>(last - first));
    for (auto it = first; it != last; ++it) {
        if (!it->complete()) {
            ++counters.dropped_missing;
            return std::nullopt;
        }
        const auto v = channel_values(*it);
        for (std::size_t c = 0; c < kChannelCount; ++c) seg.channels[c].push_back(v[c]);
    }
    return seg;
}

bool entry_valid(const KeyEvent& e) { return !e.entered_pin.empty() && e.entered_pin == e.expected_pin; }

}  // namespace

SegmentationResult segment_pins(const SensorTrace& trace, const std::vector<KeyEvent>& events,
                                const SegmentationConfig& cfg, const std::string& user_id) {
    validate_segmentation_config(cfg);
    check_event_order(events);
    SegmentationResult out;
    std::vector<const KeyEvent*> run;
    for (const auto& e : events) {
        const bool continues = !run.empty() && e.expected_pin == run.front()->expected_pin &&
                               e.entry_index == static_cast<int>(run.size());
        if (!continues) {
            run.clear();
            if (e.entry_index != 0) continue;
        }
        run.push_back(&e);
        if (run.size() < 4) continue;

        auto seg = cut_window(trace, run.front()->t - cfg.pin_pre_ms, run.back()->t + cfg.pin_post_ms, out);
        if (seg) {
            seg->label = run.front()->expected_pin;
            seg->user_id = user_id;
            seg->valid = std::all_of(run.begin(), run.end(), [](const KeyEvent* k) { return entry_valid(*k); });
            out.segments.push_back(std::move(*seg));
        }
        run.clear();
    }
    return out;
}

SegmentationResult segment_digits(const SensorTrace& trace, const std::vector<KeyEvent>& events,
                                  const SegmentationConfig& cfg, const std::string& user_id) {
    validate_segmentation_config(cfg);
    check_event_order(events);
    SegmentationResult out;
    for (const auto& e : events) {
        auto seg = cut_window(trace, e.t - cfg.digit_pre_ms, e.t + cfg.digit_post_ms, out);
        if (!seg) continue;
        seg->label = std::to_string(e.digit);
        seg->user_id = user_id;
        seg->valid = entry_valid(e);
        out.segments.push_back(std::move(*seg));
    }
    return out;
}

Dataset make_dataset(std::vector<PinEntrySegment> segments, DatasetMode mode,
                     std::vector<std::string> label_space) {
    if (label_space.empty()) {
        switch (mode) {
            case DatasetMode::digit10:
                for (int d = 0; d < 10; ++d) label_space.push_back(std::to_string(d));
                break;
            case DatasetMode::activity3:
                label_space = {"sitting", "walking", "running"};
                break;
            case DatasetMode::pin50:
                for (const auto& s : segments) label_space.push_back(s.label);
                std::sort(label_space.begin(), label_space.end());
                label_space.erase(std::unique(label_space.begin(), label_space.end()), label_space.end());
                break;
        }
    }
    Dataset ds{std::move(segments), std::move(label_space), mode};
    validate_dataset(ds);
    return ds;
}

std::string dataset_to_json(const Dataset& ds) {
    ordered_json j;
    j["mode"] = std::string(to_string(ds.mode));
    j["label_space"] = ds.label_space;
    ordered_json segs = ordered_json::array();
    for (const auto& s : ds.segments) {
        ordered_json js;
        js["label"] = s.label;
        js["user"] = s.user_id;
        js["valid"] = s.valid;
        js["t_start"] = s.t_start;
        js["t_end"] = s.t_end;
        js["channels"] = s.channels;
        segs.push_back(std::move(js));
    }
    j["segments"] = std::move(segs);
    return j.dump();
}

Dataset dataset_from_json(std::string_view text) {
    const json j = json::parse(text.begin(), text.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ValidationError("dataset file is not a JSON object");
    try {
        Dataset ds;
        ds.mode = dataset_mode_from_string(j.at("mode").get<std::string>());
        ds.label_space = j.at("label_space").get<std::vector<std::string>>();
        for (const auto& js : j.at("segments")) {
            PinEntrySegment s;
            s.label = js.at("label").get<std::string>();
            s.user_id = js.at("user").get<std::string>();
            s.valid = js.at("valid").get<bool>();
            s.t_start = js.at("t_start").get<double>();
            s.t_end = js.at("t_end").get<double>();
            const auto& ch = js.at("channels");
            if (!ch.is_array() || ch.size() != kChannelCount) {
                throw ValidationError("segment needs 12 channels");
            }
            for (std::size_t c = 0; c < kChannelCount; ++c) s.channels[c] = ch[c].get<std::vector<double>>();
            validate_segment(s);
            ds.segments.push_back(std::move(s));
        }
        validate_dataset(ds);
        return ds;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("dataset file: ") + e.what());
    }
}

}  // namespace pinlog
