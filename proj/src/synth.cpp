#include "pinlog/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "pinlog/text.hpp"

namespace pinlog::synth {

namespace {

constexpr double kGravity = 9.81;
constexpr double kTapZ = -0.8;         // z pulse per unit tap_amp
constexpr double kRotGain = 20.0;      // deg/s per grid unit per unit tap_amp
constexpr double kOriGain = 1.5;       // deg per grid unit per unit tap_amp
constexpr double kHoldMs = 600.0;      // orientation held after the last keydown
constexpr double kReturnMs = 600.0;    // then eased back to rest over this span
constexpr Vec3 kRestOrientation = {120.0, 30.0, 0.0};
constexpr const char* kCreated = "2017-01-01T00:00:00Z";

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double half_sine(double tau, double width) {
    return tau >= 0.0 && tau < width ? std::sin(std::numbers::pi * tau / width) : 0.0;
}

double cosine_pulse(double tau, double width) {
    return tau >= 0.0 && tau < width ? std::cos(std::numbers::pi * tau / width) : 0.0;
}

double smooth_step(double tau, double width) {
    if (tau < 0.0) return 0.0;
    if (tau >= width) return 1.0;
    return 0.5 * (1.0 - std::cos(std::numbers::pi * tau / width));
}

std::string two_digits(int v) { return (v < 10 ? "0" : "") + std::to_string(v); }

}  // namespace

void validate_config(const SynthConfig& cfg) {
    if (!(cfg.sample_rate_hz > 0.0) || !(cfg.tap_width_ms > 0.0) || !(cfg.inter_key_ms > 0.0)) {
        throw ValidationError("synth: sample rate, tap width and inter-key time must be positive");
    }
    if (cfg.n_users <= 0 || cfg.reps <= 0) throw ValidationError("synth: n_users and reps must be positive");
    if (!(cfg.noise_sigma >= 0.0) || !(cfg.user_jitter >= 0.0)) {
        throw ValidationError("synth: noise_sigma and user_jitter must be >= 0");
    }
    if (!(cfg.error_rate >= 0.0 && cfg.error_rate <= 1.0)) throw ValidationError("synth: error_rate outside [0,1]");
    if (!(cfg.lead_in_ms >= 0.0) || !(cfg.pin_gap_ms > kHoldMs + kReturnMs)) {
        throw ValidationError("synth: pin_gap_ms must exceed the orientation hold and return time");
    }
    for (const auto& p : cfg.pins) {
        if (!is_pin_string(p)) throw ValidationError("synth: '" + p + "' is not a 4-digit PIN");
    }
}

std::vector<std::string> make_pin_list(std::uint64_t seed) {
    std::mt19937_64 rng(splitmix64(seed ^ 0x50494E53ULL));
    std::vector<int> slots;
    for (int d = 0; d < 10; ++d) slots.insert(slots.end(), 20, d);
    while (true) {
        std::shuffle(slots.begin(), slots.end(), rng);
        std::vector<std::string> pins;
        std::set<std::string> seen;
        for (std::size_t p = 0; p < 50; ++p) {
            std::string pin;
            for (std::size_t j = 0; j < 4; ++j) pin += static_cast<char>('0' + slots[4 * p + j]);
            seen.insert(pin);
            pins.push_back(std::move(pin));
        }
        if (seen.size() == pins.size()) return pins;
    }
}

GridOffset keypad_offset(int digit) {
    if (digit < 0 || digit > 9) throw ValidationError("keypad_offset: digit outside 0-9");
    if (digit == 0) return {0.0, -1.5};
    const int row = (digit - 1) / 3;
    const int col = (digit - 1) % 3;
    return {static_cast<double>(col - 1), 1.5 - static_cast<double>(row)};
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t user, std::uint64_t rep) {
    return splitmix64(splitmix64(splitmix64(seed) ^ user) ^ rep);
}

double user_gain(const SynthConfig& cfg, int user) {
    std::mt19937_64 rng(substream_seed(cfg.seed, static_cast<std::uint64_t>(user), 0xFFFFFFFFULL));
    std::normal_distribution<double> eta(0.0, 1.0);
    return 1.0 + cfg.user_jitter * eta(rng);
}

GeneratedSession gen_session(const SynthConfig& cfg, int user, int rep, const std::vector<std::string>& pin_sequence) {
    validate_config(cfg);
    for (const auto& p : pin_sequence) {
        if (!is_pin_string(p)) throw ValidationError("synth: '" + p + "' is not a 4-digit PIN");
    }
    const double dt = 1000.0 / cfg.sample_rate_hz;
    const auto steps = [dt](double ms) { return static_cast<long>(std::lround(ms / dt)); };
    const long lead = steps(cfg.lead_in_ms);
    const long key_step = std::max(1L, steps(cfg.inter_key_ms));
    const long pin_step = 3 * key_step + std::max(1L, steps(cfg.pin_gap_ms));
    const long support = 3 * key_step + steps(kHoldMs + kReturnMs) + 1;
    const long n_samples = lead + static_cast<long>(pin_sequence.size()) * pin_step + 1;

    std::mt19937_64 rng(substream_seed(cfg.seed, static_cast<std::uint64_t>(user), static_cast<std::uint64_t>(rep)));
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double gain = user_gain(cfg, user);

    GeneratedSession out;
    out.metadata.session_id = "synth-u" + two_digits(user) + "-r" + std::to_string(rep);
    out.metadata.user_id = "user" + two_digits(user);
    out.metadata.device_label = "synthetic";
    out.metadata.created = kCreated;
    out.trace.session_id = out.metadata.session_id;
    out.trace.device_label = out.metadata.device_label;

    // Digits actually pressed per PIN (differs from the target on injected errors).
    std::vector<std::array<int, 4>> pressed(pin_sequence.size());
    for (std::size_t p = 0; p < pin_sequence.size(); ++p) {
        const auto& pin = pin_sequence[p];
        for (std::size_t j = 0; j < 4; ++j) pressed[p][j] = pin[j] - '0';
        if (cfg.error_rate > 0.0 && unit(rng) < cfg.error_rate) {
            const auto pos = static_cast<std::size_t>(unit(rng) * 4.0) % 4;
            const int shift = 1 + static_cast<int>(unit(rng) * 9.0) % 9;
            pressed[p][pos] = (pressed[p][pos] + shift) % 10;
        }
        std::string entered;
        for (int d : pressed[p]) entered += static_cast<char>('0' + d);
        for (std::size_t j = 0; j < 4; ++j) {
            const long key_index = lead + static_cast<long>(p) * pin_step + static_cast<long>(j) * key_step;
            out.events.push_back({static_cast<double>(key_index) * dt, pressed[p][j], static_cast<int>(j), pin, entered});
        }
    }

    out.trace.samples.reserve(static_cast<std::size_t>(n_samples));
    const double w = cfg.tap_width_ms;
    const double amp = gain * cfg.tap_amp;
    for (long i = 0; i < n_samples; ++i) {
        std::array<double, kChannelCount> v{};
        const long rel = i - lead;
        if (rel >= 0) {
            const long p = rel / pin_step;
            const long u = rel % pin_step;
            if (p < static_cast<long>(pin_sequence.size()) && u < support) {
                for (long j = 0; j < 4; ++j) {
                    const double tau = static_cast<double>(u - j * key_step) * dt;
                    const auto off = keypad_offset(pressed[static_cast<std::size_t>(p)][static_cast<std::size_t>(j)]);
                    const double h = half_sine(tau, w);
                    const double c = cosine_pulse(tau, w);
                    const double s = smooth_step(tau, w);
                    v[0] += amp * off.dx * h;
                    v[1] += amp * off.dy * h;
                    v[2] += amp * kTapZ * h;
                    v[6] += amp * kRotGain * 0.3 * off.dx * c;
                    v[7] += amp * kRotGain * off.dy * c;
                    v[8] += amp * kRotGain * off.dx * c;
                    v[9] += amp * kOriGain * 0.3 * off.dx * s;
                    v[10] += amp * kOriGain * off.dy * s;
                    v[11] += amp * kOriGain * off.dx * s;
                }
                const double since_last = static_cast<double>(u - 3 * key_step) * dt - kHoldMs;
                const double keep = 1.0 - smooth_step(since_last, kReturnMs);
                for (std::size_t c = 9; c < 12; ++c) v[c] *= keep;
                for (std::size_t c = 0; c < 3; ++c) v[3 + c] = v[c];
            }
        }
        v[5] += kGravity;
        for (std::size_t c = 0; c < 3; ++c) v[9 + c] += kRestOrientation[c];
        if (cfg.noise_sigma > 0.0) {
            for (double& x : v) x += cfg.noise_sigma * noise(rng);
        }
        SensorSample s;
        s.t = static_cast<double>(i) * dt;
        s.acc = Vec3{v[0], v[1], v[2]};
        s.accG = Vec3{v[3], v[4], v[5]};
        s.rotR = Vec3{v[6], v[7], v[8]};
        s.ori = Vec3{v[9], v[10], v[11]};
        s.interval = dt;
        out.trace.samples.push_back(s);
    }
    return out;
}

std::vector<GeneratedSession> gen_protocol(const SynthConfig& cfg) {
    validate_config(cfg);
    const auto pins = cfg.pins.empty() ? make_pin_list(cfg.seed) : cfg.pins;
    std::vector<GeneratedSession> out;
    for (int user = 0; user < cfg.n_users; ++user) {
        for (int rep = 0; rep < cfg.reps; ++rep) {
            auto order = pins;
            std::mt19937_64 rng(substream_seed(cfg.seed ^ 0x0DDE5ULL, static_cast<std::uint64_t>(user),
                                               static_cast<std::uint64_t>(rep)));
            std::shuffle(order.begin(), order.end(), rng);
            out.push_back(gen_session(cfg, user, rep, order));
        }
    }
    return out;
}

std::string session_file_text(const GeneratedSession& s) {
    std::string out = header_line(s.metadata);
    out += '\n';
    // Events are placed after the samples up to their time so the file reads
    // like a live capture.
    std::size_t e = 0;
    for (const auto& sample : s.trace.samples) {
        while (e < s.events.size() && s.events[e].t < sample.t) {
            out += event_line(s.events[e++]);
            out += '\n';
        }
        out += sample_line(sample);
        out += '\n';
    }
    for (; e < s.events.size(); ++e) {
        out += event_line(s.events[e]);
        out += '\n';
    }
    return out;
}

std::vector<std::filesystem::path> write_protocol(const SynthConfig& cfg, const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> paths;
    for (const auto& s : gen_protocol(cfg)) {
        auto path = dir / (s.metadata.session_id + ".jsonl");
        write_file(path, session_file_text(s));
        paths.push_back(std::move(path));
    }
    return paths;
}

std::string_view to_string(Activity a) {
    switch (a) {
        case Activity::sitting: return "sitting";
        case Activity::walking: return "walking";
        case Activity::running: return "running";
        case Activity::call_event: return "call_event";
    }
    return "?";
}

Activity activity_from_string(std::string_view s) {
    if (s == "sitting") return Activity::sitting;
    if (s == "walking") return Activity::walking;
    if (s == "running") return Activity::running;
    if (s == "call_event" || s == "call") return Activity::call_event;
    throw ValidationError("unknown activity '" + std::string(s) + "'");
}

namespace {

struct Motion {
    Vec3 acc{};
    Vec3 rot{};
    Vec3 ori{};
};

Motion gait(double t, double freq, double amp) {
    const double ph = 2.0 * std::numbers::pi * freq * t;
    Motion m;
    m.acc = {0.0, 0.5 * amp * std::sin(ph), amp * std::sin(ph)};
    m.rot = {0.0, 4.0 * amp * std::cos(ph), 2.0 * amp * std::cos(ph)};
    m.ori = {0.0, 0.8 * amp * std::sin(ph), 0.4 * amp * std::sin(ph)};
    return m;
}

// u: seconds since the call started; d: call duration.
Motion call_motion(double u, double d) {
    constexpr double kTilt = 60.0;
    constexpr double kPulse = 3.0;
    constexpr double kHandling = 1.2;
    Motion m;
    if (u < 1.0) {
        m.acc[2] = kPulse * std::sin(2.0 * std::numbers::pi * u);
    } else if (u > d - 1.0) {
        m.acc[2] = -kPulse * std::sin(2.0 * std::numbers::pi * (u - (d - 1.0)));
    } else {
        m.acc[2] = kHandling * std::sin(2.0 * std::numbers::pi * 1.5 * (u - 1.0));
    }
    const double up = smooth_step(u, 2.0);
    const double down = smooth_step(u - (d - 2.0), 2.0);
    m.ori[1] = kTilt * (up - down);
    const double rate = kTilt * std::numbers::pi / 4.0;
    if (u < 2.0) m.rot[1] = rate * std::sin(std::numbers::pi * u / 2.0);
    if (u > d - 2.0) m.rot[1] = -rate * std::sin(std::numbers::pi * (u - (d - 2.0)) / 2.0);
    return m;
}

}  // namespace

ActivityTrace gen_activity_trace(const SynthConfig& cfg, const std::vector<ScriptStep>& script) {
    if (script.empty()) throw ValidationError("activity script is empty");
    if (!(cfg.sample_rate_hz > 0.0) || !(cfg.noise_sigma >= 0.0)) {
        throw ValidationError("activity: bad sample rate or noise");
    }
    ActivityTrace out;
    double total = 0.0;
    for (const auto& step : script) {
        if (!(step.duration_s > 0.0)) throw ValidationError("activity durations must be positive");
        if (step.activity == Activity::call_event && step.duration_s < 4.0) {
            throw ValidationError("call events must last at least 4 s");
        }
        out.intervals.push_back({step.activity, total, total + step.duration_s});
        total += step.duration_s;
    }
    std::mt19937_64 rng(substream_seed(cfg.seed, 0xAC7ULL, 0));
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto n = static_cast<std::size_t>(std::lround(total * cfg.sample_rate_hz));
    const double dt_ms = 1000.0 / cfg.sample_rate_hz;
    out.trace.session_id = "activity";
    out.trace.device_label = "synthetic";
    out.trace.samples.reserve(n);

    std::size_t step = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / cfg.sample_rate_hz;
        while (step + 1 < out.intervals.size() && t >= out.intervals[step].end_s) ++step;
        const auto& iv = out.intervals[step];
        const double u = t - iv.start_s;
        Motion m;
        switch (iv.activity) {
            case Activity::sitting: break;
            case Activity::walking: m = gait(u, 1.8, 1.5); break;
            case Activity::running: m = gait(u, 3.0, 4.0); break;
            case Activity::call_event: m = call_motion(u, iv.end_s - iv.start_s); break;
        }
        std::array<double, kChannelCount> v{};
        for (std::size_t c = 0; c < 3; ++c) {
            v[c] = m.acc[c];
            v[3 + c] = m.acc[c];
            v[6 + c] = m.rot[c];
            v[9 + c] = kRestOrientation[c] + m.ori[c];
        }
        v[5] += kGravity;
        if (cfg.noise_sigma > 0.0) {
            for (double& x : v) x += cfg.noise_sigma * noise(rng);
        }
        SensorSample s;
        s.t = static_cast<double>(i) * dt_ms;
        s.acc = Vec3{v[0], v[1], v[2]};
        s.accG = Vec3{v[3], v[4], v[5]};
        s.rotR = Vec3{v[6], v[7], v[8]};
        s.ori = Vec3{v[9], v[10], v[11]};
        s.interval = dt_ms;
        out.trace.samples.push_back(s);
    }
    return out;
}

double separation_statistic(const std::vector<std::array<double, 114>>& rows, const std::vector<std::string>& labels) {
    if (rows.size() != labels.size() || rows.empty()) throw ValidationError("separation: size mismatch");
    const std::size_t dims = 114;
    const auto n = static_cast<double>(rows.size());
    std::vector<double> mean(dims, 0.0);
    std::vector<double> sd(dims, 0.0);
    for (const auto& r : rows)
        for (std::size_t d = 0; d < dims; ++d) mean[d] += r[d] / n;
    for (const auto& r : rows)
        for (std::size_t d = 0; d < dims; ++d) sd[d] += (r[d] - mean[d]) * (r[d] - mean[d]) / n;
    for (double& s : sd) s = std::sqrt(s);

    std::map<std::string, std::pair<std::vector<double>, std::size_t>> centroids;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto& [sum, count] = centroids[labels[i]];
        sum.resize(dims, 0.0);
        ++count;
        for (std::size_t d = 0; d < dims; ++d)
            if (sd[d] > 0.0) sum[d] += (rows[i][d] - mean[d]) / sd[d];
    }
    double between = 0.0;
    for (auto& [label, c] : centroids) {
        for (double& v : c.first) v /= static_cast<double>(c.second);
        for (double v : c.first) between += static_cast<double>(c.second) * v * v;
    }
    double within = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& centroid = centroids[labels[i]].first;
        for (std::size_t d = 0; d < dims; ++d) {
            if (sd[d] == 0.0) continue;
            const double z = (rows[i][d] - mean[d]) / sd[d] - centroid[d];
            within += z * z;
        }
    }
    return within > 0.0 ? between / within : std::numeric_limits<double>::infinity();
}

}  // namespace pinlog::synth
