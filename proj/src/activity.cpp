#include "pinlog/activity.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "pinlog/features.hpp"

namespace pinlog::activity {

void validate_config(const ActivityWindowConfig& cfg) {
    if (!(cfg.window_s > 0.0) || !(cfg.hop_s > 0.0) || !(cfg.refine_s > 0.0)) {
        throw ValidationError("activity: window, hop and refine lengths must be positive");
    }
    const auto& w = cfg.walking_band_hz;
    const auto& r = cfg.running_band_hz;
    if (!(w.first < w.second) || !(r.first < r.second) || !(w.second <= r.first || r.second <= w.first)) {
        throw ValidationError("activity: frequency bands must be ordered and disjoint");
    }
    if (!(cfg.event_var_threshold >= 0.0) || !(cfg.sitting_energy_threshold >= 0.0) || !(cfg.min_event_gap_s >= 0.0)) {
        throw ValidationError("activity: thresholds must be >= 0");
    }
}

double sample_rate_hz(const SensorTrace& trace) {
    const auto& s = trace.samples;
    if (s.size() < 2) throw ValidationError("activity: trace needs at least 2 samples");
    std::vector<double> d;
    d.reserve(s.size() - 1);
    for (std::size_t i = 1; i < s.size(); ++i) d.push_back(s[i].t - s[i - 1].t);
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
    const double step_ms = d[d.size() / 2];
    if (!(step_ms > 0.0)) throw ValidationError("activity: non-increasing sample times");
    return 1000.0 / step_ms;
}

namespace {

struct Windowing {
    std::size_t length = 0;
    std::size_t hop = 0;
    std::size_t count = 0;
    double rate = 0.0;
};

Windowing windowing(const SensorTrace& trace, const ActivityWindowConfig& cfg) {
    validate_config(cfg);
    Windowing w;
    w.rate = sample_rate_hz(trace);
    w.length = static_cast<std::size_t>(std::max(2L, std::lround(cfg.window_s * w.rate)));
    w.hop = static_cast<std::size_t>(std::max(1L, std::lround(cfg.hop_s * w.rate)));
    const std::size_t n = trace.samples.size();
    if (n < w.length) {
        throw ValidationError("activity: trace of " + std::to_string(n) + " samples is shorter than one window (" +
                              std::to_string(w.length) + ")");
    }
    w.count = (n - w.length) / w.hop + 1;
    return w;
}

// Variance of v[lo..hi] from prefix sums of centred values.
struct RunningVariance {
    std::vector<double> s1{0.0};
    std::vector<double> s2{0.0};

    explicit RunningVariance(const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        for (double x : v) {
            s1.push_back(s1.back() + (x - mean));
            s2.push_back(s2.back() + (x - mean) * (x - mean));
        }
    }
    double operator()(std::size_t lo, std::size_t hi) const {  // inclusive
        const auto n = static_cast<double>(hi - lo + 1);
        const double m = (s1[hi + 1] - s1[lo]) / n;
        return std::max(0.0, (s2[hi + 1] - s2[lo]) / n - m * m);
    }
};

}  // namespace

std::vector<EventInterval> detect_events(const SensorTrace& trace, const ActivityWindowConfig& cfg) {
    const auto w = windowing(trace, cfg);
    const auto& samples = trace.samples;
    std::vector<double> mag(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!samples[i].accG) throw ValidationError("detect_events: sample " + std::to_string(i) + " lacks accG");
        const auto& g = *samples[i].accG;
        mag[i] = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
    }
    const RunningVariance var(mag);
    const std::size_t half = static_cast<std::size_t>(std::max(1L, std::lround(cfg.refine_s * w.rate / 2.0)));
    auto short_var = [&](std::size_t k) {
        const std::size_t lo = k >= half ? k - half : 0;
        const std::size_t hi = std::min(samples.size() - 1, k + half);
        return var(lo, hi);
    };

    std::vector<std::pair<std::size_t, std::size_t>> spans;  // sample index ranges
    std::size_t win = 0;
    while (win < w.count) {
        if (var(win * w.hop, win * w.hop + w.length - 1) <= cfg.event_var_threshold) {
            ++win;
            continue;
        }
        std::size_t last = win;
        while (last + 1 < w.count && var((last + 1) * w.hop, (last + 1) * w.hop + w.length - 1) > cfg.event_var_threshold) {
            ++last;
        }
        std::size_t lo = win * w.hop;
        std::size_t hi = last * w.hop + w.length - 1;
        std::size_t first_hit = hi + 1;
        std::size_t last_hit = lo;
        for (std::size_t k = lo; k <= hi; ++k) {
            if (short_var(k) > cfg.event_var_threshold) {
                if (first_hit > hi) first_hit = k;
                last_hit = k;
            }
        }
        if (first_hit <= hi) {
            lo = first_hit;
            hi = last_hit;
        }
        spans.emplace_back(lo, hi);
        win = last + 1;
    }

    std::vector<EventInterval> out;
    for (const auto& [lo, hi] : spans) {
        EventInterval ev{samples[lo].t / 1000.0, samples[hi].t / 1000.0};
        if (!out.empty() && ev.start_s - out.back().end_s < cfg.min_event_gap_s) {
            out.back().end_s = std::max(out.back().end_s, ev.end_s);
        } else {
            out.push_back(ev);
        }
    }
    return out;
}

std::string_view to_string(Label l) {
    switch (l) {
        case Label::sitting: return "sitting";
        case Label::walking: return "walking";
        case Label::running: return "running";
    }
    return "?";
}

namespace {

double band_distance(double f, const std::pair<double, double>& band) {
    if (f < band.first) return band.first - f;
    if (f > band.second) return f - band.second;
    return 0.0;
}

}  // namespace

std::vector<WindowLabel> classify_windows(const SensorTrace& trace, const ActivityWindowConfig& cfg) {
    const auto w = windowing(trace, cfg);
    const auto& samples = trace.samples;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!samples[i].acc) throw ValidationError("classify_windows: sample " + std::to_string(i) + " lacks acc");
    }
    std::vector<WindowLabel> out;
    out.reserve(w.count);
    Eigen::MatrixXd block(static_cast<Eigen::Index>(w.length), 3);
    for (std::size_t win = 0; win < w.count; ++win) {
        const std::size_t start = win * w.hop;
        for (std::size_t i = 0; i < w.length; ++i) {
            const auto& a = *samples[start + i].acc;
            for (int c = 0; c < 3; ++c) block(static_cast<Eigen::Index>(i), c) = a[static_cast<std::size_t>(c)];
        }
        const Eigen::RowVector3d mean = block.colwise().mean();
        const Eigen::MatrixXd centred = block.rowwise() - mean;
        const double energy = centred.squaredNorm() / static_cast<double>(w.length);

        WindowLabel label{samples[start].t / 1000.0, Label::sitting};
        if (energy >= cfg.sitting_energy_threshold) {
            const Eigen::Matrix3d cov = centred.transpose() * centred;
            const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
            const Eigen::Vector3d axis = eig.eigenvectors().col(2);  // largest eigenvalue
            const Eigen::VectorXd projected = centred * axis;
            const auto spectrum =
                features::dft_magnitude(std::span<const double>(projected.data(), static_cast<std::size_t>(projected.size())));
            std::size_t best = 1;
            for (std::size_t k = 2; k <= spectrum.size() / 2; ++k) {
                if (spectrum[k] > spectrum[best]) best = k;
            }
            const double freq = static_cast<double>(best) * w.rate / static_cast<double>(spectrum.size());
            const double dw = band_distance(freq, cfg.walking_band_hz);
            const double dr = band_distance(freq, cfg.running_band_hz);
            label.label = dw <= dr ? Label::walking : Label::running;
        }
        out.push_back(label);
    }
    return out;
}

std::string events_to_json(const std::vector<EventInterval>& events) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& e : events) j.push_back({{"start_s", e.start_s}, {"end_s", e.end_s}});
    return j.dump(2);
}

std::string labels_to_json(const std::vector<WindowLabel>& labels) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& l : labels) j.push_back({{"window_start_s", l.window_start_s}, {"label", std::string(to_string(l.label))}});
    return j.dump(2);
}

}  // namespace pinlog::activity
