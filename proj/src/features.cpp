#include "pinlog/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include "pinlog/text.hpp"

namespace pinlog::features {

std::vector<double> preprocess(std::span<const double> seq) {
    if (seq.empty()) throw ValidationError("preprocess: empty sequence");
    std::vector<double> out(seq.size());
    const double x0 = seq[0];
    std::transform(seq.begin(), seq.end(), out.begin(), [x0](double v) { return v - x0; });
    return out;
}

BasicStats basic_stats(std::span<const double> seq) {
    if (seq.empty()) throw ValidationError("basic_stats: empty sequence");
    BasicStats s{seq[0], seq[0], 0.0};
    double sum = 0.0;
    for (double v : seq) {
        if (std::isnan(v)) throw ValidationError("basic_stats: NaN in sequence");
        s.max = std::max(s.max, v);
        s.min = std::min(s.min, v);
        sum += v;
    }
    s.mean = sum / static_cast<double>(seq.size());
    return s;
}

double energy(std::span<const double> seq) {
    if (seq.empty()) throw ValidationError("energy: empty sequence");
    double e = 0.0;
    for (double v : seq) e += v * v;
    return e;
}

void fft_inplace(std::vector<std::complex<double>>& data) {
    const std::size_t n = data.size();
    if (n == 0 || !std::has_single_bit(n)) throw std::invalid_argument("fft: size must be a power of two");

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::size_t half = len / 2;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < half; ++k) {
                // Twiddles are evaluated directly rather than by recurrence so
                // rounding error does not accumulate across a stage.
                const std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
                const auto u = data[i + k];
                const auto v = data[i + k + half] * w;
                data[i + k] = u + v;
                data[i + k + half] = u - v;
            }
        }
    }
}

std::vector<double> dft_magnitude(std::span<const double> seq) {
    if (seq.size() < 2) throw ValidationError("dft_magnitude: need at least 2 samples");
    const std::size_t n = std::bit_ceil(seq.size());
    std::vector<std::complex<double>> buf(n);
    std::copy(seq.begin(), seq.end(), buf.begin());
    fft_inplace(buf);
    std::vector<double> mag(n);
    std::transform(buf.begin(), buf.end(), mag.begin(), [](const auto& z) { return std::abs(z); });
    return mag;
}

double correlation(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = std::min(a.size(), b.size());
    if (n < 2) throw ValidationError("correlation: need at least 2 paired samples");
    a = a.first(n);
    b = b.first(n);
    double mean_a = 0.0;
    double mean_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= static_cast<double>(n);
    mean_b /= static_cast<double>(n);
    double cab = 0.0;
    double caa = 0.0;
    double cbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        cab += da * db;
        caa += da * da;
        cbb += db * db;
    }
    // The 1/(n-1) factors of the sample covariances cancel.
    if (caa == 0.0 || cbb == 0.0) return 0.0;
    const double r = cab / std::sqrt(caa * cbb);
    return std::clamp(r, -1.0, 1.0);
}

FeatureVector extract(const PinEntrySegment& segment) {
    FeatureVector fv;
    fv.label = segment.label;
    fv.user_id = segment.user_id;
    auto& out = fv.values;

    std::array<std::vector<double>, kChannelCount> pre;
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        try {
            if (segment.channels[c].size() < 2) throw ValidationError("fewer than 2 samples");
            pre[c] = preprocess(segment.channels[c]);
            const auto ts = basic_stats(pre[c]);
            const auto spectrum = dft_magnitude(pre[c]);
            const auto fs = basic_stats(spectrum);
            out[kTimeStatsOffset + 3 * c + 0] = ts.max;
            out[kTimeStatsOffset + 3 * c + 1] = ts.min;
            out[kTimeStatsOffset + 3 * c + 2] = ts.mean;
            out[kFreqStatsOffset + 3 * c + 0] = fs.max;
            out[kFreqStatsOffset + 3 * c + 1] = fs.min;
            out[kFreqStatsOffset + 3 * c + 2] = fs.mean;
            out[kTimeEnergyOffset + c] = energy(pre[c]);
            out[kFreqEnergyOffset + c] = energy(spectrum);
        } catch (const std::exception& e) {
            throw ValidationError("channel " + std::string(kChannelNames[c]) + ": " + e.what());
        }
    }
    for (std::size_t p = 0; p < kCorrelationPairs.size(); ++p) {
        const auto first = static_cast<std::size_t>(kCorrelationPairs[p].first);
        const auto second = static_cast<std::size_t>(kCorrelationPairs[p].second);
        for (std::size_t axis = 0; axis < 3; ++axis) {
            out[kCorrelationOffset + 3 * p + axis] = correlation(pre[first + axis], pre[second + axis]);
        }
    }
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (!std::isfinite(out[i])) {
            throw ValidationError("feature " + std::to_string(i) + " is not finite");
        }
    }
    return fv;
}

std::vector<FeatureVector> extract_all(const Dataset& ds) {
    std::vector<FeatureVector> rows;
    rows.reserve(ds.segments.size());
    for (std::size_t i = 0; i < ds.segments.size(); ++i) {
        try {
            rows.push_back(extract(ds.segments[i]));
        } catch (const ValidationError& e) {
            throw ValidationError("segment " + std::to_string(i) + ": " + e.what());
        }
    }
    return rows;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string feature_column(std::size_t i) {
    std::string s = std::to_string(i);
    return "f" + std::string(3 - std::min<std::size_t>(3, s.size()), '0') + s;
}

}  // namespace

std::string to_csv(const std::vector<FeatureVector>& rows) {
    std::string out = "label,user_id";
    for (std::size_t i = 0; i < kFeatureCount; ++i) out += "," + feature_column(i);
    out += '\n';
    for (const auto& r : rows) {
        out += csv_field(r.label);
        out += ',';
        out += csv_field(r.user_id);
        for (double v : r.values) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

std::vector<FeatureVector> from_csv(std::string_view text) {
    std::vector<FeatureVector> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (line_no == 1) {
            if (fields.size() != kFeatureCount + 2 || fields[0] != "label" || fields[1] != "user_id") {
                throw ValidationError("feature CSV: unexpected header");
            }
            continue;
        }
        if (fields.size() != kFeatureCount + 2) {
            throw ValidationError("feature CSV line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(kFeatureCount + 2) + " fields, got " +
                                  std::to_string(fields.size()));
        }
        FeatureVector fv;
        fv.label = fields[0];
        fv.user_id = fields[1];
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            try {
                fv.values[i] = parse_double(fields[i + 2]);
            } catch (const ValidationError& e) {
                throw ValidationError("feature CSV line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        rows.push_back(std::move(fv));
    }
    if (line_no == 0) throw ValidationError("feature CSV: empty file");
    return rows;
}

}  // namespace pinlog::features
