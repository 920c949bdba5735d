// The 114-element feature vector of a keydown-anchored segment.
//
// Layout (c = canonical channel index 0..11, see kChannelNames):
//   [0, 36)    time domain (max, min, mean) of the preprocessed channel, at 3c
//   [36, 72)   frequency domain (max, min, mean) of the DFT magnitude, at 36 + 3c
//   [72, 84)   time-domain energy, at 72 + c
//   [84, 96)   frequency-domain energy, at 84 + c
//   [96, 114)  per-axis correlation of sensor pairs (ori,acc) (ori,accG)
//              (ori,rotR) (acc,accG) (acc,rotR) (accG,rotR), at 96 + 3p + axis
#pragma once

#include <array>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "pinlog/core.hpp"

namespace pinlog::features {

inline constexpr std::size_t kFeatureCount = 114;
inline constexpr std::size_t kTimeStatsOffset = 0;
inline constexpr std::size_t kFreqStatsOffset = 36;
inline constexpr std::size_t kTimeEnergyOffset = 72;
inline constexpr std::size_t kFreqEnergyOffset = 84;
inline constexpr std::size_t kCorrelationOffset = 96;

/// Sensor groups by the index of their first canonical channel.
enum class Sensor : std::size_t { acc = 0, accG = 3, rotR = 6, ori = 9 };

inline constexpr std::array<std::pair<Sensor, Sensor>, 6> kCorrelationPairs = {{
    {Sensor::ori, Sensor::acc},
    {Sensor::ori, Sensor::accG},
    {Sensor::ori, Sensor::rotR},
    {Sensor::acc, Sensor::accG},
    {Sensor::acc, Sensor::rotR},
    {Sensor::accG, Sensor::rotR},
}};

struct FeatureVector {
    std::array<double, kFeatureCount> values{};
    std::string label;
    std::string user_id;

    bool operator==(const FeatureVector&) const = default;
};

struct BasicStats {
    double max = 0.0;
    double min = 0.0;
    double mean = 0.0;
};

/// x[i] - x[0] for every i.
std::vector<double> preprocess(std::span<const double> seq);

BasicStats basic_stats(std::span<const double> seq);

/// Sum of squares.
double energy(std::span<const double> seq);

/// In-place iterative radix-2 FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& data);

/// Magnitudes of the DFT after zero-padding to the next power of two.
std::vector<double> dft_magnitude(std::span<const double> seq);

/// Covariance-based correlation coefficient. Unequal lengths are truncated
/// to the shorter one; a zero-variance input yields 0.
double correlation(std::span<const double> a, std::span<const double> b);

FeatureVector extract(const PinEntrySegment& segment);

std::vector<FeatureVector> extract_all(const Dataset& ds);

/// CSV with header label,user_id,f000..f113.
std::string to_csv(const std::vector<FeatureVector>& rows);
std::vector<FeatureVector> from_csv(std::string_view text);

}  // namespace pinlog::features
