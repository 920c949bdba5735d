// Independent reference computations used only by the tests. Each one is
// written in the most direct form possible and shares no code with src/.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace oracle {

// O(N^2) DFT magnitudes of x zero-padded to n bins, accumulated in extended
// precision from a table of the n roots of unity.
inline std::vector<double> naive_dft_magnitude(const std::vector<double>& x, std::size_t n) {
    std::vector<long double> c(n), s(n);
    for (std::size_t m = 0; m < n; ++m) {
        const long double ang = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>(m) / n;
        c[m] = std::cos(ang);
        s[m] = std::sin(ang);
    }
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        long double re = 0, im = 0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const std::size_t m = k * j % n;
            re += x[j] * c[m];
            im += x[j] * s[m];
        }
        out[k] = static_cast<double>(std::sqrt(re * re + im * im));
    }
    return out;
}

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p *= 2;
    return p;
}

// Pearson correlation from the textbook covariance formula, with the
// zero-variance rule and truncation to the shorter input.
inline double covariance_correlation(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = std::min(a.size(), b.size());
    a.resize(n);
    b.resize(n);
    long double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    long double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if (va == 0 || vb == 0) return 0.0;
    return static_cast<double>(cov / std::sqrt(va * vb));
}

// Average ranks by counting: rank = 1 + #smaller + (#equal - 1) / 2.
inline std::vector<double> brute_ranks(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double less = 0, equal = 0;
        for (double w : v) {
            if (w < v[i]) less += 1;
            if (w == v[i]) equal += 1;
        }
        r[i] = 1.0 + less + (equal - 1.0) / 2.0;
    }
    return r;
}

inline double brute_spearman(const std::vector<double>& a, const std::vector<double>& b) {
    return covariance_correlation(brute_ranks(a), brute_ranks(b));
}

// Straight-line 114-feature reference. channels[c] is the raw sequence of
// canonical channel c (acc.xyz, accG.xyz, rotR.abg, ori.abg).
inline std::array<double, 114> reference_features(const std::array<std::vector<double>, 12>& channels) {
    std::array<double, 114> f{};
    std::array<std::vector<double>, 12> pre;
    for (int c = 0; c < 12; ++c) {
        const auto& x = channels[c];
        for (double v : x) pre[c].push_back(v - x[0]);

        double mx = pre[c][0], mn = pre[c][0], sum = 0, e = 0;
        for (double v : pre[c]) {
            mx = std::max(mx, v);
            mn = std::min(mn, v);
            sum += v;
            e += v * v;
        }
        f[3 * c] = mx;
        f[3 * c + 1] = mn;
        f[3 * c + 2] = sum / pre[c].size();
        f[72 + c] = e;

        const auto mag = naive_dft_magnitude(pre[c], next_pow2(pre[c].size()));
        double fmx = mag[0], fmn = mag[0], fsum = 0, fe = 0;
        for (double v : mag) {
            fmx = std::max(fmx, v);
            fmn = std::min(fmn, v);
            fsum += v;
            fe += v * v;
        }
        f[36 + 3 * c] = fmx;
        f[36 + 3 * c + 1] = fmn;
        f[36 + 3 * c + 2] = fsum / mag.size();
        f[84 + c] = fe;
    }
    // sensor base channels: acc 0, accG 3, rotR 6, ori 9
    const int pairs[6][2] = {{9, 0}, {9, 3}, {9, 6}, {0, 3}, {0, 6}, {3, 6}};
    for (int p = 0; p < 6; ++p)
        for (int axis = 0; axis < 3; ++axis)
            f[96 + 3 * p + axis] = covariance_correlation(pre[pairs[p][0] + axis], pre[pairs[p][1] + axis]);
    return f;
}

// Loss of a tanh/softmax MLP written with plain loops in extended precision,
// so central differences on it sit well below the double round-off floor.
// Parameter layout: W1 row-major (h x d), b1, W2 row-major (k x h), b2.
inline long double mlp_loss(const std::vector<long double>& theta, std::size_t d, std::size_t h, std::size_t k,
                            const std::vector<std::vector<double>>& xs, const std::vector<int>& ys) {
    const long double* w1 = theta.data();
    const long double* b1 = w1 + h * d;
    const long double* w2 = b1 + h;
    const long double* b2 = w2 + k * h;
    long double total = 0;
    for (std::size_t s = 0; s < xs.size(); ++s) {
        std::vector<long double> hid(h), z(k);
        for (std::size_t i = 0; i < h; ++i) {
            long double a = b1[i];
            for (std::size_t j = 0; j < d; ++j) a += w1[i * d + j] * xs[s][j];
            hid[i] = std::tanh(a);
        }
        long double zmax = -1e300L;
        for (std::size_t i = 0; i < k; ++i) {
            long double a = b2[i];
            for (std::size_t j = 0; j < h; ++j) a += w2[i * h + j] * hid[j];
            z[i] = a;
            zmax = std::max(zmax, a);
        }
        long double denom = 0;
        for (long double v : z) denom += std::exp(v - zmax);
        total += -(z[static_cast<std::size_t>(ys[s])] - zmax - std::log(denom));
    }
    return total / static_cast<long double>(xs.size());
}

// Central-difference gradient of mlp_loss with step h.
inline std::vector<double> fd_gradient(std::vector<long double> theta, std::size_t d, std::size_t hidden,
                                       std::size_t k, const std::vector<std::vector<double>>& xs,
                                       const std::vector<int>& ys, long double h = 1e-5L) {
    std::vector<double> g(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const long double keep = theta[i];
        theta[i] = keep + h;
        const long double up = mlp_loss(theta, d, hidden, k, xs, ys);
        theta[i] = keep - h;
        const long double down = mlp_loss(theta, d, hidden, k, xs, ys);
        theta[i] = keep;
        g[i] = static_cast<double>((up - down) / (2 * h));
    }
    return g;
}

}  // namespace oracle
