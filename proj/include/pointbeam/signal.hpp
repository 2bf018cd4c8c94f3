#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "pointbeam/error.hpp"
#include "pointbeam/fft.hpp"

namespace pointbeam {

// Uniformly sampled real signal. Sample i sits at local time i / rate on the
// recorder's own clock; there is no shared epoch across buffers.
struct SampleBuffer {
    std::vector<double> samples;
    double rate = 44100.0;

    std::size_t size() const { return samples.size(); }
    double duration() const { return static_cast<double>(samples.size()) / rate; }

    double rms() const {
        if (samples.empty()) return 0.0;
        double acc = 0.0;
        for (double s : samples) acc += s * s;
        return std::sqrt(acc / static_cast<double>(samples.size()));
    }
};

// Linear frequency sweep description. `period` is the broadcast repetition
// interval when the chirp is used as a beacon; synthesis itself only needs
// the sweep parameters.
struct ChirpSpec {
    double f_start = 2000.0;
    double f_end = 20000.0;
    double duration = 0.01;
    double period = 1.0;
    double amplitude = 1.0;
};

struct LagValue {
    double lag;   // samples; positive means the first signal's copy arrives later
    double value;
};

struct IndexScore {
    std::size_t index;
    double score; // normalized correlation in [-1, 1]
};

enum class CorrMethod { Auto, Direct, Fft };

// ---------------------------------------------------------------------------
// Chirp synthesis

// One linear sweep from f_start to f_end over `duration`, Tukey-tapered 5%
// at each edge to keep spectral leakage outside the sweep band small.
// f_start == f_end degenerates to a plain tone.
inline SampleBuffer synth_chirp(const ChirpSpec& spec, double rate) {
    if (!(rate > 0.0))
        fail(Errc::invalid_spec, "signal_core", "sample rate must be positive");
    if (!(spec.duration > 0.0))
        fail(Errc::invalid_spec, "signal_core", "chirp duration must be positive");
    if (!(spec.f_start > 0.0) || spec.f_end < spec.f_start)
        fail(Errc::invalid_spec, "signal_core", "chirp band must satisfy 0 < f_start <= f_end");
    if (!(spec.f_end < rate / 2.0))
        fail(Errc::invalid_spec, "signal_core", "chirp f_end violates Nyquist at this rate");

    const std::size_t n = static_cast<std::size_t>(std::llround(spec.duration * rate));
    SampleBuffer out;
    out.rate = rate;
    out.samples.resize(n);
    const double k = (spec.f_end - spec.f_start) / spec.duration; // Hz per second
    const std::size_t ramp = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n))));
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        const double phase = 2.0 * std::numbers::pi * (spec.f_start * t + 0.5 * k * t * t);
        double w = 1.0;
        if (i < ramp)
            w = 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(ramp)));
        else if (i + ramp >= n)
            w = 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(n - 1 - i) / static_cast<double>(ramp)));
        out.samples[i] = spec.amplitude * w * std::sin(phase);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fractional delay

namespace detail {

constexpr int kSincHalfTaps = 32; // 64-tap windowed-sinc kernel

inline double windowed_sinc(double t) {
    // Hann-windowed sinc over |t| < kSincHalfTaps.
    const double a = static_cast<double>(kSincHalfTaps);
    if (t <= -a || t >= a) return 0.0;
    double s;
    if (std::abs(t) < 1e-12) {
        s = 1.0;
    } else {
        const double pt = std::numbers::pi * t;
        s = std::sin(pt) / pt;
    }
    const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * t / a));
    return s * w;
}

} // namespace detail

// Shift a signal later by `delay` seconds (negative shifts earlier).
// Integer-sample delays reduce to exact index moves; fractional delays use
// band-limited windowed-sinc interpolation. Vacated samples are zero and the
// length is preserved.
inline SampleBuffer delay_fractional(const SampleBuffer& x, double delay) {
    const double shift = delay * x.rate; // samples
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    if (std::abs(shift) >= static_cast<double>(n))
        fail(Errc::out_of_range, "signal_core", "delay exceeds buffer length");

    SampleBuffer out;
    out.rate = x.rate;
    out.samples.assign(x.size(), 0.0);

    const double rounded = std::round(shift);
    if (std::abs(shift - rounded) < 1e-9) {
        const auto k = static_cast<std::ptrdiff_t>(rounded);
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const std::ptrdiff_t j = i - k;
            if (j >= 0 && j < n) out.samples[static_cast<std::size_t>(i)] = x.samples[static_cast<std::size_t>(j)];
        }
        return out;
    }

    const double base = std::floor(shift);
    const double frac = shift - base; // in (0, 1)
    const auto k0 = static_cast<std::ptrdiff_t>(base);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        // y(i) = sum_m x(m) sinc(i - shift - m) over the kernel support
        double acc = 0.0;
        const std::ptrdiff_t center = i - k0; // x index where kernel argument is -frac
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, center - detail::kSincHalfTaps);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, center + detail::kSincHalfTaps);
        for (std::ptrdiff_t m = lo; m <= hi; ++m) {
            const double t = static_cast<double>(center - m) - frac;
            acc += x.samples[static_cast<std::size_t>(m)] * detail::windowed_sinc(t);
        }
        out.samples[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cross-correlation

namespace detail {

inline std::size_t overlap_count(std::size_t la, std::size_t lb, std::ptrdiff_t p) {
    // number of t with 0 <= t < lb and 0 <= t + p < la
    const auto a = static_cast<std::ptrdiff_t>(la);
    const auto b = static_cast<std::ptrdiff_t>(lb);
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -p);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(b, a - p);
    return hi > lo ? static_cast<std::size_t>(hi - lo) : 0;
}

inline std::vector<LagValue> xcorr_direct(const SampleBuffer& a, const SampleBuffer& b, std::size_t max_lag) {
    const auto la = static_cast<std::ptrdiff_t>(a.size());
    const auto lb = static_cast<std::ptrdiff_t>(b.size());
    std::vector<LagValue> out;
    out.reserve(2 * max_lag + 1);
    for (std::ptrdiff_t p = -static_cast<std::ptrdiff_t>(max_lag); p <= static_cast<std::ptrdiff_t>(max_lag); ++p) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -p);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(lb, la - p);
        double acc = 0.0;
        for (std::ptrdiff_t t = lo; t < hi; ++t)
            acc += a.samples[static_cast<std::size_t>(t + p)] * b.samples[static_cast<std::size_t>(t)];
        const std::size_t cnt = hi > lo ? static_cast<std::size_t>(hi - lo) : 0;
        out.push_back({static_cast<double>(p), cnt ? acc / static_cast<double>(cnt) : 0.0});
    }
    return out;
}

inline std::vector<LagValue> xcorr_fft(const SampleBuffer& a, const SampleBuffer& b, std::size_t max_lag) {
    const std::size_t la = a.size();
    const std::size_t lb = b.size();
    const std::size_t nfft = next_pow2(la + lb);
    std::vector<std::complex<double>> fa(nfft), fb(nfft);
    for (std::size_t i = 0; i < la; ++i) fa[i] = a.samples[i];
    for (std::size_t i = 0; i < lb; ++i) fb[i] = b.samples[i];
    fft_inplace(fa, false);
    fft_inplace(fb, false);
    for (std::size_t i = 0; i < nfft; ++i) fa[i] *= std::conj(fb[i]);
    fft_inplace(fa, true);
    std::vector<LagValue> out;
    out.reserve(2 * max_lag + 1);
    for (std::ptrdiff_t p = -static_cast<std::ptrdiff_t>(max_lag); p <= static_cast<std::ptrdiff_t>(max_lag); ++p) {
        const std::size_t idx = p >= 0 ? static_cast<std::size_t>(p) : nfft - static_cast<std::size_t>(-p);
        const std::size_t cnt = overlap_count(la, lb, p);
        out.push_back({static_cast<double>(p), cnt ? fa[idx].real() / static_cast<double>(cnt) : 0.0});
    }
    return out;
}

} // namespace detail

// Biased-window estimate of E[a(t+p) b(t)] for p in [-max_lag, +max_lag],
// each lag normalized by its overlap length. Direct and FFT paths agree to
// better than 1e-9 relative; Auto picks by operation count. The Direct path
// sums in ascending t, which makes xcorr(a,b)(p) and xcorr(b,a)(-p)
// bit-identical.
inline std::vector<LagValue> xcorr(const SampleBuffer& a, const SampleBuffer& b, std::size_t max_lag,
                                   CorrMethod method = CorrMethod::Auto) {
    if (a.rate != b.rate)
        fail(Errc::incompatible_buffers, "signal_core", "cross-correlation requires equal sample rates");
    if (a.samples.empty() || b.samples.empty())
        fail(Errc::invalid_input, "signal_core", "cross-correlation of empty buffer");
    if (max_lag >= std::min(a.size(), b.size()))
        fail(Errc::invalid_input, "signal_core", "max_lag must be smaller than both buffers");

    if (method == CorrMethod::Auto) {
        const double direct_cost = static_cast<double>(2 * max_lag + 1) * static_cast<double>(std::min(a.size(), b.size()));
        const std::size_t nfft = detail::next_pow2(a.size() + b.size());
        const double fft_cost = 3.0 * static_cast<double>(nfft) * std::log2(static_cast<double>(nfft));
        method = direct_cost > 8.0 * fft_cost ? CorrMethod::Fft : CorrMethod::Direct;
    }
    return method == CorrMethod::Fft ? detail::xcorr_fft(a, b, max_lag) : detail::xcorr_direct(a, b, max_lag);
}

// ---------------------------------------------------------------------------
// Matched filter

// Normalized sliding correlation of `tmpl` against x[i .. i + len(tmpl)).
// Scores live in [-1, 1]; silent windows score 0.
inline std::vector<IndexScore> matched_filter(const SampleBuffer& x, const SampleBuffer& tmpl,
                                              CorrMethod method = CorrMethod::Auto) {
    if (x.rate != tmpl.rate)
        fail(Errc::incompatible_buffers, "signal_core", "matched filter requires equal sample rates");
    if (tmpl.samples.empty() || tmpl.size() > x.size())
        fail(Errc::invalid_input, "signal_core", "template must be nonempty and no longer than the signal");

    const std::size_t lx = x.size();
    const std::size_t lt = tmpl.size();
    const std::size_t npos = lx - lt + 1;

    double tmpl_energy = 0.0;
    for (double v : tmpl.samples) tmpl_energy += v * v;
    if (tmpl_energy <= 0.0)
        fail(Errc::invalid_input, "signal_core", "template has zero energy");
    const double tmpl_norm = std::sqrt(tmpl_energy);

    // Numerator: plain correlation, FFT-accelerated when large.
    std::vector<double> num(npos, 0.0);
    bool use_fft = method == CorrMethod::Fft;
    if (method == CorrMethod::Auto) {
        const double direct_cost = static_cast<double>(npos) * static_cast<double>(lt);
        const std::size_t nfft = detail::next_pow2(lx + lt);
        use_fft = direct_cost > 8.0 * 3.0 * static_cast<double>(nfft) * std::log2(static_cast<double>(nfft));
    }
    if (use_fft) {
        const std::size_t nfft = detail::next_pow2(lx + lt);
        std::vector<std::complex<double>> fx(nfft), ft(nfft);
        for (std::size_t i = 0; i < lx; ++i) fx[i] = x.samples[i];
        for (std::size_t i = 0; i < lt; ++i) ft[i] = tmpl.samples[i];
        detail::fft_inplace(fx, false);
        detail::fft_inplace(ft, false);
        for (std::size_t i = 0; i < nfft; ++i) fx[i] *= std::conj(ft[i]);
        detail::fft_inplace(fx, true);
        for (std::size_t i = 0; i < npos; ++i) num[i] = fx[i].real();
    } else {
        for (std::size_t i = 0; i < npos; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < lt; ++j) acc += x.samples[i + j] * tmpl.samples[j];
            num[i] = acc;
        }
    }

    // Sliding window energy via prefix sums.
    std::vector<double> prefix(lx + 1, 0.0);
    for (std::size_t i = 0; i < lx; ++i) prefix[i + 1] = prefix[i] + x.samples[i] * x.samples[i];

    std::vector<IndexScore> out(npos);
    for (std::size_t i = 0; i < npos; ++i) {
        const double win_energy = prefix[i + lt] - prefix[i];
        double score = 0.0;
        if (win_energy > 0.0) {
            score = num[i] / (tmpl_norm * std::sqrt(win_energy));
            score = std::clamp(score, -1.0, 1.0);
        }
        out[i] = {i, score};
    }
    return out;
}

// ---------------------------------------------------------------------------
// Peak refinement

// Sub-sample vertex of the parabola through three equally spaced points.
// Returns the offset from the center point, clamped to [-0.5, 0.5].
inline double parabolic_offset(double y0, double y1, double y2) {
    const double denom = y0 - 2.0 * y1 + y2;
    if (std::abs(denom) < 1e-30) return 0.0;
    return std::clamp(0.5 * (y0 - y2) / denom, -0.5, 0.5);
}

inline double parabolic_value(double y0, double y1, double y2) {
    const double d = parabolic_offset(y0, y1, y2);
    return y1 - 0.25 * (y0 - y2) * d;
}

} // namespace pointbeam
