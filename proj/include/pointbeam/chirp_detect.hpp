#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "pointbeam/error.hpp"
#include "pointbeam/scene.hpp"
#include "pointbeam/signal.hpp"

namespace pointbeam::detect {

// One accepted beacon arrival on one mic, timestamped on that mic's own
// clock with sub-sample resolution.
struct ChirpArrival {
    std::size_t mic_index = 0;
    double t_n = 0.0;          // seconds, local clock
    double score = 0.0;        // normalized matched-filter score
    double snr_estimate = 0.0; // dB, inferred from the score
};

// Acceptance rule: a peak counts only if it clears both an absolute score of
// 0.5 and 10x the recording's own noise-score floor (median |score|). The
// second clause is what makes short templates or far devices fail loudly
// instead of producing garbage timestamps.
struct DetectConfig {
    double abs_threshold = 0.5;
    double floor_multiplier = 10.0;
};

namespace detail {

inline double score_to_snr_db(double score) {
    const double s = std::clamp(score, 1e-6, 1.0 - 1e-12);
    return 10.0 * std::log10((s * s) / (1.0 - s * s));
}

// Zero-phase brick-wall band limit. Keeps the normalized score meaningful
// when strong sources live outside the beacon band (the usual deployment:
// beacon above the audio band of interest).
inline SampleBuffer band_limit(const SampleBuffer& x, double f_lo, double f_hi) {
    const std::size_t n = x.size();
    const std::size_t nfft = pointbeam::detail::next_pow2(n);
    std::vector<std::complex<double>> f(nfft);
    for (std::size_t i = 0; i < n; ++i) f[i] = x.samples[i];
    pointbeam::detail::fft_inplace(f, false);
    for (std::size_t k = 0; k < nfft; ++k) {
        const std::size_t sym = k <= nfft / 2 ? k : nfft - k;
        const double freq = x.rate * static_cast<double>(sym) / static_cast<double>(nfft);
        if (freq < f_lo || freq > f_hi) f[k] = 0.0;
    }
    pointbeam::detail::fft_inplace(f, true);
    SampleBuffer out;
    out.rate = x.rate;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = f[i].real();
    return out;
}

} // namespace detail

// Matched-filter beacon detection on one buffer. The recording is first
// band-limited to the beacon's sweep band, then slid against the synthesized
// template. Returns arrivals in time order, separated by at least half the
// beacon period; empty when nothing clears the threshold (chirp-missing;
// callers exclude the mic).
inline std::vector<ChirpArrival> detect_chirps_single(const SampleBuffer& x, const ChirpSpec& spec,
                                                      std::size_t mic_index, const DetectConfig& cfg = {}) {
    const SampleBuffer tmpl = synth_chirp(spec, x.rate);
    if (tmpl.size() >= x.size()) return {};
    const SampleBuffer filtered =
        detail::band_limit(x, 0.95 * spec.f_start, std::min(1.05 * spec.f_end, 0.499 * x.rate));
    const std::vector<IndexScore> scores = matched_filter(filtered, tmpl);

    std::vector<double> mags(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) mags[i] = std::abs(scores[i].score);
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2), mags.end());
    const double floor = mags[mags.size() / 2];
    const double threshold = std::max(cfg.abs_threshold, cfg.floor_multiplier * floor);

    struct Cand {
        std::size_t idx;
        double score;
    };
    std::vector<Cand> cands;
    for (std::size_t i = 1; i + 1 < scores.size(); ++i) {
        const double s = scores[i].score;
        if (s >= threshold && s > scores[i - 1].score && s >= scores[i + 1].score)
            cands.push_back({i, s});
    }
    if (cands.empty()) return {};

    // Greedy suppression: strongest first, drop anything closer than half a
    // period to an accepted arrival.
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        return a.score > b.score || (a.score == b.score && a.idx < b.idx);
    });
    const double min_sep = 0.5 * spec.period * x.rate;
    std::vector<Cand> kept;
    for (const Cand& c : cands) {
        bool clash = false;
        for (const Cand& k : kept)
            if (std::abs(static_cast<double>(c.idx) - static_cast<double>(k.idx)) < min_sep) {
                clash = true;
                break;
            }
        if (!clash) kept.push_back(c);
    }
    std::sort(kept.begin(), kept.end(), [](const Cand& a, const Cand& b) { return a.idx < b.idx; });

    std::vector<ChirpArrival> out;
    out.reserve(kept.size());
    for (const Cand& c : kept) {
        const double off = parabolic_offset(scores[c.idx - 1].score, scores[c.idx].score, scores[c.idx + 1].score);
        ChirpArrival a;
        a.mic_index = mic_index;
        a.t_n = (static_cast<double>(c.idx) + off) / x.rate;
        a.score = c.score;
        a.snr_estimate = detail::score_to_snr_db(c.score);
        out.push_back(a);
    }
    return out;
}

// Per-mic beacon arrivals for a whole recording set.
inline std::vector<std::vector<ChirpArrival>> detect_chirps(const sim::RecordingSet& rec, const ChirpSpec& spec,
                                                            const DetectConfig& cfg = {}) {
    std::vector<std::vector<ChirpArrival>> out(rec.mic_count());
    for (std::size_t mi = 0; mi < rec.mic_count(); ++mi)
        out[mi] = detect_chirps_single(rec.mics[mi], spec, mi, cfg);
    return out;
}

// Mean absolute deviation, in samples, of consecutive arrival gaps from the
// nominal beacon period.
inline double detection_mae(const std::vector<ChirpArrival>& arrivals, double period, double rate) {
    if (arrivals.size() < 2)
        fail(Errc::insufficient_data, "chirp_detect", "need at least two arrivals to measure gaps");
    const double nominal = period * rate;
    double acc = 0.0;
    for (std::size_t i = 1; i < arrivals.size(); ++i) {
        const double gap = (arrivals[i].t_n - arrivals[i - 1].t_n) * rate;
        acc += std::abs(gap - nominal);
    }
    return acc / static_cast<double>(arrivals.size() - 1);
}

// Picks one arrival per mic, all from the same beacon emission: the earliest
// mutually consistent set (pairwise span under one period). Mics with no
// arrivals come back empty; unpaired stragglers are advanced to their next
// arrival until the set agrees.
inline std::vector<std::optional<double>> pick_common_emission(const std::vector<std::vector<ChirpArrival>>& arrivals,
                                                               double period) {
    const std::size_t n = arrivals.size();
    std::vector<std::size_t> cursor(n, 0);
    std::vector<std::optional<double>> out(n);

    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < n; ++i)
        if (!arrivals[i].empty()) active.push_back(i);
    if (active.empty()) return out;

    for (int iter = 0; iter < 1000; ++iter) {
        double lo = 1e300, hi = -1e300;
        std::size_t lo_mic = active.front();
        for (std::size_t i : active) {
            const double t = arrivals[i][cursor[i]].t_n;
            if (t < lo) {
                lo = t;
                lo_mic = i;
            }
            hi = std::max(hi, t);
        }
        if (hi - lo < period) {
            for (std::size_t i : active) out[i] = arrivals[i][cursor[i]].t_n;
            return out;
        }
        if (cursor[lo_mic] + 1 >= arrivals[lo_mic].size())
            fail(Errc::consistency_failure, "chirp_detect",
                 "could not pair beacon arrivals to a common emission (mic " + std::to_string(lo_mic) + ")");
        ++cursor[lo_mic];
    }
    fail(Errc::consistency_failure, "chirp_detect", "beacon pairing did not converge");
}

} // namespace pointbeam::detect
