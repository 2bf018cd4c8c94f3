#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pointbeam/error.hpp"
#include "pointbeam/fft.hpp"
#include "pointbeam/geometry.hpp"
#include "pointbeam/rng.hpp"
#include "pointbeam/signal.hpp"
#include "pointbeam/wav.hpp"

namespace pointbeam::sim {

constexpr double kDistanceFloor = 0.1; // meters; spherical spreading clamp

enum class SourceRole { Desired, Interferer, Reference };

inline const char* role_name(SourceRole r) {
    switch (r) {
        case SourceRole::Desired:    return "desired";
        case SourceRole::Interferer: return "interferer";
        case SourceRole::Reference:  return "reference";
    }
    return "?";
}

struct MicSpec {
    Vec3 true_position;
    Vec3 measured_position; // what the pipeline is allowed to see
    double clock_offset = 0.0;
    double gain = 1.0;
};

// Periodic beacon sweep.
struct ChirpWaveform {
    ChirpSpec spec;
};

// Mono WAV played from the source position. Must match the scenario rate.
struct FileWaveform {
    std::string path;
};

// Band-limited white noise, unit RMS before leveling. Stands in for
// wideband real-world sources (voice, machinery) in simulation.
struct BandNoiseWaveform {
    double f_lo = 100.0;
    double f_hi = 3400.0;
};

using Waveform = std::variant<ChirpWaveform, FileWaveform, BandNoiseWaveform>;

struct EchoTap {
    double extra_delay = 0.0;   // seconds on top of the direct path
    double relative_gain = 0.5; // relative to the direct path, in (0, 1]
};

struct SourceSpec {
    Vec3 position;
    SourceRole role = SourceRole::Desired;
    Waveform waveform = BandNoiseWaveform{};
    double level = 1.0;
    std::vector<EchoTap> echoes;
    // Optional per-mic multiplier on this source's DIRECT path: an obstacle
    // between source and mic attenuates the line of sight while echo taps
    // travel around it. Empty = all 1.
    std::vector<double> obstacle_gains;
};

struct Scenario {
    std::vector<MicSpec> mics;
    std::vector<SourceSpec> sources; // desired + interferers
    SourceSpec chirp_device;         // role Reference, Chirp waveform
    double c_true = 342.0;
    double c_assumed_min = 337.0;
    double c_assumed_max = 348.0;
    double pos_error_bound = 0.0; // e_d, meters
    double noise_rms = 0.0;
    double duration = 2.0;
    double rate = 44100.0;
    std::uint64_t rng_seed = 1;

    std::size_t mic_count() const { return mics.size(); }
};

// The error-bearing view the alignment pipeline works from.
struct AssumedGeometry {
    std::vector<Vec3> mic_positions; // measured
    Vec3 chirp_position;
    double c_min = 337.0;
    double c_max = 348.0;
    double pos_error_bound = 0.0;
    double rate = 44100.0;

    double c_nominal() const { return 0.5 * (c_min + c_max); }
};

inline AssumedGeometry assumed_view(const Scenario& scn) {
    AssumedGeometry g;
    g.mic_positions.reserve(scn.mics.size());
    for (const auto& m : scn.mics) g.mic_positions.push_back(m.measured_position);
    g.chirp_position = scn.chirp_device.position;
    g.c_min = scn.c_assumed_min;
    g.c_max = scn.c_assumed_max;
    g.pos_error_bound = scn.pos_error_bound;
    g.rate = scn.rate;
    return g;
}

struct SourceInfo {
    SourceRole role;
    Vec3 position;
    double level;
};

// Per-mic recordings plus everything needed to score the pipeline against
// the world that generated them. Stems keep each emitter's clean
// contribution separate so output SINR can be computed exactly.
struct RecordingSet {
    double rate = 44100.0;
    std::vector<SampleBuffer> mics;

    // emitters = sources in scenario order, then the chirp device last
    std::vector<SourceInfo> emitters;
    std::size_t chirp_index = 0;

    // [mic][emitter]: direct-path arrival delay on that mic's local clock
    // (propagation + clock offset) and effective direct amplitude.
    std::vector<std::vector<double>> true_delay;
    std::vector<std::vector<double>> true_alpha;

    std::vector<std::vector<SampleBuffer>> stems; // [mic][emitter], leveled, echoes included
    std::vector<SampleBuffer> noise;              // [mic]

    std::vector<std::string> warnings;

    std::size_t mic_count() const { return mics.size(); }
    std::size_t emitter_count() const { return emitters.size(); }

    // Relative delay of one emitter between two mics: arrival at `a` minus
    // arrival at `b`, i.e. where the pair's cross-correlation peak lands.
    double pair_delay(std::size_t a, std::size_t b, std::size_t emitter) const {
        return true_delay[a][emitter] - true_delay[b][emitter];
    }
};

// ---------------------------------------------------------------------------
// Validation

inline void validate_scenario(const Scenario& scn) {
    auto bad = [&](const std::string& what) { fail(Errc::validation_error, "scene_sim", what); };
    if (!(scn.rate > 0.0)) bad("rate must be positive");
    if (!(scn.duration > 0.0)) bad("duration must be positive");
    if (scn.noise_rms < 0.0) bad("noise_rms must be nonnegative");
    if (!(scn.c_assumed_min > 0.0) || scn.c_assumed_min > scn.c_assumed_max)
        bad("sound speed interval must satisfy 0 < c_assumed_min <= c_assumed_max");
    if (scn.c_true < scn.c_assumed_min || scn.c_true > scn.c_assumed_max)
        bad("c_true must lie within [c_assumed_min, c_assumed_max]");
    if (scn.pos_error_bound < 0.0) bad("pos_error_bound must be nonnegative");
    if (scn.mics.empty()) bad("scenario needs at least one mic");

    for (std::size_t i = 0; i < scn.mics.size(); ++i) {
        const auto& m = scn.mics[i];
        if (!(m.gain > 0.0)) bad("mics[" + std::to_string(i) + "].gain must be positive");
        if (!is_finite(m.true_position) || !is_finite(m.measured_position))
            bad("mics[" + std::to_string(i) + "] has non-finite position");
        if (distance(m.true_position, m.measured_position) > scn.pos_error_bound + 1e-9)
            bad("mics[" + std::to_string(i) + "] measured position violates pos_error_bound");
    }

    bool any_desired = false;
    auto check_source = [&](const SourceSpec& s, const std::string& label) {
        if (!is_finite(s.position)) bad(label + " has non-finite position");
        if (!(s.level >= 0.0)) bad(label + ".level must be nonnegative");
        for (std::size_t e = 0; e < s.echoes.size(); ++e) {
            if (!(s.echoes[e].extra_delay > 0.0)) bad(label + ".echoes[" + std::to_string(e) + "] extra_delay must be positive");
            if (!(s.echoes[e].relative_gain > 0.0) || s.echoes[e].relative_gain > 1.0)
                bad(label + ".echoes[" + std::to_string(e) + "] relative_gain must be in (0, 1]");
        }
        if (!s.obstacle_gains.empty() && s.obstacle_gains.size() != scn.mics.size())
            bad(label + ".obstacle_gains must have one entry per mic");
        for (double g : s.obstacle_gains)
            if (g < 0.0) bad(label + ".obstacle_gains entries must be nonnegative");
    };

    for (std::size_t i = 0; i < scn.sources.size(); ++i) {
        const auto& s = scn.sources[i];
        if (s.role == SourceRole::Reference)
            bad("sources[" + std::to_string(i) + "] must not have role reference (use chirp_device)");
        if (s.role == SourceRole::Desired) any_desired = true;
        check_source(s, "sources[" + std::to_string(i) + "]");
    }
    if (!any_desired) bad("scenario needs at least one desired source");

    check_source(scn.chirp_device, "chirp_device");
    const auto* cw = std::get_if<ChirpWaveform>(&scn.chirp_device.waveform);
    if (!cw) bad("chirp_device.waveform must be a chirp");
    const ChirpSpec& cs = cw->spec;
    if (!(cs.duration > 0.0) || !(cs.period > cs.duration))
        bad("chirp_device: need 0 < duration < period");
    if (!(cs.f_start > 0.0) || cs.f_end < cs.f_start || !(cs.f_end < scn.rate / 2.0))
        bad("chirp_device: band must satisfy 0 < f_start <= f_end < rate/2");
    if (cs.period + cs.duration >= scn.duration)
        bad("chirp_device: scenario duration too short for one beacon period");
}

// ---------------------------------------------------------------------------
// Waveform rendering (global emission timeline, [0, duration))

namespace detail {

inline SampleBuffer render_band_noise(const BandNoiseWaveform& bn, double rate, std::size_t length,
                                      std::uint64_t seed) {
    if (!(bn.f_lo >= 0.0) || !(bn.f_hi > bn.f_lo) || !(bn.f_hi < rate / 2.0))
        fail(Errc::validation_error, "scene_sim", "band_noise requires 0 <= f_lo < f_hi < rate/2");

    // white noise -> 255-tap Hann-windowed sinc bandpass, FFT-convolved
    constexpr int kTaps = 255;
    constexpr int kHalf = kTaps / 2;
    std::vector<double> h(kTaps);
    const double w_hi = 2.0 * bn.f_hi / rate;
    const double w_lo = 2.0 * bn.f_lo / rate;
    for (int k = 0; k < kTaps; ++k) {
        const int m = k - kHalf;
        double v;
        if (m == 0) {
            v = w_hi - w_lo;
        } else {
            const double pm = std::numbers::pi * static_cast<double>(m);
            v = (std::sin(pm * w_hi) - std::sin(pm * w_lo)) / pm;
        }
        const double win = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(m) / (kHalf + 1.0)));
        h[static_cast<std::size_t>(k)] = v * win;
    }

    rng::SplitMix64 g(seed);
    const std::size_t nfft = pointbeam::detail::next_pow2(length + kTaps);
    std::vector<std::complex<double>> fx(nfft), fh(nfft);
    for (std::size_t i = 0; i < length; ++i) fx[i] = g.gaussian();
    for (std::size_t i = 0; i < h.size(); ++i) fh[i] = h[i];
    pointbeam::detail::fft_inplace(fx, false);
    pointbeam::detail::fft_inplace(fh, false);
    for (std::size_t i = 0; i < nfft; ++i) fx[i] *= fh[i];
    pointbeam::detail::fft_inplace(fx, true);

    SampleBuffer out;
    out.rate = rate;
    out.samples.resize(length);
    for (std::size_t i = 0; i < length; ++i) out.samples[i] = fx[i + kHalf].real();
    const double r = out.rms();
    if (r > 0.0)
        for (auto& s : out.samples) s /= r;
    return out;
}

inline SampleBuffer render_chirp_train(const ChirpWaveform& cw, double rate, std::size_t length) {
    SampleBuffer one = synth_chirp(cw.spec, rate);
    SampleBuffer out;
    out.rate = rate;
    out.samples.assign(length, 0.0);
    // Emissions start one full period in so that even heavily skewed clocks
    // still capture the first beacon.
    for (std::size_t k = 1;; ++k) {
        const auto pos = static_cast<std::size_t>(std::llround(static_cast<double>(k) * cw.spec.period * rate));
        if (pos + one.size() >= length) break;
        for (std::size_t i = 0; i < one.size(); ++i) out.samples[pos + i] += one.samples[i];
    }
    return out;
}

inline SampleBuffer render_waveform(const SourceSpec& s, const Scenario& scn, std::size_t length,
                                    std::uint64_t emitter_index) {
    SampleBuffer out;
    if (const auto* cw = std::get_if<ChirpWaveform>(&s.waveform)) {
        out = render_chirp_train(*cw, scn.rate, length);
    } else if (const auto* bn = std::get_if<BandNoiseWaveform>(&s.waveform)) {
        out = render_band_noise(*bn, scn.rate, length, rng::derive_seed(scn.rng_seed, 1000 + emitter_index));
    } else {
        const auto& fw = std::get<FileWaveform>(s.waveform);
        SampleBuffer loaded = io::read_wav(fw.path);
        if (loaded.rate != scn.rate)
            fail(Errc::validation_error, "scene_sim",
                 "file waveform rate mismatch (no resampling): " + fw.path);
        loaded.samples.resize(length, 0.0); // truncate or zero-pad
        out = loaded;
        out.rate = scn.rate;
    }
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Simulation

// Renders every emitter into every mic: spherical 1/d attenuation (floored
// at kDistanceFloor), propagation plus per-mic clock offset as a fractional
// delay, explicit echo taps, optional obstacle attenuation, then white
// Gaussian noise seeded per (rng_seed, mic). Deterministic: the same
// scenario always produces the same RecordingSet bit for bit.
inline RecordingSet simulate(const Scenario& scn, bool keep_stems = true) {
    validate_scenario(scn);
    const auto length = static_cast<std::size_t>(std::llround(scn.duration * scn.rate));

    RecordingSet rec;
    rec.rate = scn.rate;
    const std::size_t n_mics = scn.mics.size();
    const std::size_t n_emit = scn.sources.size() + 1;
    rec.chirp_index = scn.sources.size();

    for (const auto& s : scn.sources) rec.emitters.push_back({s.role, s.position, s.level});
    rec.emitters.push_back({SourceRole::Reference, scn.chirp_device.position, scn.chirp_device.level});

    rec.true_delay.assign(n_mics, std::vector<double>(n_emit, 0.0));
    rec.true_alpha.assign(n_mics, std::vector<double>(n_emit, 0.0));
    rec.mics.resize(n_mics);
    rec.stems.assign(n_mics, {});
    for (auto& v : rec.stems) v.resize(n_emit);
    rec.noise.resize(n_mics);

    for (std::size_t mi = 0; mi < n_mics; ++mi) {
        rec.mics[mi].rate = scn.rate;
        rec.mics[mi].samples.assign(length, 0.0);
    }

    for (std::size_t si = 0; si < n_emit; ++si) {
        const SourceSpec& src = si < scn.sources.size() ? scn.sources[si] : scn.chirp_device;
        SampleBuffer wf = detail::render_waveform(src, scn, length, si);
        for (std::size_t mi = 0; mi < n_mics; ++mi) {
            const MicSpec& mic = scn.mics[mi];
            const double d = distance(src.position, mic.true_position);
            double d_eff = d;
            if (d_eff < kDistanceFloor) {
                d_eff = kDistanceFloor;
                rec.warnings.push_back("emitter " + std::to_string(si) + " within distance floor of mic " +
                                       std::to_string(mi) + "; attenuation clamped");
            }
            const double obstacle = src.obstacle_gains.empty() ? 1.0 : src.obstacle_gains[mi];
            const double amp = mic.gain * src.level * (1.0 / d_eff);
            const double base_delay = d / scn.c_true + mic.clock_offset;

            rec.true_delay[mi][si] = base_delay;
            rec.true_alpha[mi][si] = amp * obstacle;

            SampleBuffer stem;
            stem.rate = scn.rate;
            stem.samples.assign(length, 0.0);
            auto add_path = [&](double delay, double path_gain) {
                SampleBuffer shifted = delay_fractional(wf, delay);
                for (std::size_t i = 0; i < length; ++i) stem.samples[i] += path_gain * shifted.samples[i];
            };
            add_path(base_delay, amp * obstacle);
            for (const auto& echo : src.echoes) add_path(base_delay + echo.extra_delay, amp * echo.relative_gain);

            for (std::size_t i = 0; i < length; ++i) rec.mics[mi].samples[i] += stem.samples[i];
            if (keep_stems) rec.stems[mi][si] = std::move(stem);
        }
    }

    for (std::size_t mi = 0; mi < n_mics; ++mi) {
        SampleBuffer nz;
        nz.rate = scn.rate;
        nz.samples.assign(length, 0.0);
        if (scn.noise_rms > 0.0) {
            rng::SplitMix64 g(rng::derive_seed(scn.rng_seed, mi));
            for (auto& s : nz.samples) s = scn.noise_rms * g.gaussian();
            for (std::size_t i = 0; i < length; ++i) rec.mics[mi].samples[i] += nz.samples[i];
        }
        if (keep_stems) rec.noise[mi] = std::move(nz);
    }

    if (!keep_stems) {
        rec.stems.clear();
        rec.noise.clear();
    }
    return rec;
}

// noise_rms that puts the worst mic at `snr_db` for the first desired
// source (unit-RMS waveforms assumed, direct path only).
inline double noise_rms_for_min_snr(const Scenario& scn, double snr_db) {
    double min_amp = 0.0;
    bool found = false;
    for (const auto& s : scn.sources) {
        if (s.role != SourceRole::Desired) continue;
        for (std::size_t mi = 0; mi < scn.mics.size(); ++mi) {
            const double d = std::max(distance(s.position, scn.mics[mi].true_position), kDistanceFloor);
            const double obstacle = s.obstacle_gains.empty() ? 1.0 : s.obstacle_gains[mi];
            const double amp = scn.mics[mi].gain * s.level * obstacle / d;
            if (!found || amp < min_amp) min_amp = amp;
            found = true;
        }
        break;
    }
    if (!found)
        fail(Errc::validation_error, "scene_sim", "no desired source");
    return min_amp / std::pow(10.0, snr_db / 20.0);
}

// Subset view keeping the first n mics; used by the mic-count sweep.
inline RecordingSet take_mics(const RecordingSet& rec, std::size_t n) {
    if (n == 0 || n > rec.mic_count())
        fail(Errc::invalid_input, "scene_sim", "mic subset out of range");
    RecordingSet out;
    out.rate = rec.rate;
    out.emitters = rec.emitters;
    out.chirp_index = rec.chirp_index;
    out.mics.assign(rec.mics.begin(), rec.mics.begin() + static_cast<std::ptrdiff_t>(n));
    out.true_delay.assign(rec.true_delay.begin(), rec.true_delay.begin() + static_cast<std::ptrdiff_t>(n));
    out.true_alpha.assign(rec.true_alpha.begin(), rec.true_alpha.begin() + static_cast<std::ptrdiff_t>(n));
    if (!rec.stems.empty())
        out.stems.assign(rec.stems.begin(), rec.stems.begin() + static_cast<std::ptrdiff_t>(n));
    if (!rec.noise.empty())
        out.noise.assign(rec.noise.begin(), rec.noise.begin() + static_cast<std::ptrdiff_t>(n));
    out.warnings = rec.warnings;
    return out;
}

} // namespace pointbeam::sim
