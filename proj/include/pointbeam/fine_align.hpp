#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pointbeam/coarse_align.hpp"
#include "pointbeam/error.hpp"
#include "pointbeam/fft.hpp"
#include "pointbeam/scene.hpp"
#include "pointbeam/signal.hpp"

namespace pointbeam::fine {

using PairId = std::pair<std::size_t, std::size_t>; // always (smaller, larger)

struct Peak {
    double lag = 0.0;   // samples, sub-sample refined; arrival at mic_a minus arrival at mic_b
    double value = 0.0; // raw CCF value at the peak
};

// Cross-correlation peaks of one mic pair, plus the subset that survives the
// coarse window filter.
struct PeakSet {
    std::size_t mic_a = 0;
    std::size_t mic_b = 0;
    coarse::PairWindow window;
    std::vector<Peak> peaks;     // descending value
    std::vector<Peak> in_window; // descending value
};

struct FineConfig {
    double peak_rel_threshold = 0.2; // fraction of the global CCF maximum
    double noise_floor_mult = 5.0;   // multiple of median |CCF|
    double closure_tol_samples = 2.0;
    std::size_t max_peaks = 64;
};

enum class AssignStatus { Resolved, GroupedOnly };

struct ResolvedLag {
    double lag = 0.0;   // samples
    double value = 0.0; // CCF value of the chosen peak
};

using LagMap = std::map<PairId, ResolvedLag>;

struct DelayAssignment {
    AssignStatus status = AssignStatus::Resolved;
    LagMap resolved;
    std::vector<PairId> excluded;   // empty window: unusable for beamforming
    std::vector<PairId> unresolved; // had candidates but never got an assignment
    std::vector<LagMap> groups;     // GroupedOnly: one hypothesis per source
    std::vector<std::string> notes;
};

// Smallest max_lag that keeps every window (plus slack for peak widths)
// inside the correlated range.
inline std::size_t default_max_lag(const std::vector<coarse::PairWindow>& windows, double rate) {
    double worst = 0.0;
    for (const auto& w : windows) worst = std::max(worst, std::abs(w.tau_hat) + w.e_delta);
    return static_cast<std::size_t>(std::ceil(worst * rate)) + 16;
}

namespace detail {

inline std::vector<Peak> extract_peaks(const std::vector<double>& ccf, std::size_t max_lag, const FineConfig& cfg) {
    double gmax = 0.0;
    for (double v : ccf) gmax = std::max(gmax, v);
    if (!(gmax > 0.0)) return {};

    std::vector<double> mags(ccf.size());
    for (std::size_t i = 0; i < ccf.size(); ++i) mags[i] = std::abs(ccf[i]);
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2), mags.end());
    const double floor = mags[mags.size() / 2];
    const double threshold = std::max(cfg.peak_rel_threshold * gmax, cfg.noise_floor_mult * floor);

    std::vector<Peak> peaks;
    for (std::size_t i = 1; i + 1 < ccf.size(); ++i) {
        if (ccf[i] < threshold || ccf[i] <= ccf[i - 1] || ccf[i] < ccf[i + 1]) continue;
        const double off = parabolic_offset(ccf[i - 1], ccf[i], ccf[i + 1]);
        const double val = parabolic_value(ccf[i - 1], ccf[i], ccf[i + 1]);
        peaks.push_back({static_cast<double>(i) - static_cast<double>(max_lag) + off, val});
    }
    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
        return a.value > b.value || (a.value == b.value && a.lag < b.lag);
    });
    if (peaks.size() > cfg.max_peaks) peaks.resize(cfg.max_peaks);
    return peaks;
}

} // namespace detail

// Cross-correlates every windowed mic pair and filters peaks through the
// coarse windows. Forward transforms are shared across pairs, which keeps
// the 66-pair case affordable; values match xcorr() to ~1e-12 relative.
inline std::vector<PeakSet> correlate_pairs(const sim::RecordingSet& rec,
                                            const std::vector<coarse::PairWindow>& windows, std::size_t max_lag,
                                            const FineConfig& cfg = {}) {
    if (windows.empty()) return {};
    const std::size_t length = rec.mics.empty() ? 0 : rec.mics.front().size();
    for (const auto& m : rec.mics)
        if (m.size() != length)
            fail(Errc::incompatible_buffers, "fine_align", "recordings must share one length");
    if (max_lag >= length)
        fail(Errc::invalid_input, "fine_align", "max_lag must be smaller than the recordings");
    for (const auto& w : windows)
        if (static_cast<double>(max_lag) / rec.rate < std::abs(w.tau_hat) + w.e_delta)
            fail(Errc::invalid_input, "fine_align", "max_lag does not cover every delay window");

    const std::size_t nfft = pointbeam::detail::next_pow2(2 * length);
    std::vector<std::vector<std::complex<double>>> spectra(rec.mic_count());
    std::vector<bool> have(rec.mic_count(), false);
    auto spectrum_of = [&](std::size_t mi) -> const std::vector<std::complex<double>>& {
        if (!have[mi]) {
            auto& f = spectra[mi];
            f.assign(nfft, {});
            for (std::size_t i = 0; i < length; ++i) f[i] = rec.mics[mi].samples[i];
            pointbeam::detail::fft_inplace(f, false);
            have[mi] = true;
        }
        return spectra[mi];
    };

    std::vector<PeakSet> out;
    out.reserve(windows.size());
    for (const auto& w : windows) {
        const auto& fa = spectrum_of(w.mic_a);
        const auto& fb = spectrum_of(w.mic_b);
        std::vector<std::complex<double>> prod(nfft);
        for (std::size_t i = 0; i < nfft; ++i) prod[i] = fa[i] * std::conj(fb[i]);
        pointbeam::detail::fft_inplace(prod, true);

        std::vector<double> ccf(2 * max_lag + 1);
        for (std::size_t k = 0; k < ccf.size(); ++k) {
            const auto p = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(max_lag);
            const std::size_t idx = p >= 0 ? static_cast<std::size_t>(p) : nfft - static_cast<std::size_t>(-p);
            const std::size_t cnt = length - static_cast<std::size_t>(p >= 0 ? p : -p);
            ccf[k] = prod[idx].real() / static_cast<double>(cnt);
        }

        PeakSet ps;
        ps.mic_a = w.mic_a;
        ps.mic_b = w.mic_b;
        ps.window = w;
        ps.peaks = detail::extract_peaks(ccf, max_lag, cfg);
        for (const Peak& p : ps.peaks)
            if (w.contains(p.lag / rec.rate)) ps.in_window.push_back(p);
        out.push_back(std::move(ps));
    }
    return out;
}

// SR = c_nominal * max e_delta: below this source separation, two sources
// can share every window and disambiguation may fail.
inline double spatial_resolution(const std::vector<coarse::PairWindow>& windows) {
    if (windows.empty())
        fail(Errc::invalid_input, "fine_align", "no windows");
    double sr = 0.0;
    for (const auto& w : windows) sr = std::max(sr, w.sr_m);
    return sr;
}

// lag(a,b) from a canonical map, using antisymmetry for reversed lookups.
inline bool lookup_lag(const LagMap& m, std::size_t a, std::size_t b, double& lag_out) {
    if (a < b) {
        auto it = m.find({a, b});
        if (it == m.end()) return false;
        lag_out = it->second.lag;
        return true;
    }
    auto it = m.find({b, a});
    if (it == m.end()) return false;
    lag_out = -it->second.lag;
    return true;
}

namespace detail {

struct PropagationResult {
    LagMap assigned;
    std::vector<std::string> notes;
};

// Synchronous fixpoint with two rules per sweep:
//  1. both legs of a triangle fixed -> predict the third pair (mean over all
//     shared mics) and take the nearest in-window peak within tolerance;
//  2. one leg fixed, the other two ambiguous -> joint search over candidate
//     combinations, accepted only when exactly one combination closes the
//     triangle (the anchored-pair completion of a three-mic cluster).
// Sweep-synchronous updates make the outcome independent of pair order.
inline PropagationResult propagate(const std::map<PairId, const PeakSet*>& by_pair, LagMap seed,
                                   const std::vector<std::size_t>& mics, const FineConfig& cfg) {
    PropagationResult res;
    res.assigned = std::move(seed);

    auto in_window_of = [&](std::size_t a, std::size_t b) -> const std::vector<Peak>* {
        auto it = by_pair.find({std::min(a, b), std::max(a, b)});
        return it == by_pair.end() ? nullptr : &it->second->in_window;
    };

    bool changed = true;
    while (changed) {
        changed = false;

        LagMap staged;
        for (const auto& [pair, ps] : by_pair) {
            if (res.assigned.count(pair) || ps->in_window.empty()) continue;
            double sum = 0.0;
            int n_pred = 0;
            for (std::size_t k : mics) {
                if (k == pair.first || k == pair.second) continue;
                double lag_ak, lag_bk;
                if (fine::lookup_lag(res.assigned, pair.first, k, lag_ak) &&
                    fine::lookup_lag(res.assigned, pair.second, k, lag_bk)) {
                    sum += lag_ak - lag_bk;
                    ++n_pred;
                }
            }
            if (!n_pred) continue;
            const double pred = sum / n_pred;

            const Peak* best = nullptr;
            double best_dist = 0.0;
            bool tie = false;
            for (const Peak& p : ps->in_window) {
                const double d = std::abs(p.lag - pred);
                if (!best || d < best_dist - 1e-12) {
                    best = &p;
                    best_dist = d;
                    tie = false;
                } else if (std::abs(d - best_dist) <= 1e-12) {
                    tie = true;
                    if (p.value > best->value) best = &p;
                }
            }
            if (best && best_dist <= cfg.closure_tol_samples) {
                staged[pair] = {best->lag, best->value};
                if (tie)
                    res.notes.push_back("tie at pair (" + std::to_string(pair.first) + "," +
                                        std::to_string(pair.second) + "); kept higher peak");
            }
        }
        if (!staged.empty()) {
            changed = true;
            for (auto& [k, v] : staged) res.assigned[k] = v;
            continue; // keep exhausting the cheap rule before joint searches
        }

        // rule 2: complete triangles around a single fixed leg
        std::map<PairId, ResolvedLag> joint;
        std::vector<PairId> conflicted;
        for (const auto& [fixed_pair, rl] : res.assigned) {
            for (std::size_t k : mics) {
                if (k == fixed_pair.first || k == fixed_pair.second) continue;
                const PairId pa{std::min(fixed_pair.first, k), std::max(fixed_pair.first, k)};
                const PairId pb{std::min(fixed_pair.second, k), std::max(fixed_pair.second, k)};
                if (res.assigned.count(pa) || res.assigned.count(pb)) continue;
                const std::vector<Peak>* ca = in_window_of(pa.first, pa.second);
                const std::vector<Peak>* cb = in_window_of(pb.first, pb.second);
                if (!ca || !cb || ca->empty() || cb->empty()) continue;

                // closure on (f, s, k): tau_fs = tau_fk - tau_sk; flip stored
                // lags when the canonical pair order reverses the legs
                const Peak* pick_a = nullptr;
                const Peak* pick_b = nullptr;
                int n_hits = 0;
                for (const Peak& qa : *ca) {
                    const double lag_fk = pa.first == fixed_pair.first ? qa.lag : -qa.lag;
                    for (const Peak& qb : *cb) {
                        const double lag_sk = pb.first == fixed_pair.second ? qb.lag : -qb.lag;
                        if (std::abs(rl.lag - (lag_fk - lag_sk)) <= cfg.closure_tol_samples) {
                            ++n_hits;
                            pick_a = &qa;
                            pick_b = &qb;
                        }
                    }
                }
                if (n_hits != 1) continue; // nothing or still ambiguous
                for (const auto& [id, pick] : {std::pair{pa, pick_a}, std::pair{pb, pick_b}}) {
                    auto it = joint.find(id);
                    if (it == joint.end()) {
                        joint[id] = {pick->lag, pick->value};
                    } else if (std::abs(it->second.lag - pick->lag) > 1e-9) {
                        conflicted.push_back(id); // disagreeing triples; leave for later sweeps
                    }
                }
            }
        }
        for (const PairId& id : conflicted) joint.erase(id);
        if (!joint.empty()) {
            changed = true;
            for (auto& [k, v] : joint) res.assigned[k] = v;
        }
    }
    return res;
}

inline void check_triangle_consistency(const LagMap& lags, const std::vector<std::size_t>& mics,
                                       const FineConfig& cfg, const char* what) {
    for (std::size_t i = 0; i < mics.size(); ++i) {
        for (std::size_t j = i + 1; j < mics.size(); ++j) {
            for (std::size_t k = j + 1; k < mics.size(); ++k) {
                double ij, ik, jk;
                if (!fine::lookup_lag(lags, mics[i], mics[j], ij) || !fine::lookup_lag(lags, mics[i], mics[k], ik) ||
                    !fine::lookup_lag(lags, mics[j], mics[k], jk))
                    continue;
                if (std::abs(ij - (ik - jk)) > cfg.closure_tol_samples)
                    fail(Errc::consistency_failure, "fine_align",
                         std::string(what) + " violate triangle closure on mics (" + std::to_string(mics[i]) + "," +
                             std::to_string(mics[j]) + "," + std::to_string(mics[k]) + ")");
            }
        }
    }
}

} // namespace detail

// Successive disambiguation. Pairs whose window holds exactly one peak are
// anchors and fix immediately; everything else is predicted through shared
// mics (tau_ab = tau_ak - tau_bk) and snapped to the nearest in-window peak.
// With no anchor anywhere, in-window peaks are partitioned into
// triangle-consistent groups instead, one hypothesis per source.
inline DelayAssignment resolve(const std::vector<PeakSet>& peaksets, const FineConfig& cfg = {}) {
    DelayAssignment out;

    std::map<PairId, const PeakSet*> by_pair;
    std::vector<std::size_t> mics;
    for (const auto& ps : peaksets) {
        const PairId id{std::min(ps.mic_a, ps.mic_b), std::max(ps.mic_a, ps.mic_b)};
        by_pair[id] = &ps;
        mics.push_back(ps.mic_a);
        mics.push_back(ps.mic_b);
    }
    std::sort(mics.begin(), mics.end());
    mics.erase(std::unique(mics.begin(), mics.end()), mics.end());

    LagMap anchors;
    for (const auto& [pair, ps] : by_pair) {
        if (ps->in_window.empty())
            out.excluded.push_back(pair);
        else if (ps->in_window.size() == 1)
            anchors[pair] = {ps->in_window.front().lag, ps->in_window.front().value};
    }
    detail::check_triangle_consistency(anchors, mics, cfg, "anchor pairs");

    if (!anchors.empty()) {
        auto res = detail::propagate(by_pair, std::move(anchors), mics, cfg);
        out.status = AssignStatus::Resolved;
        out.resolved = std::move(res.assigned);
        out.notes = std::move(res.notes);
        for (const auto& [pair, ps] : by_pair)
            if (!ps->in_window.empty() && !out.resolved.count(pair)) out.unresolved.push_back(pair);
        return out;
    }

    // Grouping fallback. Seed from the pair with the fewest candidates and
    // grow one hypothesis per seed peak.
    out.status = AssignStatus::GroupedOnly;
    const PeakSet* seed_ps = nullptr;
    PairId seed_id{};
    for (const auto& [pair, ps] : by_pair) {
        if (ps->in_window.empty()) continue;
        if (!seed_ps || ps->in_window.size() < seed_ps->in_window.size()) {
            seed_ps = ps;
            seed_id = pair;
        }
    }
    if (!seed_ps) return out; // nothing usable anywhere

    for (const Peak& p : seed_ps->in_window) {
        LagMap seed;
        seed[seed_id] = {p.lag, p.value};
        auto res = detail::propagate(by_pair, std::move(seed), mics, cfg);
        bool consistent = true;
        try {
            detail::check_triangle_consistency(res.assigned, mics, cfg, "group lags");
        } catch (const Error&) {
            consistent = false;
        }
        if (!consistent) continue;

        bool duplicate = false;
        for (const LagMap& g : out.groups) {
            if (g.size() != res.assigned.size()) continue;
            bool same = true;
            for (const auto& [k, v] : res.assigned) {
                auto it = g.find(k);
                if (it == g.end() || std::abs(it->second.lag - v.lag) > 0.25) {
                    same = false;
                    break;
                }
            }
            if (same) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) out.groups.push_back(std::move(res.assigned));
    }
    for (const auto& [pair, ps] : by_pair)
        if (!ps->in_window.empty()) out.unresolved.push_back(pair);
    return out;
}

} // namespace pointbeam::fine
