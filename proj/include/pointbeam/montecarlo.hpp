#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "pointbeam/coarse_align.hpp"
#include "pointbeam/error.hpp"
#include "pointbeam/fine_align.hpp"
#include "pointbeam/geometry.hpp"
#include "pointbeam/rng.hpp"
#include "pointbeam/scene.hpp"

// Geometry-level disambiguation trials. Signal rendering is skipped: each
// source drops an exact cross-correlation peak at its true pair delay, which
// is what the CCF of clean recordings converges to, and the real window and
// resolution code runs on top. This is what makes 10^4..10^7 trials cheap.

namespace pointbeam::eval {

struct GeoWorld {
    std::vector<Vec3> mic_true;
    std::vector<Vec3> mic_measured;
    Vec3 chirp_pos;
    std::vector<Vec3> source_pos; // index 0 is the desired source
    std::vector<double> source_level;
    double c_true = 342.0;
    double c_min = 337.0;
    double c_max = 348.0;
    double e_d = 0.2;
    double rate = 44100.0;

    sim::AssumedGeometry assumed() const {
        sim::AssumedGeometry g;
        g.mic_positions = mic_measured;
        g.chirp_position = chirp_pos;
        g.c_min = c_min;
        g.c_max = c_max;
        g.pos_error_bound = e_d;
        g.rate = rate;
        return g;
    }

    // seconds; arrival at mic a minus arrival at mic b (clock offsets cancel
    // pairwise, so the geometric model leaves them at zero)
    double pair_truth(std::size_t a, std::size_t b, std::size_t source) const {
        return (distance(source_pos[source], mic_true[a]) - distance(source_pos[source], mic_true[b])) / c_true;
    }
};

struct McConfig {
    double min_separation = 0.5;  // meters, between all sources
    std::size_t n_interferers = 1;
    double merge_radius = 1.0;    // samples; closer peaks are one CCF blob
    double success_tol = 2.0;     // samples
    std::size_t max_place_tries = 20000;
};

// Random placement with a minimum pairwise separation, rejection-sampled
// inside a rectangle.
inline std::vector<Vec3> place_sources(rng::SplitMix64& g, const Vec3& room_lo, const Vec3& room_hi,
                                       std::size_t count, double min_separation, std::size_t max_tries) {
    std::vector<Vec3> out;
    std::size_t tries = 0;
    while (out.size() < count) {
        if (++tries > max_tries)
            fail(Errc::placement_error, "eval_cli",
                 "could not place sources with the requested separation");
        Vec3 p{g.uniform(room_lo.x, room_hi.x), g.uniform(room_lo.y, room_hi.y), 0.0};
        bool ok = true;
        for (const Vec3& q : out)
            if (distance(p, q) < min_separation) {
                ok = false;
                break;
            }
        if (ok) out.push_back(p);
    }
    return out;
}

// Exact beacon arrivals (perfect detection, zero clock offsets -- both
// cancel out of window-vs-peak geometry).
inline std::vector<std::optional<double>> geo_arrivals(const GeoWorld& w) {
    std::vector<std::optional<double>> t(w.mic_true.size());
    for (std::size_t i = 0; i < w.mic_true.size(); ++i) t[i] = distance(w.chirp_pos, w.mic_true[i]) / w.c_true;
    return t;
}

inline std::vector<coarse::PairWindow> geo_windows(const GeoWorld& w, const Vec3& target) {
    return coarse::build_windows(w.assumed(), coarse::TargetPoint{target}, geo_arrivals(w));
}

// Synthetic peak sets: one peak per source at its exact pair lag, valued by
// the attenuation product, merged when closer than the CCF can separate.
inline std::vector<fine::PeakSet> geo_peaksets(const GeoWorld& w, const std::vector<coarse::PairWindow>& windows,
                                               double merge_radius) {
    std::vector<fine::PeakSet> out;
    out.reserve(windows.size());
    for (const auto& win : windows) {
        fine::PeakSet ps;
        ps.mic_a = win.mic_a;
        ps.mic_b = win.mic_b;
        ps.window = win;
        for (std::size_t s = 0; s < w.source_pos.size(); ++s) {
            const double da = std::max(distance(w.source_pos[s], w.mic_true[win.mic_a]), sim::kDistanceFloor);
            const double db = std::max(distance(w.source_pos[s], w.mic_true[win.mic_b]), sim::kDistanceFloor);
            const double lag = w.pair_truth(win.mic_a, win.mic_b, s) * w.rate;
            const double value = (w.source_level[s] / da) * (w.source_level[s] / db);
            ps.peaks.push_back({lag, value});
        }
        // merge indistinguishable peaks, keeping the strongest of a cluster
        std::sort(ps.peaks.begin(), ps.peaks.end(),
                  [](const fine::Peak& a, const fine::Peak& b) { return a.lag < b.lag; });
        std::vector<fine::Peak> merged;
        std::size_t i = 0;
        while (i < ps.peaks.size()) {
            fine::Peak best = ps.peaks[i];
            std::size_t j = i + 1;
            while (j < ps.peaks.size() && ps.peaks[j].lag - ps.peaks[j - 1].lag <= merge_radius) {
                if (ps.peaks[j].value > best.value) best = ps.peaks[j];
                ++j;
            }
            merged.push_back(best);
            i = j;
        }
        ps.peaks = std::move(merged);
        std::sort(ps.peaks.begin(), ps.peaks.end(),
                  [](const fine::Peak& a, const fine::Peak& b) { return a.value > b.value; });
        for (const auto& p : ps.peaks)
            if (win.contains(p.lag / w.rate)) ps.in_window.push_back(p);
        out.push_back(std::move(ps));
    }
    return out;
}

struct McOutcome {
    bool resolved = false; // anchor-based resolution happened
    bool correct = false;  // every resolved lag matches desired truth and spans all mics
    std::size_t n_anchors = 0;
    std::size_t n_groups = 0;
};

// One disambiguation trial on a fixed world.
inline McOutcome mc_trial(const GeoWorld& w, const McConfig& cfg = {}, const fine::FineConfig& fine_cfg = {}) {
    auto windows = geo_windows(w, w.source_pos.front());
    auto peaksets = geo_peaksets(w, windows, cfg.merge_radius);

    McOutcome out;
    for (const auto& ps : peaksets)
        if (ps.in_window.size() == 1) ++out.n_anchors;

    fine::DelayAssignment assignment;
    try {
        assignment = fine::resolve(peaksets, fine_cfg);
    } catch (const Error&) {
        return out; // consistency failure counts as an unresolved trial
    }
    out.n_groups = assignment.groups.size();
    if (assignment.status != fine::AssignStatus::Resolved || assignment.resolved.empty()) return out;
    out.resolved = true;

    // correctness: every resolved pair near the desired truth, and the
    // resolved graph must reach every mic (otherwise enhancement is partial)
    std::vector<bool> covered(w.mic_true.size(), false);
    for (const auto& [pair, rl] : assignment.resolved) {
        const double truth = w.pair_truth(pair.first, pair.second, 0) * w.rate;
        if (std::abs(rl.lag - truth) > cfg.success_tol) return out;
        covered[pair.first] = covered[pair.second] = true;
    }
    for (bool c : covered)
        if (!c) return out;
    out.correct = true;
    return out;
}

// Random world around a fixed mic/beacon layout: per-trial measurement
// errors, sound speed, and source placement.
inline GeoWorld mc_world(const std::vector<Vec3>& mic_true, const Vec3& chirp_pos, const Vec3& room_lo,
                         const Vec3& room_hi, double e_d, double c_min, double c_max, double rate,
                         const McConfig& cfg, std::uint64_t seed) {
    rng::SplitMix64 g(seed);
    GeoWorld w;
    w.mic_true = mic_true;
    w.chirp_pos = chirp_pos;
    w.c_min = c_min;
    w.c_max = c_max;
    w.e_d = e_d;
    w.rate = rate;
    w.c_true = g.uniform(c_min, c_max);
    w.mic_measured.reserve(mic_true.size());
    for (const Vec3& p : mic_true) {
        const double ang = g.uniform(0.0, 2.0 * std::numbers::pi);
        const double r = e_d * std::sqrt(g.next_double());
        w.mic_measured.push_back(p + Vec3{r * std::cos(ang), r * std::sin(ang), 0.0});
    }
    w.source_pos = place_sources(g, room_lo, room_hi, 1 + cfg.n_interferers, cfg.min_separation, cfg.max_place_tries);
    w.source_level.assign(w.source_pos.size(), 1.0);
    return w;
}

} // namespace pointbeam::eval
