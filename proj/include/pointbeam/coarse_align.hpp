#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "pointbeam/error.hpp"
#include "pointbeam/geometry.hpp"
#include "pointbeam/scene.hpp"

namespace pointbeam::coarse {

struct TargetPoint {
    Vec3 position;
};

// Coarse delay estimate for one mic pair: the desired source's relative
// delay (arrival at mic_a minus arrival at mic_b, each on its own clock) is
// guaranteed to lie in [tau_hat - e_delta, tau_hat + e_delta] as long as the
// measured geometry honors pos_error_bound and the true sound speed lies in
// [c_min, c_max].
struct PairWindow {
    std::size_t mic_a = 0;
    std::size_t mic_b = 0;
    double tau_hat = 0.0; // seconds
    double e_delta = 0.0; // seconds, > 0 in practice
    double sr_m = 0.0;    // spatial resolution c_nominal * e_delta, meters

    double lo() const { return tau_hat - e_delta; }
    double hi() const { return tau_hat + e_delta; }
    bool contains(double tau) const { return tau >= lo() && tau <= hi(); }

    PairWindow flipped() const { return {mic_b, mic_a, -tau_hat, e_delta, sr_m}; }
};

// Geometric correction between the beacon's relative delay and the target
// point's relative delay, in seconds:
//   (d_a->target - d_b->target - d_a->beacon + d_b->beacon) / c_nominal.
// All distances use measured positions.
inline double pair_offset_delta(const TargetPoint& target, const Vec3& chirp_pos, const Vec3& mic_a_pos,
                                const Vec3& mic_b_pos, double c_nominal) {
    const double da_t = distance(mic_a_pos, target.position);
    const double db_t = distance(mic_b_pos, target.position);
    const double da_c = distance(mic_a_pos, chirp_pos);
    const double db_c = distance(mic_b_pos, chirp_pos);
    return (da_t - db_t - da_c + db_c) / c_nominal;
}

// Beacon-referenced coarse estimate of the target's relative delay. The
// beacon timestamps difference carries the clock offset and the beacon
// geometry; delta swaps the beacon geometry for the target's, so clock
// offsets cancel without ever being known.
inline double coarse_tau(double t_a, double t_b, double delta) { return (t_a - t_b) + delta; }

// Worst-case error of the coarse estimate: four measured distances each off
// by at most e_d, plus the sound-speed uncertainty scaled by the measured
// distance-difference sum.
inline double error_bound(const TargetPoint& target, const Vec3& chirp_pos, const Vec3& mic_a_pos,
                          const Vec3& mic_b_pos, double e_d, double c_min, double c_max) {
    if (e_d < 0.0 || !(c_min > 0.0) || c_min > c_max)
        fail(Errc::invalid_input, "coarse_align", "need e_d >= 0 and 0 < c_min <= c_max");
    const double da_t = distance(mic_a_pos, target.position);
    const double db_t = distance(mic_b_pos, target.position);
    const double da_c = distance(mic_a_pos, chirp_pos);
    const double db_c = distance(mic_b_pos, chirp_pos);
    const double dist_term = std::abs(da_c - da_t - db_c + db_t);
    return 4.0 * e_d / c_min + dist_term * (1.0 / c_min - 1.0 / c_max);
}

// One window per unordered mic pair with a beacon timestamp on both sides.
// arrivals[i] empty means mic i is beacon-missing and silently drops out of
// all pairs; the caller reports coverage.
inline std::vector<PairWindow> build_windows(const sim::AssumedGeometry& geom, const TargetPoint& target,
                                             const std::vector<std::optional<double>>& arrivals) {
    if (geom.mic_positions.size() != arrivals.size())
        fail(Errc::invalid_input, "coarse_align", "arrival list does not match mic count");
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < arrivals.size(); ++i)
        if (arrivals[i].has_value()) usable.push_back(i);
    if (usable.size() < 2)
        fail(Errc::insufficient_mics, "coarse_align", "need beacon timestamps on at least two mics");

    const double c_nom = geom.c_nominal();
    std::vector<PairWindow> out;
    out.reserve(usable.size() * (usable.size() - 1) / 2);
    for (std::size_t ai = 0; ai < usable.size(); ++ai) {
        for (std::size_t bi = ai + 1; bi < usable.size(); ++bi) {
            const std::size_t a = usable[ai];
            const std::size_t b = usable[bi];
            PairWindow w;
            w.mic_a = a;
            w.mic_b = b;
            const double delta = pair_offset_delta(target, geom.chirp_position, geom.mic_positions[a],
                                                   geom.mic_positions[b], c_nom);
            w.tau_hat = coarse_tau(*arrivals[a], *arrivals[b], delta);
            w.e_delta = error_bound(target, geom.chirp_position, geom.mic_positions[a], geom.mic_positions[b],
                                    geom.pos_error_bound, geom.c_min, geom.c_max);
            w.sr_m = c_nom * w.e_delta;
            out.push_back(w);
        }
    }
    return out;
}

} // namespace pointbeam::coarse
