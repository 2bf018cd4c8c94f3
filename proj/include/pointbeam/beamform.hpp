#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pointbeam/error.hpp"
#include "pointbeam/fine_align.hpp"
#include "pointbeam/geometry.hpp"
#include "pointbeam/scene.hpp"
#include "pointbeam/signal.hpp"

namespace pointbeam::beam {

struct PathShift {
    double shift = 0.0;  // seconds, on top of the mic's base shift
    double weight = 0.0;
};

// Everything delay_and_sum needs: per-mic shifts relative to the reference
// mic (arrival at mic minus arrival at reference), normalized combination
// weights, the selection mask, and optional extra multipath taps.
struct AlignmentSolution {
    std::size_t reference_mic = 0;
    std::vector<double> shift;  // seconds; reference entry is 0
    std::vector<double> weight; // sums to 1 over selected mics
    std::vector<bool> selected;
    std::vector<bool> in_component; // reachable through resolved pairs
    std::vector<std::vector<PathShift>> extra_paths;
    std::vector<std::string> warnings;
};

// Same shifts, no selection or amplitude weighting: every connected mic at
// weight 1/N. The plain delay-and-sum reference.
inline AlignmentSolution uniform_variant(const AlignmentSolution& sol) {
    AlignmentSolution out = sol;
    std::size_t n = 0;
    for (bool c : out.in_component) n += c;
    for (std::size_t i = 0; i < out.weight.size(); ++i) {
        out.selected[i] = out.in_component[i];
        out.weight[i] = out.in_component[i] ? 1.0 / static_cast<double>(n) : 0.0;
        out.extra_paths[i].clear();
    }
    return out;
}

// Strip multipath taps, keeping weights and selection.
inline AlignmentSolution direct_only_variant(const AlignmentSolution& sol) {
    AlignmentSolution out = sol;
    for (auto& p : out.extra_paths) p.clear();
    return out;
}

struct EnhancedSignal {
    SampleBuffer output;
    bool has_truth_metrics = false;
    std::vector<double> source_power; // per emitter, through the solution
    double noise_power = 0.0;
    double sinr_db = 0.0;
    double snr_db = 0.0;
    double snr_gain_db = 0.0; // vs the best single mic
    std::vector<std::string> warnings;
};

struct BeamConfig {
    double selection_threshold = 0.1;   // deselect below this fraction of the best mic's inferred amplitude
    double closure_tol_samples = 2.0;
    std::size_t max_extra_paths = 4;
    bool use_extra_paths = true;
};

namespace detail {

// Gaussian elimination with partial pivoting; fine at microphone-count sizes.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-12)
            fail(Errc::consistency_failure, "beamform", "singular weight system");
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t c = i + 1; c < n; ++c) acc -= a[i][c] * x[c];
        x[i] = acc / a[i][i];
    }
    return x;
}

inline double power(const SampleBuffer& x) {
    double acc = 0.0;
    for (double s : x.samples) acc += s * s;
    return x.samples.empty() ? 0.0 : acc / static_cast<double>(x.samples.size());
}

inline double ratio_db(double num, double den) {
    return 10.0 * std::log10(std::max(num, 1e-300) / std::max(den, 1e-300));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Weight solving

// Pairwise desired-peak values factor as (amplitude at a) * (amplitude at b)
// * source power, so per-mic amplitudes come out of a log-domain least
// squares over the pair graph. Weights are proportional to the inferred
// amplitudes (maximal-ratio combining shape); mics far below the best one
// are discarded outright.
inline AlignmentSolution solve_weights(const fine::LagMap& lags, std::size_t n_mics, double rate,
                                       const std::vector<fine::PeakSet>& peaksets, const BeamConfig& cfg = {}) {
    if (lags.empty())
        fail(Errc::nothing_to_enhance, "beamform", "no resolved pairs to build a solution from");

    AlignmentSolution sol;
    sol.shift.assign(n_mics, 0.0);
    sol.weight.assign(n_mics, 0.0);
    sol.selected.assign(n_mics, false);
    sol.in_component.assign(n_mics, false);
    sol.extra_paths.assign(n_mics, {});

    // Connected components of the resolved pair graph.
    std::vector<int> comp(n_mics, -1);
    int n_comp = 0;
    for (std::size_t seed = 0; seed < n_mics; ++seed) {
        bool present = false;
        for (const auto& [pair, rl] : lags)
            if (pair.first == seed || pair.second == seed) present = true;
        if (!present || comp[seed] >= 0) continue;
        std::vector<std::size_t> stack{seed};
        comp[seed] = n_comp;
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            for (const auto& [pair, rl] : lags) {
                std::size_t v = n_mics;
                if (pair.first == u) v = pair.second;
                else if (pair.second == u) v = pair.first;
                if (v < n_mics && comp[v] < 0) {
                    comp[v] = n_comp;
                    stack.push_back(v);
                }
            }
        }
        ++n_comp;
    }
    std::vector<std::size_t> comp_size(static_cast<std::size_t>(n_comp), 0);
    for (std::size_t i = 0; i < n_mics; ++i)
        if (comp[i] >= 0) ++comp_size[static_cast<std::size_t>(comp[i])];
    int use_comp = 0;
    for (int c = 1; c < n_comp; ++c)
        if (comp_size[static_cast<std::size_t>(c)] > comp_size[static_cast<std::size_t>(use_comp)]) use_comp = c;
    if (n_comp > 1)
        sol.warnings.push_back("pair graph disconnected; using largest component (" +
                               std::to_string(comp_size[static_cast<std::size_t>(use_comp)]) + " mics)");

    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n_mics; ++i)
        if (comp[i] == use_comp) {
            members.push_back(i);
            sol.in_component[i] = true;
        }
    if (members.size() < 2)
        fail(Errc::nothing_to_enhance, "beamform", "fewer than two connected mics");

    // Shifts by BFS from the reference (lowest index in the component).
    sol.reference_mic = members.front();
    std::vector<bool> have_shift(n_mics, false);
    have_shift[sol.reference_mic] = true;
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& [pair, rl] : lags) {
            const auto [a, b] = pair;
            if (have_shift[a] && !have_shift[b]) {
                sol.shift[b] = sol.shift[a] - rl.lag / rate; // lag = arr_a - arr_b
                have_shift[b] = true;
                grew = true;
            } else if (have_shift[b] && !have_shift[a]) {
                sol.shift[a] = sol.shift[b] + rl.lag / rate;
                have_shift[a] = true;
                grew = true;
            }
        }
    }

    // Log-domain least squares for per-mic amplitudes.
    std::map<std::size_t, std::size_t> idx_of;
    for (std::size_t i = 0; i < members.size(); ++i) idx_of[members[i]] = i;
    const std::size_t m = members.size();
    std::vector<std::vector<double>> ata(m, std::vector<double>(m, 0.0));
    std::vector<double> atb(m, 0.0);
    std::size_t n_eq = 0;
    for (const auto& [pair, rl] : lags) {
        if (comp[pair.first] != use_comp || rl.value <= 0.0) continue;
        const std::size_t ia = idx_of[pair.first];
        const std::size_t ib = idx_of[pair.second];
        const double y = std::log(rl.value);
        ata[ia][ia] += 1.0;
        ata[ib][ib] += 1.0;
        ata[ia][ib] += 1.0;
        ata[ib][ia] += 1.0;
        atb[ia] += y;
        atb[ib] += y;
        ++n_eq;
    }
    if (n_eq == 0)
        fail(Errc::nothing_to_enhance, "beamform", "no positive desired-peak values");
    // Tiny ridge: bipartite pair graphs (a lone pair, trees) leave one gauge
    // degree of freedom in the log system; this picks the balanced solution
    // and perturbs well-determined systems by ~1e-6.
    for (std::size_t i = 0; i < m; ++i) ata[i][i] += 1e-6;
    std::vector<double> w = detail::solve_dense(std::move(ata), std::move(atb));

    double amp_max = 0.0;
    std::vector<double> amp(n_mics, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        amp[members[i]] = std::exp(w[i]);
        amp_max = std::max(amp_max, amp[members[i]]);
    }
    double wsum = 0.0;
    for (std::size_t mi : members) {
        if (amp[mi] >= cfg.selection_threshold * amp_max) {
            sol.selected[mi] = true;
            sol.weight[mi] = amp[mi];
            wsum += amp[mi];
        } else {
            sol.warnings.push_back("mic " + std::to_string(mi) + " deselected (weak desired signal)");
        }
    }
    for (std::size_t mi : members)
        if (sol.selected[mi]) sol.weight[mi] /= wsum;

    // Extra multipath taps: leftover in-window peaks offset from the resolved
    // lag. A positive offset is an extra path at the pair's first mic, a
    // negative one at the second (a negative extra delay would be acausal).
    if (cfg.use_extra_paths) {
        struct Cand {
            double delay;
            double ratio;
        };
        std::vector<std::vector<Cand>> cands(n_mics);
        for (const auto& ps : peaksets) {
            const fine::PairId id{std::min(ps.mic_a, ps.mic_b), std::max(ps.mic_a, ps.mic_b)};
            auto it = lags.find(id);
            if (it == lags.end() || it->second.value <= 0.0) continue;
            for (const fine::Peak& p : ps.in_window) {
                const double off = p.lag - it->second.lag;
                if (std::abs(off) <= cfg.closure_tol_samples || p.value <= 0.0) continue;
                // ratio may exceed 1: under heavy obstruction an echo path
                // out-powers the direct one
                const double ratio = std::min(10.0, p.value / it->second.value);
                if (off > 0.0)
                    cands[id.first].push_back({off / rate, ratio});
                else
                    cands[id.second].push_back({-off / rate, ratio});
            }
        }
        const double tol_s = cfg.closure_tol_samples / rate;
        for (std::size_t mi : members) {
            if (!sol.selected[mi] || cands[mi].empty()) continue;
            std::sort(cands[mi].begin(), cands[mi].end(), [](const Cand& a, const Cand& b) { return a.delay < b.delay; });
            std::vector<PathShift> paths;
            std::size_t i = 0;
            while (i < cands[mi].size()) {
                std::size_t j = i;
                double dsum = 0.0, rsum = 0.0;
                while (j < cands[mi].size() && cands[mi][j].delay - cands[mi][i].delay <= tol_s) {
                    dsum += cands[mi][j].delay;
                    rsum += cands[mi][j].ratio;
                    ++j;
                }
                // one cluster = one hypothesized extra path; agreeing pairs
                // average their delay and amplitude-ratio estimates
                const auto support = static_cast<double>(j - i);
                paths.push_back({sol.shift[mi] + dsum / support, sol.weight[mi] * (rsum / support)});
                i = j;
            }
            std::sort(paths.begin(), paths.end(), [](const PathShift& a, const PathShift& b) { return a.weight > b.weight; });
            if (paths.size() > cfg.max_extra_paths) paths.resize(cfg.max_extra_paths);
            sol.extra_paths[mi] = std::move(paths);
        }
    }
    return sol;
}

// Convenience: solution straight from a resolved assignment.
inline AlignmentSolution solve_weights(const fine::DelayAssignment& assignment,
                                       const std::vector<fine::PeakSet>& peaksets, std::size_t n_mics, double rate,
                                       const BeamConfig& cfg = {}) {
    if (assignment.status != fine::AssignStatus::Resolved)
        fail(Errc::invalid_input, "beamform", "assignment is not resolved; enhance groups instead");
    return solve_weights(assignment.resolved, n_mics, rate, peaksets, cfg);
}

// ---------------------------------------------------------------------------
// Delay and sum

namespace detail {

inline void accumulate_shifted(SampleBuffer& acc, const SampleBuffer& x, double delay, double weight) {
    SampleBuffer shifted = delay_fractional(x, delay);
    for (std::size_t i = 0; i < acc.samples.size(); ++i) acc.samples[i] += weight * shifted.samples[i];
}

} // namespace detail

// Shift every selected mic onto the reference timeline and sum with the
// solution's weights (extra multipath taps as additional shifted copies).
// When the recordings carry clean stems, exact per-source output powers and
// SINR come along for free.
inline EnhancedSignal delay_and_sum(const sim::RecordingSet& rec, const AlignmentSolution& sol,
                                    std::optional<std::size_t> desired_emitter = std::nullopt) {
    if (sol.shift.size() != rec.mic_count() || sol.weight.size() != rec.mic_count())
        fail(Errc::invalid_input, "beamform", "solution does not match the recording set");
    const std::size_t length = rec.mics.empty() ? 0 : rec.mics.front().size();

    EnhancedSignal out;
    out.output.rate = rec.rate;
    out.output.samples.assign(length, 0.0);
    out.warnings = sol.warnings;

    struct Tap {
        std::size_t mic;
        double delay;
        double weight;
    };
    std::vector<Tap> taps;
    double wsum = 0.0;
    for (std::size_t mi = 0; mi < rec.mic_count(); ++mi) {
        if (!sol.selected[mi]) continue;
        const double base = -sol.shift[mi];
        if (std::abs(base * rec.rate) >= static_cast<double>(length)) {
            out.warnings.push_back("mic " + std::to_string(mi) + " dropped: shift exceeds buffer");
            continue;
        }
        taps.push_back({mi, base, sol.weight[mi]});
        wsum += sol.weight[mi];
        for (const PathShift& p : sol.extra_paths[mi]) {
            const double d = -p.shift;
            if (std::abs(d * rec.rate) >= static_cast<double>(length)) continue;
            taps.push_back({mi, d, p.weight});
        }
    }
    if (taps.empty())
        fail(Errc::nothing_to_enhance, "beamform", "no usable mics after shift checks");
    if (wsum <= 0.0)
        fail(Errc::nothing_to_enhance, "beamform", "combination weights vanished");
    // keep direct weights summing to 1 even if a mic was dropped late
    for (auto& t : taps) t.weight /= wsum;

    for (const Tap& t : taps) detail::accumulate_shifted(out.output, rec.mics[t.mic], t.delay, t.weight);

    if (!rec.stems.empty()) {
        out.has_truth_metrics = true;
        out.source_power.assign(rec.emitter_count(), 0.0);
        for (std::size_t si = 0; si < rec.emitter_count(); ++si) {
            SampleBuffer acc;
            acc.rate = rec.rate;
            acc.samples.assign(length, 0.0);
            for (const Tap& t : taps) detail::accumulate_shifted(acc, rec.stems[t.mic][si], t.delay, t.weight);
            out.source_power[si] = detail::power(acc);
        }
        SampleBuffer accn;
        accn.rate = rec.rate;
        accn.samples.assign(length, 0.0);
        for (const Tap& t : taps)
            if (!rec.noise[t.mic].samples.empty()) detail::accumulate_shifted(accn, rec.noise[t.mic], t.delay, t.weight);
        out.noise_power = detail::power(accn);

        std::size_t des = 0;
        if (desired_emitter) {
            des = *desired_emitter;
        } else {
            for (std::size_t si = 0; si < rec.emitter_count(); ++si)
                if (rec.emitters[si].role == sim::SourceRole::Desired) {
                    des = si;
                    break;
                }
        }
        double interference = 0.0;
        for (std::size_t si = 0; si < rec.emitter_count(); ++si)
            if (si != des) interference += out.source_power[si];
        out.sinr_db = detail::ratio_db(out.source_power[des], interference + out.noise_power);
        out.snr_db = detail::ratio_db(out.source_power[des], out.noise_power);

        double best_single = -1e300;
        for (std::size_t mi = 0; mi < rec.mic_count(); ++mi) {
            const double p_des = detail::power(rec.stems[mi][des]);
            const double p_n = rec.noise[mi].samples.empty() ? 0.0 : detail::power(rec.noise[mi]);
            best_single = std::max(best_single, detail::ratio_db(p_des, p_n));
        }
        out.snr_gain_db = out.snr_db - best_single;
    }
    return out;
}

// Per-mic SINR/SNR from the simulator stems; "best single mic" baselines.
inline double single_mic_sinr_db(const sim::RecordingSet& rec, std::size_t mic, std::size_t desired) {
    if (rec.stems.empty())
        fail(Errc::invalid_input, "beamform", "recording set has no stems");
    double interference = 0.0;
    for (std::size_t si = 0; si < rec.emitter_count(); ++si)
        if (si != desired) interference += detail::power(rec.stems[mic][si]);
    const double noise = rec.noise[mic].samples.empty() ? 0.0 : detail::power(rec.noise[mic]);
    return detail::ratio_db(detail::power(rec.stems[mic][desired]), interference + noise);
}

inline double best_single_mic_sinr_db(const sim::RecordingSet& rec, std::size_t desired) {
    double best = -1e300;
    for (std::size_t mi = 0; mi < rec.mic_count(); ++mi) best = std::max(best, single_mic_sinr_db(rec, mi, desired));
    return best;
}

inline double single_mic_snr_db(const sim::RecordingSet& rec, std::size_t mic, std::size_t desired) {
    if (rec.stems.empty())
        fail(Errc::invalid_input, "beamform", "recording set has no stems");
    const double noise = rec.noise[mic].samples.empty() ? 0.0 : detail::power(rec.noise[mic]);
    return detail::ratio_db(detail::power(rec.stems[mic][desired]), noise);
}

// ---------------------------------------------------------------------------
// Centralized delay-and-sum baseline

// Classic steered uniform linear array: per-element delay n*d*cos(theta)/c,
// uniform weights. The recordings must come from collinear, equally spaced
// mics (shared clock); theta is measured against the array axis.
inline EnhancedSignal dsb_baseline(const sim::RecordingSet& rec, const std::vector<Vec3>& mic_positions,
                                   double steering_angle, double c,
                                   std::optional<std::size_t> desired_emitter = std::nullopt) {
    const std::size_t n = rec.mic_count();
    if (mic_positions.size() != n)
        fail(Errc::invalid_input, "beamform", "positions do not match the recording set");
    double spacing = 0.0;
    if (n >= 2) {
        const Vec3 axis = mic_positions[1] - mic_positions[0];
        spacing = axis.norm();
        if (!(spacing > 0.0))
            fail(Errc::invalid_baseline, "beamform", "coincident array elements");
        for (std::size_t i = 1; i < n; ++i) {
            const Vec3 step = mic_positions[i] - mic_positions[i - 1];
            if (std::abs(step.norm() - spacing) > 1e-6 * spacing)
                fail(Errc::invalid_baseline, "beamform", "array spacing is not uniform");
            const Vec3 d = step - axis;
            if (d.norm() > 1e-6 * spacing)
                fail(Errc::invalid_baseline, "beamform", "array is not collinear");
        }
    }

    AlignmentSolution sol;
    sol.reference_mic = 0;
    sol.shift.assign(n, 0.0);
    sol.weight.assign(n, 1.0 / static_cast<double>(n));
    sol.selected.assign(n, true);
    sol.in_component.assign(n, true);
    sol.extra_paths.assign(n, {});
    const double tau = spacing * std::cos(steering_angle) / c;
    // element i hears a far source at `steering_angle` earlier by i*tau,
    // so shift (arrival relative to element 0) is -i*tau
    for (std::size_t i = 0; i < n; ++i) sol.shift[i] = -static_cast<double>(i) * tau;
    return delay_and_sum(rec, sol, desired_emitter);
}

// One enhanced output per hypothesis group.
inline std::vector<EnhancedSignal> enhance_all_groups(const sim::RecordingSet& rec,
                                                      const fine::DelayAssignment& assignment,
                                                      const std::vector<fine::PeakSet>& peaksets,
                                                      const BeamConfig& cfg = {},
                                                      std::optional<std::size_t> desired_emitter = std::nullopt) {
    if (assignment.status != fine::AssignStatus::GroupedOnly)
        fail(Errc::invalid_input, "beamform", "assignment is resolved; call delay_and_sum directly");
    if (assignment.groups.empty())
        fail(Errc::nothing_to_enhance, "beamform", "no hypothesis groups to enhance");
    std::vector<EnhancedSignal> out;
    out.reserve(assignment.groups.size());
    for (const auto& g : assignment.groups) {
        AlignmentSolution sol = solve_weights(g, rec.mic_count(), rec.rate, peaksets, cfg);
        out.push_back(delay_and_sum(rec, sol, desired_emitter));
    }
    return out;
}

} // namespace pointbeam::beam
