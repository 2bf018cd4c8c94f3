#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pointbeam/beamform.hpp"
#include "pointbeam/chirp_detect.hpp"
#include "pointbeam/coarse_align.hpp"
#include "pointbeam/error.hpp"
#include "pointbeam/fine_align.hpp"
#include "pointbeam/json_out.hpp"
#include "pointbeam/montecarlo.hpp"
#include "pointbeam/scenario_io.hpp"
#include "pointbeam/scene.hpp"
#include "pointbeam/wav.hpp"

namespace pointbeam::eval {

// One experiment's parameters, per-trial records, and summary statistics.
// Serialized output never includes wall-clock time, so a rerun with the same
// seed and inputs is byte-identical; runtime goes to the console instead.
struct ExperimentReport {
    std::string id;
    std::vector<std::pair<std::string, double>> params;
    std::vector<std::pair<std::string, std::string>> labels;

    struct Trial {
        std::uint64_t seed = 0;
        std::vector<std::pair<std::string, double>> fields;
    };
    std::vector<Trial> trials;
    std::vector<std::pair<std::string, double>> summary;
    std::vector<std::string> warnings;
    double runtime_seconds = 0.0; // in-memory only

    std::string to_json(bool include_trials) const {
        io::JsonWriter w;
        w.begin_object();
        w.key("experiment").value(id);
        w.key("params").begin_object();
        for (const auto& [k, v] : params) w.key(k).value(v);
        w.end_object();
        if (!labels.empty()) {
            w.key("labels").begin_object();
            for (const auto& [k, v] : labels) w.key(k).value(v);
            w.end_object();
        }
        w.key("summary").begin_object();
        for (const auto& [k, v] : summary) w.key(k).value(v);
        w.end_object();
        if (include_trials) {
            w.key("trials").begin_array();
            for (const auto& t : trials) {
                w.begin_object();
                w.key("seed").value(static_cast<std::size_t>(t.seed));
                for (const auto& [k, v] : t.fields) w.key(k).value(v);
                w.end_object();
            }
            w.end_array();
        }
        if (!warnings.empty()) {
            w.key("warnings").begin_array();
            for (const auto& s : warnings) w.value(s);
            w.end_array();
        }
        w.end_object();
        return w.str() + "\n";
    }

    std::string trials_csv() const {
        std::string out = "seed";
        if (!trials.empty())
            for (const auto& [k, v] : trials.front().fields) out += "," + k;
        out += "\n";
        for (const auto& t : trials) {
            out += std::to_string(t.seed);
            for (const auto& [k, v] : t.fields) out += "," + io::json_number(v);
            out += "\n";
        }
        return out;
    }
};

namespace detail {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(Errc::io_error, "eval_cli", "cannot write " + path.string());
    out << text;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Full pipeline on one scenario

struct PipelineResult {
    sim::RecordingSet rec;
    std::vector<std::vector<detect::ChirpArrival>> arrivals;
    std::vector<std::optional<double>> beacon_ts;
    std::vector<coarse::PairWindow> windows;
    std::vector<fine::PeakSet> peaksets;
    fine::DelayAssignment assignment;
    beam::AlignmentSolution solution;
    beam::EnhancedSignal enhanced;
    std::vector<beam::EnhancedSignal> group_outputs; // when resolution fell back to grouping
    std::size_t desired_emitter = 0;
};

struct PipelineConfig {
    detect::DetectConfig detect;
    fine::FineConfig fine;
    beam::BeamConfig beam;
};

// simulate -> beacon detection -> windows -> correlation -> resolution ->
// weights -> delay-and-sum. Falls back to per-group enhancement when no
// anchor pair exists; the first group's output fills `enhanced`.
inline PipelineResult run_pipeline(const sim::Scenario& scn, const coarse::TargetPoint& target,
                                   const PipelineConfig& cfg = {}) {
    PipelineResult res;
    res.rec = sim::simulate(scn);

    const auto& cspec = std::get<sim::ChirpWaveform>(scn.chirp_device.waveform).spec;
    res.arrivals = detect::detect_chirps(res.rec, cspec, cfg.detect);
    std::size_t with_beacon = 0;
    for (const auto& a : res.arrivals) with_beacon += !a.empty();
    if (with_beacon < 2)
        fail(Errc::insufficient_data, "chirp_detect",
             "beacon detected on " + std::to_string(with_beacon) + " mic(s); need at least 2");
    res.beacon_ts = detect::pick_common_emission(res.arrivals, cspec.period);

    res.windows = coarse::build_windows(sim::assumed_view(scn), target, res.beacon_ts);
    const std::size_t max_lag = fine::default_max_lag(res.windows, scn.rate);
    res.peaksets = fine::correlate_pairs(res.rec, res.windows, max_lag, cfg.fine);
    res.assignment = fine::resolve(res.peaksets, cfg.fine);

    for (std::size_t si = 0; si < res.rec.emitter_count(); ++si)
        if (res.rec.emitters[si].role == sim::SourceRole::Desired) {
            res.desired_emitter = si;
            break;
        }

    if (res.assignment.status == fine::AssignStatus::Resolved) {
        res.solution = beam::solve_weights(res.assignment, res.peaksets, res.rec.mic_count(), scn.rate, cfg.beam);
        res.enhanced = beam::delay_and_sum(res.rec, res.solution, res.desired_emitter);
    } else {
        res.group_outputs =
            beam::enhance_all_groups(res.rec, res.assignment, res.peaksets, cfg.beam, res.desired_emitter);
        res.solution = beam::solve_weights(res.assignment.groups.front(), res.rec.mic_count(), scn.rate,
                                           res.peaksets, cfg.beam);
        res.enhanced = res.group_outputs.front();
    }
    return res;
}

namespace detail {

inline std::string ground_truth_json(const sim::RecordingSet& rec) {
    io::JsonWriter w;
    w.begin_object();
    w.key("rate").value(rec.rate);
    w.key("emitters").begin_array();
    for (const auto& e : rec.emitters) {
        w.begin_object();
        w.key("role").value(sim::role_name(e.role));
        w.key("x").value(e.position.x);
        w.key("y").value(e.position.y);
        w.key("z").value(e.position.z);
        w.key("level").value(e.level);
        w.end_object();
    }
    w.end_array();
    w.key("pair_delays").begin_array();
    for (std::size_t a = 0; a < rec.mic_count(); ++a) {
        for (std::size_t b = a + 1; b < rec.mic_count(); ++b) {
            for (std::size_t s = 0; s < rec.emitter_count(); ++s) {
                w.begin_object();
                w.key("mic_a").value(a);
                w.key("mic_b").value(b);
                w.key("emitter").value(s);
                w.key("tau_s").value(rec.pair_delay(a, b, s));
                w.end_object();
            }
        }
    }
    w.end_array();
    w.end_object();
    return w.str() + "\n";
}

} // namespace detail

// ---------------------------------------------------------------------------
// run: one scenario end to end, artifacts on disk

inline ExperimentReport cmd_run(const sim::Scenario& scn, std::optional<Vec3> target_opt,
                                const std::string& out_dir, const PipelineConfig& cfg = {},
                                bool write_outputs = true) {
    detail::Stopwatch clock;
    Vec3 target;
    if (target_opt) {
        target = *target_opt;
    } else {
        bool found = false;
        for (const auto& s : scn.sources)
            if (s.role == sim::SourceRole::Desired) {
                target = s.position;
                found = true;
                break;
            }
        if (!found)
            fail(Errc::invalid_input, "eval_cli", "no target given and no desired source in scenario");
    }

    PipelineResult res = run_pipeline(scn, coarse::TargetPoint{target}, cfg);

    ExperimentReport rep;
    rep.id = "run";
    rep.params = {{"target_x", target.x}, {"target_y", target.y}, {"target_z", target.z},
                  {"seed", static_cast<double>(scn.rng_seed)}};

    std::size_t mics_with_beacon = 0;
    for (const auto& a : res.arrivals) mics_with_beacon += !a.empty();
    std::size_t n_selected = 0;
    for (bool s : res.solution.selected) n_selected += s;

    double coarse_max_err = 0.0, fine_max_err = 0.0;
    for (const auto& w : res.windows)
        coarse_max_err = std::max(coarse_max_err,
                                  std::abs(w.tau_hat - res.rec.pair_delay(w.mic_a, w.mic_b, res.desired_emitter)));
    for (const auto& [pair, rl] : res.assignment.resolved)
        fine_max_err = std::max(fine_max_err, std::abs(rl.lag - res.rec.pair_delay(pair.first, pair.second,
                                                                                   res.desired_emitter) *
                                                                    scn.rate));

    rep.summary = {
        {"mics", static_cast<double>(scn.mics.size())},
        {"mics_with_beacon", static_cast<double>(mics_with_beacon)},
        {"windows", static_cast<double>(res.windows.size())},
        {"pairs_resolved", static_cast<double>(res.assignment.resolved.size())},
        {"pairs_excluded", static_cast<double>(res.assignment.excluded.size())},
        {"pairs_unresolved", static_cast<double>(res.assignment.unresolved.size())},
        {"groups", static_cast<double>(res.assignment.groups.size())},
        {"mics_selected", static_cast<double>(n_selected)},
        {"spatial_resolution_m", fine::spatial_resolution(res.windows)},
        {"coarse_max_error_ms", coarse_max_err * 1e3},
        {"fine_max_error_samples", fine_max_err},
        {"enhanced_sinr_db", res.enhanced.sinr_db},
        {"enhanced_snr_db", res.enhanced.snr_db},
        {"best_single_mic_sinr_db", beam::best_single_mic_sinr_db(res.rec, res.desired_emitter)},
        {"snr_gain_db", res.enhanced.snr_gain_db},
    };
    for (const auto& w : res.rec.warnings) rep.warnings.push_back(w);
    for (const auto& w : res.solution.warnings) rep.warnings.push_back(w);

    if (write_outputs) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        for (std::size_t mi = 0; mi < res.rec.mic_count(); ++mi) {
            char name[32];
            std::snprintf(name, sizeof(name), "mic_%02zu.wav", mi);
            io::write_wav((fs::path(out_dir) / name).string(), res.rec.mics[mi]);
        }
        io::write_wav((fs::path(out_dir) / "enhanced.wav").string(), res.enhanced.output);
        for (std::size_t gi = 0; gi < res.group_outputs.size(); ++gi) {
            char name[32];
            std::snprintf(name, sizeof(name), "enhanced_group_%02zu.wav", gi);
            io::write_wav((fs::path(out_dir) / name).string(), res.group_outputs[gi].output);
        }
        detail::write_text(fs::path(out_dir) / "ground_truth.json", detail::ground_truth_json(res.rec));
        std::vector<std::pair<std::string, double>> metrics = rep.summary;
        detail::write_text(fs::path(out_dir) / "metrics.json", io::flat_metrics_json(metrics));
        detail::write_text(fs::path(out_dir) / "report.json", rep.to_json(false));
    }
    rep.runtime_seconds = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// monte-carlo: disambiguation probability, geometry-level trials

inline ExperimentReport cmd_monte_carlo(const sim::Scenario& layout, double min_separation, std::size_t trials,
                                        std::uint64_t seed, std::size_t n_interferers = 1) {
    if (trials < 1)
        fail(Errc::invalid_input, "eval_cli", "need at least one trial");
    detail::Stopwatch clock;

    std::vector<Vec3> mic_true;
    for (const auto& m : layout.mics) mic_true.push_back(m.true_position);
    Vec3 lo = mic_true.front(), hi = mic_true.front();
    for (const auto& p : mic_true) {
        lo.x = std::min(lo.x, p.x), lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x), hi.y = std::max(hi.y, p.y);
    }

    McConfig cfg;
    cfg.min_separation = min_separation;
    cfg.n_interferers = n_interferers;

    ExperimentReport rep;
    rep.id = "monte-carlo";
    rep.params = {{"min_separation_m", min_separation},
                  {"trials", static_cast<double>(trials)},
                  {"seed", static_cast<double>(seed)},
                  {"interferers", static_cast<double>(n_interferers)},
                  {"pos_error_bound_m", layout.pos_error_bound}};

    std::size_t successes = 0, resolved = 0, anchorless = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::uint64_t trial_seed = rng::derive_seed(seed, t);
        GeoWorld w = mc_world(mic_true, layout.chirp_device.position, lo, hi, layout.pos_error_bound,
                              layout.c_assumed_min, layout.c_assumed_max, layout.rate, cfg, trial_seed);
        McOutcome o = mc_trial(w, cfg);
        successes += o.correct;
        resolved += o.resolved;
        anchorless += (o.n_anchors == 0);
        ExperimentReport::Trial trial;
        trial.seed = trial_seed;
        trial.fields = {{"success", o.correct ? 1.0 : 0.0},
                        {"resolved", o.resolved ? 1.0 : 0.0},
                        {"anchors", static_cast<double>(o.n_anchors)}};
        rep.trials.push_back(std::move(trial));
    }

    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    // Wilson 95% interval
    const double z = 1.959963985;
    const double denom = 1.0 + z * z / n;
    const double center = (p + z * z / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;

    rep.summary = {{"success_rate", p},
                   {"ci95_lo", std::max(0.0, center - half)},
                   {"ci95_hi", std::min(1.0, center + half)},
                   {"resolved_rate", static_cast<double>(resolved) / n},
                   {"anchorless_rate", static_cast<double>(anchorless) / n},
                   {"trials", n}};
    rep.runtime_seconds = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// align-error: coarse and fine stage errors vs simulator truth

inline ExperimentReport cmd_alignment_error(const sim::Scenario& base, std::size_t trials, std::uint64_t seed,
                                            const PipelineConfig& cfg = {}) {
    if (trials < 1)
        fail(Errc::invalid_input, "eval_cli", "need at least one trial");
    detail::Stopwatch clock;
    ExperimentReport rep;
    rep.id = "align-error";
    rep.params = {{"trials", static_cast<double>(trials)}, {"seed", static_cast<double>(seed)}};

    double worst_coarse_ms = 0.0, worst_fine = 0.0, sum_fine = 0.0;
    std::size_t n_fine = 0;
    bool coarse_in_window = true;

    for (std::size_t t = 0; t < trials; ++t) {
        sim::Scenario scn = base;
        scn.rng_seed = rng::derive_seed(seed, t);
        PipelineResult res = run_pipeline(scn, coarse::TargetPoint{base.sources.front().position}, cfg);

        // per-mic errors against the reference mic picked by the solver
        const std::size_t ref = res.solution.reference_mic;
        double trial_coarse = 0.0, trial_fine = 0.0;
        for (const auto& w : res.windows) {
            const double truth = res.rec.pair_delay(w.mic_a, w.mic_b, res.desired_emitter);
            const double err = std::abs(w.tau_hat - truth);
            trial_coarse = std::max(trial_coarse, err * 1e3);
            if (err > w.e_delta) coarse_in_window = false;
        }
        for (std::size_t mi = 0; mi < res.rec.mic_count(); ++mi) {
            if (mi == ref || !res.solution.in_component[mi]) continue;
            const double truth = res.rec.pair_delay(mi, ref, res.desired_emitter);
            const double err = std::abs(res.solution.shift[mi] - truth) * scn.rate;
            trial_fine = std::max(trial_fine, err);
            sum_fine += err;
            ++n_fine;
        }
        worst_coarse_ms = std::max(worst_coarse_ms, trial_coarse);
        worst_fine = std::max(worst_fine, trial_fine);

        ExperimentReport::Trial trial;
        trial.seed = scn.rng_seed;
        trial.fields = {{"coarse_max_error_ms", trial_coarse}, {"fine_max_error_samples", trial_fine}};
        rep.trials.push_back(std::move(trial));
    }

    rep.summary = {{"coarse_max_error_ms", worst_coarse_ms},
                   {"coarse_within_window", coarse_in_window ? 1.0 : 0.0},
                   {"fine_max_error_samples", worst_fine},
                   {"fine_mean_error_samples", n_fine ? sum_fine / static_cast<double>(n_fine) : 0.0}};
    rep.runtime_seconds = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// snr-sweep: enhancement gain vs microphone count

inline ExperimentReport cmd_snr_vs_miccount(const sim::Scenario& scn, const std::vector<std::size_t>& counts,
                                            std::uint64_t seed, const PipelineConfig& cfg = {}) {
    detail::Stopwatch clock;
    for (std::size_t n : counts)
        if (n < 1 || n > scn.mics.size())
            fail(Errc::invalid_input, "eval_cli", "mic count outside scenario range");

    sim::Scenario run_scn = scn;
    run_scn.rng_seed = seed ? seed : scn.rng_seed;
    sim::RecordingSet full = sim::simulate(run_scn);
    std::size_t desired = 0;
    for (std::size_t si = 0; si < full.emitter_count(); ++si)
        if (full.emitters[si].role == sim::SourceRole::Desired) {
            desired = si;
            break;
        }
    const double base_snr = beam::single_mic_snr_db(full, 0, desired);
    const double base_sinr = beam::single_mic_sinr_db(full, 0, desired);

    const auto& cspec = std::get<sim::ChirpWaveform>(run_scn.chirp_device.waveform).spec;
    auto arrivals_full = detect::detect_chirps(full, cspec, cfg.detect);

    ExperimentReport rep;
    rep.id = "snr-sweep";
    rep.params = {{"seed", static_cast<double>(run_scn.rng_seed)}};

    for (std::size_t n : counts) {
        ExperimentReport::Trial trial;
        trial.seed = run_scn.rng_seed;
        if (n == 1) {
            trial.fields = {{"mics", 1.0},
                            {"snr_gain_weighted_db", 0.0},
                            {"snr_gain_uniform_db", 0.0},
                            {"sinr_weighted_db", base_sinr},
                            {"sinr_uniform_db", base_sinr}};
            rep.trials.push_back(std::move(trial));
            continue;
        }
        sim::RecordingSet rec = sim::take_mics(full, n);
        std::vector<std::vector<detect::ChirpArrival>> arrivals(arrivals_full.begin(),
                                                                arrivals_full.begin() + static_cast<std::ptrdiff_t>(n));
        auto ts = detect::pick_common_emission(arrivals, cspec.period);

        sim::Scenario sub = run_scn;
        sub.mics.resize(n);
        auto windows = coarse::build_windows(sim::assumed_view(sub), coarse::TargetPoint{scn.sources.front().position},
                                             ts);
        auto peaksets = fine::correlate_pairs(rec, windows, fine::default_max_lag(windows, rec.rate), cfg.fine);
        auto assignment = fine::resolve(peaksets, cfg.fine);
        if (assignment.status != fine::AssignStatus::Resolved)
            fail(Errc::consistency_failure, "fine_align", "sweep scenario did not resolve");
        auto sol = beam::solve_weights(assignment, peaksets, rec.mic_count(), rec.rate, cfg.beam);
        auto weighted = beam::delay_and_sum(rec, sol, desired);
        auto uniform = beam::delay_and_sum(rec, beam::uniform_variant(sol), desired);

        trial.fields = {{"mics", static_cast<double>(n)},
                        {"snr_gain_weighted_db", weighted.snr_db - base_snr},
                        {"snr_gain_uniform_db", uniform.snr_db - base_snr},
                        {"sinr_weighted_db", weighted.sinr_db},
                        {"sinr_uniform_db", uniform.sinr_db}};
        rep.trials.push_back(std::move(trial));
    }

    rep.summary = {{"counts", static_cast<double>(counts.size())},
                   {"single_mic_snr_db", base_snr},
                   {"single_mic_sinr_db", base_sinr}};
    rep.runtime_seconds = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// chirp-grid: detection accuracy vs beacon duration and distance

inline ExperimentReport cmd_chirp_grid(const std::vector<double>& durations, const std::vector<double>& distances,
                                       std::uint64_t seed, const detect::DetectConfig& dcfg = {}) {
    if (durations.empty() || distances.empty())
        fail(Errc::invalid_input, "eval_cli", "duration and distance grids must be nonempty");
    detail::Stopwatch clock;

    ExperimentReport rep;
    rep.id = "chirp-grid";
    rep.params = {{"seed", static_cast<double>(seed)}};

    const double rate = 44100.0;
    const double period = 0.5;
    const double level = 2.0;
    const double noise_rms = 0.02;
    const std::size_t n_beacons = 10;

    std::size_t cell = 0;
    for (double dur : durations) {
        for (double dist : distances) {
            ChirpSpec cs;
            cs.duration = dur;
            cs.period = period;
            SampleBuffer one = synth_chirp(cs, rate); // validates the spec; throws invalid-spec for dur <= 0

            sim::Scenario scn;
            scn.rate = rate;
            scn.duration = period * (n_beacons + 0.5);
            scn.c_true = 342.0;
            scn.noise_rms = noise_rms;
            scn.rng_seed = rng::derive_seed(seed, cell);
            sim::MicSpec mic;
            mic.true_position = {0.0, 0.0, 0.0};
            mic.measured_position = mic.true_position;
            scn.mics.push_back(mic);
            sim::SourceSpec dummy; // satisfies the "at least one desired" invariant, silent
            dummy.role = sim::SourceRole::Desired;
            dummy.position = {0.0, 1.0, 0.0};
            dummy.level = 0.0;
            dummy.waveform = sim::BandNoiseWaveform{100.0, 500.0};
            scn.sources.push_back(dummy);
            scn.chirp_device.position = {dist, 0.0, 0.0};
            scn.chirp_device.level = level;
            scn.chirp_device.role = sim::SourceRole::Reference;
            scn.chirp_device.waveform = sim::ChirpWaveform{cs};

            sim::RecordingSet rec = sim::simulate(scn, false);
            const double amp = level / std::max(dist, sim::kDistanceFloor);
            const double chirp_power = amp * amp * one.rms() * one.rms(); // during the sweep
            const double snr_db = 10.0 * std::log10(chirp_power / (noise_rms * noise_rms));

            auto arrivals = detect::detect_chirps_single(rec.mics[0], cs, 0, dcfg);
            double mae = -1.0;
            bool failed = arrivals.size() < 2;
            if (!failed) mae = detect::detection_mae(arrivals, cs.period, rate);

            ExperimentReport::Trial trial;
            trial.seed = scn.rng_seed;
            trial.fields = {{"duration_s", dur},
                            {"distance_m", dist},
                            {"snr_db", snr_db},
                            {"detected", failed ? 0.0 : 1.0},
                            {"arrivals", static_cast<double>(arrivals.size())},
                            {"mae_samples", mae}};
            rep.trials.push_back(std::move(trial));
            ++cell;
        }
    }
    rep.summary = {{"cells", static_cast<double>(cell)}};
    rep.runtime_seconds = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// nlos: multipath combining gain vs obstacle transmissivity

inline ExperimentReport cmd_nlos(const sim::Scenario& base, const std::vector<double>& transmissivities,
                                 std::uint64_t seed, const PipelineConfig& cfg = {}) {
    detail::Stopwatch clock;

    // the obstructed cells are the entries marked < 1 in the scenario file
    std::size_t nlos_source = base.sources.size(), nlos_mic = 0;
    for (std::size_t si = 0; si < base.sources.size(); ++si)
        for (std::size_t mi = 0; mi < base.sources[si].obstacle_gains.size(); ++mi)
            if (base.sources[si].obstacle_gains[mi] < 1.0 && nlos_source == base.sources.size()) {
                nlos_source = si;
                nlos_mic = mi;
            }
    if (nlos_source == base.sources.size())
        fail(Errc::invalid_input, "eval_cli", "scenario has no obstacle_gains entry below 1");
    // no echo taps is legal: multipath and direct-only enhancement coincide

    ExperimentReport rep;
    rep.id = "nlos";
    rep.params = {{"seed", static_cast<double>(seed)}, {"nlos_mic", static_cast<double>(nlos_mic)}};

    for (double g : transmissivities) {
        sim::Scenario scn = base;
        // one seed for the whole sweep: identical noise isolates the obstacle effect
        scn.rng_seed = seed ? seed : base.rng_seed;
        for (auto& s : scn.sources)
            for (auto& og : s.obstacle_gains)
                if (og < 1.0) og = g;

        PipelineResult res = run_pipeline(scn, coarse::TargetPoint{scn.sources.front().position}, cfg);

        // Obstructed-mic view: the path inventory is the resolved direct
        // path (relative value 1) plus the discovered extra taps (relative
        // peak-value ratios). The single-path reference keeps only the
        // strongest of them; the multipath version combines all.
        const std::size_t n = res.rec.mic_count();
        const double w_mic = std::max(res.solution.weight[nlos_mic], 1e-12);
        struct Path {
            double shift;
            double rel;
        };
        std::vector<Path> paths{{res.solution.shift[nlos_mic], 1.0}};
        for (const auto& p : res.solution.extra_paths[nlos_mic]) paths.push_back({p.shift, p.weight / w_mic});
        std::size_t strongest = 0;
        for (std::size_t i = 1; i < paths.size(); ++i)
            if (paths[i].rel > paths[strongest].rel) strongest = i;

        auto single_solution = [&](bool all_paths) {
            beam::AlignmentSolution s;
            s.reference_mic = nlos_mic;
            s.shift.assign(n, 0.0);
            s.weight.assign(n, 0.0);
            s.selected.assign(n, false);
            s.in_component.assign(n, false);
            s.extra_paths.assign(n, {});
            s.selected[nlos_mic] = true;
            s.in_component[nlos_mic] = true;
            s.weight[nlos_mic] = 1.0;
            if (all_paths) {
                s.shift[nlos_mic] = paths.front().shift;
                for (std::size_t i = 1; i < paths.size(); ++i)
                    s.extra_paths[nlos_mic].push_back({paths[i].shift, paths[i].rel});
            } else {
                s.shift[nlos_mic] = paths[strongest].shift;
            }
            return s;
        };
        beam::EnhancedSignal one_path = beam::delay_and_sum(res.rec, single_solution(false), res.desired_emitter);
        beam::EnhancedSignal multi_path = beam::delay_and_sum(res.rec, single_solution(true), res.desired_emitter);

        beam::EnhancedSignal array_direct =
            beam::delay_and_sum(res.rec, beam::direct_only_variant(res.solution), res.desired_emitter);

        ExperimentReport::Trial trial;
        trial.seed = scn.rng_seed;
        trial.fields = {{"transmissivity", g},
                        {"extra_paths_found", static_cast<double>(paths.size() - 1)},
                        {"single_mic_gain_db", multi_path.snr_db - one_path.snr_db},
                        {"array_gain_db", res.enhanced.snr_db - array_direct.snr_db},
                        {"array_snr_db", res.enhanced.snr_db}};
        rep.trials.push_back(std::move(trial));
    }
    rep.summary = {{"settings", static_cast<double>(transmissivities.size())}};
    rep.runtime_seconds = clock.seconds();
    return rep;
}

} // namespace pointbeam::eval
