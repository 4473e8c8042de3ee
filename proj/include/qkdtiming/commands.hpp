#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "attack.hpp"
#include "config.hpp"
#include "core.hpp"
#include "errors.hpp"
#include "logio.hpp"
#include "pipeline.hpp"
#include "simulate.hpp"

namespace qkdtiming {

struct LoadedConfig {
    SessionConfig cfg;
    std::string text; // raw bytes, hashed into the run manifest
};

inline LoadedConfig load_config_file(const std::string& path) {
    LoadedConfig lc;
    lc.text = detail::read_file(path);
    lc.cfg = parse_session_config(lc.text);
    return lc;
}

namespace detail {

inline void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw io_error("cannot create output directory " + dir + ": " +
                       ec.message());
}

} // namespace detail

/// simulate: run the pass and emit the event, truth and announcement logs
/// plus a manifest recording the config hash and seed.
inline PassResult cmd_simulate(const LoadedConfig& config,
                               const std::string& output_dir) {
    const SessionConfig& cfg = config.cfg;
    cfg.validate();
    detail::ensure_directory(output_dir);
    PassResult pass = simulate_pass(cfg.emission, cfg.channel, cfg.n_slots,
                                    cfg.seed, cfg.n_threads);
    write_events(output_dir + "/events.csv", pass.events);
    write_truth(output_dir + "/truth.csv", pass.truth);
    write_announcements(output_dir + "/announcements.csv", pass.announcements);
    write_manifest(output_dir + "/manifest.txt", fnv1a_hash(config.text),
                   cfg.seed, cfg.n_slots);
    return pass;
}

/// analyze: fold, fit and solve; emit the per-laser delay report and the
/// per-(class, detector) histogram dumps.
inline AnalysisResult cmd_analyze(const SessionConfig& cfg,
                                  const std::string& events_path,
                                  const std::string& announcements_path,
                                  const std::string& output_dir) {
    cfg.validate();
    detail::ensure_directory(output_dir);
    const std::vector<DetectionEvent> events = read_events(events_path);
    const SiftingAnnouncement announcements =
        read_announcements(announcements_path);
    AnalysisResult result =
        analyze_events(events, announcements, cfg.emission.period,
                       cfg.analysis, cfg.session_label);
    write_delay_report(output_dir + "/delays.csv", result.report);
    for (const auto& [key, hist] : result.histograms) {
        const std::string name = "hist_" +
                                 std::string(file_token(key.first)) + "_" +
                                 std::string(name_of(key.second)) + ".csv";
        write_histogram(output_dir + "/" + name, hist);
    }
    return result;
}

/// Gate geometry for the configured pair: explicit centers when the config
/// carries them, otherwise fitted from the logs (which requires the
/// announcement log). The width comes from gate_width_ps or, failing that,
/// from the target acceptance fraction.
inline GateConfig derive_gates(const SessionConfig& cfg,
                               std::span<const DetectionEvent> events,
                               const SiftingAnnouncement* announcements) {
    GateConfig gates;
    const TimePs sigma = attack_sigma(cfg);
    if (cfg.attack.gate_width)
        gates.width = *cfg.attack.gate_width;
    else if (cfg.attack.target_acceptance)
        gates.width = min_gate_width(*cfg.attack.target_acceptance, sigma);
    else
        throw config_error(
            "attack: need gate_width_ps or gate_target_acceptance");

    if (cfg.attack.signal_center && cfg.attack.decoy_center) {
        gates.signal_center = *cfg.attack.signal_center;
        gates.decoy_center = *cfg.attack.decoy_center;
    } else {
        if (!announcements)
            throw config_error("attack: no gate centers in the config and no "
                               "announcement log to derive them from");
        const Polarization pair = cfg.attack.pair;
        const AnnouncedClass signal_cls =
            announced_class_for(LaserId{pair, IntensityLevel::Signal});
        const AnnouncedClass decoy_cls =
            announced_class_for(LaserId{pair, IntensityLevel::Decoy});
        const DetectorId det = detector_for(pair);
        const Histogram pooled =
            fold_events(events, *announcements, std::nullopt, std::nullopt,
                        cfg.emission.period, cfg.analysis.bin_width);
        const TimePs center = pooled.origin + cfg.emission.period / 2.0;
        const auto fit_mean = [&](AnnouncedClass cls) {
            const Histogram h =
                fold_events(events, *announcements, cls, det,
                            cfg.emission.period, cfg.analysis.bin_width, center);
            if (h.empty())
                throw fit_error("attack: no events for gate peak t(" +
                                std::string(name_of(cls)) + " -> " +
                                std::string(name_of(det)) + ")");
            return fit_gaussian(h, cfg.analysis.fit).peak.mean;
        };
        gates.signal_center = fit_mean(signal_cls);
        gates.decoy_center = fit_mean(decoy_cls);
    }
    gates.validate();
    return gates;
}

/// attack: classify the event stream against the gates and report. With a
/// truth log the report carries the empirical confusion counts over the
/// gate-defining laser pair; without one it is analytic-only.
inline AttackReport cmd_attack(const SessionConfig& cfg,
                               const std::string& events_path,
                               const std::optional<std::string>& truth_path,
                               const std::optional<std::string>& announcements_path,
                               const std::string& output_dir) {
    cfg.validate();
    detail::ensure_directory(output_dir);
    const std::vector<DetectionEvent> events = read_events(events_path);

    std::optional<SiftingAnnouncement> announcements;
    if (announcements_path)
        announcements = read_announcements(*announcements_path);
    const GateConfig gates = derive_gates(
        cfg, events, announcements ? &*announcements : nullptr);

    std::vector<TruthRecord> truth;
    if (truth_path) truth = read_truth(*truth_path);

    const AttackReport report =
        attack_report(events, truth, gates, cfg.emission.period,
                      attack_sigma(cfg), cfg.attack.pair);
    write_attack_report(output_dir + "/attack_report.txt", report);
    return report;
}

/// sweep: `separation_ps,width_ps,failure_prob` grid for the configured pulse
/// width; combinations with overlapping gates are skipped.
inline void cmd_sweep(const SessionConfig& cfg, TimePs sep_min, TimePs sep_max,
                      TimePs sep_step, TimePs width_min, TimePs width_max,
                      TimePs width_step, const std::string& output_path) {
    cfg.validate();
    if (!(sep_step > 0.0) || !(width_step > 0.0))
        throw config_error("sweep: step sizes must be positive");
    const TimePs sigma = attack_sigma(cfg);
    detail::LineWriter out(output_path);
    out.write("separation_ps,width_ps,failure_prob\n");
    for (TimePs sep = sep_min; sep <= sep_max + 1e-9; sep += sep_step) {
        for (TimePs w = width_min; w <= width_max + 1e-9; w += width_step) {
            if (!(sep > w)) continue;
            out.printf("%.4f,%.4f,%.8f\n", sep, w,
                       misclassification_probability(sep, w, sigma));
        }
    }
    out.close();
}

/// coverage: repeated simulate-and-recover trials; per-laser and pooled
/// 3-sigma coverage rows.
inline CoverageStats cmd_coverage(const SessionConfig& cfg, int n_seeds,
                                  std::uint64_t base_seed,
                                  const std::string& output_path) {
    cfg.validate();
    CoverageStats stats =
        coverage_trial(cfg.emission, cfg.channel, cfg.n_slots, n_seeds,
                       base_seed, cfg.analysis, cfg.n_threads);
    detail::LineWriter out(output_path);
    out.write("laser,covered,trials,coverage\n");
    for (const auto& p : stats.per_laser)
        out.printf("%s,%llu,%llu,%.6f\n",
                   std::string(name_of(p.laser)).c_str(),
                   static_cast<unsigned long long>(p.covered),
                   static_cast<unsigned long long>(p.trials), p.coverage());
    std::uint64_t covered = 0, trials = 0;
    for (const auto& p : stats.per_laser) {
        covered += p.covered;
        trials += p.trials;
    }
    out.printf("pooled,%llu,%llu,%.6f\n",
               static_cast<unsigned long long>(covered),
               static_cast<unsigned long long>(trials),
               stats.pooled_coverage());
    out.printf("pipeline_failures,%llu\n",
               static_cast<unsigned long long>(stats.pipeline_failures));
    for (const auto& msg : stats.failure_messages)
        out.printf("# %s\n", msg.c_str());
    out.close();
    return stats;
}

} // namespace qkdtiming
