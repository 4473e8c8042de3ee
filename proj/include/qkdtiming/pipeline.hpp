#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "attack.hpp"
#include "core.hpp"
#include "delays.hpp"
#include "errors.hpp"
#include "gaussfit.hpp"
#include "histogram.hpp"
#include "simulate.hpp"

namespace qkdtiming {

struct AnalysisOptions {
    TimePs bin_width{10.0};
    FitOptions fit{};
    // absolute-timestamp window; events outside are ignored
    std::optional<TimePs> window_start;
    std::optional<TimePs> window_end;
};

/// The (class, detector) selections whose peak times the delay algebra needs.
inline const std::vector<std::pair<AnnouncedClass, DetectorId>>&
required_peaks() {
    using AC = AnnouncedClass;
    using D = DetectorId;
    static const std::vector<std::pair<AC, D>> req = {
        {AC::HsVs, D::H}, {AC::HsVs, D::V}, {AC::DsAs, D::H}, {AC::DsAs, D::V},
        {AC::DsAs, D::D}, {AC::DsAs, D::A}, {AC::Hd, D::H},   {AC::Vd, D::V},
        {AC::Dd, D::D},   {AC::Dd, D::H},   {AC::Ad, D::A},   {AC::Ad, D::H}};
    return req;
}

/// Extra selections fitted only to report the D/A detector offsets.
inline const std::vector<std::pair<AnnouncedClass, DetectorId>>&
optional_peaks() {
    using AC = AnnouncedClass;
    using D = DetectorId;
    static const std::vector<std::pair<AC, D>> opt = {{AC::HsVs, D::D},
                                                      {AC::HsVs, D::A}};
    return opt;
}

struct AnalysisResult {
    DelayReport report;
    PeakTable peaks;
    TimePs fold_center{0.0}; // shared unwrap center of all histograms
    std::map<std::pair<AnnouncedClass, DetectorId>, Histogram> histograms;
    std::map<std::pair<AnnouncedClass, DetectorId>, GaussianFit> fits;
};

namespace detail {

/// Peak time of one (class, detector) selection. Degenerate selections where
/// every folded phase is the same quantized value short-circuit to that exact
/// value with zero variance (a noise-free channel produces these).
inline std::optional<PeakTime> extract_peak(
    std::span<const DetectionEvent> events,
    const SiftingAnnouncement& announcements, AnnouncedClass cls,
    DetectorId det, TimePs period, const AnalysisOptions& opt,
    TimePs fold_center, Histogram* hist_out, GaussianFit* fit_out,
    bool required) {
    const Histogram hist =
        fold_events(events, announcements, cls, det, period, opt.bin_width,
                    fold_center);
    if (hist_out) *hist_out = hist;
    if (hist.empty()) {
        if (required)
            throw fit_error("no events for peak t(" + std::string(name_of(cls)) +
                            " -> " + std::string(name_of(det)) + ")");
        return std::nullopt;
    }

    // degenerate spike: all matching events share one folded phase
    bool first = true, all_same = true;
    TimePs phase0 = 0.0;
    for (const auto& e : events) {
        if (e.detector != det) continue;
        if (e.slot >= announcements.size() || announcements[e.slot] != cls)
            continue;
        const TimePs ph = detail::wrap_into(folded_phase(e, period),
                                            fold_center - period / 2.0, period);
        if (first) {
            phase0 = ph;
            first = false;
        } else if (ph != phase0) {
            all_same = false;
            break;
        }
    }
    if (!first && all_same)
        return PeakTime{cls, det, phase0, 0.0};

    try {
        const GaussianFit fit = fit_gaussian(hist, opt.fit);
        if (fit_out) *fit_out = fit;
        return PeakTime{cls, det, fit.peak.mean, fit.mean_variance};
    } catch (const fit_error& e) {
        if (required)
            throw fit_error("peak t(" + std::string(name_of(cls)) + " -> " +
                            std::string(name_of(det)) + "): " + e.what());
        return std::nullopt;
    }
}

} // namespace detail

inline std::vector<DetectionEvent> apply_window(
    std::span<const DetectionEvent> events, const AnalysisOptions& opt) {
    std::vector<DetectionEvent> out;
    out.reserve(events.size());
    for (const auto& e : events) {
        if (opt.window_start && e.timestamp < *opt.window_start) continue;
        if (opt.window_end && e.timestamp >= *opt.window_end) continue;
        out.push_back(e);
    }
    return out;
}

/// Full analysis: fold each required (class, detector) selection around one
/// shared center, fit the peaks, and solve for the seven relative delays.
inline AnalysisResult analyze_events(std::span<const DetectionEvent> all_events,
                                     const SiftingAnnouncement& announcements,
                                     TimePs period,
                                     const AnalysisOptions& opt = {},
                                     const std::string& session = {}) {
    std::vector<DetectionEvent> windowed;
    std::span<const DetectionEvent> events = all_events;
    if (opt.window_start || opt.window_end) {
        windowed = apply_window(all_events, opt);
        events = windowed;
    }
    if (events.empty())
        throw fit_error("no events for peak t(" +
                        std::string(name_of(required_peaks().front().first)) +
                        " -> " +
                        std::string(name_of(required_peaks().front().second)) +
                        ") (event selection is empty)");

    AnalysisResult result;
    // one pooled coarse pass fixes the unwrap center for every selection, so
    // peak-time differences are never off by a period
    const Histogram pooled = fold_events(events, announcements, std::nullopt,
                                         std::nullopt, period, opt.bin_width);
    result.fold_center = pooled.origin + period / 2.0;

    for (const auto& [cls, det] : required_peaks()) {
        Histogram hist;
        GaussianFit fit;
        auto peak = detail::extract_peak(events, announcements, cls, det,
                                         period, opt, result.fold_center,
                                         &hist, &fit, /*required=*/true);
        result.histograms[{cls, det}] = std::move(hist);
        if (fit.peak.sigma > 0.0) result.fits[{cls, det}] = std::move(fit);
        result.peaks.set(*peak);
    }
    for (const auto& [cls, det] : optional_peaks()) {
        Histogram hist;
        GaussianFit fit;
        auto peak = detail::extract_peak(events, announcements, cls, det,
                                         period, opt, result.fold_center,
                                         &hist, &fit, /*required=*/false);
        if (peak) {
            result.histograms[{cls, det}] = std::move(hist);
            if (fit.peak.sigma > 0.0) result.fits[{cls, det}] = std::move(fit);
            result.peaks.set(*peak);
        }
    }
    result.report = solve_delays(result.peaks, session);
    return result;
}

// --- coverage ----------------------------------------------------------------

struct CoverageStats {
    struct PerLaser {
        LaserId laser;
        std::uint64_t covered{0};
        std::uint64_t trials{0};
        double coverage() const {
            return trials ? static_cast<double>(covered) /
                                static_cast<double>(trials)
                          : 0.0;
        }
    };
    std::vector<PerLaser> per_laser;
    std::uint64_t pipeline_failures{0};
    std::vector<std::string> failure_messages;

    double pooled_coverage() const {
        std::uint64_t c = 0, t = 0;
        for (const auto& p : per_laser) {
            c += p.covered;
            t += p.trials;
        }
        return t ? static_cast<double>(c) / static_cast<double>(t) : 0.0;
    }
};

/// Simulate-and-recover trial over independent seeds: the fraction of
/// (seed, laser) trials in which the reported 3-sigma interval covers the
/// planted relative delay. Pipeline failures count as non-covering trials.
inline CoverageStats coverage_trial(const EmissionConfig& emission,
                                    const ChannelConfig& channel,
                                    std::uint64_t n_slots, int n_seeds,
                                    std::uint64_t base_seed = 1,
                                    const AnalysisOptions& opt = {},
                                    int n_threads = 1) {
    if (n_seeds < 30)
        throw config_error("coverage_trial: need at least 30 seeds");
    CoverageStats stats;
    for (LaserId laser : reported_lasers)
        stats.per_laser.push_back({laser, 0, 0});

    const TimePs ref = emission.delay_of(
        LaserId{Polarization::H, IntensityLevel::Signal});
    for (int s = 0; s < n_seeds; ++s) {
        const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
        try {
            const PassResult pass =
                simulate_pass(emission, channel, n_slots, seed, n_threads);
            const AnalysisResult analysis = analyze_events(
                pass.events, pass.announcements, emission.period, opt);
            for (std::size_t i = 0; i < reported_lasers.size(); ++i) {
                const DelayEstimate& est =
                    analysis.report.estimate(reported_lasers[i]);
                const TimePs truth = emission.delay_of(reported_lasers[i]) - ref;
                ++stats.per_laser[i].trials;
                if (std::abs(est.value - truth) <= est.three_sigma)
                    ++stats.per_laser[i].covered;
            }
        } catch (const std::exception& e) {
            ++stats.pipeline_failures;
            stats.failure_messages.push_back("seed " + std::to_string(seed) +
                                             ": " + e.what());
            for (auto& p : stats.per_laser) ++p.trials; // non-covering
        }
    }
    return stats;
}

} // namespace qkdtiming
