#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "histogram.hpp"
#include "simulate.hpp"

namespace qkdtiming {

/// Two non-overlapping time gates of a common width, one per intensity class.
struct GateConfig {
    TimePs signal_center{0.0};
    TimePs decoy_center{0.0};
    TimePs width{0.0};

    TimePs separation() const { return std::abs(decoy_center - signal_center); }

    void validate() const {
        if (!(width > 0.0))
            throw config_error("gates: width must be positive");
        if (!(separation() > width))
            throw config_error("gates: gates overlap (separation must exceed width)");
    }
};

enum class GateLabel : std::uint8_t { Signal = 0, Decoy = 1, Discard = 2 };

namespace detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Mass of N(mu, sigma^2) inside [lo, hi], evaluated through erfc so that far
/// tails keep full relative precision.
inline double gaussian_mass(double mu, double sigma, double lo, double hi) {
    const double a = (lo - mu) / (sigma * std::numbers::sqrt2);
    const double b = (hi - mu) / (sigma * std::numbers::sqrt2);
    return 0.5 * (std::erfc(a) - std::erfc(b));
}

} // namespace detail

/// Fraction of a Gaussian pulse of width sigma caught by a gate of full width
/// gate_width centered on the pulse: erf(w / (2 sigma sqrt(2))).
inline double acceptance_fraction(TimePs gate_width, TimePs sigma) {
    if (!(gate_width > 0.0))
        throw config_error("acceptance_fraction: gate width must be positive");
    if (!(sigma > 0.0))
        throw config_error("acceptance_fraction: sigma must be positive");
    return std::erf(gate_width / (2.0 * sigma * std::numbers::sqrt2));
}

/// Smallest gate width achieving the target acceptance fraction; the exact
/// inverse of acceptance_fraction, solved to far below 0.01 ps.
inline TimePs min_gate_width(double target_fraction, TimePs sigma) {
    if (!(target_fraction > 0.0 && target_fraction < 1.0))
        throw config_error("min_gate_width: target must lie in (0,1)");
    if (!(sigma > 0.0))
        throw config_error("min_gate_width: sigma must be positive");
    // bisection on the monotone acceptance curve, then Newton polish
    double lo = 0.0, hi = sigma;
    while (acceptance_fraction(hi, sigma) < target_fraction) hi *= 2.0;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (acceptance_fraction(mid, sigma) < target_fraction ? lo : hi) = mid;
    }
    double w = 0.5 * (lo + hi);
    for (int i = 0; i < 4; ++i) {
        const double arg = w / (2.0 * sigma * std::numbers::sqrt2);
        const double deriv = std::exp(-arg * arg) /
                             (sigma * std::numbers::sqrt2 *
                              std::sqrt(std::numbers::pi));
        if (deriv <= 0.0) break;
        w -= (std::erf(arg) - target_fraction) / deriv;
    }
    return w;
}

/// Probability that an intercepted photon lands in the wrong gate, conditional
/// on landing in either gate. Pulse densities are N(0, sigma^2) and
/// N(separation, sigma^2) with each gate centered on its own pulse; the value
/// is symmetric between the two pulses.
inline double misclassification_probability(TimePs separation, TimePs gate_width,
                                            TimePs sigma) {
    if (!(sigma > 0.0))
        throw config_error("misclassification_probability: sigma must be positive");
    if (!(gate_width > 0.0))
        throw config_error("misclassification_probability: gate width must be positive");
    if (!(separation > gate_width))
        throw config_error("misclassification_probability: gates overlap");
    const double own = acceptance_fraction(gate_width, sigma);
    const double wrong = detail::gaussian_mass(0.0, sigma,
                                               separation - gate_width / 2.0,
                                               separation + gate_width / 2.0);
    return wrong / (own + wrong);
}

/// Mass of one pulse falling outside both gates (the discarded share).
inline double discard_fraction_analytic(TimePs separation, TimePs gate_width,
                                        TimePs sigma) {
    const double own = acceptance_fraction(gate_width, sigma);
    const double wrong = detail::gaussian_mass(0.0, sigma,
                                               separation - gate_width / 2.0,
                                               separation + gate_width / 2.0);
    return 1.0 - own - wrong;
}

/// Classify one folded detection time against the gates.
inline GateLabel classify_time(TimePs phase, const GateConfig& gates) {
    if (std::abs(phase - gates.signal_center) <= gates.width / 2.0)
        return GateLabel::Signal;
    if (std::abs(phase - gates.decoy_center) <= gates.width / 2.0)
        return GateLabel::Decoy;
    return GateLabel::Discard;
}

/// Fold each event modulo the period and classify it against the gates. The
/// fold window is centered between the gates so neither straddles the seam.
inline std::vector<GateLabel> classify_events(std::span<const DetectionEvent> events,
                                              const GateConfig& gates,
                                              TimePs period) {
    gates.validate();
    if (!(period > 0.0))
        throw config_error("classify_events: period must be positive");
    const TimePs mid = 0.5 * (gates.signal_center + gates.decoy_center);
    const TimePs lo = mid - period / 2.0;
    std::vector<GateLabel> labels(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        const TimePs phase =
            detail::wrap_into(folded_phase(events[i], period), lo, period);
        labels[i] = classify_time(phase, gates);
    }
    return labels;
}

/// Gate-attack summary: the analytic geometry numbers plus, when ground truth
/// is available, the empirical confusion counts of truth class vs label.
struct AttackReport {
    GateConfig gates;
    TimePs sigma{0.0}; // effective pulse sigma seen by the eavesdropper

    // geometry-only values (symmetric between the pulses)
    double analytic_acceptance{0.0};  // own-gate mass, either pulse
    double analytic_wrong_gate{0.0};  // other-gate mass, either pulse
    double analytic_failure{0.0};     // conditional misclassification
    double analytic_discard{0.0};

    // headline numbers: empirical when truth was supplied, analytic otherwise
    double acceptance_fraction_signal{0.0};
    double acceptance_fraction_decoy{0.0};
    double discard_fraction{0.0};
    double failure_probability{0.0};
    double distinguish_probability{0.0};

    bool has_empirical{false};
    // rows: truth signal, decoy, other (vacuum-slot / background clicks);
    // columns: labeled signal, labeled decoy, discarded
    std::array<std::array<std::uint64_t, 3>, 3> confusion{};

    std::uint64_t accepted_events() const {
        std::uint64_t n = 0;
        for (int r = 0; r < 3; ++r) n += confusion[r][0] + confusion[r][1];
        return n;
    }
};

/// Analytics plus empirical confusion for an event stream. When `pair_filter`
/// is set, only events whose slot truth is a laser of that polarization are
/// counted, which measures the per-pair failure rate the gate geometry is
/// designed around. The empirical failure is conditional on acceptance and
/// counted over signal/decoy truth only.
inline AttackReport attack_report(std::span<const DetectionEvent> events,
                                  std::span<const TruthRecord> truth,
                                  const GateConfig& gates, TimePs period,
                                  TimePs sigma,
                                  std::optional<Polarization> pair_filter =
                                      std::nullopt) {
    gates.validate();
    AttackReport report;
    report.gates = gates;
    report.sigma = sigma;
    report.analytic_acceptance = acceptance_fraction(gates.width, sigma);
    report.analytic_wrong_gate = detail::gaussian_mass(
        0.0, sigma, gates.separation() - gates.width / 2.0,
        gates.separation() + gates.width / 2.0);
    report.analytic_failure =
        misclassification_probability(gates.separation(), gates.width, sigma);
    report.analytic_discard =
        1.0 - report.analytic_acceptance - report.analytic_wrong_gate;

    report.acceptance_fraction_signal = report.analytic_acceptance;
    report.acceptance_fraction_decoy = report.analytic_acceptance;
    report.discard_fraction = report.analytic_discard;
    report.failure_probability = report.analytic_failure;
    report.distinguish_probability = 1.0 - report.analytic_failure;

    if (truth.empty()) return report;

    // per-slot transmitter truth (the per-slot record, not background extras)
    std::uint64_t max_slot = 0;
    for (const auto& e : events) max_slot = std::max(max_slot, e.slot);
    std::vector<std::uint8_t> slot_source(max_slot + 1, TruthRecord::kVacuum);
    for (const auto& r : truth) {
        if (r.is_background()) continue;
        if (r.slot > max_slot) continue;
        slot_source[r.slot] = r.source;
    }

    const std::vector<GateLabel> labels = classify_events(events, gates, period);
    std::array<std::uint64_t, 3> class_totals{}; // events entering the matrix
    for (std::size_t i = 0; i < events.size(); ++i) {
        const std::uint8_t src = slot_source[events[i].slot];
        int row = 2;
        if (src < 8) {
            const LaserId laser = LaserId::from_index(src);
            if (pair_filter && laser.pol != *pair_filter) continue;
            row = laser.level == IntensityLevel::Signal ? 0 : 1;
        } else if (pair_filter) {
            continue;
        }
        ++report.confusion[row][static_cast<int>(labels[i])];
        ++class_totals[row];
    }
    report.has_empirical = true;

    const auto& c = report.confusion;
    const double sig_total = static_cast<double>(class_totals[0]);
    const double dec_total = static_cast<double>(class_totals[1]);
    const double all_total =
        static_cast<double>(class_totals[0] + class_totals[1] + class_totals[2]);
    if (sig_total > 0)
        report.acceptance_fraction_signal =
            static_cast<double>(c[0][0]) / sig_total;
    if (dec_total > 0)
        report.acceptance_fraction_decoy =
            static_cast<double>(c[1][1]) / dec_total;
    if (all_total > 0)
        report.discard_fraction =
            static_cast<double>(c[0][2] + c[1][2] + c[2][2]) / all_total;
    const std::uint64_t assigned = c[0][0] + c[0][1] + c[1][0] + c[1][1];
    if (assigned > 0) {
        report.failure_probability =
            static_cast<double>(c[0][1] + c[1][0]) /
            static_cast<double>(assigned);
        report.distinguish_probability = 1.0 - report.failure_probability;
    }
    return report;
}

} // namespace qkdtiming
