#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "core.hpp"
#include "errors.hpp"
#include "gaussfit.hpp"
#include "logio.hpp"
#include "pipeline.hpp"

namespace qkdtiming {

struct AttackConfig {
    std::optional<TimePs> gate_width;
    std::optional<double> target_acceptance; // used when gate_width is absent
    std::optional<TimePs> signal_center;
    std::optional<TimePs> decoy_center;
    Polarization pair{Polarization::V}; // laser pair the gates are built for
    TimePs eve_jitter_sigma{0.0};       // convolved into the pulse width
};

/// One configuration drives every subcommand: transmitter, channel, run
/// length and seed, analysis options and attack geometry.
struct SessionConfig {
    std::string session_label;
    std::uint64_t seed{1};
    std::uint64_t n_slots{1000000};
    int n_threads{1};
    EmissionConfig emission;
    ChannelConfig channel;
    AnalysisOptions analysis;
    AttackConfig attack;

    void validate() const {
        emission.validate();
        channel.validate();
        if (n_slots < 1)
            throw config_error("n_slots must be >= 1");
        if (n_threads < 1)
            throw config_error("n_threads must be >= 1");
        if (!(analysis.bin_width > 0.0))
            throw config_error("bin_width_ps must be positive");
        if (!(analysis.fit.tolerance > 0.0))
            throw config_error("fit_tolerance must be positive");
        if (analysis.fit.max_iterations < 1)
            throw config_error("fit_max_iterations must be >= 1");
        if (!(analysis.fit.residual_window_sigmas > 0.0))
            throw config_error("residual_window_sigmas must be positive");
        if (analysis.window_start && analysis.window_end &&
            !(*analysis.window_start < *analysis.window_end))
            throw config_error("window_start_ps must precede window_end_ps");
        if (attack.gate_width && !(*attack.gate_width > 0.0))
            throw config_error("gate_width_ps must be positive");
        if (attack.target_acceptance &&
            !(*attack.target_acceptance > 0.0 && *attack.target_acceptance < 1.0))
            throw config_error("gate_target_acceptance must lie in (0,1)");
        if (!(attack.eve_jitter_sigma >= 0.0))
            throw config_error("eve_jitter_sigma_ps must be >= 0");
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
        s.remove_suffix(1);
    return s;
}

inline double config_double(std::string_view v, const std::string& key) {
    double out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw config_error("config: bad number for " + key + ": '" +
                           std::string(v) + "'");
    return out;
}

inline std::uint64_t config_u64(std::string_view v, const std::string& key) {
    std::uint64_t out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw config_error("config: bad integer for " + key + ": '" +
                           std::string(v) + "'");
    return out;
}

} // namespace detail

/// Parse `key = value` configuration text. '#' starts a comment; unknown keys
/// are rejected.
inline SessionConfig parse_session_config(std::string_view text) {
    SessionConfig cfg;
    detail::for_each_line(text, [&](std::string_view raw, std::size_t line_no) {
        std::string_view line = raw;
        if (auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) return;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw config_error("config line " + std::to_string(line_no) +
                               ": expected key = value");
        const std::string key{detail::trim(line.substr(0, eq))};
        const std::string_view value = detail::trim(line.substr(eq + 1));

        const auto num = [&] { return detail::config_double(value, key); };

        if (key == "session_label") {
            cfg.session_label = std::string(value);
        } else if (key == "seed") {
            cfg.seed = detail::config_u64(value, key);
        } else if (key == "n_slots") {
            cfg.n_slots = detail::config_u64(value, key);
        } else if (key == "n_threads") {
            cfg.n_threads = static_cast<int>(detail::config_u64(value, key));
        } else if (key == "period_ps") {
            cfg.emission.period = num();
        } else if (key == "mean_photons_signal") {
            cfg.emission.mean_photons_signal = num();
        } else if (key == "mean_photons_decoy") {
            cfg.emission.mean_photons_decoy = num();
        } else if (key == "prob_signal") {
            cfg.emission.prob_signal = num();
        } else if (key == "prob_decoy") {
            cfg.emission.prob_decoy = num();
        } else if (key == "prob_vacuum") {
            cfg.emission.prob_vacuum = num();
        } else if (key == "fwhm_ps.all") {
            cfg.emission.fwhm.fill(num());
        } else if (key.starts_with("fwhm_ps.")) {
            const auto laser = laser_from_name(key.substr(8));
            if (!laser) throw config_error("config: unknown key '" + key + "'");
            cfg.emission.fwhm[laser->index()] = num();
        } else if (key.starts_with("delay_ps.")) {
            const auto laser = laser_from_name(key.substr(9));
            if (!laser) throw config_error("config: unknown key '" + key + "'");
            cfg.emission.delay[laser->index()] = num();
        } else if (key == "transmittance") {
            cfg.channel.transmittance = num();
        } else if (key == "propagation_delay_ps") {
            cfg.channel.propagation_delay = num();
        } else if (key == "jitter_sigma_ps") {
            cfg.channel.jitter_sigma = num();
        } else if (key == "background_rate_hz") {
            cfg.channel.background_rate_hz = num();
        } else if (key == "extinction_ratio") {
            cfg.channel.extinction_ratio = num();
        } else if (key.starts_with("detector_offset_ps.")) {
            const auto det = detector_from_name(key.substr(19));
            if (!det) throw config_error("config: unknown key '" + key + "'");
            cfg.channel.detector_offset[static_cast<int>(*det)] = num();
        } else if (key == "bin_width_ps") {
            cfg.analysis.bin_width = num();
        } else if (key == "window_start_ps") {
            cfg.analysis.window_start = num();
        } else if (key == "window_end_ps") {
            cfg.analysis.window_end = num();
        } else if (key == "fit_tolerance") {
            cfg.analysis.fit.tolerance = num();
        } else if (key == "fit_max_iterations") {
            cfg.analysis.fit.max_iterations =
                static_cast<int>(detail::config_u64(value, key));
        } else if (key == "residual_window_sigmas") {
            cfg.analysis.fit.residual_window_sigmas = num();
        } else if (key == "gate_width_ps") {
            cfg.attack.gate_width = num();
        } else if (key == "gate_target_acceptance") {
            cfg.attack.target_acceptance = num();
        } else if (key == "signal_gate_center_ps") {
            cfg.attack.signal_center = num();
        } else if (key == "decoy_gate_center_ps") {
            cfg.attack.decoy_center = num();
        } else if (key == "attack_pair") {
            bool found = false;
            for (Polarization p : all_polarizations)
                if (value == name_of(p)) {
                    cfg.attack.pair = p;
                    found = true;
                }
            if (!found)
                throw config_error("config: attack_pair must be H, V, D or A");
        } else if (key == "eve_jitter_sigma_ps") {
            cfg.attack.eve_jitter_sigma = num();
        } else {
            throw config_error("config: unknown key '" + key + "'");
        }
    });
    cfg.validate();
    return cfg;
}

inline SessionConfig load_session_config(const std::string& path) {
    return parse_session_config(detail::read_file(path));
}

/// Effective pulse sigma the eavesdropper sees for the configured pair:
/// the laser pulse width convolved with Eve's own detector jitter.
inline TimePs attack_sigma(const SessionConfig& cfg) {
    const LaserId signal_laser{cfg.attack.pair, IntensityLevel::Signal};
    const TimePs pulse = sigma_from_fwhm(cfg.emission.fwhm_of(signal_laser));
    const TimePs j = cfg.attack.eve_jitter_sigma;
    return std::sqrt(pulse * pulse + j * j);
}

} // namespace qkdtiming
