#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace qkdtiming {

/// All times are in picoseconds. Delays and folded phases may be negative.
using TimePs = double;

enum class Polarization : std::uint8_t { H = 0, V = 1, D = 2, A = 3 };
enum class Basis : std::uint8_t { Rectilinear, Diagonal };
enum class IntensityLevel : std::uint8_t { Signal, Decoy };
enum class IntensityClass : std::uint8_t { Signal, Decoy, Vacuum };

/// One detector per polarization output port.
enum class DetectorId : std::uint8_t { H = 0, V = 1, D = 2, A = 3 };

constexpr std::array<Polarization, 4> all_polarizations{
    Polarization::H, Polarization::V, Polarization::D, Polarization::A};
constexpr std::array<DetectorId, 4> all_detectors{
    DetectorId::H, DetectorId::V, DetectorId::D, DetectorId::A};

constexpr Basis basis_of(Polarization p) {
    return (p == Polarization::H || p == Polarization::V) ? Basis::Rectilinear
                                                          : Basis::Diagonal;
}

constexpr Polarization orthogonal(Polarization p) {
    switch (p) {
    case Polarization::H: return Polarization::V;
    case Polarization::V: return Polarization::H;
    case Polarization::D: return Polarization::A;
    default: return Polarization::D;
    }
}

/// The detector sitting on polarization p's output port.
constexpr DetectorId detector_for(Polarization p) {
    return static_cast<DetectorId>(static_cast<std::uint8_t>(p));
}

constexpr Polarization polarization_of(DetectorId d) {
    return static_cast<Polarization>(static_cast<std::uint8_t>(d));
}

/// One of the eight transmitter lasers: polarization x {signal, decoy}.
struct LaserId {
    Polarization pol{Polarization::H};
    IntensityLevel level{IntensityLevel::Signal};

    /// 0..3 signal lasers, 4..7 decoy lasers, polarization-ordered within.
    constexpr int index() const {
        return (level == IntensityLevel::Decoy ? 4 : 0) +
               static_cast<int>(pol);
    }
    static constexpr LaserId from_index(int i) {
        return LaserId{static_cast<Polarization>(i & 3),
                       i >= 4 ? IntensityLevel::Decoy : IntensityLevel::Signal};
    }
    constexpr bool operator==(const LaserId&) const = default;
};

constexpr std::array<LaserId, 8> all_lasers{
    LaserId{Polarization::H, IntensityLevel::Signal},
    LaserId{Polarization::V, IntensityLevel::Signal},
    LaserId{Polarization::D, IntensityLevel::Signal},
    LaserId{Polarization::A, IntensityLevel::Signal},
    LaserId{Polarization::H, IntensityLevel::Decoy},
    LaserId{Polarization::V, IntensityLevel::Decoy},
    LaserId{Polarization::D, IntensityLevel::Decoy},
    LaserId{Polarization::A, IntensityLevel::Decoy}};

/// What the transmitter announces per slot during sifting: decoy slots reveal
/// the full state, signal slots only the basis.
enum class AnnouncedClass : std::uint8_t {
    HsVs = 0, // signal, rectilinear basis
    DsAs = 1, // signal, diagonal basis
    Hd = 2,
    Vd = 3,
    Dd = 4,
    Ad = 5,
    Vacuum = 6
};

constexpr AnnouncedClass announced_class_for(LaserId laser) {
    if (laser.level == IntensityLevel::Signal)
        return basis_of(laser.pol) == Basis::Rectilinear ? AnnouncedClass::HsVs
                                                         : AnnouncedClass::DsAs;
    switch (laser.pol) {
    case Polarization::H: return AnnouncedClass::Hd;
    case Polarization::V: return AnnouncedClass::Vd;
    case Polarization::D: return AnnouncedClass::Dd;
    default: return AnnouncedClass::Ad;
    }
}

// --- token names used in logs, reports and error messages ------------------

inline std::string_view name_of(Polarization p) {
    constexpr std::array<std::string_view, 4> n{"H", "V", "D", "A"};
    return n[static_cast<int>(p)];
}

inline std::string_view name_of(DetectorId d) {
    constexpr std::array<std::string_view, 4> n{"H", "V", "D", "A"};
    return n[static_cast<int>(d)];
}

inline std::string_view name_of(LaserId laser) {
    constexpr std::array<std::string_view, 8> n{"H_s", "V_s", "D_s", "A_s",
                                                "H_d", "V_d", "D_d", "A_d"};
    return n[laser.index()];
}

inline std::string_view name_of(AnnouncedClass c) {
    constexpr std::array<std::string_view, 7> n{
        "H_s/V_s", "D_s/A_s", "H_d", "V_d", "D_d", "A_d", "vacuum"};
    return n[static_cast<int>(c)];
}

/// Compact token safe for file names ("H_s/V_s" -> "HsVs").
inline std::string_view file_token(AnnouncedClass c) {
    constexpr std::array<std::string_view, 7> n{"HsVs", "DsAs", "Hd",
                                                "Vd",   "Dd",   "Ad", "vacuum"};
    return n[static_cast<int>(c)];
}

inline std::optional<DetectorId> detector_from_name(std::string_view s) {
    for (DetectorId d : all_detectors)
        if (s == name_of(d)) return d;
    return std::nullopt;
}

inline std::optional<LaserId> laser_from_name(std::string_view s) {
    for (LaserId l : all_lasers)
        if (s == name_of(l)) return l;
    return std::nullopt;
}

inline std::optional<AnnouncedClass> announced_class_from_name(std::string_view s) {
    for (int i = 0; i < 7; ++i) {
        auto c = static_cast<AnnouncedClass>(i);
        if (s == name_of(c)) return c;
    }
    return std::nullopt;
}

// --- pulse-shape primitives -------------------------------------------------

/// FWHM = 2*sqrt(2*ln 2) * sigma for a Gaussian pulse.
inline constexpr double fwhm_to_sigma_factor = 2.3548200450309493;

inline TimePs sigma_from_fwhm(TimePs fwhm) {
    if (!(fwhm > 0.0))
        throw config_error("sigma_from_fwhm: fwhm must be positive");
    return fwhm / fwhm_to_sigma_factor;
}

inline TimePs fwhm_from_sigma(TimePs sigma) {
    if (!(sigma > 0.0))
        throw config_error("fwhm_from_sigma: sigma must be positive");
    return sigma * fwhm_to_sigma_factor;
}

/// Gaussian peak parameters: f(x) = amplitude * exp(-(x-mean)^2 / (2 sigma^2)).
struct GaussianPeak {
    double amplitude{0.0};
    TimePs mean{0.0};
    TimePs sigma{0.0};

    double value_at(TimePs x) const {
        const double z = (x - mean) / sigma;
        return amplitude * std::exp(-0.5 * z * z);
    }
};

// --- configuration records ----------------------------------------------------

/// Transmitter configuration. Delays and pulse widths are per laser,
/// indexed by LaserId::index().
struct EmissionConfig {
    TimePs period{10000.0}; // slot repetition period (100 MHz default)
    std::array<TimePs, 8> delay{};
    std::array<TimePs, 8> fwhm{200.0, 200.0, 200.0, 200.0,
                               200.0, 200.0, 200.0, 200.0};
    double mean_photons_signal{0.8};
    double mean_photons_decoy{0.1};
    double prob_signal{0.5};
    double prob_decoy{0.25};
    double prob_vacuum{0.25};

    TimePs delay_of(LaserId l) const { return delay[l.index()]; }
    TimePs fwhm_of(LaserId l) const { return fwhm[l.index()]; }

    /// True when the class probabilities are exactly the 4-bit defaults.
    bool default_probabilities() const {
        return prob_signal == 0.5 && prob_decoy == 0.25 && prob_vacuum == 0.25;
    }

    void validate() const {
        if (!(period > 0.0))
            throw config_error("emission: period_ps must be positive");
        TimePs max_extent = 0.0;
        for (int i = 0; i < 8; ++i) {
            if (!(fwhm[i] > 0.0))
                throw config_error("emission: fwhm_ps must be positive for " +
                                   std::string(name_of(LaserId::from_index(i))));
            if (!std::isfinite(delay[i]))
                throw config_error("emission: delay_ps must be finite for " +
                                   std::string(name_of(LaserId::from_index(i))));
            max_extent = std::max(max_extent, std::abs(delay[i]) + 3.0 * fwhm[i]);
        }
        if (!(period > max_extent))
            throw config_error("emission: period_ps must exceed the pulse extent");
        if (!(mean_photons_signal > 0.0) || !(mean_photons_decoy > 0.0))
            throw config_error("emission: mean photon numbers must be positive");
        for (double p : {prob_signal, prob_decoy, prob_vacuum})
            if (!(p >= 0.0 && p <= 1.0))
                throw config_error("emission: state probabilities must lie in [0,1]");
        const double sum = prob_signal + prob_decoy + prob_vacuum;
        if (std::abs(sum - 1.0) > 1e-9)
            throw config_error("emission: state probabilities must sum to 1");
    }
};

/// Everything between the transmitter output and the detection electronics,
/// collapsed: survival probability, common propagation delay, one lumped
/// timing-jitter sigma, uniform background and per-detector response offsets.
struct ChannelConfig {
    double transmittance{1.0};
    TimePs propagation_delay{0.0};
    TimePs jitter_sigma{720.0};
    double background_rate_hz{0.0};
    double extinction_ratio{150.0};
    std::array<TimePs, 4> detector_offset{};

    TimePs offset_of(DetectorId d) const {
        return detector_offset[static_cast<int>(d)];
    }

    void validate() const {
        // zero transmittance is a valid (dark) channel, not a config error
        if (!(transmittance >= 0.0 && transmittance <= 1.0))
            throw config_error("channel: transmittance must lie in [0,1]");
        if (!(jitter_sigma >= 0.0))
            throw config_error("channel: jitter_sigma_ps must be >= 0");
        if (!(background_rate_hz >= 0.0))
            throw config_error("channel: background_rate_hz must be >= 0");
        if (!(extinction_ratio >= 1.0))
            throw config_error("channel: extinction_ratio must be >= 1");
        if (!std::isfinite(propagation_delay))
            throw config_error("channel: propagation_delay_ps must be finite");
        for (TimePs o : detector_offset)
            if (!std::isfinite(o))
                throw config_error("channel: detector_offset_ps must be finite");
    }
};

// --- state selection ---------------------------------------------------------

struct StateChoice {
    IntensityClass intensity{IntensityClass::Vacuum};
    std::optional<Polarization> pol; // empty iff vacuum
};

/// Map four fair random bits onto the transmitted state.
///
/// bit 0 clear        -> signal      (8 of 16 patterns)
/// bit 0 set, bit 1 clear -> decoy   (4 of 16)
/// bit 0 set, bit 1 set   -> vacuum  (4 of 16)
/// bits 2-3               -> polarization H,V,D,A (unused for vacuum)
inline StateChoice select_state(unsigned bits) {
    bits &= 0xFu;
    const bool b0 = bits & 1u, b1 = bits & 2u;
    if (b0 && b1) return StateChoice{IntensityClass::Vacuum, std::nullopt};
    const auto pol = static_cast<Polarization>((bits >> 2) & 3u);
    return StateChoice{b0 ? IntensityClass::Decoy : IntensityClass::Signal, pol};
}

} // namespace qkdtiming
