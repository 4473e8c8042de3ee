#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "errors.hpp"

namespace qkdtiming {

/// Fitted detection-time expectation t(class -> detector) with the variance
/// of the fitted mean.
struct PeakTime {
    AnnouncedClass cls{AnnouncedClass::HsVs};
    DetectorId detector{DetectorId::H};
    TimePs mean{0.0};
    double variance{0.0};
};

/// Table of fitted peak times keyed by (announced class, detector).
class PeakTable {
public:
    void set(const PeakTime& p) { table_[key(p.cls, p.detector)] = p; }

    bool has(AnnouncedClass c, DetectorId d) const {
        return table_.count(key(c, d)) != 0;
    }

    const PeakTime& get(AnnouncedClass c, DetectorId d,
                        const std::string& context) const {
        auto it = table_.find(key(c, d));
        if (it == table_.end())
            throw fit_error("missing peak time t(" + std::string(name_of(c)) +
                            " -> " + std::string(name_of(d)) + ") needed for " +
                            context);
        return it->second;
    }

    std::vector<PeakTime> entries() const {
        std::vector<PeakTime> out;
        out.reserve(table_.size());
        for (const auto& [k, v] : table_) out.push_back(v);
        return out;
    }

private:
    static int key(AnnouncedClass c, DetectorId d) {
        return static_cast<int>(c) * 4 + static_cast<int>(d);
    }
    std::map<int, PeakTime> table_;
};

struct ValueWithVariance {
    TimePs value{0.0};
    double variance{0.0};

    TimePs three_sigma() const { return 3.0 * std::sqrt(variance); }
};

/// Receiver response asymmetry between detectors V and H, measured with
/// diagonal-basis signal states, which illuminate both rectilinear ports
/// evenly: dt(V,H) = t(D_s/A_s -> V) - t(D_s/A_s -> H). Peak variances add.
inline ValueWithVariance detector_offset(const PeakTable& peaks) {
    const PeakTime& v = peaks.get(AnnouncedClass::DsAs, DetectorId::V,
                                  "detector offset dt(V,H)");
    const PeakTime& h = peaks.get(AnnouncedClass::DsAs, DetectorId::H,
                                  "detector offset dt(V,H)");
    return {v.mean - h.mean, v.variance + h.variance};
}

/// One laser's firing delay relative to H_s with its 3-sigma half width.
struct DelayEstimate {
    LaserId laser;
    TimePs value{0.0};
    double variance{0.0};
    TimePs three_sigma{0.0};
};

/// The seven relative delays plus the measurable detector-offset estimates.
struct DelayReport {
    std::string session;
    std::vector<DelayEstimate> delays; // V_s, D_s, A_s, H_d, V_d, D_d, A_d
    // (detector, H) response offsets that the data exposes
    std::map<DetectorId, ValueWithVariance> detector_offsets;

    const DelayEstimate& estimate(LaserId laser) const {
        for (const auto& d : delays)
            if (d.laser == laser) return d;
        throw config_error("delay report has no entry for " +
                           std::string(name_of(laser)));
    }
};

namespace detail {

struct DelayTerm {
    double sign;
    AnnouncedClass cls;
    DetectorId det;
};

/// The sifted-data linear forms for each laser relative to H_s. Every term is
/// computable from announced classes alone; variances of the terms add.
inline const std::vector<DelayTerm>& delay_terms(LaserId laser) {
    using AC = AnnouncedClass;
    using D = DetectorId;
    static const std::vector<DelayTerm> vs = {{+1, AC::HsVs, D::V},
                                              {-1, AC::HsVs, D::H},
                                              {-1, AC::DsAs, D::V},
                                              {+1, AC::DsAs, D::H}};
    static const std::vector<DelayTerm> ds = {{+1, AC::DsAs, D::D},
                                              {-1, AC::Dd, D::D},
                                              {+1, AC::Dd, D::H},
                                              {-1, AC::HsVs, D::H}};
    static const std::vector<DelayTerm> as = {{+1, AC::DsAs, D::A},
                                              {-1, AC::Ad, D::A},
                                              {+1, AC::Ad, D::H},
                                              {-1, AC::HsVs, D::H}};
    static const std::vector<DelayTerm> hd = {{+1, AC::Hd, D::H},
                                              {-1, AC::HsVs, D::H}};
    static const std::vector<DelayTerm> vd = {{+1, AC::Vd, D::V},
                                              {-1, AC::HsVs, D::H},
                                              {-1, AC::DsAs, D::V},
                                              {+1, AC::DsAs, D::H}};
    static const std::vector<DelayTerm> dd = {{+1, AC::Dd, D::H},
                                              {-1, AC::HsVs, D::H}};
    static const std::vector<DelayTerm> ad = {{+1, AC::Ad, D::H},
                                              {-1, AC::HsVs, D::H}};
    switch (laser.index()) {
    case 1: return vs;
    case 2: return ds;
    case 3: return as;
    case 4: return hd;
    case 5: return vd;
    case 6: return dd;
    default: return ad;
    }
}

} // namespace detail

constexpr std::array<LaserId, 7> reported_lasers{
    LaserId{Polarization::V, IntensityLevel::Signal},
    LaserId{Polarization::D, IntensityLevel::Signal},
    LaserId{Polarization::A, IntensityLevel::Signal},
    LaserId{Polarization::H, IntensityLevel::Decoy},
    LaserId{Polarization::V, IntensityLevel::Decoy},
    LaserId{Polarization::D, IntensityLevel::Decoy},
    LaserId{Polarization::A, IntensityLevel::Decoy}};

/// Combine the fitted peak times into the seven laser delays relative to H_s.
/// Each delay is an exact signed sum of peak times; since the underlying fits
/// are independent measurements, the output variance is the plain sum of the
/// term variances.
inline DelayReport solve_delays(const PeakTable& peaks,
                                const std::string& session = {}) {
    DelayReport report;
    report.session = session;
    for (LaserId laser : reported_lasers) {
        const std::string context =
            "delay of " + std::string(name_of(laser)) + " relative to H_s";
        DelayEstimate est;
        est.laser = laser;
        for (const auto& term : detail::delay_terms(laser)) {
            const PeakTime& p = peaks.get(term.cls, term.det, context);
            est.value += term.sign * p.mean;
            est.variance += p.variance;
        }
        est.three_sigma = 3.0 * std::sqrt(est.variance);
        report.delays.push_back(est);
    }
    report.detector_offsets[DetectorId::V] = detector_offset(peaks);
    // the conjugate clicks of rectilinear signal states expose the D and A
    // offsets the same way; included when those fits are available
    for (DetectorId d : {DetectorId::D, DetectorId::A}) {
        if (peaks.has(AnnouncedClass::HsVs, d) &&
            peaks.has(AnnouncedClass::HsVs, DetectorId::H)) {
            const PeakTime& a = peaks.get(AnnouncedClass::HsVs, d, "offset");
            const PeakTime& b =
                peaks.get(AnnouncedClass::HsVs, DetectorId::H, "offset");
            report.detector_offsets[d] = {a.mean - b.mean,
                                          a.variance + b.variance};
        }
    }
    return report;
}

} // namespace qkdtiming
