#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "simulate.hpp"

namespace qkdtiming {

/// Detection-time histogram with equally spaced bins. Bin i covers
/// [origin + i*bin_width, origin + (i+1)*bin_width); its center is
/// origin + (i + 1/2)*bin_width.
struct Histogram {
    TimePs bin_width{10.0};
    TimePs origin{0.0};
    std::vector<std::uint64_t> counts;

    TimePs center(std::size_t i) const {
        return origin + (static_cast<double>(i) + 0.5) * bin_width;
    }
    std::uint64_t total() const {
        std::uint64_t n = 0;
        for (auto c : counts) n += c;
        return n;
    }
    std::size_t nonempty_bins() const {
        std::size_t n = 0;
        for (auto c : counts) n += (c != 0);
        return n;
    }
    bool empty() const { return total() == 0; }

    std::vector<TimePs> bin_centers() const {
        std::vector<TimePs> x(counts.size());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = center(i);
        return x;
    }
};

namespace detail {

/// Wrap x into [lo, lo + period).
inline TimePs wrap_into(TimePs x, TimePs lo, TimePs period) {
    TimePs y = std::fmod(x - lo, period);
    if (y < 0.0) y += period;
    return lo + y;
}

} // namespace detail

/// Fold an event's absolute timestamp to its phase within the slot window.
inline TimePs folded_phase(const DetectionEvent& e, TimePs period) {
    return e.timestamp - period * static_cast<double>(e.slot);
}

/// Fold the matching events modulo the repetition period into one histogram
/// spanning a single period. A null class or detector filter matches
/// everything. Only announced classes are consulted, never the truth log.
///
/// The histogram window is centered on `center_hint` when given, otherwise on
/// the argmax of a coarse first pass, so that a peak sitting near the period
/// boundary is not split in two. Analyses that subtract peak positions should
/// fold every selection with one shared center.
inline Histogram fold_events(std::span<const DetectionEvent> events,
                             const SiftingAnnouncement& announcements,
                             std::optional<AnnouncedClass> class_filter,
                             std::optional<DetectorId> detector_filter,
                             TimePs period, TimePs bin_width,
                             std::optional<TimePs> center_hint = std::nullopt) {
    if (!(period > 0.0))
        throw config_error("fold_events: period must be positive");
    if (!(bin_width > 0.0) || bin_width > period)
        throw config_error("fold_events: bin_width must lie in (0, period]");

    const auto matches = [&](const DetectionEvent& e) {
        if (detector_filter && e.detector != *detector_filter) return false;
        if (class_filter) {
            if (e.slot >= announcements.size())
                throw io_error("fold_events: event slot " +
                               std::to_string(e.slot) +
                               " has no sifting announcement");
            if (announcements[e.slot] != *class_filter) return false;
        }
        return true;
    };

    const auto n_bins =
        static_cast<std::size_t>(std::ceil(period / bin_width - 1e-9));

    TimePs center;
    if (center_hint) {
        center = *center_hint;
    } else {
        // coarse pass over [0, period) to locate the peak
        std::vector<std::uint64_t> coarse(n_bins, 0);
        for (const auto& e : events) {
            if (!matches(e)) continue;
            const TimePs ph = detail::wrap_into(folded_phase(e, period), 0.0, period);
            auto b = static_cast<std::size_t>(ph / bin_width);
            if (b >= n_bins) b = n_bins - 1;
            ++coarse[b];
        }
        std::size_t argmax = 0;
        for (std::size_t i = 1; i < coarse.size(); ++i)
            if (coarse[i] > coarse[argmax]) argmax = i;
        center = (static_cast<double>(argmax) + 0.5) * bin_width;
    }

    Histogram hist;
    hist.bin_width = bin_width;
    hist.origin = center - period / 2.0;
    hist.counts.assign(n_bins, 0);
    for (const auto& e : events) {
        if (!matches(e)) continue;
        const TimePs ph =
            detail::wrap_into(folded_phase(e, period), hist.origin, period);
        auto b = static_cast<std::size_t>((ph - hist.origin) / bin_width);
        if (b >= n_bins) b = n_bins - 1;
        ++hist.counts[b];
    }
    return hist;
}

} // namespace qkdtiming
