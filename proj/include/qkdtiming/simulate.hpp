#pragma once

#include <algorithm>
#include <cstdint>
#include <future>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace qkdtiming {

/// One detector click. Timestamps are absolute and quantized to 0.1 ps, the
/// resolution of the event log format.
struct DetectionEvent {
    std::uint64_t slot{0};
    DetectorId detector{DetectorId::H};
    TimePs timestamp{0.0};
};

/// Ground truth of what the transmitter did in a slot. One record per slot
/// (laser or vacuum); background clicks add extra records carrying the index
/// of the slot window they fell into.
struct TruthRecord {
    static constexpr std::uint8_t kVacuum = 8;
    static constexpr std::uint8_t kBackground = 9;

    std::uint64_t slot{0};
    std::uint8_t source{kVacuum}; // 0..7 = LaserId::index()

    bool is_laser() const { return source < 8; }
    bool is_vacuum() const { return source == kVacuum; }
    bool is_background() const { return source == kBackground; }
    LaserId laser() const { return LaserId::from_index(source); }
};

inline std::string_view source_name(const TruthRecord& r) {
    if (r.is_vacuum()) return "vacuum";
    if (r.is_background()) return "background";
    return name_of(r.laser());
}

/// Announced class per slot, indexed by slot number.
using SiftingAnnouncement = std::vector<AnnouncedClass>;

struct PassResult {
    std::vector<DetectionEvent> events; // sorted by timestamp
    std::vector<TruthRecord> truth;     // sorted by slot
    SiftingAnnouncement announcements;  // one entry per slot
};

inline TimePs quantize_timestamp(TimePs t) {
    return std::round(t * 10.0) / 10.0;
}

/// Passive basis choice followed by a polarizing splitter with finite
/// extinction: matching basis sends the photon to the correct port with
/// probability er/(er+1), the conjugate basis splits 50:50.
inline DetectorId route_detector(Polarization pol, double extinction_ratio,
                                 CounterRng& rng) {
    const Basis measured = rng.next_bit() ? Basis::Rectilinear : Basis::Diagonal;
    const double u = rng.next_unit();
    if (measured == basis_of(pol)) {
        const double p_correct = extinction_ratio / (extinction_ratio + 1.0);
        return detector_for(u < p_correct ? pol : orthogonal(pol));
    }
    const Polarization first =
        measured == Basis::Rectilinear ? Polarization::H : Polarization::D;
    return detector_for(u < 0.5 ? first : orthogonal(first));
}

namespace detail {

struct SlotScratch {
    // per-detector earliest photon arrival within the current slot
    std::array<TimePs, 4> first_hit;
    std::array<bool, 4> hit;
};

struct SimParams {
    EmissionConfig emission;
    ChannelConfig channel;
    std::uint64_t seed{};
    double exp_neg_signal{};    // exp(-mu_s * eta)
    double exp_neg_decoy{};     // exp(-mu_d * eta)
    double exp_neg_background{};// exp(-rate * T)
    std::array<TimePs, 8> pulse_sigma{};
    bool default_probs{};
};

inline void simulate_slot_range(const SimParams& p, std::uint64_t lo,
                                std::uint64_t hi,
                                std::vector<DetectionEvent>& events,
                                std::vector<TruthRecord>& truth,
                                SiftingAnnouncement& announcements,
                                std::uint64_t ann_base) {
    const EmissionConfig& em = p.emission;
    const ChannelConfig& ch = p.channel;
    SlotScratch scratch{};
    for (std::uint64_t slot = lo; slot < hi; ++slot) {
        CounterRng rng(p.seed, slot);

        StateChoice state;
        if (p.default_probs) {
            state = select_state(rng.next_bits(4));
        } else {
            const double u = rng.next_unit();
            if (u < em.prob_signal)
                state = StateChoice{IntensityClass::Signal, std::nullopt};
            else if (u < em.prob_signal + em.prob_decoy)
                state = StateChoice{IntensityClass::Decoy, std::nullopt};
            else
                state = StateChoice{IntensityClass::Vacuum, std::nullopt};
            if (state.intensity != IntensityClass::Vacuum)
                state.pol = static_cast<Polarization>(rng.next_bits(2));
        }

        if (state.intensity == IntensityClass::Vacuum) {
            truth.push_back({slot, TruthRecord::kVacuum});
            announcements[slot - ann_base] = AnnouncedClass::Vacuum;
        } else {
            const LaserId laser{*state.pol,
                                state.intensity == IntensityClass::Decoy
                                    ? IntensityLevel::Decoy
                                    : IntensityLevel::Signal};
            truth.push_back({slot, static_cast<std::uint8_t>(laser.index())});
            announcements[slot - ann_base] = announced_class_for(laser);

            // Poisson(mu) photons thinned by eta is Poisson(mu * eta); the
            // surviving count is drawn directly.
            const double exp_neg = state.intensity == IntensityClass::Decoy
                                       ? p.exp_neg_decoy
                                       : p.exp_neg_signal;
            const int detected = rng.next_poisson(exp_neg);
            if (detected > 0) {
                scratch.hit.fill(false);
                const TimePs base = em.period * static_cast<double>(slot) +
                                    em.delay_of(laser) + ch.propagation_delay;
                const TimePs sigma_pulse = p.pulse_sigma[laser.index()];
                for (int k = 0; k < detected; ++k) {
                    const DetectorId det =
                        route_detector(*state.pol, ch.extinction_ratio, rng);
                    TimePs t = base + sigma_pulse * rng.next_gaussian() +
                               ch.offset_of(det);
                    if (ch.jitter_sigma > 0.0)
                        t += ch.jitter_sigma * rng.next_gaussian();
                    const int di = static_cast<int>(det);
                    // threshold detector: only the first photon in the slot
                    // registers on a given detector
                    if (!scratch.hit[di] || t < scratch.first_hit[di]) {
                        scratch.first_hit[di] = t;
                        scratch.hit[di] = true;
                    }
                }
                for (int di = 0; di < 4; ++di)
                    if (scratch.hit[di])
                        events.push_back({slot, static_cast<DetectorId>(di),
                                          quantize_timestamp(scratch.first_hit[di])});
            }
        }

        if (ch.background_rate_hz > 0.0) {
            CounterRng bg(p.seed, slot, 1);
            const int n_bg = bg.next_poisson(p.exp_neg_background);
            for (int k = 0; k < n_bg; ++k) {
                const auto det = static_cast<DetectorId>(bg.next_bits(2));
                const TimePs t =
                    em.period * (static_cast<double>(slot) + bg.next_unit());
                events.push_back({slot, det, quantize_timestamp(t)});
                truth.push_back({slot, TruthRecord::kBackground});
            }
        }
    }
}

} // namespace detail

/// Generate the detection-event stream, truth log and sifting announcements
/// for a pass of n_slots slots. Output is a pure function of
/// (emission, channel, n_slots, seed) regardless of n_threads: randomness is
/// keyed per slot, per-thread chunks are concatenated in slot order and the
/// event stream is then sorted by timestamp.
inline PassResult simulate_pass(const EmissionConfig& emission,
                                const ChannelConfig& channel,
                                std::uint64_t n_slots, std::uint64_t seed,
                                int n_threads = 1) {
    emission.validate();
    channel.validate();
    if (n_slots < 1)
        throw config_error("simulate_pass: n_slots must be >= 1");

    detail::SimParams p;
    p.emission = emission;
    p.channel = channel;
    p.seed = seed;
    const double eta = channel.transmittance;
    p.exp_neg_signal = std::exp(-emission.mean_photons_signal * eta);
    p.exp_neg_decoy = std::exp(-emission.mean_photons_decoy * eta);
    p.exp_neg_background =
        std::exp(-channel.background_rate_hz * emission.period * 1e-12);
    for (int i = 0; i < 8; ++i)
        p.pulse_sigma[i] = sigma_from_fwhm(emission.fwhm[i]);
    p.default_probs = emission.default_probabilities();

    PassResult out;
    out.announcements.resize(n_slots);

    if (n_threads <= 1) {
        out.events.reserve(static_cast<std::size_t>(
            static_cast<double>(n_slots) *
                (emission.prob_signal * (1.0 - p.exp_neg_signal) +
                 emission.prob_decoy * (1.0 - p.exp_neg_decoy)) +
            1024));
        out.truth.reserve(n_slots);
        detail::simulate_slot_range(p, 0, n_slots, out.events, out.truth,
                                    out.announcements, 0);
    } else {
        const std::uint64_t n_chunks = static_cast<std::uint64_t>(n_threads);
        struct Chunk {
            std::vector<DetectionEvent> events;
            std::vector<TruthRecord> truth;
            SiftingAnnouncement announcements;
        };
        std::vector<std::future<Chunk>> futures;
        futures.reserve(n_chunks);
        const std::uint64_t step = (n_slots + n_chunks - 1) / n_chunks;
        for (std::uint64_t c = 0; c < n_chunks; ++c) {
            const std::uint64_t lo = c * step;
            const std::uint64_t hi = std::min(n_slots, lo + step);
            if (lo >= hi) break;
            futures.push_back(std::async(std::launch::async, [&p, lo, hi] {
                Chunk chunk;
                chunk.announcements.resize(hi - lo);
                detail::simulate_slot_range(p, lo, hi, chunk.events,
                                            chunk.truth, chunk.announcements,
                                            lo);
                return chunk;
            }));
        }
        std::uint64_t next_slot = 0;
        for (auto& f : futures) {
            Chunk chunk = f.get();
            out.events.insert(out.events.end(), chunk.events.begin(),
                              chunk.events.end());
            out.truth.insert(out.truth.end(), chunk.truth.begin(),
                             chunk.truth.end());
            std::copy(chunk.announcements.begin(), chunk.announcements.end(),
                      out.announcements.begin() + next_slot);
            next_slot += chunk.announcements.size();
        }
    }

    std::stable_sort(out.events.begin(), out.events.end(),
                     [](const DetectionEvent& a, const DetectionEvent& b) {
                         if (a.timestamp != b.timestamp)
                             return a.timestamp < b.timestamp;
                         if (a.slot != b.slot) return a.slot < b.slot;
                         return a.detector < b.detector;
                     });
    return out;
}

} // namespace qkdtiming
