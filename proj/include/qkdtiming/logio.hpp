#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "attack.hpp"
#include "core.hpp"
#include "delays.hpp"
#include "errors.hpp"
#include "histogram.hpp"
#include "simulate.hpp"

namespace qkdtiming {

namespace detail {

class LineWriter {
public:
    explicit LineWriter(const std::string& path)
        : file_(std::fopen(path.c_str(), "wb")), path_(path) {
        if (!file_) throw io_error("cannot open " + path + " for writing");
        buffer_.resize(1 << 20);
        std::setvbuf(file_, buffer_.data(), _IOFBF, buffer_.size());
    }
    ~LineWriter() {
        if (file_) std::fclose(file_);
    }
    LineWriter(const LineWriter&) = delete;
    LineWriter& operator=(const LineWriter&) = delete;

    void printf(const char* fmt, auto... args) {
        if (std::fprintf(file_, fmt, args...) < 0)
            throw io_error("write failed on " + path_);
    }
    void write(const char* text) {
        if (std::fputs(text, file_) < 0)
            throw io_error("write failed on " + path_);
    }
    void close() {
        if (file_ && std::fclose(file_) != 0) {
            file_ = nullptr;
            throw io_error("write failed on " + path_);
        }
        file_ = nullptr;
    }

private:
    std::FILE* file_;
    std::string path_;
    std::vector<char> buffer_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Iterate lines of `text`, invoking fn(line, line_number). Handles a missing
/// trailing newline; carriage returns are stripped.
template <typename Fn>
inline void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        fn(line, line_no);
        pos = end + 1;
    }
}

inline double parse_double(std::string_view s, const std::string& path,
                           std::size_t line_no) {
    double v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw io_error(path + ":" + std::to_string(line_no) +
                       ": bad number '" + std::string(s) + "'");
    return v;
}

inline std::uint64_t parse_u64(std::string_view s, const std::string& path,
                               std::size_t line_no) {
    std::uint64_t v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw io_error(path + ":" + std::to_string(line_no) +
                       ": bad integer '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t c = line.find(',', pos);
        if (c == std::string_view::npos) {
            out.push_back(line.substr(pos));
            return out;
        }
        out.push_back(line.substr(pos, c - pos));
        pos = c + 1;
    }
}

} // namespace detail

// --- event / truth / announcement logs ---------------------------------------

namespace detail {
inline constexpr const char* detector_cname[4] = {"H", "V", "D", "A"};
inline constexpr const char* source_cname[10] = {
    "H_s", "V_s", "D_s", "A_s", "H_d",
    "V_d", "D_d", "A_d", "vacuum", "background"};
inline constexpr const char* announced_cname[7] = {
    "H_s/V_s", "D_s/A_s", "H_d", "V_d", "D_d", "A_d", "vacuum"};
} // namespace detail

/// Event log: one `slot_index,detector,timestamp_ps` record per line,
/// timestamps at 0.1 ps resolution.
inline void write_events(const std::string& path,
                         std::span<const DetectionEvent> events) {
    detail::LineWriter out(path);
    for (const auto& e : events)
        out.printf("%llu,%s,%.1f\n",
                   static_cast<unsigned long long>(e.slot),
                   detail::detector_cname[static_cast<int>(e.detector)],
                   e.timestamp);
    out.close();
}

inline std::vector<DetectionEvent> read_events(const std::string& path) {
    const std::string text = detail::read_file(path);
    std::vector<DetectionEvent> events;
    events.reserve(text.size() / 16 + 16);
    detail::for_each_line(text, [&](std::string_view line, std::size_t n) {
        if (line.empty()) return;
        const auto fields = detail::split_fields(line);
        if (fields.size() != 3)
            throw io_error(path + ":" + std::to_string(n) +
                           ": expected slot,detector,timestamp");
        DetectionEvent e;
        e.slot = detail::parse_u64(fields[0], path, n);
        const auto det = detector_from_name(fields[1]);
        if (!det)
            throw io_error(path + ":" + std::to_string(n) +
                           ": unknown detector '" + std::string(fields[1]) + "'");
        e.detector = *det;
        e.timestamp = detail::parse_double(fields[2], path, n);
        events.push_back(e);
    });
    return events;
}

/// Truth log: `slot_index,source` with source a laser name, vacuum or
/// background.
inline void write_truth(const std::string& path,
                        std::span<const TruthRecord> truth) {
    detail::LineWriter out(path);
    for (const auto& r : truth)
        out.printf("%llu,%s\n", static_cast<unsigned long long>(r.slot),
                   detail::source_cname[r.source]);
    out.close();
}

inline std::vector<TruthRecord> read_truth(const std::string& path) {
    const std::string text = detail::read_file(path);
    std::vector<TruthRecord> truth;
    truth.reserve(text.size() / 10 + 16);
    detail::for_each_line(text, [&](std::string_view line, std::size_t n) {
        if (line.empty()) return;
        const auto fields = detail::split_fields(line);
        if (fields.size() != 2)
            throw io_error(path + ":" + std::to_string(n) +
                           ": expected slot,source");
        TruthRecord r;
        r.slot = detail::parse_u64(fields[0], path, n);
        if (fields[1] == "vacuum") {
            r.source = TruthRecord::kVacuum;
        } else if (fields[1] == "background") {
            r.source = TruthRecord::kBackground;
        } else {
            const auto laser = laser_from_name(fields[1]);
            if (!laser)
                throw io_error(path + ":" + std::to_string(n) +
                               ": unknown source '" + std::string(fields[1]) +
                               "'");
            r.source = static_cast<std::uint8_t>(laser->index());
        }
        truth.push_back(r);
    });
    return truth;
}

/// Announcement log: `slot_index,announced_class`, one line per slot in slot
/// order.
inline void write_announcements(const std::string& path,
                                const SiftingAnnouncement& announcements) {
    detail::LineWriter out(path);
    for (std::size_t slot = 0; slot < announcements.size(); ++slot)
        out.printf("%llu,%s\n", static_cast<unsigned long long>(slot),
                   detail::announced_cname[static_cast<int>(
                       announcements[slot])]);
    out.close();
}

inline SiftingAnnouncement read_announcements(const std::string& path) {
    const std::string text = detail::read_file(path);
    SiftingAnnouncement ann;
    ann.reserve(text.size() / 10 + 16);
    detail::for_each_line(text, [&](std::string_view line, std::size_t n) {
        if (line.empty()) return;
        const auto fields = detail::split_fields(line);
        if (fields.size() != 2)
            throw io_error(path + ":" + std::to_string(n) +
                           ": expected slot,announced_class");
        const std::uint64_t slot = detail::parse_u64(fields[0], path, n);
        if (slot != ann.size())
            throw io_error(path + ":" + std::to_string(n) +
                           ": slots must be contiguous from 0");
        const auto cls = announced_class_from_name(fields[1]);
        if (!cls)
            throw io_error(path + ":" + std::to_string(n) +
                           ": unknown announced class '" +
                           std::string(fields[1]) + "'");
        ann.push_back(*cls);
    });
    return ann;
}

// --- histogram dumps and reports ----------------------------------------------

/// Histogram dump for external plotting: `bin_center_ps,count` lines.
inline void write_histogram(const std::string& path, const Histogram& hist) {
    detail::LineWriter out(path);
    for (std::size_t i = 0; i < hist.counts.size(); ++i)
        out.printf("%.4f,%llu\n", hist.center(i),
                   static_cast<unsigned long long>(hist.counts[i]));
    out.close();
}

/// Delay report: session header, `laser,value_ps,three_sigma_ps` rows for the
/// seven lasers, then the measured detector offsets.
inline void write_delay_report(const std::string& path,
                               const DelayReport& report) {
    detail::LineWriter out(path);
    out.printf("session,%s\n", report.session.c_str());
    out.write("laser,value_ps,three_sigma_ps\n");
    for (const auto& d : report.delays)
        out.printf("%s,%.4f,%.4f\n", std::string(name_of(d.laser)).c_str(),
                   d.value, d.three_sigma);
    for (const auto& [det, off] : report.detector_offsets)
        out.printf("offset_%s_H,%.4f,%.4f\n",
                   std::string(name_of(det)).c_str(), off.value,
                   off.three_sigma());
    out.close();
}

inline DelayReport read_delay_report(const std::string& path) {
    const std::string text = detail::read_file(path);
    DelayReport report;
    detail::for_each_line(text, [&](std::string_view line, std::size_t n) {
        if (line.empty()) return;
        const auto fields = detail::split_fields(line);
        if (fields[0] == "session") {
            if (fields.size() >= 2) report.session = std::string(fields[1]);
            return;
        }
        if (fields[0] == "laser") return; // header row
        if (fields.size() != 3)
            throw io_error(path + ":" + std::to_string(n) +
                           ": expected name,value,three_sigma");
        if (fields[0].starts_with("offset_")) {
            const auto det = detector_from_name(fields[0].substr(7, 1));
            if (!det)
                throw io_error(path + ":" + std::to_string(n) +
                               ": unknown offset row");
            const double v = detail::parse_double(fields[1], path, n);
            const double ts = detail::parse_double(fields[2], path, n);
            report.detector_offsets[*det] = {v, (ts / 3.0) * (ts / 3.0)};
            return;
        }
        const auto laser = laser_from_name(fields[0]);
        if (!laser)
            throw io_error(path + ":" + std::to_string(n) +
                           ": unknown laser '" + std::string(fields[0]) + "'");
        DelayEstimate est;
        est.laser = *laser;
        est.value = detail::parse_double(fields[1], path, n);
        est.three_sigma = detail::parse_double(fields[2], path, n);
        est.variance = (est.three_sigma / 3.0) * (est.three_sigma / 3.0);
        report.delays.push_back(est);
    });
    return report;
}

/// Attack report: key=value lines followed by the confusion matrix.
inline void write_attack_report(const std::string& path,
                                const AttackReport& report) {
    detail::LineWriter out(path);
    out.printf("signal_gate_center_ps = %.4f\n", report.gates.signal_center);
    out.printf("decoy_gate_center_ps = %.4f\n", report.gates.decoy_center);
    out.printf("gate_width_ps = %.4f\n", report.gates.width);
    out.printf("separation_ps = %.4f\n", report.gates.separation());
    out.printf("sigma_ps = %.4f\n", report.sigma);
    out.printf("analytic_acceptance = %.6f\n", report.analytic_acceptance);
    out.printf("analytic_wrong_gate = %.6f\n", report.analytic_wrong_gate);
    out.printf("analytic_failure = %.6f\n", report.analytic_failure);
    out.printf("analytic_distinguish = %.6f\n", 1.0 - report.analytic_failure);
    out.printf("analytic_discard = %.6f\n", report.analytic_discard);
    out.printf("acceptance_fraction_signal = %.6f\n",
               report.acceptance_fraction_signal);
    out.printf("acceptance_fraction_decoy = %.6f\n",
               report.acceptance_fraction_decoy);
    out.printf("discard_fraction = %.6f\n", report.discard_fraction);
    out.printf("failure_probability = %.6f\n", report.failure_probability);
    out.printf("distinguish_probability = %.6f\n",
               report.distinguish_probability);
    out.printf("empirical = %s\n", report.has_empirical ? "yes" : "no");
    if (report.has_empirical) {
        out.write("truth,labeled_signal,labeled_decoy,discarded\n");
        const char* rows[3] = {"signal", "decoy", "other"};
        for (int r = 0; r < 3; ++r)
            out.printf("%s,%llu,%llu,%llu\n", rows[r],
                       static_cast<unsigned long long>(report.confusion[r][0]),
                       static_cast<unsigned long long>(report.confusion[r][1]),
                       static_cast<unsigned long long>(report.confusion[r][2]));
    }
    out.close();
}

// --- run manifest -------------------------------------------------------------

/// FNV-1a over the raw bytes; good enough to tie a manifest to its config.
inline std::uint64_t fnv1a_hash(std::string_view bytes) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

inline void write_manifest(const std::string& path, std::uint64_t config_hash,
                           std::uint64_t seed, std::uint64_t n_slots) {
    detail::LineWriter out(path);
    out.printf("config_hash = %016llx\n",
               static_cast<unsigned long long>(config_hash));
    out.printf("seed = %llu\n", static_cast<unsigned long long>(seed));
    out.printf("n_slots = %llu\n", static_cast<unsigned long long>(n_slots));
    out.write("events = events.csv\n");
    out.write("truth = truth.csv\n");
    out.write("announcements = announcements.csv\n");
    out.close();
}

} // namespace qkdtiming
