#pragma once

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

#include <qkdtiming/config.hpp>
#include <qkdtiming/core.hpp>

namespace testsupport {

/// Planted per-laser delays of the October 31, 2021 session, ps,
/// H_s, V_s, D_s, A_s, H_d, V_d, D_d, A_d.
inline constexpr std::array<qkdtiming::TimePs, 8> oct31_delays{
    0.0, -10.0, 29.0, 139.0, 246.0, 302.0, 223.0, 176.0};

inline qkdtiming::EmissionConfig oct31_emission() {
    qkdtiming::EmissionConfig em;
    em.delay = oct31_delays;
    return em;
}

inline qkdtiming::ChannelConfig oct31_channel() {
    qkdtiming::ChannelConfig ch;
    ch.transmittance = 0.1;
    ch.propagation_delay = 5000.0;
    ch.jitter_sigma = 720.0;
    ch.detector_offset = {0.0, 50.0, 20.0, -30.0};
    return ch;
}

inline qkdtiming::AnalysisOptions oct31_analysis() {
    qkdtiming::AnalysisOptions opt;
    opt.fit.residual_window_sigmas = 2.5;
    return opt;
}

/// Interceptor's channel: lossless, jitter-free, no detector skew.
inline qkdtiming::ChannelConfig eve_channel() {
    qkdtiming::ChannelConfig ch;
    ch.transmittance = 1.0;
    ch.propagation_delay = 5000.0;
    ch.jitter_sigma = 0.0;
    return ch;
}

/// Scratch directory under the system temp root, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        std::random_device rd;
        dir_ = base / (tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(dir_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(dir_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string path() const { return dir_.string(); }
    std::string file(const std::string& name) const {
        return (dir_ / name).string();
    }

private:
    std::filesystem::path dir_;
};

inline void write_text_file(const std::string& path, const std::string& text) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    REQUIRE(f != nullptr);
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
}

} // namespace testsupport
