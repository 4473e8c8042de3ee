// Acceptance suite: every published-number claim the toolkit must reproduce,
// one criterion per test case, each printing a single [PASS]/[FAIL] line with
// the measured values.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <qkdtiming/commands.hpp>

#include "oracles.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <string>

using namespace qkdtiming;

namespace {

const double kSigma200 = sigma_from_fwhm(200.0);

struct Stopwatch {
    std::chrono::steady_clock::time_point start =
        std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             start)
            .count();
    }
};

void report_line(int n, const char* name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s -- %s\n", pass ? "PASS" : "FAIL", n,
                name, detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string config_path(const char* name) {
    return std::string(QKDTIMING_CONFIG_DIR) + "/" + name;
}

} // namespace

TEST_CASE("criterion 1: gate acceptance fractions") {
    Stopwatch sw;
    const double bob = acceptance_fraction(2000.0, 720.0);
    const double eve = acceptance_fraction(235.0, kSigma200);
    const double elapsed = sw.seconds();
    const bool pass = bob >= 0.833 && bob <= 0.838 && eve >= 0.833 &&
                      eve <= 0.838 && elapsed < 1e-3;
    report_line(1, "gate acceptance", pass,
                fmt("bob(2ns,720ps)=%.4f eve(235ps,84.9ps)=%.4f in [0.833,"
                    "0.838], %.2e s",
                    bob, eve, elapsed));
    CHECK(bob >= 0.833);
    CHECK(bob <= 0.838);
    CHECK(eve >= 0.833);
    CHECK(eve <= 0.838);
    CHECK(elapsed < 1e-3);
}

TEST_CASE("criterion 2: minimal interceptor gate width") {
    Stopwatch sw;
    const double w = min_gate_width(0.835, kSigma200);
    const double elapsed = sw.seconds();
    const bool pass = w >= 234.0 && w <= 236.0 && elapsed < 1e-3;
    report_line(2, "interceptor gate width", pass,
                fmt("min_gate_width(0.835)=%.3f ps in [234,236], %.2e s", w,
                    elapsed));
    CHECK(w >= 234.0);
    CHECK(w <= 236.0);
    CHECK(elapsed < 1e-3);
}

TEST_CASE("criterion 3: failure probability with Monte Carlo cross-check") {
    Stopwatch sw;
    const double f = misclassification_probability(312.0, 235.0, kSigma200);
    oracles::GateMonteCarlo mc;
    mc.run(312.0, 235.0, kSigma200, 1000000, 20211031);
    const double emp = mc.conditional_failure();
    const double se =
        std::sqrt(f * (1.0 - f) / static_cast<double>(mc.own + mc.wrong));
    const double elapsed = sw.seconds();
    const bool pass = f >= 0.012 && f <= 0.014 && std::abs(emp - f) < 3 * se &&
                      elapsed < 5.0;
    report_line(3, "failure probability", pass,
                fmt("analytic=%.5f in [0.012,0.014], MC=%.5f (|diff|=%.1e < "
                    "3sigma=%.1e), %.2f s",
                    f, emp, std::abs(emp - f), 3 * se, elapsed));
    CHECK(f >= 0.012);
    CHECK(f <= 0.014);
    CHECK(std::abs(emp - f) < 3 * se);
    CHECK(elapsed < 5.0);
}

TEST_CASE("criterion 4: planted-delay recovery coverage over 100 seeds") {
    Stopwatch sw;
    const SessionConfig cfg = load_session_config(config_path("oct31_2021.cfg"));

    // the per-peak error bars of one pass must sit at session scale
    // (tens of picoseconds), or the coverage statement tests nothing
    const PassResult one = simulate_pass(cfg.emission, cfg.channel,
                                         cfg.n_slots, 100, cfg.n_threads);
    const AnalysisResult res = analyze_events(one.events, one.announcements,
                                              cfg.emission.period,
                                              cfg.analysis);
    double bar_lo = 1e9, bar_hi = 0.0;
    for (const auto& [key, fit] : res.fits) {
        bar_lo = std::min(bar_lo, fit.three_sigma());
        bar_hi = std::max(bar_hi, fit.three_sigma());
    }

    const CoverageStats stats =
        coverage_trial(cfg.emission, cfg.channel, cfg.n_slots, 100, 100,
                       cfg.analysis, cfg.n_threads);
    const double elapsed = sw.seconds();
    bool per_laser_ok = true;
    double min_cov = 1.0;
    std::string detail;
    for (const auto& p : stats.per_laser) {
        min_cov = std::min(min_cov, p.coverage());
        if (p.coverage() < 8.0 / 9.0) per_laser_ok = false;
        detail += fmt("%s=%.2f ", std::string(name_of(p.laser)).c_str(),
                      p.coverage());
    }
    const bool bars_ok = bar_lo >= 4.0 && bar_hi <= 130.0;
    const bool pass = per_laser_ok && bars_ok &&
                      stats.pipeline_failures == 0 && elapsed < 600.0;
    report_line(4, "planted-delay recovery coverage", pass,
                detail + fmt("pooled=%.3f (soft target 0.95), min=%.3f >= "
                             "8/9=0.889, per-peak 3sigma %.0f..%.0f ps, "
                             "%.0f s < 600 s",
                             stats.pooled_coverage(), min_cov, bar_lo, bar_hi,
                             elapsed));
    CHECK(stats.pipeline_failures == 0);
    for (const auto& p : stats.per_laser) CHECK(p.coverage() >= 8.0 / 9.0);
    CHECK(stats.pooled_coverage() >= 8.0 / 9.0);
    WARN(stats.pooled_coverage() >= 0.95); // expected, not a hard bound
    CHECK(bars_ok);
    CHECK(elapsed < 600.0);
}

TEST_CASE("criterion 5: fitted-mean variance formula validation") {
    Stopwatch sw;
    // 1000 re-noised histograms of one true peak, constant-variance noise
    const double A = 1000.0, mu = 500.0, sigma = 85.0, dx = 10.0, s = 10.0;
    std::vector<double> x, clean;
    for (double xi = dx / 2.0; xi < 1000.0; xi += dx) {
        x.push_back(xi);
        const double z = (xi - mu) / sigma;
        clean.push_back(A * std::exp(-0.5 * z * z));
    }
    CounterRng rng(271828, 0);
    const int replicas = 1000;
    double sum = 0.0, sum2 = 0.0;
    for (int r = 0; r < replicas; ++r) {
        std::vector<double> f = clean;
        for (auto& v : f) v += s * rng.next_gaussian();
        const GaussianFit fit = fit_gaussian_points(x, f, dx);
        sum += fit.peak.mean;
        sum2 += fit.peak.mean * fit.peak.mean;
    }
    const double mean = sum / replicas;
    const double empirical = (sum2 - replicas * mean * mean) / (replicas - 1);
    const double predicted =
        mean_variance_closed_form(GaussianPeak{A, mu, sigma}, s * s, dx);
    const double ratio = empirical / predicted;

    // sum form vs closed form under the validity conditions
    std::vector<double> centers;
    const double sg = 100.0, dxg = 10.0; // 10 bins per sigma, +-6 sigma span
    for (double xi = mu - 6 * sg + dxg / 2; xi < mu + 6 * sg; xi += dxg)
        centers.push_back(xi);
    const GaussianPeak peak{A, mu, sg};
    const double sum_form = mean_variance_sum_form(peak, s * s, centers);
    const double closed_form = mean_variance_closed_form(peak, s * s, dxg);
    const double gap = std::abs(sum_form - closed_form) / closed_form;

    const double elapsed = sw.seconds();
    const bool pass =
        ratio > 0.8 && ratio < 1.25 && gap < 0.02 && elapsed < 120.0;
    report_line(5, "variance-formula validation", pass,
                fmt("empirical/predicted=%.3f in [0.8,1.25] over %d refits, "
                    "sum-vs-closed gap=%.2e%% < 2%%, %.1f s",
                    ratio, replicas, gap * 100.0, elapsed));
    CHECK(ratio > 0.8);
    CHECK(ratio < 1.25);
    CHECK(gap < 0.02);
    CHECK(elapsed < 120.0);
}

TEST_CASE("criterion 6: reported precision at session-scale statistics") {
    Stopwatch sw;
    // counts equivalent to the 97 s analysis interval for the V peaks
    SessionConfig cfg = load_session_config(config_path("oct31_2021.cfg"));
    cfg.channel.transmittance = 0.2;
    cfg.n_slots = 20000000;
    const PassResult pass_result = simulate_pass(
        cfg.emission, cfg.channel, cfg.n_slots, 31, cfg.n_threads);
    const Histogram pooled =
        fold_events(pass_result.events, pass_result.announcements,
                    std::nullopt, std::nullopt, cfg.emission.period,
                    cfg.analysis.bin_width);
    const TimePs center = pooled.origin + cfg.emission.period / 2.0;
    const auto bar = [&](AnnouncedClass cls) {
        const Histogram h = fold_events(
            pass_result.events, pass_result.announcements, cls, DetectorId::V,
            cfg.emission.period, cfg.analysis.bin_width, center);
        return fit_gaussian(h, cfg.analysis.fit).three_sigma();
    };
    const double vs = bar(AnnouncedClass::HsVs);
    const double vd = bar(AnnouncedClass::Vd);
    const double elapsed = sw.seconds();
    const bool pass = vs >= 3.0 && vs <= 12.0 && vd >= 9.5 && vd <= 38.0 &&
                      elapsed < 60.0;
    report_line(6, "fit-precision scale", pass,
                fmt("3sigma(V_s)=%.1f ps (target 6, factor 2), 3sigma(V_d)="
                    "%.1f ps (target 19, factor 2), %.1f s",
                    vs, vd, elapsed));
    CHECK(vs >= 3.0);
    CHECK(vs <= 12.0);
    CHECK(vd >= 9.5);
    CHECK(vd <= 38.0);
    CHECK(elapsed < 60.0);
}

TEST_CASE("criterion 7: end-to-end attack on the planted pass") {
    Stopwatch sw;
    const LoadedConfig lc = load_config_file(config_path("oct31_attack.cfg"));
    testsupport::TempDir tmp("acceptance-attack");
    cmd_simulate(lc, tmp.path());
    const AttackReport report =
        cmd_attack(lc.cfg, tmp.file("events.csv"), tmp.file("truth.csv"),
                   std::nullopt, tmp.path());
    const double elapsed = sw.seconds();
    const bool pass = report.has_empirical &&
                      report.accepted_events() >= 1000000 &&
                      report.distinguish_probability >= 0.984 &&
                      elapsed < 120.0;
    report_line(7, "end-to-end attack", pass,
                fmt("distinguish=%.4f >= 0.984 over %llu accepted events "
                    "(analytic %.4f), %.0f s < 120 s",
                    report.distinguish_probability,
                    static_cast<unsigned long long>(report.accepted_events()),
                    1.0 - report.analytic_failure, elapsed));
    CHECK(report.has_empirical);
    CHECK(report.accepted_events() >= 1000000);
    CHECK(report.distinguish_probability >= 0.984);
    CHECK(elapsed < 120.0);
}

TEST_CASE("criterion 8: property suites") {
    Stopwatch sw;
    std::string detail;
    bool pass = true;

    // determinism, including thread-count independence
    {
        const auto em = testsupport::oct31_emission();
        const auto ch = testsupport::oct31_channel();
        const PassResult a = simulate_pass(em, ch, 1000000, 7, 1);
        const PassResult b = simulate_pass(em, ch, 1000000, 7, 1);
        const PassResult c = simulate_pass(em, ch, 1000000, 7, 4);
        bool ok = a.events.size() == b.events.size() &&
                  a.events.size() == c.events.size();
        for (std::size_t i = 0; ok && i < a.events.size(); ++i)
            ok = a.events[i].timestamp == b.events[i].timestamp &&
                 a.events[i].timestamp == c.events[i].timestamp &&
                 a.events[i].slot == c.events[i].slot;
        pass = pass && ok;
        detail += fmt("determinism=%s ", ok ? "ok" : "FAIL");
        CHECK(ok);
    }

    // reference invariance: shifting every planted delay by a bin-aligned
    // constant leaves all seven relative estimates unchanged
    {
        auto em = testsupport::oct31_emission();
        const auto ch = testsupport::oct31_channel();
        const auto opt = testsupport::oct31_analysis();
        const PassResult base_pass = simulate_pass(em, ch, 3000000, 19);
        const AnalysisResult base =
            analyze_events(base_pass.events, base_pass.announcements,
                           em.period, opt);
        for (auto& d : em.delay) d += 50.0;
        const PassResult moved_pass = simulate_pass(em, ch, 3000000, 19);
        const AnalysisResult moved =
            analyze_events(moved_pass.events, moved_pass.announcements,
                           em.period, opt);
        double worst = 0.0;
        for (LaserId laser : reported_lasers)
            worst = std::max(worst,
                             std::abs(base.report.estimate(laser).value -
                                      moved.report.estimate(laser).value));
        const bool ok = worst < 1e-6;
        pass = pass && ok;
        detail += fmt("ref-invariance(max drift %.1e ps)=%s ", worst,
                      ok ? "ok" : "FAIL");
        CHECK(ok);
    }

    // variance summation is exact over the solver's linear forms
    {
        PeakTable t;
        double v = 0.5;
        for (const auto& [cls, det] : required_peaks()) {
            t.set(PeakTime{cls, det, 5000.0, v});
            v *= 1.7;
        }
        const DelayReport r = solve_delays(t);
        bool ok = true;
        for (const auto& d : r.delays) {
            double expect = 0.0;
            // recompute by brute force over the known equation terms
            const auto probe = [&](AnnouncedClass c, DetectorId dd) {
                return t.get(c, dd, "probe").variance;
            };
            using AC = AnnouncedClass;
            using D = DetectorId;
            switch (d.laser.index()) {
            case 1:
                expect = probe(AC::HsVs, D::V) + probe(AC::HsVs, D::H) +
                         probe(AC::DsAs, D::V) + probe(AC::DsAs, D::H);
                break;
            case 2:
                expect = probe(AC::DsAs, D::D) + probe(AC::Dd, D::D) +
                         probe(AC::Dd, D::H) + probe(AC::HsVs, D::H);
                break;
            case 3:
                expect = probe(AC::DsAs, D::A) + probe(AC::Ad, D::A) +
                         probe(AC::Ad, D::H) + probe(AC::HsVs, D::H);
                break;
            case 4:
                expect = probe(AC::Hd, D::H) + probe(AC::HsVs, D::H);
                break;
            case 5:
                expect = probe(AC::Vd, D::V) + probe(AC::HsVs, D::H) +
                         probe(AC::DsAs, D::V) + probe(AC::DsAs, D::H);
                break;
            case 6:
                expect = probe(AC::Dd, D::H) + probe(AC::HsVs, D::H);
                break;
            default:
                expect = probe(AC::Ad, D::H) + probe(AC::HsVs, D::H);
            }
            ok = ok && d.variance == doctest::Approx(expect).epsilon(1e-12);
        }
        pass = pass && ok;
        detail += fmt("variance-sums=%s ", ok ? "ok" : "FAIL");
        CHECK(ok);
    }

    // analytic vs Monte Carlo agreement on a second geometry
    {
        oracles::GateMonteCarlo mc;
        mc.run(500.0, 300.0, 120.0, 300000, 5);
        const double analytic =
            misclassification_probability(500.0, 300.0, 120.0);
        const double se = std::sqrt(
            analytic * (1 - analytic) / static_cast<double>(mc.own + mc.wrong));
        const bool ok = std::abs(mc.conditional_failure() - analytic) < 3 * se;
        pass = pass && ok;
        detail += fmt("mc-agreement=%s ", ok ? "ok" : "FAIL");
        CHECK(ok);
    }

    // monotonicity of the misclassification probability in the separation
    {
        bool ok = true;
        double prev = 1.0;
        for (double sep = 250.0; sep <= 2000.0; sep += 12.5) {
            const double f =
                misclassification_probability(sep, 235.0, kSigma200);
            ok = ok && f <= prev + 1e-15;
            prev = f;
        }
        pass = pass && ok;
        detail += fmt("monotonicity=%s", ok ? "ok" : "FAIL");
        CHECK(ok);
    }

    const double elapsed = sw.seconds();
    pass = pass && elapsed < 300.0;
    report_line(8, "property suites", pass,
                detail + fmt(", %.0f s < 300 s", elapsed));
    CHECK(elapsed < 300.0);
}
