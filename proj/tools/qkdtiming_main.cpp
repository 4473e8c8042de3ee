// Command-line front end: simulate a transmitter pass, recover the per-laser
// firing delays from the detection logs, and evaluate the timing-gate
// intensity-distinguishing attack.
//
// Exit status: 0 success, 1 validation error, 2 runtime/fit error.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <qkdtiming/commands.hpp>

namespace {

using namespace qkdtiming;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> n_slots;
    std::optional<int> n_threads;
    std::optional<double> bin_width;
    std::optional<double> window_start;
    std::optional<double> window_end;
};

LoadedConfig load_with_overrides(const CommonArgs& args) {
    LoadedConfig lc = load_config_file(args.config_path);
    if (args.seed) lc.cfg.seed = *args.seed;
    if (args.n_slots) lc.cfg.n_slots = *args.n_slots;
    if (args.n_threads) lc.cfg.n_threads = *args.n_threads;
    if (args.bin_width) lc.cfg.analysis.bin_width = *args.bin_width;
    if (args.window_start) lc.cfg.analysis.window_start = *args.window_start;
    if (args.window_end) lc.cfg.analysis.window_end = *args.window_end;
    lc.cfg.validate();
    return lc;
}

void add_common_options(CLI::App* sub, CommonArgs& args) {
    sub->add_option("-c,--config", args.config_path, "session config file")
        ->required();
    sub->add_option("--seed", args.seed, "override the configured seed");
    sub->add_option("--slots", args.n_slots, "override the configured n_slots");
    sub->add_option("--threads", args.n_threads,
                    "simulation worker threads (output is thread-count "
                    "independent)");
}

void add_analysis_options(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--bin-width", args.bin_width, "histogram bin width, ps");
    sub->add_option("--window-start", args.window_start,
                    "ignore events before this absolute timestamp, ps");
    sub->add_option("--window-end", args.window_end,
                    "ignore events at or after this absolute timestamp, ps");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"decoy-state BB84 laser-timing side channel toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string output_dir = ".";
    std::string events_path, announcements_path, output_path;
    std::optional<std::string> truth_path, attack_announcements;
    int n_seeds = 100;
    std::uint64_t base_seed = 1;
    double sep_min = 240, sep_max = 400, sep_step = 10;
    double width_min = 100, width_max = 400, width_step = 10;

    CLI::App* simulate = app.add_subcommand(
        "simulate", "generate event/truth/announcement logs for one pass");
    add_common_options(simulate, args);
    simulate->add_option("-o,--output-dir", output_dir, "output directory")
        ->required();

    CLI::App* analyze = app.add_subcommand(
        "analyze", "recover the seven laser delays from detection logs");
    add_common_options(analyze, args);
    add_analysis_options(analyze, args);
    analyze->add_option("--events", events_path, "event log")->required();
    analyze
        ->add_option("--announcements", announcements_path,
                     "sifting announcement log")
        ->required();
    analyze->add_option("-o,--output-dir", output_dir, "output directory")
        ->required();

    CLI::App* attack = app.add_subcommand(
        "attack", "classify events with two time gates and report");
    add_common_options(attack, args);
    attack->add_option("--events", events_path, "event log")->required();
    attack->add_option("--truth", truth_path,
                       "truth log (enables the empirical confusion matrix)");
    attack->add_option("--announcements", attack_announcements,
                       "announcement log (derives gate centers when the "
                       "config has none)");
    attack->add_option("-o,--output-dir", output_dir, "output directory")
        ->required();

    CLI::App* sweep = app.add_subcommand(
        "sweep", "failure probability over a separation x gate-width grid");
    add_common_options(sweep, args);
    sweep->add_option("--sep-min", sep_min, "smallest separation, ps");
    sweep->add_option("--sep-max", sep_max, "largest separation, ps");
    sweep->add_option("--sep-step", sep_step, "separation step, ps");
    sweep->add_option("--width-min", width_min, "smallest gate width, ps");
    sweep->add_option("--width-max", width_max, "largest gate width, ps");
    sweep->add_option("--width-step", width_step, "gate width step, ps");
    sweep->add_option("-o,--output", output_path, "output csv")->required();

    CLI::App* coverage = app.add_subcommand(
        "coverage", "3-sigma coverage of the delay recovery over many seeds");
    add_common_options(coverage, args);
    add_analysis_options(coverage, args);
    coverage->add_option("--seeds", n_seeds, "number of independent seeds");
    coverage->add_option("--base-seed", base_seed, "first seed of the batch");
    coverage->add_option("-o,--output", output_path, "output csv")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            const LoadedConfig lc = load_with_overrides(args);
            const PassResult pass = cmd_simulate(lc, output_dir);
            std::printf("simulate: %zu events over %llu slots -> %s\n",
                        pass.events.size(),
                        static_cast<unsigned long long>(lc.cfg.n_slots),
                        output_dir.c_str());
        } else if (analyze->parsed()) {
            const LoadedConfig lc = load_with_overrides(args);
            const AnalysisResult result = cmd_analyze(
                lc.cfg, events_path, announcements_path, output_dir);
            std::printf("analyze: session '%s'\n",
                        result.report.session.c_str());
            std::printf("%-6s %12s %16s\n", "laser", "delay_ps",
                        "three_sigma_ps");
            for (const auto& d : result.report.delays)
                std::printf("%-6s %12.2f %16.2f\n",
                            std::string(name_of(d.laser)).c_str(), d.value,
                            d.three_sigma);
        } else if (attack->parsed()) {
            const LoadedConfig lc = load_with_overrides(args);
            const AttackReport report =
                cmd_attack(lc.cfg, events_path, truth_path,
                           attack_announcements, output_dir);
            std::printf("attack: separation %.1f ps, gate width %.1f ps\n",
                        report.gates.separation(), report.gates.width);
            std::printf("  analytic failure      %.4f\n",
                        report.analytic_failure);
            if (report.has_empirical)
                std::printf("  empirical failure     %.4f  (%llu accepted "
                            "events)\n",
                            report.failure_probability,
                            static_cast<unsigned long long>(
                                report.accepted_events()));
            std::printf("  distinguish           %.4f\n",
                        report.distinguish_probability);
        } else if (sweep->parsed()) {
            const LoadedConfig lc = load_with_overrides(args);
            cmd_sweep(lc.cfg, sep_min, sep_max, sep_step, width_min, width_max,
                      width_step, output_path);
            std::printf("sweep: wrote %s\n", output_path.c_str());
        } else if (coverage->parsed()) {
            const LoadedConfig lc = load_with_overrides(args);
            const CoverageStats stats =
                cmd_coverage(lc.cfg, n_seeds, base_seed, output_path);
            std::printf("coverage: pooled %.4f over %d seeds (%llu pipeline "
                        "failures)\n",
                        stats.pooled_coverage(), n_seeds,
                        static_cast<unsigned long long>(
                            stats.pipeline_failures));
        }
    } catch (const config_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
