// Command-line driver for the experiment harness.
#include "topkcert/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using topkcert::ExperimentConfig;
using topkcert::ExperimentId;

struct Options {
    ExperimentConfig cfg;
    std::string output;
    std::string plot_json;
    std::string records;
};

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw topkcert::InvalidInput("cannot write " + path);
    out << text;
}

// Flags shared by every subcommand. Defaults come from `cfg` as preset by the caller.
void add_common(CLI::App* sub, Options& opt) {
    auto& c = opt.cfg;
    sub->add_option("--n", c.n, "number of keys (repeatable)")->capture_default_str();
    sub->add_option("--sigma", c.sigma, "score standard deviation (repeatable)")->capture_default_str();
    sub->add_option("--mu", c.mu, "score mean")->capture_default_str();
    sub->add_option("--eps", c.eps, "TV tolerance (repeatable)")->capture_default_str();
    sub->add_option("--trials", c.trials, "trials or queries")->capture_default_str();
    sub->add_option("--seed", c.seed, "base seed")->capture_default_str();
    sub->add_option("--k", c.k, "requested Top-k")->capture_default_str();
    sub->add_option("--workers", c.workers, "worker threads (0: all cores)")->capture_default_str();
    sub->add_option("--output,-o", opt.output, "CSV output path (default stdout)");
}

void add_input(CLI::App* sub, Options& opt) {
    sub->add_option_function<std::string>("--input", [&opt](const std::string& p) { opt.cfg.input = p; },
                                          "attention dump (JSON Lines)")
        ->check(CLI::ExistingFile);
    sub->add_flag("--strict", opt.cfg.strict, "fail on the first malformed record");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Certified Top-k attention experiments"};
    app.require_subcommand(1);

    Options gauss;
    gauss.cfg.id = ExperimentId::GaussValidate;
    gauss.cfg.sigma = {0.5, 1.0, 2.0, 3.0};
    auto* gauss_cmd = app.add_subcommand("gauss-validate", "Gaussian-law certified size vs. simulation");
    add_common(gauss_cmd, gauss);

    Options longctx;
    longctx.cfg.id = ExperimentId::LongContext;
    longctx.cfg.n = {4096, 8192, 16384};
    longctx.cfg.eps = {0.001, 0.01, 0.05};
    longctx.cfg.trials = 50;
    auto* long_cmd = app.add_subcommand("long-context", "certified fraction k/n across context lengths");
    add_common(long_cmd, longctx);

    Options sweep;
    sweep.cfg.id = ExperimentId::EpsSweep;
    sweep.cfg.n = {512};
    sweep.cfg.eps = {0.001, 0.005, 0.01, 0.02, 0.05};
    auto* sweep_cmd = app.add_subcommand("eps-sweep", "certified size and speedup across tolerances");
    add_common(sweep_cmd, sweep);
    add_input(sweep_cmd, sweep);
    sweep_cmd->add_option("--plot-json", sweep.plot_json, "write curve points as JSON");

    Options sim;
    sim.cfg.id = ExperimentId::SearchSim;
    sim.cfg.n = {1024};
    sim.cfg.eps = {0.001};
    sim.cfg.trials = 5000;
    auto* sim_cmd = app.add_subcommand("search-sim", "certified search on synthetic key stores");
    add_common(sim_cmd, sim);
    sim_cmd->add_option("--cells", sim.cfg.cells, "index cells")->capture_default_str();
    sim_cmd->add_option("--dim", sim.cfg.dim, "key dimension")->capture_default_str();
    sim_cmd->add_option("--queries-per-store", sim.cfg.queries_per_store, "queries per key store")
        ->capture_default_str();
    sim_cmd->add_option("--batch", sim.cfg.batch, "keys scored per step (0: whole cell)")->capture_default_str();

    Options audit;
    audit.cfg.id = ExperimentId::AuditDump;
    audit.cfg.eps = {0.001, 0.005, 0.01, 0.02, 0.05};
    auto* audit_cmd = app.add_subcommand("audit-dump", "certificates over recorded attention rows");
    add_common(audit_cmd, audit);
    add_input(audit_cmd, audit);
    audit_cmd->get_option("--input")->required();
    audit_cmd->add_option("--records", audit.records, "per-row results as JSON Lines");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gauss_cmd->parsed()) {
            write_text(gauss.output, topkcert::run_gauss_validate(gauss.cfg).csv);
        } else if (long_cmd->parsed()) {
            write_text(longctx.output, topkcert::run_long_context(longctx.cfg).csv);
        } else if (sweep_cmd->parsed()) {
            const auto report = topkcert::run_eps_sweep(sweep.cfg);
            write_text(sweep.output, report.csv);
            if (!sweep.plot_json.empty()) write_text(sweep.plot_json, report.plot_json);
            if (report.skipped) std::cerr << "skipped " << report.skipped << " malformed records\n";
            if (report.monotonicity_violations) {
                std::cerr << "monotonicity violations: " << report.monotonicity_violations << "\n";
                return 1;
            }
        } else if (sim_cmd->parsed()) {
            const auto report = topkcert::run_search_sim(sim.cfg);
            write_text(sim.output, report.csv);
            if (report.violations) {
                std::cerr << "certificate violations: " << report.violations << "\n";
                return 1;
            }
        } else if (audit_cmd->parsed()) {
            const auto report = topkcert::run_audit_dump(audit.cfg);
            write_text(audit.output, report.csv);
            if (!audit.records.empty()) write_text(audit.records, report.records_jsonl);
            if (report.skipped) {
                std::cerr << "skipped " << report.skipped << " malformed records\n";
                for (const auto& e : report.errors) std::cerr << "  " << e << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
