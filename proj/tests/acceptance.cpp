// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
#include "topkcert/blockwise.hpp"
#include "topkcert/harness.hpp"
#include "topkcert/output_bounds.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

using namespace topkcert;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
};

int failures = 0;

void run(const char* name, double time_limit_s, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (time_limit_s > 0 && secs > time_limit_s) {
        out.ok = false;
        out.detail += " [over time limit " + std::to_string(time_limit_s) + " s]";
    }
    std::printf("%s %s (%.2f s) %s\n", out.ok ? "PASS" : "FAIL", name, secs, out.detail.c_str());
    std::fflush(stdout);
    if (!out.ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

// ---------------------------------------------------------------------------

Outcome identity_suite() {
    std::mt19937_64 gen(20240101);
    std::uniform_int_distribution<std::size_t> size(2, 256);
    double worst_tail = 0, worst_kl = 0;
    for (int rep = 0; rep < 100000; ++rep) {
        const auto s = oracle::uniform_scores(gen, size(gen), -50, 50);
        const std::size_t k = 1 + gen() % s.size();
        const ScoreVector sv(oracle::to_eigen(s));
        const SoftmaxSummary summary(sv);
        const auto kk = static_cast<Index>(k);
        const double tv_def = static_cast<double>(oracle::tv_from_definition(s, k));
        worst_tail = std::max(worst_tail, std::abs(tv_def - tv_exact(summary, kk)));
        worst_kl = std::max(worst_kl, std::abs(tv_def + std::expm1(-kl_truncated(summary, kk))));
    }
    return {worst_tail <= 1e-12 && worst_kl <= 1e-12,
            fmt("max |TV - tau| = %.3g, max |TV - (1 - e^-KL)| = %.3g over 1e5 vectors", worst_tail, worst_kl)};
}

// ---------------------------------------------------------------------------

std::vector<double> fuzz_scores(std::mt19937_64& gen, std::size_t n) {
    switch (gen() % 4) {
        case 0: return oracle::uniform_scores(gen, n, -50, 50);
        case 1: {
            std::normal_distribution<double> g(0.0, 0.1 + 3.0 * std::uniform_real_distribution<double>(0, 1)(gen));
            std::vector<double> s(n);
            for (auto& v : s) v = g(gen);
            return s;
        }
        case 2: {  // few distinct levels, many ties
            std::vector<double> levels = oracle::uniform_scores(gen, 1 + gen() % 4, -10, 10);
            std::vector<double> s(n);
            for (auto& v : s) v = levels[gen() % levels.size()];
            return s;
        }
        default: {  // sharp head above a flat tail
            auto s = oracle::uniform_scores(gen, n, -1, 1);
            const std::size_t h = 1 + gen() % n;
            const double lift = std::uniform_real_distribution<double>(0, 30)(gen);
            for (std::size_t i = 0; i < h; ++i) s[i] += lift;
            return s;
        }
    }
}

long double block_discarded(const std::vector<long double>& p, const BlockPartition& part,
                            const std::vector<Index>& kept) {
    long double keep = 0;
    for (Index b : kept)
        for (Index i : part.block(b)) keep += p[static_cast<std::size_t>(i)];
    return 1 - keep;
}

Outcome certificate_soundness() {
    std::mt19937_64 gen(777);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    // Bounds are compared against the long-double oracle with 1e-12 absolute
    // slack for double rounding in the bound itself.
    constexpr double slack = 1e-12;
    long violations[4] = {0, 0, 0, 0};
    long checked[4] = {0, 0, 0, 0};
    for (int rep = 0; rep < 100000; ++rep) {
        const std::size_t n = 2 + gen() % 127;
        const auto s = fuzz_scores(gen, n);
        const ScoreVector sv(oracle::to_eigen(s));
        const double eps = std::exp(std::uniform_real_distribution<double>(std::log(1e-6), std::log(0.5))(gen));

        const std::size_t k = 1 + gen() % n;
        const double tv = static_cast<double>(oracle::tail_mass(s, k));
        const auto kk = static_cast<Index>(k);
        ++checked[0];
        if (gap_certificate(sv, kk, eps).tv_bound < tv - slack) ++violations[0];
        ++checked[1];
        if (multigap_certificate(sv, kk, eps).tv_bound < tv - slack) ++violations[1];

        // Block size below n so there are always at least two blocks.
        const auto part = BlockPartition::contiguous(static_cast<Index>(n), 1 + static_cast<Index>(gen() % std::min<std::size_t>(8, n - 1)));
        const Index M = part.num_blocks();
        const auto p = oracle::softmax(s);
        const auto bm = summarize_blocks(sv, part);
        if (M >= 2) {
            const Index alpha = 1 + static_cast<Index>(gen() % static_cast<std::size_t>(M - 1));
            const auto c = block_gap_certificate(bm, alpha, eps);
            ++checked[2];
            if (c.tv_bound < static_cast<double>(block_discarded(p, part, std::get<BlockGapWitness>(c.witness).kept_blocks)) - slack)
                ++violations[2];
        }
        // Interval bounds: each block mass widened by random factors in log scale.
        Eigen::VectorXd lo(M), hi(M);
        for (Index b = 0; b < M; ++b) {
            lo[b] = bm.log_mass[b] - 3.0 * unit(gen);
            hi[b] = bm.log_mass[b] + 3.0 * unit(gen);
        }
        const Index alpha = 1 + static_cast<Index>(gen() % static_cast<std::size_t>(M));
        const auto c = block_mass_certificate(BlockMassInterval(lo, hi, BlockMassInterval::Scale::Log), alpha, eps);
        ++checked[3];
        if (c.tv_bound < static_cast<double>(block_discarded(p, part, std::get<BlockMassWitness>(c.witness).kept_blocks)) - slack)
            ++violations[3];
    }

    // Two-level extremal configuration: k scores at level a, n-k at a - gap.
    double worst_eq = 0;
    for (Index n : {2, 5, 17, 100, 1000})
        for (Index k = 1; k < n; k += std::max<Index>(1, n / 7))
            for (double gap : {0.0, 0.3, 2.0, 7.5, 20.0}) {
                Eigen::VectorXd s = Eigen::VectorXd::Constant(n, -1.25);
                s.head(k).array() += gap;
                const ScoreVector sv(s);
                const double exact = static_cast<double>(
                    oracle::tail_mass(std::vector<double>(s.data(), s.data() + n), static_cast<std::size_t>(k)));
                worst_eq = std::max(worst_eq, std::abs(gap_certificate(sv, k, 0.5).tv_bound - exact));
            }

    const long total = violations[0] + violations[1] + violations[2] + violations[3];
    std::ostringstream d;
    d << "violations gap/multigap/blockgap/blockmass = " << violations[0] << "/" << violations[1] << "/"
      << violations[2] << "/" << violations[3] << " over " << checked[0] << "/" << checked[1] << "/" << checked[2]
      << "/" << checked[3] << " instances; two-level equality max err = " << worst_eq;
    const bool full = checked[0] == 100000 && checked[1] == 100000 && checked[2] == 100000 && checked[3] == 100000;
    return {total == 0 && worst_eq <= 1e-12 && full, d.str()};
}

// ---------------------------------------------------------------------------

Outcome output_bound_suite() {
    std::mt19937_64 gen(4242);
    double worst_identity = 0, worst_ltv = 0;
    long order_violations = 0;
    constexpr int instances = 20000;
    for (int rep = 0; rep < instances; ++rep) {
        const std::size_t n = 2 + gen() % 63;
        const auto s = fuzz_scores(gen, n);
        const auto nn = static_cast<Index>(n);
        const Index dv = 1 + static_cast<Index>(gen() % 8);
        const double vscale = std::exp(std::uniform_real_distribution<double>(-3, 3)(gen));
        std::normal_distribution<double> g(0.0, vscale);
        Eigen::MatrixXd V(nn, dv);
        for (Index i = 0; i < nn; ++i)
            for (Index c = 0; c < dv; ++c) V(i, c) = g(gen);
        const Index k = 1 + static_cast<Index>(gen() % n);
        const ScoreVector sv(oracle::to_eigen(s));
        const auto r = head_tail_report(sv, k, V);

        // Direct error from the oracle's long-double distributions.
        const auto p = oracle::softmax(s);
        const auto keep = oracle::topk(s, static_cast<std::size_t>(k));
        long double kept = 0;
        for (auto i : keep) kept += p[i];
        std::vector<long double> q(n, 0);
        for (auto i : keep) q[i] = p[i] / kept;
        const double C = std::max(1.0, r.norm_cap);
        for (Index c = 0; c < dv; ++c) {
            long double direct = 0;
            for (std::size_t i = 0; i < n; ++i) direct += (p[i] - q[i]) * V(static_cast<Index>(i), c);
            const double identity = r.tau * (r.mu_tail[c] - r.mu_head[c]);
            worst_identity = std::max(worst_identity, std::abs(identity - static_cast<double>(direct)) / C);
        }

        const double rel = 1e-12;
        if (r.exact_error > r.best * (1 + rel) + 1e-15 * C || r.best > r.bounds.crude * (1 + rel) + 1e-15 * C)
            ++order_violations;

        const double ltv = (1 - r.tau) * r.var_head + r.tau * r.var_tail +
                           r.tau * (1 - r.tau) * (r.mu_tail - r.mu_head).squaredNorm();
        worst_ltv = std::max(worst_ltv, std::abs(ltv - r.var_full) / std::max(1.0, r.norm_cap * r.norm_cap));
    }
    return {worst_identity <= 1e-10 && order_violations == 0 && worst_ltv <= 1e-10,
            fmt("identity max rel err = %.3g, ordering violations = %.0f, total-variance max rel err = %.3g over 2e4 instances",
                worst_identity, static_cast<double>(order_violations), worst_ltv)};
}

// ---------------------------------------------------------------------------

Outcome minimax_cut_suite() {
    std::mt19937_64 gen(99);
    int mismatches = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const Index n = 2 + static_cast<Index>(gen() % 9);
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
        const bool ties = rep % 2 == 0;
        for (Index i = 0; i < n; ++i)
            for (Index j = i + 1; j < n; ++j)
                w(i, j) = w(j, i) = ties ? static_cast<double>(gen() % 4) : std::uniform_real_distribution<double>(0, 10)(gen);
        if (minimax_cut(w).cut_value != oracle::exhaustive_minimax_cut(w)) ++mismatches;
    }
    return {mismatches == 0, fmt("%.0f mismatches against exhaustive enumeration on 200 matrices", mismatches)};
}

// ---------------------------------------------------------------------------

GaussReport gauss_table() {
    ExperimentConfig cfg;
    cfg.id = ExperimentId::GaussValidate;
    cfg.n = {10000};
    cfg.sigma = {0.5, 1.0, 2.0, 3.0};
    cfg.eps = {0.01};
    cfg.trials = 100;
    cfg.seed = 42;
    return run_gauss_validate(cfg);
}

Outcome gaussian_law() {
    const auto rep = gauss_table();
    const double reference[] = {9662, 9077, 6280};
    bool ok = true;
    std::ostringstream d;
    for (int i = 0; i < 3; ++i) {
        const auto& r = rep.rows[static_cast<std::size_t>(i)];
        const double rel = std::abs(r.alpha_emp_mean - reference[i]) / reference[i];
        ok = ok && rel <= 0.005 && static_cast<double>(r.alpha_gauss_ceil) == reference[i];
        d << "sigma=" << r.sigma << " mean=" << r.alpha_emp_mean << " (rel " << rel << "); ";
    }
    const auto& r3 = rep.rows[3];
    const double excess = (r3.alpha_emp_mean - r3.alpha_gauss) / r3.alpha_gauss;
    ok = ok && excess >= 0.02 && excess <= 0.05;
    d << "sigma=3 mean=" << r3.alpha_emp_mean << " vs theory " << r3.alpha_gauss << " (+" << 100 * excess << "%)";
    return {ok, d.str()};
}

// ---------------------------------------------------------------------------

LongContextReport long_context_table() {
    ExperimentConfig cfg;
    cfg.id = ExperimentId::LongContext;
    cfg.n = {4096, 16384};
    cfg.sigma = {1.0};
    cfg.eps = {0.001, 0.01, 0.05};
    cfg.trials = 50;
    return run_long_context(cfg);
}

Outcome long_context() {
    const auto rep = long_context_table();
    const double reference[] = {0.9817, 0.9076, 0.7405};
    bool ok = rep.rows.size() == 6;
    double worst = 0;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& r = rep.rows[i];
        worst = std::max(worst, r.abs_dev);
        ok = ok && r.abs_dev <= 0.002 && std::abs(r.ratio_theory - reference[i % 3]) <= 1e-4;
    }
    return {ok, fmt("max |k_mc/n - theory| = %.3g over n in {4096, 16384}, 50 trials", worst)};
}

// ---------------------------------------------------------------------------

ExperimentConfig search_config() {
    ExperimentConfig cfg;
    cfg.id = ExperimentId::SearchSim;
    cfg.n = {1024};
    cfg.k = 16;
    cfg.eps = {1e-3};
    cfg.trials = 5000;  // per regime
    cfg.cells = 64;
    cfg.dim = 64;
    return cfg;
}

Outcome search_soundness() {
    const auto rep = run_search_sim(search_config());
    bool ok = rep.violations == 0;
    Index queries = 0;
    double worst_planted = 0;
    for (const auto& r : rep.rows) {
        if (r.algorithm == "delta") queries += r.queries;
        if (r.regime == "planted") worst_planted = std::max(worst_planted, r.mean_scored_fraction);
        ok = ok && r.violations == 0;
    }
    ok = ok && worst_planted <= 0.2 && queries >= 10000;
    return {ok, fmt("%.0f queries, %.0f violations, planted mean scored fraction <= %.4f", static_cast<double>(queries),
                    static_cast<double>(rep.violations), worst_planted)};
}

// ---------------------------------------------------------------------------

ExperimentConfig sweep_config() {
    ExperimentConfig cfg;
    cfg.id = ExperimentId::EpsSweep;
    cfg.n = {512};
    cfg.sigma = {1.0};
    cfg.eps = {0.001, 0.005, 0.01, 0.02, 0.05};
    cfg.trials = 100;
    return cfg;
}

Outcome eps_monotonicity() {
    const auto rep = run_eps_sweep(sweep_config());
    bool increasing = true;
    std::ostringstream d;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        if (i > 0 && !(rep.rows[i].speedup > rep.rows[i - 1].speedup)) increasing = false;
        d << rep.rows[i].eps << ":" << rep.rows[i].speedup << " ";
    }
    return {rep.monotonicity_violations == 0 && increasing,
            "per-query violations = " + std::to_string(rep.monotonicity_violations) + "; speedup by eps " + d.str()};
}

// ---------------------------------------------------------------------------

std::filesystem::path synthetic_dump() {
    std::mt19937_64 gen(5);
    const auto path = std::filesystem::temp_directory_path() / "acceptance_dump.jsonl";
    std::ofstream out(path);
    for (int layer = 0; layer < 3; ++layer)
        for (int head = 0; head < 4; ++head)
            for (int q = 0; q < 25; ++q) {
                AttentionDumpRecord r;
                r.layer = layer;
                r.head = head;
                r.query = q;
                const auto s = oracle::uniform_scores(gen, 8 + gen() % 120, -6, 6);
                if (q % 2) {
                    r.mode = DumpMode::Logits;
                    r.values = s;
                } else {
                    const auto p = oracle::softmax(s);
                    r.values.assign(p.begin(), p.end());
                }
                out << format_dump_record(r) << '\n';
            }
    return path;
}

Outcome determinism() {
    int mismatches = 0;
    std::vector<std::string> which;
    auto compare = [&](const char* name, const std::string& a, const std::string& b) {
        if (a != b || a.empty()) {
            ++mismatches;
            which.push_back(name);
        }
    };

    compare("gauss-validate", gauss_table().csv, gauss_table().csv);
    compare("long-context", long_context_table().csv, long_context_table().csv);

    auto sweep = sweep_config();
    sweep.workers = 1;
    const auto sweep_a = run_eps_sweep(sweep);
    sweep.workers = 3;
    const auto sweep_b = run_eps_sweep(sweep);
    compare("eps-sweep", sweep_a.csv, sweep_b.csv);
    compare("eps-sweep plot", sweep_a.plot_json, sweep_b.plot_json);

    auto sim = search_config();
    sim.trials = 1000;
    sim.workers = 1;
    const auto sim_a = run_search_sim(sim).csv;
    sim.workers = 2;
    compare("search-sim", sim_a, run_search_sim(sim).csv);

    ExperimentConfig audit;
    audit.id = ExperimentId::AuditDump;
    audit.eps = {0.001, 0.01, 0.05};
    audit.input = synthetic_dump();
    audit.workers = 1;
    const auto audit_a = run_audit_dump(audit);
    audit.workers = 4;
    const auto audit_b = run_audit_dump(audit);
    compare("audit-dump", audit_a.csv, audit_b.csv);
    compare("audit-dump records", audit_a.records_jsonl, audit_b.records_jsonl);
    std::filesystem::remove(*audit.input);

    std::string detail = "byte-identical reruns of all five experiments";
    if (mismatches) {
        detail = "differing output:";
        for (const auto& w : which) detail += " " + w;
    }
    return {mismatches == 0, detail};
}

}  // namespace

int main() {
    run("identity-suite", 10, identity_suite);
    run("certificate-soundness", 0, certificate_soundness);
    run("output-bounds", 0, output_bound_suite);
    run("minimax-cut", 5, minimax_cut_suite);
    run("gaussian-law", 60, gaussian_law);
    run("long-context-scaling", 120, long_context);
    run("search-soundness", 120, search_soundness);
    run("eps-monotonicity", 0, eps_monotonicity);
    run("determinism", 0, determinism);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
