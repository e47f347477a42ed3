#include "topkcert/harness.hpp"

#include "topkcert/gaussian.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace topkcert {

std::string_view to_string(ExperimentId id) {
    switch (id) {
        case ExperimentId::GaussValidate: return "gauss-validate";
        case ExperimentId::LongContext: return "long-context";
        case ExperimentId::EpsSweep: return "eps-sweep";
        case ExperimentId::SearchSim: return "search-sim";
        case ExperimentId::AuditDump: return "audit-dump";
    }
    return "unknown";
}

void ExperimentConfig::validate() const {
    if (trials < 1) throw DomainError("trials must be >= 1");
    if (eps.empty()) throw DomainError("need at least one eps");
    for (double e : eps) require_epsilon(e);
    if (k < 1) throw DomainError("k must be >= 1");
    for (Index v : n)
        if (v < 2) throw DomainError("n must be >= 2");
    for (double s : sigma)
        if (!(s > 0.0)) throw DomainError("sigma must be > 0");
    if (!std::isfinite(mu)) throw DomainError("mu must be finite");
    if (id == ExperimentId::AuditDump && !input) throw DomainError("audit-dump needs an input dump");
    if ((id == ExperimentId::GaussValidate || id == ExperimentId::LongContext) && (n.empty() || sigma.empty()))
        throw DomainError("need n and sigma values");
    if (id == ExperimentId::SearchSim) {
        if (n.empty() || k >= n.front()) throw DomainError("search-sim needs 1 <= k < n");
        if (cells < 1 || cells > n.front()) throw DomainError("cells must satisfy 1 <= cells <= n");
        if (dim < 1 || queries_per_store < 1 || batch < 0) throw DomainError("bad search-sim sizes");
    }
}

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string num(Index v) { return std::to_string(v); }

class CsvWriter {
public:
    explicit CsvWriter(std::initializer_list<std::string_view> header) {
        bool first = true;
        for (auto h : header) {
            if (!first) out_ << ',';
            out_ << h;
            first = false;
        }
        out_ << '\n';
    }

    template <typename... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
    }

    std::string str() const { return out_.str(); }

private:
    static std::string cell(double v) { return num(v); }
    static std::string cell(Index v) { return num(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }

    std::ostringstream out_;
};

// Runs fn(i) for i in [0, count) on a small pool; results land by index so
// output does not depend on scheduling.
template <typename Fn>
auto parallel_map(Index count, unsigned workers, Fn fn) {
    using Result = decltype(fn(Index{0}));
    std::vector<Result> results(static_cast<std::size_t>(count));
    unsigned threads = workers ? workers : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<Index>(threads, count));
    if (threads <= 1) {
        for (Index i = 0; i < count; ++i) results[static_cast<std::size_t>(i)] = fn(i);
        return results;
    }
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (Index i = w; i < count; i += threads) results[static_cast<std::size_t>(i)] = fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    pool.clear();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

ScoreVector gaussian_trial(double mu, double sigma, Index n, std::uint64_t seed) {
    Eigen::VectorXd z = standard_normal_draws(n, seed);
    return ScoreVector(Eigen::VectorXd((sigma * z.array() + mu).matrix()));
}

}  // namespace

double percentile(std::vector<double> values, double p) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// ---------------------------------------------------------------------------

GaussReport run_gauss_validate(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::size_t combos = cfg.sigma.size() * cfg.eps.size();
    GaussReport report;
    CsvWriter csv({"n", "eps", "sigma", "alpha_gauss", "alpha_gauss_ceil", "alpha_emp_mean", "alpha_emp_std",
                   "rel_dev", "trials"});

    for (Index n : cfg.n) {
        // alpha[trial][sigma * |eps| + eps]
        auto alpha = parallel_map(cfg.trials, cfg.workers, [&](Index t) {
            std::vector<double> out;
            out.reserve(combos);
            for (double sigma : cfg.sigma) {
                const SoftmaxSummary summary(gaussian_trial(cfg.mu, sigma, n, cfg.seed + static_cast<std::uint64_t>(t)));
                for (double e : cfg.eps) out.push_back(static_cast<double>(min_k_exact(summary, e)));
            }
            return out;
        });
        for (std::size_t si = 0; si < cfg.sigma.size(); ++si) {
            for (std::size_t ei = 0; ei < cfg.eps.size(); ++ei) {
                std::vector<double> samples;
                for (const auto& a : alpha) samples.push_back(a[si * cfg.eps.size() + ei]);
                GaussRow row;
                row.n = n;
                row.eps = cfg.eps[ei];
                row.sigma = cfg.sigma[si];
                const auto theory = k_eps(GaussianScoreModel(cfg.mu, row.sigma, n), row.eps);
                row.alpha_gauss = theory.expected;
                row.alpha_gauss_ceil = theory.ceiling;
                row.alpha_emp_mean = mean(samples);
                row.alpha_emp_std = sample_std(samples);
                row.rel_dev = (row.alpha_emp_mean - static_cast<double>(row.alpha_gauss_ceil)) /
                              static_cast<double>(row.alpha_gauss_ceil);
                row.trials = cfg.trials;
                csv.row(row.n, row.eps, row.sigma, row.alpha_gauss, row.alpha_gauss_ceil, row.alpha_emp_mean,
                        row.alpha_emp_std, row.rel_dev, row.trials);
                report.rows.push_back(row);
            }
        }
    }
    report.csv = csv.str();
    return report;
}

// ---------------------------------------------------------------------------

LongContextReport run_long_context(const ExperimentConfig& cfg) {
    cfg.validate();
    LongContextReport report;
    CsvWriter csv({"n", "eps", "sigma", "ratio_emp", "ratio_theory", "abs_dev", "trials"});
    for (Index n : cfg.n) {
        for (double sigma : cfg.sigma) {
            auto kmc = parallel_map(cfg.trials, cfg.workers, [&](Index t) {
                const SoftmaxSummary summary(gaussian_trial(cfg.mu, sigma, n, cfg.seed + static_cast<std::uint64_t>(t)));
                std::vector<double> out;
                for (double e : cfg.eps) out.push_back(static_cast<double>(min_k_exact(summary, e)));
                return out;
            });
            for (std::size_t ei = 0; ei < cfg.eps.size(); ++ei) {
                std::vector<double> ratios;
                for (const auto& k : kmc) ratios.push_back(k[ei] / static_cast<double>(n));
                LongContextRow row;
                row.n = n;
                row.eps = cfg.eps[ei];
                row.sigma = sigma;
                row.ratio_emp = mean(ratios);
                row.ratio_theory = k_eps(GaussianScoreModel(cfg.mu, sigma, n), row.eps).ratio;
                row.abs_dev = std::abs(row.ratio_emp - row.ratio_theory);
                row.trials = cfg.trials;
                csv.row(row.n, row.eps, row.sigma, row.ratio_emp, row.ratio_theory, row.abs_dev, row.trials);
                report.rows.push_back(row);
            }
        }
    }
    report.csv = csv.str();
    return report;
}

// ---------------------------------------------------------------------------

namespace {

struct SweepQuery {
    Index n = 0;
    double tv_at_k = 0.0;
    std::vector<Index> k_mc;
    std::vector<bool> gap_pass;
};

SweepQuery sweep_query(const ScoreVector& sv, Index k, const std::vector<double>& eps) {
    SweepQuery q;
    q.n = sv.size();
    const SoftmaxSummary summary(sv);
    const Index k_adj = std::min(k, q.n - 1);
    q.tv_at_k = tv_exact(summary, k_adj);
    for (double e : eps) {
        q.k_mc.push_back(min_k_exact(summary, e));
        q.gap_pass.push_back(gap_certificate(sv, k_adj, e).passed);
    }
    return q;
}

}  // namespace

EpsSweepReport run_eps_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    EpsSweepReport report;
    std::vector<SweepQuery> queries;
    const bool gaussian = !cfg.input.has_value();
    if (gaussian) {
        const Index n = cfg.n.front();
        const double sigma = cfg.sigma.front();
        queries = parallel_map(cfg.trials, cfg.workers, [&](Index t) {
            return sweep_query(gaussian_trial(cfg.mu, sigma, n, cfg.seed + static_cast<std::uint64_t>(t)), cfg.k, cfg.eps);
        });
    } else {
        std::ifstream in(*cfg.input);
        if (!in) throw InvalidInput("cannot open " + cfg.input->string());
        auto dump = read_dump(in, cfg.strict);
        report.skipped = dump.skipped;
        queries = parallel_map(static_cast<Index>(dump.records.size()), cfg.workers, [&](Index i) {
            return sweep_query(dump.records[static_cast<std::size_t>(i)].to_scores(), cfg.k, cfg.eps);
        });
    }

    std::vector<std::size_t> ascending(cfg.eps.size());
    std::iota(ascending.begin(), ascending.end(), std::size_t{0});
    std::stable_sort(ascending.begin(), ascending.end(), [&](auto a, auto b) { return cfg.eps[a] < cfg.eps[b]; });
    for (const auto& q : queries)
        for (std::size_t t = 1; t < ascending.size(); ++t)
            if (q.k_mc[ascending[t]] > q.k_mc[ascending[t - 1]]) ++report.monotonicity_violations;

    CsvWriter csv({"eps", "queries", "mean_n", "mean_kmc", "p95_kmc", "fraction", "speedup", "mean_speedup",
                   "tv_mean_at_k", "gap_pass_pct", "theory_ratio"});
    nlohmann::json plot{{"eps", nlohmann::json::array()},
                        {"speedup", nlohmann::json::array()},
                        {"fraction", nlohmann::json::array()},
                        {"mean_kmc", nlohmann::json::array()}};
    for (std::size_t ei = 0; ei < cfg.eps.size(); ++ei) {
        std::vector<double> ns, kmc, speed, tv;
        double pass = 0.0;
        for (const auto& q : queries) {
            ns.push_back(static_cast<double>(q.n));
            kmc.push_back(static_cast<double>(q.k_mc[ei]));
            speed.push_back(static_cast<double>(q.n) / static_cast<double>(q.k_mc[ei]));
            tv.push_back(q.tv_at_k);
            pass += q.gap_pass[ei] ? 1.0 : 0.0;
        }
        EpsSweepRow row;
        row.eps = cfg.eps[ei];
        row.queries = static_cast<Index>(queries.size());
        row.mean_n = mean(ns);
        row.mean_kmc = mean(kmc);
        row.p95_kmc = percentile(kmc, 0.95);
        row.fraction = row.mean_kmc / row.mean_n;
        row.speedup = row.mean_n / row.mean_kmc;
        row.mean_speedup = mean(speed);
        row.tv_mean_at_k = mean(tv);
        row.gap_pass_pct = queries.empty() ? 0.0 : 100.0 * pass / static_cast<double>(queries.size());
        row.theory_ratio = gaussian ? k_eps(GaussianScoreModel(cfg.mu, cfg.sigma.front(), cfg.n.front()), row.eps).ratio
                                    : std::numeric_limits<double>::quiet_NaN();
        csv.row(row.eps, row.queries, row.mean_n, row.mean_kmc, row.p95_kmc, row.fraction, row.speedup,
                row.mean_speedup, row.tv_mean_at_k, row.gap_pass_pct, row.theory_ratio);
        plot["eps"].push_back(row.eps);
        plot["speedup"].push_back(row.speedup);
        plot["fraction"].push_back(row.fraction);
        plot["mean_kmc"].push_back(row.mean_kmc);
        report.rows.push_back(row);
    }
    report.csv = csv.str();
    report.plot_json = plot.dump(2) + "\n";
    return report;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kAlgorithms[] = {"delta", "mc", "mc-adaptive", "hybrid"};
constexpr std::size_t kNumAlgorithms = 4;
constexpr const char* kRegimes[] = {"planted", "flat"};

// Planted geometry: groups of k keys around orthonormal directions; a query
// aimed at one group scores it near kPlantedScore and everything else near 0.
constexpr double kGroupRadius = 4.0;
constexpr double kKeyNoise = 0.05;
constexpr double kQueryNoise = 0.01;
constexpr double kPlantedScore = 16.0;
constexpr double kFlatQueryScale = 1e-3;

struct SimStore {
    KeyStore store;
    Eigen::MatrixXd directions;  // one column per group (planted only)
};

SimStore make_store(bool planted, Index n, Index d, Index k, std::mt19937_64& gen) {
    std::normal_distribution<double> normal(0.0, 1.0);
    auto gaussian = [&](Index rows, Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i) m(i, j) = normal(gen);
        return m;
    };
    SimStore sim;
    if (!planted) {
        sim.store = KeyStore(gaussian(n, d));
        return sim;
    }
    const Index groups = (n + k - 1) / k;
    if (groups <= d) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(d, d));
        sim.directions = (qr.householderQ() * Eigen::MatrixXd::Identity(d, d)).leftCols(groups);
    } else {
        sim.directions = gaussian(d, groups);
        sim.directions.colwise().normalize();
    }
    Eigen::MatrixXd keys = kKeyNoise * gaussian(n, d);
    for (Index i = 0; i < n; ++i) keys.row(i) += kGroupRadius * sim.directions.col(i / k).transpose();
    sim.store = KeyStore(std::move(keys));
    return sim;
}

// Oracle: exact discarded mass of keeping `ids`, recomputed from raw keys in long double.
long double oracle_tv(const KeyStore& store, const Eigen::VectorXd& q, const std::vector<Index>& ids) {
    const Index n = store.size();
    std::vector<long double> s(static_cast<std::size_t>(n));
    const long double scale = 1.0L / std::sqrt(static_cast<long double>(store.dim()));
    for (Index i = 0; i < n; ++i) {
        long double acc = 0.0L;
        for (Index c = 0; c < store.dim(); ++c) acc += static_cast<long double>(store.keys()(i, c)) * q[c];
        s[static_cast<std::size_t>(i)] = acc * scale;
    }
    const long double top = *std::max_element(s.begin(), s.end());
    long double total = 0.0L, kept = 0.0L;
    for (long double v : s) total += std::exp(v - top);
    for (Index i : ids) kept += std::exp(s[static_cast<std::size_t>(i)] - top);
    return 1.0L - kept / total;
}

struct AlgoTally {
    Index queries = 0;
    Index certified = 0;
    Index violations = 0;
    double scored_fraction = 0.0;
    Index gap_stage = 0;
    double kept = 0.0;
    double max_tv = 0.0;
};

using StoreTally = std::array<AlgoTally, kNumAlgorithms>;

}  // namespace

SearchSimReport run_search_sim(const ExperimentConfig& cfg) {
    cfg.validate();
    const Index n = cfg.n.front();
    const double eps = cfg.eps.front();
    const Index stores_per_regime = (cfg.trials + cfg.queries_per_store - 1) / cfg.queries_per_store;
    SearchConfig search_cfg;
    search_cfg.batch_size = cfg.batch;

    SearchSimReport report;
    CsvWriter csv({"regime", "algorithm", "queries", "certified", "violations", "mean_scored_fraction",
                   "gap_stage_pct", "mean_kept", "max_certified_tv"});

    for (std::size_t regime = 0; regime < 2; ++regime) {
        const bool planted = regime == 0;
        auto tallies = parallel_map(stores_per_regime, cfg.workers, [&](Index store_id) {
            const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(regime * 1000003 + store_id);
            std::mt19937_64 gen(seed);
            SimStore sim = make_store(planted, n, cfg.dim, cfg.k, gen);
            const KeyStore keys = sim.store;
            const CellIndex index = build_index(std::move(sim.store), IndexOptions{cfg.cells, seed, Partitioning::KMeans, 25});

            const Index first = store_id * cfg.queries_per_store;
            const Index count = std::min(cfg.queries_per_store, cfg.trials - first);
            std::normal_distribution<double> normal(0.0, 1.0);
            StoreTally tally{};
            for (Index qi = 0; qi < count; ++qi) {
                Eigen::VectorXd q(cfg.dim);
                for (Index c = 0; c < cfg.dim; ++c) q[c] = normal(gen);
                if (planted) {
                    const Index groups = sim.directions.cols();
                    const Index g = std::uniform_int_distribution<Index>(0, groups - 1)(gen);
                    const double strength = kPlantedScore * std::sqrt(static_cast<double>(cfg.dim)) / kGroupRadius;
                    q = strength * sim.directions.col(g) + kQueryNoise * q;
                } else {
                    q *= kFlatQueryScale;
                }

                const SearchResult results[kNumAlgorithms] = {
                    delta_k_search(index, q, cfg.k, eps, search_cfg),
                    mc_search(index, q, cfg.k, eps, search_cfg, false),
                    mc_search(index, q, cfg.k, eps, search_cfg, true),
                    hybrid_search(index, q, cfg.k, eps, search_cfg),
                };
                for (std::size_t a = 0; a < kNumAlgorithms; ++a) {
                    const SearchResult& r = results[a];
                    AlgoTally& t = tally[a];
                    ++t.queries;
                    t.scored_fraction += static_cast<double>(r.scored_count) / static_cast<double>(n);
                    if (r.stage == SearchStage::Gap) ++t.gap_stage;
                    if (!r.certified) continue;
                    ++t.certified;
                    t.kept += static_cast<double>(r.ids.size());
                    const auto tv = static_cast<double>(oracle_tv(keys, q, r.ids));
                    t.max_tv = std::max(t.max_tv, tv);
                    if (tv > eps + 1e-12) ++t.violations;
                }
            }
            return tally;
        });

        for (std::size_t a = 0; a < kNumAlgorithms; ++a) {
            AlgoTally total;
            for (const auto& st : tallies) {
                const AlgoTally& t = st[a];
                total.queries += t.queries;
                total.certified += t.certified;
                total.violations += t.violations;
                total.scored_fraction += t.scored_fraction;
                total.gap_stage += t.gap_stage;
                total.kept += t.kept;
                total.max_tv = std::max(total.max_tv, t.max_tv);
            }
            SearchSimRow row;
            row.regime = kRegimes[regime];
            row.algorithm = kAlgorithms[a];
            row.queries = total.queries;
            row.certified = total.certified;
            row.violations = total.violations;
            row.mean_scored_fraction = total.scored_fraction / static_cast<double>(std::max<Index>(1, total.queries));
            row.gap_stage_pct = 100.0 * static_cast<double>(total.gap_stage) / static_cast<double>(std::max<Index>(1, total.queries));
            row.mean_kept = total.kept / static_cast<double>(std::max<Index>(1, total.certified));
            row.max_certified_tv = total.max_tv;
            report.violations += static_cast<std::size_t>(row.violations);
            csv.row(row.regime, row.algorithm, row.queries, row.certified, row.violations, row.mean_scored_fraction,
                    row.gap_stage_pct, row.mean_kept, row.max_certified_tv);
            report.rows.push_back(row);
        }
    }
    report.csv = csv.str();
    return report;
}

// ---------------------------------------------------------------------------

AuditRecordResult audit_record(const AttentionDumpRecord& record, Index k, const std::vector<double>& eps) {
    const ScoreVector sv = record.to_scores();
    const SoftmaxSummary summary(sv);
    AuditRecordResult r;
    r.layer = record.layer;
    r.head = record.head;
    r.query = record.query;
    r.n = sv.size();
    r.k_adj = std::min(k, r.n - 1);
    r.tv = tv_exact(summary, r.k_adj);
    r.delta = sv.sorted(r.k_adj - 1) - sv.sorted(r.k_adj);
    for (double e : eps) {
        r.delta_pass.push_back(gap_certificate(sv, r.k_adj, e).passed);
        r.k_mc.push_back(min_k_exact(summary, e));
    }
    return r;
}

namespace {

AuditRow aggregate(const std::vector<const AuditRecordResult*>& group, std::size_t ei, double eps) {
    AuditRow row;
    row.eps = eps;
    row.rows = static_cast<Index>(group.size());
    std::vector<double> ns, kadj, tv, delta, kmc, speed;
    double pass = 0.0;
    for (const auto* r : group) {
        ns.push_back(static_cast<double>(r->n));
        kadj.push_back(static_cast<double>(r->k_adj));
        tv.push_back(r->tv);
        delta.push_back(r->delta);
        kmc.push_back(static_cast<double>(r->k_mc[ei]));
        speed.push_back(static_cast<double>(r->n) / static_cast<double>(r->k_mc[ei]));
        pass += r->delta_pass[ei] ? 1.0 : 0.0;
    }
    row.mean_n = mean(ns);
    row.mean_k_adj = mean(kadj);
    row.tv_mean = mean(tv);
    row.tv_median = percentile(tv, 0.5);
    row.tv_p95 = percentile(tv, 0.95);
    row.delta_mean = mean(delta);
    row.delta_pass_pct = 100.0 * pass / static_cast<double>(group.size());
    row.mean_kmc = mean(kmc);
    row.p95_kmc = percentile(kmc, 0.95);
    row.mean_speedup = mean(speed);
    row.speedup_of_means = row.mean_n / row.mean_kmc;
    return row;
}

}  // namespace

AuditReport audit_records(const std::vector<AttentionDumpRecord>& records, const ExperimentConfig& cfg) {
    AuditReport report;
    report.records = parallel_map(static_cast<Index>(records.size()), cfg.workers, [&](Index i) {
        return audit_record(records[static_cast<std::size_t>(i)], cfg.k, cfg.eps);
    });

    std::vector<const AuditRecordResult*> all;
    std::map<std::pair<int, int>, std::vector<const AuditRecordResult*>> by_head;
    for (const auto& r : report.records) {
        all.push_back(&r);
        by_head[{r.layer, r.head}].push_back(&r);
    }

    CsvWriter csv({"group", "layer", "head", "eps", "rows", "mean_n", "mean_k_adj", "tv_mean", "tv_median", "tv_p95",
                   "delta_mean", "delta_pass_pct", "mean_kmc", "p95_kmc", "mean_speedup", "speedup_of_means"});
    auto emit = [&](AuditRow row) {
        csv.row(row.group, row.layer, row.head, row.eps, row.rows, row.mean_n, row.mean_k_adj, row.tv_mean,
                row.tv_median, row.tv_p95, row.delta_mean, row.delta_pass_pct, row.mean_kmc, row.p95_kmc,
                row.mean_speedup, row.speedup_of_means);
        report.rows.push_back(std::move(row));
    };
    if (!all.empty()) {
        for (std::size_t ei = 0; ei < cfg.eps.size(); ++ei) {
            AuditRow row = aggregate(all, ei, cfg.eps[ei]);
            row.group = "all";
            emit(std::move(row));
        }
        for (const auto& [key, group] : by_head) {
            for (std::size_t ei = 0; ei < cfg.eps.size(); ++ei) {
                AuditRow row = aggregate(group, ei, cfg.eps[ei]);
                row.group = std::to_string(key.first) + "-" + std::to_string(key.second);
                row.layer = key.first;
                row.head = key.second;
                emit(std::move(row));
            }
        }
    }
    report.csv = csv.str();

    std::ostringstream lines;
    for (const auto& r : report.records) {
        nlohmann::json j{{"layer", r.layer}, {"head", r.head}, {"query", r.query}, {"n", r.n},
                         {"k_adj", r.k_adj}, {"tv", r.tv}, {"delta", r.delta}};
        for (std::size_t ei = 0; ei < cfg.eps.size(); ++ei) {
            j["k_mc"].push_back(r.k_mc[ei]);
            j["delta_pass"].push_back(static_cast<bool>(r.delta_pass[ei]));
        }
        lines << j.dump() << '\n';
    }
    report.records_jsonl = lines.str();
    return report;
}

AuditReport run_audit_dump(const ExperimentConfig& cfg) {
    cfg.validate();
    std::ifstream in(*cfg.input);
    if (!in) throw InvalidInput("cannot open " + cfg.input->string());
    DumpReadResult dump = read_dump(in, cfg.strict);
    AuditReport report = audit_records(dump.records, cfg);
    report.skipped = dump.skipped;
    report.errors = std::move(dump.errors);
    return report;
}

}  // namespace topkcert
