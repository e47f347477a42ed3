#pragma once

#include "topkcert/dump.hpp"
#include "topkcert/search.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace topkcert {

enum class ExperimentId { GaussValidate, LongContext, EpsSweep, SearchSim, AuditDump };

std::string_view to_string(ExperimentId id);

struct ExperimentConfig {
    ExperimentId id = ExperimentId::GaussValidate;
    std::vector<Index> n{10000};
    std::vector<double> sigma{1.0};
    double mu = 0.0;
    std::vector<double> eps{0.01};
    Index trials = 100;
    std::uint64_t seed = 42;
    Index k = 16;
    std::optional<std::filesystem::path> input;
    // search-sim
    Index cells = 64;
    Index dim = 64;
    Index queries_per_store = 250;
    Index batch = 0;
    // audit-dump / eps-sweep input
    bool strict = false;
    // worker threads; 0 picks hardware concurrency
    unsigned workers = 0;

    // Throws DomainError when a field is out of range.
    void validate() const;
};

// -------- gauss-validate --------

struct GaussRow {
    Index n = 0;
    double eps = 0.0;
    double sigma = 0.0;
    double alpha_gauss = 0.0;
    Index alpha_gauss_ceil = 0;
    double alpha_emp_mean = 0.0;
    double alpha_emp_std = 0.0;
    double rel_dev = 0.0;  // (emp - ceil) / ceil
    Index trials = 0;
};

struct GaussReport {
    std::vector<GaussRow> rows;
    std::string csv;
};

GaussReport run_gauss_validate(const ExperimentConfig& cfg);

// -------- long-context --------

struct LongContextRow {
    Index n = 0;
    double eps = 0.0;
    double sigma = 0.0;
    double ratio_emp = 0.0;
    double ratio_theory = 0.0;
    double abs_dev = 0.0;
    Index trials = 0;
};

struct LongContextReport {
    std::vector<LongContextRow> rows;
    std::string csv;
};

LongContextReport run_long_context(const ExperimentConfig& cfg);

// -------- eps-sweep --------

struct EpsSweepRow {
    double eps = 0.0;
    Index queries = 0;
    double mean_n = 0.0;
    double mean_kmc = 0.0;
    double p95_kmc = 0.0;
    double fraction = 0.0;        // mean_kmc / mean_n
    double speedup = 0.0;         // mean_n / mean_kmc
    double mean_speedup = 0.0;    // mean of n / k_mc
    double tv_mean_at_k = 0.0;
    double gap_pass_pct = 0.0;
    double theory_ratio = 0.0;    // Gaussian source only; NaN otherwise
};

struct EpsSweepReport {
    std::vector<EpsSweepRow> rows;
    std::string csv;
    std::string plot_json;
    // Queries where a larger eps produced a larger k_mc; must be zero.
    std::size_t monotonicity_violations = 0;
    std::size_t skipped = 0;
};

EpsSweepReport run_eps_sweep(const ExperimentConfig& cfg);

// -------- search-sim --------

struct SearchSimRow {
    std::string regime;
    std::string algorithm;
    Index queries = 0;
    Index certified = 0;
    Index violations = 0;
    double mean_scored_fraction = 0.0;
    double gap_stage_pct = 0.0;
    double mean_kept = 0.0;
    double max_certified_tv = 0.0;
};

struct SearchSimReport {
    std::vector<SearchSimRow> rows;
    std::string csv;
    std::size_t violations = 0;
};

SearchSimReport run_search_sim(const ExperimentConfig& cfg);

// -------- audit-dump --------

struct AuditRecordResult {
    int layer = 0;
    int head = 0;
    int query = 0;
    Index n = 0;
    Index k_adj = 0;
    double tv = 0.0;
    double delta = 0.0;
    std::vector<bool> delta_pass;  // per eps
    std::vector<Index> k_mc;       // per eps
};

struct AuditRow {
    std::string group;  // "all" or "L-H"
    int layer = -1;
    int head = -1;
    double eps = 0.0;
    Index rows = 0;
    double mean_n = 0.0;
    double mean_k_adj = 0.0;
    double tv_mean = 0.0;
    double tv_median = 0.0;
    double tv_p95 = 0.0;
    double delta_mean = 0.0;
    double delta_pass_pct = 0.0;
    double mean_kmc = 0.0;
    double p95_kmc = 0.0;
    double mean_speedup = 0.0;      // mean of n / k_mc
    double speedup_of_means = 0.0;  // mean n / mean k_mc
};

struct AuditReport {
    std::vector<AuditRecordResult> records;
    std::vector<AuditRow> rows;
    std::string csv;
    std::string records_jsonl;
    std::size_t skipped = 0;
    std::vector<std::string> errors;
};

AuditRecordResult audit_record(const AttentionDumpRecord& record, Index k, const std::vector<double>& eps);
AuditReport run_audit_dump(const ExperimentConfig& cfg);
AuditReport audit_records(const std::vector<AttentionDumpRecord>& records, const ExperimentConfig& cfg);

// Linear interpolation between order statistics (p in [0, 1]).
double percentile(std::vector<double> values, double p);

}  // namespace topkcert
