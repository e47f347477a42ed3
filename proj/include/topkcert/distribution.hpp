#pragma once

#include "topkcert/common.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace topkcert {

/// Raw logits for one query together with their descending sort order.
///
/// Ranks are 0-based in the API: `sorted(0)` is the largest score. Ties are
/// broken by the smaller original index.
class ScoreVector {
public:
    explicit ScoreVector(Eigen::VectorXd scores);
    explicit ScoreVector(std::span<const double> scores);

    Index size() const { return scores_.size(); }
    const Eigen::VectorXd& scores() const { return scores_; }
    const Eigen::VectorXd& sorted_scores() const { return sorted_; }
    double sorted(Index rank) const { return sorted_[rank]; }
    Index index_at_rank(Index rank) const { return order_[static_cast<std::size_t>(rank)]; }
    const std::vector<Index>& order() const { return order_; }

    ScoreVector shifted(double c) const;

private:
    Eigen::VectorXd scores_;
    Eigen::VectorXd sorted_;
    std::vector<Index> order_;
};

/// Log-space prefix/suffix masses of a sorted score vector.
class SoftmaxSummary {
public:
    explicit SoftmaxSummary(const ScoreVector& sv);

    Index size() const { return static_cast<Index>(log_head_.size()) - 1; }
    double log_total() const { return log_head_.back(); }
    // Mass of the k largest scores; log_head(0) = -inf.
    double log_head(Index k) const { return log_head_[static_cast<std::size_t>(k)]; }
    // Mass of everything below rank k; log_tail(n) = -inf.
    double log_tail(Index k) const { return log_tail_[static_cast<std::size_t>(k)]; }
    double tail_mass(Index k) const;

private:
    std::vector<double> log_head_;
    std::vector<double> log_tail_;
};

enum class CertificateKind { ExactMass, SingleGap, MultiGap, BlockGap, BlockMass, MassBound };

std::string_view to_string(CertificateKind kind);

struct ExactMassWitness {
    Index k = 0;
};
struct SingleGapWitness {
    Index k = 0;
    double gap = 0.0;
};
struct MultiGapWitness {
    Index k = 0;
    Index m = 0;
    double gap = 0.0;
    double mean_gap = 0.0;
};
struct BlockGapWitness {
    Index alpha = 0;
    double gap = 0.0;
    std::vector<Index> kept_blocks;
};
struct BlockMassWitness {
    Index alpha = 0;
    double log_kept_lower = kNegInf;
    double log_tail_upper = kNegInf;
    std::vector<Index> kept_blocks;
};
// Partial-scoring mass certificate produced by the search layer.
struct MassBoundWitness {
    Index kept = 0;
    double log_head_known = kNegInf;
    double log_tail_known = kNegInf;
    double log_unscored_upper = kNegInf;
};

using Witness = std::variant<ExactMassWitness, SingleGapWitness, MultiGapWitness, BlockGapWitness,
                             BlockMassWitness, MassBoundWitness>;

struct Certificate {
    CertificateKind kind = CertificateKind::ExactMass;
    double tv_bound = 1.0;
    double epsilon = 0.0;
    bool passed = false;
    Witness witness;
};

Certificate make_certificate(CertificateKind kind, double tv_bound, double eps, Witness witness);

Eigen::VectorXd softmax(const ScoreVector& sv);

// Truncated distribution in original index order.
Eigen::VectorXd truncate_topk(const ScoreVector& sv, Index k);

// Exact total variation of Top-k truncation, i.e. the discarded mass.
double tv_exact(const ScoreVector& sv, Index k);
double tv_exact(const SoftmaxSummary& summary, Index k);

// KL(P_hat || P) = -log(1 - tau).
double kl_truncated(const ScoreVector& sv, Index k);
double kl_truncated(const SoftmaxSummary& summary, Index k);

// Minimal boundary gap log((n-k)/k) + log((1-eps)/eps) that certifies TV <= eps.
double gap_threshold(Index n, Index k, double eps);

Certificate gap_certificate(const ScoreVector& sv, Index k, double eps);

struct MultiGapPolicy {
    // Largest m evaluated; nullopt evaluates every admissible m.
    std::optional<Index> max_m;
};

Certificate multigap_certificate(const ScoreVector& sv, Index k, double eps,
                                 MultiGapPolicy policy = {});

}  // namespace topkcert
