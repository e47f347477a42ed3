#pragma once

#include "topkcert/distribution.hpp"

#include <utility>
#include <vector>

namespace topkcert {

// Disjoint, non-empty blocks covering 0..n-1.
class BlockPartition {
public:
    BlockPartition(std::vector<std::vector<Index>> blocks, Index n);

    // Contiguous blocks of (at most) `block_size` indices.
    static BlockPartition contiguous(Index n, Index block_size);

    Index num_blocks() const { return static_cast<Index>(blocks_.size()); }
    Index num_items() const { return n_; }
    const std::vector<Index>& block(Index j) const { return blocks_[static_cast<std::size_t>(j)]; }
    const std::vector<std::vector<Index>>& blocks() const { return blocks_; }

private:
    std::vector<std::vector<Index>> blocks_;
    Index n_ = 0;
};

// Per-block log-masses w_j = log sum_{i in B_j} e^{s_i}, with their
// descending order (ties: smaller block id).
struct BlockMassSummary {
    Eigen::VectorXd log_mass;
    std::vector<Index> order;

    static BlockMassSummary from_log_masses(Eigen::VectorXd log_mass);
    Index num_blocks() const { return log_mass.size(); }
    double sorted(Index rank) const { return log_mass[order[static_cast<std::size_t>(rank)]]; }
};

BlockMassSummary summarize_blocks(const ScoreVector& sv, const BlockPartition& partition);

// Interval bounds L_b <= Z_b <= U_b on block masses, held in log scale.
class BlockMassInterval {
public:
    enum class Scale { Linear, Log };

    BlockMassInterval(Eigen::VectorXd lower, Eigen::VectorXd upper, Scale scale);

    static BlockMassInterval exact(const BlockMassSummary& bm);

    Index num_blocks() const { return log_lower_.size(); }
    const Eigen::VectorXd& log_lower() const { return log_lower_; }
    const Eigen::VectorXd& log_upper() const { return log_upper_; }

private:
    Eigen::VectorXd log_lower_;
    Eigen::VectorXd log_upper_;
};

// Keep the alpha heaviest blocks; bound from the gap between ranks alpha and alpha+1.
Certificate block_gap_certificate(const BlockMassSummary& bm, Index alpha, double eps);

struct BlockGap {
    Index position = 0;  // 1-based rank j of the gap w_(j) - w_(j+1)
    double gap = 0.0;
};

BlockGap guaranteed_block_gap(const BlockMassSummary& bm);

// Keep the alpha blocks with the largest lower bounds; bound S+(U) / (S-(L) + S+(U)).
Certificate block_mass_certificate(const BlockMassInterval& iv, Index alpha, double eps);

}  // namespace topkcert
