#include "topkcert/blockwise.hpp"

#include <algorithm>
#include <numeric>

namespace topkcert {

namespace {

std::vector<Index> descending_order(const Eigen::VectorXd& values) {
    std::vector<Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return values[a] > values[b]; });
    return order;
}

}  // namespace

BlockPartition::BlockPartition(std::vector<std::vector<Index>> blocks, Index n)
    : blocks_(std::move(blocks)), n_(n) {
    if (blocks_.empty()) throw InvalidInput("partition needs at least one block");
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    Index covered = 0;
    for (const auto& b : blocks_) {
        if (b.empty()) throw InvalidInput("partition blocks must be non-empty");
        for (Index i : b) {
            if (i < 0 || i >= n) throw InvalidInput("block index out of range");
            if (seen[static_cast<std::size_t>(i)]++) throw InvalidInput("blocks overlap");
            ++covered;
        }
    }
    if (covered != n) throw InvalidInput("blocks do not cover every index");
}

BlockPartition BlockPartition::contiguous(Index n, Index block_size) {
    if (n < 1 || block_size < 1) throw DomainError("contiguous partition needs n, size >= 1");
    std::vector<std::vector<Index>> blocks;
    for (Index start = 0; start < n; start += block_size) {
        std::vector<Index> b;
        for (Index i = start; i < std::min(n, start + block_size); ++i) b.push_back(i);
        blocks.push_back(std::move(b));
    }
    return BlockPartition(std::move(blocks), n);
}

BlockMassSummary BlockMassSummary::from_log_masses(Eigen::VectorXd log_mass) {
    if (log_mass.size() < 1) throw InvalidInput("need at least one block");
    if ((log_mass.array() == std::numeric_limits<double>::infinity()).any() || log_mass.hasNaN())
        throw InvalidInput("block log-masses must be < +inf");
    BlockMassSummary bm;
    bm.order = descending_order(log_mass);
    bm.log_mass = std::move(log_mass);
    return bm;
}

BlockMassSummary summarize_blocks(const ScoreVector& sv, const BlockPartition& partition) {
    if (partition.num_items() != sv.size()) throw InvalidInput("partition size does not match scores");
    Eigen::VectorXd w(partition.num_blocks());
    for (Index j = 0; j < partition.num_blocks(); ++j) {
        const auto& b = partition.block(j);
        Eigen::VectorXd s(static_cast<Index>(b.size()));
        for (std::size_t t = 0; t < b.size(); ++t) s[static_cast<Index>(t)] = sv.scores()[b[t]];
        w[j] = log_sum_exp(s);
    }
    return BlockMassSummary::from_log_masses(std::move(w));
}

BlockMassInterval::BlockMassInterval(Eigen::VectorXd lower, Eigen::VectorXd upper, Scale scale) {
    if (lower.size() != upper.size() || lower.size() < 1)
        throw InvalidInput("lower/upper bounds must have equal, non-zero length");
    if (scale == Scale::Linear) {
        if ((lower.array() < 0).any() || !lower.allFinite() || !upper.allFinite())
            throw InvalidInput("linear block masses must be finite and >= 0");
        log_lower_ = lower.array().log().matrix();
        log_upper_ = upper.array().log().matrix();
    } else {
        if (lower.hasNaN() || upper.hasNaN()) throw InvalidInput("log block masses must not be NaN");
        log_lower_ = std::move(lower);
        log_upper_ = std::move(upper);
    }
    if ((log_lower_.array() > log_upper_.array()).any())
        throw InvalidInput("every block needs L_b <= U_b");
    if ((log_upper_.array() == std::numeric_limits<double>::infinity()).any())
        throw InvalidInput("upper bounds must be finite");
}

BlockMassInterval BlockMassInterval::exact(const BlockMassSummary& bm) {
    return BlockMassInterval(bm.log_mass, bm.log_mass, Scale::Log);
}

Certificate block_gap_certificate(const BlockMassSummary& bm, Index alpha, double eps) {
    require_epsilon(eps);
    const Index M = bm.num_blocks();
    if (alpha < 1 || alpha >= M) throw DomainError("block gap certificate needs 1 <= alpha < M");

    BlockGapWitness witness;
    witness.alpha = alpha;
    witness.gap = bm.sorted(alpha - 1) - bm.sorted(alpha);
    witness.kept_blocks.assign(bm.order.begin(), bm.order.begin() + alpha);
    if (bm.sorted(alpha) == kNegInf)
        return make_certificate(CertificateKind::BlockGap, 0.0, eps, std::move(witness));

    const double log_ratio = std::log(static_cast<double>(alpha) / static_cast<double>(M - alpha));
    const double bound = logistic(-(witness.gap + log_ratio));
    return make_certificate(CertificateKind::BlockGap, bound, eps, std::move(witness));
}

BlockGap guaranteed_block_gap(const BlockMassSummary& bm) {
    const Index M = bm.num_blocks();
    if (M < 2) throw DomainError("block gap needs at least two blocks");
    BlockGap best{1, bm.sorted(0) - bm.sorted(1)};
    for (Index j = 2; j < M; ++j) {
        const double g = bm.sorted(j - 1) - bm.sorted(j);
        if (g > best.gap) best = {j, g};
    }
    return best;
}

Certificate block_mass_certificate(const BlockMassInterval& iv, Index alpha, double eps) {
    require_epsilon(eps);
    const Index M = iv.num_blocks();
    if (alpha < 1 || alpha > M) throw DomainError("block mass certificate needs 1 <= alpha <= M");

    const auto order = descending_order(iv.log_lower());
    BlockMassWitness witness;
    witness.alpha = alpha;
    witness.kept_blocks.assign(order.begin(), order.begin() + alpha);
    for (Index r = 0; r < M; ++r) {
        const Index b = order[static_cast<std::size_t>(r)];
        if (r < alpha)
            witness.log_kept_lower = log_add_exp(witness.log_kept_lower, iv.log_lower()[b]);
        else
            witness.log_tail_upper = log_add_exp(witness.log_tail_upper, iv.log_upper()[b]);
    }
    if (witness.log_kept_lower == kNegInf && witness.log_tail_upper == kNegInf)
        throw DegenerateInput("S-(L) and S+(U) are both zero; the bound is undefined");

    double bound = 0.0;
    if (witness.log_tail_upper != kNegInf)
        bound = logistic(witness.log_tail_upper - witness.log_kept_lower);
    return make_certificate(CertificateKind::BlockMass, bound, eps, std::move(witness));
}

}  // namespace topkcert
