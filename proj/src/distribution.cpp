#include "topkcert/distribution.hpp"

#include <algorithm>
#include <numeric>

namespace topkcert {

namespace {

void require_rank(Index n, Index k) {
    if (k < 1 || k > n)
        throw DomainError("k must satisfy 1 <= k <= n (k=" + std::to_string(k) +
                          ", n=" + std::to_string(n) + ")");
}

}  // namespace

ScoreVector::ScoreVector(Eigen::VectorXd scores) : scores_(std::move(scores)) {
    if (scores_.size() < 1) throw InvalidInput("score vector must be non-empty");
    if (!scores_.allFinite()) throw InvalidInput("scores must be finite");

    order_.resize(static_cast<std::size_t>(scores_.size()));
    std::iota(order_.begin(), order_.end(), Index{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [this](Index a, Index b) { return scores_[a] > scores_[b]; });
    sorted_.resize(scores_.size());
    for (Index r = 0; r < scores_.size(); ++r) sorted_[r] = scores_[order_[static_cast<std::size_t>(r)]];
}

ScoreVector::ScoreVector(std::span<const double> scores)
    : ScoreVector(Eigen::VectorXd(
          Eigen::Map<const Eigen::VectorXd>(scores.data(), static_cast<Index>(scores.size())))) {}

ScoreVector ScoreVector::shifted(double c) const {
    return ScoreVector(Eigen::VectorXd(scores_.array() + c));
}

SoftmaxSummary::SoftmaxSummary(const ScoreVector& sv) {
    const auto n = static_cast<std::size_t>(sv.size());
    log_head_.assign(n + 1, kNegInf);
    log_tail_.assign(n + 1, kNegInf);
    for (std::size_t r = 0; r < n; ++r)
        log_head_[r + 1] = log_add_exp(log_head_[r], sv.sorted(static_cast<Index>(r)));
    for (std::size_t r = n; r-- > 0;)
        log_tail_[r] = log_add_exp(log_tail_[r + 1], sv.sorted(static_cast<Index>(r)));
}

double SoftmaxSummary::tail_mass(Index k) const {
    require_rank(size(), k);
    const double lt = log_tail(k);
    if (lt == kNegInf) return 0.0;
    // tau = tail / (head + tail), arranged so that neither term overflows
    return logistic(lt - log_head(k));
}

std::string_view to_string(CertificateKind kind) {
    switch (kind) {
        case CertificateKind::ExactMass: return "exact-mass";
        case CertificateKind::SingleGap: return "single-gap";
        case CertificateKind::MultiGap: return "multi-gap";
        case CertificateKind::BlockGap: return "block-gap";
        case CertificateKind::BlockMass: return "block-mass";
        case CertificateKind::MassBound: return "mass-bound";
    }
    return "unknown";
}

Certificate make_certificate(CertificateKind kind, double tv_bound, double eps, Witness witness) {
    Certificate c;
    c.kind = kind;
    c.tv_bound = std::clamp(tv_bound, 0.0, 1.0);
    c.epsilon = eps;
    c.passed = c.tv_bound <= eps;
    c.witness = std::move(witness);
    return c;
}

Eigen::VectorXd softmax(const ScoreVector& sv) {
    const double lse = log_sum_exp(sv.scores());
    return (sv.scores().array() - lse).exp().matrix();
}

Eigen::VectorXd truncate_topk(const ScoreVector& sv, Index k) {
    require_rank(sv.size(), k);
    const SoftmaxSummary summary(sv);
    const double log_head = summary.log_head(k);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(sv.size());
    for (Index r = 0; r < k; ++r) {
        const Index i = sv.index_at_rank(r);
        out[i] = std::exp(sv.scores()[i] - log_head);
    }
    return out;
}

double tv_exact(const SoftmaxSummary& summary, Index k) { return summary.tail_mass(k); }

double tv_exact(const ScoreVector& sv, Index k) { return tv_exact(SoftmaxSummary(sv), k); }

double kl_truncated(const SoftmaxSummary& summary, Index k) {
    require_rank(summary.size(), k);
    if (summary.log_head(k) == kNegInf) throw DegenerateInput("empty head mass");
    const double lt = summary.log_tail(k);
    if (lt == kNegInf) return 0.0;
    // log(Z / Z_head) = log1p(Z_tail / Z_head)
    return std::log1p(std::exp(lt - summary.log_head(k)));
}

double kl_truncated(const ScoreVector& sv, Index k) { return kl_truncated(SoftmaxSummary(sv), k); }

double gap_threshold(Index n, Index k, double eps) {
    require_epsilon(eps);
    if (k < 1 || k >= n) throw DomainError("gap threshold needs 1 <= k < n");
    return std::log(static_cast<double>(n - k) / static_cast<double>(k)) + std::log((1.0 - eps) / eps);
}

Certificate gap_certificate(const ScoreVector& sv, Index k, double eps) {
    require_epsilon(eps);
    const Index n = sv.size();
    require_rank(n, k);
    if (k == n)
        return make_certificate(CertificateKind::SingleGap, 0.0, eps,
                                SingleGapWitness{k, std::numeric_limits<double>::infinity()});

    const double gap = sv.sorted(k - 1) - sv.sorted(k);
    const double log_ratio = std::log(static_cast<double>(k) / static_cast<double>(n - k));
    const double bound = logistic(-(gap + log_ratio));
    return make_certificate(CertificateKind::SingleGap, bound, eps, SingleGapWitness{k, gap});
}

Certificate multigap_certificate(const ScoreVector& sv, Index k, double eps, MultiGapPolicy policy) {
    require_epsilon(eps);
    const Index n = sv.size();
    require_rank(n, k);
    if (k == n)
        return make_certificate(CertificateKind::MultiGap, 0.0, eps,
                                MultiGapWitness{k, 0, std::numeric_limits<double>::infinity(), 0.0});

    const double top = sv.sorted(k - 1);
    const double gap = top - sv.sorted(k);
    Index m_max = n - k - 1;
    if (policy.max_m) m_max = std::clamp(*policy.max_m, Index{0}, m_max);

    const double log_k = std::log(static_cast<double>(k));
    double best_log = std::numeric_limits<double>::infinity();
    Index best_m = 0;
    for (Index m = 0; m <= m_max; ++m) {
        // m e^{-gap} + (n-k-m) e^{s_{k+m+1} - s_k}, over k
        const double near = m == 0 ? kNegInf : std::log(static_cast<double>(m)) - gap;
        const double far = std::log(static_cast<double>(n - k - m)) + (sv.sorted(k + m) - top);
        const double value = log_add_exp(near, far) - log_k;
        if (value < best_log) {
            best_log = value;
            best_m = m;
        }
    }
    const double mean_gap = (top - sv.sorted(k + best_m)) / static_cast<double>(best_m + 1);
    return make_certificate(CertificateKind::MultiGap, std::exp(best_log), eps,
                            MultiGapWitness{k, best_m, gap, mean_gap});
}

}  // namespace topkcert
