#include "topkcert/output_bounds.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

namespace topkcert {

double value_norm_cap(const ValueMatrix& values) {
    if (values.rows() == 0) return 0.0;
    return values.rowwise().norm().maxCoeff();
}

HeadTailReport head_tail_report(const ScoreVector& sv, Index k, const ValueMatrix& values) {
    const Index n = sv.size();
    if (values.rows() != n) throw InvalidInput("value matrix needs one row per score");
    if (!values.allFinite()) throw InvalidInput("value entries must be finite");
    if (k < 1 || k > n) throw DomainError("head_tail_report needs 1 <= k <= n");

    const SoftmaxSummary summary(sv);
    const double log_head = summary.log_head(k);
    const double log_tail = summary.log_tail(k);
    const double log_total = summary.log_total();
    const Index dv = values.cols();

    HeadTailReport rep;
    rep.k = k;
    rep.tau = summary.tail_mass(k);
    rep.norm_cap = value_norm_cap(values);
    rep.mu_head = Eigen::VectorXd::Zero(dv);
    rep.mu_tail = Eigen::VectorXd::Zero(dv);
    rep.mu_full = Eigen::VectorXd::Zero(dv);

    // Conditional weights p_i / (1 - tau) and p_i / tau, each formed in log space.
    for (Index r = 0; r < n; ++r) {
        const Index i = sv.index_at_rank(r);
        const double s = sv.scores()[i];
        rep.mu_full += std::exp(s - log_total) * values.row(i).transpose();
        if (r < k)
            rep.mu_head += std::exp(s - log_head) * values.row(i).transpose();
        else
            rep.mu_tail += std::exp(s - log_tail) * values.row(i).transpose();
    }
    if (rep.tau == 0.0) rep.mu_tail.setZero();

    for (Index r = 0; r < n; ++r) {
        const Index i = sv.index_at_rank(r);
        const double s = sv.scores()[i];
        rep.var_full += std::exp(s - log_total) * (values.row(i).transpose() - rep.mu_full).squaredNorm();
        if (r < k)
            rep.var_head += std::exp(s - log_head) * (values.row(i).transpose() - rep.mu_head).squaredNorm();
        else
            rep.var_tail += std::exp(s - log_tail) * (values.row(i).transpose() - rep.mu_tail).squaredNorm();
    }

    rep.exact_error = rep.tau * (rep.mu_tail - rep.mu_head).norm();

    for (Index a = k; a < n; ++a) {
        const auto vi = values.row(sv.index_at_rank(a));
        for (Index b = 0; b < k; ++b)
            rep.diam_ht = std::max(rep.diam_ht, (vi - values.row(sv.index_at_rank(b))).norm());
    }

    rep.chi2_divergence = log_tail == kNegInf ? 0.0 : std::exp(log_tail - log_head);
    rep.kl_divergence = kl_truncated(summary, k);

    const double sd = std::sqrt(rep.var_full);
    rep.bounds.diam = rep.tau * rep.diam_ht;
    rep.bounds.chi2 = std::sqrt(rep.chi2_divergence) * sd;
    rep.bounds.kl = std::sqrt(std::expm1(rep.kl_divergence)) * sd;
    rep.bounds.crude = 2.0 * rep.norm_cap * rep.tau;
    rep.best = best_certificate(rep);
    return rep;
}

double best_certificate(const HeadTailReport& report) {
    return std::min({report.bounds.diam, report.bounds.chi2, report.bounds.crude});
}

double cut_value(const Eigen::MatrixXd& weights, const std::vector<bool>& in_head) {
    double phi = 0.0;
    const Index n = weights.rows();
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (in_head[static_cast<std::size_t>(i)] && !in_head[static_cast<std::size_t>(j)])
                phi = std::max(phi, weights(i, j));
    return phi;
}

namespace {

class DisjointSets {
public:
    explicit DisjointSets(Index n) : parent_(static_cast<std::size_t>(n)), rank_(static_cast<std::size_t>(n), 0) {
        std::iota(parent_.begin(), parent_.end(), Index{0});
    }

    Index find(Index x) {
        while (parent_[static_cast<std::size_t>(x)] != x) {
            auto& p = parent_[static_cast<std::size_t>(x)];
            p = parent_[static_cast<std::size_t>(p)];
            x = p;
        }
        return x;
    }

    bool unite(Index a, Index b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        auto& ra = rank_[static_cast<std::size_t>(a)];
        auto& rb = rank_[static_cast<std::size_t>(b)];
        if (ra < rb) std::swap(a, b);
        parent_[static_cast<std::size_t>(b)] = a;
        if (ra == rb) ++rank_[static_cast<std::size_t>(a)];
        return true;
    }

private:
    std::vector<Index> parent_;
    std::vector<int> rank_;
};

struct Edge {
    double w;
    Index u;
    Index v;
};

}  // namespace

CutResult minimax_cut(const Eigen::MatrixXd& weights) {
    const Index n = weights.rows();
    if (weights.cols() != n) throw InvalidInput("weight matrix must be square");
    if (n < 2) throw DomainError("minimax cut needs n >= 2");
    if (!weights.allFinite()) throw InvalidInput("weights must be finite");
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            if (weights(i, j) != weights(j, i) || weights(i, j) < 0)
                throw InvalidInput("weights must be symmetric and non-negative");

    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) edges.push_back({weights(i, j), i, j});
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        return std::tie(b.w, a.u, a.v) < std::tie(a.w, b.u, b.v);
    });

    DisjointSets dsu(n);
    std::vector<Edge> tree;
    tree.reserve(static_cast<std::size_t>(n - 1));
    for (const Edge& e : edges) {
        if (dsu.unite(e.u, e.v)) {
            tree.push_back(e);
            if (static_cast<Index>(tree.size()) == n - 1) break;
        }
    }
    // Descending scan: the last tree edge is a lightest one.
    const Edge cut = tree.back();
    tree.pop_back();

    DisjointSets parts(n);
    for (const Edge& e : tree) parts.unite(e.u, e.v);
    const Index side = parts.find(cut.u);

    CutResult result;
    std::vector<bool> in_head(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const bool h = parts.find(i) == side;
        in_head[static_cast<std::size_t>(i)] = h;
        (h ? result.head : result.rest).push_back(i);
    }
    result.lightest_tree_edge = cut.w;
    result.edge_u = cut.u;
    result.edge_v = cut.v;
    result.cut_value = cut_value(weights, in_head);
    return result;
}

CutResult cut_from_values(const ValueMatrix& values) {
    const Index n = values.rows();
    if (n < 2) throw DomainError("minimax cut needs n >= 2");
    if (!values.allFinite()) throw InvalidInput("value entries must be finite");
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) w(i, j) = w(j, i) = (values.row(i) - values.row(j)).norm();
    return minimax_cut(w);
}

}  // namespace topkcert
