#pragma once

#include "topkcert/distribution.hpp"

#include <vector>

namespace topkcert {

// Value rows v_1..v_n stored as an n x d_v matrix.
using ValueMatrix = Eigen::MatrixXd;

// C = max_i ||v_i||_2.
double value_norm_cap(const ValueMatrix& values);

// sum_i w_i v_i for a probability vector w.
template <typename WeightDerived, typename ValueDerived>
Eigen::VectorXd attention_output(const Eigen::MatrixBase<WeightDerived>& weights,
                                 const Eigen::MatrixBase<ValueDerived>& values) {
    if (weights.size() != values.rows())
        throw InvalidInput("weight vector length does not match value rows");
    if (!weights.allFinite() || std::abs(weights.sum() - 1.0) > 1e-9)
        throw InvalidInput("weights must sum to 1");
    return values.transpose() * weights;
}

struct OutputBounds {
    double diam = 0.0;   // tau * diam_HT
    double chi2 = 0.0;   // sqrt(tau / (1 - tau)) * sqrt(Var_P)
    double kl = 0.0;     // sqrt(e^KL - 1) * sqrt(Var_P)
    double crude = 0.0;  // 2 C tau
};

struct HeadTailReport {
    Index k = 0;
    double tau = 0.0;
    Eigen::VectorXd mu_head;
    Eigen::VectorXd mu_tail;  // zero when tau == 0
    Eigen::VectorXd mu_full;
    double exact_error = 0.0;
    double diam_ht = 0.0;
    double var_full = 0.0;
    double var_head = 0.0;
    double var_tail = 0.0;
    double chi2_divergence = 0.0;
    double kl_divergence = 0.0;
    double norm_cap = 0.0;
    OutputBounds bounds;
    double best = 0.0;
};

// diam_HT is a direct O(k (n - k) d_v) scan.
HeadTailReport head_tail_report(const ScoreVector& sv, Index k, const ValueMatrix& values);

// min{tau diam_HT, sqrt(chi2) sqrt(Var_P), 2 C tau}. The KL form is reported
// in the bounds but never participates since it cannot beat the chi2 form.
double best_certificate(const HeadTailReport& report);

struct CutResult {
    std::vector<Index> head;  // side containing the lower endpoint of the cut edge
    std::vector<Index> rest;
    double cut_value = 0.0;   // phi(H) = max cross weight
    double lightest_tree_edge = 0.0;
    Index edge_u = 0;
    Index edge_v = 0;
};

// Maximum spanning tree by descending Kruskal (ties: smaller endpoint ids
// first); deleting its lightest edge yields a cut minimising the largest
// crossing weight. O(n^2 log n) on the dense weight matrix.
CutResult minimax_cut(const Eigen::MatrixXd& weights);

// minimax_cut on pairwise Euclidean distances between value rows.
CutResult cut_from_values(const ValueMatrix& values);

// Largest weight crossing the bipartition defined by `in_head`.
double cut_value(const Eigen::MatrixXd& weights, const std::vector<bool>& in_head);

}  // namespace topkcert
