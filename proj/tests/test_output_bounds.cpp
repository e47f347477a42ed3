#include "topkcert/output_bounds.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace topkcert;

namespace {

Eigen::MatrixXd random_values(std::mt19937_64& gen, Index n, Index d, double scale) {
    std::normal_distribution<double> g(0.0, scale);
    Eigen::MatrixXd v(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) v(i, j) = g(gen);
    return v;
}

// Output error computed directly from the two distributions.
Eigen::VectorXd direct_error(const ScoreVector& sv, Index k, const Eigen::MatrixXd& v) {
    return attention_output(softmax(sv), v) - attention_output(truncate_topk(sv, k), v);
}

}  // namespace

TEST(AttentionOutput, ChecksWeights) {
    const Eigen::MatrixXd v = Eigen::MatrixXd::Identity(2, 2);
    EXPECT_THROW(attention_output(Eigen::VectorXd{{0.5, 0.6}}, v), InvalidInput);
    EXPECT_THROW(attention_output(Eigen::VectorXd{{1.0}}, v), InvalidInput);
    EXPECT_TRUE(attention_output(Eigen::VectorXd{{0.25, 0.75}}, v).isApprox(Eigen::VectorXd{{0.25, 0.75}}));
}

TEST(HeadTail, IdentityMatchesDirectDifference) {
    std::mt19937_64 gen(1);
    for (int rep = 0; rep < 100; ++rep) {
        const Index n = 2 + static_cast<Index>(gen() % 40);
        const ScoreVector sv(oracle::to_eigen(oracle::uniform_scores(gen, static_cast<std::size_t>(n), -8, 8)));
        const Index k = 1 + static_cast<Index>(gen() % static_cast<std::size_t>(n));
        const auto v = random_values(gen, n, 5, 2.0);
        const auto rep_ = head_tail_report(sv, k, v);
        const Eigen::VectorXd identity = rep_.tau * (rep_.mu_tail - rep_.mu_head);
        EXPECT_LE((identity - direct_error(sv, k, v)).norm(), 1e-12 * (1.0 + v.norm()));
        EXPECT_NEAR(rep_.exact_error, direct_error(sv, k, v).norm(), 1e-12 * (1.0 + v.norm()));
    }
}

TEST(HeadTail, BoundsOrderedAndKlMatchesChi2) {
    std::mt19937_64 gen(2);
    for (int rep = 0; rep < 200; ++rep) {
        const Index n = 2 + static_cast<Index>(gen() % 30);
        const ScoreVector sv(oracle::to_eigen(oracle::uniform_scores(gen, static_cast<std::size_t>(n), -5, 5)));
        const Index k = 1 + static_cast<Index>(gen() % static_cast<std::size_t>(n - 1));
        const auto r = head_tail_report(sv, k, random_values(gen, n, 3, 1.0));
        EXPECT_LE(r.exact_error, r.best * (1 + 1e-12) + 1e-15);
        EXPECT_LE(r.bounds.diam, r.bounds.crude * (1 + 1e-12) + 1e-15);
        EXPECT_LE(r.best, r.bounds.crude);
        EXPECT_NEAR(r.chi2_divergence, r.tau / (1 - r.tau), 1e-12 * (1 + r.chi2_divergence));
        EXPECT_NEAR(r.bounds.kl, r.bounds.chi2, 1e-10 * (1 + r.bounds.chi2));
    }
}

TEST(HeadTail, LawOfTotalVariance) {
    std::mt19937_64 gen(4);
    for (int rep = 0; rep < 100; ++rep) {
        const Index n = 3 + static_cast<Index>(gen() % 30);
        const ScoreVector sv(oracle::to_eigen(oracle::uniform_scores(gen, static_cast<std::size_t>(n), -3, 3)));
        const Index k = 1 + static_cast<Index>(gen() % static_cast<std::size_t>(n - 1));
        const auto r = head_tail_report(sv, k, random_values(gen, n, 4, 1.0));
        const double between = r.tau * (1 - r.tau) * (r.mu_tail - r.mu_head).squaredNorm();
        const double decomposed = (1 - r.tau) * r.var_head + r.tau * r.var_tail + between;
        EXPECT_NEAR(decomposed, r.var_full, 1e-12 * r.var_full);
    }
}

TEST(HeadTail, ConstantValuesGiveZeroError) {
    const ScoreVector sv(Eigen::VectorXd{{1.0, 0.0, -1.0}});
    const auto r = head_tail_report(sv, 1, Eigen::MatrixXd::Ones(3, 2));
    EXPECT_NEAR(r.exact_error, 0.0, 1e-15);
    EXPECT_NEAR(r.diam_ht, 0.0, 1e-15);
    EXPECT_NEAR(r.best, 0.0, 1e-15);
}

TEST(HeadTail, FullKeep) {
    const ScoreVector sv(Eigen::VectorXd{{1.0, 0.0}});
    const auto r = head_tail_report(sv, 2, Eigen::MatrixXd::Identity(2, 2));
    EXPECT_EQ(r.tau, 0.0);
    EXPECT_EQ(r.mu_tail, Eigen::VectorXd::Zero(2));
    EXPECT_EQ(r.best, 0.0);
}

TEST(HeadTail, Validation) {
    const ScoreVector sv(Eigen::VectorXd{{1.0, 0.0}});
    EXPECT_THROW(head_tail_report(sv, 1, Eigen::MatrixXd::Ones(3, 2)), InvalidInput);
    EXPECT_THROW(head_tail_report(sv, 0, Eigen::MatrixXd::Ones(2, 2)), DomainError);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(2, 2);
    bad(0, 0) = std::nan("");
    EXPECT_THROW(head_tail_report(sv, 1, bad), InvalidInput);
}

TEST(MinimaxCut, MatchesExhaustiveSearch) {
    std::mt19937_64 gen(9);
    std::uniform_int_distribution<int> small(0, 5);
    for (int rep = 0; rep < 100; ++rep) {
        const Index n = 2 + static_cast<Index>(gen() % 8);
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = i + 1; j < n; ++j) w(i, j) = w(j, i) = small(gen);  // many ties
        const auto cut = minimax_cut(w);
        EXPECT_EQ(cut.cut_value, oracle::exhaustive_minimax_cut(w));
        EXPECT_EQ(cut.cut_value, cut.lightest_tree_edge);
        std::vector<bool> in_head(static_cast<std::size_t>(n), false);
        for (Index i : cut.head) in_head[static_cast<std::size_t>(i)] = true;
        EXPECT_EQ(cut_value(w, in_head), cut.cut_value);
        EXPECT_EQ(static_cast<Index>(cut.head.size() + cut.rest.size()), n);
        EXPECT_FALSE(cut.head.empty());
        EXPECT_FALSE(cut.rest.empty());
    }
}

TEST(MinimaxCut, FromValueDistances) {
    Eigen::MatrixXd v(4, 1);
    v << 0.0, 0.1, 10.0, 10.2;
    Eigen::MatrixXd d(4, 4);
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 4; ++j) d(i, j) = std::abs(v(i, 0) - v(j, 0));
    const auto cut = cut_from_values(v);
    EXPECT_NEAR(cut.cut_value, oracle::exhaustive_minimax_cut(d), 1e-12);
    // Isolating the inner point of the right group has the smallest widest crossing.
    EXPECT_EQ(cut.head.size() == 1 ? cut.head : cut.rest, std::vector<Index>{2});
    EXPECT_NEAR(cut.cut_value, 10.0, 1e-12);
}

TEST(MinimaxCut, Validation) {
    EXPECT_THROW(minimax_cut(Eigen::MatrixXd::Zero(1, 1)), DomainError);
    EXPECT_THROW(minimax_cut(Eigen::MatrixXd::Zero(2, 3)), InvalidInput);
    Eigen::MatrixXd asym = Eigen::MatrixXd::Zero(2, 2);
    asym(0, 1) = 1.0;
    EXPECT_THROW(minimax_cut(asym), InvalidInput);
    Eigen::MatrixXd neg = -Eigen::MatrixXd::Ones(2, 2);
    EXPECT_THROW(minimax_cut(neg), InvalidInput);
}
