#pragma once

#include "topkcert/distribution.hpp"

#include <cstdint>

namespace topkcert {

double phi_cdf(double x);
double phi_survival(double x);
// Inverse standard normal CDF (Wichura's AS 241, about 1e-16 relative accuracy).
double phi_quantile(double p);

// i.i.d. N(mu, sigma^2) scores over n keys.
struct GaussianScoreModel {
    double mu = 0.0;
    double sigma = 1.0;
    Index n = 1;

    GaussianScoreModel() = default;
    GaussianScoreModel(double mu_, double sigma_, Index n_);
};

// Almost-sure limit of the softmax mass carried by scores above t.
double limit_tail_mass(const GaussianScoreModel& model, double t);

// t_eps = mu + sigma^2 + sigma * Phi^{-1}(eps).
double threshold_for_eps(const GaussianScoreModel& model, double eps);

struct CertifiedSize {
    double expected = 0.0;  // n * Phi_c(sigma + Phi^{-1}(eps))
    Index ceiling = 0;
    double ratio = 0.0;     // expected / n
};

CertifiedSize k_eps(const GaussianScoreModel& model, double eps);

// n standard normal draws from mt19937_64 seeded with `seed`.
Eigen::VectorXd standard_normal_draws(Index n, std::uint64_t seed);

ScoreVector sample_scores(const GaussianScoreModel& model, std::uint64_t seed);

}  // namespace topkcert
