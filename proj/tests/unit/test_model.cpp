#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "dynbin/model.hpp"
#include "dynbin/posterior.hpp"
#include "dynbin/priors.hpp"
#include "support/oracles.hpp"

using namespace dynbin;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

PanelDataset single(std::uint8_t y, double x1 = 0.0, double x2 = 0.0) {
    PanelDataset d;
    d.add_individual(1, {Observation{1, y, x1, x2}});
    return d;
}

PanelDataset random_panel(std::mt19937_64& rng, std::size_t individuals, std::size_t max_len) {
    std::uniform_int_distribution<std::size_t> len(1, max_len);
    std::normal_distribution<double> cov(0.0, 1.5);
    std::bernoulli_distribution coin(0.5);
    PanelDataset d;
    for (std::size_t i = 0; i < individuals; ++i) {
        std::vector<Observation> rows;
        const auto n = len(rng);
        for (std::size_t j = 0; j < n; ++j) {
            rows.push_back({static_cast<int>(j + 1), static_cast<std::uint8_t>(coin(rng)), cov(rng), cov(rng)});
        }
        d.add_individual(static_cast<int>(i + 1), std::move(rows));
    }
    return d;
}

ParameterState random_state(std::mt19937_64& rng, std::size_t individuals) {
    std::normal_distribution<double> z(0.0, 1.0);
    ParameterState s;
    for (auto& b : s.beta) b = z(rng);
    for (std::size_t i = 0; i < individuals; ++i) s.epsilon.push_back(z(rng));
    s.sigma2 = 0.5 + std::abs(z(rng));
    return s;
}

}  // namespace

TEST_CASE("linear_predictor adds fixed part and random effect", "[model]") {
    ParameterState s;
    s.beta = {-1.0, 1.0, 1.0};
    s.epsilon = {0.0, 0.25};
    CHECK(linear_predictor(s, 0, 1.0, 0.0) == 0.0);
    CHECK(linear_predictor(s, 0, 0.0, 0.0) == -1.0);
    CHECK_THAT(linear_predictor(s, 1, 1.0, 0.5), WithinAbs(0.75, 1e-15));
    CHECK_THROWS_AS(linear_predictor(s, 2, 0.0, 0.0), std::out_of_range);
}

TEST_CASE("success_probability is the logistic function", "[model]") {
    CHECK(success_probability(0.0) == 0.5);
    CHECK_THAT(success_probability(std::log(3.0)), WithinAbs(0.75, 1e-15));
    CHECK_THAT(success_probability(-std::log(3.0)), WithinAbs(0.25, 1e-15));
    CHECK_THROWS_AS(success_probability(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
    CHECK_THROWS_AS(success_probability(std::numeric_limits<double>::infinity()), std::domain_error);

    SECTION("no exact 0 or 1 within +-36") {
        for (double mu = -36.0; mu <= 36.0; mu += 0.5) {
            const double p = success_probability(mu);
            CHECK(p > 0.0);
            CHECK(p < 1.0);
        }
    }
    SECTION("p(mu) + p(-mu) = 1") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(-50.0, 50.0);
        for (int k = 0; k < 2000; ++k) {
            const double mu = u(rng);
            CHECK_THAT(success_probability(mu) + success_probability(-mu), WithinAbs(1.0, 1e-12));
        }
    }
}

TEST_CASE("log1p_exp stays finite for large arguments", "[model]") {
    CHECK_THAT(log1p_exp(800.0), WithinRel(800.0, 1e-15));
    CHECK(log1p_exp(-800.0) >= 0.0);
    CHECK_THAT(log1p_exp(0.0), WithinAbs(std::log(2.0), 1e-15));
    CHECK_THAT(log1p_exp(3.0), WithinAbs(std::log1p(std::exp(3.0)), 1e-14));
}

TEST_CASE("log_likelihood on hand-computed cases", "[model]") {
    ParameterState s;
    s.beta = {0.0, 0.0, 0.0};
    s.epsilon = {0.0};
    CHECK_THAT(log_likelihood(single(1), s), WithinAbs(-0.693147, 1e-6));
    CHECK_THAT(log_likelihood(single(0), s), WithinAbs(-0.693147, 1e-6));

    PanelDataset two;
    two.add_individual(1, {Observation{1, 1, 0.0, 0.0}, Observation{2, 0, 0.0, 0.0}});
    s.beta[0] = std::log(3.0);
    CHECK_THAT(log_likelihood(two, s), WithinAbs(std::log(0.75) + std::log(0.25), 1e-12));
    CHECK_THAT(log_likelihood(two, s), WithinAbs(-1.673976, 1e-6));

    s.epsilon = {0.0, 0.0};
    CHECK_THROWS_AS(log_likelihood(two, s), std::invalid_argument);
}

TEST_CASE("log_likelihood is finite for huge linear predictors", "[model]") {
    ParameterState s;
    s.beta = {0.0, 0.0, 100.0};
    s.epsilon = {0.0};
    CHECK(std::isfinite(log_likelihood(single(0, 0.0, 20.0), s)));
    CHECK_THAT(log_likelihood(single(0, 0.0, 20.0), s), WithinRel(-2000.0, 1e-12));
    CHECK_THAT(log_likelihood(single(1, 0.0, 20.0), s), WithinAbs(0.0, 1e-12));
}

TEST_CASE("log_likelihood is invariant under permuting individuals with their effects", "[model][property]") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto data = random_panel(rng, 6, 5);
        const auto state = random_state(rng, 6);
        std::vector<std::size_t> perm(6);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        PanelDataset permuted;
        ParameterState pstate = state;
        pstate.epsilon.clear();
        for (auto k : perm) {
            permuted.add_individual(data.id(k), {data.rows(k).begin(), data.rows(k).end()});
            pstate.epsilon.push_back(state.epsilon[k]);
        }
        CHECK_THAT(log_likelihood(permuted, pstate), WithinAbs(log_likelihood(data, state), 1e-10));
    }
}

TEST_CASE("analytic score matches central finite differences", "[model][property]") {
    std::mt19937_64 rng(5);
    const double h = 1e-5;
    for (int trial = 0; trial < 30; ++trial) {
        const auto data = random_panel(rng, 4, 6);
        const auto state = random_state(rng, 4);
        const auto g = score_beta(data, state);
        for (std::size_t k = 0; k < kFixedEffects; ++k) {
            auto up = state;
            auto down = state;
            up.beta[k] += h;
            down.beta[k] -= h;
            const double fd = (log_likelihood(data, up) - log_likelihood(data, down)) / (2.0 * h);
            CHECK_THAT(fd, WithinRel(g[k], 1e-6) || WithinAbs(g[k], 1e-9));
        }
    }
}

TEST_CASE("log_posterior with no data is the prior alone", "[model]") {
    PanelDataset empty;
    PriorSet priors;
    priors.beta = {NormalPrior{0.5, 2.0}, NormalPrior{-1.0, 3.0}, NormalPrior{2.0, 0.5}};
    priors.sigma2 = InverseGammaPrior{2.0, 1.0};
    ParameterState s;
    s.beta = {0.5, -1.0, 2.0};
    s.sigma2 = 1.0;
    double expected = log_density_invgamma(priors.sigma2, 1.0);
    for (std::size_t k = 0; k < 3; ++k) expected += log_density_normal(priors.beta[k], s.beta[k]);
    CHECK_THAT(log_posterior(empty, s, priors), WithinAbs(expected, 1e-14));
}

TEST_CASE("log_posterior decreases away from the beta0 mode", "[model]") {
    const auto data = single(1, 0.0, 0.0);
    PriorSet priors = default_uninformative();
    priors.beta[0] = NormalPrior{0.0, 1.0};
    ParameterState s;
    s.epsilon = {0.0};
    s.sigma2 = 1.0;
    // Locate the conditional mode on a fine grid, then step away both ways.
    double best = -10.0;
    double best_val = -1e300;
    for (double b = -5.0; b <= 5.0; b += 1e-3) {
        s.beta[0] = b;
        const double v = log_posterior(data, s, priors);
        if (v > best_val) {
            best_val = v;
            best = b;
        }
    }
    double prev_right = best_val;
    double prev_left = best_val;
    for (double d = 0.1; d < 4.0; d += 0.1) {
        s.beta[0] = best + d;
        const double right = log_posterior(data, s, priors);
        s.beta[0] = best - d;
        const double left = log_posterior(data, s, priors);
        CHECK(right < prev_right);
        CHECK(left < prev_left);
        prev_right = right;
        prev_left = left;
    }
}

TEST_CASE("log_posterior agrees with a term-by-term reimplementation", "[model][oracle]") {
    PanelDataset data;
    data.add_individual(7, {Observation{1, 1, 1.0, 0.3}});
    data.add_individual(9, {Observation{4, 0, 0.0, -1.2}});
    PriorSet priors;
    priors.beta = {NormalPrior{-1.0, 4.0}, NormalPrior{0.5, 2.0}, NormalPrior{1.0, 0.25}};
    priors.sigma2 = InverseGammaPrior{3.0, 2.0};
    ParameterState s;
    s.beta = {-0.7, 1.3, 0.4};
    s.epsilon = {0.35, -0.8};
    s.sigma2 = 0.9;

    double expected = 0.0;
    expected += oracle::naive_bernoulli_log_mass(1, -0.7 + 1.3 * 1.0 + 0.4 * 0.3 + 0.35);
    expected += oracle::naive_bernoulli_log_mass(0, -0.7 + 1.3 * 0.0 + 0.4 * -1.2 - 0.8);
    expected += oracle::naive_normal_log_density(-0.7, -1.0, 4.0);
    expected += oracle::naive_normal_log_density(1.3, 0.5, 2.0);
    expected += oracle::naive_normal_log_density(0.4, 1.0, 0.25);
    expected += oracle::naive_normal_log_density(0.35, 0.0, 0.9);
    expected += oracle::naive_normal_log_density(-0.8, 0.0, 0.9);
    expected += oracle::naive_invgamma_log_density(0.9, 3.0, 2.0);

    CHECK_THAT(log_posterior(data, s, priors), WithinAbs(expected, 1e-12));

    s.sigma2 = 0.0;
    CHECK_THROWS(log_posterior(data, s, priors));
}

TEST_CASE("log_posterior minus log_likelihood does not depend on data", "[model][property]") {
    std::mt19937_64 rng(17);
    const auto priors = default_uninformative();
    for (int trial = 0; trial < 20; ++trial) {
        const auto state = random_state(rng, 5);
        const auto a = random_panel(rng, 5, 4);
        const auto b = random_panel(rng, 5, 8);
        const double da = log_posterior(a, state, priors) - log_likelihood(a, state);
        const double db = log_posterior(b, state, priors) - log_likelihood(b, state);
        CHECK_THAT(da, WithinAbs(db, 1e-9));
    }
}

TEST_CASE("PanelDataset enforces its invariants", "[model]") {
    PanelDataset d;
    CHECK_THROWS_AS(d.add_individual(1, {}), std::invalid_argument);
    CHECK_THROWS_AS(d.add_individual(1, {Observation{1, 2, 0, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(d.add_individual(1, {Observation{2, 0, 0, 0}, Observation{2, 1, 0, 0}}), std::invalid_argument);
    d.add_individual(3, {Observation{1, 0, 0, 0}, Observation{5, 1, 1, 2}});
    d.add_individual(4, {Observation{2, 1, 0, 0}});
    CHECK(d.individuals() == 2);
    CHECK(d.observations() == 3);
    CHECK_FALSE(d.rectangular());
    CHECK(d.rows(0)[1].time == 5);
}
