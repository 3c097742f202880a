#include <cmath>
#include <random>
#include <set>
#include <utility>

#include <catch2/catch_amalgamated.hpp>

#include "dynbin/datagen.hpp"
#include "dynbin/experiment.hpp"
#include "support/oracles.hpp"

using namespace dynbin;
using Catch::Matchers::WithinAbs;

namespace {

SimConfig small_config(std::size_t individuals, std::size_t periods) {
    SimConfig c;
    c.individuals = individuals;
    c.periods = periods;
    return c;
}

}  // namespace

TEST_CASE("x2 recursion with zero noise", "[datagen]") {
    const auto x = gen_x2_path(4, [] { return 0.0; });
    REQUIRE(x.size() == 4);
    CHECK(x[0] == 0.0);
    CHECK_THAT(x[1], WithinAbs(0.2, 1e-15));
    CHECK_THAT(x[2], WithinAbs(0.4, 1e-15));
    CHECK_THAT(x[3], WithinAbs(0.6, 1e-15));
}

TEST_CASE("x2 paths start in (-0.5, 0.5) and trend as expected", "[datagen]") {
    Rng rng = make_rng(1);
    double sum12 = 0.0;
    const int paths = 10000;
    for (int p = 0; p < paths; ++p) {
        const auto x = gen_x2_path(12, rng);
        CHECK(x[0] > -0.5);
        CHECK(x[0] < 0.5);
        sum12 += x[11];
    }
    // E[x_12] = sum_{j=2}^{12} 0.1 j 0.5^(12 - j); the noise has mean zero.
    double expected = 0.0;
    for (int j = 2; j <= 12; ++j) expected += 0.1 * j * std::pow(0.5, 12 - j);
    CHECK_THAT(expected, WithinAbs(2.2, 1e-12));
    CHECK_THAT(sum12 / paths, WithinAbs(expected, 0.02));
}

TEST_CASE("gen_panel shape and covariates", "[datagen]") {
    auto cfg = small_config(10000, 2);
    Rng rng = make_rng(2);
    const auto panel = gen_panel(cfg, rng);
    REQUIRE(panel.data.individuals() == 10000);
    REQUIRE(panel.true_epsilon.size() == 10000);
    double x1_sum = 0.0;
    for (std::size_t k = 0; k < panel.data.individuals(); ++k) {
        const auto rows = panel.data.rows(k);
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].x1 == rows[1].x1);  // time-constant
        CHECK(rows[0].time == 1);
        CHECK(rows[1].time == 2);
        x1_sum += rows[0].x1;
    }
    CHECK_THAT(x1_sum / 10000.0, WithinAbs(0.5, 0.015));
}

TEST_CASE("vanishing sigma gives vanishing random effects", "[datagen]") {
    auto cfg = small_config(100, 4);
    cfg.sigma = 1e-8;
    Rng rng = make_rng(3);
    const auto panel = gen_panel(cfg, rng);
    for (double e : panel.true_epsilon) CHECK(std::abs(e) < 1e-6);
}

TEST_CASE("response frequency at mu = 0 is one half", "[datagen]") {
    // sigma = 0, x1 = 1, x2 = 0 and beta = (-1, 1, 1) give mu = 0.
    Rng rng = make_rng(4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const FixedEffects beta{-1.0, 1.0, 1.0};
    int ones = 0;
    for (int t = 0; t < 10000; ++t) ones += unit(rng) < success_probability(fixed_part(beta, 1.0, 0.0));
    CHECK_THAT(ones / 10000.0, WithinAbs(0.5, 0.015));
}

TEST_CASE("marginal response rate matches direct simulation", "[datagen][oracle]") {
    // One I = 1000 panel has SD ~0.009 around the marginal rate; ten
    // replicates bring that to ~0.003 against the 0.01 tolerance.
    auto cfg = small_config(1000, 12);
    double ones = 0.0;
    double total = 0.0;
    for (std::size_t rep = 0; rep < 10; ++rep) {
        Rng rng = make_rng(data_seed(5, rep));
        const auto panel = gen_panel(cfg, rng);
        for (const auto& o : panel.data.all_rows()) ones += o.y;
        total += static_cast<double>(panel.data.observations());
    }
    const double empirical = ones / total;

    // Independent Monte Carlo integration of E[p] over eps, x1 and the x2 path.
    std::mt19937 ref(2024);
    std::normal_distribution<double> eps(0.0, 1.0);
    std::uniform_real_distribution<double> noise(-0.5, 0.5);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    double p_sum = 0.0;
    const int draws = 200000;
    for (int d = 0; d < draws; ++d) {
        const double e = eps(ref);
        const double x1 = coin(ref) < 0.5 ? 1.0 : 0.0;
        double x2 = 0.0;
        for (int j = 1; j <= 12; ++j) {
            x2 = (j == 1 ? 0.0 : 0.1 * j + 0.5 * x2) + noise(ref);
            const double mu = -1.0 + x1 + x2 + e;
            p_sum += 1.0 / (1.0 + std::exp(-mu));
        }
    }
    CHECK_THAT(empirical, WithinAbs(p_sum / (12.0 * draws), 0.01));
}

TEST_CASE("generation is deterministic and replicate streams differ", "[datagen]") {
    const auto cfg = small_config(20, 6);
    Rng a = make_rng(data_seed(7, 0));
    Rng b = make_rng(data_seed(7, 0));
    CHECK(gen_panel(cfg, a).data == gen_panel(cfg, b).data);

    Rng r0 = make_rng(data_seed(7, 0));
    Rng r1 = make_rng(data_seed(7, 1));
    int same = 0;
    for (int k = 0; k < 100; ++k) same += r0() == r1();
    CHECK(same == 0);
}

TEST_CASE("SimConfig validation names the field", "[datagen]") {
    auto cfg = small_config(5, 4);
    CHECK_THROWS_WITH(cfg.validate(), Catch::Matchers::ContainsSubstring("individuals"));
    cfg = small_config(4, 3);
    CHECK_THROWS_WITH(cfg.validate(), Catch::Matchers::ContainsSubstring("periods"));
    cfg = small_config(4, 4);
    cfg.sigma = 0.0;
    CHECK_THROWS_WITH(cfg.validate(), Catch::Matchers::ContainsSubstring("sigma"));
}

TEST_CASE("partition into quadrants", "[datagen]") {
    Rng rng = make_rng(8);
    const auto data = gen_panel(small_config(4, 4), rng).data;
    const auto q = partition(data);
    for (const auto* m : {&q.m11, &q.m12, &q.m21, &q.m22}) {
        CHECK(m->individuals() == 2);
        CHECK(m->observations() == 4);
    }
    CHECK(q.m22.id(0) == 3);
    CHECK(q.m22.id(1) == 4);
    CHECK(q.m22.rows(0)[0].time == 3);
    CHECK(q.m22.rows(0)[1].time == 4);
    CHECK(q.m22.rows(1)[1] == data.rows(3)[3]);
    CHECK(q.m12.rows(0)[0] == data.rows(0)[2]);

    SECTION("reassembly is lossless") {
        const auto rows = stack_individuals(join_time(q.m11, q.m12), join_time(q.m21, q.m22));
        CHECK(rows == data);
        const auto cols = join_time(stack_individuals(q.m11, q.m21), stack_individuals(q.m12, q.m22));
        CHECK(cols == data);
    }
}

TEST_CASE("every cell lands in exactly one quadrant", "[datagen][property]") {
    Rng rng = make_rng(9);
    for (std::size_t i : {2u, 6u, 10u}) {
        for (std::size_t t : {2u, 4u, 12u}) {
            const auto data = gen_panel(small_config(i, t), rng).data;
            const auto q = partition(data);
            std::multiset<std::pair<int, int>> cells;
            for (const auto* m : {&q.m11, &q.m12, &q.m21, &q.m22}) {
                for (std::size_t k = 0; k < m->individuals(); ++k) {
                    for (const auto& o : m->rows(k)) cells.insert({m->id(k), o.time});
                }
            }
            CHECK(cells.size() == data.observations());
            for (std::size_t k = 0; k < data.individuals(); ++k) {
                for (const auto& o : data.rows(k)) CHECK(cells.count({data.id(k), o.time}) == 1);
            }
        }
    }
}

TEST_CASE("partition rejects odd and ragged panels", "[datagen]") {
    PanelDataset odd;
    for (int i = 1; i <= 3; ++i) odd.add_individual(i, {Observation{1, 0, 0, 0}, Observation{2, 1, 0, 0}});
    CHECK_THROWS_AS(partition(odd), std::invalid_argument);

    PanelDataset odd_t;
    for (int i = 1; i <= 2; ++i) {
        odd_t.add_individual(i, {Observation{1, 0, 0, 0}, Observation{2, 1, 0, 0}, Observation{3, 1, 0, 0}});
    }
    CHECK_THROWS_AS(partition(odd_t), std::invalid_argument);

    PanelDataset ragged;
    ragged.add_individual(1, {Observation{1, 0, 0, 0}, Observation{2, 1, 0, 0}});
    ragged.add_individual(2, {Observation{1, 0, 0, 0}, Observation{3, 1, 0, 0}});
    CHECK_THROWS_AS(partition(ragged), std::invalid_argument);
}
