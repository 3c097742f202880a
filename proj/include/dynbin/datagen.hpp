#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dynbin/keyvalue.hpp"
#include "dynbin/model.hpp"
#include "dynbin/rng.hpp"

namespace dynbin {

struct SimConfig {
    std::size_t individuals = 100;  ///< I
    std::size_t periods = 12;       ///< T
    double sigma = 1.0;             ///< random-effect standard deviation
    FixedEffects beta_true{-1.0, 1.0, 1.0};
    std::size_t replicates = 30;    ///< N
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const {
        if (individuals < 2 || individuals % 2 != 0) {
            throw std::invalid_argument("individuals: must be even and >= 2 (got " + std::to_string(individuals) + ")");
        }
        if (periods < 2 || periods % 2 != 0) {
            throw std::invalid_argument("periods: must be even and >= 2 (got " + std::to_string(periods) + ")");
        }
        if (!(sigma > 0.0)) throw std::invalid_argument("sigma: must be > 0");
        if (replicates < 1) throw std::invalid_argument("replicates: must be >= 1");
    }
};

/// Trending autoregression x[1] = u_1, x[j] = 0.1 j + 0.5 x[j-1] + u_j for
/// j >= 2, with u_j drawn from `noise()` (normally U(-0.5, 0.5)).
template <class Noise>
std::vector<double> gen_x2_path(std::size_t periods, Noise&& noise) {
    std::vector<double> x(periods);
    for (std::size_t j = 1; j <= periods; ++j) {
        const double u = noise();
        x[j - 1] = j == 1 ? u : 0.1 * static_cast<double>(j) + 0.5 * x[j - 2] + u;
    }
    return x;
}

inline std::vector<double> gen_x2_path(std::size_t periods, Rng& rng) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    return gen_x2_path(periods, [&] { return u(rng); });
}

struct SimulatedPanel {
    PanelDataset data;
    std::vector<double> true_epsilon;  ///< never passed to a fit
};

/// One replicate: per individual, eps_i ~ N(0, sigma^2), a time-constant
/// x1_i ~ Bernoulli(0.5), an x2 path, then y_ij ~ Bernoulli(logistic(mu_ij)).
/// Individuals are numbered 1..I and times 1..T.
inline SimulatedPanel gen_panel(const SimConfig& config, Rng& rng) {
    config.validate();
    std::normal_distribution<double> effect(0.0, config.sigma);
    std::bernoulli_distribution coin(0.5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SimulatedPanel out;
    out.true_epsilon.reserve(config.individuals);
    for (std::size_t i = 1; i <= config.individuals; ++i) {
        const double eps = effect(rng);
        const double x1 = coin(rng) ? 1.0 : 0.0;
        const auto x2 = gen_x2_path(config.periods, rng);
        std::vector<Observation> rows(config.periods);
        for (std::size_t j = 0; j < config.periods; ++j) {
            const double mu = fixed_part(config.beta_true, x1, x2[j]) + eps;
            rows[j] = Observation{static_cast<int>(j + 1), static_cast<std::uint8_t>(unit(rng) < success_probability(mu)),
                                  x1, x2[j]};
        }
        out.data.add_individual(static_cast<int>(i), std::move(rows));
        out.true_epsilon.push_back(eps);
    }
    return out;
}

/// The four blocks of a panel halved by individuals (rows) and by time
/// (columns). Ids, times and covariate values are carried verbatim.
struct Quadrants {
    PanelDataset m11;  ///< first individuals, early times
    PanelDataset m12;  ///< first individuals, late times
    PanelDataset m21;  ///< second individuals, early times
    PanelDataset m22;  ///< second individuals, late times
};

inline Quadrants partition(const PanelDataset& data) {
    const std::size_t n_ind = data.individuals();
    if (n_ind < 2 || n_ind % 2 != 0) throw std::invalid_argument("partition: individual count must be even");
    if (!data.rectangular()) throw std::invalid_argument("partition: panel is ragged");
    const std::size_t periods = data.rows(0).size();
    if (periods < 2 || periods % 2 != 0) throw std::invalid_argument("partition: period count must be even");

    Quadrants q;
    const std::size_t half_t = periods / 2;
    for (std::size_t k = 0; k < n_ind; ++k) {
        const auto rows = data.rows(k);
        std::vector<Observation> early(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(half_t));
        std::vector<Observation> late(rows.begin() + static_cast<std::ptrdiff_t>(half_t), rows.end());
        const bool first_half = k < n_ind / 2;
        (first_half ? q.m11 : q.m21).add_individual(data.id(k), std::move(early));
        (first_half ? q.m12 : q.m22).add_individual(data.id(k), std::move(late));
    }
    return q;
}

/// Same individuals in the same order, observations of `right` appended
/// after those of `left` ([A B]).
inline PanelDataset join_time(const PanelDataset& left, const PanelDataset& right) {
    if (left.individuals() != right.individuals()) throw std::invalid_argument("join_time: individual counts differ");
    PanelDataset out;
    for (std::size_t k = 0; k < left.individuals(); ++k) {
        if (left.id(k) != right.id(k)) throw std::invalid_argument("join_time: individual ids differ");
        std::vector<Observation> rows(left.rows(k).begin(), left.rows(k).end());
        rows.insert(rows.end(), right.rows(k).begin(), right.rows(k).end());
        out.add_individual(left.id(k), std::move(rows));
    }
    return out;
}

/// Individuals of `top` followed by those of `bottom` ([A; B]).
inline PanelDataset stack_individuals(const PanelDataset& top, const PanelDataset& bottom) {
    PanelDataset out;
    for (const auto* part : {&top, &bottom}) {
        for (std::size_t k = 0; k < part->individuals(); ++k) {
            out.add_individual(part->id(k), std::vector<Observation>(part->rows(k).begin(), part->rows(k).end()));
        }
    }
    return out;
}

/// Key-value sidecar for a generated panel: the generating config and the
/// true random effects (`epsilon.<id>`).
inline void write_truth_sidecar(std::ostream& out, const SimConfig& config, std::uint64_t data_seed,
                                const SimulatedPanel& panel) {
    out << "# dynbin generated panel truth\n";
    out << "individuals = " << config.individuals << '\n';
    out << "periods = " << config.periods << '\n';
    out << "sigma = " << format_exact(config.sigma) << '\n';
    for (std::size_t k = 0; k < kFixedEffects; ++k) {
        out << "beta" << k << " = " << format_exact(config.beta_true[k]) << '\n';
    }
    out << "seed = " << config.seed << '\n';
    out << "data_seed = " << data_seed << '\n';
    for (std::size_t k = 0; k < panel.true_epsilon.size(); ++k) {
        out << "epsilon." << panel.data.id(k) << " = " << format_exact(panel.true_epsilon[k]) << '\n';
    }
}

}  // namespace dynbin
