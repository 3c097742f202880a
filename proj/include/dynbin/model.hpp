#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dynbin {

inline constexpr std::size_t kFixedEffects = 3;

using FixedEffects = std::array<double, kFixedEffects>;

/// One observation of the panel. `time` is the original period index j.
struct Observation {
    int time = 1;
    std::uint8_t y = 0;
    double x1 = 0.0;
    double x2 = 0.0;

    friend bool operator==(const Observation&, const Observation&) = default;
};

/// Ragged binary panel, stored individual-major in one flat array.
///
/// Individual k (0-based) owns observations [offsets_[k], offsets_[k+1]).
/// Each individual keeps its original id; times are strictly increasing
/// within an individual.
class PanelDataset {
public:
    PanelDataset() = default;

    /// Appends an individual. Throws std::invalid_argument if the
    /// observations break the dataset invariants.
    void add_individual(int id, std::vector<Observation> rows) {
        if (rows.empty()) {
            throw std::invalid_argument("individual " + std::to_string(id) + " has no observations");
        }
        for (std::size_t j = 0; j < rows.size(); ++j) {
            const auto& r = rows[j];
            if (r.y > 1) {
                throw std::invalid_argument("response for individual " + std::to_string(id) +
                                            " is not 0 or 1");
            }
            if (!std::isfinite(r.x1) || !std::isfinite(r.x2)) {
                throw std::invalid_argument("non-finite covariate for individual " +
                                            std::to_string(id));
            }
            if (j > 0 && rows[j - 1].time >= r.time) {
                throw std::invalid_argument("time indices of individual " + std::to_string(id) +
                                            " are not strictly increasing");
            }
        }
        ids_.push_back(id);
        obs_.insert(obs_.end(), rows.begin(), rows.end());
        offsets_.push_back(obs_.size());
    }

    std::size_t individuals() const noexcept { return ids_.size(); }
    std::size_t observations() const noexcept { return obs_.size(); }
    bool empty() const noexcept { return obs_.empty(); }

    int id(std::size_t k) const { return ids_.at(k); }
    std::span<const int> ids() const noexcept { return ids_; }

    std::span<const Observation> rows(std::size_t k) const {
        if (k >= ids_.size()) throw std::out_of_range("individual index out of range");
        return std::span<const Observation>(obs_).subspan(offsets_[k], offsets_[k + 1] - offsets_[k]);
    }

    std::span<const Observation> all_rows() const noexcept { return obs_; }

    /// Mutable access to responses only; covariates and layout stay fixed.
    void set_response(std::size_t flat_index, std::uint8_t y) {
        if (y > 1) throw std::invalid_argument("response must be 0 or 1");
        obs_.at(flat_index).y = y;
    }

    /// True when every individual has the same time indices.
    bool rectangular() const {
        if (ids_.empty()) return true;
        const auto first = rows(0);
        for (std::size_t k = 1; k < ids_.size(); ++k) {
            const auto r = rows(k);
            if (r.size() != first.size()) return false;
            for (std::size_t j = 0; j < r.size(); ++j) {
                if (r[j].time != first[j].time) return false;
            }
        }
        return true;
    }

    /// 64-bit FNV-1a digest over ids, layout and values.
    std::uint64_t digest() const noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto feed = [&h](const void* p, std::size_t n) {
            const auto* bytes = static_cast<const unsigned char*>(p);
            for (std::size_t i = 0; i < n; ++i) {
                h ^= bytes[i];
                h *= 0x100000001b3ULL;
            }
        };
        for (std::size_t k = 0; k < ids_.size(); ++k) {
            feed(&ids_[k], sizeof(int));
            for (const auto& o : rows(k)) {
                feed(&o.time, sizeof o.time);
                feed(&o.y, sizeof o.y);
                feed(&o.x1, sizeof o.x1);
                feed(&o.x2, sizeof o.x2);
            }
        }
        return h;
    }

    friend bool operator==(const PanelDataset&, const PanelDataset&) = default;

private:
    std::vector<int> ids_;
    std::vector<Observation> obs_;
    std::vector<std::size_t> offsets_{0};
};

/// Sampler position: fixed effects, one random effect per individual, and
/// the random-effect variance.
struct ParameterState {
    FixedEffects beta{};
    std::vector<double> epsilon;
    double sigma2 = 1.0;
};

/// x'beta without the random effect.
inline double fixed_part(const FixedEffects& beta, double x1, double x2) noexcept {
    return beta[0] + beta[1] * x1 + beta[2] * x2;
}

inline double linear_predictor(const ParameterState& state, std::size_t i, double x1, double x2) {
    if (i >= state.epsilon.size()) throw std::out_of_range("individual index out of range");
    return fixed_part(state.beta, x1, x2) + state.epsilon[i];
}

/// log(1 + exp(mu)) without overflow for large mu.
inline double log1p_exp(double mu) noexcept {
    return mu > 0.0 ? mu + std::log1p(std::exp(-mu)) : std::log1p(std::exp(mu));
}

/// Logistic function exp(mu) / (1 + exp(mu)).
inline double success_probability(double mu) {
    if (!std::isfinite(mu)) throw std::domain_error("success_probability: non-finite input");
    if (mu >= 0.0) return 1.0 / (1.0 + std::exp(-mu));
    const double e = std::exp(mu);
    return e / (1.0 + e);
}

/// Bernoulli log-mass of y at linear predictor mu.
inline double bernoulli_logit_log_mass(std::uint8_t y, double mu) noexcept {
    return (y ? mu : 0.0) - log1p_exp(mu);
}

/// Log-likelihood of individual k's observations at fixed effects `beta`
/// and random effect `eps`.
inline double individual_log_likelihood(const PanelDataset& data, std::size_t k,
                                        const FixedEffects& beta, double eps) {
    double ll = 0.0;
    for (const auto& o : data.rows(k)) {
        ll += bernoulli_logit_log_mass(o.y, fixed_part(beta, o.x1, o.x2) + eps);
    }
    return ll;
}

inline void check_dimensions(const PanelDataset& data, const ParameterState& state) {
    if (state.epsilon.size() != data.individuals()) {
        throw std::invalid_argument("random effect count " + std::to_string(state.epsilon.size()) +
                                    " does not match " + std::to_string(data.individuals()) +
                                    " individuals");
    }
}

inline double log_likelihood(const PanelDataset& data, const ParameterState& state) {
    check_dimensions(data, state);
    double ll = 0.0;
    for (std::size_t k = 0; k < data.individuals(); ++k) {
        ll += individual_log_likelihood(data, k, state.beta, state.epsilon[k]);
    }
    return ll;
}

/// Gradient of the log-likelihood with respect to the fixed effects:
/// sum of (y - p) * (1, x1, x2).
inline FixedEffects score_beta(const PanelDataset& data, const ParameterState& state) {
    check_dimensions(data, state);
    FixedEffects g{};
    for (std::size_t k = 0; k < data.individuals(); ++k) {
        for (const auto& o : data.rows(k)) {
            const double r = o.y - success_probability(fixed_part(state.beta, o.x1, o.x2) + state.epsilon[k]);
            g[0] += r;
            g[1] += r * o.x1;
            g[2] += r * o.x2;
        }
    }
    return g;
}

}  // namespace dynbin
