#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "dynbin/errors.hpp"
#include "dynbin/model.hpp"
#include "dynbin/posterior.hpp"
#include "dynbin/priors.hpp"
#include "dynbin/rng.hpp"
#include "dynbin/samples.hpp"

namespace dynbin {

/// Robbins-Monro step on a log proposal scale.
constexpr double adapt_scale(double log_scale, double observed_accept, double target, double step) noexcept {
    return log_scale + step * (observed_accept - target);
}

inline double draw_invgamma(double shape, double scale, Rng& rng) {
    std::gamma_distribution<double> gamma(shape, 1.0);
    // Tiny shapes can produce a gamma draw of exactly 0.
    for (int attempt = 0; attempt < 100; ++attempt) {
        const double v = scale / gamma(rng);
        if (std::isfinite(v) && v > 0.0) return v;
    }
    throw SamplerError("inverse-gamma draw failed for shape " + std::to_string(shape) + ", scale " +
                       std::to_string(scale));
}

/// Exact draw of sigma^2 from IG(shape + I/2, scale + sum(eps^2)/2).
inline double gibbs_sigma2(std::span<const double> epsilon, const InverseGammaPrior& prior, Rng& rng) {
    double ss = 0.0;
    for (double e : epsilon) ss += e * e;
    return draw_invgamma(prior.shape + 0.5 * static_cast<double>(epsilon.size()), prior.scale + 0.5 * ss, rng);
}

/// Deterministic start: prior means for beta, zero random effects, and the
/// prior mode of sigma^2 unless the prior is too diffuse (shape < 1), in
/// which case sigma^2 starts at 1.
inline ParameterState initial_state(const PanelDataset& data, const PriorSet& priors) {
    ParameterState s;
    for (std::size_t k = 0; k < kFixedEffects; ++k) s.beta[k] = priors.beta[k].mean;
    s.epsilon.assign(data.individuals(), 0.0);
    const double mode = priors.sigma2.scale / (priors.sigma2.shape + 1.0);
    s.sigma2 = (priors.sigma2.shape >= 1.0 && std::isnormal(mode)) ? mode : 1.0;
    return s;
}

/// One Markov transition kernel over (beta, epsilon, sigma^2):
/// a 3-d random-walk Metropolis block for beta, a scalar random-walk
/// Metropolis step per random effect, and a conjugate Gibbs draw for sigma^2.
///
/// Proposal tuning is set from outside; the kernel itself never adapts.
class MetropolisWithinGibbs {
public:
    MetropolisWithinGibbs(const PanelDataset& data, const PriorSet& priors, ParameterState init)
        : data_(&data), priors_(priors), state_(std::move(init)) {
        require_valid(priors_);
        check_dimensions(data, state_);
        if (!(state_.sigma2 > 0.0)) throw std::invalid_argument("initial sigma2 must be > 0");
        beta_factor_.setIdentity();
        eps_log_scale_.assign(data.individuals(), 0.0);
        eps_accepts_.assign(data.individuals(), 0);
        refresh();
        if (!std::isfinite(log_posterior(data, state_, priors_))) {
            throw SamplerError("non-finite log-posterior at the initial state");
        }
    }

    const ParameterState& state() const noexcept { return state_; }
    const PanelDataset& data() const noexcept { return *data_; }

    /// Points the kernel at another dataset of the same layout (or at the
    /// same dataset after its responses changed) and rebuilds caches.
    void rebind(const PanelDataset& data) {
        if (data.individuals() != state_.epsilon.size()) {
            throw std::invalid_argument("rebind: individual count changed");
        }
        data_ = &data;
        refresh();
    }

    void set_beta_log_scale(double v) noexcept { beta_log_scale_ = v; }
    double beta_log_scale() const noexcept { return beta_log_scale_; }

    /// Lower Cholesky factor of the beta proposal shape (scale excluded).
    void set_beta_shape_factor(const Eigen::Matrix3d& lower) { beta_factor_ = lower; }
    const Eigen::Matrix3d& beta_shape_factor() const noexcept { return beta_factor_; }

    void set_epsilon_log_scale(std::size_t i, double v) { eps_log_scale_.at(i) = v; }
    double epsilon_log_scale(std::size_t i) const { return eps_log_scale_.at(i); }

    std::size_t beta_accepts() const noexcept { return beta_accepts_; }
    std::size_t epsilon_accepts(std::size_t i) const { return eps_accepts_.at(i); }
    void reset_counters() {
        beta_accepts_ = 0;
        std::fill(eps_accepts_.begin(), eps_accepts_.end(), 0);
    }

    bool update_beta(Rng& rng) {
        Eigen::Vector3d z;
        for (int k = 0; k < 3; ++k) z[k] = normal_(rng);
        const Eigen::Vector3d step = std::exp(beta_log_scale_) * (beta_factor_ * z);
        FixedEffects proposal = state_.beta;
        for (std::size_t k = 0; k < kFixedEffects; ++k) proposal[k] += step[static_cast<int>(k)];

        double delta = 0.0;
        for (std::size_t k = 0; k < kFixedEffects; ++k) {
            delta += log_density_normal(priors_.beta[k], proposal[k]) -
                     log_density_normal(priors_.beta[k], state_.beta[k]);
        }
        const auto& data = *data_;
        std::size_t flat = 0;
        for (std::size_t i = 0; i < data.individuals(); ++i) {
            double ll = 0.0;
            for (const auto& o : data.rows(i)) {
                const double xb = fixed_part(proposal, o.x1, o.x2);
                xb_scratch_[flat++] = xb;
                ll += bernoulli_logit_log_mass(o.y, xb + state_.epsilon[i]);
            }
            ll_scratch_[i] = ll;
            delta += ll - ll_[i];
        }
        if (!accept(delta, rng)) return false;
        state_.beta = proposal;
        std::swap(xb_, xb_scratch_);
        std::swap(ll_, ll_scratch_);
        ++beta_accepts_;
        return true;
    }

    void update_epsilon(Rng& rng) {
        const auto& data = *data_;
        const double inv_two_var = 0.5 / state_.sigma2;
        std::size_t offset = 0;
        for (std::size_t i = 0; i < data.individuals(); ++i) {
            const auto rows = data.rows(i);
            const double current = state_.epsilon[i];
            const double proposal = current + std::exp(eps_log_scale_[i]) * normal_(rng);
            double ll = 0.0;
            for (std::size_t j = 0; j < rows.size(); ++j) {
                ll += bernoulli_logit_log_mass(rows[j].y, xb_[offset + j] + proposal);
            }
            const double delta = ll - ll_[i] + (current * current - proposal * proposal) * inv_two_var;
            if (accept(delta, rng)) {
                state_.epsilon[i] = proposal;
                ll_[i] = ll;
                ++eps_accepts_[i];
            }
            offset += rows.size();
        }
    }

    void update_sigma2(Rng& rng) { state_.sigma2 = gibbs_sigma2(state_.epsilon, priors_.sigma2, rng); }

    void sweep(Rng& rng) {
        update_beta(rng);
        update_epsilon(rng);
        update_sigma2(rng);
    }

private:
    bool accept(double log_ratio, Rng& rng) {
        if (std::isnan(log_ratio)) return false;
        if (log_ratio >= 0.0) return true;
        return std::log(uniform_(rng)) < log_ratio;
    }

    void refresh() {
        const auto& data = *data_;
        xb_.resize(data.observations());
        xb_scratch_.resize(data.observations());
        ll_.assign(data.individuals(), 0.0);
        ll_scratch_.assign(data.individuals(), 0.0);
        std::size_t flat = 0;
        for (std::size_t i = 0; i < data.individuals(); ++i) {
            for (const auto& o : data.rows(i)) {
                xb_[flat] = fixed_part(state_.beta, o.x1, o.x2);
                ll_[i] += bernoulli_logit_log_mass(o.y, xb_[flat] + state_.epsilon[i]);
                ++flat;
            }
        }
    }

    const PanelDataset* data_;
    PriorSet priors_;
    ParameterState state_;

    std::vector<double> xb_;  // fixed part per observation at the current beta
    std::vector<double> ll_;  // log-likelihood per individual at the current state
    std::vector<double> xb_scratch_;
    std::vector<double> ll_scratch_;

    Eigen::Matrix3d beta_factor_;
    double beta_log_scale_ = 0.0;
    std::vector<double> eps_log_scale_;

    std::size_t beta_accepts_ = 0;
    std::vector<std::size_t> eps_accepts_;

    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

namespace detail {

/// Running mean and scatter of beta draws (Welford).
struct BetaMoments {
    std::size_t n = 0;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();

    void add(const FixedEffects& b) {
        const Eigen::Vector3d x(b[0], b[1], b[2]);
        ++n;
        const Eigen::Vector3d d = x - mean;
        mean += d / static_cast<double>(n);
        scatter += d * (x - mean).transpose();
    }

    Eigen::Matrix3d covariance() const { return scatter / static_cast<double>(n - 1); }
};

}  // namespace detail

/// Adaptation constants for run_chain.
struct AdaptationSchedule {
    /// Burn-in iterations with an identity-shaped beta proposal.
    std::size_t identity_phase = 500;
    /// Iterations discarded before beta draws feed the empirical covariance.
    std::size_t covariance_start = 250;
    double initial_beta_scale = 0.1;
    double covariance_jitter = 1e-6;
    /// Window k uses Robbins-Monro step base_step / sqrt(k).
    double base_step = 1.0;
};

/// Runs one adaptive chain: burn_in iterations with proposal tuning, then
/// samples * thin iterations with tuning frozen, keeping every thin-th draw.
inline PosteriorSamples run_chain(const PanelDataset& data, const PriorSet& priors, const ChainConfig& config,
                                  const AdaptationSchedule& schedule = {}) {
    config.validate();
    if (data.empty()) throw std::invalid_argument("run_chain: dataset is empty");
    require_valid(priors);

    const std::size_t n_ind = data.individuals();
    auto init = initial_state(data, priors);
    const double eps_log_scale = 0.5 * std::log(init.sigma2);
    MetropolisWithinGibbs kernel(data, priors, std::move(init));
    kernel.set_beta_log_scale(std::log(schedule.initial_beta_scale));
    for (std::size_t i = 0; i < n_ind; ++i) kernel.set_epsilon_log_scale(i, eps_log_scale);

    Rng rng = make_rng(config.seed);
    detail::BetaMoments moments;
    bool empirical_shape = false;

    PosteriorSamples out;
    out.config = config;
    out.individuals = n_ind;
    for (auto& b : out.beta) b.reserve(config.samples);
    out.sigma2.reserve(config.samples);
    if (config.store_epsilon) out.epsilon.reserve(config.samples * n_ind);

    const std::size_t total = config.burn_in + config.samples * config.thin;
    for (std::size_t t = 1; t <= total; ++t) {
        kernel.sweep(rng);
        const auto& st = kernel.state();

        if (t <= config.burn_in) {
            if (t > schedule.covariance_start) moments.add(st.beta);
            if (t % config.adapt_window == 0) {
                const double window = static_cast<double>(config.adapt_window);
                const double step = schedule.base_step / std::sqrt(static_cast<double>(t / config.adapt_window));
                kernel.set_beta_log_scale(adapt_scale(kernel.beta_log_scale(), kernel.beta_accepts() / window,
                                                      config.target_accept_block, step));
                for (std::size_t i = 0; i < n_ind; ++i) {
                    kernel.set_epsilon_log_scale(
                        i, adapt_scale(kernel.epsilon_log_scale(i), kernel.epsilon_accepts(i) / window,
                                       config.target_accept_scalar, step));
                }
                if (t >= schedule.identity_phase && moments.n >= 2) {
                    const Eigen::Matrix3d cov =
                        moments.covariance() + schedule.covariance_jitter * Eigen::Matrix3d::Identity();
                    Eigen::LLT<Eigen::Matrix3d> llt(cov);
                    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) {
                        if (!empirical_shape) {
                            kernel.set_beta_log_scale(std::log(2.38 / std::sqrt(3.0)));
                            empirical_shape = true;
                        }
                        kernel.set_beta_shape_factor(llt.matrixL());
                    }
                }
                kernel.reset_counters();
            }
            if (t == config.burn_in) kernel.reset_counters();
            continue;
        }

        if ((t - config.burn_in) % config.thin != 0) continue;
        for (std::size_t k = 0; k < kFixedEffects; ++k) out.beta[k].push_back(st.beta[k]);
        out.sigma2.push_back(st.sigma2);
        if (config.store_epsilon) out.epsilon.insert(out.epsilon.end(), st.epsilon.begin(), st.epsilon.end());
    }

    const double kept_iterations = static_cast<double>(config.samples * config.thin);
    out.accept_beta = kernel.beta_accepts() / kept_iterations;
    out.accept_epsilon.resize(n_ind);
    out.epsilon_scales.resize(n_ind);
    for (std::size_t i = 0; i < n_ind; ++i) {
        out.accept_epsilon[i] = kernel.epsilon_accepts(i) / kept_iterations;
        out.epsilon_scales[i] = std::exp(kernel.epsilon_log_scale(i));
    }
    const Eigen::Matrix3d factor = std::exp(kernel.beta_log_scale()) * kernel.beta_shape_factor();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) out.beta_proposal_factor[static_cast<std::size_t>(r * 3 + c)] = factor(r, c);
    }
    return out;
}

}  // namespace dynbin
