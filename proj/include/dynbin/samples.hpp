#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "dynbin/model.hpp"

namespace dynbin {

struct ChainConfig {
    std::size_t burn_in = 2000;
    std::size_t samples = 10000;  ///< draws kept after burn-in
    std::size_t thin = 1;
    std::uint64_t seed = 1;
    double target_accept_block = 0.234;
    double target_accept_scalar = 0.44;
    std::size_t adapt_window = 50;
    bool store_epsilon = false;

    void validate() const {
        if (samples < 1) throw std::invalid_argument("chain: samples must be >= 1");
        if (thin < 1) throw std::invalid_argument("chain: thin must be >= 1");
        if (adapt_window < 1) throw std::invalid_argument("chain: adapt_window must be >= 1");
        auto in_unit = [](double t) { return t > 0.0 && t < 1.0; };
        if (!in_unit(target_accept_block) || !in_unit(target_accept_scalar)) {
            throw std::invalid_argument("chain: acceptance targets must lie in (0, 1)");
        }
    }

    friend bool operator==(const ChainConfig&, const ChainConfig&) = default;
};

enum class Parameter { beta0, beta1, beta2, sigma2 };

inline constexpr std::array<Parameter, 4> kChainParameters{Parameter::beta0, Parameter::beta1,
                                                           Parameter::beta2, Parameter::sigma2};

inline std::string_view parameter_name(Parameter p) {
    switch (p) {
        case Parameter::beta0: return "beta0";
        case Parameter::beta1: return "beta1";
        case Parameter::beta2: return "beta2";
        case Parameter::sigma2: return "sigma2";
    }
    return "?";
}

/// Kept draws of one chain plus the tuning it ended with.
struct PosteriorSamples {
    std::array<std::vector<double>, kFixedEffects> beta;
    std::vector<double> sigma2;
    /// Kept random-effect draws, row-major (draw, individual); empty unless
    /// ChainConfig::store_epsilon was set.
    std::vector<double> epsilon;
    std::size_t individuals = 0;

    double accept_beta = 0.0;             ///< post burn-in acceptance of the beta block
    std::vector<double> accept_epsilon;   ///< post burn-in acceptance per random effect
    std::array<double, 9> beta_proposal_factor{};  ///< row-major lower Cholesky factor, scale included
    std::vector<double> epsilon_scales;
    ChainConfig config;

    std::uint64_t seed() const noexcept { return config.seed; }
    std::size_t size() const noexcept { return sigma2.size(); }

    std::span<const double> chain(Parameter p) const {
        switch (p) {
            case Parameter::beta0: return beta[0];
            case Parameter::beta1: return beta[1];
            case Parameter::beta2: return beta[2];
            case Parameter::sigma2: return sigma2;
        }
        throw std::invalid_argument("unknown parameter");
    }

    /// Per-draw square root of sigma^2.
    std::vector<double> sigma_draws() const {
        std::vector<double> out(sigma2.size());
        std::transform(sigma2.begin(), sigma2.end(), out.begin(), [](double v) { return std::sqrt(v); });
        return out;
    }

    friend bool operator==(const PosteriorSamples&, const PosteriorSamples&) = default;
};

struct SummaryStats {
    double mean = 0.0;
    double sd = 0.0;
    double lower = 0.0;  ///< empirical 2.5% quantile
    double upper = 0.0;  ///< empirical 97.5% quantile
    double ess = 0.0;

    double mcse() const { return ess > 0.0 ? sd / std::sqrt(ess) : 0.0; }
};

/// Linear-interpolation quantile of sorted data (the usual "type 7").
inline double quantile_sorted(std::span<const double> sorted, double prob) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
    const double h = prob * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// n / (1 + 2 * sum of autocorrelations), truncated at the first
/// non-positive autocorrelation and capped at n.
inline double effective_sample_size(std::span<const double> xs) {
    const std::size_t n = xs.size();
    const double nd = static_cast<double>(n);
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= nd;
    double c0 = 0.0;
    for (double x : xs) c0 += (x - mean) * (x - mean);
    if (!(c0 > 0.0)) return nd;
    double rho_sum = 0.0;
    for (std::size_t lag = 1; lag < n; ++lag) {
        double c = 0.0;
        for (std::size_t t = 0; t + lag < n; ++t) c += (xs[t] - mean) * (xs[t + lag] - mean);
        const double rho = c / c0;
        if (rho <= 0.0) break;
        rho_sum += rho;
    }
    return std::min(nd, nd / (1.0 + 2.0 * rho_sum));
}

inline SummaryStats summarize_chain(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("summarize needs at least 2 draws");
    SummaryStats s;
    const double n = static_cast<double>(xs.size());
    for (double x : xs) s.mean += x;
    s.mean /= n;
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    s.lower = quantile_sorted(sorted, 0.025);
    s.upper = quantile_sorted(sorted, 0.975);
    s.ess = effective_sample_size(xs);
    return s;
}

/// Summaries reported for a fit: the fixed effects and sigma (from per-draw
/// square roots of sigma^2).
struct PosteriorSummary {
    std::array<SummaryStats, kFixedEffects> beta;
    SummaryStats sigma;
};

inline PosteriorSummary summarize(const PosteriorSamples& s) {
    PosteriorSummary out;
    for (std::size_t k = 0; k < kFixedEffects; ++k) out.beta[k] = summarize_chain(s.beta[k]);
    out.sigma = summarize_chain(s.sigma_draws());
    return out;
}

inline void write_summary_csv(std::ostream& out, const PosteriorSummary& s) {
    out << "parameter,mean,sd,lcl,ucl,ess\n";
    auto row = [&out](std::string_view name, const SummaryStats& st) {
        out << fmt::format("{},{},{},{},{},{}\n", name, st.mean, st.sd, st.lower, st.upper, st.ess);
    };
    for (std::size_t k = 0; k < kFixedEffects; ++k) row(fmt::format("beta{}", k), s.beta[k]);
    row("sigma", s.sigma);
}

/// Long-format draws: `iteration,parameter,value`, iteration counted over
/// kept draws from 1.
inline void write_draws_csv(std::ostream& out, const PosteriorSamples& s) {
    out << "iteration,parameter,value\n";
    for (std::size_t t = 0; t < s.size(); ++t) {
        for (auto p : kChainParameters) {
            out << fmt::format("{},{},{}\n", t + 1, parameter_name(p), s.chain(p)[t]);
        }
        if (!s.epsilon.empty()) {
            for (std::size_t i = 0; i < s.individuals; ++i) {
                out << fmt::format("{},epsilon{},{}\n", t + 1, i + 1, s.epsilon[t * s.individuals + i]);
            }
        }
    }
}

}  // namespace dynbin
