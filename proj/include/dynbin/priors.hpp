#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>

#include "dynbin/errors.hpp"
#include "dynbin/keyvalue.hpp"
#include "dynbin/model.hpp"
#include "dynbin/samples.hpp"

namespace dynbin {

struct NormalPrior {
    double mean = 0.0;
    double variance = 1.0;

    bool valid() const noexcept { return std::isfinite(mean) && std::isfinite(variance) && variance > 0.0; }
    friend bool operator==(const NormalPrior&, const NormalPrior&) = default;
};

/// Inverse-gamma with density b^a / Gamma(a) * x^(-a-1) * exp(-b/x).
struct InverseGammaPrior {
    double shape = 1.0;
    double scale = 1.0;

    bool valid() const noexcept {
        return std::isfinite(shape) && std::isfinite(scale) && shape > 0.0 && scale > 0.0;
    }
    friend bool operator==(const InverseGammaPrior&, const InverseGammaPrior&) = default;
};

struct PriorSet {
    std::array<NormalPrior, kFixedEffects> beta;
    InverseGammaPrior sigma2;

    bool valid() const noexcept {
        return std::all_of(beta.begin(), beta.end(), [](const NormalPrior& p) { return p.valid(); }) &&
               sigma2.valid();
    }
    friend bool operator==(const PriorSet&, const PriorSet&) = default;
};

inline void require_valid(const PriorSet& p) {
    if (!p.valid()) throw std::invalid_argument("invalid prior set");
}

/// Diffuse defaults: N(0, 10000) on each fixed effect, IG(0.001, 0.001) on sigma^2.
inline PriorSet default_uninformative() {
    PriorSet p;
    p.beta.fill(NormalPrior{0.0, 10000.0});
    p.sigma2 = InverseGammaPrior{0.001, 0.001};
    return p;
}

inline double log_density_normal(const NormalPrior& p, double x) {
    if (!p.valid()) throw std::invalid_argument("normal prior needs variance > 0");
    const double d = x - p.mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * p.variance) + d * d / p.variance);
}

inline double log_density_invgamma(const InverseGammaPrior& p, double x) {
    if (!p.valid()) throw std::invalid_argument("inverse-gamma prior needs shape > 0 and scale > 0");
    if (!(x > 0.0)) throw std::domain_error("inverse-gamma density needs x > 0");
    return p.shape * std::log(p.scale) - std::lgamma(p.shape) - (p.shape + 1.0) * std::log(x) - p.scale / x;
}

namespace detail {

struct Moments {
    double mean;
    double variance;  // divisor n - 1
};

inline Moments sample_moments(std::span<const double> xs) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, ss / (n - 1.0)};
}

}  // namespace detail

inline constexpr double kNormalVarianceFloor = 1e-8;

/// Moment-matched normal: sample mean and unbiased variance (floored).
inline NormalPrior fit_normal(std::span<const double> samples) {
    if (samples.size() < 2) throw std::invalid_argument("fit_normal needs at least 2 samples");
    if (std::all_of(samples.begin(), samples.end(), [&](double x) { return x == samples.front(); })) {
        throw std::invalid_argument("fit_normal: all samples identical");
    }
    const auto m = detail::sample_moments(samples);
    return {m.mean, std::max(m.variance, kNormalVarianceFloor)};
}

/// Method-of-moments inverse-gamma: shape = m^2/v + 2, scale = m (shape - 1).
/// The fitted shape always exceeds 2, so mean and variance are finite.
inline InverseGammaPrior fit_invgamma(std::span<const double> samples) {
    if (samples.size() < 2) throw std::invalid_argument("fit_invgamma needs at least 2 samples");
    if (std::any_of(samples.begin(), samples.end(), [](double x) { return !(x > 0.0); })) {
        throw std::invalid_argument("fit_invgamma: samples must be positive");
    }
    const auto m = detail::sample_moments(samples);
    if (!(m.variance > 0.0)) throw std::invalid_argument("fit_invgamma: zero sample variance");
    const double shape = m.mean * m.mean / m.variance + 2.0;
    return {shape, m.mean * (shape - 1.0)};
}

/// Stage-two priors from a stage-one fit: independent moment-matched normals
/// for the fixed effects and an inverse-gamma for sigma^2. Random-effect
/// draws are not carried over.
inline PriorSet posterior_to_priorset(const PosteriorSamples& samples) {
    PriorSet p;
    for (std::size_t k = 0; k < kFixedEffects; ++k) {
        if (samples.beta[k].empty()) {
            throw std::invalid_argument("posterior_to_priorset: missing chain for beta" + std::to_string(k));
        }
        p.beta[k] = fit_normal(samples.beta[k]);
    }
    if (samples.sigma2.empty()) throw std::invalid_argument("posterior_to_priorset: missing chain for sigma2");
    p.sigma2 = fit_invgamma(samples.sigma2);
    return p;
}

// Text form:
//   beta0.mean = ...   beta0.variance = ...   (likewise beta1, beta2)
//   sigma2.shape = ... sigma2.scale = ...

inline void write_priors(std::ostream& out, const PriorSet& p) {
    out << "# dynbin prior set\n";
    for (std::size_t k = 0; k < kFixedEffects; ++k) {
        out << "beta" << k << ".mean = " << format_exact(p.beta[k].mean) << '\n';
        out << "beta" << k << ".variance = " << format_exact(p.beta[k].variance) << '\n';
    }
    out << "sigma2.shape = " << format_exact(p.sigma2.shape) << '\n';
    out << "sigma2.scale = " << format_exact(p.sigma2.scale) << '\n';
}

inline PriorSet read_priors(KeyValueFile kv) {
    PriorSet p;
    for (std::size_t k = 0; k < kFixedEffects; ++k) {
        const auto base = "beta" + std::to_string(k);
        p.beta[k].mean = kv.get_double(base + ".mean");
        p.beta[k].variance = kv.get_double(base + ".variance");
        if (!p.beta[k].valid()) kv.fail(base + ".variance", "must be finite and > 0");
    }
    p.sigma2.shape = kv.get_double("sigma2.shape");
    p.sigma2.scale = kv.get_double("sigma2.scale");
    if (!(p.sigma2.shape > 0.0) || !std::isfinite(p.sigma2.shape)) kv.fail("sigma2.shape", "must be finite and > 0");
    if (!(p.sigma2.scale > 0.0) || !std::isfinite(p.sigma2.scale)) kv.fail("sigma2.scale", "must be finite and > 0");
    kv.require_all_used();
    return p;
}

inline PriorSet load_priors(const std::string& path) { return read_priors(KeyValueFile::load(path)); }

}  // namespace dynbin
