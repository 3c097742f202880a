#pragma once

#include <cmath>
#include <stdexcept>

#include "dynbin/model.hpp"
#include "dynbin/priors.hpp"

namespace dynbin {

/// Sum of the prior log-densities: fixed effects, random effects given
/// sigma^2, and sigma^2 itself. Normalizing constants included.
inline double log_prior(const ParameterState& state, const PriorSet& priors) {
    if (!(state.sigma2 > 0.0)) throw std::domain_error("log_prior: sigma2 must be > 0");
    require_valid(priors);
    double lp = 0.0;
    for (std::size_t k = 0; k < kFixedEffects; ++k) lp += log_density_normal(priors.beta[k], state.beta[k]);
    const NormalPrior effect{0.0, state.sigma2};
    for (double e : state.epsilon) lp += log_density_normal(effect, e);
    lp += log_density_invgamma(priors.sigma2, state.sigma2);
    return lp;
}

inline double log_posterior(const PanelDataset& data, const ParameterState& state, const PriorSet& priors) {
    return log_likelihood(data, state) + log_prior(state, priors);
}

}  // namespace dynbin
