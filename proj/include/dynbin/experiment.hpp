#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "dynbin/datagen.hpp"
#include "dynbin/errors.hpp"
#include "dynbin/priors.hpp"
#include "dynbin/rng.hpp"
#include "dynbin/sampler.hpp"
#include "dynbin/samples.hpp"

namespace dynbin {

enum class RunId { R1 = 1, R2, R3, R4, R5, R6 };

inline constexpr std::array<RunId, 6> kAllRuns{RunId::R1, RunId::R2, RunId::R3, RunId::R4, RunId::R5, RunId::R6};

inline std::string run_name(RunId r) { return "R" + std::to_string(static_cast<int>(r)); }

inline RunId parse_run(std::string_view s) {
    if (s.size() == 2 && (s[0] == 'R' || s[0] == 'r') && s[1] >= '1' && s[1] <= '6') {
        return static_cast<RunId>(s[1] - '0');
    }
    throw std::invalid_argument("unknown run '" + std::string(s) + "' (expected R1..R6)");
}

/// Which block(s) of the quadrant grid a fit sees.
enum class Block {
    first_individuals,   ///< [M11 M12]
    second_individuals,  ///< [M21 M22]
    early_times,         ///< [M11; M21]
    late_times,          ///< [M12; M22]
    m11,
    m22,
};

inline PanelDataset select_block(const Quadrants& q, Block b) {
    switch (b) {
        case Block::first_individuals: return join_time(q.m11, q.m12);
        case Block::second_individuals: return join_time(q.m21, q.m22);
        case Block::early_times: return stack_individuals(q.m11, q.m21);
        case Block::late_times: return stack_individuals(q.m12, q.m22);
        case Block::m11: return q.m11;
        case Block::m22: return q.m22;
    }
    throw std::invalid_argument("unknown block");
}

/// A run is an optional stage-one fit under the diffuse priors whose
/// posterior becomes the stage-two prior; without stage one, stage two uses
/// the diffuse priors.
struct RunSpec {
    RunId id;
    std::optional<Block> stage1;
    Block stage2;
};

inline RunSpec run_spec(RunId r) {
    switch (r) {
        case RunId::R1: return {r, Block::first_individuals, Block::second_individuals};
        case RunId::R2: return {r, Block::early_times, Block::late_times};
        case RunId::R3: return {r, Block::m11, Block::m22};
        case RunId::R4: return {r, std::nullopt, Block::m22};
        case RunId::R5: return {r, std::nullopt, Block::second_individuals};
        case RunId::R6: return {r, std::nullopt, Block::late_times};
    }
    throw std::invalid_argument("unknown run");
}

/// Quantities estimated per run: the three fixed effects and sigma.
enum class Estimand { beta0, beta1, beta2, sigma };

inline constexpr std::array<Estimand, 4> kEstimands{Estimand::beta0, Estimand::beta1, Estimand::beta2,
                                                    Estimand::sigma};

inline std::string_view estimand_name(Estimand e) {
    switch (e) {
        case Estimand::beta0: return "beta0";
        case Estimand::beta1: return "beta1";
        case Estimand::beta2: return "beta2";
        case Estimand::sigma: return "sigma";
    }
    return "?";
}

inline double truth_of(const SimConfig& sim, Estimand e) {
    return e == Estimand::sigma ? sim.sigma : sim.beta_true[static_cast<std::size_t>(e)];
}

struct RunOutcome {
    std::array<double, 4> estimates{};  ///< posterior means, indexed by Estimand
    std::uint64_t stage2_digest = 0;
    std::size_t fits = 0;
    PriorSet stage2_priors;

    double operator[](Estimand e) const { return estimates[static_cast<std::size_t>(e)]; }
};

/// Fits one run on one replicate's quadrants. Stage seeds derive from
/// `chain.seed`.
inline RunOutcome execute_run(RunId id, const Quadrants& quadrants, const ChainConfig& chain) {
    const auto spec = run_spec(id);
    RunOutcome out;
    out.stage2_priors = default_uninformative();
    if (spec.stage1) {
        ChainConfig first = chain;
        first.seed = derive_seed(chain.seed, 1);
        first.store_epsilon = false;
        const auto stage1 = run_chain(select_block(quadrants, *spec.stage1), default_uninformative(), first);
        out.stage2_priors = posterior_to_priorset(stage1);
        ++out.fits;
    }
    ChainConfig second = chain;
    second.seed = derive_seed(chain.seed, 2);
    second.store_epsilon = false;
    const auto data = select_block(quadrants, spec.stage2);
    out.stage2_digest = data.digest();
    const auto fit = run_chain(data, out.stage2_priors, second);
    ++out.fits;
    const auto summary = summarize(fit);
    for (std::size_t k = 0; k < kFixedEffects; ++k) out.estimates[k] = summary.beta[k].mean;
    out.estimates[3] = summary.sigma.mean;
    return out;
}

namespace detail {

/// Mean and divisor-(n-1) variance over sorted values so the result does
/// not depend on input order.
inline std::pair<double, double> ordered_moments(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("need at least 2 replicate estimates");
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, ss / static_cast<double>(v.size() - 1)};
}

}  // namespace detail

/// Squared bias of the replicate mean plus the replicate variance.
inline double mse(std::span<const double> estimates, double truth) {
    const auto [mean, var] = detail::ordered_moments(estimates);
    return (mean - truth) * (mean - truth) + var;
}

/// mean -/+ t(0.975, N-1) * SD / sqrt(N) over replicate estimates.
inline std::pair<double, double> replicate_ci(std::span<const double> estimates) {
    const auto [mean, var] = detail::ordered_moments(estimates);
    const double n = static_cast<double>(estimates.size());
    const boost::math::students_t dist(n - 1.0);
    const double half = boost::math::quantile(dist, 0.975) * std::sqrt(var / n);
    return {mean - half, mean + half};
}

struct SummaryRow {
    RunId run;
    Estimand parameter;
    std::size_t individuals;  ///< the table's "N" column
    double mean;
    double sd;
    double lcl;
    double ucl;
    double mse;
};

inline SummaryRow summarize_estimates(RunId run, Estimand e, std::size_t individuals,
                                      std::span<const double> estimates, double truth) {
    const auto [mean, var] = detail::ordered_moments(estimates);
    const auto [lcl, ucl] = replicate_ci(estimates);
    return {run, e, individuals, mean, std::sqrt(var), lcl, ucl, mse(estimates, truth)};
}

struct StudyResult {
    SimConfig sim;
    std::vector<RunId> runs;
    /// outcomes[replicate][run position in `runs`]
    std::vector<std::vector<RunOutcome>> outcomes;
    std::vector<SummaryRow> rows;

    std::vector<double> estimates(RunId run, Estimand e) const {
        const auto pos = static_cast<std::size_t>(std::find(runs.begin(), runs.end(), run) - runs.begin());
        if (pos == runs.size()) throw std::invalid_argument("run " + run_name(run) + " not in study");
        std::vector<double> v;
        for (const auto& rep : outcomes) v.push_back(rep[pos][e]);
        return v;
    }

    const SummaryRow& row(RunId run, Estimand e) const {
        for (const auto& r : rows) {
            if (r.run == run && r.parameter == e) return r;
        }
        throw std::invalid_argument("no summary row for " + run_name(run));
    }
};

/// Seed of the chain(s) for one run of one replicate.
inline std::uint64_t run_seed(std::uint64_t master, std::size_t replicate, RunId run) {
    return derive_seed(derive_seed(master, replicate), static_cast<std::uint64_t>(run));
}

/// Seed of a replicate's data generator.
inline std::uint64_t data_seed(std::uint64_t master, std::size_t replicate) {
    return derive_seed(derive_seed(master, replicate), 0);
}

/// Generates, partitions and fits every run for one replicate.
inline std::vector<RunOutcome> run_replicate(const SimConfig& sim, std::span<const RunId> runs,
                                             const ChainConfig& chain, std::size_t replicate) {
    Rng rng = make_rng(data_seed(sim.seed, replicate));
    const auto panel = gen_panel(sim, rng);
    const auto quadrants = partition(panel.data);
    std::vector<RunOutcome> out;
    for (RunId r : runs) {
        ChainConfig c = chain;
        c.seed = run_seed(sim.seed, replicate, r);
        try {
            out.push_back(execute_run(r, quadrants, c));
        } catch (const std::exception& e) {
            throw SamplerError(fmt::format("replicate {} run {}: {}", replicate + 1, run_name(r), e.what()));
        }
    }
    return out;
}

/// Runs every replicate (concurrently on up to `threads` workers), then
/// aggregates one SummaryRow per (run, estimand). The result depends only on
/// the configs, never on scheduling. Any failed replicate aborts the study.
inline StudyResult run_study(const SimConfig& sim, std::vector<RunId> runs, const ChainConfig& chain,
                             std::size_t threads = 1) {
    sim.validate();
    chain.validate();
    if (runs.empty()) throw std::invalid_argument("study needs at least one run");
    std::sort(runs.begin(), runs.end());
    runs.erase(std::unique(runs.begin(), runs.end()), runs.end());
    if (sim.replicates < 2) throw std::invalid_argument("replicates: need at least 2 to aggregate");

    StudyResult result;
    result.sim = sim;
    result.runs = runs;
    result.outcomes.resize(sim.replicates);
    std::vector<std::exception_ptr> errors(sim.replicates);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t rep = next++; rep < sim.replicates; rep = next++) {
            try {
                result.outcomes[rep] = run_replicate(sim, runs, chain, rep);
            } catch (...) {
                errors[rep] = std::current_exception();
            }
        }
    };
    const std::size_t n_workers = std::clamp<std::size_t>(threads, 1, sim.replicates);
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
        worker();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    for (RunId r : runs) {
        for (Estimand e : kEstimands) {
            result.rows.push_back(
                summarize_estimates(r, e, sim.individuals, result.estimates(r, e), truth_of(sim, e)));
        }
    }
    return result;
}

inline void write_table_csv(std::ostream& out, const StudyResult& study, Estimand e) {
    out << "run,N,mean,sd,lcl,ucl,mse\n";
    for (const auto& r : study.rows) {
        if (r.parameter != e) continue;
        out << fmt::format("{},{},{},{},{},{},{}\n", run_name(r.run), r.individuals, r.mean, r.sd, r.lcl, r.ucl,
                           r.mse);
    }
}

inline void write_estimates_csv(std::ostream& out, const StudyResult& study) {
    out << "replicate,run,parameter,estimate\n";
    for (std::size_t rep = 0; rep < study.outcomes.size(); ++rep) {
        for (std::size_t p = 0; p < study.runs.size(); ++p) {
            for (Estimand e : kEstimands) {
                out << fmt::format("{},{},{},{}\n", rep + 1, run_name(study.runs[p]), estimand_name(e),
                                   study.outcomes[rep][p][e]);
            }
        }
    }
}

/// Writes `<estimand>.csv` per estimand plus `estimates.csv` into `dir`.
inline std::vector<std::filesystem::path> write_study(const std::filesystem::path& dir, const StudyResult& study) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (Estimand e : kEstimands) {
        const auto path = dir / (std::string(estimand_name(e)) + ".csv");
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        write_table_csv(out, study, e);
        written.push_back(path);
    }
    const auto raw = dir / "estimates.csv";
    std::ofstream out(raw);
    if (!out) throw std::runtime_error("cannot write " + raw.string());
    write_estimates_csv(out, study);
    written.push_back(raw);
    return written;
}

}  // namespace dynbin
