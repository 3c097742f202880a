// dynbin: generate panels, fit the random-effects logistic model, run the
// sequential-updating study, and fit the yearly index application.
//
// Exit codes: 0 success, 1 usage/config/input error, 2 runtime failure.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "dynbin/dynbin.hpp"

namespace {

using namespace dynbin;

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

/// Chain flags shared by fit and spindex; unset flags keep config values.
struct ChainFlags {
    std::optional<std::size_t> burn_in;
    std::optional<std::size_t> samples;
    std::optional<std::size_t> thin;

    void add_to(CLI::App& app) {
        app.add_option("--burn-in", burn_in, "Burn-in iterations (adaptation happens only here)");
        app.add_option("--samples", samples, "Draws kept after burn-in");
        app.add_option("--thin", thin, "Keep every n-th post burn-in draw");
    }

    void apply(ChainConfig& c) const {
        if (burn_in) c.burn_in = *burn_in;
        if (samples) c.samples = *samples;
        if (thin) c.thin = *thin;
    }
};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    return out;
}

/// Writes via `fn` to stdout for "-" or to the named file.
template <class Fn>
void emit(const std::string& path, Fn&& fn) {
    if (path == "-") {
        fn(std::cout);
        return;
    }
    auto out = open_out(path);
    fn(out);
}

StudyConfigFile config_or_defaults(const std::string& path) {
    return path.empty() ? StudyConfigFile{} : load_study_config(path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian random-effects logistic model for dynamic binary panels"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate one replicate panel and its truth sidecar");
    std::string gen_config;
    std::string gen_out = "panel.csv";
    std::optional<std::uint64_t> gen_seed;
    std::size_t gen_replicate = 1;
    gen->add_option("--config", gen_config, "Study config file")->required();
    gen->add_option("--out", gen_out, "Panel CSV path; the sidecar is <out>.truth");
    gen->add_option("--seed", gen_seed, "Master seed (overrides config)");
    gen->add_option("--replicate", gen_replicate, "Replicate number (1-based) of the study stream")
        ->check(CLI::PositiveNumber);

    // fit
    auto* fit = app.add_subcommand("fit", "Fit one panel and summarize the posterior");
    std::string fit_data;
    std::string fit_priors_in = "uninformative";
    std::string fit_priors_out;
    std::string fit_out = "-";
    std::string fit_draws_out;
    std::string fit_config;
    std::optional<std::uint64_t> fit_seed;
    bool fit_store_eps = false;
    ChainFlags fit_chain;
    fit->add_option("--data", fit_data, "Panel CSV (individual,time,y,x1,x2)")->required();
    fit->add_option("--priors-in", fit_priors_in, "Prior file, or 'uninformative'");
    fit->add_option("--priors-out", fit_priors_out, "Write moment-matched priors from this posterior");
    fit->add_option("--out", fit_out, "Summary CSV path ('-' for stdout)");
    fit->add_option("--draws-out", fit_draws_out, "Kept draws CSV (iteration,parameter,value)");
    fit->add_option("--config", fit_config, "Config file supplying chain settings");
    fit->add_option("--seed", fit_seed, "Chain seed");
    fit->add_flag("--store-epsilon", fit_store_eps, "Include random-effect draws in --draws-out");
    fit_chain.add_to(*fit);

    // study
    auto* study = app.add_subcommand("study", "Run the replicate study and write per-parameter tables");
    std::string study_config;
    std::optional<std::string> study_out;
    std::optional<std::uint64_t> study_seed;
    std::optional<std::size_t> study_threads;
    study->add_option("--config", study_config, "Study config file")->required();
    study->add_option("--out", study_out, "Output directory (overrides config)");
    study->add_option("--seed", study_seed, "Master seed (overrides config)");
    study->add_option("--threads", study_threads, "Concurrent replicates (overrides config)");

    // spindex
    auto* sp = app.add_subcommand("spindex", "Two-stage fit of a yearly return series");
    std::string sp_data;
    int sp_split = kDefaultSplitYear;
    double sp_threshold = kDefaultThreshold;
    std::string sp_out = "-";
    std::string sp_config;
    std::string sp_dump;
    std::optional<std::uint64_t> sp_seed;
    ChainFlags sp_chain;
    sp->add_option("--data", sp_data, "Return CSV (year,return); default: bundled synthetic surrogate");
    sp->add_option("--split", sp_split, "Last year of stage 1");
    sp->add_option("--threshold", sp_threshold, "y = 1 iff return exceeds this");
    sp->add_option("--out", sp_out, "Table CSV path ('-' for stdout)");
    sp->add_option("--config", sp_config, "Config file supplying chain settings");
    sp->add_option("--seed", sp_seed, "Chain seed");
    sp->add_option("--dump-surrogate", sp_dump, "Write the bundled surrogate series to this path and exit");
    sp_chain.add_to(*sp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*gen) {
            auto cfg = load_study_config(gen_config);
            if (gen_seed) cfg.sim.seed = *gen_seed;
            const auto seed = data_seed(cfg.sim.seed, gen_replicate - 1);
            Rng rng = make_rng(seed);
            const auto panel = gen_panel(cfg.sim, rng);
            auto out = open_out(gen_out);
            write_panel_csv(out, panel.data);
            auto truth = open_out(gen_out + ".truth");
            write_truth_sidecar(truth, cfg.sim, seed, panel);
            fmt::print(stderr, "wrote {} ({} rows) and {}.truth\n", gen_out, panel.data.observations(), gen_out);
        } else if (*fit) {
            auto chain = config_or_defaults(fit_config).chain;
            fit_chain.apply(chain);
            if (fit_seed) chain.seed = *fit_seed;
            chain.store_epsilon = fit_store_eps;
            const auto data = load_panel_csv(fit_data);
            const auto priors = fit_priors_in == "uninformative" ? default_uninformative() : load_priors(fit_priors_in);
            const auto samples = run_chain(data, priors, chain);
            emit(fit_out, [&](std::ostream& os) { write_summary_csv(os, summarize(samples)); });
            if (!fit_draws_out.empty()) emit(fit_draws_out, [&](std::ostream& os) { write_draws_csv(os, samples); });
            if (!fit_priors_out.empty()) {
                emit(fit_priors_out, [&](std::ostream& os) { write_priors(os, posterior_to_priorset(samples)); });
            }
            double eps_accept = 0.0;
            for (double a : samples.accept_epsilon) eps_accept += a;
            if (!samples.accept_epsilon.empty()) eps_accept /= static_cast<double>(samples.accept_epsilon.size());
            fmt::print(stderr, "acceptance: beta block {:.3f}, random effects (mean) {:.3f}\n", samples.accept_beta,
                       eps_accept);
        } else if (*study) {
            auto cfg = load_study_config(study_config);
            if (study_out) cfg.out = *study_out;
            if (study_seed) cfg.sim.seed = cfg.chain.seed = *study_seed;
            if (study_threads) cfg.threads = *study_threads;
            const auto result = run_study(cfg.sim, cfg.runs, cfg.chain, cfg.worker_count());
            for (const auto& path : write_study(cfg.out, result)) fmt::print(stderr, "wrote {}\n", path.string());
        } else if (*sp) {
            if (!sp_dump.empty()) {
                emit(sp_dump, [&](std::ostream& os) { write_returns_csv(os, surrogate_series()); });
                return 0;
            }
            auto chain = config_or_defaults(sp_config).chain;
            sp_chain.apply(chain);
            if (sp_seed) chain.seed = *sp_seed;
            const auto series = sp_data.empty() ? surrogate_series() : load_returns_csv(sp_data);
            const auto result = two_stage_fit(series, chain, sp_split, sp_threshold);
            for (const auto& w : result.warnings) fmt::print(stderr, "warning: {}\n", w);
            emit(sp_out, [&](std::ostream& os) { write_spindex_csv(os, result); });
        }
    } catch (const InputError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        fmt::print(stderr, "failure: {}\n", e.what());
        return kExitRuntime;
    }
    return 0;
}
