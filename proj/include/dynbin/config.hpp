#pragma once

// Study configuration file (key = value, see keyvalue.hpp). Every key is
// optional; missing keys keep their defaults.
//
//   individuals, periods, sigma, beta0, beta1, beta2, replicates, seed
//   burn_in, samples, thin, target_accept_block, target_accept_scalar, adapt_window
//   runs     comma-separated subset of R1..R6 (default: all six)
//   out      output directory
//   threads  concurrent replicates (0 = hardware concurrency)

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "dynbin/datagen.hpp"
#include "dynbin/errors.hpp"
#include "dynbin/experiment.hpp"
#include "dynbin/keyvalue.hpp"
#include "dynbin/samples.hpp"

namespace dynbin {

struct StudyConfigFile {
    SimConfig sim;
    ChainConfig chain;
    std::vector<RunId> runs{kAllRuns.begin(), kAllRuns.end()};
    std::string out = "study_out";
    std::size_t threads = 0;

    std::size_t worker_count() const {
        if (threads > 0) return threads;
        const auto hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : hw;
    }
};

inline std::vector<RunId> parse_run_list(std::string_view text) {
    std::vector<RunId> runs;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
        runs.push_back(parse_run(item));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return runs;
}

inline StudyConfigFile read_study_config(KeyValueFile kv) {
    StudyConfigFile c;
    auto size_key = [&kv](const char* key, std::size_t& target) {
        if (kv.contains(key)) target = static_cast<std::size_t>(kv.get_uint(key));
    };
    auto double_key = [&kv](const char* key, double& target) {
        if (kv.contains(key)) target = kv.get_double(key);
    };

    size_key("individuals", c.sim.individuals);
    size_key("periods", c.sim.periods);
    double_key("sigma", c.sim.sigma);
    double_key("beta0", c.sim.beta_true[0]);
    double_key("beta1", c.sim.beta_true[1]);
    double_key("beta2", c.sim.beta_true[2]);
    size_key("replicates", c.sim.replicates);
    if (kv.contains("seed")) c.sim.seed = kv.get_uint("seed");
    c.chain.seed = c.sim.seed;

    size_key("burn_in", c.chain.burn_in);
    size_key("samples", c.chain.samples);
    size_key("thin", c.chain.thin);
    double_key("target_accept_block", c.chain.target_accept_block);
    double_key("target_accept_scalar", c.chain.target_accept_scalar);
    size_key("adapt_window", c.chain.adapt_window);

    if (kv.contains("runs")) {
        try {
            c.runs = parse_run_list(kv.get_string("runs"));
        } catch (const std::invalid_argument& e) {
            kv.fail("runs", e.what());
        }
    }
    if (kv.contains("out")) c.out = kv.get_string("out");
    size_key("threads", c.threads);
    kv.require_all_used();

    // Anchor validation failures at the line of the offending key.
    auto check = [&kv](bool ok, const char* key, const char* what) {
        if (ok) return;
        if (kv.contains(key)) kv.fail(key, what);
        throw InputError(kv.source() + ": " + key + ": " + what);
    };
    check(c.sim.individuals >= 2 && c.sim.individuals % 2 == 0, "individuals", "must be even and >= 2");
    check(c.sim.periods >= 2 && c.sim.periods % 2 == 0, "periods", "must be even and >= 2");
    check(c.sim.sigma > 0.0, "sigma", "must be > 0");
    check(c.sim.replicates >= 1, "replicates", "must be >= 1");
    check(c.chain.samples >= 1, "samples", "must be >= 1");
    check(c.chain.thin >= 1, "thin", "must be >= 1");
    check(c.chain.adapt_window >= 1, "adapt_window", "must be >= 1");
    check(c.chain.target_accept_block > 0.0 && c.chain.target_accept_block < 1.0, "target_accept_block",
          "must lie in (0, 1)");
    check(c.chain.target_accept_scalar > 0.0 && c.chain.target_accept_scalar < 1.0, "target_accept_scalar",
          "must lie in (0, 1)");
    return c;
}

inline StudyConfigFile load_study_config(const std::string& path) { return read_study_config(KeyValueFile::load(path)); }

}  // namespace dynbin
