#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "dynbin/csv.hpp"
#include "dynbin/errors.hpp"
#include "dynbin/model.hpp"
#include "dynbin/priors.hpp"
#include "dynbin/rng.hpp"
#include "dynbin/sampler.hpp"
#include "dynbin/samples.hpp"

namespace dynbin {

inline constexpr double kDefaultThreshold = 1.4;
inline constexpr int kBaselineYear = 1960;
inline constexpr int kDefaultSplitYear = 2004;

/// Yearly index returns, years strictly increasing.
class ReturnSeries {
public:
    ReturnSeries() = default;

    void add(int year, double value) {
        if (!years_.empty() && year <= years_.back()) {
            throw std::invalid_argument(fmt::format("year {} does not follow {}", year, years_.back()));
        }
        if (!std::isfinite(value)) throw std::invalid_argument(fmt::format("return for {} is not finite", year));
        years_.push_back(year);
        values_.push_back(value);
    }

    std::span<const int> years() const noexcept { return years_; }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return years_.size(); }

private:
    std::vector<int> years_;
    std::vector<double> values_;
};

/// y = 1 iff the return strictly exceeds the threshold.
inline std::vector<std::uint8_t> binarize(const ReturnSeries& series, double threshold = kDefaultThreshold) {
    std::vector<std::uint8_t> y;
    y.reserve(series.size());
    for (double v : series.values()) y.push_back(v > threshold ? 1 : 0);
    return y;
}

/// Time-trend covariate: calendar year minus the baseline year.
inline std::vector<double> build_design(std::span<const int> years, int baseline = kBaselineYear) {
    std::vector<double> x;
    x.reserve(years.size());
    for (int y : years) x.push_back(static_cast<double>(y - baseline));
    return x;
}

/// One individual per year (id = year) with a single observation; the trend
/// sits in x1 and x2 is zero.
inline PanelDataset yearly_panel(const ReturnSeries& series, int first_year, int last_year, double threshold,
                                 int baseline = kBaselineYear) {
    const auto y = binarize(series, threshold);
    const auto x = build_design(series.years(), baseline);
    PanelDataset data;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const int year = series.years()[k];
        if (year < first_year || year > last_year) continue;
        data.add_individual(year, {Observation{1, y[k], x[k], 0.0}});
    }
    return data;
}

struct SpindexRow {
    std::string run;
    std::string parameter;
    SummaryStats stats;
};

struct TwoStageResult {
    PosteriorSummary stage1;
    PriorSet stage2_priors;
    PosteriorSummary uninformative;  ///< later years, diffuse priors
    PosteriorSummary informative;    ///< later years, priors from the earlier years
    std::vector<std::string> warnings;

    std::vector<SpindexRow> table() const {
        std::vector<SpindexRow> rows;
        for (const auto& [name, s] : {std::pair{"uninformative", &uninformative}, std::pair{"informative", &informative}}) {
            rows.push_back({name, "beta0", s->beta[0]});
            rows.push_back({name, "beta1", s->beta[1]});
            rows.push_back({name, "sigma", s->sigma});
        }
        return rows;
    }
};

/// Fits years <= split_year under the diffuse priors, turns that posterior
/// into priors, and fits the later years twice: with those priors and with
/// the diffuse ones. A stage whose responses are all equal is fitted anyway
/// and reported in `warnings`.
inline TwoStageResult two_stage_fit(const ReturnSeries& series, const ChainConfig& chain,
                                    int split_year = kDefaultSplitYear, double threshold = kDefaultThreshold) {
    if (series.size() == 0) throw std::invalid_argument("return series is empty");
    const int first = series.years().front();
    const int last = series.years().back();
    const auto early = yearly_panel(series, first, split_year, threshold);
    const auto late = split_year < last ? yearly_panel(series, split_year + 1, last, threshold) : PanelDataset{};
    if (early.empty()) throw std::invalid_argument(fmt::format("stage 1 is empty: no years <= {}", split_year));
    if (late.empty()) throw std::invalid_argument(fmt::format("stage 2 is empty: no years after {}", split_year));

    TwoStageResult out;
    auto check_degenerate = [&out](const PanelDataset& d, const char* label) {
        const auto rows = d.all_rows();
        const bool all_same =
            std::all_of(rows.begin(), rows.end(), [&](const Observation& o) { return o.y == rows.front().y; });
        if (all_same) {
            out.warnings.push_back(fmt::format("{}: every response is {}; the fit rests on the priors", label,
                                               static_cast<int>(rows.front().y)));
        }
    };
    check_degenerate(early, "stage 1");
    check_degenerate(late, "stage 2");

    ChainConfig c = chain;
    c.store_epsilon = false;
    c.seed = derive_seed(chain.seed, 1);
    const auto stage1 = run_chain(early, default_uninformative(), c);
    out.stage1 = summarize(stage1);
    out.stage2_priors = posterior_to_priorset(stage1);

    c.seed = derive_seed(chain.seed, 2);
    out.uninformative = summarize(run_chain(late, default_uninformative(), c));
    c.seed = derive_seed(chain.seed, 3);
    out.informative = summarize(run_chain(late, out.stage2_priors, c));
    return out;
}

inline void write_spindex_csv(std::ostream& out, const TwoStageResult& r) {
    out << "run,parameter,mean,sd,lcl,ucl\n";
    for (const auto& row : r.table()) {
        out << fmt::format("{},{},{},{},{},{}\n", row.run, row.parameter, row.stats.mean, row.stats.sd,
                           row.stats.lower, row.stats.upper);
    }
}

inline ReturnSeries read_returns_csv(std::istream& in, const std::string& source = "<returns>") {
    CsvReader csv(in, source, {"year", "return"});
    ReturnSeries s;
    while (csv.next()) {
        const int year = csv.get<int>(0);
        const double value = csv.get<double>(1);
        if (!s.years().empty() && year <= s.years().back()) csv.fail(0, "years must be strictly increasing");
        if (!std::isfinite(value)) csv.fail(1, "return must be finite");
        s.add(year, value);
    }
    return s;
}

inline ReturnSeries load_returns_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read_returns_csv(in, path);
}

inline void write_returns_csv(std::ostream& out, const ReturnSeries& s) {
    out << "year,return\n";
    for (std::size_t k = 0; k < s.size(); ++k) out << fmt::format("{},{}\n", s.years()[k], s.values()[k]);
}

/// Parameters of the synthetic stand-in for the yearly index series.
struct SurrogateModel {
    int first_year = 1960;
    int last_year = 2018;
    double beta0 = -1.5;
    double beta1 = 0.04;  ///< per year since the baseline
    double sigma = 1.0;
    std::uint64_t seed = 2018;
};

/// Synthetic yearly series: exceedance indicators follow the random-effects
/// logistic trend model; returns above the threshold are threshold + 0.001 +
/// Exp(1), the rest U(-3, threshold). Values are rounded to 3 decimals.
inline ReturnSeries surrogate_series(const SurrogateModel& m = {}, double threshold = kDefaultThreshold) {
    Rng rng = make_rng(m.seed);
    std::normal_distribution<double> effect(0.0, m.sigma);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> excess(1.0);
    std::uniform_real_distribution<double> below(-3.0, threshold);
    auto round3 = [](double v) { return std::round(v * 1000.0) / 1000.0; };

    ReturnSeries s;
    for (int year = m.first_year; year <= m.last_year; ++year) {
        const double mu = m.beta0 + m.beta1 * (year - kBaselineYear) + effect(rng);
        const bool exceed = unit(rng) < success_probability(mu);
        s.add(year, exceed ? round3(threshold + 0.001 + excess(rng)) : round3(below(rng)));
    }
    return s;
}

}  // namespace dynbin
