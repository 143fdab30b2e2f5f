#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "osassl/algorithms.hpp"
#include "osassl/core.hpp"
#include "osassl/learners.hpp"
#include "osassl/ledger.hpp"
#include "osassl/oracle.hpp"
#include "osassl/parallel.hpp"

namespace osassl {

/// Stage lengths of the warm-up: `reserve` slices are history only, the next
/// `learners` slices train the base learners, the next `algorithms` slices
/// additionally train the J algorithms; every later slice is an evaluation year.
struct Stages {
    std::size_t reserve = 5;
    std::size_t learners = 5;
    std::size_t algorithms = 6;

    std::size_t minimal_length() const { return reserve + learners + algorithms + 1; }
};

struct ScheduleConfig {
    std::vector<learners::LearnerSpec> learners;
    std::vector<AlgorithmSpec> algorithms = default_algorithms();
    Stages stages;
    PenaltyConfig penalty;   // overarching criterion
    double eps = 0.1;        // overarching net resolution
    double gap_eps = 0.1;    // eps of the excess-risk gap
    std::size_t workers = 1;
};

/// One evaluation year. Selections are those made with slices before `time`.
struct ForecastRow {
    TimeIndex time;
    std::size_t ledger_updates = 0;

    std::size_t discrete_selection = 0;
    std::size_t unpenalized_selection = 0;
    SimplexWeights continuous_weights;

    std::vector<double> empirical_risk;     // R^_{j,t-1}, empty when the ledger is empty
    std::vector<double> penalized_risk;
    double discrete_criterion = std::numeric_limits<double>::quiet_NaN();
    double continuous_criterion = std::numeric_limits<double>::quiet_NaN();
    double discrete_in_net_criterion = std::numeric_limits<double>::quiet_NaN();

    std::vector<double> discrete_predictions;
    std::vector<double> continuous_predictions;
    std::vector<double> algorithm_totals;
    std::vector<double> learner_totals;

    double actual_total = 0.0;
    double discrete_total = 0.0;
    double continuous_total = 0.0;

    double ratio() const { return discrete_total / actual_total; }

    // Synthetic runs only.
    std::vector<double> true_risk;
    std::optional<ExcessGap> gap;
};

struct ForecastReport {
    std::vector<std::string> learner_names;
    std::vector<std::string> algorithm_names;
    std::vector<CityId> cities;
    std::vector<SimplexWeights> net;
    std::vector<ForecastRow> rows;

    RiskLedger ledger;      // discrete overarching, over the J algorithms
    RiskLedger net_ledger;  // continuous overarching, over the net points
    std::optional<OracleProbe> probe;

    std::size_t final_selection = 0;
    std::optional<ExcessGap> final_gap;

    /// Base-learner and algorithm predictors fitted through the last slice
    /// before each evaluation year, keyed like `rows` (kept only on request).
    std::vector<std::vector<learners::PredictorPtr>> algorithm_predictors;
};

/// Per-city predictions for the next slice and their sum.
struct TotalForecast {
    std::vector<double> predictions;
    double total = 0.0;
};

inline TotalForecast forecast_total(const learners::Predictor& predictor, const PanelSlice& next,
                                    const CovariateSchema& schema) {
    TotalForecast f;
    f.predictions.reserve(next.size());
    for (const auto& o : next.observations()) {
        if (o.x().size() != schema.x_arity() || o.z().size() != schema.z_arity())
            throw Error("forecast_total: covariates do not match the schema");
        f.predictions.push_back(predictor.predict(o));
        f.total += f.predictions.back();
    }
    return f;
}

struct ScheduleOptions {
    GroundTruthPtr truth;               // enables the oracle probe
    bool keep_predictors = false;       // fill ForecastReport::algorithm_predictors
};

inline ForecastReport run_schedule(const Panel& panel, const ScheduleConfig& config, const ScheduleOptions& options = {}) {
    const auto& st = config.stages;
    const std::size_t T = panel.num_slices();
    if (st.learners < 1 || st.algorithms < 1)
        throw Error("run_schedule: learner and algorithm stages need at least one slice each");
    if (T < st.minimal_length())
        throw Error("run_schedule: panel has " + std::to_string(T) + " slices, at least " +
                    std::to_string(st.minimal_length()) + " required");
    if (config.learners.empty())
        throw Error("run_schedule: empty learner zoo");
    if (config.algorithms.empty())
        throw Error("run_schedule: empty algorithm list");

    std::vector<learners::BaseLearner> zoo;
    ForecastReport report;
    for (const auto& spec : config.learners) {
        zoo.emplace_back(spec);
        report.learner_names.push_back(zoo.back().name());
    }
    const std::size_t K = zoo.size();
    const std::size_t A = panel.num_cities();
    const std::size_t J = config.algorithms.size();
    const double bound = panel.cost_bound();

    std::vector<std::unique_ptr<SequentialAlgorithm>> algorithms;
    for (const auto& spec : config.algorithms) {
        algorithms.push_back(make_algorithm(spec, report.learner_names, A));
        report.algorithm_names.push_back(spec.name);
    }
    report.cities = panel.cities();
    report.net = epsilon_net(J, config.eps);
    report.ledger = RiskLedger(J, A, config.penalty);
    report.net_ledger = RiskLedger(report.net.size(), A, config.penalty);
    if (options.truth)
        report.probe.emplace(options.truth, J, A);

    std::vector<std::size_t> vertex_pos(J);
    for (std::size_t p = 0; p < report.net.size(); ++p) {
        const auto v = report.net[p].vertex_index();
        if (v < J)
            vertex_pos[v] = p;
    }

    std::vector<learners::PredictorPtr> fitted(K);
    std::vector<CombinerPtr> combiners(J);

    // Slice positions are 1-based below: s is the s-th slice of the panel.
    const std::size_t first_fit = st.reserve + 1;
    const std::size_t first_algorithm = st.reserve + st.learners + 1;
    const std::size_t first_eval = st.minimal_length();

    for (std::size_t s = first_fit; s <= T; ++s) {
        const auto& slice = panel.slice(s - 1);

        if (s > first_fit) {
            StreamPredictions base(K, A);
            for (std::size_t k = 0; k < K; ++k) {
                const auto v = fitted[k]->predict(slice);
                std::copy(v.begin(), v.end(), base.row(k).begin());
            }

            if (s > first_algorithm) {
                const auto algo = apply_combiners(combiners, base, slice, bound);

                if (s >= first_eval) {
                    ForecastRow row;
                    row.time = slice.time();
                    auto& L = report.ledger;
                    auto& N = report.net_ledger;
                    const std::size_t t = L.updates();
                    row.ledger_updates = t;
                    row.discrete_selection = L.select();
                    const std::size_t net_sel = N.select();
                    row.continuous_weights = report.net[net_sel];
                    if (t > 0) {
                        double best = std::numeric_limits<double>::infinity();
                        for (std::size_t j = 0; j < J; ++j) {
                            row.empirical_risk.push_back(L.empirical_risk(j));
                            row.penalized_risk.push_back(L.penalized_risk(j));
                            if (row.empirical_risk.back() < best) {
                                best = row.empirical_risk.back();
                                row.unpenalized_selection = j;
                            }
                        }
                        row.discrete_criterion = L.penalized_risk(row.discrete_selection);
                        row.continuous_criterion = N.penalized_risk(net_sel);
                        row.discrete_in_net_criterion = N.penalized_risk(vertex_pos[row.discrete_selection]);
                    }
                    const auto d = algo.row(row.discrete_selection);
                    row.discrete_predictions.assign(d.begin(), d.end());
                    row.continuous_predictions = algo.combine(row.continuous_weights);
                    for (double v : row.discrete_predictions)
                        row.discrete_total += v;
                    for (double v : row.continuous_predictions)
                        row.continuous_total += v;
                    row.actual_total = slice.total_cost();
                    for (std::size_t j = 0; j < J; ++j)
                        row.algorithm_totals.push_back(algo.total(j));
                    for (std::size_t k = 0; k < K; ++k)
                        row.learner_totals.push_back(base.total(k));
                    if (report.probe && t > 0) {
                        for (std::size_t j = 0; j < J; ++j)
                            row.true_risk.push_back(report.probe->true_risk(j, t));
                        row.gap = report.probe->excess_gap(row.discrete_selection, t, config.gap_eps);
                    }
                    if (options.keep_predictors) {
                        std::vector<learners::PredictorPtr> preds;
                        for (std::size_t j = 0; j < J; ++j)
                            preds.push_back(std::make_shared<ComposedPredictor>(fitted, combiners[j], bound));
                        report.algorithm_predictors.push_back(std::move(preds));
                    }
                    report.rows.push_back(std::move(row));
                }

                report.ledger.update(algo, slice);
                report.net_ledger.update(algo.over_net(report.net), slice);
                if (report.probe)
                    report.probe->update(algo, slice);
            }

            for (auto& a : algorithms)
                a->observe(base, slice);
        }

        if (s < T) {
            const Panel history = history_prefix(panel, slice.time());
            parallel_for(K, config.workers, [&](std::size_t k) { fitted[k] = zoo[k].fit(history); });
        }
        if (s >= first_algorithm)
            for (std::size_t j = 0; j < J; ++j)
                combiners[j] = algorithms[j]->snapshot();
    }

    report.final_selection = report.ledger.select();
    if (report.probe && report.probe->updates() > 0)
        report.final_gap = report.probe->excess_gap(report.final_selection, report.probe->updates(), config.gap_eps);
    return report;
}

}  // namespace osassl
