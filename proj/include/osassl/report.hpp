#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "osassl/importance.hpp"
#include "osassl/io.hpp"
#include "osassl/schedule.hpp"

namespace osassl::report {

using json = nlohmann::json;
using io::fmt;

inline std::string join_weights(const SimplexWeights& w) {
    std::string s;
    for (std::size_t j = 0; j < w.size(); ++j) {
        if (j)
            s += ';';
        s += fmt(w[j]);
    }
    return s;
}

inline std::string maybe(double v) { return std::isfinite(v) ? fmt(v) : ""; }

/// One row per evaluation year.
inline std::string forecast_csv(const ForecastReport& r) {
    std::vector<std::string> header{"year",         "selected_index",    "selected_algorithm", "weights",
                                    "total_actual", "total_predicted",   "ratio",              "continuous_total",
                                    "continuous_ratio"};
    for (const auto& n : r.algorithm_names)
        header.push_back("R_hat_" + n);
    io::CsvWriter w(header);
    for (const auto& row : r.rows) {
        std::vector<std::string> f{std::to_string(row.time.value),
                                   std::to_string(row.discrete_selection + 1),
                                   r.algorithm_names[row.discrete_selection],
                                   join_weights(row.continuous_weights),
                                   fmt(row.actual_total),
                                   fmt(row.discrete_total),
                                   maybe(row.ratio()),
                                   fmt(row.continuous_total),
                                   maybe(row.continuous_total / row.actual_total)};
        for (std::size_t j = 0; j < r.algorithm_names.size(); ++j)
            f.push_back(row.empirical_risk.empty() ? "" : fmt(row.empirical_risk[j]));
        w.row(f);
    }
    return w.str();
}

inline json forecast_json(const ForecastReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows) {
        json jr{{"year", row.time.value},
                {"ledger_updates", row.ledger_updates},
                {"selected_index", row.discrete_selection + 1},
                {"selected_algorithm", r.algorithm_names[row.discrete_selection]},
                {"continuous_weights", row.continuous_weights.values()},
                {"empirical_risk", row.empirical_risk},
                {"penalized_risk", row.penalized_risk},
                {"total_actual", row.actual_total},
                {"total_predicted", row.discrete_total},
                {"continuous_total", row.continuous_total},
                {"algorithm_totals", row.algorithm_totals},
                {"learner_totals", row.learner_totals},
                {"predictions", row.discrete_predictions},
                {"continuous_predictions", row.continuous_predictions}};
        if (!std::isnan(row.discrete_criterion)) {
            jr["discrete_criterion"] = row.discrete_criterion;
            jr["continuous_criterion"] = row.continuous_criterion;
        }
        if (row.gap) {
            jr["true_risk"] = row.true_risk;
            jr["oracle_index"] = row.gap->oracle_index + 1;
            jr["excess_gap"] = row.gap->gap;
        }
        rows.push_back(std::move(jr));
    }
    std::vector<std::int64_t> cities;
    for (const auto& c : r.cities)
        cities.push_back(c.value);
    json out{{"learners", r.learner_names},
             {"algorithms", r.algorithm_names},
             {"cities", cities},
             {"net_size", r.net.size()},
             {"final_selection", r.final_selection + 1},
             {"rows", std::move(rows)}};
    if (r.final_gap)
        out["final_excess_gap"] = {{"selected_excess", r.final_gap->selected_excess},
                                   {"oracle_excess", r.final_gap->oracle_excess},
                                   {"oracle_index", r.final_gap->oracle_index + 1},
                                   {"gap", r.final_gap->gap}};
    return out;
}

/// Long-format risk traces: every algorithm at every evaluation year.
inline std::string risk_traces_csv(const ForecastReport& r) {
    io::CsvWriter w({"year", "algorithm", "empirical_risk", "penalized_risk", "true_risk"});
    for (const auto& row : r.rows) {
        if (row.empirical_risk.empty())
            continue;
        for (std::size_t j = 0; j < r.algorithm_names.size(); ++j)
            w.row({std::to_string(row.time.value), r.algorithm_names[j], fmt(row.empirical_risk[j]),
                   fmt(row.penalized_risk[j]), row.true_risk.empty() ? "" : fmt(row.true_risk[j])});
    }
    return w.str();
}

/// Continuous overarching weights per year.
inline std::string weights_csv(const ForecastReport& r) {
    io::CsvWriter w({"year", "algorithm", "weight"});
    for (const auto& row : r.rows)
        for (std::size_t j = 0; j < r.algorithm_names.size(); ++j)
            w.row({std::to_string(row.time.value), r.algorithm_names[j], fmt(row.continuous_weights[j])});
    return w.str();
}

/// Predicted vs actual totals per series.
inline std::string predictions_csv(const ForecastReport& r) {
    io::CsvWriter w({"year", "series", "kind", "total"});
    for (const auto& row : r.rows) {
        const auto y = std::to_string(row.time.value);
        w.row({y, "actual", "actual", fmt(row.actual_total)});
        w.row({y, "discrete_overarching", "overarching", fmt(row.discrete_total)});
        w.row({y, "continuous_overarching", "overarching", fmt(row.continuous_total)});
        for (std::size_t j = 0; j < r.algorithm_names.size(); ++j)
            w.row({y, r.algorithm_names[j], "algorithm", fmt(row.algorithm_totals[j])});
        for (std::size_t k = 0; k < r.learner_names.size(); ++k)
            w.row({y, r.learner_names[k], "base_learner", fmt(row.learner_totals[k])});
    }
    return w.str();
}

/// Residuals (actual - predicted) of declared cities, grouped by decile of
/// the discrete overarching prediction.
inline std::string residual_deciles_csv(const ForecastReport& r, const Panel& panel) {
    std::vector<std::pair<double, double>> pr;  // prediction, residual
    for (const auto& row : r.rows) {
        const auto& slice = panel.at(row.time);
        for (std::size_t a = 0; a < slice.size(); ++a)
            if (slice[a].declared())
                pr.emplace_back(row.discrete_predictions[a], slice[a].y() - row.discrete_predictions[a]);
    }
    io::CsvWriter w({"decile", "count", "prediction_min", "prediction_max", "residual_mean", "residual_sd",
                     "residual_q10", "residual_q25", "residual_median", "residual_q75", "residual_q90"});
    if (pr.empty())
        return w.str();
    std::stable_sort(pr.begin(), pr.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    const std::size_t n = pr.size();
    for (std::size_t d = 0; d < 10; ++d) {
        const std::size_t lo = n * d / 10;
        const std::size_t hi = n * (d + 1) / 10;
        if (hi <= lo)
            continue;
        std::vector<double> res;
        double sum = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            res.push_back(pr[i].second);
            sum += pr[i].second;
        }
        const double mean = sum / static_cast<double>(res.size());
        double ss = 0.0;
        for (double v : res)
            ss += (v - mean) * (v - mean);
        std::sort(res.begin(), res.end());
        auto q = [&](double p) { return detail::sorted_quantile(res, p); };
        w.row({std::to_string(d + 1), std::to_string(res.size()), fmt(pr[lo].first), fmt(pr[hi - 1].first), fmt(mean),
               fmt(std::sqrt(ss / static_cast<double>(res.size()))), fmt(q(0.1)), fmt(q(0.25)), fmt(q(0.5)),
               fmt(q(0.75)), fmt(q(0.9))});
    }
    return w.str();
}

inline std::string oracle_csv(const ForecastReport& r) {
    io::CsvWriter w({"year", "selected_index", "oracle_index", "selected_excess", "oracle_excess", "gap"});
    for (const auto& row : r.rows)
        if (row.gap)
            w.row({std::to_string(row.time.value), std::to_string(row.discrete_selection + 1),
                   std::to_string(row.gap->oracle_index + 1), fmt(row.gap->selected_excess),
                   fmt(row.gap->oracle_excess), fmt(row.gap->gap)});
    return w.str();
}

inline std::string importance_csv(const std::vector<importance::ImportanceScore>& scores) {
    io::CsvWriter w({"covariate", "group", "kind", "rho", "p_value", "perm_max"});
    for (const auto& s : scores)
        w.row({s.covariate, s.group, s.kind == importance::MeasureKind::spearman ? "spearman" : "correlation_ratio",
               fmt(s.rho), fmt(s.p_value), fmt(s.max_permuted)});
    return w.str();
}

inline std::string group_csv(const std::vector<importance::GroupSummary>& groups) {
    io::CsvWriter w({"group", "members", "max_rho", "mean_rho", "significant_members", "all_significant"});
    for (const auto& g : groups)
        w.row({g.group, std::to_string(g.members), fmt(g.max_rho), fmt(g.mean_rho), std::to_string(g.significant),
               g.all_significant ? "1" : "0"});
    return w.str();
}

}  // namespace osassl::report
