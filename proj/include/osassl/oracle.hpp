#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "osassl/core.hpp"
#include "osassl/ledger.hpp"

namespace osassl {

/// Known data-generating law of a synthetic panel.
struct GroundTruth {
    /// theta*(x, z); zero for non-declared observations.
    std::function<double(const Observation&)> theta;
    /// Var(Y | X = x, Z = z); zero for non-declared observations.
    std::function<double(const Observation&)> noise_variance;
    DependencyGraph graph;
    double cost_bound = 1.0;
};

using GroundTruthPtr = std::shared_ptr<const GroundTruth>;

struct ExcessGap {
    double selected_excess = 0.0;  // true risk of the selected stream minus the risk of theta*
    double oracle_excess = 0.0;    // same for the oracle stream
    double gap = 0.0;              // selected_excess - (1 + eps) * oracle_excess
    std::size_t oracle_index = 0;
};

/// Conditional cumulative risks of J streams against a known truth,
/// accumulated alongside a RiskLedger over the same slices.
class OracleProbe {
public:
    OracleProbe(GroundTruthPtr truth, std::size_t streams, std::size_t cities)
        : truth_(std::move(truth)), streams_(streams), cities_(cities) {
        if (!truth_ || !truth_->theta || !truth_->noise_variance)
            throw Error("oracle probe requires synthetic truth");
        bias_.assign(streams_, 0.0);
    }

    void update(const StreamPredictions& predictions, const PanelSlice& slice) {
        if (predictions.streams() != streams_ || predictions.cities() != cities_ || slice.size() != cities_)
            throw Error("oracle probe: prediction shape mismatch");
        std::vector<double> theta(cities_);
        for (std::size_t a = 0; a < cities_; ++a) {
            theta[a] = truth_->theta(slice[a]);
            noise_ += truth_->noise_variance(slice[a]);
        }
        for (std::size_t j = 0; j < streams_; ++j) {
            const auto row = predictions.row(j);
            double s = bias_[j];
            for (std::size_t a = 0; a < cities_; ++a)
                s += (row[a] - theta[a]) * (row[a] - theta[a]);
            bias_[j] = s;
        }
        bias_trace_.insert(bias_trace_.end(), bias_.begin(), bias_.end());
        noise_trace_.push_back(noise_);
    }

    std::size_t updates() const { return noise_trace_.size(); }
    std::size_t streams() const { return streams_; }

    /// R~_{j,t}: average squared distance to theta* plus average noise variance.
    double true_risk(std::size_t j, std::size_t t) const {
        check(j, t);
        return (bias_trace_[(t - 1) * streams_ + j] + noise_trace_[t - 1]) / denom(t);
    }

    /// R~_t(theta*): the average conditional noise variance.
    double optimal_risk(std::size_t t) const {
        check(0, t);
        return noise_trace_[t - 1] / denom(t);
    }

    /// R~_{j,t} - R~_t(theta*): the average squared distance to theta*.
    double excess(std::size_t j, std::size_t t) const {
        check(j, t);
        return bias_trace_[(t - 1) * streams_ + j] / denom(t);
    }

    std::size_t oracle_select(std::size_t t) const {
        check(0, t);
        std::size_t best = 0;
        for (std::size_t j = 1; j < streams_; ++j)
            if (true_risk(j, t) < true_risk(best, t))
                best = j;
        return best;
    }

    ExcessGap excess_gap(std::size_t selected, std::size_t t, double eps) const {
        check(selected, t);
        ExcessGap g;
        g.oracle_index = oracle_select(t);
        g.selected_excess = excess(selected, t);
        g.oracle_excess = excess(g.oracle_index, t);
        g.gap = g.selected_excess - (1.0 + eps) * g.oracle_excess;
        return g;
    }

private:
    double denom(std::size_t t) const { return static_cast<double>(t) * static_cast<double>(cities_); }

    void check(std::size_t j, std::size_t t) const {
        if (j >= streams_)
            throw Error("oracle probe: stream index out of range");
        if (t == 0 || t > updates())
            throw Error("oracle probe: time outside the probe's range");
    }

    GroundTruthPtr truth_;
    std::size_t streams_;
    std::size_t cities_;
    std::vector<double> bias_;
    double noise_ = 0.0;
    std::vector<double> bias_trace_;
    std::vector<double> noise_trace_;
};

}  // namespace osassl
