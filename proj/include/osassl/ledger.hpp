#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "osassl/core.hpp"

namespace osassl {

// ============================================================================
// Simplex weights and the epsilon-net
// ============================================================================

/// Convex-combination weights over J streams.
class SimplexWeights {
public:
    SimplexWeights() = default;

    explicit SimplexWeights(std::vector<double> pi) : pi_(std::move(pi)) {
        if (pi_.empty())
            throw Error("simplex weights: empty vector");
        double s = 0.0;
        for (double p : pi_) {
            if (!(p >= 0.0))
                throw Error("simplex weights: negative entry");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-12)
            throw Error("simplex weights: entries do not sum to 1");
    }

    static SimplexWeights vertex(std::size_t size, std::size_t j) {
        std::vector<double> pi(size, 0.0);
        pi.at(j) = 1.0;
        return SimplexWeights(std::move(pi));
    }

    const std::vector<double>& values() const { return pi_; }
    std::size_t size() const { return pi_.size(); }
    double operator[](std::size_t j) const { return pi_[j]; }

    /// Index of the vertex this point equals, or size() if interior.
    std::size_t vertex_index() const {
        for (std::size_t j = 0; j < pi_.size(); ++j)
            if (pi_[j] == 1.0)
                return j;
        return pi_.size();
    }

    friend bool operator==(const SimplexWeights&, const SimplexWeights&) = default;

private:
    std::vector<double> pi_;
};

/// Number of grid steps, ceil(1/eps), guarded against representation error.
inline std::size_t net_steps(double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps))
        throw Error("epsilon_net: eps must be positive");
    if (eps > 1.0)
        throw Error("epsilon_net: eps must lie in (0, 1]");
    return static_cast<std::size_t>(std::ceil(1.0 / eps - 1e-9));
}

/// C(n, k) as a double-checked integer.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n)
        return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i)
        r = r * (n - k + i) / i;
    return r;
}

/// All points of the simplex whose entries are multiples of 1/m, m = ceil(1/eps).
/// Enumerated in reverse lexicographic order of the integer compositions, so
/// vertex e_1 comes first and e_J last.
inline std::vector<SimplexWeights> epsilon_net(std::size_t J, double eps) {
    if (J < 1)
        throw Error("epsilon_net: J must be >= 1");
    const std::size_t m = net_steps(eps);
    std::vector<SimplexWeights> net;
    net.reserve(static_cast<std::size_t>(binomial(m + J - 1, J - 1)));
    std::vector<std::size_t> parts(J, 0);
    const double dm = static_cast<double>(m);
    // recursive fill of parts[j..] with `left` units
    auto rec = [&](auto&& self, std::size_t j, std::size_t left) -> void {
        if (j + 1 == J) {
            parts[j] = left;
            std::vector<double> pi(J);
            for (std::size_t i = 0; i < J; ++i)
                pi[i] = static_cast<double>(parts[i]) / dm;
            net.emplace_back(std::move(pi));
            return;
        }
        for (std::size_t u = left + 1; u-- > 0;) {
            parts[j] = u;
            self(self, j + 1, left - u);
        }
    };
    rec(rec, 0, m);
    return net;
}

// ============================================================================
// Per-stream predictions on one slice
// ============================================================================

/// Predictions of several streams (algorithms or net points) for every city
/// of one slice; row-major, one row per stream.
class StreamPredictions {
public:
    StreamPredictions() = default;
    StreamPredictions(std::size_t streams, std::size_t cities)
        : streams_(streams), cities_(cities), values_(streams * cities, 0.0) {}

    std::size_t streams() const { return streams_; }
    std::size_t cities() const { return cities_; }

    std::span<double> row(std::size_t j) { return {values_.data() + j * cities_, cities_}; }
    std::span<const double> row(std::size_t j) const { return {values_.data() + j * cities_, cities_}; }
    double& at(std::size_t j, std::size_t a) { return values_[j * cities_ + a]; }
    double at(std::size_t j, std::size_t a) const { return values_[j * cities_ + a]; }

    /// Predictions of city a across streams.
    std::vector<double> column(std::size_t a) const {
        std::vector<double> out(streams_);
        for (std::size_t j = 0; j < streams_; ++j)
            out[j] = at(j, a);
        return out;
    }

    double total(std::size_t j) const {
        double s = 0.0;
        for (double v : row(j))
            s += v;
        return s;
    }

    /// Predictions of the convex combination pi of the streams.
    std::vector<double> combine(const SimplexWeights& pi) const {
        if (pi.size() != streams_)
            throw Error("stream predictions: weight arity mismatch");
        std::vector<double> out(cities_, 0.0);
        for (std::size_t j = 0; j < streams_; ++j) {
            const double w = pi[j];
            if (w == 0.0)
                continue;
            const auto r = row(j);
            for (std::size_t a = 0; a < cities_; ++a)
                out[a] += w * r[a];
        }
        return out;
    }

    /// Streams of every net point, combining this object's streams.
    StreamPredictions over_net(const std::vector<SimplexWeights>& net) const {
        StreamPredictions out(net.size(), cities_);
        for (std::size_t p = 0; p < net.size(); ++p) {
            const auto v = combine(net[p]);
            std::copy(v.begin(), v.end(), out.row(p).begin());
        }
        return out;
    }

private:
    std::size_t streams_ = 0;
    std::size_t cities_ = 0;
    std::vector<double> values_;
};

// ============================================================================
// Risk ledger
// ============================================================================

/// `literal`: the overall-cost penalty uses the totals predicted by the
/// ledger's own past selections (identical for every stream).
/// `per_stream`: each stream is penalized with its own predicted totals.
enum class PenaltyVariant { literal, per_stream };

struct PenaltyConfig {
    double lambda = 0.05;
    PenaltyVariant variant = PenaltyVariant::literal;
};

/// Cumulative one-step-ahead squared residuals of J streams, plus the
/// per-time overall-cost terms of the penalized criterion.
class RiskLedger {
public:
    RiskLedger() = default;

    RiskLedger(std::size_t streams, std::size_t cities, PenaltyConfig penalty = {})
        : streams_(streams), cities_(cities), penalty_(penalty) {
        if (streams == 0)
            throw Error("ledger: at least one stream required");
        if (cities == 0)
            throw Error("ledger: empty city set");
        if (!(penalty.lambda >= 0.0) || !std::isfinite(penalty.lambda))
            throw Error("ledger: penalty coefficient must be finite and >= 0");
        sse_.assign(streams, 0.0);
        total_sq_.assign(streams, 0.0);
    }

    std::size_t streams() const { return streams_; }
    std::size_t cities() const { return cities_; }
    const PenaltyConfig& penalty_config() const { return penalty_; }

    /// Number of completed updates t.
    std::size_t updates() const { return times_.size(); }
    std::size_t count() const { return updates() * cities_; }
    bool empty() const { return times_.empty(); }
    TimeIndex last_time() const {
        if (times_.empty())
            throw Error("ledger: no updates yet");
        return times_.back();
    }
    const std::vector<TimeIndex>& times() const { return times_; }

    /// Adds slice t, scored with predictions made from history before t.
    /// Returns the stream selected before the update (the one whose total
    /// enters the literal penalty at t).
    std::size_t update(const StreamPredictions& predictions, const PanelSlice& slice) {
        if (predictions.streams() != streams_ || predictions.cities() != cities_ || slice.size() != cities_)
            throw Error("ledger: prediction shape does not match the ledger");
        if (!times_.empty() && slice.time().value != times_.back().value + 1)
            throw Error("non-sequential update");
        const std::size_t selected = select();
        double actual = 0.0;
        for (std::size_t a = 0; a < cities_; ++a)
            actual += slice[a].y();
        for (std::size_t j = 0; j < streams_; ++j) {
            const auto row = predictions.row(j);
            double sse = sse_[j];
            double total = 0.0;
            for (std::size_t a = 0; a < cities_; ++a) {
                const double r = slice[a].y() - row[a];
                sse += r * r;
                total += row[a];
            }
            sse_[j] = sse;
            const double d = actual - total;
            total_sq_[j] += d * d;
            if (j == selected)
                meta_predicted_.push_back(total);
        }
        actual_.push_back(actual);
        meta_sq_ += (actual - meta_predicted_.back()) * (actual - meta_predicted_.back());
        selected_.push_back(selected);
        times_.push_back(slice.time());
        sse_trace_.insert(sse_trace_.end(), sse_.begin(), sse_.end());
        total_sq_trace_.insert(total_sq_trace_.end(), total_sq_.begin(), total_sq_.end());
        meta_sq_trace_.push_back(meta_sq_);
        return selected;
    }

    /// Running sum of squared residuals of stream j after `t` updates.
    double squared_error_sum(std::size_t j, std::size_t t) const {
        check(j, t);
        return sse_trace_[(t - 1) * streams_ + j];
    }

    /// Empirical average cumulative risk after t updates.
    double empirical_risk(std::size_t j, std::size_t t) const {
        return squared_error_sum(j, t) / (static_cast<double>(t) * static_cast<double>(cities_));
    }
    double empirical_risk(std::size_t j) const { return empirical_risk(j, updates()); }

    /// lambda/t times the summed squared overall-cost errors.
    double penalty(std::size_t j, std::size_t t) const {
        check(j, t);
        const double s = penalty_.variant == PenaltyVariant::literal ? meta_sq_trace_[t - 1]
                                                                     : total_sq_trace_[(t - 1) * streams_ + j];
        return penalty_.lambda * s / static_cast<double>(t);
    }

    double penalized_risk(std::size_t j, std::size_t t) const {
        if (t == 0)
            throw Error("penalized_risk: t must be >= 1");
        if (penalty_.lambda == 0.0)
            return empirical_risk(j, t);
        return empirical_risk(j, t) + penalty(j, t);
    }
    double penalized_risk(std::size_t j) const { return penalized_risk(j, updates()); }

    /// Argmin of the penalized criterion after t updates, lowest index on
    /// ties. An empty ledger selects stream 0. The literal penalty is the
    /// same for every stream, so it is compared without it: adding it in
    /// floating point could merge near-tied risks.
    std::size_t select(std::size_t t) const {
        if (t == 0)
            return 0;
        const bool shared = penalty_.variant == PenaltyVariant::literal;
        auto key = [&](std::size_t j) { return shared ? empirical_risk(j, t) : penalized_risk(j, t); };
        std::size_t best = 0;
        double best_v = key(0);
        for (std::size_t j = 1; j < streams_; ++j) {
            const double v = key(j);
            if (v < best_v) {
                best_v = v;
                best = j;
            }
        }
        return best;
    }
    std::size_t select() const { return select(updates()); }

    /// Selections in force when each update was scored (the meta trace).
    const std::vector<std::size_t>& selection_trace() const { return selected_; }
    const std::vector<double>& actual_totals() const { return actual_; }
    const std::vector<double>& meta_predicted_totals() const { return meta_predicted_; }

private:
    void check(std::size_t j, std::size_t t) const {
        if (j >= streams_)
            throw Error("ledger: stream index out of range");
        if (t == 0 || t > updates())
            throw Error("ledger: time " + std::to_string(t) + " outside the ledger's 1.." +
                        std::to_string(updates()));
    }

    std::size_t streams_ = 0;
    std::size_t cities_ = 0;
    PenaltyConfig penalty_;
    std::vector<double> sse_;
    std::vector<double> total_sq_;
    double meta_sq_ = 0.0;
    std::vector<TimeIndex> times_;
    std::vector<std::size_t> selected_;
    std::vector<double> actual_;
    std::vector<double> meta_predicted_;
    std::vector<double> sse_trace_;
    std::vector<double> total_sq_trace_;
    std::vector<double> meta_sq_trace_;
};

/// Discrete selection: argmin over streams of the penalized criterion.
inline std::size_t select_discrete(const RiskLedger& ledger, std::size_t t) { return ledger.select(t); }

/// Continuous selection over a ledger whose streams are the net points.
inline SimplexWeights select_continuous(const RiskLedger& ledger, const std::vector<SimplexWeights>& net,
                                        std::size_t t) {
    if (net.empty())
        throw Error("select_continuous: empty net");
    if (net.size() != ledger.streams())
        throw Error("select_continuous: ledger does not track the net");
    return net[ledger.select(t)];
}

}  // namespace osassl
