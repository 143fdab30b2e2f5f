#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "osassl/core.hpp"
#include "osassl/learners.hpp"
#include "osassl/ledger.hpp"

namespace osassl {

using json = nlohmann::json;

// ============================================================================
// Combiners: immutable maps from base-learner predictions to one prediction
// ============================================================================

class Combiner {
public:
    virtual ~Combiner() = default;
    virtual double combine(std::span<const double> base) const = 0;
    virtual json describe() const = 0;
};

using CombinerPtr = std::shared_ptr<const Combiner>;

class SelectCombiner final : public Combiner {
public:
    explicit SelectCombiner(std::size_t k) : k_(k) {}
    double combine(std::span<const double> base) const override { return base[k_]; }
    json describe() const override { return {{"select", k_}}; }
    std::size_t index() const { return k_; }

private:
    std::size_t k_;
};

class WeightsCombiner final : public Combiner {
public:
    explicit WeightsCombiner(SimplexWeights pi) : pi_(std::move(pi)) {}
    double combine(std::span<const double> base) const override {
        double v = 0.0;
        for (std::size_t k = 0; k < pi_.size(); ++k)
            if (pi_[k] != 0.0)
                v += pi_[k] * base[k];
        return v;
    }
    json describe() const override { return {{"weights", pi_.values()}}; }
    const SimplexWeights& weights() const { return pi_; }

private:
    SimplexWeights pi_;
};

class PointwiseCombiner final : public Combiner {
public:
    explicit PointwiseCombiner(learners::Combination how) : how_(how) {}
    double combine(std::span<const double> base) const override {
        return learners::combine_values(how_, std::vector<double>(base.begin(), base.end()));
    }
    json describe() const override {
        return {{"pointwise", how_ == learners::Combination::average ? "average" : "median"}};
    }

private:
    learners::Combination how_;
};

class RidgeCombiner final : public Combiner {
public:
    explicit RidgeCombiner(learners::RidgeModel model) : model_(std::move(model)) {}
    double combine(std::span<const double> base) const override {
        Eigen::RowVectorXd row(static_cast<Eigen::Index>(base.size()));
        for (std::size_t k = 0; k < base.size(); ++k)
            row[static_cast<Eigen::Index>(k)] = base[k];
        return model_.predict(row);
    }
    json describe() const override {
        std::vector<double> coef(model_.coef.data(), model_.coef.data() + model_.coef.size());
        return {{"ridge_intercept", model_.intercept}, {"ridge_coef_standardized", coef}};
    }

private:
    learners::RidgeModel model_;
};

/// Masked, clamped prediction of a combiner at one observation.
inline double combined_prediction(const Combiner& c, std::span<const double> base, const Observation& o, double bound) {
    if (!o.declared())
        return 0.0;
    const double v = c.combine(base);
    if (std::isnan(v))
        return 0.0;
    return std::clamp(v, 0.0, bound);
}

/// theta_{j,t} as a Predictor: the combiner applied to fitted base learners.
class ComposedPredictor final : public learners::Predictor {
public:
    ComposedPredictor(std::vector<learners::PredictorPtr> base, CombinerPtr combiner, double bound)
        : Predictor(bound), base_(std::move(base)), combiner_(std::move(combiner)) {}

protected:
    double raw(const Observation& o) const override {
        std::vector<double> b;
        b.reserve(base_.size());
        for (const auto& p : base_)
            b.push_back(p->predict(o));
        return combiner_->combine(b);
    }

private:
    std::vector<learners::PredictorPtr> base_;
    CombinerPtr combiner_;
};

/// Applies each stream's combiner to the base predictions of a slice.
inline StreamPredictions apply_combiners(const std::vector<CombinerPtr>& combiners, const StreamPredictions& base,
                                         const PanelSlice& slice, double bound) {
    StreamPredictions out(combiners.size(), base.cities());
    for (std::size_t a = 0; a < base.cities(); ++a) {
        const auto col = base.column(a);
        for (std::size_t j = 0; j < combiners.size(); ++j)
            out.at(j, a) = combined_prediction(*combiners[j], col, slice[a], bound);
    }
    return out;
}

// ============================================================================
// Sequential algorithms over the base-learner zoo
// ============================================================================

struct AlgorithmSpec {
    std::string name;
    std::string kind;  // discrete | continuous | average | median | stack_ridge | single
    json params = json::object();
};

inline AlgorithmSpec algorithm_spec_from_json(const json& j) {
    AlgorithmSpec s;
    s.kind = j.at("kind").get<std::string>();
    s.name = j.value("name", s.kind);
    if (j.contains("params"))
        s.params = j.at("params");
    return s;
}

inline json algorithm_spec_to_json(const AlgorithmSpec& s) {
    return {{"name", s.name}, {"kind", s.kind}, {"params", s.params}};
}

/// An algorithm theta_j. It observes the base learners' one-step-ahead
/// predictions on each new slice and, at any time, exposes its current
/// combination rule.
class SequentialAlgorithm {
public:
    virtual ~SequentialAlgorithm() = default;
    /// base(k, a) = l_{k,t-1}(X_{a,t}) for the slice at time t.
    virtual void observe(const StreamPredictions& base, const PanelSlice& slice) = 0;
    virtual CombinerPtr snapshot() const = 0;
};

class DiscreteOverLearners final : public SequentialAlgorithm {
public:
    DiscreteOverLearners(std::size_t learners, std::size_t cities, PenaltyConfig pen)
        : ledger_(learners, cities, pen) {}
    void observe(const StreamPredictions& base, const PanelSlice& slice) override { ledger_.update(base, slice); }
    CombinerPtr snapshot() const override { return std::make_shared<SelectCombiner>(ledger_.select()); }
    const RiskLedger& ledger() const { return ledger_; }

private:
    RiskLedger ledger_;
};

class NetOverLearners final : public SequentialAlgorithm {
public:
    NetOverLearners(std::size_t learners, std::size_t cities, double eps, PenaltyConfig pen)
        : net_(epsilon_net(learners, eps)), ledger_(net_.size(), cities, pen) {}
    void observe(const StreamPredictions& base, const PanelSlice& slice) override {
        ledger_.update(base.over_net(net_), slice);
    }
    CombinerPtr snapshot() const override { return std::make_shared<WeightsCombiner>(net_[ledger_.select()]); }

private:
    std::vector<SimplexWeights> net_;
    RiskLedger ledger_;
};

class FixedCombination final : public SequentialAlgorithm {
public:
    explicit FixedCombination(CombinerPtr c) : c_(std::move(c)) {}
    void observe(const StreamPredictions&, const PanelSlice&) override {}
    CombinerPtr snapshot() const override { return c_; }

private:
    CombinerPtr c_;
};

/// Ridge regression of declared costs on the base learners' one-step-ahead
/// predictions accumulated so far.
class RidgeStacking final : public SequentialAlgorithm {
public:
    RidgeStacking(std::size_t learners, double lambda) : learners_(learners), lambda_(lambda) {}

    void observe(const StreamPredictions& base, const PanelSlice& slice) override {
        for (std::size_t a = 0; a < base.cities(); ++a) {
            if (!slice[a].declared())
                continue;
            for (std::size_t k = 0; k < learners_; ++k)
                rows_.push_back(base.at(k, a));
            y_.push_back(slice[a].y());
        }
    }

    CombinerPtr snapshot() const override {
        if (y_.empty())
            return std::make_shared<PointwiseCombiner>(learners::Combination::average);
        const auto n = static_cast<Eigen::Index>(y_.size());
        const auto k = static_cast<Eigen::Index>(learners_);
        Eigen::MatrixXd X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            rows_.data(), n, k);
        const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(y_.data(), n);
        return std::make_shared<RidgeCombiner>(learners::fit_ridge(X, y, lambda_));
    }

private:
    std::size_t learners_;
    double lambda_;
    std::vector<double> rows_;
    std::vector<double> y_;
};

namespace detail {

inline PenaltyConfig penalty_from(const json& p, double default_lambda) {
    PenaltyConfig c;
    c.lambda = p.value("lambda", default_lambda);
    const auto v = p.value("penalty_variant", std::string("literal"));
    if (v == "literal")
        c.variant = PenaltyVariant::literal;
    else if (v == "per_stream")
        c.variant = PenaltyVariant::per_stream;
    else
        throw Error("unknown penalty variant '" + v + "'");
    return c;
}

}  // namespace detail

/// Builds theta_j over a zoo whose learner names are `learner_names`.
inline std::unique_ptr<SequentialAlgorithm> make_algorithm(const AlgorithmSpec& spec,
                                                           const std::vector<std::string>& learner_names,
                                                           std::size_t cities) {
    const auto K = learner_names.size();
    if (K == 0)
        throw Error("algorithm '" + spec.name + "': empty learner zoo");
    const auto& k = spec.kind;
    const auto& p = spec.params;
    if (!p.is_object())
        throw Error("algorithm '" + spec.name + "': params must be an object");
    if (k == "discrete")
        return std::make_unique<DiscreteOverLearners>(K, cities, detail::penalty_from(p, 0.0));
    if (k == "continuous")
        return std::make_unique<NetOverLearners>(K, cities, p.value("eps", 0.25), detail::penalty_from(p, 0.0));
    if (k == "average")
        return std::make_unique<FixedCombination>(std::make_shared<PointwiseCombiner>(learners::Combination::average));
    if (k == "median")
        return std::make_unique<FixedCombination>(std::make_shared<PointwiseCombiner>(learners::Combination::median));
    if (k == "stack_ridge") {
        const double lambda = p.value("lambda", 1.0);
        if (!(lambda >= 0.0))
            throw Error("algorithm '" + spec.name + "': lambda must be >= 0");
        return std::make_unique<RidgeStacking>(K, lambda);
    }
    if (k == "single") {
        const auto target = p.at("learner").get<std::string>();
        for (std::size_t i = 0; i < K; ++i)
            if (learner_names[i] == target)
                return std::make_unique<FixedCombination>(std::make_shared<SelectCombiner>(i));
        throw Error("algorithm '" + spec.name + "': unknown learner '" + target + "'");
    }
    throw Error("algorithm '" + spec.name + "': unknown kind '" + k + "'");
}

inline std::vector<AlgorithmSpec> default_algorithms() {
    return {{"discrete_sl", "discrete", json::object()},
            {"continuous_sl", "continuous", json{{"eps", 0.25}}},
            {"average", "average", json::object()},
            {"median", "median", json::object()},
            {"stack_ridge", "stack_ridge", json{{"lambda", 1.0}}}};
}

}  // namespace osassl
