#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "osassl/core.hpp"

namespace osassl::learners {

using json = nlohmann::json;

// ============================================================================
// Predictors
// ============================================================================

/// A fitted regression function. Predictions are zero for non-declared
/// cities and clamped to [0, B].
class Predictor {
public:
    explicit Predictor(double bound, bool degenerate = false) : bound_(bound), degenerate_(degenerate) {}
    virtual ~Predictor() = default;

    double predict(const Observation& obs) const {
        if (!obs.declared())
            return 0.0;
        const double v = raw(obs);
        if (std::isnan(v))
            return 0.0;
        return std::clamp(v, 0.0, bound_);
    }

    std::vector<double> predict(const PanelSlice& slice) const {
        std::vector<double> out;
        out.reserve(slice.size());
        for (const auto& o : slice.observations())
            out.push_back(predict(o));
        return out;
    }

    double bound() const { return bound_; }

    /// True when fitting fell back to the constant-zero model.
    bool degenerate() const { return degenerate_; }

protected:
    virtual double raw(const Observation& obs) const = 0;

private:
    double bound_;
    bool degenerate_;
};

using PredictorPtr = std::shared_ptr<const Predictor>;

class ConstantPredictor final : public Predictor {
public:
    ConstantPredictor(double value, double bound, bool degenerate = false)
        : Predictor(bound, degenerate), value_(value) {}

    double value() const { return value_; }

protected:
    double raw(const Observation&) const override { return value_; }

private:
    double value_;
};

inline PredictorPtr zero_predictor(double bound) {
    return std::make_shared<ConstantPredictor>(0.0, bound, true);
}

// ============================================================================
// Design encoding
// ============================================================================

/// Maps an observation to numeric columns: continuous x as-is, categorical x
/// one-hot with the first level as reference, then the SWI features.
class Design {
public:
    struct Column {
        bool from_z = false;
        std::size_t index = 0;  // into x or z
        int level = -1;         // one-hot level, -1 for raw value
        std::string name;
    };

    Design() = default;

    explicit Design(const CovariateSchema& schema, const std::optional<std::vector<std::string>>& subset = std::nullopt) {
        std::set<std::string> keep;
        if (subset) {
            for (const auto& name : *subset) {
                if (!schema.find(name))
                    throw Error("screen: covariate '" + name + "' is not in the schema");
                keep.insert(name);
            }
        }
        auto selected = [&](const std::string& n) { return !subset || keep.count(n) > 0; };
        const auto& xs = schema.x_entries();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const auto& e = schema.entries()[xs[i]];
            if (!selected(e.name))
                continue;
            if (e.kind == CovariateKind::continuous) {
                columns_.push_back({false, i, -1, e.name});
            } else {
                for (int l = 1; l < e.levels; ++l)
                    columns_.push_back({false, i, l, e.name + "=" + std::to_string(l)});
            }
        }
        const auto& zs = schema.z_entries();
        for (std::size_t i = 0; i < zs.size(); ++i) {
            const auto& e = schema.entries()[zs[i]];
            if (!selected(e.name))
                continue;
            columns_.push_back({true, i, -1, e.name});
            z_columns_.push_back(i);
        }
    }

    std::size_t width() const { return columns_.size(); }
    const std::vector<Column>& columns() const { return columns_; }
    /// Selected SWI feature positions (into z), in order.
    const std::vector<std::size_t>& z_columns() const { return z_columns_; }

    double value(const Observation& o, std::size_t c) const {
        const auto& col = columns_[c];
        const double v = col.from_z ? o.z()[col.index] : o.x()[col.index];
        return col.level < 0 ? v : (v == col.level ? 1.0 : 0.0);
    }

    void encode(const Observation& o, std::span<double> row) const {
        for (std::size_t c = 0; c < columns_.size(); ++c)
            row[c] = value(o, c);
    }

    Eigen::RowVectorXd encode(const Observation& o) const {
        Eigen::RowVectorXd r(static_cast<Eigen::Index>(width()));
        encode(o, std::span<double>(r.data(), width()));
        return r;
    }

private:
    std::vector<Column> columns_;
    std::vector<std::size_t> z_columns_;
};

/// Declared observations of a history, the training set of every learner.
inline std::vector<const Observation*> declared_observations(const Panel& history) {
    std::vector<const Observation*> out;
    for (std::size_t s = 0; s < history.num_slices(); ++s)
        for (const auto& o : history.slice(s).observations())
            if (o.declared())
                out.push_back(&o);
    return out;
}

// ============================================================================
// Ridge regression core
// ============================================================================

/// Ridge fit on standardized columns with an unpenalized intercept.
/// Zero-variance columns get a zero coefficient.
struct RidgeModel {
    double intercept = 0.0;
    Eigen::VectorXd center;
    Eigen::VectorXd scale;  // 0 marks a dropped column
    Eigen::VectorXd coef;   // on the standardized scale

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
        double v = intercept;
        for (Eigen::Index c = 0; c < coef.size(); ++c)
            if (scale[c] > 0.0)
                v += coef[c] * (row[c] - center[c]) / scale[c];
        return v;
    }
};

inline RidgeModel fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
    if (lambda < 0.0 || !std::isfinite(lambda))
        throw Error("ridge: penalty must be finite and nonnegative");
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    RidgeModel m;
    m.intercept = y.mean();
    m.center = X.colwise().mean().transpose();
    m.scale = Eigen::VectorXd::Zero(p);
    m.coef = Eigen::VectorXd::Zero(p);
    std::vector<Eigen::Index> active;
    for (Eigen::Index c = 0; c < p; ++c) {
        const double var = (X.col(c).array() - m.center[c]).square().sum() / static_cast<double>(n);
        if (var > 1e-24 * std::max(1.0, m.center[c] * m.center[c])) {
            m.scale[c] = std::sqrt(var);
            active.push_back(c);
        }
    }
    if (active.empty())
        return m;
    const auto q = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd Z(n, q);
    for (Eigen::Index k = 0; k < q; ++k) {
        const auto c = active[static_cast<std::size_t>(k)];
        Z.col(k) = (X.col(c).array() - m.center[c]) / m.scale[c];
    }
    const Eigen::VectorXd yc = y.array() - m.intercept;
    Eigen::VectorXd beta;
    if (lambda > 0.0) {
        Eigen::MatrixXd G = Z.transpose() * Z;
        G.diagonal().array() += lambda;
        beta = G.ldlt().solve(Z.transpose() * yc);
    } else {
        beta = Z.completeOrthogonalDecomposition().solve(yc);
    }
    for (Eigen::Index k = 0; k < q; ++k)
        m.coef[active[static_cast<std::size_t>(k)]] = beta[k];
    return m;
}

class LinearPredictor final : public Predictor {
public:
    LinearPredictor(Design design, RidgeModel model, double bound)
        : Predictor(bound), design_(std::move(design)), model_(std::move(model)) {}

    const RidgeModel& model() const { return model_; }

protected:
    double raw(const Observation& o) const override { return model_.predict(design_.encode(o)); }

private:
    Design design_;
    RidgeModel model_;
};

// ============================================================================
// Boosting with single-covariate linear boosters
// ============================================================================

struct LinearBooster {
    std::size_t column = 0;
    double intercept = 0.0;
    double slope = 0.0;
};

class BoostedLinearPredictor final : public Predictor {
public:
    BoostedLinearPredictor(Design design, double base, double shrinkage, std::vector<LinearBooster> boosters,
                           std::vector<double> training_risk, double bound)
        : Predictor(bound),
          design_(std::move(design)),
          base_(base),
          shrinkage_(shrinkage),
          boosters_(std::move(boosters)),
          training_risk_(std::move(training_risk)) {}

    const std::vector<LinearBooster>& boosters() const { return boosters_; }
    /// Mean squared training residual after 0, 1, ..., M rounds.
    const std::vector<double>& training_risk() const { return training_risk_; }

protected:
    double raw(const Observation& o) const override {
        double f = base_;
        for (const auto& b : boosters_)
            f += shrinkage_ * (b.intercept + b.slope * design_.value(o, b.column));
        return f;
    }

private:
    Design design_;
    double base_;
    double shrinkage_;
    std::vector<LinearBooster> boosters_;
    std::vector<double> training_risk_;
};

// ============================================================================
// k-NN under a convex combination of Kolmogorov-Smirnov distances
// ============================================================================

/// sup_x |F_a(x) - F_b(x)| for the empirical CDFs of two sorted samples.
inline double ks_distance(std::span<const double> a, std::span<const double> b) {
    const auto m = a.size();
    const auto n = b.size();
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < m && j < n) {
        const double v = std::min(a[i], b[j]);
        while (i < m && a[i] <= v)
            ++i;
        while (j < n && b[j] <= v)
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / static_cast<double>(m) -
                                 static_cast<double>(j) / static_cast<double>(n)));
    }
    return d;
}

/// SWI channels: consecutive groups of `width` selected SWI features.
struct KsChannels {
    std::vector<std::size_t> z_columns;
    std::size_t width = 1;
    std::size_t count = 0;
    std::vector<double> weights;

    /// Per-channel sorted samples, concatenated.
    std::vector<double> sorted(const Observation& o) const {
        std::vector<double> out;
        out.reserve(width * count);
        for (std::size_t c = 0; c < count; ++c) {
            const auto first = out.size();
            for (std::size_t k = 0; k < width; ++k)
                out.push_back(o.z()[z_columns[c * width + k]]);
            std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end());
        }
        return out;
    }

    double distance(std::span<const double> a, std::span<const double> b) const {
        double d = 0.0;
        for (std::size_t c = 0; c < count; ++c) {
            if (weights[c] == 0.0)
                continue;
            d += weights[c] * ks_distance(a.subspan(c * width, width), b.subspan(c * width, width));
        }
        return d;
    }
};

class KnnKsPredictor final : public Predictor {
public:
    KnnKsPredictor(KsChannels channels, std::size_t k, std::vector<double> reference, std::vector<double> costs,
                   double bound)
        : Predictor(bound),
          channels_(std::move(channels)),
          k_(k),
          reference_(std::move(reference)),
          costs_(std::move(costs)) {}

    /// Indices of the k nearest reference points (ties by reference order).
    std::vector<std::size_t> neighbors(const Observation& o) const {
        const auto q = channels_.sorted(o);
        const std::size_t stride = channels_.width * channels_.count;
        std::vector<std::pair<double, std::size_t>> d(costs_.size());
        for (std::size_t r = 0; r < costs_.size(); ++r)
            d[r] = {channels_.distance(q, std::span<const double>(reference_).subspan(r * stride, stride)), r};
        const std::size_t k = std::min(k_, d.size());
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < k; ++i)
            out.push_back(d[i].second);
        return out;
    }

protected:
    double raw(const Observation& o) const override {
        const auto nn = neighbors(o);
        double s = 0.0;
        for (auto r : nn)
            s += costs_[r];
        return s / static_cast<double>(nn.size());
    }

private:
    KsChannels channels_;
    std::size_t k_;
    std::vector<double> reference_;
    std::vector<double> costs_;
};

// ============================================================================
// Combiners
// ============================================================================

enum class Combination { average, median };

inline double combine_values(Combination how, std::vector<double> values) {
    if (values.empty())
        throw Error("combine: empty member list");
    if (how == Combination::average) {
        double s = 0.0;
        for (double v : values)
            s += v;
        return s / static_cast<double>(values.size());
    }
    // lower median for even counts
    const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
    std::nth_element(values.begin(), mid, values.end());
    return *mid;
}

class CombinedPredictor final : public Predictor {
public:
    CombinedPredictor(Combination how, std::vector<PredictorPtr> members)
        : Predictor(members.empty() ? 0.0 : members.front()->bound()), how_(how), members_(std::move(members)) {
        if (members_.empty())
            throw Error("combine: empty member list");
    }

protected:
    double raw(const Observation& o) const override {
        std::vector<double> v;
        v.reserve(members_.size());
        for (const auto& m : members_)
            v.push_back(m->predict(o));
        return combine_values(how_, std::move(v));
    }

private:
    Combination how_;
    std::vector<PredictorPtr> members_;
};

inline PredictorPtr combine_average(std::vector<PredictorPtr> predictors) {
    return std::make_shared<CombinedPredictor>(Combination::average, std::move(predictors));
}

inline PredictorPtr combine_median(std::vector<PredictorPtr> predictors) {
    return std::make_shared<CombinedPredictor>(Combination::median, std::move(predictors));
}

// ============================================================================
// Base learners
// ============================================================================

struct LearnerSpec {
    std::string name;
    std::string kind;  // mean | ridge | boosted_linear | knn_ks | average | median
    json params = json::object();
    std::optional<std::vector<std::string>> screen;
    std::vector<LearnerSpec> members;  // average / median only
};

inline LearnerSpec learner_spec_from_json(const json& j) {
    LearnerSpec s;
    s.kind = j.at("kind").get<std::string>();
    s.name = j.value("name", s.kind);
    if (j.contains("hyperparameters"))
        s.params = j.at("hyperparameters");
    else if (j.contains("params"))
        s.params = j.at("params");
    if (j.contains("screen") && !j.at("screen").is_null())
        s.screen = j.at("screen").get<std::vector<std::string>>();
    if (j.contains("members"))
        for (const auto& m : j.at("members"))
            s.members.push_back(learner_spec_from_json(m));
    return s;
}

inline json learner_spec_to_json(const LearnerSpec& s) {
    json j{{"name", s.name}, {"kind", s.kind}, {"hyperparameters", s.params}};
    if (s.screen)
        j["screen"] = *s.screen;
    if (!s.members.empty()) {
        j["members"] = json::array();
        for (const auto& m : s.members)
            j["members"].push_back(learner_spec_to_json(m));
    }
    return j;
}

/// A configured base learner. Fitting is a pure function of the history.
class BaseLearner {
public:
    explicit BaseLearner(LearnerSpec spec) : spec_(std::move(spec)) { validate(); }

    const std::string& name() const { return spec_.name; }
    const LearnerSpec& spec() const { return spec_; }

    PredictorPtr fit(const Panel& history) const {
        if (history.num_slices() == 0)
            throw Error("fit: empty history");
        const Design design(history.schema(), spec_.screen);
        const auto train = declared_observations(history);
        const double bound = history.cost_bound();
        if (train.empty())
            return zero_predictor(bound);
        const auto& k = spec_.kind;
        if (k == "mean")
            return fit_mean(train, bound);
        if (k == "ridge")
            return fit_ridge_learner(design, train, bound);
        if (k == "boosted_linear")
            return fit_boosted(design, train, bound);
        if (k == "knn_ks")
            return fit_knn(design, train, bound);
        std::vector<PredictorPtr> members;
        for (const auto& m : spec_.members)
            members.push_back(BaseLearner(with_screen(m, spec_.screen)).fit(history));
        return std::make_shared<CombinedPredictor>(k == "average" ? Combination::average : Combination::median,
                                                   std::move(members));
    }

private:
    static LearnerSpec with_screen(LearnerSpec m, const std::optional<std::vector<std::string>>& outer) {
        if (!outer)
            return m;
        if (!m.screen) {
            m.screen = outer;
        } else {
            std::vector<std::string> both;
            for (const auto& n : *m.screen)
                if (std::find(outer->begin(), outer->end(), n) != outer->end())
                    both.push_back(n);
            m.screen = std::move(both);
        }
        return m;
    }

    double num(const char* key, double fallback) const {
        if (!spec_.params.contains(key))
            return fallback;
        const auto& v = spec_.params.at(key);
        if (!v.is_number())
            throw Error("learner '" + spec_.name + "': hyperparameter '" + key + "' must be numeric");
        return v.get<double>();
    }

    void validate() {
        if (spec_.name.empty())
            spec_.name = spec_.kind;
        if (!spec_.params.is_object())
            throw Error("learner '" + spec_.name + "': hyperparameters must be an object");
        if (spec_.screen && spec_.screen->empty())
            throw Error("learner '" + spec_.name + "': empty screening subset");
        const auto& k = spec_.kind;
        if (k == "mean") {
        } else if (k == "ridge") {
            lambda_ = num("lambda", 1.0);
            if (!(lambda_ >= 0.0) || !std::isfinite(lambda_))
                throw Error("learner '" + spec_.name + "': lambda must be finite and >= 0");
        } else if (k == "boosted_linear") {
            const double r = num("rounds", 10);
            shrinkage_ = num("shrinkage", 0.1);
            if (r < 1 || r != std::floor(r))
                throw Error("learner '" + spec_.name + "': rounds must be an integer >= 1");
            rounds_ = static_cast<std::size_t>(r);
            if (!(shrinkage_ > 0.0 && shrinkage_ <= 1.0))
                throw Error("learner '" + spec_.name + "': shrinkage must lie in (0, 1]");
        } else if (k == "knn_ks") {
            const double kk = num("k", 5);
            const double w = num("channel_width", 1);
            const double c = num("channel_count", 0);
            const double cap = num("max_reference", 0);
            if (kk < 1 || kk != std::floor(kk))
                throw Error("learner '" + spec_.name + "': k must be an integer >= 1");
            if (w < 1 || w != std::floor(w))
                throw Error("learner '" + spec_.name + "': channel_width must be an integer >= 1");
            if (c < 0 || c != std::floor(c) || cap < 0 || cap != std::floor(cap))
                throw Error("learner '" + spec_.name + "': channel_count and max_reference must be integers >= 0");
            k_ = static_cast<std::size_t>(kk);
            width_ = static_cast<std::size_t>(w);
            channel_count_ = static_cast<std::size_t>(c);
            max_reference_ = static_cast<std::size_t>(cap);
            if (spec_.params.contains("weights")) {
                weights_ = spec_.params.at("weights").get<std::vector<double>>();
                double s = 0.0;
                for (double x : weights_) {
                    if (!(x >= 0.0))
                        throw Error("learner '" + spec_.name + "': channel weights must be nonnegative");
                    s += x;
                }
                if (!(s > 0.0))
                    throw Error("learner '" + spec_.name + "': channel weights must not all be zero");
                for (auto& x : weights_)
                    x /= s;
                if (channel_count_ != 0 && channel_count_ != weights_.size())
                    throw Error("learner '" + spec_.name + "': channel_count disagrees with weights");
                channel_count_ = weights_.size();
            }
        } else if (k == "average" || k == "median") {
            if (spec_.members.empty())
                throw Error("learner '" + spec_.name + "': combiner needs at least one member");
            for (const auto& m : spec_.members)
                static_cast<void>(BaseLearner{m});
        } else {
            throw Error("learner '" + spec_.name + "': unknown kind '" + k + "'");
        }
    }

    PredictorPtr fit_mean(const std::vector<const Observation*>& train, double bound) const {
        double s = 0.0;
        for (const auto* o : train)
            s += o->y();
        return std::make_shared<ConstantPredictor>(s / static_cast<double>(train.size()), bound);
    }

    static void build_matrix(const Design& design, const std::vector<const Observation*>& train, Eigen::MatrixXd& X,
                             Eigen::VectorXd& y) {
        const auto n = static_cast<Eigen::Index>(train.size());
        X.resize(n, static_cast<Eigen::Index>(design.width()));
        y.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& o = *train[static_cast<std::size_t>(i)];
            for (std::size_t c = 0; c < design.width(); ++c)
                X(i, static_cast<Eigen::Index>(c)) = design.value(o, c);
            y[i] = o.y();
        }
    }

    PredictorPtr fit_ridge_learner(const Design& design, const std::vector<const Observation*>& train,
                                   double bound) const {
        Eigen::MatrixXd X;
        Eigen::VectorXd y;
        build_matrix(design, train, X, y);
        return std::make_shared<LinearPredictor>(design, fit_ridge(X, y, lambda_), bound);
    }

    PredictorPtr fit_boosted(const Design& design, const std::vector<const Observation*>& train, double bound) const {
        Eigen::MatrixXd X;
        Eigen::VectorXd y;
        build_matrix(design, train, X, y);
        const auto n = X.rows();
        const double dn = static_cast<double>(n);
        const double base = y.mean();
        Eigen::VectorXd r = y.array() - base;
        std::vector<double> trace{r.squaredNorm() / dn};
        std::vector<LinearBooster> boosters;

        std::vector<double> mean(design.width()), sxx(design.width());
        for (std::size_t c = 0; c < design.width(); ++c) {
            const auto col = X.col(static_cast<Eigen::Index>(c));
            mean[c] = col.mean();
            sxx[c] = (col.array() - mean[c]).square().sum();
        }
        for (std::size_t m = 0; m < rounds_; ++m) {
            const double rbar = r.mean();
            const double syy = (r.array() - rbar).square().sum();
            double best_rss = std::numeric_limits<double>::infinity();
            LinearBooster best;
            bool found = false;
            for (std::size_t c = 0; c < design.width(); ++c) {
                if (!(sxx[c] > 1e-24 * std::max(1.0, mean[c] * mean[c]) * dn))
                    continue;  // constant covariate
                const auto col = X.col(static_cast<Eigen::Index>(c));
                const double sxy = ((col.array() - mean[c]) * (r.array() - rbar)).sum();
                const double slope = sxy / sxx[c];
                const double rss = std::max(0.0, syy - slope * sxy);
                if (rss < best_rss) {
                    best_rss = rss;
                    best = {c, rbar - slope * mean[c], slope};
                    found = true;
                }
            }
            if (!found)
                break;
            const auto col = X.col(static_cast<Eigen::Index>(best.column));
            r.array() -= shrinkage_ * (best.intercept + best.slope * col.array());
            boosters.push_back(best);
            trace.push_back(r.squaredNorm() / dn);
        }
        return std::make_shared<BoostedLinearPredictor>(design, base, shrinkage_, std::move(boosters), std::move(trace),
                                                        bound);
    }

    PredictorPtr fit_knn(const Design& design, std::vector<const Observation*> train, double bound) const {
        KsChannels ch;
        ch.z_columns = design.z_columns();
        ch.width = width_;
        ch.count = channel_count_ ? channel_count_ : ch.z_columns.size() / width_;
        if (ch.count == 0 || ch.count * ch.width > ch.z_columns.size())
            throw Error("learner '" + spec_.name + "': SWI features do not fill the requested channels");
        ch.weights = weights_.empty() ? std::vector<double>(ch.count, 1.0 / static_cast<double>(ch.count)) : weights_;
        if (max_reference_ && train.size() > max_reference_)
            train.erase(train.begin(), train.end() - static_cast<std::ptrdiff_t>(max_reference_));
        std::vector<double> reference;
        std::vector<double> costs;
        reference.reserve(train.size() * ch.width * ch.count);
        for (const auto* o : train) {
            const auto s = ch.sorted(*o);
            reference.insert(reference.end(), s.begin(), s.end());
            costs.push_back(o->y());
        }
        return std::make_shared<KnnKsPredictor>(std::move(ch), k_, std::move(reference), std::move(costs), bound);
    }

    LearnerSpec spec_;
    double lambda_ = 1.0;
    std::size_t rounds_ = 10;
    double shrinkage_ = 0.1;
    std::size_t k_ = 5;
    std::size_t width_ = 1;
    std::size_t channel_count_ = 0;
    std::size_t max_reference_ = 0;
    std::vector<double> weights_;
};

/// Restricts a learner to a covariate subset. The declaration indicator is
/// always retained since it is not a schema covariate.
inline BaseLearner screen(const BaseLearner& learner, std::vector<std::string> subset) {
    if (subset.empty())
        throw Error("screen: empty covariate subset");
    auto spec = learner.spec();
    if (spec.screen) {
        std::vector<std::string> both;
        for (const auto& n : subset)
            if (std::find(spec.screen->begin(), spec.screen->end(), n) != spec.screen->end())
                both.push_back(n);
        if (both.empty())
            throw Error("screen: empty covariate subset");
        subset = std::move(both);
    }
    spec.screen = std::move(subset);
    return BaseLearner(std::move(spec));
}

/// k-NN prediction under KS distances, fitted directly (no JSON spec).
inline PredictorPtr knn_ks_fit(std::size_t k, std::vector<double> weights, std::size_t channel_width,
                               const Panel& history) {
    if (k < 1)
        throw Error("knn_ks: k must be >= 1");
    LearnerSpec s{"knn_ks", "knn_ks",
                  json{{"k", k}, {"channel_width", channel_width}, {"weights", std::move(weights)}},
                  std::nullopt,
                  {}};
    return BaseLearner(std::move(s)).fit(history);
}

inline PredictorPtr boosted_linear_fit(std::size_t rounds, double shrinkage, const Panel& history) {
    LearnerSpec s{"boosted_linear", "boosted_linear", json{{"rounds", rounds}, {"shrinkage", shrinkage}},
                  std::nullopt, {}};
    return BaseLearner(std::move(s)).fit(history);
}

}  // namespace osassl::learners
