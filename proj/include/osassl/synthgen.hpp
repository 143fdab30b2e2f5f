#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "osassl/core.hpp"
#include "osassl/learners.hpp"
#include "osassl/oracle.hpp"

namespace osassl::synth {

using json = nlohmann::json;

enum class Topology { lattice, ring, star, edgeless };
enum class ThetaFamily { linear, additive, piecewise };

struct GeneratorSpec {
    std::size_t cities = 50;
    std::size_t slices = 12;
    Topology topology = Topology::lattice;
    std::size_t ring_k = 4;  // ring only; even
    ThetaFamily family = ThetaFamily::linear;

    std::size_t continuous = 4;    // x1..xp in [0, 1]
    int zone_levels = 3;           // one categorical covariate
    std::size_t swi_channels = 2;  // z = channels x width values in [0, 1]
    std::size_t swi_width = 6;

    double declaration_base = 0.0;   // logit P(declared) = base + slope * (0.5 - mean z)
    double declaration_slope = 6.0;
    double noise_sd = 1.0;
    bool heteroscedastic = false;    // sd scaled by (0.5 + mean z)
    double edge_strength = 0.3;      // share of noise variance carried by edges, in [0, 1)
    double ar = 0.3;                 // autoregressive weight of the continuous covariates
    double drought_weight = 0.5;     // share of z driven by the common yearly drought level
    double signal_scale = 1.0;
    std::int64_t first_year = 1;
    std::uint64_t seed = 1;

    void validate() const {
        if (cities < 1)
            throw Error("generator spec: at least one city required");
        if (slices < 1)
            throw Error("generator spec: at least one slice required");
        if (!(edge_strength >= 0.0 && edge_strength < 1.0))
            throw Error("generator spec: edge_strength must lie in [0, 1)");
        if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd))
            throw Error("generator spec: noise_sd must be finite and >= 0");
        if (!(ar >= 0.0 && ar < 1.0))
            throw Error("generator spec: ar must lie in [0, 1)");
        if (!(drought_weight >= 0.0 && drought_weight <= 1.0))
            throw Error("generator spec: drought_weight must lie in [0, 1]");
        if (zone_levels < 2 || zone_levels > 5)
            throw Error("generator spec: zone_levels must be 2..5");
        if (swi_channels < 1 || swi_width < 1)
            throw Error("generator spec: at least one SWI channel of width >= 1 required");
        if (topology == Topology::ring && (ring_k < 2 || ring_k % 2 != 0 || ring_k >= cities))
            throw Error("generator spec: ring_k must be even, >= 2 and below the city count");
        if (!(signal_scale > 0.0))
            throw Error("generator spec: signal_scale must be positive");
    }
};

inline const char* to_string(Topology t) {
    switch (t) {
    case Topology::lattice: return "lattice";
    case Topology::ring: return "ring";
    case Topology::star: return "star";
    case Topology::edgeless: return "edgeless";
    }
    return "?";
}

inline const char* to_string(ThetaFamily f) {
    switch (f) {
    case ThetaFamily::linear: return "linear";
    case ThetaFamily::additive: return "additive";
    case ThetaFamily::piecewise: return "piecewise";
    }
    return "?";
}

inline json spec_to_json(const GeneratorSpec& s) {
    return {{"cities", s.cities},
            {"slices", s.slices},
            {"topology", to_string(s.topology)},
            {"ring_k", s.ring_k},
            {"family", to_string(s.family)},
            {"continuous", s.continuous},
            {"zone_levels", s.zone_levels},
            {"swi_channels", s.swi_channels},
            {"swi_width", s.swi_width},
            {"declaration_base", s.declaration_base},
            {"declaration_slope", s.declaration_slope},
            {"noise_sd", s.noise_sd},
            {"heteroscedastic", s.heteroscedastic},
            {"edge_strength", s.edge_strength},
            {"ar", s.ar},
            {"drought_weight", s.drought_weight},
            {"signal_scale", s.signal_scale},
            {"first_year", s.first_year},
            {"seed", s.seed}};
}

inline GeneratorSpec spec_from_json(const json& j) {
    GeneratorSpec s;
    if (!j.is_object())
        throw Error("generator spec: expected a JSON object");
    s.cities = j.value("cities", s.cities);
    s.slices = j.value("slices", s.slices);
    const auto topo = j.value("topology", std::string("lattice"));
    if (topo == "lattice") s.topology = Topology::lattice;
    else if (topo == "ring") s.topology = Topology::ring;
    else if (topo == "star") s.topology = Topology::star;
    else if (topo == "edgeless") s.topology = Topology::edgeless;
    else throw Error("generator spec: unknown topology '" + topo + "'");
    s.ring_k = j.value("ring_k", s.ring_k);
    const auto fam = j.value("family", std::string("linear"));
    if (fam == "linear") s.family = ThetaFamily::linear;
    else if (fam == "additive") s.family = ThetaFamily::additive;
    else if (fam == "piecewise") s.family = ThetaFamily::piecewise;
    else throw Error("generator spec: unknown family '" + fam + "'");
    s.continuous = j.value("continuous", s.continuous);
    s.zone_levels = j.value("zone_levels", s.zone_levels);
    s.swi_channels = j.value("swi_channels", s.swi_channels);
    s.swi_width = j.value("swi_width", s.swi_width);
    s.declaration_base = j.value("declaration_base", s.declaration_base);
    s.declaration_slope = j.value("declaration_slope", s.declaration_slope);
    s.noise_sd = j.value("noise_sd", s.noise_sd);
    s.heteroscedastic = j.value("heteroscedastic", s.heteroscedastic);
    s.edge_strength = j.value("edge_strength", s.edge_strength);
    s.ar = j.value("ar", s.ar);
    s.drought_weight = j.value("drought_weight", s.drought_weight);
    s.signal_scale = j.value("signal_scale", s.signal_scale);
    s.first_year = j.value("first_year", s.first_year);
    s.seed = j.value("seed", s.seed);
    s.validate();
    return s;
}

// ============================================================================
// Randomness: explicit uniform draws from per-purpose mt19937_64 streams
// ============================================================================

class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index),
                          static_cast<std::uint32_t>(index >> 32)};
        engine_.seed(seq);
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Zero-mean, unit-variance bounded innovation (uniform on [-sqrt 3, sqrt 3]).
    double innovation() { return std::sqrt(3.0) * (2.0 * uniform() - 1.0); }

private:
    std::mt19937_64 engine_;
};

enum : std::uint64_t { kSliceStream = 1, kCityStream = 2, kNoiseStream = 3 };

// ============================================================================
// Graph
// ============================================================================

inline DependencyGraph make_graph(std::size_t n, Topology topology, std::size_t ring_k = 4) {
    std::vector<CityId> v;
    for (std::size_t i = 0; i < n; ++i)
        v.push_back(CityId{static_cast<std::int64_t>(i + 1)});
    std::vector<std::pair<CityId, CityId>> e;
    auto add = [&](std::size_t a, std::size_t b) { e.emplace_back(v[a], v[b]); };
    switch (topology) {
    case Topology::lattice: {
        const auto rows = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n)))));
        const auto cols = (n + rows - 1) / rows;
        for (std::size_t i = 0; i < n; ++i) {
            if ((i % cols) + 1 < cols && i + 1 < n)
                add(i, i + 1);
            if (i + cols < n)
                add(i, i + cols);
        }
        break;
    }
    case Topology::ring:
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 1; d <= ring_k / 2; ++d)
                add(i, (i + d) % n);
        break;
    case Topology::star:
        for (std::size_t i = 1; i < n; ++i)
            add(0, i);
        break;
    case Topology::edgeless:
        break;
    }
    return DependencyGraph(std::move(v), e);
}

// ============================================================================
// Regression function
// ============================================================================

/// theta* and the conditional standard deviation for a spec. Constructed so
/// that theta* - (max noise) >= 0 and B = max theta* + max noise, hence the
/// clamp of Y to [0, B] never binds and E[Y | X, Z] = theta* exactly.
class Truth {
public:
    explicit Truth(const GeneratorSpec& spec, const DependencyGraph& graph) : spec_(spec) {
        static constexpr double kPattern[4] = {3.0, -2.0, 1.5, 0.5};
        static constexpr double kZone[5] = {0.0, 1.0, 2.5, 1.5, 0.5};
        for (std::size_t i = 0; i < spec.continuous; ++i)
            beta_.push_back(spec.signal_scale * kPattern[i % 4] / static_cast<double>(1 + i / 4));
        for (int l = 0; l < spec.zone_levels; ++l)
            zone_.push_back(spec.signal_scale * kZone[l]);
        delta_ = 4.0 * spec.signal_scale;

        double lo = *std::min_element(zone_.begin(), zone_.end());
        double hi = *std::max_element(zone_.begin(), zone_.end());
        for (double b : beta_) {
            lo += std::min(0.0, b);
            hi += std::max(0.0, b);
        }
        hi += delta_;

        std::size_t max_deg = 0;
        for (std::size_t i = 0; i < graph.size(); ++i)
            max_deg = std::max(max_deg, graph.neighbor_count(i));
        const double s = spec.edge_strength;
        const double e_max = max_deg == 0 ? std::sqrt(3.0)
                                          : std::sqrt(3.0) * (std::sqrt(1.0 - s) + std::sqrt(s * static_cast<double>(max_deg)));
        noise_bound_ = spec.noise_sd * (spec.heteroscedastic ? 1.5 : 1.0) * e_max;
        intercept_ = noise_bound_ + spec.noise_sd + 1.0 - lo;
        theta_max_ = intercept_ + hi;
        bound_ = theta_max_ + noise_bound_;
    }

    double theta(const Observation& o) const {
        if (!o.declared())
            return 0.0;
        return theta_declared(o.x(), o.z());
    }

    double theta_declared(const std::vector<double>& x, const std::vector<double>& z) const {
        double v = intercept_ + zone_[static_cast<std::size_t>(x[spec_.continuous])];
        const double z0 = channel_mean(z, 0);
        for (std::size_t i = 0; i < spec_.continuous; ++i) {
            switch (spec_.family) {
            case ThetaFamily::linear: v += beta_[i] * x[i]; break;
            case ThetaFamily::additive: v += beta_[i] * 4.0 * (x[i] - 0.5) * (x[i] - 0.5); break;
            case ThetaFamily::piecewise: v += x[i] > 0.5 ? beta_[i] : 0.0; break;
            }
        }
        switch (spec_.family) {
        case ThetaFamily::linear: v += delta_ * (1.0 - z0); break;
        case ThetaFamily::additive: v += delta_ * (1.0 - z0) * (1.0 - z0); break;
        case ThetaFamily::piecewise: v += z0 < 0.5 ? delta_ : 0.0; break;
        }
        return v;
    }

    double noise_sd(const std::vector<double>& z) const {
        return spec_.noise_sd * (spec_.heteroscedastic ? 0.5 + mean(z) : 1.0);
    }

    double noise_variance(const Observation& o) const {
        if (!o.declared())
            return 0.0;
        const double s = noise_sd(o.z());
        return s * s;
    }

    double cost_bound() const { return bound_; }
    double noise_bound() const { return noise_bound_; }
    double intercept() const { return intercept_; }
    const std::vector<double>& beta() const { return beta_; }
    const std::vector<double>& zone_effects() const { return zone_; }
    double swi_effect() const { return delta_; }

    double channel_mean(const std::vector<double>& z, std::size_t c) const {
        double s = 0.0;
        for (std::size_t k = 0; k < spec_.swi_width; ++k)
            s += z[c * spec_.swi_width + k];
        return s / static_cast<double>(spec_.swi_width);
    }

    static double mean(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v)
            s += x;
        return s / static_cast<double>(v.size());
    }

private:
    GeneratorSpec spec_;
    std::vector<double> beta_;
    std::vector<double> zone_;
    double delta_ = 0.0;
    double intercept_ = 0.0;
    double theta_max_ = 0.0;
    double noise_bound_ = 0.0;
    double bound_ = 1.0;
};

inline CovariateSchema make_schema(const GeneratorSpec& spec) {
    std::vector<CovariateEntry> e;
    for (std::size_t i = 0; i < spec.continuous; ++i) {
        const auto n = "x" + std::to_string(i + 1);
        e.push_back({n, CovariateKind::continuous, 0, n, CovariateRole::x});
    }
    e.push_back({"zone", CovariateKind::categorical, spec.zone_levels, "zone", CovariateRole::x});
    for (std::size_t c = 0; c < spec.swi_channels; ++c)
        for (std::size_t k = 0; k < spec.swi_width; ++k)
            e.push_back({"swi_c" + std::to_string(c + 1) + "_" + std::to_string(k + 1), CovariateKind::continuous, 0,
                         "swi", CovariateRole::swi});
    return CovariateSchema(std::move(e));
}

struct Generated {
    Panel panel;
    GroundTruthPtr truth;
    std::shared_ptr<const Truth> law;
};

/// Graph-correlated standardized innovations for one slice: each city mixes
/// its own innovation with innovations attached to its incident edges, so
/// non-adjacent cities are independent.
inline std::vector<double> correlated_innovations(const DependencyGraph& g, double strength, Stream& rng) {
    const std::size_t n = g.size();
    std::vector<double> own(n);
    for (auto& u : own)
        u = rng.innovation();
    std::vector<double> e(n);
    std::vector<double> edge_sum(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (auto j : g.neighbors(i))
            if (j > i) {
                const double v = rng.innovation();
                edge_sum[i] += v;
                edge_sum[j] += v;
            }
    for (std::size_t i = 0; i < n; ++i) {
        const auto deg = g.neighbor_count(i);
        if (deg == 0 || strength == 0.0)
            e[i] = own[i];
        else
            e[i] = std::sqrt(1.0 - strength) * own[i] + std::sqrt(strength / static_cast<double>(deg)) * edge_sum[i];
    }
    return e;
}

inline Generated generate(const GeneratorSpec& spec) {
    spec.validate();
    const auto graph = make_graph(spec.cities, spec.topology, spec.ring_k);
    auto law = std::make_shared<const Truth>(spec, graph);
    const auto schema = make_schema(spec);
    const std::size_t n = spec.cities;
    const std::size_t zdim = spec.swi_channels * spec.swi_width;

    std::vector<double> zone(n);
    {
        Stream rng(spec.seed, kCityStream, 0);
        for (auto& z : zone)
            z = std::floor(rng.uniform() * spec.zone_levels);
    }
    std::vector<std::vector<double>> prev_x(n);
    std::vector<PanelSlice> slices;
    for (std::size_t t = 0; t < spec.slices; ++t) {
        Stream rng(spec.seed, kSliceStream, t);
        const double drought = rng.uniform();
        const TimeIndex time{spec.first_year + static_cast<std::int64_t>(t)};
        std::vector<std::vector<double>> xs(n), zs(n);
        std::vector<bool> declared(n);
        for (std::size_t a = 0; a < n; ++a) {
            auto& x = xs[a];
            for (std::size_t i = 0; i < spec.continuous; ++i) {
                const double u = rng.uniform();
                x.push_back(t == 0 ? u : spec.ar * prev_x[a][i] + (1.0 - spec.ar) * u);
            }
            x.push_back(zone[a]);
            auto& z = zs[a];
            for (std::size_t k = 0; k < zdim; ++k)
                z.push_back(spec.drought_weight * (1.0 - drought) + (1.0 - spec.drought_weight) * rng.uniform());
            const double logit = spec.declaration_base + spec.declaration_slope * (0.5 - Truth::mean(z));
            declared[a] = rng.uniform() < 1.0 / (1.0 + std::exp(-logit));
        }
        Stream noise_rng(spec.seed, kNoiseStream, t);
        const auto e = correlated_innovations(graph, spec.edge_strength, noise_rng);
        std::vector<Observation> obs;
        obs.reserve(n);
        for (std::size_t a = 0; a < n; ++a) {
            double y = 0.0;
            if (declared[a]) {
                y = law->theta_declared(xs[a], zs[a]) + law->noise_sd(zs[a]) * e[a];
                y = std::clamp(y, 0.0, law->cost_bound());
            }
            prev_x[a].assign(xs[a].begin(), xs[a].begin() + static_cast<std::ptrdiff_t>(spec.continuous));
            obs.emplace_back(graph.vertices()[a], time, std::move(xs[a]), std::move(zs[a]), y, declared[a]);
        }
        slices.emplace_back(time, std::move(obs));
    }

    auto truth = std::make_shared<GroundTruth>();
    truth->theta = [law](const Observation& o) { return law->theta(o); };
    truth->noise_variance = [law](const Observation& o) { return law->noise_variance(o); };
    truth->graph = graph;
    truth->cost_bound = law->cost_bound();
    return {Panel::from_slices(schema, std::move(slices), law->cost_bound()), std::move(truth), std::move(law)};
}

/// Same covariates, fresh noise: Y resampled from its conditional law.
inline Panel resample_costs(const Panel& panel, const GeneratorSpec& spec, const Truth& law, std::uint64_t seed) {
    const auto graph = make_graph(spec.cities, spec.topology, spec.ring_k);
    std::vector<PanelSlice> slices;
    for (std::size_t t = 0; t < panel.num_slices(); ++t) {
        Stream rng(seed, kNoiseStream, t);
        const auto e = correlated_innovations(graph, spec.edge_strength, rng);
        const auto& slice = panel.slice(t);
        std::vector<Observation> obs;
        for (std::size_t a = 0; a < slice.size(); ++a) {
            const auto& o = slice[a];
            double y = 0.0;
            if (o.declared())
                y = std::clamp(law.theta(o) + law.noise_sd(o.z()) * e[a], 0.0, law.cost_bound());
            obs.push_back(o.with_cost(y));
        }
        slices.emplace_back(slice.time(), std::move(obs));
    }
    return Panel::from_slices(panel.schema(), std::move(slices), panel.cost_bound());
}

/// Sidecar describing a generated panel.
inline json truth_to_json(const GeneratorSpec& spec, const Truth& law, const DependencyGraph& graph) {
    const auto ds = degree_stats(graph);
    return {{"spec", spec_to_json(spec)},
            {"truth",
             {{"intercept", law.intercept()},
              {"beta", law.beta()},
              {"zone_effects", law.zone_effects()},
              {"swi_effect", law.swi_effect()},
              {"cost_bound", law.cost_bound()},
              {"noise_bound", law.noise_bound()}}},
            {"graph", {{"edges", graph.num_edges()}, {"degree", graph.degree()}, {"max_neighbors", ds.max},
                       {"mean_neighbors", ds.mean}}}};
}

struct RankedLearner {
    std::size_t index = 0;
    std::string name;
    double squared_bias = 0.0;
};

/// Ranks learners by their Monte-Carlo mean squared deviation from theta*
/// on freshly generated covariates, after training on a panel from `spec`.
inline std::vector<RankedLearner> best_fixed_algorithm(const GeneratorSpec& spec,
                                                       const std::vector<learners::LearnerSpec>& zoo,
                                                       std::size_t fresh_slices = 4) {
    const auto train = generate(spec);
    auto fresh_spec = spec;
    fresh_spec.seed = spec.seed ^ 0x9e3779b97f4a7c15ULL;
    fresh_spec.slices = std::max<std::size_t>(1, fresh_slices);
    const auto fresh = generate(fresh_spec);
    std::vector<RankedLearner> out;
    for (std::size_t k = 0; k < zoo.size(); ++k) {
        const learners::BaseLearner learner(zoo[k]);
        const auto p = learner.fit(train.panel);
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t t = 0; t < fresh.panel.num_slices(); ++t)
            for (const auto& o : fresh.panel.slice(t).observations()) {
                if (!o.declared())
                    continue;
                const double d = p->predict(o) - fresh.law->theta(o);
                s += d * d;
                ++n;
            }
        out.push_back({k, learner.name(), n ? s / static_cast<double>(n) : 0.0});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const RankedLearner& a, const RankedLearner& b) { return a.squared_bias < b.squared_bias; });
    return out;
}

}  // namespace osassl::synth
