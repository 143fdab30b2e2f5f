#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "osassl/algorithms.hpp"
#include "osassl/features.hpp"
#include "osassl/importance.hpp"
#include "osassl/io.hpp"
#include "osassl/learners.hpp"
#include "osassl/report.hpp"
#include "osassl/schedule.hpp"
#include "osassl/synthgen.hpp"

namespace osassl::pipeline {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct FeatureConfig {
    fs::path grid_swi;
    fs::path overlap;
    std::optional<fs::path> houses;
    std::int64_t cdf_start = 0;
    std::int64_t cdf_end = 0;
    std::size_t quantiles = 29;
};

struct ImportanceConfig {
    bool enabled = true;
    std::optional<std::int64_t> window_start;
    std::optional<std::int64_t> window_end;
    std::size_t n_perm = 10000;
    std::uint64_t seed = 1;
    double alpha = 0.05;
};

struct RunConfig {
    // Exactly one input mode.
    std::optional<synth::GeneratorSpec> synthetic;
    std::optional<fs::path> panel_csv;
    std::optional<fs::path> schema;
    std::optional<double> cost_bound;
    std::optional<FeatureConfig> features;

    ScheduleConfig schedule;
    ImportanceConfig importance;
    fs::path output_dir = "osassl_out";
    std::size_t workers = 1;
};

struct Diagnostic {
    std::string field;
    std::string message;
};

namespace detail {

class Collector {
public:
    explicit Collector(fs::path base) : base_(std::move(base)) {}

    void add(std::string field, std::string message) { diags.push_back({std::move(field), std::move(message)}); }

    template <class T>
    std::optional<T> get(const json& j, const char* key, const std::string& field) {
        if (!j.contains(key))
            return std::nullopt;
        try {
            return j.at(key).get<T>();
        } catch (const json::exception&) {
            add(field, "has the wrong type");
            return std::nullopt;
        }
    }

    fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() || base_.empty() ? path : base_ / path;
    }

    std::optional<fs::path> existing(const json& j, const char* key, const std::string& field, bool required) {
        const auto s = get<std::string>(j, key, field);
        if (!s) {
            if (required && !j.contains(key))
                add(field, "is required");
            return std::nullopt;
        }
        const auto path = resolve(*s);
        if (!fs::exists(path)) {
            add(field, "file not found: " + path.string());
            return std::nullopt;
        }
        return path;
    }

    std::vector<Diagnostic> diags;

private:
    fs::path base_;
};

}  // namespace detail

/// Parses a run configuration, collecting every violation instead of
/// stopping at the first. Relative paths resolve against `base_dir`.
inline std::pair<RunConfig, std::vector<Diagnostic>> parse_config(const json& j, const fs::path& base_dir = {}) {
    RunConfig cfg;
    detail::Collector c(base_dir);
    if (!j.is_object()) {
        c.add("config", "must be a JSON object");
        return {cfg, c.diags};
    }

    // input
    if (!j.contains("input") || !j.at("input").is_object()) {
        c.add("input", "is required");
    } else {
        const auto& in = j.at("input");
        const bool synthetic = in.contains("synthetic") || in.contains("synthetic_spec");
        const bool csv = in.contains("panel");
        if (synthetic == csv) {
            c.add("input", "needs exactly one of 'synthetic'/'synthetic_spec' or 'panel'");
        } else if (synthetic) {
            try {
                json spec;
                if (in.contains("synthetic")) {
                    spec = in.at("synthetic");
                } else if (const auto p = c.existing(in, "synthetic_spec", "input.synthetic_spec", true)) {
                    spec = json::parse(io::read_file(*p));
                }
                if (!spec.is_null())
                    cfg.synthetic = synth::spec_from_json(spec);
            } catch (const std::exception& e) {
                c.add("input.synthetic", e.what());
            }
        } else {
            cfg.panel_csv = c.existing(in, "panel", "input.panel", true);
            cfg.schema = c.existing(in, "schema", "input.schema", true);
            if (cfg.schema) {
                try {
                    io::read_schema(*cfg.schema);
                } catch (const std::exception& e) {
                    c.add("input.schema", e.what());
                }
            }
            if (auto b = c.get<double>(in, "cost_bound", "input.cost_bound")) {
                if (!(*b > 0.0))
                    c.add("input.cost_bound", "must be positive");
                cfg.cost_bound = b;
            }
            if (in.contains("features")) {
                const auto& f = in.at("features");
                FeatureConfig fc;
                auto grid = c.existing(f, "grid_swi", "input.features.grid_swi", true);
                auto overlap = c.existing(f, "overlap", "input.features.overlap", true);
                if (f.contains("houses"))
                    fc.houses = c.existing(f, "houses", "input.features.houses", true);
                const auto window = c.get<std::vector<std::int64_t>>(f, "cdf_window", "input.features.cdf_window");
                if (!window || window->size() != 2 || (*window)[0] > (*window)[1])
                    c.add("input.features.cdf_window", "must be [start, end] with start <= end");
                else {
                    fc.cdf_start = (*window)[0];
                    fc.cdf_end = (*window)[1];
                }
                if (auto q = c.get<long long>(f, "quantiles", "input.features.quantiles")) {
                    if (*q < 1)
                        c.add("input.features.quantiles", "must be >= 1");
                    else
                        fc.quantiles = static_cast<std::size_t>(*q);
                }
                if (grid && overlap) {
                    fc.grid_swi = *grid;
                    fc.overlap = *overlap;
                    cfg.features = fc;
                }
            }
        }
    }

    // learners
    std::vector<std::string> learner_names;
    if (!j.contains("learners") || !j.at("learners").is_array() || j.at("learners").empty()) {
        c.add("learners", "must be a non-empty array");
    } else {
        const auto& list = j.at("learners");
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto field = "learners[" + std::to_string(i) + "]";
            try {
                auto spec = learners::learner_spec_from_json(list[i]);
                const learners::BaseLearner check(spec);
                if (std::find(learner_names.begin(), learner_names.end(), check.name()) != learner_names.end())
                    c.add(field, "duplicate learner name '" + check.name() + "'");
                learner_names.push_back(check.name());
                cfg.schedule.learners.push_back(check.spec());
            } catch (const std::exception& e) {
                c.add(field, e.what());
            }
        }
    }

    // algorithms
    if (j.contains("algorithms")) {
        cfg.schedule.algorithms.clear();
        const auto& list = j.at("algorithms");
        if (!list.is_array() || list.empty()) {
            c.add("algorithms", "must be a non-empty array");
        } else {
            for (std::size_t i = 0; i < list.size(); ++i) {
                const auto field = "algorithms[" + std::to_string(i) + "]";
                try {
                    auto spec = algorithm_spec_from_json(list[i]);
                    if (!learner_names.empty())
                        make_algorithm(spec, learner_names, 1);
                    cfg.schedule.algorithms.push_back(std::move(spec));
                } catch (const std::exception& e) {
                    c.add(field, e.what());
                }
            }
        }
    }

    // meta
    const json meta = j.value("meta", json::object());
    if (auto l = c.get<double>(meta, "lambda", "meta.lambda")) {
        if (!(*l >= 0.0))
            c.add("meta.lambda", "must be >= 0");
        cfg.schedule.penalty.lambda = *l;
    }
    if (auto v = c.get<std::string>(meta, "penalty_variant", "meta.penalty_variant")) {
        if (*v == "literal")
            cfg.schedule.penalty.variant = PenaltyVariant::literal;
        else if (*v == "per_stream")
            cfg.schedule.penalty.variant = PenaltyVariant::per_stream;
        else
            c.add("meta.penalty_variant", "must be 'literal' or 'per_stream'");
    }
    if (auto e = c.get<double>(meta, "eps", "meta.eps")) {
        if (!(*e > 0.0 && *e <= 1.0))
            c.add("meta.eps", "must lie in (0, 1]");
        cfg.schedule.eps = *e;
    }
    if (auto e = c.get<double>(meta, "gap_eps", "meta.gap_eps")) {
        if (!(*e >= 0.0))
            c.add("meta.gap_eps", "must be >= 0");
        cfg.schedule.gap_eps = *e;
    }
    if (auto s = c.get<std::vector<long long>>(meta, "stages", "meta.stages")) {
        if (s->size() != 3 || (*s)[0] < 0 || (*s)[1] < 1 || (*s)[2] < 1)
            c.add("meta.stages", "must be [reserve >= 0, learners >= 1, algorithms >= 1]");
        else
            cfg.schedule.stages = {static_cast<std::size_t>((*s)[0]), static_cast<std::size_t>((*s)[1]),
                                   static_cast<std::size_t>((*s)[2])};
    }
    if (cfg.synthetic && cfg.synthetic->slices < cfg.schedule.stages.minimal_length())
        c.add("meta.stages", "need at least " + std::to_string(cfg.schedule.stages.minimal_length()) +
                                 " slices, the synthetic panel has " + std::to_string(cfg.synthetic->slices));

    // importance
    const json imp = j.value("importance", json::object());
    if (auto e = c.get<bool>(imp, "enabled", "importance.enabled"))
        cfg.importance.enabled = *e;
    if (auto n = c.get<long long>(imp, "n_perm", "importance.n_perm")) {
        if (*n < 1)
            c.add("importance.n_perm", "must be >= 1");
        else
            cfg.importance.n_perm = static_cast<std::size_t>(*n);
    }
    if (auto s = c.get<std::uint64_t>(imp, "seed", "importance.seed"))
        cfg.importance.seed = *s;
    if (auto a = c.get<double>(imp, "alpha", "importance.alpha")) {
        if (!(*a > 0.0 && *a < 1.0))
            c.add("importance.alpha", "must lie in (0, 1)");
        cfg.importance.alpha = *a;
    }
    if (auto w = c.get<std::vector<std::int64_t>>(imp, "window", "importance.window")) {
        if (w->size() != 2 || (*w)[0] > (*w)[1])
            c.add("importance.window", "must be [start, end] with start <= end");
        else {
            cfg.importance.window_start = (*w)[0];
            cfg.importance.window_end = (*w)[1];
        }
    }

    // output / workers
    if (auto o = c.get<std::string>(j.value("output", json::object()), "dir", "output.dir"))
        cfg.output_dir = c.resolve(*o);
    if (auto w = c.get<long long>(j, "workers", "workers")) {
        if (*w < 1)
            c.add("workers", "must be >= 1");
        else
            cfg.workers = static_cast<std::size_t>(*w);
    }
    return {cfg, c.diags};
}

inline std::vector<Diagnostic> validate(const fs::path& config_path) {
    std::string text;
    try {
        text = io::read_file(config_path);
    } catch (const Error&) {
        throw Error("cannot read config '" + config_path.string() + "'");
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        return {{"config", std::string("invalid JSON: ") + e.what()}};
    }
    return parse_config(j, config_path.parent_path()).second;
}

// ============================================================================
// Feature pipeline over CSV inputs
// ============================================================================

inline features::GridSwi read_grid(const fs::path& path) {
    const auto t = io::read_csv(path);
    const auto cc = t.column("cell"), cy = t.column("year"), cp = t.column("period"), cs = t.column("swi");
    features::GridSwi g;
    for (const auto& r : t.rows)
        g.set(io::parse_int(r[cc], "cell"), io::parse_int(r[cy], "year"),
              static_cast<std::size_t>(io::parse_int(r[cp], "period")), io::parse_double(r[cs], "swi"));
    return g;
}

inline features::OverlapWeights read_overlap(const fs::path& path) {
    const auto t = io::read_csv(path);
    const auto ci = t.column("city"), cc = t.column("cell"), ca = t.column("area");
    features::OverlapWeights w;
    for (const auto& r : t.rows)
        w.add(io::parse_int(r[ci], "city"), io::parse_int(r[cc], "cell"), io::parse_double(r[ca], "area"));
    return w;
}

inline std::vector<features::HouseRecord> read_houses(const fs::path& path) {
    const auto t = io::read_csv(path);
    const auto ch = t.column("house"), cc = t.column("city"), cy = t.column("year"), cs = t.column("insured_sum");
    const std::size_t ca[3] = {t.column("attr1"), t.column("attr2"), t.column("attr3")};
    std::vector<features::HouseRecord> out;
    for (const auto& r : t.rows) {
        features::HouseRecord h;
        h.house = io::parse_int(r[ch], "house");
        h.city = io::parse_int(r[cc], "city");
        h.year = io::parse_int(r[cy], "year");
        h.insured_sum = io::parse_double(r[cs], "insured_sum");
        for (int a = 0; a < 3; ++a)
            h.attr[static_cast<std::size_t>(a)] = io::parse_double(r[ca[a]], "attr" + std::to_string(a + 1));
        out.push_back(h);
    }
    return out;
}

/// Appends the SWI block, quarter-CDF probabilities and (when houses are
/// given) compound covariates to every observation of the panel.
inline Panel augment_panel(const Panel& panel, const FeatureConfig& fc) {
    const auto grid = read_grid(fc.grid_swi);
    const auto overlap = read_overlap(fc.overlap);
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<features::HouseRecord>> houses;
    if (fc.houses)
        for (const auto& h : read_houses(*fc.houses))
            houses[{h.city, h.year}].push_back(h);

    std::map<std::pair<std::int64_t, std::int64_t>, features::YearSwi> cache;
    auto city_swi = [&](std::int64_t city, std::int64_t year) -> const features::YearSwi& {
        auto it = cache.find({city, year});
        if (it == cache.end())
            it = cache.emplace(std::make_pair(city, year), features::aggregate_swi(grid, overlap, city, year)).first;
        return it->second;
    };

    std::vector<features::QuarterMeans> history;
    for (const auto city : overlap.cities())
        for (auto year = fc.cdf_start; year <= fc.cdf_end; ++year)
            history.push_back(features::quarter_means(city_swi(city, year)));
    const auto cdfs = features::fit_quarter_cdfs(history);

    auto entries = panel.schema().entries();
    const auto block = features::swi_block_names();
    for (std::size_t i = 0; i < block.size(); ++i) {
        const char* group = i < 3 * features::kPeriodsPerYear ? "swi_decadal"
                            : i < 3 * features::kPeriodsPerYear + 9 ? "swi_summary"
                                                                    : "swi_dry_season";
        entries.push_back({block[i], CovariateKind::continuous, 0, group, CovariateRole::swi});
    }
    for (const auto& n : features::cdf_probability_names())
        entries.push_back({n, CovariateKind::continuous, 0, "swi_cdf", CovariateRole::swi});
    if (fc.houses) {
        const auto names = features::compound_names(fc.quantiles);
        for (std::size_t i = 0; i < names.size(); ++i)
            entries.push_back({names[i], CovariateKind::continuous, 0, i < 6 ? "compound_means" : "compound_quantiles",
                               CovariateRole::x});
    }
    CovariateSchema schema(std::move(entries));

    std::vector<PanelSlice> slices;
    for (std::size_t s = 0; s < panel.num_slices(); ++s) {
        const auto& slice = panel.slice(s);
        const auto year = slice.time().value;
        std::vector<Observation> obs;
        for (const auto& o : slice.observations()) {
            const auto city = o.city().value;
            const auto& y0 = city_swi(city, year);
            const auto& y1 = city_swi(city, year - 1);
            const auto& y2 = city_swi(city, year - 2);
            auto z = o.z();
            const auto block = features::build_swi_block(y0, y1, y2);
            z.insert(z.end(), block.begin(), block.end());
            const auto probs = features::cdf_probabilities(cdfs, features::quarter_means(y0),
                                                           features::quarter_means(y1), features::quarter_means(y2));
            z.insert(z.end(), probs.begin(), probs.end());
            auto x = o.x();
            if (fc.houses) {
                const auto it = houses.find({city, year});
                if (it == houses.end())
                    throw Error("features: no house records for city " + std::to_string(city) + " year " +
                                std::to_string(year));
                const auto cc = features::compound_covariates(it->second, fc.quantiles);
                x.insert(x.end(), cc.weighted_means.begin(), cc.weighted_means.end());
                for (const auto& q : cc.quantiles)
                    x.insert(x.end(), q.begin(), q.end());
            }
            obs.emplace_back(o.city(), o.time(), std::move(x), std::move(z), o.y(), o.declared());
        }
        slices.emplace_back(slice.time(), std::move(obs));
    }
    return Panel::from_slices(std::move(schema), std::move(slices), panel.cost_bound());
}

// ============================================================================
// Run
// ============================================================================

struct RunResult {
    Panel panel;
    ForecastReport report;
    std::vector<importance::ImportanceScore> importance;
    std::vector<importance::GroupSummary> groups;
    std::vector<fs::path> files;
};

/// Predictions and covariate columns over the importance window.
inline std::vector<importance::ImportanceScore> importance_scores(const Panel& panel, const ForecastReport& report,
                                                                  const ImportanceConfig& ic, std::size_t workers) {
    std::vector<double> yhat;
    std::vector<const Observation*> obs;
    for (const auto& row : report.rows) {
        const auto y = row.time.value;
        if ((ic.window_start && y < *ic.window_start) || (ic.window_end && y > *ic.window_end))
            continue;
        const auto& slice = panel.at(row.time);
        for (std::size_t a = 0; a < slice.size(); ++a) {
            yhat.push_back(row.discrete_predictions[a]);
            obs.push_back(&slice[a]);
        }
    }
    if (yhat.size() < 3)
        throw Error("importance: fewer than 3 predictions in the window");
    const auto& schema = panel.schema();
    std::vector<importance::ImportanceScore> out;
    const importance::ImportanceSettings settings{ic.n_perm, ic.seed, workers};
    std::size_t xi = 0, zi = 0;
    for (const auto& e : schema.entries()) {
        const bool is_x = e.role == CovariateRole::x;
        const std::size_t pos = is_x ? xi++ : zi++;
        std::vector<double> values;
        values.reserve(obs.size());
        for (const auto* o : obs)
            values.push_back(is_x ? o->x()[pos] : o->z()[pos]);
        out.push_back(importance::score_covariate(e, yhat, values, settings));
    }
    return out;
}

/// Runs `fn`, prefixing any failure with the stage name.
template <class F>
auto stage(const char* name, F&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw Error(std::string(name) + ": " + e.what());
    }
}

inline RunResult run(const RunConfig& cfg) {
    RunResult res;
    ScheduleOptions options;
    std::optional<json> sidecar;
    if (cfg.synthetic) {
        stage("generate", [&] {
            auto g = synth::generate(*cfg.synthetic);
            res.panel = std::move(g.panel);
            options.truth = g.truth;
            sidecar = synth::truth_to_json(*cfg.synthetic, *g.law, g.truth->graph);
        });
    } else {
        res.panel = stage("load", [&] { return io::read_panel(*cfg.panel_csv, *cfg.schema, cfg.cost_bound); });
        if (cfg.features)
            res.panel = stage("features", [&] { return augment_panel(res.panel, *cfg.features); });
    }
    auto schedule = cfg.schedule;
    schedule.workers = cfg.workers;
    res.report = stage("schedule", [&] { return run_schedule(res.panel, schedule, options); });

    if (cfg.importance.enabled) {
        stage("importance", [&] {
            res.importance = importance_scores(res.panel, res.report, cfg.importance, cfg.workers);
            res.groups = importance::group_report(res.importance, importance::schema_groups(res.panel.schema()),
                                                  cfg.importance.alpha);
        });
    }

    stage("write", [&] {
        const auto& dir = cfg.output_dir;
        auto emit = [&](const std::string& name, const std::string& content) {
            io::write_file(dir / name, content);
            res.files.push_back(dir / name);
        };
        emit("forecast_report.csv", report::forecast_csv(res.report));
        emit("forecast_report.json", report::forecast_json(res.report).dump(2) + "\n");
        emit("risk_traces.csv", report::risk_traces_csv(res.report));
        emit("weights.csv", report::weights_csv(res.report));
        emit("predictions.csv", report::predictions_csv(res.report));
        emit("residual_deciles.csv", report::residual_deciles_csv(res.report, res.panel));
        if (options.truth)
            emit("oracle.csv", report::oracle_csv(res.report));
        if (cfg.importance.enabled) {
            emit("importance.csv", report::importance_csv(res.importance));
            emit("importance_groups.csv", report::group_csv(res.groups));
        }
        if (sidecar)
            emit("truth.json", sidecar->dump(2) + "\n");
    });
    return res;
}

/// Writes a generated panel in the CSV format plus its sidecars.
inline std::vector<fs::path> generate_files(const synth::GeneratorSpec& spec, const fs::path& dir) {
    const auto g = synth::generate(spec);
    std::vector<fs::path> files{dir / "panel.csv", dir / "schema.json", dir / "truth.json"};
    io::write_file(files[0], io::panel_to_csv(g.panel));
    io::write_file(files[1], io::schema_to_json(g.panel.schema()).dump(2) + "\n");
    io::write_file(files[2], synth::truth_to_json(spec, *g.law, g.truth->graph).dump(2) + "\n");
    return files;
}

}  // namespace osassl::pipeline
