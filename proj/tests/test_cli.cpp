#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "osassl/pipeline.hpp"

using namespace osassl;
namespace pl = osassl::pipeline;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("osassl_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    f << s;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct Outcome {
    int status;
    std::string out;
    std::string err;
};

Outcome invoke(const std::string& args, const fs::path& dir) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd =
        std::string("\"") + OSASSL_BIN + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

json smoke_config(const fs::path& out) {
    return {{"input", {{"synthetic", {{"cities", 50}, {"slices", 12}, {"topology", "lattice"}, {"seed", 7}}}}},
            {"learners",
             {{{"name", "mean"}, {"kind", "mean"}},
              {{"name", "ridge"}, {"kind", "ridge"}, {"hyperparameters", {{"lambda", 1.0}}}},
              {{"name", "boost"}, {"kind", "boosted_linear"}, {"hyperparameters", {{"rounds", 10}}}},
              {{"name", "knn"}, {"kind", "knn_ks"}, {"hyperparameters", {{"k", 5}}}}}},
            {"meta", {{"lambda", 0.05}, {"eps", 0.1}, {"stages", {2, 3, 3}}}},
            {"importance", {{"n_perm", 199}, {"seed", 3}}},
            {"output", {{"dir", out.string()}}}};
}

const char* kOutputs[] = {"forecast_report.csv", "forecast_report.json", "risk_traces.csv",
                          "weights.csv",         "predictions.csv",      "residual_deciles.csv",
                          "oracle.csv",          "importance.csv",       "importance_groups.csv",
                          "truth.json"};

}  // namespace

TEST(Validate, ValidConfigHasNoDiagnostics) {
    const auto [cfg, diags] = pl::parse_config(smoke_config("out"));
    EXPECT_TRUE(diags.empty());
    EXPECT_EQ(cfg.schedule.learners.size(), 4u);
    EXPECT_EQ(cfg.importance.n_perm, 199u);
}

TEST(Validate, NegativeLambdaNamed) {
    auto j = smoke_config("out");
    j["meta"]["lambda"] = -1;
    const auto diags = pl::parse_config(j).second;
    ASSERT_EQ(diags.size(), 1u);
    EXPECT_EQ(diags[0].field, "meta.lambda");
}

TEST(Validate, ReportsEveryViolation) {
    auto j = smoke_config("out");
    j["meta"]["lambda"] = -1;
    j["meta"]["eps"] = 0;
    j["importance"]["n_perm"] = 0;
    const auto diags = pl::parse_config(j).second;
    ASSERT_EQ(diags.size(), 3u);
    EXPECT_EQ(diags[0].field, "meta.lambda");
    EXPECT_EQ(diags[1].field, "meta.eps");
    EXPECT_EQ(diags[2].field, "importance.n_perm");
}

TEST(Validate, StructuralErrors) {
    EXPECT_FALSE(pl::parse_config(json::array()).second.empty());
    auto j = smoke_config("out");
    j["learners"].push_back({{"name", "mean"}, {"kind", "mean"}});
    EXPECT_EQ(pl::parse_config(j).second.size(), 1u);
    j = smoke_config("out");
    j["meta"]["stages"] = {5, 5, 6};
    EXPECT_EQ(pl::parse_config(j).second.at(0).field, "meta.stages");
    j = smoke_config("out");
    j["input"]["panel"] = "panel.csv";
    EXPECT_EQ(pl::parse_config(j).second.at(0).field, "input");
}

TEST(Validate, UnreadableAndInvalidFiles) {
    const auto dir = scratch("validate");
    EXPECT_THROW(pl::validate(dir / "absent.json"), Error);
    write(dir / "bad.json", "{ not json");
    const auto diags = pl::validate(dir / "bad.json");
    ASSERT_EQ(diags.size(), 1u);
    EXPECT_EQ(diags[0].field, "config");
}

TEST(Cli, SmokeRunProducesParseableOutputs) {
    const auto dir = scratch("smoke");
    write(dir / "config.json", smoke_config("out").dump());
    const auto r = invoke("run --config " + (dir / "config.json").string(), dir);
    ASSERT_EQ(r.status, 0) << r.err;
    for (const char* name : kOutputs) {
        const auto p = dir / "out" / name;
        ASSERT_TRUE(fs::exists(p)) << name;
        const auto text = slurp(p);
        if (p.extension() == ".json") {
            EXPECT_TRUE(json::accept(text)) << name;
        } else {
            const auto t = io::parse_csv(text);
            EXPECT_FALSE(t.header.empty()) << name;
            for (const auto& row : t.rows)
                EXPECT_EQ(row.size(), t.header.size()) << name;
        }
    }
    const auto report = json::parse(slurp(dir / "out" / "forecast_report.json"));
    EXPECT_EQ(report["rows"].size(), 12u - 9u + 1u);
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
    const auto dir = scratch("determinism");
    write(dir / "config.json", smoke_config("out").dump());
    ASSERT_EQ(invoke("run --config " + (dir / "config.json").string() + " --out a", dir).status, 0);
    ASSERT_EQ(invoke("run --config " + (dir / "config.json").string() + " --out b --workers 3", dir).status, 0);
    for (const char* name : kOutputs)
        EXPECT_EQ(slurp(fs::path("a") / name), slurp(fs::path("b") / name)) << name;
    fs::remove_all("a");
    fs::remove_all("b");
}

TEST(Cli, MissingSchemaNamesPath) {
    const auto dir = scratch("missing");
    write(dir / "panel.csv", "city,time,y,declared\n");
    const json cfg{{"input", {{"panel", "panel.csv"}, {"schema", "nowhere/schema.json"}}},
                   {"learners", {{{"name", "mean"}, {"kind", "mean"}}}}};
    write(dir / "config.json", cfg.dump());
    const auto r = invoke("run --config " + (dir / "config.json").string(), dir);
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.err.find("nowhere/schema.json"), std::string::npos) << r.err;
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, ValidateSubcommand) {
    const auto dir = scratch("validate_cmd");
    auto j = smoke_config("out");
    write(dir / "good.json", j.dump());
    auto r = invoke("validate --config " + (dir / "good.json").string(), dir);
    EXPECT_EQ(r.status, 0);
    EXPECT_EQ(r.out, "ok\n");
    j["meta"]["lambda"] = -1;
    j["workers"] = 0;
    write(dir / "bad.json", j.dump());
    r = invoke("validate --config " + (dir / "bad.json").string(), dir);
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.out.find("meta.lambda"), std::string::npos);
    EXPECT_NE(r.out.find("workers"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Cli, StageFailureIsOneLine) {
    const auto dir = scratch("stage");
    write(dir / "schema.json", R"({"covariates": [{"name": "x1", "kind": "continuous", "role": "x"}]})");
    write(dir / "panel.csv", "city,year,declared,cost,x1\n1,1,1,5,oops\n");
    const json cfg{{"input", {{"panel", "panel.csv"}, {"schema", "schema.json"}, {"cost_bound", 100}}},
                   {"learners", {{{"name", "mean"}, {"kind", "mean"}}}},
                   {"meta", {{"stages", {0, 1, 1}}}}};
    write(dir / "config.json", cfg.dump());
    const auto r = invoke("run --config " + (dir / "config.json").string(), dir);
    EXPECT_NE(r.status, 0);
    EXPECT_EQ(r.err.rfind("osassl: load: ", 0), 0u) << r.err;
    EXPECT_NE(r.err.find("x1"), std::string::npos) << r.err;
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, GenThenRunFromCsvWithFeatures) {
    const auto dir = scratch("features");
    synth::GeneratorSpec spec;
    spec.cities = 12;
    spec.slices = 8;
    spec.first_year = 2001;
    spec.seed = 21;
    write(dir / "spec.json", synth::spec_to_json(spec).dump());
    auto r = invoke("gen --spec " + (dir / "spec.json").string() + " --out " + (dir / "data").string(), dir);
    ASSERT_EQ(r.status, 0) << r.err;

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    io::CsvWriter grid({"cell", "year", "period", "swi"});
    io::CsvWriter overlap({"city", "cell", "area"});
    io::CsvWriter houses({"house", "city", "year", "insured_sum", "attr1", "attr2", "attr3"});
    for (int cell = 1; cell <= 15; ++cell)
        for (int year = 1990; year <= 2008; ++year)
            for (int p = 1; p <= 36; ++p)
                grid.row({std::to_string(cell), std::to_string(year), std::to_string(p), io::fmt(u(rng))});
    std::int64_t house = 0;
    for (int city = 1; city <= 12; ++city) {
        overlap.row({std::to_string(city), std::to_string(city), io::fmt(1.0 + u(rng))});
        overlap.row({std::to_string(city), std::to_string(city + 3), io::fmt(u(rng))});
        for (int year = 2001; year <= 2008; ++year)
            for (int h = 0; h < 4; ++h)
                houses.row({std::to_string(++house), std::to_string(city), std::to_string(year),
                            io::fmt(1.0 + 9.0 * u(rng)), io::fmt(u(rng)), io::fmt(u(rng)), io::fmt(u(rng))});
    }
    write(dir / "grid.csv", grid.str());
    write(dir / "overlap.csv", overlap.str());
    write(dir / "houses.csv", houses.str());

    const json cfg{{"input",
                    {{"panel", "data/panel.csv"},
                     {"schema", "data/schema.json"},
                     {"features",
                      {{"grid_swi", "grid.csv"},
                       {"overlap", "overlap.csv"},
                       {"houses", "houses.csv"},
                       {"cdf_window", {1992, 2000}},
                       {"quantiles", 9}}}}},
                   {"learners",
                    {{{"name", "mean"}, {"kind", "mean"}},
                     {{"name", "ridge"}, {"kind", "ridge"}, {"hyperparameters", {{"lambda", 1.0}}}}}},
                   {"meta", {{"stages", {1, 2, 2}}}},
                   {"importance", {{"n_perm", 49}}},
                   {"output", {{"dir", "out"}}}};
    write(dir / "config.json", cfg.dump());
    r = invoke("run --config " + (dir / "config.json").string(), dir);
    ASSERT_EQ(r.status, 0) << r.err;
    const auto groups = io::parse_csv(slurp(dir / "out" / "importance_groups.csv"));
    std::set<std::string> names;
    for (const auto& row : groups.rows)
        names.insert(row[0]);
    for (const char* g : {"swi_decadal", "swi_summary", "swi_dry_season", "swi_cdf", "compound_means",
                          "compound_quantiles"})
        EXPECT_TRUE(names.count(g)) << g;
    EXPECT_FALSE(fs::exists(dir / "out" / "oracle.csv"));
}
