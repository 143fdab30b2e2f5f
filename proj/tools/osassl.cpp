#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "osassl/pipeline.hpp"

namespace pl = osassl::pipeline;

namespace {

int fail(const std::string& message) {
    std::cerr << "osassl: " << message << '\n';
    return 1;
}

nlohmann::json load_json(const std::string& path, const char* what) {
    std::string text;
    try {
        text = osassl::io::read_file(path);
    } catch (const std::exception&) {
        throw osassl::Error(std::string(what) + ": cannot read '" + path + "'");
    }
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw osassl::Error(std::string(what) + ": invalid JSON in '" + path + "': " + e.what());
    }
}

std::string join(const std::vector<pl::Diagnostic>& diags) {
    std::string s;
    for (const auto& d : diags) {
        if (!s.empty())
            s += "; ";
        s += d.field + " " + d.message;
    }
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"One-step ahead sequential Super Learner"};
    app.require_subcommand(1);

    std::string config_path, out_dir, spec_path;
    std::size_t workers = 0;

    auto* run = app.add_subcommand("run", "Run the forecasting pipeline");
    run->add_option("--config", config_path, "Run configuration (JSON)")->required();
    run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    run->add_option("--out", out_dir, "Output directory");

    auto* validate = app.add_subcommand("validate", "Check a configuration without running it");
    validate->add_option("--config", config_path, "Run configuration (JSON)")->required();

    auto* gen = app.add_subcommand("gen", "Generate a synthetic panel");
    gen->add_option("--spec", spec_path, "Generator spec (JSON)")->required();
    gen->add_option("--out", out_dir, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) {
            const auto diags = pl::validate(config_path);
            for (const auto& d : diags)
                std::cout << d.field << ": " << d.message << '\n';
            if (!diags.empty())
                return 1;
            std::cout << "ok\n";
            return 0;
        }
        if (*gen) {
            const auto spec = [&] {
                try {
                    return osassl::synth::spec_from_json(load_json(spec_path, "spec"));
                } catch (const osassl::Error&) {
                    throw;
                } catch (const std::exception& e) {
                    throw osassl::Error(std::string("spec: ") + e.what());
                }
            }();
            for (const auto& f : pl::stage("gen", [&] { return pl::generate_files(spec, out_dir); }))
                std::cout << f.string() << '\n';
            return 0;
        }
        const auto j = load_json(config_path, "config");
        auto [cfg, diags] = pl::parse_config(j, std::filesystem::path(config_path).parent_path());
        if (!diags.empty())
            return fail("config: " + join(diags));
        if (workers > 0)
            cfg.workers = workers;
        if (!out_dir.empty())
            cfg.output_dir = out_dir;
        const auto res = pl::run(cfg);
        for (const auto& f : res.files)
            std::cout << f.string() << '\n';
        return 0;
    } catch (const std::exception& e) {
        return fail(e.what());
    }
}
