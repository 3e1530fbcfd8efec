#include "detox/pipeline/cli.hpp"

#include <chrono>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "detox/pipeline/config.hpp"
#include "detox/pipeline/run_dir.hpp"
#include "detox/pipeline/stages.hpp"

namespace detox::pipeline {

namespace {

struct CommonFlags {
    std::string config;
    std::string run_dir;
    std::optional<std::uint64_t> stage_seed;
};

int fail(const std::string& stage, const std::string& type, const std::string& message, int code,
         nlohmann::ordered_json extra = nlohmann::ordered_json::object()) {
    nlohmann::ordered_json err;
    err["type"] = type;
    err["stage"] = stage;
    err["message"] = message;
    for (auto& [k, v] : extra.items()) err[k] = v;
    std::cerr << nlohmann::ordered_json{{"error", err}}.dump() << std::endl;
    return code;
}

int execute(const std::string& stage, const CommonFlags& flags, const StageOptions& options) {
    try {
        const auto cfg = load_config(flags.config);
        std::filesystem::path root;
        if (!flags.run_dir.empty()) {
            root = flags.run_dir;
        } else if (cfg.paths.run_dir) {
            root = *cfg.paths.run_dir;
        } else {
            throw ConfigError("no run directory: pass --run-dir or set paths.run_dir");
        }
        const RunDir run(root);
        const RunLock lock(run.root());
        const std::uint64_t seed = flags.stage_seed.value_or(derive_stage_seed(cfg.seed, stage));

        const auto t0 = std::chrono::steady_clock::now();
        auto rec = run_stage(stage, StageContext{cfg, run, seed, options});
        rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        run.record(rec, cfg.resolved);

        nlohmann::ordered_json ok{{"stage", stage}, {"status", "ok"}, {"seed", seed}};
        nlohmann::ordered_json outs = nlohmann::ordered_json::array();
        for (const auto& p : rec.outputs) outs.push_back(p.lexically_relative(run.root()).string());
        ok["outputs"] = outs;
        std::cout << ok.dump() << std::endl;
        return 0;
    } catch (const MissingArtifactError& e) {
        return fail(stage, "missing_artifact", e.what(), 3,
                    {{"path", e.path().string()}, {"expected_producer", e.producer()}});
    } catch (const ConfigError& e) {
        return fail(stage, "config", e.what(), 2);
    } catch (const FormatError& e) {
        return fail(stage, "format", e.what(), 1);
    } catch (const IoError& e) {
        return fail(stage, "io", e.what(), 1);
    } catch (const TrainingError& e) {
        return fail(stage, "training", e.what(), 1);
    } catch (const BackendError& e) {
        return fail(stage, "backend", e.what(), 1);
    } catch (const std::exception& e) {
        return fail(stage, "internal", e.what(), 1);
    }
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Multilingual text detoxification pipeline: augment, filter, mix, train, decode, rerank, align, evaluate"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    CommonFlags flags;
    StageOptions options;
    std::string selected;

    for (const auto& name : stage_names()) {
        auto* sub = app.add_subcommand(name, "run the '" + name + "' stage");
        sub->add_option("--config", flags.config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--run-dir", flags.run_dir, "run directory (overrides paths.run_dir)");
        sub->add_option("--stage-seed", flags.stage_seed, "seed for this stage (default: root seed + stage hash)");
        if (name == "generate" || name == "rerank") {
            sub->add_option("--split", options.split, "input split")->check(CLI::IsMember({"orpo", "eval"}));
        }
        if (name == "generate" || name == "rerank" || name == "evaluate") {
            sub->add_option("--model", options.model, "model to use")->check(CLI::IsMember({"sft", "orpo"}));
        }
        if (name == "evaluate") sub->add_option("--system", options.system, "leaderboard row name (default: model)");
        if (name == "report") {
            sub->add_option("--include", options.include_reports, "extra report JSON files")->check(CLI::ExistingFile);
        }
        sub->callback([&selected, name] { selected = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(selected, "usage", e.what(), 2);
    }
    return execute(selected, flags, options);
}

}  // namespace detox::pipeline
