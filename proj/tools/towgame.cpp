// towgame: runs one experiment from a JSON config and writes its outputs.
//
//   towgame <solve|simulate|converge|compare|regularity|boundary|stopping-time|expansion>
//           --config cfg.json --out dir [--seed N] [--threads N]
//
// Exit status: 0 when every assertion of the run passes, 1 when one fails
// (see failures.json), 2 for invalid input or runtime errors.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "towgame/towgame.hpp"

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_error(const fs::path& dir, const std::string& experiment, const std::string& message) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    nlohmann::json report = {{"version", towgame::kVersion}, {"experiment", experiment}, {"error", message}};
    std::ofstream out(dir / "failures.json");
    if (out) out << report.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tug-of-war with noise and running discount: DPP solver and game experiments"};
    app.set_version_flag("--version", std::string("towgame ") + towgame::kVersion);
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    int threads = 1;

    const char* kinds[] = {"solve", "simulate", "converge", "compare", "regularity", "boundary", "stopping-time", "expansion"};
    for (const char* kind : kinds) {
        auto* sub = app.add_subcommand(kind, std::string("run the ") + kind + " experiment");
        sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--threads", threads, "worker threads, 0 for all cores")->check(CLI::NonNegativeNumber);
    }
    CLI11_PARSE(app, argc, argv);

    const std::string kind = app.get_subcommands().front()->get_name();
    const fs::path out(out_dir);
    try {
        std::ifstream in(config_path);
        const auto user = nlohmann::json::parse(in);
        auto cfg = towgame::ExperimentConfig::from_json(user, towgame::experiment_kind_from_string(kind),
                                                        fs::path(config_path).parent_path().string());
        if (seed) cfg.set_seed(*seed);

        const auto result = towgame::run_experiment(cfg, threads);
        fs::create_directories(out);
        fs::remove(out / "failures.json");
        for (const auto& [name, text] : result.files) write_text(out / name, text);
        write_text(out / "timing.json", result.timing.dump(2) + "\n");

        for (const auto& a : result.assertions)
            std::printf("%s %s\n", a.passed ? "PASS" : "FAIL", a.name.c_str());
        std::printf("%s: %s (config %s, seed %llu)\n", kind.c_str(), result.passed() ? "passed" : "FAILED",
                    cfg.config_hash().c_str(), static_cast<unsigned long long>(cfg.seed));
        return result.passed() ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "towgame %s: %s\n", kind.c_str(), e.what());
        write_error(out, kind, e.what());
        return 2;
    }
}
