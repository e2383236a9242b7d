// Command line front end for the chain-of-thought pipeline toolkit.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mrcot/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Memory/reason disentangled chain-of-thought pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    mrcot::cli::CommonFlags flags;

    for (const auto& name : mrcot::cli::command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "Run configuration file")->required();
        std::uint64_t seed = 0;
        std::string out;
        std::size_t limit = 0;
        std::string mock;
        sub->add_option("--seed", seed, "Override the config seed")
            ->each([&flags](const std::string& v) { flags.seed = std::stoull(v); });
        sub->add_option("--out", out, "Override the output directory")
            ->each([&flags](const std::string& v) { flags.out = v; });
        sub->add_option("--limit", limit, "Process at most N records")
            ->each([&flags](const std::string& v) { flags.limit = std::stoull(v); });
        sub->add_option("--mock", mock, "Answer provider calls from this fixtures directory")
            ->each([&flags](const std::string& v) { flags.mock = v; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    auto* sub = app.get_subcommands().front();
    try {
        auto cfg = mrcot::cli::load_config(config_path);
        mrcot::cli::apply_flags(cfg, flags);
        return mrcot::cli::run_command(sub->get_name(), cfg, flags);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
