#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrcot/provider.hpp"
#include "mrcot/tokenscheme.hpp"

namespace mrcot::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Parsed and validated run configuration. Field groups mirror the config
/// file sections; see the README for the file format.
struct Config {
    std::filesystem::path config_path;
    std::filesystem::path out_dir;
    std::uint64_t seed = 1;

    // dataset
    std::string dataset_name; // strategyqa | commonsenseqa | truthfulqa
    std::filesystem::path dataset_path;
    std::filesystem::path dataset_train_path; // optional predefined split
    std::filesystem::path dataset_test_path;
    std::optional<double> split_fraction;

    // provider
    std::string base_url;
    std::string inference_model = "inference-model";
    std::string knowledge_model = "knowledge-model";
    std::string judge_model = "judge-model";
    std::string embed_model; // empty selects the local hash embedder
    double temperature = 0.7;
    provider::RetryPolicy retry;
    int max_inflight = 4;
    int workers = 4;
    int connect_timeout_ms = 5000;
    int read_timeout_ms = 60000;

    tokens::TokenScheme scheme{3, 4};

    std::filesystem::path outputs_path; // optional model outputs for evaluation
    double overlap_threshold = 0.2;
    std::filesystem::path attention_path;

    // toylab
    std::string toylab_mode = "train"; // train | ablate
    nlohmann::json toylab; // raw section, applied onto the run config

    nlohmann::json raw;
};

/// Loads a config file, applying defaults. Collects every problem found and
/// throws a single error listing all of them.
Config load_config(const std::filesystem::path& path);

struct CommonFlags {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::optional<std::size_t> limit;
    std::optional<std::filesystem::path> mock; // fixtures dir; enables mock providers
};

/// Applies flag overrides onto the loaded config.
void apply_flags(Config& cfg, const CommonFlags& flags);

/// Runs one subcommand. Returns the process exit code and reports problems
/// on stderr.
int run_command(const std::string& command, Config& cfg, const CommonFlags& flags);

/// All subcommand names in dispatch order.
const std::vector<std::string>& command_names();

} // namespace mrcot::cli
