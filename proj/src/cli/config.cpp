#include "mrcot/cli.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mrcot/ingest.hpp"
#include "mrcot/util.hpp"

namespace mrcot::cli {
namespace {

using nlohmann::json;

class Problems {
public:
    void add(const std::string& msg) { items_.push_back(msg); }

    bool empty() const { return items_.empty(); }

    [[noreturn]] void raise(const std::filesystem::path& path) const {
        std::ostringstream os;
        os << "invalid config " << path.string() << ":";
        for (const auto& item : items_) os << "\n  - " << item;
        throw std::runtime_error(os.str());
    }

private:
    std::vector<std::string> items_;
};

// Fetches section[key] when present, recording a problem if the type does
// not match. Returns fallback otherwise.
template <typename T>
T get_or(const json& section, const std::string& key, T fallback, Problems& problems,
         const std::string& where) {
    if (!section.contains(key)) return fallback;
    try {
        return section.at(key).get<T>();
    } catch (const json::exception&) {
        problems.add(where + "." + key + " has the wrong type");
        return fallback;
    }
}

std::string path_or(const json& section, const std::string& key, Problems& problems,
                    const std::string& where) {
    return get_or<std::string>(section, key, "", problems, where);
}

} // namespace

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path.string());

    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw std::runtime_error("config " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!root.is_object()) throw std::runtime_error("config " + path.string() + " must be a JSON object");

    Problems problems;
    Config cfg;
    cfg.config_path = path;
    cfg.raw = root;

    static const std::set<std::string> known = {
        "out_dir", "seed", "dataset", "provider", "scheme",
        "evaluate", "overlap", "heatmap", "toylab",
    };
    for (const auto& [key, value] : root.items()) {
        (void)value;
        if (!known.count(key)) problems.add("unknown top-level key: " + key);
    }

    cfg.out_dir = get_or<std::string>(root, "out_dir", "out", problems, "config");
    if (cfg.out_dir.empty()) problems.add("out_dir must not be empty");
    cfg.seed = get_or<std::uint64_t>(root, "seed", 1, problems, "config");

    if (root.contains("dataset")) {
        const json& d = root.at("dataset");
        if (!d.is_object()) {
            problems.add("dataset must be an object");
        } else {
            cfg.dataset_name = util::to_lower(get_or<std::string>(d, "name", "", problems, "dataset"));
            cfg.dataset_path = path_or(d, "path", problems, "dataset");
            cfg.dataset_train_path = path_or(d, "train_path", problems, "dataset");
            cfg.dataset_test_path = path_or(d, "test_path", problems, "dataset");
            if (d.contains("split_fraction")) {
                double f = get_or<double>(d, "split_fraction", 0.0, problems, "dataset");
                if (f <= 0.0 || f > 1.0) problems.add("dataset.split_fraction must be in (0, 1]");
                else cfg.split_fraction = f;
            }
            if (!cfg.dataset_name.empty()) {
                try {
                    ingest::dataset_from_name(cfg.dataset_name);
                } catch (const std::invalid_argument&) {
                    problems.add("dataset.name must be strategyqa, commonsenseqa, or truthfulqa");
                }
            }
            if (!cfg.dataset_train_path.empty() && cfg.dataset_test_path.empty())
                problems.add("dataset.test_path is required when dataset.train_path is set");
        }
    }

    if (root.contains("provider")) {
        const json& p = root.at("provider");
        if (!p.is_object()) {
            problems.add("provider must be an object");
        } else {
            cfg.base_url = get_or<std::string>(p, "base_url", "", problems, "provider");
            cfg.inference_model =
                get_or<std::string>(p, "inference_model", cfg.inference_model, problems, "provider");
            cfg.knowledge_model =
                get_or<std::string>(p, "knowledge_model", cfg.knowledge_model, problems, "provider");
            cfg.judge_model = get_or<std::string>(p, "judge_model", cfg.judge_model, problems, "provider");
            cfg.embed_model = get_or<std::string>(p, "embed_model", "", problems, "provider");
            cfg.temperature = get_or<double>(p, "temperature", cfg.temperature, problems, "provider");
            if (cfg.temperature < 0.0 || cfg.temperature > 2.0)
                problems.add("provider.temperature must be in [0, 2]");
            cfg.retry.max_attempts = get_or<int>(p, "max_attempts", cfg.retry.max_attempts, problems, "provider");
            if (cfg.retry.max_attempts < 1) problems.add("provider.max_attempts must be at least 1");
            cfg.retry.initial_delay_ms =
                get_or<int>(p, "initial_delay_ms", cfg.retry.initial_delay_ms, problems, "provider");
            if (cfg.retry.initial_delay_ms < 0) problems.add("provider.initial_delay_ms must be >= 0");
            cfg.retry.multiplier = get_or<double>(p, "multiplier", cfg.retry.multiplier, problems, "provider");
            if (cfg.retry.multiplier < 1.0) problems.add("provider.multiplier must be >= 1.0");
            cfg.retry.max_delay_ms = get_or<int>(p, "max_delay_ms", cfg.retry.max_delay_ms, problems, "provider");
            if (cfg.retry.max_delay_ms < cfg.retry.initial_delay_ms)
                problems.add("provider.max_delay_ms must be >= provider.initial_delay_ms");
            cfg.max_inflight = get_or<int>(p, "max_inflight", cfg.max_inflight, problems, "provider");
            if (cfg.max_inflight < 1) problems.add("provider.max_inflight must be at least 1");
            cfg.workers = get_or<int>(p, "workers", cfg.workers, problems, "provider");
            if (cfg.workers < 1) problems.add("provider.workers must be at least 1");
            cfg.connect_timeout_ms =
                get_or<int>(p, "connect_timeout_ms", cfg.connect_timeout_ms, problems, "provider");
            cfg.read_timeout_ms = get_or<int>(p, "read_timeout_ms", cfg.read_timeout_ms, problems, "provider");
            if (cfg.connect_timeout_ms < 1 || cfg.read_timeout_ms < 1)
                problems.add("provider timeouts must be positive");
        }
    }

    if (root.contains("scheme")) {
        const json& s = root.at("scheme");
        if (!s.is_object()) {
            problems.add("scheme must be an object");
        } else {
            int n_prefix = get_or<int>(s, "n_prefix", 3, problems, "scheme");
            int n_special = get_or<int>(s, "n_special", 4, problems, "scheme");
            if (n_prefix < 0 || n_prefix > 64) problems.add("scheme.n_prefix must be in [0, 64]");
            if (n_special < 0 || n_special > 64) problems.add("scheme.n_special must be in [0, 64]");
            cfg.scheme.n_prefix = std::max(n_prefix, 0);
            cfg.scheme.n_special = std::max(n_special, 0);
        }
    }

    if (root.contains("evaluate")) {
        const json& e = root.at("evaluate");
        if (!e.is_object()) problems.add("evaluate must be an object");
        else cfg.outputs_path = path_or(e, "outputs_path", problems, "evaluate");
    }

    if (root.contains("overlap")) {
        const json& o = root.at("overlap");
        if (!o.is_object()) problems.add("overlap must be an object");
        else {
            cfg.overlap_threshold = get_or<double>(o, "threshold", 0.2, problems, "overlap");
            if (cfg.overlap_threshold <= 0.0) problems.add("overlap.threshold must be positive");
        }
    }

    if (root.contains("heatmap")) {
        const json& h = root.at("heatmap");
        if (!h.is_object()) problems.add("heatmap must be an object");
        else cfg.attention_path = path_or(h, "attention_path", problems, "heatmap");
    }

    if (root.contains("toylab")) {
        const json& t = root.at("toylab");
        if (!t.is_object()) {
            problems.add("toylab must be an object");
        } else {
            cfg.toylab = t;
            cfg.toylab_mode = util::to_lower(get_or<std::string>(t, "mode", "train", problems, "toylab"));
            if (cfg.toylab_mode != "train" && cfg.toylab_mode != "ablate")
                problems.add("toylab.mode must be train or ablate");
        }
    }

    if (!problems.empty()) problems.raise(path);
    return cfg;
}

void apply_flags(Config& cfg, const CommonFlags& flags) {
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out) cfg.out_dir = *flags.out;
}

} // namespace mrcot::cli
