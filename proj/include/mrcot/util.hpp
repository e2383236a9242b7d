#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace mrcot::util {

using json = nlohmann::json;

// ---- strings ---------------------------------------------------------------

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);
bool contains_ci(std::string_view haystack, std::string_view needle);
std::vector<std::string> split_lines(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

/// Collapses runs of whitespace (including newlines) to single spaces and
/// trims the ends. Used when comparing rendered prompts against golden files.
std::string normalize_ws(std::string_view s);

/// Fixed-precision decimal formatting, locale independent.
std::string format_double(double v, int decimals);

// ---- files -----------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::vector<json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);
std::string jsonl_to_string(const std::vector<json>& rows);

// ---- randomness ------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t& state);

/// Derives an independent stream seed from a base seed and a stream index.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Seeded RNG wrapper with explicitly specified sampling algorithms so that
/// identical seeds give identical results on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    /// Uniform integer in [0, n), n > 0. Uses rejection sampling.
    std::uint64_t below(std::uint64_t n);
    /// Uniform double in [0, 1).
    double uniform();
    /// Normal(0, stddev) via Box-Muller.
    double normal(double stddev);
    /// Fisher-Yates shuffle with this generator.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }
    /// Identity permutation of size n, shuffled.
    std::vector<std::size_t> permutation(std::size_t n);

    std::uint64_t next();

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// ---- concurrency -----------------------------------------------------------

/// Runs fn(i) for i in [0, n) on at most `workers` threads. Results must be
/// written to preallocated slots indexed by i; the function itself returns
/// once all indices are processed. Exceptions are collected and the first one
/// is rethrown.
void parallel_for_indexed(std::size_t n, std::size_t workers,
                          const std::function<void(std::size_t)>& fn);

} // namespace mrcot::util
