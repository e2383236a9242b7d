#include "mrcot/provider.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "mrcot/sha256.hpp"
#include "mrcot/util.hpp"

namespace mrcot::provider {

using nlohmann::json;

ProviderError::ProviderError(ErrorKind kind, std::string message, std::optional<int> http_status)
    : kind_(kind), message_(std::move(message)), http_status_(http_status) {}

int RetryPolicy::delay_ms(int retry) const {
    double mult = std::max(1.0, multiplier);
    double d = initial_delay_ms * std::pow(mult, retry - 1);
    d = std::min(d, static_cast<double>(max_delay_ms));
    return static_cast<int>(std::max(0.0, d));
}

std::string fingerprint(const ChatRequest& request) {
    util::Sha256 h;
    h.update(request.model);
    h.update("\n");
    for (const Message& m : request.messages) {
        h.update(m.content);
        h.update("\n");
    }
    return h.hex_digest();
}

HttpConfig with_env_defaults(HttpConfig cfg) {
    if (cfg.base_url.empty()) {
        if (const char* v = std::getenv("PIPELINE_BASE_URL")) cfg.base_url = v;
    }
    if (cfg.api_key.empty()) {
        if (const char* v = std::getenv("PIPELINE_API_KEY")) cfg.api_key = v;
    }
    return cfg;
}

namespace {

/// Splits "http://host:port/v1" into the client origin and a path prefix.
struct ParsedUrl {
    std::string origin;
    std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& base_url) {
    std::string url = base_url;
    while (!url.empty() && url.back() == '/') url.pop_back();
    std::size_t scheme = url.find("://");
    std::size_t path_start =
        url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) return {url, ""};
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) {
    return status == 408 || status == 429 || status >= 500;
}

/// POSTs a JSON body and applies the retry policy. Returns the parsed
/// response body.
json post_json(const HttpConfig& cfg, const std::string& endpoint, const json& body) {
    if (cfg.base_url.empty()) {
        throw ProviderError(ErrorKind::Permanent,
                            "no base URL configured (set provider.base_url or PIPELINE_BASE_URL)");
    }
    ParsedUrl url = parse_base_url(cfg.base_url);
    std::string payload = body.dump();
    std::string path = url.path_prefix + endpoint;

    std::string last_error;
    int attempts = std::max(1, cfg.retry.max_attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        httplib::Client client(url.origin);
        client.set_connection_timeout(cfg.connect_timeout_ms / 1000,
                                      (cfg.connect_timeout_ms % 1000) * 1000);
        client.set_read_timeout(cfg.read_timeout_ms / 1000, (cfg.read_timeout_ms % 1000) * 1000);
        httplib::Headers headers;
        if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "network error: " + httplib::to_string(res.error());
        } else if (res->status == 401 || res->status == 403) {
            throw ProviderError(ErrorKind::Auth,
                                "authentication rejected (" + std::to_string(res->status) + ")",
                                res->status);
        } else if (res->status == 200) {
            try {
                return json::parse(res->body);
            } catch (const json::exception& e) {
                throw ProviderError(ErrorKind::Malformed,
                                    std::string("response is not valid JSON: ") + e.what(),
                                    res->status);
            }
        } else if (retryable_status(res->status)) {
            last_error = "HTTP " + std::to_string(res->status);
        } else {
            throw ProviderError(ErrorKind::Permanent,
                                "HTTP " + std::to_string(res->status) + ": " + res->body,
                                res->status);
        }
        if (attempt < attempts) {
            std::this_thread::sleep_for(std::chrono::milliseconds(cfg.retry.delay_ms(attempt)));
        }
    }
    throw ProviderError(ErrorKind::Transient,
                        "request failed after " + std::to_string(attempts) +
                            " attempts: " + last_error);
}

} // namespace

struct HttpChatProvider::Gate {
    std::mutex mutex;
    std::condition_variable cv;
    int available = 0;

    explicit Gate(int slots) : available(slots) {}

    void acquire() {
        std::unique_lock<std::mutex> lock(mutex);
        cv.wait(lock, [&] { return available > 0; });
        --available;
    }
    void release() {
        {
            std::lock_guard<std::mutex> lock(mutex);
            ++available;
        }
        cv.notify_one();
    }
};

HttpChatProvider::HttpChatProvider(HttpConfig cfg)
    : cfg_(with_env_defaults(std::move(cfg))),
      gate_(std::make_shared<Gate>(std::max(1, cfg_.max_inflight))) {}

ChatResponse HttpChatProvider::chat(const ChatRequest& request) {
    json messages = json::array();
    for (const Message& m : request.messages) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    json body{{"model", request.model},
              {"messages", std::move(messages)},
              {"temperature", request.temperature}};

    gate_->acquire();
    struct Release {
        Gate* g;
        ~Release() { g->release(); }
    } release{gate_.get()};

    json res = post_json(cfg_, "/chat/completions", body);
    try {
        return {res.at("choices").at(0).at("message").at("content").get<std::string>()};
    } catch (const json::exception& e) {
        throw ProviderError(ErrorKind::Malformed,
                            std::string("unexpected chat completion shape: ") + e.what());
    }
}

HttpEmbedder::HttpEmbedder(HttpConfig cfg, std::string model)
    : cfg_(with_env_defaults(std::move(cfg))), model_(std::move(model)) {}

std::vector<std::vector<double>> HttpEmbedder::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) return {};
    json body{{"model", model_}, {"input", texts}};
    json res = post_json(cfg_, "/embeddings", body);
    try {
        std::vector<std::vector<double>> out(texts.size());
        for (const json& item : res.at("data")) {
            auto index = item.at("index").get<std::size_t>();
            out.at(index) = item.at("embedding").get<std::vector<double>>();
        }
        for (const auto& v : out) {
            if (v.empty()) {
                throw ProviderError(ErrorKind::Malformed, "embedding response missing an input");
            }
        }
        return out;
    } catch (const json::exception& e) {
        throw ProviderError(ErrorKind::Malformed,
                            std::string("unexpected embeddings shape: ") + e.what());
    }
}

MockChatProvider::MockChatProvider(std::map<std::string, std::string> responses,
                                   MockFallback fallback)
    : responses_(std::move(responses)), fallback_(fallback) {}

MockChatProvider MockChatProvider::from_dir(const std::filesystem::path& dir,
                                            const std::string& role) {
    std::filesystem::path file = dir / (role + ".json");
    if (!std::filesystem::exists(file)) return MockChatProvider({}, MockFallback::Echo);
    json spec = json::parse(util::read_file(file));
    std::map<std::string, std::string> responses;
    if (spec.contains("responses")) {
        for (const auto& [key, value] : spec.at("responses").items()) {
            responses[key] = value.get<std::string>();
        }
    }
    MockFallback fallback = MockFallback::Echo;
    if (spec.value("fallback", "echo") == "error") fallback = MockFallback::Error;
    return MockChatProvider(std::move(responses), fallback);
}

ChatResponse MockChatProvider::chat(const ChatRequest& request) {
    auto it = responses_.find(fingerprint(request));
    if (it != responses_.end()) return {it->second};
    if (fallback_ == MockFallback::Error) {
        throw ProviderError(ErrorKind::Permanent,
                            "no mock fixture for fingerprint " + fingerprint(request));
    }
    for (auto rit = request.messages.rbegin(); rit != request.messages.rend(); ++rit) {
        if (rit->role == "user") return {rit->content};
    }
    return {""};
}

std::vector<std::vector<double>> HashEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const std::string& text : texts) {
        std::vector<double> v(kBuckets, 0.0);
        std::size_t pos = 0;
        while (pos < text.size()) {
            while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
            std::size_t start = pos;
            while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
            if (pos > start) {
                // FNV-1a over the token bytes; stable everywhere.
                std::uint64_t h = 14695981039346656037ull;
                for (std::size_t i = start; i < pos; ++i) {
                    h ^= static_cast<unsigned char>(text[i]);
                    h *= 1099511628211ull;
                }
                v[h % kBuckets] += 1.0;
            }
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (double& x : v) x /= norm;
        }
        out.push_back(std::move(v));
    }
    return out;
}

} // namespace mrcot::provider
