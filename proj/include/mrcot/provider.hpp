#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace mrcot::provider {

struct Message {
    std::string role; // "system", "user" or "assistant"
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<Message> messages;
    double temperature = 0.0;
};

struct ChatResponse {
    std::string content;
};

enum class ErrorKind {
    Auth,      // credential rejected; never retried
    Transient, // timeout / rate limit / server error after all retries
    Malformed, // response body did not match the expected shape
    Permanent, // any other client-side failure
};

class ProviderError : public std::exception {
public:
    ProviderError(ErrorKind kind, std::string message, std::optional<int> http_status = {});

    const char* what() const noexcept override { return message_.c_str(); }
    ErrorKind kind() const { return kind_; }
    std::optional<int> http_status() const { return http_status_; }

private:
    ErrorKind kind_;
    std::string message_;
    std::optional<int> http_status_;
};

/// Exponential backoff schedule. Delays never decrease from one attempt to
/// the next.
struct RetryPolicy {
    int max_attempts = 3;
    int initial_delay_ms = 200;
    double multiplier = 2.0;
    int max_delay_ms = 5000;

    /// Delay before retry number `retry` (1-based).
    int delay_ms(int retry) const;
};

/// Stable request fingerprint: hex SHA-256 over the model name and the
/// concatenated message contents. Mock fixtures are keyed by it.
std::string fingerprint(const ChatRequest& request);

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual ChatResponse chat(const ChatRequest& request) = 0;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

struct HttpConfig {
    std::string base_url; // e.g. "http://localhost:8080/v1"
    std::string api_key;
    RetryPolicy retry;
    int connect_timeout_ms = 5000;
    int read_timeout_ms = 60000;
    int max_inflight = 4;
};

/// Reads base URL and API key from PIPELINE_BASE_URL / PIPELINE_API_KEY when
/// the config fields are empty.
HttpConfig with_env_defaults(HttpConfig cfg);

/// Client for an OpenAI-compatible endpoint. POSTs {base}/chat/completions
/// and retries timeouts, 429 and 5xx responses per the policy; auth failures
/// surface immediately.
class HttpChatProvider : public ChatProvider {
public:
    explicit HttpChatProvider(HttpConfig cfg);
    ChatResponse chat(const ChatRequest& request) override;

private:
    HttpConfig cfg_;
    struct Gate;
    std::shared_ptr<Gate> gate_;
};

/// Client for {base}/embeddings with the same retry semantics.
class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(HttpConfig cfg, std::string model);
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

private:
    HttpConfig cfg_;
    std::string model_;
};

enum class MockFallback { Error, Echo };

/// Offline provider that answers from a fingerprint-keyed fixture map. With
/// the Echo fallback an unknown request returns its last user message, which
/// keeps pipelines running deterministically without fixtures.
class MockChatProvider : public ChatProvider {
public:
    MockChatProvider(std::map<std::string, std::string> responses, MockFallback fallback);

    /// Loads {dir}/{role}.json: {"fallback": "echo"|"error",
    /// "responses": {fingerprint: text}}. A missing file yields an empty
    /// Echo-fallback provider.
    static MockChatProvider from_dir(const std::filesystem::path& dir, const std::string& role);

    ChatResponse chat(const ChatRequest& request) override;

private:
    std::map<std::string, std::string> responses_;
    MockFallback fallback_;
};

/// Local fallback embedder: 256-bucket bag of hashed whitespace tokens,
/// L2-normalized. Deterministic across platforms.
class HashEmbedder : public Embedder {
public:
    static constexpr std::size_t kBuckets = 256;
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;
};

} // namespace mrcot::provider
