#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "atc/errors.hpp"
#include "atc/ontology.hpp"

namespace atc {

enum class Role { system, user, assistant };

std::string_view to_string(Role role) noexcept;

struct ChatMessage {
    Role role;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct GenerationParams {
    double temperature = 0.1;
    int seed = 42;
    int max_output_tokens = 256;
    std::string model_id;
};

/// Chat-completion interface. Implementations must be safe to call from
/// multiple threads concurrently.
class Backend {
public:
    virtual ~Backend() = default;

    /// Returns the reply text. Requires a non-empty message list whose
    /// first message has role system and whose contents are non-empty;
    /// violations throw Error{precondition}. Never mutates its inputs.
    std::string complete(const std::vector<ChatMessage>& messages,
                         const GenerationParams& params);

private:
    virtual std::string do_complete(const std::vector<ChatMessage>& messages,
                                    const GenerationParams& params) = 0;
};

/// Test backend that always answers with the option lying on the gold
/// path for the mention named in the prompt. Lets the whole pipeline run
/// without network access; a miss signals a traversal bug or a wrong
/// gold label.
class OracleBackend final : public Backend {
public:
    explicit OracleBackend(std::map<std::string, AtcCode, std::less<>> gold_by_mention);

private:
    std::string do_complete(const std::vector<ChatMessage>& messages,
                            const GenerationParams& params) override;

    std::map<std::string, AtcCode, std::less<>> gold_;
};

/// Test backend replaying a fixed script; the cursor wraps around when
/// the script is exhausted.
class AdversarialBackend final : public Backend {
public:
    explicit AdversarialBackend(std::vector<std::string> script);

    /// Number of complete() calls served so far.
    int calls() const;

private:
    std::string do_complete(const std::vector<ChatMessage>& messages,
                            const GenerationParams& params) override;

    std::vector<std::string> script_;
    std::size_t cursor_ = 0;
    int calls_ = 0;
    mutable std::mutex mutex_;
};

struct HttpBackendConfig {
    /// "http://host:port" or "https://host[:port]", optionally with a
    /// path prefix such as "/v1". Requests go to
    /// {base_url}/chat/completions.
    std::string base_url;

    /// Name of the environment variable holding the bearer token; empty
    /// means no Authorization header. Tokens are never taken from files
    /// or flags.
    std::string token_env;

    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    int max_in_flight = 4;
    std::chrono::seconds request_timeout{120};
};

/// Client for OpenAI-compatible chat-completions servers. Transient
/// failures (transport errors, 429, 5xx) are retried with exponential
/// backoff up to max_attempts; other non-2xx statuses fail immediately
/// with Error{server_error}. At most max_in_flight requests run
/// concurrently.
class HttpChatBackend final : public Backend {
public:
    explicit HttpChatBackend(HttpBackendConfig config);
    ~HttpChatBackend() override;

    HttpChatBackend(const HttpChatBackend&) = delete;
    HttpChatBackend& operator=(const HttpChatBackend&) = delete;

private:
    std::string do_complete(const std::vector<ChatMessage>& messages,
                            const GenerationParams& params) override;

    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace atc
