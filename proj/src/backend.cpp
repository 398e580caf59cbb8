#include "atc/backend.hpp"

#include <cstdlib>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "atc/text.hpp"

namespace atc {

std::string_view to_string(Role role) noexcept {
    switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "user";
}

std::string Backend::complete(const std::vector<ChatMessage>& messages,
                              const GenerationParams& params) {
    if (messages.empty()) throw Error(errc::precondition, "messages must be non-empty");
    if (messages.front().role != Role::system) {
        throw Error(errc::precondition, "first message must have role system");
    }
    for (const ChatMessage& message : messages) {
        if (message.content.empty()) {
            throw Error(errc::precondition, "message content must be non-empty");
        }
    }
    return do_complete(messages, params);
}

// --- OracleBackend -------------------------------------------------------

OracleBackend::OracleBackend(std::map<std::string, AtcCode, std::less<>> gold_by_mention)
    : gold_(std::move(gold_by_mention)) {}

std::string OracleBackend::do_complete(const std::vector<ChatMessage>& messages,
                                       const GenerationParams&) {
    const ChatMessage* user = nullptr;
    for (const ChatMessage& message : messages) {
        if (message.role == Role::user) user = &message;
    }
    if (user == nullptr) throw Error(errc::precondition, "no user message in prompt");

    // The mention is quoted as `mention' in the prompt template.
    std::size_t open = user->content.find('`');
    std::size_t close = open == std::string::npos ? std::string::npos
                                                  : user->content.find('\'', open + 1);
    if (close == std::string::npos) {
        throw Error(errc::oracle_miss, "cannot locate the quoted mention in the prompt");
    }
    std::string mention = user->content.substr(open + 1, close - open - 1);

    auto gold_it = gold_.find(mention);
    if (gold_it == gold_.end()) {
        throw Error(errc::oracle_miss, "no gold label for mention '" + mention + "'");
    }
    const std::string& gold_text = gold_it->second.text();

    // Option lines are recognized by their leading code token before ':'.
    std::string matched_line;
    int hits = 0;
    for (std::string_view line : split_lines(user->content)) {
        std::string_view token = trim(line.substr(0, line.find(':')));
        std::optional<AtcCode> code;
        try {
            code = AtcCode::parse(token);
        } catch (const Error&) {
            continue; // not an option line
        }
        if (gold_text.starts_with(code->text())) {
            ++hits;
            matched_line = std::string(trim(line));
        }
    }
    if (hits == 0) {
        throw Error(errc::oracle_miss, "no option on the gold path for '" + mention +
                                           "' (gold " + gold_text + ")");
    }
    if (hits > 1) {
        throw Error(errc::oracle_miss, "multiple options on the gold path for '" + mention + "'");
    }
    return matched_line;
}

// --- AdversarialBackend --------------------------------------------------

AdversarialBackend::AdversarialBackend(std::vector<std::string> script)
    : script_(std::move(script)) {
    if (script_.empty()) throw Error(errc::precondition, "script must be non-empty");
}

int AdversarialBackend::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

std::string AdversarialBackend::do_complete(const std::vector<ChatMessage>&,
                                            const GenerationParams&) {
    std::lock_guard lock(mutex_);
    ++calls_;
    std::string reply = script_[cursor_];
    cursor_ = (cursor_ + 1) % script_.size();
    return reply;
}

// --- HttpChatBackend -----------------------------------------------------

struct HttpChatBackend::Impl {
    HttpBackendConfig config;
    std::string host;        // scheme://host[:port]
    std::string path_prefix; // e.g. "/v1", possibly empty
    std::string token;
    std::counting_semaphore<> in_flight;

    explicit Impl(HttpBackendConfig cfg)
        : config(std::move(cfg)), in_flight(std::max(config.max_in_flight, 1)) {
        std::string_view url = config.base_url;
        while (url.ends_with('/')) url.remove_suffix(1);
        if (!url.starts_with("http://") && !url.starts_with("https://")) {
            throw Error(errc::config_error,
                        "base URL must start with http:// or https://, got '" +
                            std::string(url) + "'");
        }
        std::size_t path_start = url.find('/', url.find("//") + 2);
        if (path_start == std::string_view::npos) {
            host = std::string(url);
        } else {
            host = std::string(url.substr(0, path_start));
            path_prefix = std::string(url.substr(path_start));
        }
        if (config.max_attempts < 1) {
            throw Error(errc::config_error, "max_attempts must be at least 1");
        }
        if (!config.token_env.empty()) {
            const char* value = std::getenv(config.token_env.c_str());
            if (value == nullptr || *value == '\0') {
                throw Error(errc::config_error,
                            "environment variable '" + config.token_env + "' is not set");
            }
            token = value;
        }
    }
};

HttpChatBackend::HttpChatBackend(HttpBackendConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpChatBackend::~HttpChatBackend() = default;

namespace {

bool retryable_status(int status) {
    return status == 429 || (status >= 500 && status < 600);
}

std::string extract_reply(const std::string& body) {
    nlohmann::json parsed = nlohmann::json::parse(body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty()) {
        throw Error(errc::server_error, "malformed chat-completions response: " + body);
    }
    const nlohmann::json& message = parsed["choices"][0]["message"];
    if (!message.contains("content") || !message["content"].is_string()) {
        throw Error(errc::server_error, "malformed chat-completions response: " + body);
    }
    return message["content"].get<std::string>();
}

} // namespace

std::string HttpChatBackend::do_complete(const std::vector<ChatMessage>& messages,
                                         const GenerationParams& params) {
    nlohmann::json body{
        {"model", params.model_id},
        {"messages", nlohmann::json::array()},
        {"temperature", params.temperature},
        {"seed", params.seed},
        {"max_tokens", params.max_output_tokens},
    };
    for (const ChatMessage& message : messages) {
        body["messages"].push_back(
            {{"role", to_string(message.role)}, {"content", message.content}});
    }
    const std::string payload = body.dump();
    const std::string path = impl_->path_prefix + "/chat/completions";

    impl_->in_flight.acquire();
    struct Release {
        std::counting_semaphore<>& sem;
        ~Release() { sem.release(); }
    } release{impl_->in_flight};

    httplib::Client client(impl_->host);
    client.set_connection_timeout(impl_->config.request_timeout);
    client.set_read_timeout(impl_->config.request_timeout);
    client.set_write_timeout(impl_->config.request_timeout);
    httplib::Headers headers;
    if (!impl_->token.empty()) {
        headers.emplace("Authorization", "Bearer " + impl_->token);
    }

    std::string last_failure;
    bool last_was_status = false;
    int last_status = 0;
    std::string last_body;
    auto backoff = impl_->config.initial_backoff;
    for (int attempt = 1; attempt <= impl_->config.max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        httplib::Result result = client.Post(path, headers, payload, "application/json");
        if (!result) {
            last_failure = httplib::to_string(result.error());
            last_was_status = false;
            continue;
        }
        if (result->status >= 200 && result->status < 300) {
            return extract_reply(result->body);
        }
        if (!retryable_status(result->status)) {
            throw Error(errc::server_error, "HTTP " + std::to_string(result->status) +
                                                " from " + impl_->host + path + ": " +
                                                result->body);
        }
        last_was_status = true;
        last_status = result->status;
        last_body = result->body;
    }
    if (last_was_status) {
        throw Error(errc::server_error,
                    "HTTP " + std::to_string(last_status) + " after " +
                        std::to_string(impl_->config.max_attempts) + " attempts: " + last_body);
    }
    throw Error(errc::transport_error, "request to " + impl_->host + path + " failed after " +
                                           std::to_string(impl_->config.max_attempts) +
                                           " attempts: " + last_failure);
}

} // namespace atc
