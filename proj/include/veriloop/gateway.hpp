#pragma once

#include <chrono>
#include <cstdlib>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "veriloop/prompt.hpp"
#include "veriloop/util.hpp"

namespace veriloop {

enum class BackendKind { HttpChat, Scripted };

struct ModelConfig {
    std::string name;
    BackendKind backend = BackendKind::HttpChat;
    std::string endpoint;
    std::string api_key_env;
    std::string auth_header = "Authorization";
    std::string auth_scheme = "Bearer"; // prepended to the key when non-empty
    long max_tokens = 0;
    double input_rate = 0.0;  // dollars per 1K input tokens
    double output_rate = 0.0; // dollars per 1K output tokens
    std::map<std::string, std::string> sampling; // passed through verbatim
    bool merge_system_into_user = false;
    bool completion_only = false;
    std::string script_name; // Scripted backend: directory name under the scripts root
};

enum class TokenSource { ProviderReported, Approximated };

struct LLMResponse {
    std::string text;
    long input_tokens = 0;
    long output_tokens = 0;
    TokenSource token_source = TokenSource::Approximated;
};

class gateway_error : public error {
public:
    using error::error;
};

class context_overflow_error : public gateway_error {
public:
    context_overflow_error(long estimated, long limit)
        : gateway_error("estimated prompt of " + std::to_string(estimated) +
                        " tokens does not fit the model limit of " + std::to_string(limit)),
          estimated(estimated), limit(limit) {}
    long estimated, limit;
};

class auth_missing_error : public gateway_error {
public:
    explicit auth_missing_error(const std::string& env)
        : gateway_error("environment variable not set: " + env), env_var(env) {}
    std::string env_var;
};

class provider_error : public gateway_error {
public:
    provider_error(int status, const std::string& body)
        : gateway_error("provider request failed with status " + std::to_string(status) +
                        ": " + body.substr(0, 300)),
          status(status), body(body) {}
    int status;
    std::string body;
};

class script_exhausted_error : public gateway_error {
public:
    using gateway_error::gateway_error;
};

// Token estimate used when the provider reports no usage: roughly four
// characters per token.
inline long estimate_tokens(std::string_view text) {
    return static_cast<long>((text.size() + 3) / 4);
}

inline long estimate_prompt_tokens(const std::vector<ChatMessage>& messages) {
    long total = 0;
    for (const auto& m : messages) total += estimate_tokens(m.content);
    return total;
}

// Per-model accumulator of calls and token counts. Dollar totals are derived
// from the token counts, never stored.
class CostLedger {
public:
    struct Entry {
        long calls = 0;
        long input_tokens = 0;
        long output_tokens = 0;
    };

    void add(const std::string& model_name, long input_tokens, long output_tokens) {
        std::lock_guard lock(mutex_);
        auto& e = entries_[model_name];
        e.calls += 1;
        e.input_tokens += input_tokens;
        e.output_tokens += output_tokens;
    }

    Entry get(const std::string& model_name) const {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(model_name);
        return it == entries_.end() ? Entry{} : it->second;
    }

    std::map<std::string, Entry> snapshot() const {
        std::lock_guard lock(mutex_);
        return entries_;
    }

private:
    mutable std::mutex mutex_;
    std::map<std::string, Entry> entries_;
};

inline double ledger_cost(const CostLedger& ledger, const ModelConfig& model) {
    auto e = ledger.get(model.name);
    return e.input_tokens / 1000.0 * model.input_rate + e.output_tokens / 1000.0 * model.output_rate;
}

inline double token_cost(long input_tokens, long output_tokens, const ModelConfig& model) {
    return input_tokens / 1000.0 * model.input_rate + output_tokens / 1000.0 * model.output_rate;
}

// Maps roles for the target provider. Providers without a native system role
// get the system text folded into the first user message, shrinking the list
// by exactly one.
inline std::vector<ChatMessage> map_roles(const std::vector<ChatMessage>& messages,
                                          const ModelConfig& model) {
    if (!model.merge_system_into_user || messages.empty() || messages[0].role != Role::System)
        return messages;
    std::vector<ChatMessage> out;
    out.reserve(messages.size() - 1);
    bool merged = false;
    for (size_t i = 1; i < messages.size(); i++) {
        ChatMessage m = messages[i];
        if (!merged && m.role == Role::User) {
            m.content = messages[0].content + "\n\n" + m.content;
            merged = true;
        }
        out.push_back(std::move(m));
    }
    if (!merged) out.insert(out.begin(), {Role::User, messages[0].content});
    return out;
}

// Completion-only adapter: the whole conversation as one prompt string.
inline std::string concat_completion_prompt(const std::vector<ChatMessage>& messages) {
    std::string prompt;
    for (const auto& m : messages) {
        if (!prompt.empty()) prompt += "\n\n";
        prompt += m.content;
    }
    return prompt;
}

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual LLMResponse complete(const std::vector<ChatMessage>& messages,
                                 const ModelConfig& model) = 0;

protected:
    // Shared pre-flight checks; throws before any provider traffic.
    static void check_request(const std::vector<ChatMessage>& messages, const ModelConfig& model) {
        if (messages.empty()) throw gateway_error("complete: no messages");
        if (messages[0].role != Role::System)
            throw gateway_error("complete: conversation must start with a System message");
        if (model.max_tokens > 0) {
            long estimated = estimate_prompt_tokens(messages);
            if (estimated >= model.max_tokens)
                throw context_overflow_error(estimated, model.max_tokens);
        }
    }
};

// Deterministic backend that replays canned responses in order. One instance
// serves exactly one attempt.
class ScriptedBackend : public ChatBackend {
public:
    explicit ScriptedBackend(std::vector<std::string> responses, CostLedger* ledger = nullptr)
        : queue_(responses.begin(), responses.end()), ledger_(ledger) {}

    static constexpr const char* kSeparator = "===RESPONSE===";

    // A directory of ordered files (000.txt, 001.txt, ...) or a single file
    // with ===RESPONSE=== separators.
    static ScriptedBackend from_path(const std::filesystem::path& path, CostLedger* ledger = nullptr) {
        namespace fs = std::filesystem;
        std::vector<std::string> responses;
        if (fs::is_directory(path)) {
            std::vector<fs::path> files;
            for (const auto& entry : fs::directory_iterator(path))
                if (entry.is_regular_file()) files.push_back(entry.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) responses.push_back(read_text_file(f));
        } else if (fs::is_regular_file(path)) {
            std::string text = read_text_file(path);
            size_t pos = 0;
            while (true) {
                size_t sep = text.find(kSeparator, pos);
                if (sep == std::string::npos) {
                    responses.push_back(trim(text.substr(pos)));
                    break;
                }
                responses.push_back(trim(text.substr(pos, sep - pos)));
                pos = sep + std::string(kSeparator).size();
            }
        } else {
            throw gateway_error("script path does not exist: " + path.string());
        }
        return ScriptedBackend(std::move(responses), ledger);
    }

    LLMResponse complete(const std::vector<ChatMessage>& messages, const ModelConfig& model) override {
        check_request(messages, model);
        if (queue_.empty()) throw script_exhausted_error("scripted response queue is empty");
        LLMResponse r;
        r.text = queue_.front();
        queue_.pop_front();
        r.input_tokens = estimate_prompt_tokens(messages);
        r.output_tokens = estimate_tokens(r.text);
        r.token_source = TokenSource::Approximated;
        if (ledger_) ledger_->add(model.name, r.input_tokens, r.output_tokens);
        return r;
    }

    size_t remaining() const { return queue_.size(); }

private:
    std::deque<std::string> queue_;
    CostLedger* ledger_;
};

namespace detail {

struct SplitUrl {
    std::string base; // scheme://host[:port]
    std::string path; // /v1/...
};

inline SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw gateway_error("endpoint has no scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

// Sampling values arrive as strings; emit numbers and booleans as such so
// providers see the native JSON type.
inline nlohmann::json sampling_value(const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    try {
        size_t used = 0;
        double d = std::stod(v, &used);
        if (used == v.size()) {
            if (d == static_cast<long long>(d) && v.find('.') == std::string::npos &&
                v.find('e') == std::string::npos && v.find('E') == std::string::npos)
                return static_cast<long long>(d);
            return d;
        }
    } catch (...) {}
    return v;
}

} // namespace detail

// Chat-completions HTTP client. Transient failures (connect errors, 429,
// 5xx) are retried with 1s/2s/4s backoff; anything else is a provider error.
class HttpChatBackend : public ChatBackend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit HttpChatBackend(CostLedger* ledger = nullptr, Sleeper sleeper = nullptr)
        : ledger_(ledger),
          sleeper_(sleeper ? std::move(sleeper)
                           : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {}

    LLMResponse complete(const std::vector<ChatMessage>& messages, const ModelConfig& model) override {
        check_request(messages, model);

        std::string api_key;
        if (!model.api_key_env.empty()) {
            const char* key = std::getenv(model.api_key_env.c_str());
            if (!key || !*key) throw auth_missing_error(model.api_key_env);
            api_key = key;
        }

        nlohmann::json body;
        body["model"] = model.name;
        if (model.completion_only) {
            body["prompt"] = concat_completion_prompt(map_roles(messages, model));
        } else {
            nlohmann::json jmessages = nlohmann::json::array();
            for (const auto& m : map_roles(messages, model))
                jmessages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
            body["messages"] = std::move(jmessages);
        }
        for (const auto& [k, v] : model.sampling) body[k] = detail::sampling_value(v);

        auto url = detail::split_url(model.endpoint);
        httplib::Headers headers = {{"Content-Type", "application/json"}};
        if (!api_key.empty()) {
            std::string value = model.auth_scheme.empty() ? api_key : model.auth_scheme + " " + api_key;
            headers.emplace(model.auth_header, value);
        }

        const std::chrono::milliseconds backoff[] = {std::chrono::seconds(1), std::chrono::seconds(2),
                                                     std::chrono::seconds(4)};
        std::string payload = body.dump();
        int last_status = 0;
        std::string last_body;
        for (int attempt = 0; attempt <= 3; attempt++) {
            if (attempt > 0) sleeper_(backoff[attempt - 1]);
            httplib::Client client(url.base);
            client.set_read_timeout(300, 0);
            client.set_connection_timeout(30, 0);
            auto res = client.Post(url.path, headers, payload, "application/json");
            if (!res) {
                last_status = 0;
                last_body = "connection failure: " + httplib::to_string(res.error());
                continue; // transient
            }
            last_status = res->status;
            last_body = res->body;
            if (res->status == 429 || res->status >= 500) continue; // transient
            if (res->status != 200) throw provider_error(res->status, res->body);
            return parse_response(res->body, messages, model);
        }
        throw provider_error(last_status, last_body);
    }

private:
    LLMResponse parse_response(const std::string& body, const std::vector<ChatMessage>& messages,
                               const ModelConfig& model) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            throw provider_error(200, std::string("unparseable response body: ") + e.what());
        }
        LLMResponse r;
        try {
            const auto& choice = j.at("choices").at(0);
            if (model.completion_only && choice.contains("text"))
                r.text = choice.at("text").get<std::string>();
            else
                r.text = choice.at("message").at("content").is_null()
                             ? ""
                             : choice.at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw provider_error(200, std::string("response lacks choices/content: ") + e.what());
        }
        if (j.contains("usage") && j["usage"].contains("prompt_tokens") &&
            j["usage"].contains("completion_tokens")) {
            r.input_tokens = j["usage"]["prompt_tokens"].get<long>();
            r.output_tokens = j["usage"]["completion_tokens"].get<long>();
            r.token_source = TokenSource::ProviderReported;
        } else {
            r.input_tokens = estimate_prompt_tokens(messages);
            r.output_tokens = estimate_tokens(r.text);
            r.token_source = TokenSource::Approximated;
        }
        if (ledger_) ledger_->add(model.name, r.input_tokens, r.output_tokens);
        return r;
    }

    CostLedger* ledger_;
    Sleeper sleeper_;
};

// Model definitions live in an INI-style file: one [section] per model,
// key = value lines, '#' or ';' comments. sampling.* keys pass through.
inline std::map<std::string, ModelConfig> load_model_configs(const std::filesystem::path& path) {
    std::map<std::string, ModelConfig> models;
    std::string text = read_text_file(path);
    auto lines = split_lines(text);
    std::string current;
    for (size_t i = 0; i < lines.size(); i++) {
        std::string line = trim(lines[i]);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[' && line.back() == ']') {
            current = trim(line.substr(1, line.size() - 2));
            if (current.empty())
                throw gateway_error("empty model section name at line " + std::to_string(i + 1));
            models[current].name = current;
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos || current.empty())
            throw gateway_error("malformed models line " + std::to_string(i + 1) + ": " + line);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        ModelConfig& m = models[current];
        if (key == "endpoint") m.endpoint = value;
        else if (key == "api_key_env") m.api_key_env = value;
        else if (key == "auth_header") m.auth_header = value;
        else if (key == "auth_scheme") m.auth_scheme = value;
        else if (key == "max_tokens") m.max_tokens = std::stol(value);
        else if (key == "input_rate") m.input_rate = std::stod(value);
        else if (key == "output_rate") m.output_rate = std::stod(value);
        else if (key == "backend") m.backend = value == "scripted" ? BackendKind::Scripted : BackendKind::HttpChat;
        else if (key == "merge_system_into_user") m.merge_system_into_user = value == "true";
        else if (key == "completion_only") m.completion_only = value == "true";
        else if (key.rfind("sampling.", 0) == 0) m.sampling[key.substr(9)] = value;
        else throw gateway_error("unknown models key '" + key + "' at line " + std::to_string(i + 1));
    }
    for (const auto& [name, m] : models) {
        if (m.max_tokens <= 0)
            throw gateway_error("model '" + name + "' needs max_tokens > 0");
        if (m.input_rate < 0 || m.output_rate < 0)
            throw gateway_error("model '" + name + "' has negative rates");
    }
    return models;
}

} // namespace veriloop
