#pragma once

// Model-call boundary. A provider turns a request into raw text; `call`
// parses and validates it against the request's schema, re-asking with the
// validator's message appended up to `retries` times.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "car/memory.hpp"
#include "car/schema.hpp"

namespace car {

struct ProviderRequest {
    std::string stage_tag;  // stage1, stage3_critique, ...
    std::string scene_id;
    std::string prompt;
    std::vector<std::string> images;
    // Structured inputs (programs, issue lists) that the prompt also renders.
    json attachments = json::object();
    std::string response_schema;
    int iteration = 0;
    int attempt = 0;
};

struct ProviderResponse {
    json payload;
    std::string raw;
    json usage = json::object();
    int attempts = 1;
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string id() const = 0;
    /// Raw model output for one attempt. Throws TransportError on I/O failure.
    virtual std::string complete(const ProviderRequest& request) = 0;
};

inline constexpr int kDefaultRetries = 2;

inline ProviderResponse call(Provider& provider, ProviderRequest request, int retries = kDefaultRetries) {
    const json& schema = schema_for(request.response_schema);
    std::string error;
    const std::string base_prompt = request.prompt;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        request.attempt = attempt;
        if (attempt > 0)
            request.prompt = base_prompt + "\n\nYour previous reply was rejected: " + error +
                             "\nReply again with JSON that satisfies the schema.";
        std::string raw = provider.complete(request);
        json payload;
        try {
            payload = json::parse(raw);
        } catch (const json::exception& e) {
            error = std::string("reply is not valid JSON (") + e.what() + ")";
            continue;
        }
        if (auto err = check_schema(payload, schema)) {
            error = *err;
            continue;
        }
        return {std::move(payload), std::move(raw), {{"provider", provider.id()}}, attempt + 1};
    }
    throw SchemaError(request.stage_tag + ": " + request.response_schema + " schema violation after " +
                      std::to_string(retries + 1) + " attempts: " + error);
}

/// Replays fixture payloads from `<root>/<scene>/<stage_tag>.json`. A file
/// holding {"__sequence__": [...]} answers iteration t with element t (the
/// last one once exhausted); {"__attempts__": [...]} does the same per retry
/// attempt.
class ScriptedProvider final : public Provider {
public:
    explicit ScriptedProvider(std::filesystem::path root) : root_(std::move(root)) {}

    std::string id() const override { return "scripted"; }

    std::string complete(const ProviderRequest& request) override {
        const auto path = root_ / request.scene_id / (request.stage_tag + ".json");
        std::string text;
        try {
            text = read_text(path);
        } catch (const LoadError&) {
            throw TransportError("scripted provider has no fixture " + path.string());
        }
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception&) {
            return text;  // handed to the validator as-is
        }
        j = select(j, "__sequence__", request.iteration);
        j = select(j, "__attempts__", request.attempt);
        return j.dump();
    }

private:
    static json select(const json& j, const char* key, int index) {
        if (!j.is_object() || !j.contains(key) || !j[key].is_array() || j[key].empty()) return j;
        const auto& seq = j[key];
        return seq[std::min<std::size_t>(static_cast<std::size_t>(std::max(index, 0)), seq.size() - 1)];
    }

    std::filesystem::path root_;
};

/// Provider backed by a callable; used by simulations and tests.
class FunctionProvider final : public Provider {
public:
    using Fn = std::function<std::string(const ProviderRequest&)>;
    FunctionProvider(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
    std::string id() const override { return name_; }
    std::string complete(const ProviderRequest& request) override { return fn_(request); }

private:
    std::string name_;
    Fn fn_;
};

// ---------------------------------------------------------------------------
// Prompt templates: text resources with {{slot}} placeholders.

inline std::string render_template(std::string_view text, const std::map<std::string, std::string>& slots) {
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto open = text.find("{{", i);
        if (open == std::string_view::npos) {
            out.append(text.substr(i));
            break;
        }
        const auto close = text.find("}}", open + 2);
        if (close == std::string_view::npos) throw ConfigError("unterminated template slot");
        out.append(text.substr(i, open - i));
        const std::string name(text.substr(open + 2, close - open - 2));
        const auto it = slots.find(name);
        if (it == slots.end()) throw ConfigError("template slot '" + name + "' has no value");
        out.append(it->second);
        i = close + 2;
    }
    return out;
}

class PromptLibrary {
public:
    explicit PromptLibrary(std::filesystem::path dir) : dir_(std::move(dir)) {}

    std::string render(const std::string& stage_tag, const std::map<std::string, std::string>& slots) const {
        const auto path = dir_ / (stage_tag + ".txt");
        std::string text;
        try {
            text = read_text(path);
        } catch (const LoadError&) {
            throw ConfigError("missing prompt template " + path.string());
        }
        return render_template(text, slots);
    }

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Provider configuration file:
//   {"provider": "scripted", "fixtures": "<dir>"}
//   {"provider": "http", "endpoint": "...", "model": "...",
//    "api_key_env": "CAR_API_KEY", "temperature": 0, "timeout_s": 120}

struct ProviderConfig {
    std::string kind = "scripted";
    std::filesystem::path fixtures;
    std::string endpoint;
    std::string model;
    std::string api_key_env = "CAR_API_KEY";
    double temperature = 0.0;
    int timeout_s = 120;
    int retries = kDefaultRetries;
};

inline ProviderConfig provider_config_from_json(const json& j, const std::filesystem::path& base = ".") {
    if (!j.is_object()) throw ConfigError("provider config must be a JSON object");
    ProviderConfig c;
    try {
        c.kind = j.value("provider", c.kind);
        if (j.contains("fixtures")) c.fixtures = base / j["fixtures"].get<std::string>();
        c.endpoint = j.value("endpoint", c.endpoint);
        c.model = j.value("model", c.model);
        c.api_key_env = j.value("api_key_env", c.api_key_env);
        c.temperature = j.value("temperature", c.temperature);
        c.timeout_s = j.value("timeout_s", c.timeout_s);
        c.retries = j.value("retries", c.retries);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("provider config: ") + e.what());
    }
    if (c.kind != "scripted" && c.kind != "http") throw ConfigError("provider config: unknown provider '" + c.kind + "'");
    if (c.kind == "http" && (c.endpoint.empty() || c.model.empty()))
        throw ConfigError("provider config: http provider needs endpoint and model");
    if (c.retries < 0) throw ConfigError("provider config: retries must be non-negative");
    return c;
}

inline ProviderConfig load_provider_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_text(path);
    } catch (const LoadError& e) {
        throw ConfigError(e.what());
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return provider_config_from_json(j, path.parent_path());
}

}  // namespace car
