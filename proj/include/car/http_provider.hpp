#pragma once

// Live provider speaking the OpenAI-compatible chat completions protocol.
// Define CPPHTTPLIB_OPENSSL_SUPPORT before including for https endpoints.

#include <cstdlib>

#include <httplib.h>

#include "car/providers.hpp"

namespace car {

class HttpProvider final : public Provider {
public:
    explicit HttpProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {
        const auto scheme = cfg_.endpoint.find("://");
        if (scheme == std::string::npos) throw ConfigError("http provider: endpoint must be a full URL");
        const auto slash = cfg_.endpoint.find('/', scheme + 3);
        host_ = cfg_.endpoint.substr(0, slash);
        path_ = slash == std::string::npos ? "/v1/chat/completions" : cfg_.endpoint.substr(slash);
    }

    std::string id() const override { return "http:" + cfg_.model; }

    std::string complete(const ProviderRequest& request) override {
        json content = json::array();
        content.push_back({{"type", "text"}, {"text", request.prompt}});
        for (const auto& image : request.images) {
            std::string bytes;
            try {
                bytes = read_text(image);
            } catch (const LoadError& e) {
                throw TransportError(e.what());
            }
            content.push_back({{"type", "image_url"},
                               {"image_url", {{"url", "data:image/png;base64," + httplib::detail::base64_encode(bytes)}}}});
        }
        const json body{
            {"model", cfg_.model},
            {"temperature", cfg_.temperature},
            {"response_format", {{"type", "json_object"}}},
            {"messages",
             json::array({{{"role", "system"},
                           {"content", "Reply with a single JSON value matching this schema:\n" +
                                           schema_for(request.response_schema).dump()}},
                          {{"role", "user"}, {"content", content}}})}};

        httplib::Client client(host_);
        client.set_connection_timeout(cfg_.timeout_s);
        client.set_read_timeout(cfg_.timeout_s);
        httplib::Headers headers;
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);
        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res) throw TransportError(request.stage_tag + ": request to " + host_ + " failed: " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw TransportError(request.stage_tag + ": HTTP " + std::to_string(res->status) + " from " + host_);
        try {
            const json reply = json::parse(res->body);
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw TransportError(request.stage_tag + ": malformed completion envelope: " + e.what());
        }
    }

private:
    ProviderConfig cfg_;
    std::string host_;
    std::string path_;
};

}  // namespace car
