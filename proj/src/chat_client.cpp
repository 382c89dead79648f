// SPDX-License-Identifier: Apache-2.0
#include <symlat/chat_client.hpp>
#include <symlat/errors.hpp>

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace symlat
{

MockChatClient::MockChatClient(std::vector<MockTurn> turns): turns_(std::move(turns))
{
}

MockChatClient MockChatClient::from_jsonl(std::string_view text)
{
    auto turns = std::vector<MockTurn>();
    auto in = std::istringstream(std::string(text));
    auto line = std::string();
    auto number = 0;
    while (std::getline(in, line))
    {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try
        {
            const auto j = nlohmann::json::parse(line);
            for (const auto& [key, value]: j.items())
                if (key != "expect_substring" && key != "reply")
                    throw ParseError("unknown field '" + key + "'");
            turns.push_back({ j.value("expect_substring", std::string()), j.at("reply").get<std::string>() });
        }
        catch (const nlohmann::json::exception& e)
        {
            throw ParseError("mock transcript line " + std::to_string(number) + ": " + e.what());
        }
        catch (const ParseError& e)
        {
            throw ParseError("mock transcript line " + std::to_string(number) + ": " + e.what());
        }
    }
    return MockChatClient(std::move(turns));
}

MockChatClient MockChatClient::from_file(const std::filesystem::path& path)
{
    auto in = std::ifstream(path);
    if (!in)
        throw ValidationError("cannot open mock transcript " + path.string());
    auto buffer = std::stringstream();
    buffer << in.rdbuf();
    return from_jsonl(buffer.str());
}

std::string MockChatClient::send(const std::string& system, const std::string& user)
{
    if (next_ >= turns_.size())
        throw ChatError("mock transcript exhausted after " + std::to_string(turns_.size()) + " replies");
    const auto& turn = turns_[next_];
    if (!turn.expect_substring.empty())
    {
        const auto haystack = system + "\n" + user;
        if (haystack.find(turn.expect_substring) == std::string::npos)
            throw ChatError("mock turn " + std::to_string(next_ + 1) + " expected the request to contain '"
                            + turn.expect_substring + "'");
    }
    ++next_;
    return turn.reply;
}

HttpChatConfig HttpChatConfig::from_env()
{
    auto get = [](const char* name) {
        const auto* v = std::getenv(name);
        return v == nullptr ? std::string() : std::string(v);
    };
    auto c = HttpChatConfig();
    c.endpoint = get("CHAT_ENDPOINT");
    c.model = get("CHAT_MODEL");
    c.api_key = get("CHAT_API_KEY");
    if (c.endpoint.empty() || c.model.empty())
        throw ValidationError("live chat needs CHAT_ENDPOINT and CHAT_MODEL to be set");
    return c;
}

HttpChatClient::HttpChatClient(HttpChatConfig config): config_(std::move(config))
{
    const auto scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw ValidationError("chat endpoint must be an http(s) URL: " + config_.endpoint);
    const auto scheme = config_.endpoint.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        throw ValidationError("chat endpoint must be an http(s) URL: " + config_.endpoint);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (scheme == "https")
        throw ValidationError("this build has no TLS support; use an http endpoint");
#endif
    const auto path_start = config_.endpoint.find('/', scheme_end + 3);
    base_ = config_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
    if (config_.timeout_seconds < 1 || config_.retries < 0)
        throw ValidationError("chat timeout must be >= 1 s and retries >= 0");
}

std::string HttpChatClient::send(const std::string& system, const std::string& user)
{
    const nlohmann::json body = {
        { "model", config_.model },
        { "temperature", 0 },
        { "messages",
          { { { "role", "system" }, { "content", system } }, { { "role", "user" }, { "content", user } } } },
    };
    auto headers = httplib::Headers();
    if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto last_error = std::string("no attempt made");
    for (int attempt = 0; attempt <= config_.retries; ++attempt)
    {
        auto client = httplib::Client(base_);
        client.set_connection_timeout(config_.timeout_seconds, 0);
        client.set_read_timeout(config_.timeout_seconds, 0);
        client.set_write_timeout(config_.timeout_seconds, 0);
        const auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res)
        {
            last_error = "request failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200)
        {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try
        {
            const auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        }
        catch (const nlohmann::json::exception& e)
        {
            last_error = std::string("malformed completion: ") + e.what();
        }
    }
    throw ChatError("chat request to " + config_.endpoint + " failed after " + std::to_string(config_.retries + 1)
                    + " attempt(s): " + last_error);
}

} // namespace symlat
