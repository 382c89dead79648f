// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace symlat
{

/// Single-turn chat transport: a system prompt and a user message in, the
/// reply text out. Failures raise ChatError.
class ChatClient
{
  public:
    virtual ~ChatClient() = default;
    virtual std::string send(const std::string& system, const std::string& user) = 0;
};

struct MockTurn
{
    std::string expect_substring; // must occur in system + "\n" + user; empty matches anything
    std::string reply;
};

/// Replays a scripted transcript in order.
class MockChatClient final : public ChatClient
{
  public:
    explicit MockChatClient(std::vector<MockTurn> turns);

    /// JSONL, one {"expect_substring": str, "reply": str} object per line;
    /// blank lines are skipped. Throws ParseError naming the bad line.
    static MockChatClient from_jsonl(std::string_view text);
    static MockChatClient from_file(const std::filesystem::path& path);

    /// Throws ChatError when the transcript is exhausted or the expected
    /// substring is missing.
    std::string send(const std::string& system, const std::string& user) override;

    [[nodiscard]] std::size_t calls() const noexcept { return next_; }
    [[nodiscard]] std::size_t remaining() const noexcept { return turns_.size() - next_; }

  private:
    std::vector<MockTurn> turns_;
    std::size_t next_ = 0;
};

struct HttpChatConfig
{
    std::string endpoint; // full URL of an OpenAI-compatible chat completions route
    std::string model;
    std::string api_key;
    int timeout_seconds = 60;
    int retries = 2;

    /// Reads CHAT_ENDPOINT, CHAT_MODEL and CHAT_API_KEY. Throws
    /// ValidationError when endpoint or model is unset.
    static HttpChatConfig from_env();
};

/// Live client posting {"model", "messages", "temperature": 0} and reading
/// choices[0].message.content.
class HttpChatClient final : public ChatClient
{
  public:
    explicit HttpChatClient(HttpChatConfig config);
    std::string send(const std::string& system, const std::string& user) override;

  private:
    HttpChatConfig config_;
    std::string base_;
    std::string path_;
};

} // namespace symlat
