#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fusionkit/embedding.hpp"

namespace fusionkit {

// Line protocol spoken with the encoder/generator bridge. One UTF-8 JSON
// object per line in each direction, strictly ordered. docs/bridge.md has
// the field-by-field description.

struct EmbedTextRequest {
  std::vector<std::string> texts;
};

struct EmbedImageRequest {
  std::vector<std::string> paths;
};

/// Generation defaults: 50 steps, guidance 15, seed 0.
struct GenerateRequest {
  std::string prompt;
  int count = 1;
  int steps = 50;
  double guidance = 15.0;
  std::int64_t seed = 0;
};

using BridgeRequest = std::variant<EmbedTextRequest, EmbedImageRequest, GenerateRequest>;

std::string_view op_name(const BridgeRequest& request);

/// Throws kInvalidArgument for empty batches, count outside {1, 5},
/// non-positive steps or guidance.
void validate(const BridgeRequest& request);

struct BridgeResponse {
  bool ok = false;
  /// Raw vectors as received. The client normalizes them.
  std::optional<std::vector<std::vector<double>>> embeddings;
  std::optional<std::vector<std::string>> paths;
  std::optional<std::string> error;
};

/// Request line (no trailing newline): {"id":N,"op":...,<payload>}.
std::string encode_request(const BridgeRequest& request, std::uint64_t id);
/// Server-side decode; returns the id alongside. Throws kProtocolError.
std::pair<std::uint64_t, BridgeRequest> decode_request(std::string_view line);

std::string encode_response(const BridgeResponse& response, std::uint64_t id);
/// Parses and checks a response: id echo, exactly one payload on success,
/// payload arity matching the request, one vector dimension. Throws
/// kProtocolError; an ok=false response is returned as-is.
BridgeResponse decode_response(std::string_view line, const BridgeRequest& request,
                               std::uint64_t id);

/// Canonical request text without the id; the cache and replay key.
std::string request_key(const BridgeRequest& request);

/// Moves one request line to the bridge and returns one response line.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string exchange(std::string_view request_line) = 0;
};

/// Spawns `/bin/sh -c command` and talks over its stdin/stdout. The child's
/// stderr is inherited. SIGPIPE is ignored process-wide once a transport
/// exists so a dead bridge surfaces as kBridgeUnavailable.
class ProcessTransport final : public Transport {
 public:
  explicit ProcessTransport(const std::string& command);
  ~ProcessTransport() override;
  ProcessTransport(const ProcessTransport&) = delete;
  ProcessTransport& operator=(const ProcessTransport&) = delete;

  std::string exchange(std::string_view request_line) override;

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// Serves canned responses from a JSONL file of
/// {"request": {...}, "response": {...}} entries. Requests are matched by
/// content (ids ignored); repeated identical requests consume entries in
/// file order, the last one being reused.
class ReplayTransport final : public Transport {
 public:
  explicit ReplayTransport(const std::filesystem::path& path);
  static std::unique_ptr<ReplayTransport> from_text(std::string_view jsonl);

  std::string exchange(std::string_view request_line) override;

 private:
  ReplayTransport() = default;
  void load(std::string_view jsonl);

  struct Entry {
    std::vector<std::string> responses;
    std::size_t next = 0;
  };
  std::map<std::string, Entry> entries_;
};

/// Forwards to another transport and appends every exchange to a JSONL file
/// that ReplayTransport can serve later.
class RecordingTransport final : public Transport {
 public:
  RecordingTransport(std::unique_ptr<Transport> inner, std::filesystem::path path);

  std::string exchange(std::string_view request_line) override;

 private:
  std::unique_ptr<Transport> inner_;
  std::filesystem::path path_;
};

/// Client for the bridge. Requests are serialized: one in flight at a time,
/// responses matched by the echoed id.
class BridgeClient {
 public:
  explicit BridgeClient(std::unique_ptr<Transport> transport,
                        std::optional<std::size_t> expected_dim = std::nullopt);

  /// Sends, parses and validates. Throws kProtocolError, kRemoteError,
  /// kBridgeUnavailable.
  BridgeResponse request(const BridgeRequest& request);

  /// Unit-norm embeddings of each text / image path.
  std::vector<Embedding> embed_text(const std::vector<std::string>& texts);
  std::vector<Embedding> embed_image(const std::vector<std::string>& paths);
  std::vector<std::string> generate(const GenerateRequest& request);

  std::size_t calls() const;
  std::optional<std::size_t> dim() const;

 private:
  std::vector<Embedding> to_embeddings(const BridgeResponse& response);

  std::unique_ptr<Transport> transport_;
  std::optional<std::size_t> dim_;
  std::uint64_t next_id_ = 1;
  std::size_t calls_ = 0;
  mutable std::mutex mutex_;
};

}  // namespace fusionkit
