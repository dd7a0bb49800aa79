#include "fusionkit/bridge.hpp"

#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "fusionkit/error.hpp"

namespace fusionkit {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Error protocol_error(const std::string& what) {
  return Error(ErrorCode::kProtocolError, what);
}

json request_body(const BridgeRequest& request) {
  return std::visit(
      overloaded{
          [](const EmbedTextRequest& r) {
            return json{{"op", "embed_text"}, {"texts", r.texts}};
          },
          [](const EmbedImageRequest& r) {
            return json{{"op", "embed_image"}, {"paths", r.paths}};
          },
          [](const GenerateRequest& r) {
            return json{{"op", "generate"},   {"prompt", r.prompt},
                        {"count", r.count},   {"steps", r.steps},
                        {"guidance", r.guidance}, {"seed", r.seed}};
          },
      },
      request);
}

std::size_t expected_items(const BridgeRequest& request) {
  return std::visit(overloaded{
                        [](const EmbedTextRequest& r) { return r.texts.size(); },
                        [](const EmbedImageRequest& r) { return r.paths.size(); },
                        [](const GenerateRequest& r) {
                          return static_cast<std::size_t>(r.count);
                        },
                    },
                    request);
}

json parse_line(std::string_view line) {
  try {
    auto doc = json::parse(line);
    if (!doc.is_object()) throw protocol_error("message is not a JSON object");
    return doc;
  } catch (const json::exception& e) {
    throw protocol_error(fmt::format("unparseable line: {}", e.what()));
  }
}

}  // namespace

std::string_view op_name(const BridgeRequest& request) {
  return std::visit(overloaded{
                        [](const EmbedTextRequest&) { return std::string_view("embed_text"); },
                        [](const EmbedImageRequest&) { return std::string_view("embed_image"); },
                        [](const GenerateRequest&) { return std::string_view("generate"); },
                    },
                    request);
}

void validate(const BridgeRequest& request) {
  std::visit(
      overloaded{
          [](const EmbedTextRequest& r) {
            if (r.texts.empty()) {
              throw Error(ErrorCode::kInvalidArgument, "embed_text with no texts");
            }
          },
          [](const EmbedImageRequest& r) {
            if (r.paths.empty()) {
              throw Error(ErrorCode::kInvalidArgument, "embed_image with no paths");
            }
          },
          [](const GenerateRequest& r) {
            if (r.count != 1 && r.count != 5) {
              throw Error(ErrorCode::kInvalidArgument,
                          fmt::format("generate count must be 1 or 5, got {}", r.count));
            }
            if (r.steps <= 0 || !(r.guidance > 0.0) || !std::isfinite(r.guidance)) {
              throw Error(ErrorCode::kInvalidArgument,
                          "generate needs positive steps and guidance");
            }
          },
      },
      request);
}

std::string encode_request(const BridgeRequest& request, std::uint64_t id) {
  auto body = request_body(request);
  body["id"] = id;
  return body.dump();
}

std::pair<std::uint64_t, BridgeRequest> decode_request(std::string_view line) {
  const auto doc = parse_line(line);
  try {
    const auto id = doc.at("id").get<std::uint64_t>();
    const auto op = doc.at("op").get<std::string>();
    if (op == "embed_text") {
      return {id, EmbedTextRequest{doc.at("texts").get<std::vector<std::string>>()}};
    }
    if (op == "embed_image") {
      return {id, EmbedImageRequest{doc.at("paths").get<std::vector<std::string>>()}};
    }
    if (op == "generate") {
      GenerateRequest r;
      r.prompt = doc.at("prompt").get<std::string>();
      r.count = doc.value("count", r.count);
      r.steps = doc.value("steps", r.steps);
      r.guidance = doc.value("guidance", r.guidance);
      r.seed = doc.value("seed", r.seed);
      return {id, r};
    }
    throw protocol_error("unknown op '" + op + "'");
  } catch (const json::exception& e) {
    throw protocol_error(fmt::format("bad request: {}", e.what()));
  }
}

std::string encode_response(const BridgeResponse& response, std::uint64_t id) {
  json doc = {{"id", id}, {"ok", response.ok}};
  if (response.embeddings) doc["embeddings"] = *response.embeddings;
  if (response.paths) doc["paths"] = *response.paths;
  if (response.error) doc["error"] = *response.error;
  return doc.dump();
}

BridgeResponse decode_response(std::string_view line, const BridgeRequest& request,
                               std::uint64_t id) {
  const auto doc = parse_line(line);
  BridgeResponse response;
  try {
    if (!doc.contains("id") || doc.at("id").get<std::uint64_t>() != id) {
      throw protocol_error(fmt::format("response does not echo request id {}", id));
    }
    response.ok = doc.at("ok").get<bool>();
    if (!response.ok) {
      if (!doc.contains("error") || !doc.at("error").is_string()) {
        throw protocol_error("ok=false response without an error string");
      }
      response.error = doc.at("error").get<std::string>();
      return response;
    }
    const bool has_embeddings = doc.contains("embeddings");
    const bool has_paths = doc.contains("paths");
    if (has_embeddings == has_paths) {
      throw protocol_error("ok response must carry exactly one of embeddings/paths");
    }
    const bool wants_paths = std::holds_alternative<GenerateRequest>(request);
    if (wants_paths != has_paths) {
      throw protocol_error(fmt::format("wrong payload kind for {}", op_name(request)));
    }
    const auto n = expected_items(request);
    if (has_paths) {
      response.paths = doc.at("paths").get<std::vector<std::string>>();
      if (response.paths->size() != n) {
        throw protocol_error(fmt::format("expected {} paths, got {}", n,
                                         response.paths->size()));
      }
    } else {
      response.embeddings = doc.at("embeddings").get<std::vector<std::vector<double>>>();
      const auto& vecs = *response.embeddings;
      if (vecs.size() != n) {
        throw protocol_error(fmt::format("expected {} embeddings, got {}", n, vecs.size()));
      }
      for (const auto& v : vecs) {
        if (v.empty() || v.size() != vecs.front().size()) {
          throw protocol_error("embeddings in one response differ in dimension");
        }
      }
    }
  } catch (const json::exception& e) {
    throw protocol_error(fmt::format("bad response: {}", e.what()));
  }
  return response;
}

std::string request_key(const BridgeRequest& request) { return request_body(request).dump(); }

BridgeClient::BridgeClient(std::unique_ptr<Transport> transport,
                           std::optional<std::size_t> expected_dim)
    : transport_(std::move(transport)), dim_(expected_dim) {
  if (!transport_) {
    throw Error(ErrorCode::kBridgeUnavailable, "no transport");
  }
}

BridgeResponse BridgeClient::request(const BridgeRequest& request) {
  validate(request);
  std::lock_guard lock(mutex_);
  const auto id = next_id_++;
  ++calls_;
  const auto line = transport_->exchange(encode_request(request, id));
  auto response = decode_response(line, request, id);
  if (!response.ok) {
    throw Error(ErrorCode::kRemoteError,
                fmt::format("{} failed: {}", op_name(request), response.error.value_or("")));
  }
  return response;
}

std::vector<Embedding> BridgeClient::to_embeddings(const BridgeResponse& response) {
  std::vector<Embedding> out;
  const auto& vecs = response.embeddings.value();
  out.reserve(vecs.size());
  std::lock_guard lock(mutex_);
  for (const auto& raw : vecs) {
    if (dim_ && raw.size() != *dim_) {
      throw Error(ErrorCode::kDimMismatch,
                  fmt::format("bridge returned dim {}, expected {}", raw.size(), *dim_));
    }
    try {
      out.push_back(normalize(std::span<const double>(raw)));
    } catch (const Error& e) {
      throw protocol_error(fmt::format("unusable embedding: {}", e.what()));
    }
    if (!dim_) dim_ = raw.size();
  }
  return out;
}

std::vector<Embedding> BridgeClient::embed_text(const std::vector<std::string>& texts) {
  return to_embeddings(request(EmbedTextRequest{texts}));
}

std::vector<Embedding> BridgeClient::embed_image(const std::vector<std::string>& paths) {
  return to_embeddings(request(EmbedImageRequest{paths}));
}

std::vector<std::string> BridgeClient::generate(const GenerateRequest& req) {
  return request(req).paths.value();
}

std::size_t BridgeClient::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::optional<std::size_t> BridgeClient::dim() const {
  std::lock_guard lock(mutex_);
  return dim_;
}

}  // namespace fusionkit
