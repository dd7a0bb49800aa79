#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fusionkit/bridge.hpp"
#include "fusionkit/cache.hpp"
#include "fusionkit/embedding.hpp"
#include "fusionkit/prompts.hpp"

namespace fusionkit {

struct ProtoBuildOptions {
  std::string dataset;
  /// Tag written on every record ("photo_template", "d3g/race7/profession").
  std::string prompt_set;
  /// Images generated per prompt: 0 (text only), 1 or 5.
  GenerationParams generation;
  /// When set, the prompt sets describe values of this demographic axis
  /// rather than manifest classes; records get class_index -1 and the tags
  /// {"target": axis, axis: value}.
  std::optional<std::string> target_axis;
};

struct ProtoBuildResult {
  /// One per prompt set, in input order.
  std::vector<ClassProto> protos;
  /// Class text / class image records ready for the store.
  std::vector<EmbeddingRecord> records;
  std::size_t bridge_calls = 0;
  /// Text prompts plus per-prompt image groups served from the cache.
  std::size_t cache_hits = 0;
};

/// For each prompt set: embeds every prompt, generates
/// `images_per_prompt` images per prompt and embeds them. Everything goes
/// through `cache`, which is flushed after each class so an interrupted run
/// resumes where it stopped. `client` may be null when the cache is
/// complete; otherwise a miss throws kBridgeUnavailable.
ProtoBuildResult build_class_protos(std::span<const PromptSet> prompt_sets,
                                    const ProtoBuildOptions& options, BridgeClient* client,
                                    EmbeddingCache& cache);

/// Assembles prototypes from store records. Records tagged "prompt_set"
/// must match `text_set` / `image_set`; untagged records match any set.
/// `image_filter` restricts image records by their "images_per_prompt" tag.
struct ProtoSelection {
  std::string text_set;
  std::string image_set;
  std::optional<int> images_per_prompt;
  /// As in ProtoBuildOptions; classes are then the axis values.
  std::optional<std::string> target_axis;
};

/// `targets` names the classes in order. Throws kMissingModality when a
/// target has no embeddings at all.
std::vector<ClassProto> protos_from_records(std::span<const EmbeddingRecord> records,
                                            std::span<const std::string> targets,
                                            const ProtoSelection& selection);

}  // namespace fusionkit
