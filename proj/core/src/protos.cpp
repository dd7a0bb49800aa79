#include "fusionkit/protos.hpp"

#include <fmt/format.h>

#include "fusionkit/error.hpp"

namespace fusionkit {
namespace {

std::map<std::string, std::string> base_tags(const std::string& prompt_set,
                                             const std::optional<std::string>& axis,
                                             const std::string& target) {
  std::map<std::string, std::string> tags{{"prompt_set", prompt_set}};
  if (axis) {
    tags["target"] = *axis;
    tags[*axis] = target;
  }
  return tags;
}

bool tag_matches(const EmbeddingRecord& r, const std::string& key, const std::string& value) {
  const auto it = r.axis_tags.find(key);
  return it == r.axis_tags.end() || it->second == value;
}

}  // namespace

ProtoBuildResult build_class_protos(std::span<const PromptSet> prompt_sets,
                                    const ProtoBuildOptions& options, BridgeClient* client,
                                    EmbeddingCache& cache) {
  const auto& gen = options.generation;
  if (gen.images_per_prompt != 0 && gen.images_per_prompt != 1 &&
      gen.images_per_prompt != 5) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("images per prompt must be 0, 1 or 5, got {}",
                            gen.images_per_prompt));
  }
  if (options.prompt_set.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "prompt set name is empty");
  }
  const CacheBucket bucket{options.dataset, options.prompt_set, gen};
  const auto calls_before = client ? client->calls() : 0;
  auto need_client = [&](const std::string& what) -> BridgeClient& {
    if (!client) {
      throw Error(ErrorCode::kBridgeUnavailable,
                  fmt::format("cache has no entry for {} and no bridge is configured", what));
    }
    return *client;
  };

  ProtoBuildResult result;
  for (std::size_t c = 0; c < prompt_sets.size(); ++c) {
    const auto& set = prompt_sets[c];
    if (set.prompts.empty()) {
      throw Error(ErrorCode::kEmptyClassEntry,
                  fmt::format("class '{}' has no prompts", set.class_name));
    }
    const int class_index = options.target_axis ? -1 : static_cast<int>(c);
    const auto tags = base_tags(options.prompt_set, options.target_axis, set.class_name);

    std::vector<std::string> missing;
    for (const auto& p : set.prompts) {
      if (!cache.find(bucket, text_cache_id(p))) missing.push_back(p);
    }
    result.cache_hits += set.prompts.size() - missing.size();
    if (!missing.empty()) {
      auto embs = need_client(fmt::format("text '{}'", missing.front())).embed_text(missing);
      for (std::size_t j = 0; j < missing.size(); ++j) {
        cache.put(bucket, text_cache_id(missing[j]), std::move(embs[j]));
      }
    }

    std::vector<Embedding> texts;
    std::vector<Embedding> images;
    for (std::size_t j = 0; j < set.prompts.size(); ++j) {
      const auto& prompt = set.prompts[j];
      auto text = *cache.find(bucket, text_cache_id(prompt));
      EmbeddingRecord tr{fmt::format("{}/text/{}/{}", options.prompt_set, c, j),
                         Role::kClassText, class_index, tags, text};
      tr.axis_tags["prompt"] = prompt;
      result.records.push_back(std::move(tr));
      texts.push_back(std::move(text));

      if (gen.images_per_prompt == 0) continue;
      std::vector<Embedding> generated;
      for (int k = 0; k < gen.images_per_prompt; ++k) {
        if (auto hit = cache.find(bucket, image_cache_id(prompt, k))) {
          generated.push_back(std::move(*hit));
        } else {
          generated.clear();
          break;
        }
      }
      if (generated.empty()) {
        auto& bridge = need_client(fmt::format("images of '{}'", prompt));
        GenerateRequest req{prompt, gen.images_per_prompt, gen.steps, gen.guidance, gen.seed};
        const auto paths = bridge.generate(req);
        generated = bridge.embed_image(paths);
        for (int k = 0; k < gen.images_per_prompt; ++k) {
          cache.put(bucket, image_cache_id(prompt, k), generated[static_cast<std::size_t>(k)]);
        }
      } else {
        ++result.cache_hits;
      }
      for (int k = 0; k < gen.images_per_prompt; ++k) {
        EmbeddingRecord ir{fmt::format("{}/image/{}/{}/{}", options.prompt_set, c, j, k),
                           Role::kClassImage, class_index, tags,
                           generated[static_cast<std::size_t>(k)]};
        ir.axis_tags["prompt"] = prompt;
        ir.axis_tags["images_per_prompt"] = std::to_string(gen.images_per_prompt);
        result.records.push_back(std::move(ir));
        images.push_back(std::move(generated[static_cast<std::size_t>(k)]));
      }
    }
    cache.flush();
    result.protos.push_back(make_class_proto(static_cast<int>(c), std::move(texts),
                                             std::move(images)));
  }
  result.bridge_calls = client ? client->calls() - calls_before : 0;
  return result;
}

std::vector<ClassProto> protos_from_records(std::span<const EmbeddingRecord> records,
                                            std::span<const std::string> targets,
                                            const ProtoSelection& selection) {
  std::vector<std::vector<Embedding>> texts(targets.size());
  std::vector<std::vector<Embedding>> images(targets.size());
  std::map<std::string, std::size_t> target_index;
  for (std::size_t i = 0; i < targets.size(); ++i) target_index.emplace(targets[i], i);

  for (const auto& r : records) {
    if (r.role == Role::kQuery) continue;
    std::optional<std::size_t> idx;
    if (selection.target_axis) {
      const auto t = r.axis_tags.find("target");
      const auto v = r.axis_tags.find(*selection.target_axis);
      if (t == r.axis_tags.end() || t->second != *selection.target_axis ||
          v == r.axis_tags.end()) {
        continue;
      }
      if (const auto it = target_index.find(v->second); it != target_index.end()) {
        idx = it->second;
      }
    } else if (r.class_index >= 0 && static_cast<std::size_t>(r.class_index) < targets.size() &&
               !r.axis_tags.contains("target")) {
      idx = static_cast<std::size_t>(r.class_index);
    }
    if (!idx) continue;
    if (r.role == Role::kClassText) {
      if (tag_matches(r, "prompt_set", selection.text_set)) texts[*idx].push_back(r.embedding);
    } else if (tag_matches(r, "prompt_set", selection.image_set) &&
               (!selection.images_per_prompt ||
                tag_matches(r, "images_per_prompt",
                            std::to_string(*selection.images_per_prompt)))) {
      images[*idx].push_back(r.embedding);
    }
  }

  std::vector<ClassProto> protos;
  protos.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (texts[i].empty() && images[i].empty()) {
      throw Error(ErrorCode::kMissingModality,
                  fmt::format("class '{}' has no text ('{}') or image ('{}') embeddings",
                              targets[i], selection.text_set, selection.image_set));
    }
    protos.push_back(
        make_class_proto(static_cast<int>(i), std::move(texts[i]), std::move(images[i])));
  }
  return protos;
}

}  // namespace fusionkit
