#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fusionkit/embedding.hpp"
#include "fusionkit/manifest.hpp"

namespace fusionkit {

/// Synthetic store with controllable modality quality.
///
/// Construction (all draws from one mt19937_64 seeded with `seed`, in this
/// order):
///   1. class directions u_k = normalize(g), g ~ N(0, I), k = 0..N-1
///   2. per class, `prompts_per_class` text rows
///        normalize(text_bias * u_k + (1 - text_bias) * normalize(g))
///   3. per class, `images_per_class` image rows, same with image_bias
///   4. per class, `queries_per_class` queries
///        normalize(u_k + query_noise * normalize(g))
/// Gaussians come from Box-Muller over 53-bit uniforms rather than
/// std::normal_distribution, whose output is implementation-defined.
/// Text rows are tagged prompt_set=photo_template, image rows
/// prompt_set=cupl_single, queries split=test (even j) or split=val (odd j).
struct SynthSpec {
  int num_classes = 3;
  int dim = 16;
  int queries_per_class = 10;
  double text_bias = 0.8;
  double image_bias = 0.8;
  std::uint64_t seed = 0;
  int images_per_class = 5;
  int prompts_per_class = 1;
  double query_noise = 1.0;
};

/// Throws kSpecInvalid.
void validate(const SynthSpec& spec);

struct SynthStore {
  Manifest manifest;
  std::vector<EmbeddingRecord> records;
};

SynthStore synth_records(const SynthSpec& spec);

/// Writes the store and its manifest; same spec, same bytes.
void synth_fixture(const SynthSpec& spec, const std::filesystem::path& path);

}  // namespace fusionkit
