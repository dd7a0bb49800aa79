#include "fusionkit/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "fusionkit/error.hpp"
#include "fusionkit/store.hpp"

namespace fusionkit {
namespace {

class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
  }

  std::vector<double> unit(int dim) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double n2 = 0.0;
    while (n2 < 1e-12) {
      n2 = 0.0;
      for (auto& x : v) {
        x = (*this)();
        n2 += x * x;
      }
    }
    const double n = std::sqrt(n2);
    for (auto& x : v) x /= n;
    return v;
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  std::optional<double> spare_;
};

std::vector<double> mix(const std::vector<double>& a, double wa, const std::vector<double>& b,
                        double wb) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = wa * a[i] + wb * b[i];
  return out;
}

Embedding to_embedding(const std::vector<double>& v) {
  return normalize(std::span<const double>(v));
}

}  // namespace

void validate(const SynthSpec& spec) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kSpecInvalid, what); };
  if (spec.num_classes < 2) fail(fmt::format("need at least 2 classes, got {}", spec.num_classes));
  if (spec.dim < 2) fail(fmt::format("need dim >= 2, got {}", spec.dim));
  if (spec.queries_per_class < 1) fail("queries_per_class must be positive");
  if (spec.images_per_class < 0 || spec.prompts_per_class < 0) {
    fail("images_per_class and prompts_per_class must be non-negative");
  }
  if (spec.images_per_class == 0 && spec.prompts_per_class == 0) {
    fail("classes need at least one text or image row");
  }
  for (double b : {spec.text_bias, spec.image_bias}) {
    if (!(b >= 0.0 && b <= 1.0)) fail(fmt::format("bias {} outside [0, 1]", b));
  }
  if (!(spec.query_noise >= 0.0) || !std::isfinite(spec.query_noise)) {
    fail("query_noise must be finite and non-negative");
  }
}

SynthStore synth_records(const SynthSpec& spec) {
  validate(spec);
  Gaussian gauss(spec.seed);
  const auto n = static_cast<std::size_t>(spec.num_classes);

  std::vector<std::vector<double>> dirs;
  for (std::size_t k = 0; k < n; ++k) dirs.push_back(gauss.unit(spec.dim));

  SynthStore out;
  out.manifest.dataset_name = "synthetic";
  out.manifest.metric = Metric::kTop1;
  for (std::size_t k = 0; k < n; ++k) out.manifest.classes.push_back(fmt::format("class_{}", k));

  auto add = [&](std::string id, Role role, int label, std::map<std::string, std::string> tags,
                 const std::vector<double>& v) {
    out.records.push_back(EmbeddingRecord{std::move(id), role, label, std::move(tags),
                                          to_embedding(v)});
  };

  for (std::size_t k = 0; k < n; ++k) {
    for (int j = 0; j < spec.prompts_per_class; ++j) {
      const auto v = mix(dirs[k], spec.text_bias, gauss.unit(spec.dim), 1.0 - spec.text_bias);
      add(fmt::format("text/{}/{}", k, j), Role::kClassText, static_cast<int>(k),
          {{"prompt_set", "photo_template"}}, v);
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (int j = 0; j < spec.images_per_class; ++j) {
      const auto v = mix(dirs[k], spec.image_bias, gauss.unit(spec.dim), 1.0 - spec.image_bias);
      add(fmt::format("image/{}/{}", k, j), Role::kClassImage, static_cast<int>(k),
          {{"prompt_set", "cupl_single"}}, v);
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (int j = 0; j < spec.queries_per_class; ++j) {
      const auto v = mix(dirs[k], 1.0, gauss.unit(spec.dim), spec.query_noise);
      add(fmt::format("query/{}/{}", k, j), Role::kQuery, static_cast<int>(k),
          {{"split", j % 2 == 0 ? "test" : "val"}}, v);
    }
  }
  return out;
}

void synth_fixture(const SynthSpec& spec, const std::filesystem::path& path) {
  const auto store = synth_records(spec);
  write_store(store.records, store.manifest, path);
}

}  // namespace fusionkit
