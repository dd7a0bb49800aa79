#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fusionkit/embedding.hpp"
#include "fusionkit/fusion.hpp"

namespace fixtures {

inline fusionkit::Embedding unit(std::vector<double> v) {
  return fusionkit::normalize(std::span<const double>(v));
}

/// Two confusable classes in R^3 whose text prototype is biased towards the
/// second one.
///
///   class 0 ("mushroom"): text t0 = normalize(0.2 e1 + e3), image i0 = e1
///   class 1 ("agaric"):   text t1 = normalize(e1 + e2),     image i1 = e2
///   mushroom queries: normalize(e1 + a_j e3), a_j = 0.06 j, j = 0..9
///   agaric queries:   normalize(e2 + b_j e3), b_j = 0.03 j, j = 0..9
///
/// Text only, a mushroom query is right iff (0.2 + a) / |t0| > 1 / sqrt(2),
/// i.e. a > 0.521, so only j = 9 is: per-class accuracy (0.1, 1.0). Agaric
/// queries score b / |t0| <= 0.27 for mushroom against 0.707 for agaric and
/// are always right. At w = 0.5 the image term e1 / e2 separates the classes
/// and every query is right.
struct BiasFixture {
  std::vector<fusionkit::ClassProto> protos;
  fusionkit::EvalSet evalset;
};

inline BiasFixture bias_fixture() {
  BiasFixture f;
  f.protos.push_back(fusionkit::make_class_proto(0, {unit({0.2, 0.0, 1.0})}, {unit({1, 0, 0})}));
  f.protos.push_back(fusionkit::make_class_proto(1, {unit({1.0, 1.0, 0.0})}, {unit({0, 1, 0})}));
  for (int j = 0; j < 10; ++j) {
    f.evalset.push_back({"mushroom/" + std::to_string(j), unit({1.0, 0.0, 0.06 * j}), 0});
  }
  for (int j = 0; j < 10; ++j) {
    f.evalset.push_back({"agaric/" + std::to_string(j), unit({0.0, 1.0, 0.03 * j}), 1});
  }
  return f;
}

/// Per-test scratch directory under the system temp dir, removed on exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("fusionkit-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
