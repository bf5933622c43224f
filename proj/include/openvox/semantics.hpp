#pragma once

// Dense patch-feature machinery: the per-frame distinctiveness map, masked
// feature aggregation, the multiplicative observation-quality score and the
// replace-if-better fusion rule for instance features.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "openvox/error.hpp"

namespace openvox {

inline constexpr float kDistinctivenessEpsilon = 1e-6f;
inline constexpr double kSizeLambda = 3.3;
inline constexpr float kCoverMin = 0.25f;

// Row-major rows x cols x dim grid of patch features. Each patch covers
// patch_size x patch_size image pixels.
struct FeatureGrid {
  int rows = 0;
  int cols = 0;
  int dim = 0;
  int patch_size = 1;
  std::vector<float> data;

  std::span<const float> at(int i, int j) const {
    return {data.data() + (static_cast<std::size_t>(i) * cols + j) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<float> at(int i, int j) {
    return {data.data() + (static_cast<std::size_t>(i) * cols + j) * dim, static_cast<std::size_t>(dim)};
  }
  std::size_t patches() const { return static_cast<std::size_t>(rows) * cols; }
  int image_height() const { return rows * patch_size; }
  int image_width() const { return cols * patch_size; }

  // Spatial mean over all patches.
  std::vector<double> mean() const;
  void validate() const;
};

struct DistinctivenessMap {
  int rows = 0;
  int cols = 0;
  std::vector<float> values;
  float epsilon = kDistinctivenessEpsilon;

  float at(int i, int j) const { return values[static_cast<std::size_t>(i) * cols + j]; }
};

// Fraction of each patch's pixels that lie inside a mask.
struct PatchCoverage {
  int rows = 0;
  int cols = 0;
  std::vector<float> fraction;

  float at(int i, int j) const { return fraction[static_cast<std::size_t>(i) * cols + j]; }
};

struct SemanticFeature {
  std::vector<float> vector;  // unit L2 norm
  float quality = 0.0f;

  friend bool operator==(const SemanticFeature&, const SemanticFeature&) = default;
};

struct QualityBreakdown {
  float s_size = 0.0f;
  float s_angle = 0.0f;
  float s_geo = 0.0f;
  float s_sem = 0.0f;
  float s_dist = 0.0f;
  float q = 0.0f;
  double lambda = kSizeLambda;
  std::size_t mask_area = 0;
  float mean_distinctiveness = 0.0f;
};

// Small vector helpers; accumulation happens in double.
double dot(std::span<const float> a, std::span<const float> b);
double norm(std::span<const float> a);
double cosine(std::span<const float> a, std::span<const float> b);
// Returns false (and leaves v untouched) when v has zero norm.
bool normalize(std::span<float> v);

// D[i,j] = |f[i,j] - mean f| / (mean_ij |f[i,j] - mean f| + eps)
DistinctivenessMap compute_distinctiveness(const FeatureGrid& grid, float epsilon = kDistinctivenessEpsilon);

PatchCoverage patch_coverage(std::span<const std::uint8_t> mask, int rows, int cols, int patch_size);

// Patch weights D * cover (zeroed below cover_min); result L2-normalized.
// Falls back to the unweighted mean over any-coverage patches when every
// weight is zero; throws ValidationError("empty mask") if that is empty too.
std::vector<float> aggregate_masked_feature(const FeatureGrid& grid, const DistinctivenessMap& distinctiveness,
                                            const PatchCoverage& coverage, float cover_min = kCoverMin);

float s_size(std::size_t mask_area, int image_height, int image_width, double lambda = kSizeLambda);
// Mean of max(0, -r.n) over voxels; rays point from the camera to the voxel.
float s_angle(std::span<const Eigen::Vector3f> normals, std::span<const Eigen::Vector3f> view_rays);
float s_sem(std::span<const float> local, std::span<const float> global);
// Coverage-weighted mean of D over patches the mask touches.
float mask_mean_distinctiveness(const DistinctivenessMap& distinctiveness, const PatchCoverage& coverage);
float s_dist(float mean_distinctiveness);
inline float s_dist(const DistinctivenessMap& distinctiveness, const PatchCoverage& coverage) {
  return s_dist(mask_mean_distinctiveness(distinctiveness, coverage));
}

QualityBreakdown quality(float size, float angle, float sem, float dist);

// observed replaces current only on strictly higher quality.
const SemanticFeature& fuse_semantic(const SemanticFeature& current, const SemanticFeature& observed);

}  // namespace openvox
