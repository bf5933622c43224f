#include "openvox/semantics.hpp"

#include <algorithm>
#include <cmath>

namespace openvox {

std::vector<double> FeatureGrid::mean() const {
  std::vector<double> m(dim, 0.0);
  for (std::size_t p = 0; p < patches(); ++p) {
    const float* f = data.data() + p * dim;
    for (int c = 0; c < dim; ++c) m[c] += f[c];
  }
  for (auto& v : m) v /= static_cast<double>(patches());
  return m;
}

void FeatureGrid::validate() const {
  if (rows <= 0 || cols <= 0) throw ValidationError("feature grid needs at least one patch");
  if (dim <= 0) throw ValidationError("feature grid has zero feature dimension");
  if (patch_size <= 0) throw ValidationError("feature grid patch size must be positive");
  if (data.size() != patches() * static_cast<std::size_t>(dim)) throw ValidationError("feature grid payload size mismatch");
}

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ValidationError("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

double norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const float> a, std::span<const float> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

bool normalize(std::span<float> v) {
  const double n = norm(v);
  if (n == 0.0 || !std::isfinite(n)) return false;
  for (auto& x : v) x = static_cast<float>(x / n);
  return true;
}

DistinctivenessMap compute_distinctiveness(const FeatureGrid& grid, float epsilon) {
  grid.validate();
  const auto mean = grid.mean();
  std::vector<double> residual(grid.patches());
  double total = 0.0;
  for (std::size_t p = 0; p < grid.patches(); ++p) {
    const float* f = grid.data.data() + p * grid.dim;
    double s = 0.0;
    for (int c = 0; c < grid.dim; ++c) {
      const double d = f[c] - mean[c];
      s += d * d;
    }
    residual[p] = std::sqrt(s);
    total += residual[p];
  }
  const double denom = total / static_cast<double>(grid.patches()) + epsilon;
  DistinctivenessMap out{grid.rows, grid.cols, std::vector<float>(grid.patches()), epsilon};
  for (std::size_t p = 0; p < grid.patches(); ++p) out.values[p] = static_cast<float>(residual[p] / denom);
  return out;
}

PatchCoverage patch_coverage(std::span<const std::uint8_t> mask, int rows, int cols, int patch_size) {
  const std::size_t width = static_cast<std::size_t>(cols) * patch_size;
  if (mask.size() != width * static_cast<std::size_t>(rows) * patch_size) {
    throw ValidationError("patch_coverage: mask size does not match the patch grid");
  }
  PatchCoverage cov{rows, cols, std::vector<float>(static_cast<std::size_t>(rows) * cols, 0.0f)};
  std::vector<int> counts(cov.fraction.size(), 0);
  for (std::size_t v = 0; v < static_cast<std::size_t>(rows) * patch_size; ++v) {
    const std::size_t i = v / patch_size;
    for (std::size_t u = 0; u < width; ++u) {
      if (mask[v * width + u]) ++counts[i * cols + u / patch_size];
    }
  }
  const float area = static_cast<float>(patch_size * patch_size);
  for (std::size_t p = 0; p < counts.size(); ++p) cov.fraction[p] = static_cast<float>(counts[p]) / area;
  return cov;
}

std::vector<float> aggregate_masked_feature(const FeatureGrid& grid, const DistinctivenessMap& distinctiveness,
                                            const PatchCoverage& coverage, float cover_min) {
  if (coverage.rows != grid.rows || coverage.cols != grid.cols || distinctiveness.rows != grid.rows ||
      distinctiveness.cols != grid.cols) {
    throw ValidationError("aggregate_masked_feature: grid, D and coverage disagree on shape");
  }
  std::vector<double> acc(grid.dim, 0.0);
  double weight_sum = 0.0;
  for (std::size_t p = 0; p < grid.patches(); ++p) {
    const float cover = coverage.fraction[p];
    if (cover < cover_min) continue;
    const double w = static_cast<double>(distinctiveness.values[p]) * cover;
    if (w <= 0.0) continue;
    const float* f = grid.data.data() + p * grid.dim;
    for (int c = 0; c < grid.dim; ++c) acc[c] += w * f[c];
    weight_sum += w;
  }
  if (weight_sum <= 0.0) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t p = 0; p < grid.patches(); ++p) {
      if (coverage.fraction[p] <= 0.0f) continue;
      const float* f = grid.data.data() + p * grid.dim;
      for (int c = 0; c < grid.dim; ++c) acc[c] += f[c];
      weight_sum += 1.0;
    }
  }
  if (weight_sum <= 0.0) throw ValidationError("empty mask");
  std::vector<float> out(grid.dim);
  for (int c = 0; c < grid.dim; ++c) out[c] = static_cast<float>(acc[c] / weight_sum);
  if (!normalize(out)) throw ValidationError("empty mask");
  return out;
}

float s_size(std::size_t mask_area, int image_height, int image_width, double lambda) {
  const double pixels = static_cast<double>(image_height) * image_width;
  if (pixels <= 0.0) throw ValidationError("s_size: empty image");
  if (static_cast<double>(mask_area) > pixels) throw ValidationError("s_size: mask larger than image");
  return static_cast<float>(std::min(lambda * static_cast<double>(mask_area) / pixels, 1.0));
}

float s_angle(std::span<const Eigen::Vector3f> normals, std::span<const Eigen::Vector3f> view_rays) {
  if (normals.empty()) throw ValidationError("s_angle: empty voxel set");
  if (normals.size() != view_rays.size()) throw ValidationError("s_angle: normals and rays differ in count");
  double sum = 0.0;
  for (std::size_t v = 0; v < normals.size(); ++v) {
    sum += std::max(0.0, -static_cast<double>(view_rays[v].dot(normals[v])));
  }
  return static_cast<float>(std::clamp(sum / static_cast<double>(normals.size()), 0.0, 1.0));
}

float s_sem(std::span<const float> local, std::span<const float> global) {
  return static_cast<float>(std::clamp(cosine(local, global), 0.0, 1.0));
}

float mask_mean_distinctiveness(const DistinctivenessMap& distinctiveness, const PatchCoverage& coverage) {
  if (coverage.fraction.size() != distinctiveness.values.size()) {
    throw ValidationError("mask_mean_distinctiveness: shape mismatch");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t p = 0; p < coverage.fraction.size(); ++p) {
    const float c = coverage.fraction[p];
    if (c <= 0.0f) continue;
    num += static_cast<double>(c) * distinctiveness.values[p];
    den += c;
  }
  if (den <= 0.0) throw ValidationError("mask covers no patch");
  return static_cast<float>(num / den);
}

float s_dist(float mean_distinctiveness) { return 0.5f + 0.5f * mean_distinctiveness; }

QualityBreakdown quality(float size, float angle, float sem, float dist) {
  QualityBreakdown b;
  b.s_size = size;
  b.s_angle = angle;
  b.s_sem = sem;
  b.s_dist = dist;
  b.s_geo = size * angle;
  b.q = b.s_geo * sem * dist;
  return b;
}

const SemanticFeature& fuse_semantic(const SemanticFeature& current, const SemanticFeature& observed) {
  return observed.quality > current.quality ? observed : current;
}

}  // namespace openvox
