#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lapreg/common.hpp"

namespace lapreg {

enum class ManifoldKind { circle, sphere2, flat_torus, swiss_roll, interval };
enum class DensityKind { uniform, smooth_tilted };

std::string to_string(ManifoldKind kind);
std::string to_string(DensityKind kind);
ManifoldKind parse_manifold_kind(const std::string& name);
DensityKind parse_density_kind(const std::string& name);

int intrinsic_dim(ManifoldKind kind);
/// Dimension of the canonical embedding (circle 2, sphere 3, flat torus 4, swiss roll 3, interval 1).
int min_ambient_dim(ManifoldKind kind);

/// A known compact submanifold with a known sampling density.
///
/// Sampling happens in the canonical embedding. When ambient_dim exceeds the
/// canonical dimension the points are zero-padded and then rotated by a seeded
/// Haar-random orthogonal matrix, so the intrinsic geometry is unchanged.
/// The smooth-tilted density multiplies the uniform one by 1 + a·cos(·) of a
/// kind-specific intrinsic coordinate, with |a| < 1 (density_params = {a}).
struct ManifoldSpec {
  ManifoldKind kind = ManifoldKind::circle;
  int ambient_dim = 2;
  DensityKind density = DensityKind::uniform;
  std::vector<double> density_params;
  std::uint64_t seed = 0;

  int intrinsic_dim() const { return lapreg::intrinsic_dim(kind); }
  double tilt() const { return density == DensityKind::uniform ? 0.0 : density_params.at(0); }
  void validate() const;
};

/// Ground-truth regression functions with known Hölder regularity.
struct TruthFamily {
  enum class Kind { trig, holder_kink };
  Kind kind = Kind::trig;
  int frequency = 1;  // trig-k
  double beta = 1.0;  // holder-kink(β), β ∈ (0, 2]

  static TruthFamily trig(int k) { return {Kind::trig, k, 1.0}; }
  static TruthFamily holder_kink(double b) { return {Kind::holder_kink, 0, b}; }

  /// Hölder exponent of the generator; +inf for the smooth trig family.
  double smoothness() const {
    return kind == Kind::trig ? std::numeric_limits<double>::infinity() : beta;
  }
  std::string name() const;
  void validate() const;
};

struct PointCloud {
  Matrix points;  // N × D
  std::optional<Vector> true_values;
  std::optional<TruthFamily> truth;
  double holder_beta = std::numeric_limits<double>::infinity();
  ManifoldSpec manifold;

  Index size() const { return points.rows(); }
  Index ambient_dim() const { return points.cols(); }
};

PointCloud sample_cloud(const ManifoldSpec& spec, Index n);
PointCloud sample_cloud(const ManifoldSpec& spec, Index n, const TruthFamily& truth);

/// n draws from the density of `spec` using an explicit stream seed. The
/// embedding rotation still derives from spec.seed, so draws from different
/// streams live on the same embedded manifold.
Matrix sample_points(const ManifoldSpec& spec, Index n, std::uint64_t stream_seed);

/// D × D orthogonal embedding map (identity when D is the canonical dimension).
Matrix embedding_rotation(const ManifoldSpec& spec);

Vector eval_truth(const ManifoldSpec& spec, const Matrix& points, const TruthFamily& family);

/// Closed-form geodesic distance; circle, sphere2 and interval only.
double geodesic_dist(const ManifoldSpec& spec, const Vector& a, const Vector& b);

/// Largest distance of any row from the declared manifold (ambient units).
double max_manifold_deviation(const ManifoldSpec& spec, const Matrix& points);

/// CSV with header `x0..x{D-1},f0` plus a JSON sidecar holding the spec.
void write_cloud(const PointCloud& cloud, const std::filesystem::path& csv_path,
                 const std::filesystem::path& json_path);
PointCloud read_cloud(const std::filesystem::path& csv_path, const std::filesystem::path& json_path);

void to_json(nlohmann::json& j, const ManifoldSpec& spec);
void from_json(const nlohmann::json& j, ManifoldSpec& spec);
void to_json(nlohmann::json& j, const TruthFamily& family);
void from_json(const nlohmann::json& j, TruthFamily& family);

}  // namespace lapreg
