#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <unordered_map>
#include <vector>

#include <Eigen/SparseCore>

#include "lapreg/common.hpp"
#include "lapreg/manifold.hpp"

namespace lapreg {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Unweighted random geometric graph: x_i ~ x_j iff ‖x_i − x_j‖ < h.
/// Every vertex is its own neighbor, so degrees are >= 1 and D⁻¹A is stochastic
/// even for isolated points.
struct RadiusGraph {
  Index n_vertices = 0;
  double h = 0.0;
  SparseMatrix adjacency;  // symmetric 0/1, unit diagonal
  Vector degrees;          // μ_x = #{y : ‖x − y‖ < h}
  Vector nu;               // μ / μ(V)
  std::vector<int> components;
  int n_components = 0;

  double volume() const { return degrees.sum(); }
  bool connected() const { return n_components == 1; }
};

/// Buckets points by their first min(D, 3) coordinates with a fixed cell size.
/// Points closer than the cell size have projections closer than the cell size,
/// so they sit in adjacent cells; the final full-dimensional test keeps queries exact.
class RadiusIndex {
 public:
  /// Keeps a reference to `points`, which must outlive the index.
  RadiusIndex(const Matrix& points, double cell);

  /// Calls visit(j) for every indexed point with ‖q − x_j‖ < r. Requires r <= cell.
  template <class Row, class Visit>
  void for_each_within(const Row& q, double r, Visit&& visit) const {
    const Key base = key_of(q);
    const double r2 = r * r;
    int span = 1;
    for (int d = 0; d < dims_; ++d) span *= 3;
    for (int code = 0; code < span; ++code) {
      Key k = base;
      int rest = code;
      for (int d = 0; d < dims_; ++d) {
        k[d] += rest % 3 - 1;
        rest /= 3;
      }
      auto it = cells_.find(k);
      if (it == cells_.end()) continue;
      for (Index j : it->second) {
        double acc = 0.0;
        for (Index c = 0; c < points_.cols() && acc < r2; ++c) {
          const double diff = q(c) - points_(j, c);
          acc += diff * diff;
        }
        if (acc < r2) visit(j);
      }
    }
  }

 private:
  using Key = std::array<std::int64_t, 3>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::size_t h = 1469598103934665603ULL;
      for (auto v : k) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ULL;
      return h;
    }
  };

  template <class Row>
  Key key_of(const Row& q) const {
    Key k{0, 0, 0};
    for (int d = 0; d < dims_; ++d) k[d] = static_cast<std::int64_t>(std::floor(q(d) / cell_));
    return k;
  }

  const Matrix& points_;
  double cell_;
  int dims_ = 0;
  std::unordered_map<Key, std::vector<Index>, KeyHash> cells_;
};

RadiusGraph build_graph(const Matrix& points, double h);
inline RadiusGraph build_graph(const PointCloud& cloud, double h) { return build_graph(cloud.points, h); }

/// Number of points within distance r of each point (self included), via the same
/// grid index as build_graph but without materializing edges.
Vector ball_counts(const Matrix& points, double r);

/// ℒ = h⁻²(I − D⁻¹A), stored sparse. Owns its graph.
class LaplacianOperator {
 public:
  explicit LaplacianOperator(RadiusGraph graph);

  const RadiusGraph& graph() const { return graph_; }
  double scale() const { return scale_; }
  Index size() const { return graph_.n_vertices; }

  /// (ℒf)(x) = h⁻² μ_x⁻¹ Σ_{y∼x} (f(x) − f(y))
  Vector apply(const Vector& f) const;
  const SparseMatrix& matrix() const { return matrix_; }

  /// I − D^{-1/2} A D^{-1/2}: the unscaled operator conjugated by Diag(ν)^{1/2},
  /// symmetric and similar to h²ℒ.
  SparseMatrix symmetric_normalized() const;

 private:
  RadiusGraph graph_;
  double scale_;
  SparseMatrix matrix_;
};

LaplacianOperator laplacian(RadiusGraph graph);

double inner_nu(const Vector& nu, const Vector& f, const Vector& g);
inline double inner_nu(const RadiusGraph& graph, const Vector& f, const Vector& g) {
  return inner_nu(graph.nu, f, g);
}

/// (1 / 2μ(V)) Σ_{x∼y} (f(x) − f(y))(g(x) − g(y)), the Dirichlet form of the unscaled L.
double dirichlet_form(const RadiusGraph& graph, const Vector& f, const Vector& g);

/// `i j` per undirected edge (i <= j, self-loops included) plus JSON {N, h, mu, nu}.
void write_graph(const RadiusGraph& graph, const std::filesystem::path& edges_path,
                 const std::filesystem::path& meta_path);

}  // namespace lapreg
