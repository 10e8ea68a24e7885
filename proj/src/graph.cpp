#include "lapreg/graph.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <unordered_map>

#include "json.hpp"

namespace lapreg {

RadiusIndex::RadiusIndex(const Matrix& points, double cell) : points_(points), cell_(cell) {
  require(cell > 0.0, "RadiusIndex: cell size must be positive");
  dims_ = static_cast<int>(std::min<Index>(points.cols(), 3));
  cells_.reserve(static_cast<std::size_t>(points.rows()));
  for (Index i = 0; i < points.rows(); ++i) cells_[key_of(points.row(i))].push_back(i);
}

namespace {

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

RadiusGraph build_graph(const Matrix& points, double h) {
  require(h > 0.0, "build_graph: h must be positive");
  require(points.rows() >= 1, "build_graph: empty point set");
  const Index n = points.rows();
  RadiusIndex index(points, h);

  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  for (Index i = 0; i < n; ++i) {
    index.for_each_within(points.row(i), h, [&](Index j) {
      triplets.emplace_back(i, j, 1.0);
      if (j > i) {
        const int a = find_root(parent, static_cast<int>(i));
        const int b = find_root(parent, static_cast<int>(j));
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    });
  }

  RadiusGraph g;
  g.n_vertices = n;
  g.h = h;
  g.adjacency.resize(n, n);
  g.adjacency.setFromTriplets(triplets.begin(), triplets.end());
  g.adjacency.makeCompressed();
  g.degrees = g.adjacency * Vector::Ones(n);
  g.nu = g.degrees / g.degrees.sum();

  std::unordered_map<int, int> label;
  g.components.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int root = find_root(parent, static_cast<int>(i));
    auto [it, inserted] = label.try_emplace(root, static_cast<int>(label.size()));
    g.components[static_cast<std::size_t>(i)] = it->second;
  }
  g.n_components = static_cast<int>(label.size());
  return g;
}

Vector ball_counts(const Matrix& points, double r) {
  require(r > 0.0, "ball_counts: radius must be positive");
  RadiusIndex index(points, r);
  Vector counts(points.rows());
  for (Index i = 0; i < points.rows(); ++i) {
    double c = 0.0;
    index.for_each_within(points.row(i), r, [&](Index) { c += 1.0; });
    counts(i) = c;
  }
  return counts;
}

LaplacianOperator::LaplacianOperator(RadiusGraph graph)
    : graph_(std::move(graph)), scale_(1.0 / (graph_.h * graph_.h)) {
  const Index n = graph_.n_vertices;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(graph_.adjacency.nonZeros()));
  for (Index x = 0; x < n; ++x) {
    const double inv_mu = 1.0 / graph_.degrees(x);
    for (SparseMatrix::InnerIterator it(graph_.adjacency, x); it; ++it) {
      const double delta = it.col() == x ? 1.0 : 0.0;
      triplets.emplace_back(x, it.col(), scale_ * (delta - inv_mu));
    }
  }
  matrix_.resize(n, n);
  matrix_.setFromTriplets(triplets.begin(), triplets.end());
  matrix_.makeCompressed();
}

Vector LaplacianOperator::apply(const Vector& f) const {
  require(f.size() == size(), "LaplacianOperator::apply: length mismatch");
  Vector out(size());
  for (Index x = 0; x < size(); ++x) {
    double acc = 0.0;
    for (SparseMatrix::InnerIterator it(graph_.adjacency, x); it; ++it) acc += f(x) - f(it.col());
    out(x) = scale_ * acc / graph_.degrees(x);
  }
  return out;
}

SparseMatrix LaplacianOperator::symmetric_normalized() const {
  const Index n = size();
  const Vector inv_sqrt = graph_.degrees.cwiseSqrt().cwiseInverse();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(graph_.adjacency.nonZeros()));
  for (Index x = 0; x < n; ++x) {
    for (SparseMatrix::InnerIterator it(graph_.adjacency, x); it; ++it) {
      const Index y = it.col();
      const double delta = y == x ? 1.0 : 0.0;
      triplets.emplace_back(x, y, delta - inv_sqrt(x) * inv_sqrt(y));
    }
  }
  SparseMatrix s(n, n);
  s.setFromTriplets(triplets.begin(), triplets.end());
  s.makeCompressed();
  return s;
}

LaplacianOperator laplacian(RadiusGraph graph) { return LaplacianOperator(std::move(graph)); }

double inner_nu(const Vector& nu, const Vector& f, const Vector& g) {
  require(f.size() == nu.size() && g.size() == nu.size(), "inner_nu: length mismatch");
  return (nu.array() * f.array() * g.array()).sum();
}

double dirichlet_form(const RadiusGraph& graph, const Vector& f, const Vector& g) {
  require(f.size() == graph.n_vertices && g.size() == graph.n_vertices, "dirichlet_form: length mismatch");
  double acc = 0.0;
  for (Index x = 0; x < graph.n_vertices; ++x) {
    for (SparseMatrix::InnerIterator it(graph.adjacency, x); it; ++it) {
      const Index y = it.col();
      acc += (f(x) - f(y)) * (g(x) - g(y));
    }
  }
  return acc / (2.0 * graph.volume());
}

void write_graph(const RadiusGraph& graph, const std::filesystem::path& edges_path,
                 const std::filesystem::path& meta_path) {
  std::ofstream edges(edges_path);
  require(edges.good(), "cannot open " + edges_path.string());
  for (Index x = 0; x < graph.n_vertices; ++x) {
    for (SparseMatrix::InnerIterator it(graph.adjacency, x); it; ++it) {
      if (it.col() >= x) edges << x << ' ' << it.col() << '\n';
    }
  }
  nlohmann::json meta;
  meta["N"] = graph.n_vertices;
  meta["h"] = graph.h;
  meta["mu"] = std::vector<double>(graph.degrees.data(), graph.degrees.data() + graph.degrees.size());
  meta["nu"] = std::vector<double>(graph.nu.data(), graph.nu.data() + graph.nu.size());
  meta["n_components"] = graph.n_components;
  meta["edges"] = edges_path.filename().string();
  std::ofstream js(meta_path);
  require(js.good(), "cannot open " + meta_path.string());
  js << std::setprecision(17) << meta.dump(2) << '\n';
}

}  // namespace lapreg
