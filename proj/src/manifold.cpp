#include "lapreg/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <Eigen/QR>

namespace lapreg {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kRotationStream = 0x5207;
constexpr std::uint64_t kSampleStream = 0x5a3e;

// Swiss roll: spiral (t cos t, s, t sin t), t ∈ [1.5π, 4.5π], s ∈ [0, 10], scaled by 0.1.
constexpr double kRollT0 = 1.5 * kPi;
constexpr double kRollT1 = 4.5 * kPi;
constexpr double kRollHeight = 10.0;
constexpr double kRollScale = 0.1;

double wrap_angle(double a) {
  // maps to (−π, π]
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

// Arc length of the spiral r = t from 0 to t.
double roll_arclength(double t) { return 0.5 * (t * std::sqrt(1.0 + t * t) + std::asinh(t)); }

struct Intrinsic {
  double a = 0.0;  // circle θ, sphere polar φ, torus u, roll t, interval x
  double b = 0.0;  // sphere azimuth, torus v, roll height s
};

Vector canonical_point(ManifoldKind kind, const Intrinsic& c) {
  switch (kind) {
    case ManifoldKind::circle:
      return Eigen::Vector2d(std::cos(c.a), std::sin(c.a));
    case ManifoldKind::sphere2:
      return Eigen::Vector3d(std::sin(c.a) * std::cos(c.b), std::sin(c.a) * std::sin(c.b),
                             std::cos(c.a));
    case ManifoldKind::flat_torus:
      return Eigen::Vector4d(std::cos(c.a), std::sin(c.a), std::cos(c.b), std::sin(c.b));
    case ManifoldKind::swiss_roll:
      return kRollScale * Eigen::Vector3d(c.a * std::cos(c.a), c.b, c.a * std::sin(c.a));
    case ManifoldKind::interval: {
      Vector v(1);
      v(0) = c.a;
      return v;
    }
  }
  throw Error("canonical_point: unknown manifold kind");
}

Intrinsic intrinsic_of(ManifoldKind kind, const Vector& x) {
  switch (kind) {
    case ManifoldKind::circle:
      return {std::atan2(x(1), x(0)), 0.0};
    case ManifoldKind::sphere2: {
      const double r = x.head<3>().norm();
      return {std::acos(std::clamp(x(2) / r, -1.0, 1.0)), std::atan2(x(1), x(0))};
    }
    case ManifoldKind::flat_torus:
      return {std::atan2(x(1), x(0)), std::atan2(x(3), x(2))};
    case ManifoldKind::swiss_roll: {
      const double t = std::hypot(x(0), x(2)) / kRollScale;
      return {t, x(1) / kRollScale};
    }
    case ManifoldKind::interval:
      return {x(0), 0.0};
  }
  throw Error("intrinsic_of: unknown manifold kind");
}

// Unnormalized density factor relative to the volume measure, for rejection sampling.
double tilt_factor(ManifoldKind kind, const Intrinsic& c, double a) {
  switch (kind) {
    case ManifoldKind::circle:
      return 1.0 + a * std::cos(c.a);
    case ManifoldKind::sphere2:
      return 1.0 + a * std::cos(c.a);
    case ManifoldKind::flat_torus:
      return 1.0 + a * std::cos(c.a);
    case ManifoldKind::swiss_roll:
      return 1.0 + a * std::cos(2.0 * kPi * (c.a - kRollT0) / (kRollT1 - kRollT0));
    case ManifoldKind::interval:
      return 1.0 + a * std::cos(2.0 * kPi * c.a);
  }
  return 1.0;
}

Intrinsic draw_intrinsic(const ManifoldSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double a = spec.tilt();
  const double bound = 1.0 + std::abs(a);
  for (;;) {
    Intrinsic c;
    double accept_weight = 1.0;
    switch (spec.kind) {
      case ManifoldKind::circle:
        c.a = -kPi + 2.0 * kPi * unit(rng);
        break;
      case ManifoldKind::sphere2: {
        // uniform on the sphere: z = cos φ uniform on [−1, 1]
        const double z = -1.0 + 2.0 * unit(rng);
        c.a = std::acos(z);
        c.b = -kPi + 2.0 * kPi * unit(rng);
        break;
      }
      case ManifoldKind::flat_torus:
        c.a = -kPi + 2.0 * kPi * unit(rng);
        c.b = -kPi + 2.0 * kPi * unit(rng);
        break;
      case ManifoldKind::swiss_roll:
        c.a = kRollT0 + (kRollT1 - kRollT0) * unit(rng);
        c.b = kRollHeight * unit(rng);
        // area element of the spiral surface is sqrt(1 + t²) dt ds
        accept_weight = std::sqrt(1.0 + c.a * c.a) / std::sqrt(1.0 + kRollT1 * kRollT1);
        break;
      case ManifoldKind::interval:
        c.a = unit(rng);
        break;
    }
    const double w = accept_weight * tilt_factor(spec.kind, c, a) / bound;
    if (w >= 1.0 || unit(rng) < w) return c;
  }
}

Vector to_canonical(const ManifoldSpec& spec, const Matrix& rotation, const Vector& x) {
  const int m = min_ambient_dim(spec.kind);
  if (spec.ambient_dim == m) return x;
  return (rotation.transpose() * x).head(m);
}

std::string density_name(DensityKind k) { return k == DensityKind::uniform ? "uniform" : "smooth-tilted"; }

}  // namespace

std::string to_string(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::circle: return "circle";
    case ManifoldKind::sphere2: return "sphere2";
    case ManifoldKind::flat_torus: return "flat-torus-embedded";
    case ManifoldKind::swiss_roll: return "swiss-roll";
    case ManifoldKind::interval: return "interval";
  }
  return "unknown";
}

std::string to_string(DensityKind kind) { return density_name(kind); }

ManifoldKind parse_manifold_kind(const std::string& name) {
  if (name == "circle") return ManifoldKind::circle;
  if (name == "sphere2" || name == "sphere") return ManifoldKind::sphere2;
  if (name == "flat-torus-embedded" || name == "torus") return ManifoldKind::flat_torus;
  if (name == "swiss-roll") return ManifoldKind::swiss_roll;
  if (name == "interval") return ManifoldKind::interval;
  throw Error("unknown manifold kind '" + name + "'");
}

DensityKind parse_density_kind(const std::string& name) {
  if (name == "uniform") return DensityKind::uniform;
  if (name == "smooth-tilted") return DensityKind::smooth_tilted;
  throw Error("unknown density kind '" + name + "'");
}

int intrinsic_dim(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::circle:
    case ManifoldKind::interval:
      return 1;
    case ManifoldKind::sphere2:
    case ManifoldKind::flat_torus:
    case ManifoldKind::swiss_roll:
      return 2;
  }
  return 0;
}

int min_ambient_dim(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::circle: return 2;
    case ManifoldKind::sphere2: return 3;
    case ManifoldKind::flat_torus: return 4;
    case ManifoldKind::swiss_roll: return 3;
    case ManifoldKind::interval: return 1;
  }
  return 0;
}

void ManifoldSpec::validate() const {
  if (ambient_dim < min_ambient_dim(kind)) {
    throw Error("unsupported pairing: " + to_string(kind) + " needs ambient dimension >= " +
                std::to_string(min_ambient_dim(kind)) + ", got " + std::to_string(ambient_dim));
  }
  if (density == DensityKind::smooth_tilted) {
    require(density_params.size() == 1, "smooth-tilted density takes exactly one parameter");
    require(std::abs(density_params[0]) < 1.0, "smooth-tilted amplitude must satisfy |a| < 1");
  }
}

std::string TruthFamily::name() const {
  std::ostringstream os;
  if (kind == Kind::trig) {
    os << "trig-" << frequency;
  } else {
    os << "holder-kink(" << beta << ")";
  }
  return os.str();
}

void TruthFamily::validate() const {
  if (kind == Kind::trig) {
    require(frequency >= 0, "trig family needs frequency k >= 0");
  } else {
    require(beta > 0.0 && beta <= 2.0, "holder-kink family needs beta in (0, 2]");
  }
}

Matrix embedding_rotation(const ManifoldSpec& spec) {
  const int dim = spec.ambient_dim;
  if (dim == min_ambient_dim(spec.kind)) return Matrix::Identity(dim, dim);
  Rng rng(split_seed(spec.seed, kRotationStream));
  std::normal_distribution<double> normal;
  Matrix g(dim, dim);
  for (Index j = 0; j < dim; ++j)
    for (Index i = 0; i < dim; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(dim, dim);
  // sign fix makes Q Haar-distributed
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < dim; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

Matrix sample_points(const ManifoldSpec& spec, Index n, std::uint64_t stream_seed) {
  spec.validate();
  require(n >= 1, "sample_points: N must be >= 1");
  const int m = min_ambient_dim(spec.kind);
  const Matrix rotation = embedding_rotation(spec);
  Rng rng(stream_seed);
  Matrix points(n, spec.ambient_dim);
  Vector padded = Vector::Zero(spec.ambient_dim);
  for (Index i = 0; i < n; ++i) {
    const Vector c = canonical_point(spec.kind, draw_intrinsic(spec, rng));
    if (spec.ambient_dim == m) {
      points.row(i) = c.transpose();
    } else {
      padded.head(m) = c;
      points.row(i) = (rotation * padded).transpose();
    }
  }
  return points;
}

PointCloud sample_cloud(const ManifoldSpec& spec, Index n) {
  PointCloud cloud;
  cloud.manifold = spec;
  cloud.points = sample_points(spec, n, split_seed(spec.seed, kSampleStream));
  return cloud;
}

PointCloud sample_cloud(const ManifoldSpec& spec, Index n, const TruthFamily& truth) {
  truth.validate();
  PointCloud cloud = sample_cloud(spec, n);
  cloud.true_values = eval_truth(spec, cloud.points, truth);
  cloud.truth = truth;
  cloud.holder_beta = truth.smoothness();
  return cloud;
}

Vector eval_truth(const ManifoldSpec& spec, const Matrix& points, const TruthFamily& family) {
  spec.validate();
  family.validate();
  require(points.cols() == spec.ambient_dim, "eval_truth: point dimension mismatch");
  const Matrix rotation = embedding_rotation(spec);
  const bool trig = family.kind == TruthFamily::Kind::trig;
  const double k = family.frequency;
  const double beta = family.beta;
  Vector out(points.rows());
  for (Index i = 0; i < points.rows(); ++i) {
    const Intrinsic c = intrinsic_of(spec.kind, to_canonical(spec, rotation, points.row(i).transpose()));
    double v = 0.0;
    switch (spec.kind) {
      case ManifoldKind::circle:
        v = trig ? std::cos(k * c.a) : std::pow(std::abs(c.a), beta);
        break;
      case ManifoldKind::sphere2:
        // cos(kφ) = T_k(z) is a polynomial in z, hence smooth on the sphere
        v = trig ? std::cos(k * c.a) : std::pow(c.a, beta);
        break;
      case ManifoldKind::flat_torus:
        v = trig ? std::cos(k * c.a) * std::cos(k * c.b)
                 : std::pow(std::hypot(wrap_angle(c.a), wrap_angle(c.b)), beta);
        break;
      case ManifoldKind::swiss_roll: {
        if (trig) {
          v = std::cos(k * kPi * (c.a - kRollT0) / (kRollT1 - kRollT0));
        } else {
          const double tm = 0.5 * (kRollT0 + kRollT1);
          const double du = kRollScale * (roll_arclength(c.a) - roll_arclength(tm));
          const double dv = kRollScale * (c.b - 0.5 * kRollHeight);
          v = std::pow(std::hypot(du, dv), beta);
        }
        break;
      }
      case ManifoldKind::interval:
        v = trig ? std::cos(k * kPi * c.a) : std::pow(std::abs(c.a - 0.5), beta);
        break;
    }
    out(i) = v;
  }
  return out;
}

double geodesic_dist(const ManifoldSpec& spec, const Vector& a, const Vector& b) {
  require(a.size() == spec.ambient_dim && b.size() == spec.ambient_dim,
          "geodesic_dist: point dimension mismatch");
  switch (spec.kind) {
    case ManifoldKind::circle:
    case ManifoldKind::sphere2:
      // unit radius: ρ = 2 asin(chord / 2)
      return 2.0 * std::asin(std::min(1.0, 0.5 * (a - b).norm()));
    case ManifoldKind::interval:
      return (a - b).norm();
    default:
      throw Error("geodesic_dist: no closed form for " + to_string(spec.kind));
  }
}

double max_manifold_deviation(const ManifoldSpec& spec, const Matrix& points) {
  const Matrix rotation = embedding_rotation(spec);
  const int m = min_ambient_dim(spec.kind);
  double worst = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    const Vector x = points.row(i).transpose();
    const Vector local = rotation.transpose() * x;
    double off = spec.ambient_dim > m ? local.tail(spec.ambient_dim - m).norm() : 0.0;
    const Vector c = local.head(m);
    double dev = 0.0;
    switch (spec.kind) {
      case ManifoldKind::circle:
      case ManifoldKind::sphere2:
        dev = std::abs(c.norm() - 1.0);
        break;
      case ManifoldKind::flat_torus:
        dev = std::abs(c.head<2>().norm() - 1.0) + std::abs(c.tail<2>().norm() - 1.0);
        break;
      case ManifoldKind::swiss_roll: {
        const Intrinsic in = intrinsic_of(spec.kind, c);
        dev = (canonical_point(spec.kind, in) - c).norm();
        if (in.a < kRollT0 - 1e-9 || in.a > kRollT1 + 1e-9) dev = std::max(dev, 1.0);
        break;
      }
      case ManifoldKind::interval:
        dev = std::max({0.0, -c(0), c(0) - 1.0});
        break;
    }
    worst = std::max(worst, std::hypot(dev, off));
  }
  return worst;
}

void to_json(nlohmann::json& j, const ManifoldSpec& spec) {
  j = nlohmann::json{{"kind", to_string(spec.kind)},
                     {"ambient_dim", spec.ambient_dim},
                     {"intrinsic_dim", spec.intrinsic_dim()},
                     {"density", to_string(spec.density)},
                     {"density_params", spec.density_params},
                     {"seed", spec.seed}};
}

void from_json(const nlohmann::json& j, ManifoldSpec& spec) {
  spec.kind = parse_manifold_kind(j.at("kind").get<std::string>());
  spec.ambient_dim = j.value("ambient_dim", min_ambient_dim(spec.kind));
  spec.density = parse_density_kind(j.value("density", std::string("uniform")));
  spec.density_params = j.value("density_params", std::vector<double>{});
  spec.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("intrinsic_dim")) {
    require(j.at("intrinsic_dim").get<int>() == spec.intrinsic_dim(),
            "intrinsic_dim does not match manifold kind " + to_string(spec.kind));
  }
  spec.validate();
}

void to_json(nlohmann::json& j, const TruthFamily& family) {
  if (family.kind == TruthFamily::Kind::trig) {
    j = nlohmann::json{{"family", "trig"}, {"k", family.frequency}};
  } else {
    j = nlohmann::json{{"family", "holder-kink"}, {"beta", family.beta}};
  }
}

void from_json(const nlohmann::json& j, TruthFamily& family) {
  const auto name = j.at("family").get<std::string>();
  if (name == "trig") {
    family = TruthFamily::trig(j.value("k", 1));
  } else if (name == "holder-kink") {
    family = TruthFamily::holder_kink(j.at("beta").get<double>());
  } else {
    throw Error("unknown truth family '" + name + "'");
  }
  family.validate();
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& csv_path,
                 const std::filesystem::path& json_path) {
  std::ofstream csv(csv_path);
  require(csv.good(), "cannot open " + csv_path.string());
  const Index dim = cloud.ambient_dim();
  for (Index c = 0; c < dim; ++c) csv << 'x' << c << ',';
  csv << "f0\n";
  csv << std::setprecision(17);
  for (Index i = 0; i < cloud.size(); ++i) {
    for (Index c = 0; c < dim; ++c) csv << cloud.points(i, c) << ',';
    if (cloud.true_values) {
      csv << (*cloud.true_values)(i);
    } else {
      csv << "nan";
    }
    csv << '\n';
  }

  nlohmann::json meta;
  meta["manifold"] = cloud.manifold;
  meta["N"] = cloud.size();
  meta["holder_beta"] = std::isfinite(cloud.holder_beta) ? nlohmann::json(cloud.holder_beta) : nlohmann::json();
  if (cloud.truth) meta["truth"] = *cloud.truth;
  meta["csv"] = csv_path.filename().string();
  std::ofstream js(json_path);
  require(js.good(), "cannot open " + json_path.string());
  js << meta.dump(2) << '\n';
}

PointCloud read_cloud(const std::filesystem::path& csv_path, const std::filesystem::path& json_path) {
  std::ifstream js(json_path);
  require(js.good(), "cannot open " + json_path.string());
  const auto meta = nlohmann::json::parse(js);

  PointCloud cloud;
  cloud.manifold = meta.at("manifold").get<ManifoldSpec>();
  if (meta.contains("truth")) cloud.truth = meta.at("truth").get<TruthFamily>();
  if (!meta.at("holder_beta").is_null()) cloud.holder_beta = meta.at("holder_beta").get<double>();

  std::ifstream csv(csv_path);
  require(csv.good(), "cannot open " + csv_path.string());
  std::string line;
  std::getline(csv, line);
  const Index dim = cloud.manifold.ambient_dim;
  std::vector<std::vector<double>> rows;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    require(static_cast<Index>(row.size()) == dim + 1, "read_cloud: malformed row in " + csv_path.string());
    rows.push_back(std::move(row));
  }
  const Index n = static_cast<Index>(rows.size());
  cloud.points.resize(n, dim);
  Vector f(n);
  bool has_truth = n > 0;
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < dim; ++c) cloud.points(i, c) = rows[i][c];
    f(i) = rows[i][dim];
    if (std::isnan(f(i))) has_truth = false;
  }
  if (has_truth) cloud.true_values = f;
  return cloud;
}

}  // namespace lapreg
