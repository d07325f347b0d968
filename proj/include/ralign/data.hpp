#pragma once

#include "ralign/core.hpp"
#include "ralign/cost.hpp"
#include "ralign/geom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ralign {

enum class CloudFormat { Csv, PlyAscii };

inline CloudFormat format_from_path(const std::string& path) {
  const auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == "ply") return CloudFormat::PlyAscii;
  return CloudFormat::Csv;
}

namespace detail {

inline double parse_real(const std::string& field, const std::string& context) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &pos);
  } catch (const std::exception&) {
    throw InvalidArgument("bad numeric field in " + context + ": " + field);
  }
  while (pos < field.size() && std::isspace(static_cast<unsigned char>(field[pos])))
    ++pos;
  if (pos != field.size())
    throw InvalidArgument("bad numeric field in " + context + ": " + field);
  if (!std::isfinite(v))
    throw InvalidArgument("non-finite value in " + context);
  return v;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline PointCloud load_csv(std::istream& in) {
  std::vector<Vector> points;
  int dim = -1;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (dim < 0) dim = static_cast<int>(fields.size());
    if (static_cast<int>(fields.size()) != dim)
      throw InvalidArgument("inconsistent field count at line " +
                            std::to_string(lineno));
    Vector p(dim);
    for (int k = 0; k < dim; ++k)
      p(k) = parse_real(fields[static_cast<size_t>(k)],
                        "line " + std::to_string(lineno));
    points.push_back(std::move(p));
  }
  if (points.empty()) throw InvalidArgument("empty point file");
  return PointCloud(std::move(points), dim);
}

inline PointCloud load_ply_ascii(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ply") throw InvalidArgument("missing ply magic");

  long vertex_count = -1;
  int x_col = -1, y_col = -1, z_col = -1;
  int prop_count = 0;
  bool in_vertex_element = false;
  bool saw_format = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "comment") continue;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii")
        throw InvalidArgument("only ascii ply is supported");
      saw_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() < 3) throw InvalidArgument("malformed element line");
      in_vertex_element = tok[1] == "vertex";
      if (in_vertex_element) vertex_count = std::stol(tok[2]);
    } else if (tok[0] == "property") {
      if (!in_vertex_element) continue;
      if (tok.size() < 3) throw InvalidArgument("malformed property line");
      if (tok[1] == "list") throw InvalidArgument("list property in vertex element");
      const std::string& name = tok[2];
      if (name == "x") x_col = prop_count;
      if (name == "y") y_col = prop_count;
      if (name == "z") z_col = prop_count;
      ++prop_count;
    } else if (tok[0] == "end_header") {
      break;
    }
  }
  if (!saw_format) throw InvalidArgument("missing ply format line");
  if (vertex_count < 1) throw InvalidArgument("missing vertex element");
  if (x_col < 0 || y_col < 0 || z_col < 0)
    throw InvalidArgument("vertex element lacks x/y/z properties");

  std::vector<Vector> points;
  points.reserve(static_cast<size_t>(vertex_count));
  for (long i = 0; i < vertex_count; ++i) {
    if (!std::getline(in, line))
      throw InvalidArgument("truncated vertex data");
    const auto tok = split_ws(line);
    if (static_cast<int>(tok.size()) < prop_count)
      throw InvalidArgument("short vertex line " + std::to_string(i));
    Vector p(3);
    p(0) = parse_real(tok[static_cast<size_t>(x_col)], "vertex " + std::to_string(i));
    p(1) = parse_real(tok[static_cast<size_t>(y_col)], "vertex " + std::to_string(i));
    p(2) = parse_real(tok[static_cast<size_t>(z_col)], "vertex " + std::to_string(i));
    points.push_back(std::move(p));
  }
  return PointCloud(std::move(points), 3);
}

}  // namespace detail

inline PointCloud load_cloud(const std::string& path, CloudFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return format == CloudFormat::Csv ? detail::load_csv(in)
                                    : detail::load_ply_ascii(in);
}

inline PointCloud load_cloud(const std::string& path) {
  return load_cloud(path, format_from_path(path));
}

inline void save_cloud(const PointCloud& cloud, const std::string& path,
                       CloudFormat format) {
  std::ofstream out(path, std::ios::binary);  // binary: LF endings everywhere
  if (!out) throw std::runtime_error("cannot write " + path);
  char buf[64];
  if (format == CloudFormat::PlyAscii) {
    if (cloud.dim != 3) throw InvalidArgument("ply output requires d = 3");
    out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
        << "\nproperty double x\nproperty double y\nproperty double z\n"
           "end_header\n";
    for (const auto& p : cloud.points) {
      for (int k = 0; k < 3; ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", p(k));
        out << buf << (k == 2 ? '\n' : ' ');
      }
    }
  } else {
    for (const auto& p : cloud.points) {
      for (int k = 0; k < cloud.dim; ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", p(k));
        out << buf << (k == cloud.dim - 1 ? '\n' : ',');
      }
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

/// Uniform scale + translation so the tight bounding box is centered at the
/// origin with max half-extent 0.5. Zero-extent clouds are centered only.
inline PointCloud normalize_to_cube(const PointCloud& cloud) {
  if (cloud.empty()) throw InvalidArgument("empty cloud");
  Vector lo = cloud.points.front(), hi = cloud.points.front();
  for (const auto& p : cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vector center = 0.5 * (lo + hi);
  const double extent = (hi - lo).maxCoeff();
  const double scale = extent > 0.0 ? 1.0 / extent : 1.0;
  PointCloud out(cloud.dim);
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(scale * (p - center));
  return out;
}

/// Parameters of one synthetic (or model-sampled) benchmark instance.
struct InstanceSpec {
  std::string source;  // empty: uniform cube; otherwise a point file path
  int n = 0;
  int d = 3;
  double sigma2 = 0.0;
  double translation_bound = 0.1;
  bool shuffle = false;
  double outlier_fraction = 0.0;
  double outlier_sigma2 = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (d < 2 || d > 16) throw InvalidArgument("dimension out of range");
    if (n < d) throw InvalidArgument("n must be at least d");
    if (sigma2 < 0.0) throw InvalidArgument("sigma2 must be nonnegative");
    if (outlier_fraction < 0.0 || outlier_fraction >= 1.0)
      throw InvalidArgument("outlier fraction out of [0,1)");
    if (outlier_sigma2 < 0.0) throw InvalidArgument("outlier sigma2 negative");
    if (translation_bound < 0.0) throw InvalidArgument("negative translation bound");
  }
};

struct GeneratedInstance {
  PointCloud P;
  PointCloud Q;
  Alignment true_alignment;  // maps Q onto P (before noise / shuffle)
  Matching true_matching;    // P-index -> Q-index
  std::vector<int> outlier_indices;  // P-indices, post-shuffle
};

namespace detail {

inline Matrix random_rotation(int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  if (d == 3) {
    // Per-axis rotations composed in x, y, z order.
    Matrix r = Matrix::Identity(3, 3);
    for (int axis = 0; axis < 3; ++axis) {
      const double a = angle(rng);
      const double c = std::cos(a), s = std::sin(a);
      Matrix g = Matrix::Identity(3, 3);
      const int i = (axis + 1) % 3, j = (axis + 2) % 3;
      g(i, i) = c;
      g(j, j) = c;
      g(i, j) = -s;
      g(j, i) = s;
      r = g * r;
    }
    return r;
  }
  if (d == 2) {
    const double a = angle(rng);
    Matrix r(2, 2);
    r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return r;
  }
  // General d: orthonormalize a Gaussian matrix, fix the determinant sign.
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = gauss(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  Matrix rm = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < d; ++k)
    if (rm(k, k) < 0.0) q.col(k) = -q.col(k);
  if (q.determinant() < 0.0) q.col(d - 1) = -q.col(d - 1);
  return q;
}

inline Vector random_ball_point(int d, double radius, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector dir(d);
  do {
    for (int k = 0; k < d; ++k) dir(k) = gauss(rng);
  } while (dir.norm() == 0.0);
  dir.normalize();
  return radius * std::pow(unit(rng), 1.0 / d) * dir;
}

}  // namespace detail

/// The synthetic benchmark protocol: Q is n points from the source (scaled to
/// the unit cube), P is Q under a random rigid alignment plus Gaussian noise,
/// with optional extra corruption on a fraction of points and an optional
/// recorded shuffle. Fully deterministic under the spec's seed.
inline GeneratedInstance generate_instance(const InstanceSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);

  PointCloud Q(spec.d);
  if (spec.source.empty()) {
    std::uniform_real_distribution<double> cube(-0.5, 0.5);
    Q.points.reserve(static_cast<size_t>(spec.n));
    for (int i = 0; i < spec.n; ++i) {
      Vector p(spec.d);
      for (int k = 0; k < spec.d; ++k) p(k) = cube(rng);
      Q.push_back(std::move(p));
    }
  } else {
    const PointCloud model = normalize_to_cube(load_cloud(spec.source));
    if (model.dim != spec.d) throw InvalidArgument("model dimension mismatch");
    std::uniform_int_distribution<int> pick(0, model.size() - 1);
    Q.points.reserve(static_cast<size_t>(spec.n));
    for (int i = 0; i < spec.n; ++i) Q.push_back(model[pick(rng)]);
  }

  const Matrix r = detail::random_rotation(spec.d, rng);
  const Vector t = detail::random_ball_point(spec.d, spec.translation_bound, rng);
  const Alignment a{r, t};

  PointCloud P = apply_alignment(Q, a);
  if (spec.sigma2 > 0.0) {
    std::normal_distribution<double> noise(0.0, std::sqrt(spec.sigma2));
    for (auto& p : P.points)
      for (int k = 0; k < spec.d; ++k) p(k) += noise(rng);
  }

  const int n_out = static_cast<int>(std::lround(spec.outlier_fraction * spec.n));
  std::vector<int> outliers;
  if (n_out > 0) {
    std::vector<int> idx(static_cast<size_t>(spec.n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int k = 0; k < n_out; ++k) {
      std::uniform_int_distribution<int> pick(k, spec.n - 1);
      std::swap(idx[static_cast<size_t>(k)], idx[static_cast<size_t>(pick(rng))]);
    }
    outliers.assign(idx.begin(), idx.begin() + n_out);
    std::sort(outliers.begin(), outliers.end());
    std::normal_distribution<double> big(0.0, std::sqrt(spec.outlier_sigma2));
    for (int i : outliers)
      for (int k = 0; k < spec.d; ++k) P[i](k) += big(rng);
  }

  GeneratedInstance out;
  out.true_matching = Matching::identity(spec.n);
  if (spec.shuffle) {
    std::vector<int> perm(static_cast<size_t>(spec.n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    PointCloud shuffled(spec.d);
    shuffled.points.resize(static_cast<size_t>(spec.n));
    std::vector<int> new_pos(static_cast<size_t>(spec.n));
    for (int i = 0; i < spec.n; ++i) {
      // P[i] moves to slot perm[i]; the point in slot j came from index
      // perm^{-1}(j), so it pairs with Q[perm^{-1}(j)].
      shuffled[perm[static_cast<size_t>(i)]] = P[i];
      new_pos[static_cast<size_t>(i)] = perm[static_cast<size_t>(i)];
    }
    Matching m;
    m.map.resize(static_cast<size_t>(spec.n));
    for (int i = 0; i < spec.n; ++i)
      m.map[static_cast<size_t>(perm[static_cast<size_t>(i)])] = i;
    m.bijective = true;
    out.true_matching = std::move(m);
    P = std::move(shuffled);
    for (auto& i : outliers) i = new_pos[static_cast<size_t>(i)];
    std::sort(outliers.begin(), outliers.end());
  }

  out.P = std::move(P);
  out.Q = std::move(Q);
  out.true_alignment = a;
  out.outlier_indices = std::move(outliers);
  return out;
}

}  // namespace ralign
