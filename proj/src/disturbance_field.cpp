#include "asvempc/disturbance_field.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace asvempc {

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& msg) {
  std::ostringstream os;
  os << path << ":" << line << ": " << msg;
  throw std::runtime_error(os.str());
}

// locale-independent strict double parse
bool parse_double(const std::string& tok, double& out) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end != begin && *end == '\0' && std::isfinite(out);
}

}  // namespace

DisturbanceSpec grid_disturbance(std::shared_ptr<const GridField> grid, std::string path) {
  if (!grid) throw std::invalid_argument("grid disturbance: missing field");
  DisturbanceSpec s;
  s.kind = DisturbanceKind::grid;
  s.grid = std::move(grid);
  s.grid_path = std::move(path);
  return s;
}

GridField load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open grid file");

  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) parse_fail(path, 1, "empty file");
  ++lineno;
  // tolerate a UTF-8 BOM and surrounding whitespace on the header
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::string header = line;
  header.erase(std::remove_if(header.begin(), header.end(),
                              [](unsigned char c) { return std::isspace(c); }),
               header.end());
  if (header != "x,y,taux,tauy") parse_fail(path, lineno, "expected header x,y,taux,tauy");

  struct Row {
    double x, y, tx, ty;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++lineno;
    std::string trimmed = line;
    trimmed.erase(std::remove(trimmed.begin(), trimmed.end(), '\r'), trimmed.end());
    if (trimmed.empty()) continue;
    std::stringstream ss(trimmed);
    std::string tok;
    double vals[4];
    for (int i = 0; i < 4; ++i) {
      if (!std::getline(ss, tok, ',')) parse_fail(path, lineno, "malformed row: expected 4 fields");
      if (!parse_double(tok, vals[i]))
        parse_fail(path, lineno, "malformed row: bad number '" + tok + "'");
    }
    if (std::getline(ss, tok, ','))
      parse_fail(path, lineno, "malformed row: expected 4 fields");
    rows.push_back({vals[0], vals[1], vals[2], vals[3]});
  }
  if (rows.empty()) parse_fail(path, lineno, "no data rows");

  // rows are row-major with x as the outer axis: y knots repeat per x block
  std::vector<double> ys;
  size_t i = 0;
  while (i < rows.size() && rows[i].x == rows[0].x) {
    ys.push_back(rows[i].y);
    ++i;
  }
  const size_t ny = ys.size();
  if (ny < 2) parse_fail(path, 2, "grid needs at least 2 y knots");
  for (size_t j = 1; j < ny; ++j)
    if (!(ys[j] > ys[j - 1])) parse_fail(path, static_cast<int>(2 + j), "non-monotone axis: y knots must increase");
  if (rows.size() % ny != 0)
    parse_fail(path, lineno, "dimension mismatch: row count not a multiple of y knot count");
  const size_t nx = rows.size() / ny;
  if (nx < 2) parse_fail(path, lineno, "grid needs at least 2 x knots");

  GridField f;
  f.xs.resize(static_cast<Eigen::Index>(nx));
  f.ys.resize(static_cast<Eigen::Index>(ny));
  for (size_t j = 0; j < ny; ++j) f.ys[static_cast<Eigen::Index>(j)] = ys[j];
  f.taux.resize(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(ny));
  f.tauy.resize(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(ny));

  for (size_t bi = 0; bi < nx; ++bi) {
    const size_t base = bi * ny;
    f.xs[static_cast<Eigen::Index>(bi)] = rows[base].x;
    if (bi > 0 && !(rows[base].x > rows[(bi - 1) * ny].x))
      parse_fail(path, static_cast<int>(2 + base), "non-monotone axis: x knots must increase");
    for (size_t j = 0; j < ny; ++j) {
      const Row& r = rows[base + j];
      if (r.x != rows[base].x)
        parse_fail(path, static_cast<int>(2 + base + j), "dimension mismatch: ragged x block");
      if (r.y != ys[j])
        parse_fail(path, static_cast<int>(2 + base + j), "dimension mismatch: y knots differ between x blocks");
      f.taux(static_cast<Eigen::Index>(bi), static_cast<Eigen::Index>(j)) = r.tx;
      f.tauy(static_cast<Eigen::Index>(bi), static_cast<Eigen::Index>(j)) = r.ty;
    }
  }
  return f;
}

void write_grid_csv(const GridField& field, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "x,y,taux,tauy\n";
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < field.xs.size(); ++i)
    for (Eigen::Index j = 0; j < field.ys.size(); ++j)
      out << field.xs[i] << "," << field.ys[j] << "," << field.taux(i, j) << ","
          << field.tauy(i, j) << "\n";
  if (!out) throw std::runtime_error(path + ": write failed");
}

namespace {

// index of the cell [knots[k], knots[k+1]] containing v, clamped to the ends
Eigen::Index cell_index(const Eigen::VectorXd& knots, double v) {
  Eigen::Index lo = 0;
  Eigen::Index hi = knots.size() - 2;
  if (v <= knots[0]) return 0;
  if (v >= knots[knots.size() - 1]) return hi;
  while (lo < hi) {
    const Eigen::Index mid = (lo + hi + 1) / 2;
    if (knots[mid] <= v)
      lo = mid;
    else
      hi = mid - 1;
  }
  return lo;
}

}  // namespace

Eigen::Vector2d sample_grid(const GridField& field, double x, double y) {
  const double cx = std::clamp(x, field.xs[0], field.xs[field.xs.size() - 1]);
  const double cy = std::clamp(y, field.ys[0], field.ys[field.ys.size() - 1]);
  const Eigen::Index i = cell_index(field.xs, cx);
  const Eigen::Index j = cell_index(field.ys, cy);
  const double tx = (cx - field.xs[i]) / (field.xs[i + 1] - field.xs[i]);
  const double ty = (cy - field.ys[j]) / (field.ys[j + 1] - field.ys[j]);
  Eigen::Vector2d out;
  for (int c = 0; c < 2; ++c) {
    const Eigen::MatrixXd& m = c == 0 ? field.taux : field.tauy;
    const double v00 = m(i, j), v10 = m(i + 1, j), v01 = m(i, j + 1), v11 = m(i + 1, j + 1);
    out[c] = (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 + (1 - tx) * ty * v01 +
             tx * ty * v11;
  }
  return out;
}

BodyWrench sample(const DisturbanceSpec& spec, const Eigen::Vector2d& position, double psi) {
  switch (spec.kind) {
    case DisturbanceKind::none:
      return {0, 0, 0};
    case DisturbanceKind::constant_body:
      return {spec.a, spec.b, 0};
    case DisturbanceKind::constant_inertial:
    case DisturbanceKind::grid: {
      Eigen::Vector2d inertial(spec.a, spec.b);
      if (spec.kind == DisturbanceKind::grid) {
        if (!spec.grid) throw std::logic_error("grid disturbance: field not loaded");
        inertial = sample_grid(*spec.grid, position.x(), position.y());
      }
      const double c = std::cos(psi), s = std::sin(psi);
      // R(psi)^T restricted to the planar block
      return {c * inertial.x() + s * inertial.y(), -s * inertial.x() + c * inertial.y(), 0};
    }
  }
  throw std::logic_error("disturbance: unknown kind");
}

}  // namespace asvempc
