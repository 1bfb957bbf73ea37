// SPDX-License-Identifier: Apache-2.0
#pragma once

// Random conductivity phantoms on the unit disk (KIT4 geometric inclusions,
// ACT4 thorax organs), grid sampling and the Schroedinger potential
// q = Laplacian(sqrt(sigma)) / sqrt(sigma).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eit/common.hpp"

namespace eit::phantom {

enum class Shape { circle, ellipse, polygon };
enum class Style { kit4, act4 };

inline const char* to_string(Shape s) {
  switch (s) {
    case Shape::circle: return "circle";
    case Shape::ellipse: return "ellipse";
    case Shape::polygon: return "polygon";
  }
  return "?";
}

inline const char* to_string(Style s) { return s == Style::kit4 ? "kit4" : "act4"; }

inline Style parse_style(const std::string& s) {
  if (s == "kit4") return Style::kit4;
  if (s == "act4") return Style::act4;
  throw InvalidArgument("unknown phantom style '" + s + "'");
}

// Even-odd point-in-polygon test.
inline bool polygon_contains(const std::vector<cplx>& poly, cplx z) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const cplx a = poly[i], b = poly[j];
    if ((a.imag() > z.imag()) != (b.imag() > z.imag())) {
      const double x = a.real() + (z.imag() - a.imag()) * (b.real() - a.real()) / (b.imag() - a.imag());
      if (z.real() < x) inside = !inside;
    }
  }
  return inside;
}

struct Inclusion {
  Shape shape = Shape::circle;
  cplx center{0.0, 0.0};
  double radius_x = 0.0;  // circle radius, or ellipse semi-axis before rotation
  double radius_y = 0.0;
  double rotation = 0.0;  // radians, ellipse only
  std::vector<cplx> vertices;  // polygon only
  double value = 1.0;
  std::string label;

  static Inclusion circle(cplx c, double r, double value) {
    Inclusion inc;
    inc.center = c;
    inc.radius_x = inc.radius_y = r;
    inc.value = value;
    return inc;
  }

  static Inclusion ellipse(cplx c, double rx, double ry, double rotation, double value) {
    Inclusion inc;
    inc.shape = Shape::ellipse;
    inc.center = c;
    inc.radius_x = rx;
    inc.radius_y = ry;
    inc.rotation = rotation;
    inc.value = value;
    return inc;
  }

  static Inclusion polygon(std::vector<cplx> vertices, double value, std::string label = {}) {
    Inclusion inc;
    inc.shape = Shape::polygon;
    inc.vertices = std::move(vertices);
    inc.value = value;
    inc.label = std::move(label);
    return inc;
  }

  bool contains(cplx z) const {
    switch (shape) {
      case Shape::circle:
        return std::norm(z - center) < radius_x * radius_x;
      case Shape::ellipse: {
        const cplx local = (z - center) * std::polar(1.0, -rotation);
        const double u = local.real() / radius_x, v = local.imag() / radius_y;
        return u * u + v * v < 1.0;
      }
      case Shape::polygon:
        return polygon_contains(vertices, z);
    }
    return false;
  }

  // Largest |z| reached by the shape.
  double outer_radius() const {
    if (shape == Shape::polygon) {
      double r = 0.0;
      for (cplx v : vertices) r = std::max(r, std::abs(v));
      return r;
    }
    return std::abs(center) + std::max(radius_x, radius_y);
  }

  friend bool operator==(const Inclusion&, const Inclusion&) = default;
};

struct Phantom {
  std::vector<Inclusion> inclusions;
  double background = 1.0;
  Style style = Style::kit4;
  std::uint64_t seed = 0;

  // Inclusions never overlap, so the first hit is the only hit.
  double conductivity(cplx z) const {
    for (const auto& inc : inclusions)
      if (inc.contains(z)) return inc.value;
    return background;
  }

  double min_value() const {
    double v = background;
    for (const auto& inc : inclusions) v = std::min(v, inc.value);
    return v;
  }

  double max_value() const {
    double v = background;
    for (const auto& inc : inclusions) v = std::max(v, inc.value);
    return v;
  }

  friend bool operator==(const Phantom&, const Phantom&) = default;
};

// ---------------------------------------------------------------------------
// KIT4: circles and ellipses, each conductive or resistive with probability 1/2.

struct Kit4Config {
  int min_count = 1;
  int max_count = 3;
  double min_radius = 0.1;
  double max_radius = 0.3;
  double ellipse_probability = 0.5;
  double min_aspect = 0.5;  // minor/major axis ratio for ellipses
  double conductive_low = 1.5, conductive_high = 2.5;
  double resistive_low = 0.3, resistive_high = 0.7;
  double margin_radius = 0.9;
  double min_gap = 0.05;  // clearance between bounding circles
  int max_attempts = 1000;
};

inline Phantom generate_kit4(std::uint64_t seed, const Kit4Config& cfg = {}) {
  if (cfg.min_count < 0 || cfg.max_count < cfg.min_count)
    throw InvalidArgument("kit4: invalid inclusion count range");
  if (cfg.min_radius <= 0.0 || cfg.max_radius < cfg.min_radius)
    throw InvalidArgument("kit4: invalid radius range");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  Phantom ph;
  ph.style = Style::kit4;
  ph.seed = seed;

  const int count = std::uniform_int_distribution<int>(cfg.min_count, cfg.max_count)(rng);
  std::vector<double> bound;  // bounding radius per placed inclusion

  for (int n = 0; n < count; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
      const bool as_ellipse = unit(rng) < cfg.ellipse_probability;
      const double major = uniform(cfg.min_radius, cfg.max_radius);
      const double minor = as_ellipse ? major * uniform(cfg.min_aspect, 1.0) : major;
      const double rotation = as_ellipse ? uniform(0.0, pi) : 0.0;
      const double reach = cfg.margin_radius - major;
      if (reach <= 0.0) continue;
      // uniform over the admissible disk of centers
      const cplx c = std::polar(reach * std::sqrt(unit(rng)), uniform(0.0, 2.0 * pi));

      bool ok = true;
      for (std::size_t j = 0; j < ph.inclusions.size() && ok; ++j)
        ok = std::abs(c - ph.inclusions[j].center) > major + bound[j] + cfg.min_gap;
      if (!ok) continue;

      const bool conductive = unit(rng) < 0.5;
      const double value = conductive ? uniform(cfg.conductive_low, cfg.conductive_high)
                                      : uniform(cfg.resistive_low, cfg.resistive_high);
      ph.inclusions.push_back(as_ellipse ? Inclusion::ellipse(c, major, minor, rotation, value)
                                         : Inclusion::circle(c, major, value));
      bound.push_back(major);
      placed = true;
    }
    if (!placed)
      throw InfeasibleConfig("kit4: could not place inclusion " + std::to_string(n + 1) + " of " +
                             std::to_string(count) + " after " +
                             std::to_string(cfg.max_attempts) + " attempts");
  }
  return ph;
}

// ---------------------------------------------------------------------------
// ACT4: perturbed thorax template (lungs + heart), optional lung splitting.

struct LabeledPolygon {
  std::string label;
  std::vector<cplx> vertices;
  friend bool operator==(const LabeledPolygon&, const LabeledPolygon&) = default;
};

struct Act4Config {
  std::vector<LabeledPolygon> organs;  // usually loaded with load_template()
  double perturbation_std = 0.02;
  double split_probability = 0.5;
  double value_low = 0.3, value_high = 2.5;
  double split_low = 0.3, split_high = 0.7;  // split height as a fraction of the lung's extent
  double margin_radius = 0.9;
  int max_attempts = 1000;
};

// Template format, one or more blocks of
//   polygon <label>
//   <x> <y>
//   ...
//   end
// Blank lines and lines starting with '#' are ignored.
inline std::vector<LabeledPolygon> parse_template(std::istream& in) {
  std::vector<LabeledPolygon> out;
  std::string line;
  LabeledPolygon* current = nullptr;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "polygon") {
      if (current) throw InvalidArgument("template line " + std::to_string(line_no) + ": nested polygon");
      out.push_back({});
      current = &out.back();
      if (!(ls >> current->label))
        throw InvalidArgument("template line " + std::to_string(line_no) + ": missing label");
    } else if (word == "end") {
      if (!current || current->vertices.size() < 3)
        throw InvalidArgument("template line " + std::to_string(line_no) + ": polygon needs 3+ vertices");
      current = nullptr;
    } else {
      if (!current) throw InvalidArgument("template line " + std::to_string(line_no) + ": vertex outside polygon");
      std::istringstream vs(line);
      double x = 0, y = 0;
      if (!(vs >> x >> y)) throw InvalidArgument("template line " + std::to_string(line_no) + ": bad vertex");
      current->vertices.emplace_back(x, y);
    }
  }
  if (current) throw InvalidArgument("template: unterminated polygon '" + current->label + "'");
  if (out.empty()) throw InvalidArgument("template: no polygons");
  return out;
}

inline std::vector<LabeledPolygon> load_template(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open organ template '" + path + "'");
  return parse_template(in);
}

namespace detail {

inline double cross(cplx a, cplx b) { return a.real() * b.imag() - a.imag() * b.real(); }

inline bool segments_intersect(cplx p1, cplx p2, cplx q1, cplx q2) {
  const double d1 = cross(q2 - q1, p1 - q1), d2 = cross(q2 - q1, p2 - q1);
  const double d3 = cross(p2 - p1, q1 - p1), d4 = cross(p2 - p1, q2 - p1);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

inline bool is_simple(const std::vector<cplx>& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through the closing edge
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  return true;
}

inline bool polygons_disjoint(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      if (segments_intersect(a[i], a[(i + 1) % a.size()], b[j], b[(j + 1) % b.size()])) return false;
  return !polygon_contains(a, b.front()) && !polygon_contains(b, a.front());
}

// Sutherland-Hodgman clip of a polygon to the half plane y >= y0 (keep_upper)
// or y <= y0.
inline std::vector<cplx> clip_horizontal(const std::vector<cplx>& poly, double y0, bool keep_upper) {
  auto inside = [&](cplx p) { return keep_upper ? p.imag() >= y0 : p.imag() <= y0; };
  std::vector<cplx> out;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const cplx cur = poly[i], nxt = poly[(i + 1) % n];
    const bool ci = inside(cur), ni = inside(nxt);
    if (ci) out.push_back(cur);
    if (ci != ni) {
      const double t = (y0 - cur.imag()) / (nxt.imag() - cur.imag());
      out.push_back(cur + t * (nxt - cur));
    }
  }
  return out;
}

}  // namespace detail

inline bool is_lung(const std::string& label) { return label.rfind("lung", 0) == 0; }

inline Phantom generate_act4(std::uint64_t seed, const Act4Config& cfg) {
  if (cfg.organs.empty()) throw InvalidArgument("act4: empty organ template");
  if (cfg.perturbation_std < 0.0) throw InvalidArgument("act4: negative perturbation std");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::vector<cplx>> shapes;
  bool valid = false;
  for (int attempt = 0; attempt < cfg.max_attempts && !valid; ++attempt) {
    shapes.clear();
    for (const auto& organ : cfg.organs) {
      std::vector<cplx> poly;
      poly.reserve(organ.vertices.size());
      for (cplx v : organ.vertices) {
        const double dx = cfg.perturbation_std * gauss(rng);
        const double dy = cfg.perturbation_std * gauss(rng);
        poly.push_back(v + cplx(dx, dy));
      }
      shapes.push_back(std::move(poly));
    }
    valid = true;
    for (std::size_t i = 0; i < shapes.size() && valid; ++i) {
      for (cplx v : shapes[i]) valid = valid && std::abs(v) < cfg.margin_radius;
      valid = valid && detail::is_simple(shapes[i]);
      for (std::size_t j = i + 1; j < shapes.size() && valid; ++j)
        valid = detail::polygons_disjoint(shapes[i], shapes[j]);
    }
  }
  if (!valid)
    throw InfeasibleConfig("act4: no valid perturbed template after " + std::to_string(cfg.max_attempts) +
                           " attempts");

  Phantom ph;
  ph.style = Style::act4;
  ph.seed = seed;
  auto value = [&] { return cfg.value_low + (cfg.value_high - cfg.value_low) * unit(rng); };

  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const std::string& label = cfg.organs[i].label;
    const bool split = is_lung(label) && unit(rng) < cfg.split_probability;
    if (!split) {
      ph.inclusions.push_back(Inclusion::polygon(shapes[i], value(), label));
      continue;
    }
    double lo = shapes[i].front().imag(), hi = lo;
    for (cplx v : shapes[i]) {
      lo = std::min(lo, v.imag());
      hi = std::max(hi, v.imag());
    }
    const double frac = cfg.split_low + (cfg.split_high - cfg.split_low) * unit(rng);
    const double y0 = lo + frac * (hi - lo);
    ph.inclusions.push_back(Inclusion::polygon(detail::clip_horizontal(shapes[i], y0, true), value(), label + "_upper"));
    ph.inclusions.push_back(Inclusion::polygon(detail::clip_horizontal(shapes[i], y0, false), value(), label + "_lower"));
  }
  return ph;
}

// ---------------------------------------------------------------------------
// Grid sampling.

// Conductivity sampled on the lattice [-a, a)^2: pixel (row, col) sits at
// x = -a + col * 2a/W, y = -a + row * 2a/H. Pixels with |z| >= 1 hold 1.
struct ConductivityImage {
  Grid<double> values;
  double half_width = 1.0;

  std::size_t width() const { return values.width(); }
  std::size_t height() const { return values.height(); }
  cplx point(std::size_t row, std::size_t col) const {
    return {lattice_coord(col, width(), half_width), lattice_coord(row, height(), half_width)};
  }
};

template <class Sigma>
ConductivityImage rasterize_function(const Sigma& sigma, std::size_t width, std::size_t height, double half_width) {
  if (width < 8 || height < 8) throw InvalidArgument("rasterize: image must be at least 8x8");
  ConductivityImage img{Grid<double>(width, height, 1.0), half_width};
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) {
      const cplx z = img.point(r, c);
      if (std::abs(z) < 1.0) img.values(r, c) = sigma(z);
    }
  return img;
}

inline ConductivityImage rasterize(const Phantom& ph, std::size_t width, std::size_t height, double half_width = 1.0) {
  return rasterize_function([&](cplx z) { return ph.conductivity(z); }, width, height, half_width);
}

// q on an n x n lattice over [-s, s)^2.
struct PotentialImage {
  Grid<double> q;
  double half_width = 2.1;

  std::size_t size() const { return q.width(); }
  double spacing() const { return 2.0 * half_width / static_cast<double>(size()); }
  cplx point(std::size_t row, std::size_t col) const {
    return {lattice_coord(col, size(), half_width), lattice_coord(row, size(), half_width)};
  }
};

struct PotentialConfig {
  std::size_t grid = 269;
  double half_width = 2.1;
  double smoothing_width = 0.05;  // Gaussian standard deviation, disk units
};

// Separable Gaussian blur truncated at 4 standard deviations; samples outside
// the grid count as background conductivity 1.
inline Grid<double> gaussian_smooth(const Grid<double>& img, double sigma_pixels) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma_pixels));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma_pixels * sigma_pixels));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;

  const int w = static_cast<int>(img.width()), h = static_cast<int>(img.height());
  Grid<double> tmp(img.width(), img.height()), out(img.width(), img.height());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int cc = c + i;
        acc += kernel[i + radius] * ((cc >= 0 && cc < w) ? img(r, cc) : 1.0);
      }
      tmp(r, c) = acc;
    }
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int rr = r + i;
        acc += kernel[i + radius] * ((rr >= 0 && rr < h) ? tmp(rr, c) : 1.0);
      }
      out(r, c) = acc;
    }
  return out;
}

// q from an already smoothed conductivity grid by 5-point differences.
inline PotentialImage potential_from_grid(const Grid<double>& sigma, double half_width) {
  const std::size_t n = sigma.width();
  PotentialImage pot{Grid<double>(n, n, 0.0), half_width};
  const double h = pot.spacing();
  Grid<double> root(n, n);
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    if (!(sigma[i] > 0.0)) throw Error("potential_q: non-positive smoothed conductivity");
    root[i] = std::sqrt(sigma[i]);
  }
  auto at = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
    if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(n) || c >= static_cast<std::ptrdiff_t>(n)) return 1.0;
    return root(r, c);
  };
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      if (std::abs(pot.point(r, c)) >= 1.0) continue;
      const auto ri = static_cast<std::ptrdiff_t>(r), ci = static_cast<std::ptrdiff_t>(c);
      const double lap = (at(ri + 1, ci) + at(ri - 1, ci) + at(ri, ci + 1) + at(ri, ci - 1) - 4.0 * root(r, c)) / (h * h);
      pot.q(r, c) = lap / root(r, c);
    }
  return pot;
}

template <class Sigma>
PotentialImage potential_from_function(const Sigma& sigma, const PotentialConfig& cfg = {}) {
  if (!(cfg.smoothing_width > 0.0)) throw InvalidArgument("potential_q: smoothing width must be positive");
  const std::size_t n = cfg.grid;
  Grid<double> raw(n, n, 1.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      raw(r, c) = sigma(cplx(lattice_coord(c, n, cfg.half_width), lattice_coord(r, n, cfg.half_width)));
  const double h = 2.0 * cfg.half_width / static_cast<double>(n);
  return potential_from_grid(gaussian_smooth(raw, cfg.smoothing_width / h), cfg.half_width);
}

inline PotentialImage potential_q(const Phantom& ph, const PotentialConfig& cfg = {}) {
  if (ph.inclusions.empty()) {
    if (!(cfg.smoothing_width > 0.0)) throw InvalidArgument("potential_q: smoothing width must be positive");
    return PotentialImage{Grid<double>(cfg.grid, cfg.grid, 0.0), cfg.half_width};
  }
  return potential_from_function([&](cplx z) { return ph.conductivity(z); }, cfg);
}

}  // namespace eit::phantom
