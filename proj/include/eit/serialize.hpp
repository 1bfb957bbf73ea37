// SPDX-License-Identifier: Apache-2.0
#pragma once

// Library types on disk: one DBAR array file plus a JSON sidecar
// (<file>.json) carrying the metadata the array alone cannot.

#include <filesystem>
#include <fstream>
#include <string>

#include "eit/array_io.hpp"
#include "eit/forward.hpp"
#include "eit/phantom.hpp"
#include "eit/scattering.hpp"
#include "json.hpp"

namespace eit::io {

using json = nlohmann::json;

inline std::filesystem::path sidecar_of(const std::filesystem::path& p) { return p.string() + ".json"; }

inline void write_sidecar(const std::filesystem::path& p, const json& meta) {
  const auto path = sidecar_of(p);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << meta.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

inline json read_sidecar(const std::filesystem::path& p, const std::string& kind) {
  std::ifstream in(sidecar_of(p));
  if (!in) throw FormatError(p.string() + ": missing metadata sidecar");
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": bad metadata sidecar: " + e.what());
  }
  if (meta.value("kind", "") != kind) throw FormatError(p.string() + ": expected a " + kind + " file");
  return meta;
}

// --- boundary maps ------------------------------------------------------

inline void write_dtn(const std::filesystem::path& p, const forward::DtNMatrix& L, json extra = json::object()) {
  Grid<double> g(static_cast<std::size_t>(L.values.cols()), static_cast<std::size_t>(L.values.rows()));
  for (Eigen::Index r = 0; r < L.values.rows(); ++r)
    for (Eigen::Index c = 0; c < L.values.cols(); ++c) g(r, c) = L.values(r, c);
  write_array(p, from_grid(g, DType::f64));
  extra["kind"] = "dtn";
  extra["N"] = L.N;
  write_sidecar(p, extra);
}

inline forward::DtNMatrix read_dtn(const std::filesystem::path& p, json* meta_out = nullptr) {
  const json meta = read_sidecar(p, "dtn");
  const Grid<double> g = to_real_grid(read_array(p));
  const int N = meta.at("N").get<int>();
  if (g.width() != static_cast<std::size_t>(2 * N + 1) || g.height() != g.width())
    throw FormatError(p.string() + ": DtN matrix size does not match N");
  forward::DtNMatrix L{Eigen::MatrixXd(2 * N + 1, 2 * N + 1), N};
  for (std::size_t r = 0; r < g.height(); ++r)
    for (std::size_t c = 0; c < g.width(); ++c) L.values(r, c) = g(r, c);
  if (meta_out) *meta_out = meta;
  return L;
}

// --- scattering data ----------------------------------------------------

// Row 0 holds the k points, row 1 the values.
inline void write_scattering_values(const std::filesystem::path& p, const scattering::ScatteringValues& v) {
  Grid<cplx> g(v.t.size(), 2);
  for (std::size_t i = 0; i < v.t.size(); ++i) {
    g(0, i) = v.kset.points[i];
    g(1, i) = v.t[i];
  }
  write_array(p, from_grid(g));
  write_sidecar(p, {{"kind", "scattering_values"}, {"h", v.kset.h}, {"inner", v.kset.region.inner},
                    {"outer", v.kset.region.outer}});
}

inline scattering::ScatteringValues read_scattering_values(const std::filesystem::path& p) {
  const json meta = read_sidecar(p, "scattering_values");
  const Grid<cplx> g = to_complex_grid(read_array(p));
  if (g.height() != 2) throw FormatError(p.string() + ": expected two rows (k, t)");
  scattering::ScatteringValues v;
  v.kset.h = meta.at("h").get<double>();
  v.kset.region = {meta.at("inner").get<double>(), meta.at("outer").get<double>()};
  for (std::size_t i = 0; i < g.width(); ++i) {
    v.kset.points.push_back(g(0, i));
    v.t.push_back(g(1, i));
  }
  return v;
}

inline void write_scattering_field(const std::filesystem::path& p, const scattering::ScatteringField& f) {
  write_array(p, from_grid(f.values));
  write_sidecar(p, {{"kind", "scattering_field"}, {"l", f.grid.l}, {"s", f.grid.s}, {"R", f.R},
                    {"Rdelta", f.Rdelta}});
}

inline scattering::ScatteringField read_scattering_field(const std::filesystem::path& p) {
  const json meta = read_sidecar(p, "scattering_field");
  scattering::ScatteringField f;
  f.grid = dbar::build_kgrid(meta.at("R").get<double>(), meta.at("s").get<double>(), meta.at("l").get<int>());
  f.R = meta.at("R").get<double>();
  f.Rdelta = meta.at("Rdelta").get<double>();
  f.values = to_complex_grid(read_array(p));
  if (f.values.width() != f.grid.size() || f.values.height() != f.grid.size())
    throw FormatError(p.string() + ": field size does not match its grid");
  return f;
}

// --- images --------------------------------------------------------------

inline void write_image(const std::filesystem::path& p, const phantom::ConductivityImage& img) {
  write_array(p, from_grid(img.values, DType::f32));
  write_sidecar(p, {{"kind", "conductivity"}, {"half_width", img.half_width}});
}

inline phantom::ConductivityImage read_image(const std::filesystem::path& p) {
  const json meta = read_sidecar(p, "conductivity");
  return {to_real_grid(read_array(p)), meta.at("half_width").get<double>()};
}

// --- phantoms ------------------------------------------------------------
//   {"style": "kit4", "seed": 1, "background": 1.0,
//    "inclusions": [{"shape": "circle", "center": [x, y], "radius": r, "value": v},
//                   {"shape": "ellipse", "center": [x, y], "radii": [a, b], "rotation": t, "value": v},
//                   {"shape": "polygon", "vertices": [[x, y], ...], "value": v, "label": "..."}]}

inline json phantom_to_json(const phantom::Phantom& ph) {
  json incs = json::array();
  for (const auto& inc : ph.inclusions) {
    json j{{"shape", phantom::to_string(inc.shape)}, {"value", inc.value}};
    if (!inc.label.empty()) j["label"] = inc.label;
    switch (inc.shape) {
      case phantom::Shape::circle:
        j["center"] = {inc.center.real(), inc.center.imag()};
        j["radius"] = inc.radius_x;
        break;
      case phantom::Shape::ellipse:
        j["center"] = {inc.center.real(), inc.center.imag()};
        j["radii"] = {inc.radius_x, inc.radius_y};
        j["rotation"] = inc.rotation;
        break;
      case phantom::Shape::polygon:
        j["vertices"] = json::array();
        for (cplx v : inc.vertices) j["vertices"].push_back({v.real(), v.imag()});
        break;
    }
    incs.push_back(j);
  }
  return {{"style", phantom::to_string(ph.style)}, {"seed", ph.seed}, {"background", ph.background},
          {"inclusions", incs}};
}

inline phantom::Phantom phantom_from_json(const json& j) {
  auto point = [](const json& p) { return cplx(p.at(0).get<double>(), p.at(1).get<double>()); };
  try {
    phantom::Phantom ph;
    ph.style = phantom::parse_style(j.value("style", "kit4"));
    ph.seed = j.value("seed", std::uint64_t{0});
    ph.background = j.value("background", 1.0);
    for (const auto& inc : j.at("inclusions")) {
      const std::string shape = inc.at("shape").get<std::string>();
      const double value = inc.at("value").get<double>();
      if (!(value > 0.0)) throw InvalidArgument("phantom: inclusion values must be positive");
      phantom::Inclusion out;
      if (shape == "circle") {
        out = phantom::Inclusion::circle(point(inc.at("center")), inc.at("radius").get<double>(), value);
      } else if (shape == "ellipse") {
        const auto& r = inc.at("radii");
        out = phantom::Inclusion::ellipse(point(inc.at("center")), r.at(0).get<double>(), r.at(1).get<double>(),
                                          inc.value("rotation", 0.0), value);
      } else if (shape == "polygon") {
        std::vector<cplx> verts;
        for (const auto& v : inc.at("vertices")) verts.push_back(point(v));
        if (verts.size() < 3) throw InvalidArgument("phantom: polygon needs at least 3 vertices");
        out = phantom::Inclusion::polygon(std::move(verts), value);
      } else {
        throw InvalidArgument("phantom: unknown shape '" + shape + "'");
      }
      out.label = inc.value("label", std::string{});
      ph.inclusions.push_back(std::move(out));
    }
    return ph;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("phantom: malformed description: ") + e.what());
  }
}

inline void write_phantom(const std::filesystem::path& p, const phantom::Phantom& ph) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << phantom_to_json(ph).dump(2) << '\n';
}

inline phantom::Phantom read_phantom(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw InvalidArgument("cannot open phantom file " + p.string());
  try {
    return phantom_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw InvalidArgument("phantom: " + p.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace eit::io
