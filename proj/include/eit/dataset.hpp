// SPDX-License-Identifier: Apache-2.0
#pragma once

// Sample generation (ground truth, low-pass and frequency-enhanced D-bar
// images) and the on-disk dataset: one array file per sample plus a text
// manifest.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "eit/array_io.hpp"
#include "eit/dbar.hpp"
#include "eit/forward.hpp"
#include "eit/phantom.hpp"
#include "eit/scattering.hpp"

namespace eit::dataset {

#ifndef EIT_DATA_DIR
#define EIT_DATA_DIR "data"
#endif

// DBAR_EIT_DATA overrides the compiled-in data directory.
inline std::filesystem::path data_dir() {
  if (const char* env = std::getenv("DBAR_EIT_DATA"); env && *env) return env;
  return EIT_DATA_DIR;
}

struct SampleMeta {
  std::uint64_t seed = 0;
  phantom::Style style = phantom::Style::kit4;
  double delta = 0.0;
  double Rdelta = 6.0;
  std::vector<double> radii{6.0, 7.0, 8.0};
  int l = 7;
  double s = 2.1;
  std::size_t width = 128;
  std::size_t height = 128;
  std::uint32_t version = io::format_version;

  // solver settings
  int iterations = 5;
  std::size_t boundary_points = 128;
  scattering::CgoMode mode = scattering::CgoMode::full;
  int mesh_level = 3;
  double h = 0.2;

  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

// Noise level and low-pass radius used together in the simulations.
struct Pairing {
  double delta;
  double Rdelta;
};
inline constexpr Pairing pairings[3] = {{0.0, 6.0}, {0.001, 5.0}, {0.0075, 4.0}};

inline void validate(const SampleMeta& m) {
  if (m.radii.empty()) throw InvalidArgument("sample meta: need at least one radius");
  if (!(m.Rdelta > 0.0) || m.Rdelta > m.radii.front())
    throw InvalidArgument("sample meta: need 0 < Rdelta <= first radius");
  for (std::size_t i = 1; i < m.radii.size(); ++i)
    if (!(m.radii[i] > m.radii[i - 1])) throw InvalidArgument("sample meta: radii must be strictly increasing");
  if (!(m.delta >= 0.0)) throw InvalidArgument("sample meta: noise level must be non-negative");
  if (m.width != m.height) throw InvalidArgument("sample meta: images must be square");
  if (m.version != io::format_version) throw io::VersionError("sample meta: unsupported format version");
}

struct Sample {
  phantom::ConductivityImage truth;
  phantom::ConductivityImage lowpass;
  std::vector<phantom::ConductivityImage> enhanced;
  SampleMeta meta;
};

struct StageError : Error {
  StageError(const std::string& stage_name, const std::string& what)
      : Error("stage '" + stage_name + "': " + what), stage(stage_name) {}
  std::string stage;
};

// Anything with a conductivity and its Schroedinger potential.
struct Target {
  forward::ConductivityFn sigma;
  phantom::PotentialImage q;
};

inline Target target_of(const phantom::Phantom& ph) {
  auto shared = std::make_shared<phantom::Phantom>(ph);
  return {[shared](cplx z) { return shared->conductivity(z); }, phantom::potential_q(ph)};
}

// Mesh and reference map, built once per mesh level.
class Pipeline {
 public:
  explicit Pipeline(int mesh_level = 3, int N = 16)
      : level_(mesh_level),
        N_(N),
        mesh_(forward::build_disk_mesh(mesh_level)),
        L1_(forward::ntd_to_dtn(forward::compute_ntd(mesh_, phantom::Phantom{}, N))) {}

  static const Pipeline& shared(int mesh_level) {
    static std::mutex guard;
    static std::map<int, std::unique_ptr<Pipeline>> cache;
    const std::lock_guard lock(guard);
    auto& slot = cache[mesh_level];
    if (!slot) slot = std::make_unique<Pipeline>(mesh_level);
    return *slot;
  }

  const forward::Mesh& mesh() const { return mesh_; }
  const forward::DtNMatrix& reference() const { return L1_; }
  int patterns() const { return N_; }

  forward::DtNMatrix measure(const forward::ConductivityFn& sigma, double delta, std::uint64_t seed) const {
    return forward::ntd_to_dtn(forward::perturb_ntd(forward::compute_ntd(mesh_, sigma, N_), delta, noise_seed(seed)));
  }

  static std::uint64_t noise_seed(std::uint64_t seed) { return seed * 0x9E3779B97F4A7C15ull + 0x2545F4914F6CDD1Dull; }

  Sample make_sample(const Target& target, const SampleMeta& meta) const {
    validate(meta);
    if (meta.mesh_level != level_) throw InvalidArgument("make_sample: pipeline built for another mesh level");
    Sample out;
    out.meta = meta;
    auto stage = [](const char* name, auto&& fn) {
      try {
        return fn();
      } catch (const StageError&) {
        throw;
      } catch (const std::exception& e) {
        throw StageError(name, e.what());
      }
    };

    out.truth = stage("truth", [&] { return phantom::rasterize_function(target.sigma, meta.width, meta.height, 1.0); });
    const forward::DtNMatrix L = stage("forward", [&] { return measure(target.sigma, meta.delta, meta.seed); });
    const auto texp = stage("scattering", [&] {
      return scattering::scattering_exp(L, L1_, scattering::kpoints({0.0, meta.Rdelta}, meta.h), meta.boundary_points,
                                        meta.mode);
    });
    out.lowpass = stage("lowpass", [&] {
      const auto grid = dbar::build_kgrid(meta.Rdelta, meta.s, meta.l);
      const auto field = scattering::assemble_t_field(texp, {}, meta.Rdelta, meta.Rdelta, grid);
      return dbar::reconstruct(field, dbar::SpectralKernel(grid), meta.width, meta.iterations).sigma;
    });
    // t~ two lattice rings past the largest radius keeps every stencil complete
    const double outer = meta.radii.back() + 2.0 * meta.h;
    const auto tasym = stage("asymptotic", [&] {
      return scattering::scattering_asymptotic(target.q, scattering::kpoints({meta.Rdelta, outer}, meta.h));
    });
    for (double R : meta.radii)
      out.enhanced.push_back(stage("enhanced", [&] {
        const auto grid = dbar::build_kgrid(R, meta.s, meta.l);
        const auto field = scattering::assemble_t_field(texp, tasym, meta.Rdelta, R, grid);
        return dbar::reconstruct(field, dbar::SpectralKernel(grid), meta.width, meta.iterations).sigma;
      }));
    return out;
  }

  Sample make_sample(const phantom::Phantom& ph, const SampleMeta& meta) const {
    return make_sample(target_of(ph), meta);
  }

 private:
  int level_;
  int N_;
  forward::Mesh mesh_;
  forward::DtNMatrix L1_;
};

inline Sample make_sample(const phantom::Phantom& ph, const SampleMeta& meta) {
  return Pipeline::shared(meta.mesh_level).make_sample(ph, meta);
}

// Phantom for a seed and style; ACT4 uses the shipped organ template.
inline phantom::Phantom phantom_for(const SampleMeta& meta) {
  if (meta.style == phantom::Style::kit4) return phantom::generate_kit4(meta.seed);
  phantom::Act4Config cfg;
  cfg.organs = phantom::load_template((data_dir() / "act4_template.txt").string());
  return phantom::generate_act4(meta.seed, cfg);
}

// ---------------------------------------------------------------------------
// Sample files: rank-3 float32 [S + 2, H, W]; channel 0 ground truth,
// 1 low-pass, 2.. enhanced images in radius order.

inline io::Array sample_array(const Sample& s) {
  const auto W = static_cast<std::uint32_t>(s.truth.width()), H = static_cast<std::uint32_t>(s.truth.height());
  io::Array a{{static_cast<std::uint32_t>(s.enhanced.size() + 2), H, W}, io::DType::f32, {}};
  auto append = [&](const phantom::ConductivityImage& img) {
    if (img.width() != W || img.height() != H) throw GridMismatch("sample: images differ in size");
    a.data.insert(a.data.end(), img.values.begin(), img.values.end());
  };
  append(s.truth);
  append(s.lowpass);
  for (const auto& img : s.enhanced) append(img);
  return a;
}

inline Sample sample_from_array(const io::Array& a, const SampleMeta& meta, const std::string& name) {
  if (a.dims.size() != 3 || a.dtype != io::DType::f32) throw io::FormatError(name + ": expected a rank-3 float32 array");
  if (a.dims[0] != meta.radii.size() + 2 || a.dims[1] != meta.height || a.dims[2] != meta.width)
    throw io::FormatError(name + ": array shape does not match the manifest record");
  const std::size_t plane = std::size_t{a.dims[1]} * a.dims[2];
  auto image = [&](std::size_t ch) {
    phantom::ConductivityImage img{Grid<double>(a.dims[2], a.dims[1]), 1.0};
    std::copy_n(a.data.begin() + static_cast<std::ptrdiff_t>(ch * plane), plane, img.values.begin());
    return img;
  };
  Sample s{image(0), image(1), {}, meta};
  for (std::size_t ch = 2; ch < a.dims[0]; ++ch) s.enhanced.push_back(image(ch));
  return s;
}

// ---------------------------------------------------------------------------
// Manifest: UTF-8 text, "key=value" header lines followed by one
//   sample file=<name> crc32=<hex> seed=... style=... delta=... ...
// record per line. Doubles are written with 17 significant digits.

inline constexpr const char* manifest_name = "manifest.txt";

struct Record {
  std::string file;
  std::uint32_t crc = 0;
  SampleMeta meta;
};

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_record(const Record& r) {
  std::ostringstream os;
  char crc[9];
  std::snprintf(crc, sizeof crc, "%08x", r.crc);
  const SampleMeta& m = r.meta;
  os << "sample file=" << r.file << " crc32=" << crc << " seed=" << m.seed << " style=" << phantom::to_string(m.style)
     << " delta=" << format_double(m.delta) << " Rdelta=" << format_double(m.Rdelta) << " radii=";
  for (std::size_t i = 0; i < m.radii.size(); ++i) os << (i ? "," : "") << format_double(m.radii[i]);
  os << " l=" << m.l << " s=" << format_double(m.s) << " width=" << m.width << " height=" << m.height
     << " iterations=" << m.iterations << " boundary_points=" << m.boundary_points
     << " mode=" << (m.mode == scattering::CgoMode::full ? "full" : "born") << " mesh_level=" << m.mesh_level
     << " h=" << format_double(m.h);
  return os.str();
}

inline Record parse_record(const std::string& line, std::uint32_t version) {
  std::istringstream is(line);
  std::string word;
  is >> word;
  if (word != "sample") throw io::FormatError("manifest: expected a sample record, got '" + line + "'");
  std::map<std::string, std::string> kv;
  while (is >> word) {
    const auto eq = word.find('=');
    if (eq == std::string::npos) throw io::FormatError("manifest: malformed field '" + word + "'");
    kv[word.substr(0, eq)] = word.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw io::FormatError(std::string("manifest: record lacks '") + key + "'");
    return it->second;
  };
  Record r;
  try {
    r.file = get("file");
    r.crc = static_cast<std::uint32_t>(std::stoul(get("crc32"), nullptr, 16));
    SampleMeta& m = r.meta;
    m.version = version;
    m.seed = std::stoull(get("seed"));
    m.style = phantom::parse_style(get("style"));
    m.delta = std::stod(get("delta"));
    m.Rdelta = std::stod(get("Rdelta"));
    m.radii.clear();
    std::istringstream radii(get("radii"));
    for (std::string tok; std::getline(radii, tok, ',');) m.radii.push_back(std::stod(tok));
    m.l = std::stoi(get("l"));
    m.s = std::stod(get("s"));
    m.width = std::stoul(get("width"));
    m.height = std::stoul(get("height"));
    m.iterations = std::stoi(get("iterations"));
    m.boundary_points = std::stoul(get("boundary_points"));
    m.mode = scattering::parse_mode(get("mode"));
    m.mesh_level = std::stoi(get("mesh_level"));
    m.h = std::stod(get("h"));
  } catch (const io::FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw io::FormatError(std::string("manifest: bad record value (") + e.what() + ")");
  }
  if (r.file.find('/') != std::string::npos) throw io::FormatError("manifest: file names must be plain");
  return r;
}

inline void write_manifest(const std::filesystem::path& dir, const std::vector<Record>& records) {
  const auto path = dir / manifest_name;
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << "# dbar-eit dataset manifest\n";
    out << "format_version=" << io::format_version << "\n";
    out << "count=" << records.size() << "\n";
    for (const auto& r : records) out << format_record(r) << "\n";
    if (!out) throw Error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<Record> read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / manifest_name;
  std::ifstream in(path);
  if (!in) throw Error("no manifest in " + dir.string());
  std::uint32_t version = 0;
  long long count = -1;
  std::vector<Record> records;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("sample ", 0) == 0) {
      if (version == 0) throw io::FormatError("manifest: records before format_version");
      records.push_back(parse_record(line, version));
    } else if (line.rfind("format_version=", 0) == 0) {
      version = static_cast<std::uint32_t>(std::stoul(line.substr(15)));
      if (version != io::format_version)
        throw io::VersionError("manifest: format version " + std::to_string(version) + ", expected " +
                               std::to_string(io::format_version));
    } else if (line.rfind("count=", 0) == 0) {
      count = std::stoll(line.substr(6));
    } else {
      throw io::FormatError("manifest: unrecognized line '" + line + "'");
    }
  }
  if (version == 0) throw io::FormatError("manifest: missing format_version");
  if (count != static_cast<long long>(records.size()))
    throw io::FormatError("manifest: count does not match the number of records");
  return records;
}

inline std::string sample_file_name(std::size_t index) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "sample_%06zu.dbar", index);
  return buf;
}

// Writes one sample file and returns its manifest record.
inline Record write_sample(const std::filesystem::path& dir, const std::string& file, const Sample& s) {
  const auto bytes = io::encode(sample_array(s));
  io::write_bytes(dir / file, bytes);
  return {file, io::stored_checksum(bytes), s.meta};
}

inline Sample read_sample(const std::filesystem::path& dir, const Record& r) {
  const auto path = dir / r.file;
  const auto bytes = io::read_bytes(path);
  const io::Array a = io::decode(bytes, path.string());
  if (io::stored_checksum(bytes) != r.crc) throw io::ChecksumError(path.string() + ": checksum differs from manifest");
  return sample_from_array(a, r.meta, path.string());
}

inline void write_dataset(const std::vector<Sample>& samples, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<Record> records;
  for (std::size_t i = 0; i < samples.size(); ++i) records.push_back(write_sample(dir, sample_file_name(i), samples[i]));
  write_manifest(dir, records);
}

inline std::vector<Sample> read_dataset(const std::filesystem::path& dir) {
  std::vector<Sample> out;
  for (const auto& r : read_manifest(dir)) out.push_back(read_sample(dir, r));
  return out;
}

}  // namespace eit::dataset
