// SPDX-License-Identifier: Apache-2.0
// dbar-eit: simulate boundary data, compute scattering transforms,
// reconstruct D-bar images, build datasets, evaluate and benchmark.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eit/dataset.hpp"
#include "eit/dbar.hpp"
#include "eit/metrics.hpp"
#include "eit/png.hpp"
#include "eit/serialize.hpp"

namespace fs = std::filesystem;
using namespace eit;
using io::json;

namespace {

struct UsageError : Error {
  using Error::Error;
};

void log_config(const std::string& cmd, json cfg) {
  cfg["command"] = cmd;
  cfg["threads"] = thread_count();
  std::cerr << "config " << cfg.dump() << "\n";
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw UsageError("bad number '" + tok + "' in list '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

// ---------------------------------------------------------------------------

struct SimulateOpts {
  std::string style = "kit4";
  std::uint64_t seed = 0;
  std::string phantom;
  double noise = 0.0;
  int level = 3;
  std::string out = ".";
  std::string png;
};

int run_simulate(const SimulateOpts& o, bool have_seed) {
  if (!have_seed && o.phantom.empty()) throw UsageError("simulate: give --seed or --phantom");
  if (have_seed && !o.phantom.empty()) throw UsageError("simulate: --seed and --phantom are exclusive");
  if (o.noise < 0.0) throw UsageError("simulate: --noise must be non-negative");
  log_config("simulate", {{"style", o.style}, {"seed", o.seed}, {"phantom", o.phantom}, {"noise", o.noise},
                          {"level", o.level}, {"out", o.out}});
  phantom::Phantom ph;
  if (!o.phantom.empty()) {
    ph = io::read_phantom(o.phantom);
  } else {
    dataset::SampleMeta meta;
    meta.seed = o.seed;
    meta.style = phantom::parse_style(o.style);
    ph = dataset::phantom_for(meta);
  }
  const dataset::Pipeline pipe(o.level);
  auto sigma = [&ph](cplx z) { return ph.conductivity(z); };
  const auto L = pipe.measure(sigma, o.noise, ph.seed);
  fs::create_directories(o.out);
  io::write_dtn(fs::path(o.out) / "dtn.dbar", L,
                {{"noise", o.noise}, {"seed", ph.seed}, {"style", phantom::to_string(ph.style)}, {"mesh_level", o.level}});
  io::write_phantom(fs::path(o.out) / "phantom.json", ph);
  if (!o.png.empty()) png::write_png(o.png, phantom::rasterize(ph, 128, 128).values);
  std::cout << "wrote " << (fs::path(o.out) / "dtn.dbar").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ScatterOpts {
  std::string dtn;
  double radius = 4.0;
  double h = 0.2;
  std::string mode = "full";
  std::size_t boundary_points = 128;
  std::string out = "t.dbar";
};

int run_scatter(const ScatterOpts& o) {
  log_config("scatter", {{"dtn", o.dtn}, {"radius", o.radius}, {"h", o.h}, {"mode", o.mode},
                         {"boundary_points", o.boundary_points}, {"out", o.out}});
  const auto mode = scattering::parse_mode(o.mode);
  json meta;
  const auto L = io::read_dtn(o.dtn, &meta);
  const auto& pipe = dataset::Pipeline::shared(meta.value("mesh_level", 3));
  const auto t = scattering::scattering_exp(L, pipe.reference(), scattering::kpoints({0.0, o.radius}, o.h),
                                            o.boundary_points, mode);
  io::write_scattering_values(o.out, t);
  std::cout << "wrote " << o.out << " (" << t.t.size() << " k points)\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ReconstructOpts {
  std::string dtn;
  std::string tvalues;
  std::string phantom;
  double Rdelta = 4.0;
  double R = 0.0;  // 0: same as Rdelta
  int l = 7;
  double s = 2.1;
  int iters = 5;
  std::size_t zgrid = 64;
  std::string solver = "richardson";
  std::string mode = "full";
  double h = 0.2;
  std::string out = "sigma.dbar";
  std::string png;
};

int run_reconstruct(ReconstructOpts o) {
  if (o.dtn.empty() == o.tvalues.empty()) throw UsageError("reconstruct: give exactly one of --dtn or --tvalues");
  if (o.R == 0.0) o.R = o.Rdelta;
  if (o.R < o.Rdelta) throw UsageError("reconstruct: --R must be >= --Rdelta");
  if (o.R > o.Rdelta && o.phantom.empty()) throw UsageError("reconstruct: --R > --Rdelta needs --phantom for t~");
  log_config("reconstruct", {{"dtn", o.dtn}, {"tvalues", o.tvalues}, {"phantom", o.phantom}, {"Rdelta", o.Rdelta},
                             {"R", o.R}, {"l", o.l}, {"s", o.s}, {"iters", o.iters}, {"zgrid", o.zgrid},
                             {"solver", o.solver}, {"mode", o.mode}, {"h", o.h}, {"out", o.out}});
  const auto solver = dbar::parse_solver(o.solver);
  const auto grid = dbar::build_kgrid(o.R, o.s, o.l);
  if (solver == dbar::Solver::direct && o.l > 6)
    throw ResourceGuard("reconstruct: the direct solver is limited to l <= 6, got l = " + std::to_string(o.l));

  scattering::ScatteringValues texp;
  if (!o.dtn.empty()) {
    json meta;
    const auto L = io::read_dtn(o.dtn, &meta);
    const auto& pipe = dataset::Pipeline::shared(meta.value("mesh_level", 3));
    texp = scattering::scattering_exp(L, pipe.reference(), scattering::kpoints({0.0, o.Rdelta}, o.h), 128,
                                      scattering::parse_mode(o.mode));
  } else {
    texp = io::read_scattering_values(o.tvalues);
  }
  scattering::ScatteringValues tasym;
  if (o.R > o.Rdelta) {
    const auto pot = phantom::potential_q(io::read_phantom(o.phantom));
    tasym = scattering::scattering_asymptotic(pot, scattering::kpoints({o.Rdelta, o.R + 2.0 * o.h}, o.h));
  }
  const auto field = scattering::assemble_t_field(texp, tasym, o.Rdelta, o.R, grid);
  const auto rec = dbar::reconstruct(field, dbar::SpectralKernel(grid), o.zgrid, o.iters, solver);
  io::write_image(o.out, rec.sigma);
  if (!o.png.empty()) png::write_png(o.png, rec.sigma.values);
  double imag = 0.0;
  for (double v : rec.imaginary) imag = std::max(imag, v);
  std::cout << "wrote " << o.out << " (max |Im m^2| = " << imag << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct DatasetOpts {
  std::string out;
  std::size_t count = 3280;
  std::string style = "kit4";
  std::uint64_t seed_base = 0;
  double delta = -1.0;
  double Rdelta = -1.0;
  std::string radii = "6,7,8";
  int l = 7;
  std::size_t zgrid = 128;
  int iters = 5;
  int level = 3;
  bool resume = false;
  std::string mode = "full";
};

int run_dataset(const DatasetOpts& o) {
  if ((o.delta < 0.0) != (o.Rdelta < 0.0)) throw UsageError("dataset: give both --delta and --Rdelta, or neither");
  const auto radii = parse_list(o.radii);
  log_config("dataset", {{"out", o.out}, {"count", o.count}, {"style", o.style}, {"seed_base", o.seed_base},
                         {"delta", o.delta}, {"Rdelta", o.Rdelta}, {"radii", radii}, {"l", o.l}, {"zgrid", o.zgrid},
                         {"iters", o.iters}, {"level", o.level}, {"resume", o.resume}, {"mode", o.mode}});
  const fs::path dir(o.out);
  fs::create_directories(dir);
  std::vector<dataset::Record> records;
  if (fs::exists(dir / dataset::manifest_name)) {
    if (!o.resume) throw UsageError("dataset: " + dir.string() + " already holds a dataset (use --resume)");
    records = dataset::read_manifest(dir);
  }
  std::set<std::string> done;
  for (const auto& r : records) {
    dataset::read_sample(dir, r);  // validates the file before trusting it
    done.insert(r.file);
  }

  dataset::SampleMeta base;
  base.style = phantom::parse_style(o.style);
  base.radii = radii;
  base.l = o.l;
  base.width = base.height = o.zgrid;
  base.iterations = o.iters;
  base.mesh_level = o.level;
  base.mode = scattering::parse_mode(o.mode);
  const auto& pipe = dataset::Pipeline::shared(o.level);

  for (std::size_t i = 0; i < o.count; ++i) {
    const std::string file = dataset::sample_file_name(i);
    if (done.count(file)) continue;
    dataset::SampleMeta meta = base;
    meta.seed = o.seed_base + i;
    const auto pairing = o.delta >= 0.0 ? dataset::Pairing{o.delta, o.Rdelta} : dataset::pairings[meta.seed % 3];
    meta.delta = pairing.delta;
    meta.Rdelta = pairing.Rdelta;
    const auto t0 = std::chrono::steady_clock::now();
    const auto sample = pipe.make_sample(dataset::phantom_for(meta), meta);
    records.push_back(dataset::write_sample(dir, file, sample));
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.file < b.file; });
    dataset::write_manifest(dir, records);  // every committed manifest lists complete files only
    std::cerr << file << " seed=" << meta.seed << " delta=" << meta.delta << " Rdelta=" << meta.Rdelta << " ("
              << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s)\n";
  }
  if (o.count == 0 && records.empty()) dataset::write_manifest(dir, records);
  std::cout << "dataset " << dir.string() << ": " << records.size() << " samples\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalOpts {
  std::string pred;
  std::string gt;
  std::size_t channel = 0;
  std::string csv;
};

int run_eval(const EvalOpts& o) {
  log_config("eval", {{"pred", o.pred}, {"gt", o.gt}, {"channel", o.channel}, {"csv", o.csv}});
  const auto pred_rec = dataset::read_manifest(o.pred), gt_rec = dataset::read_manifest(o.gt);
  if (pred_rec.size() != gt_rec.size()) throw GridMismatch("eval: datasets hold different sample counts");
  std::ostringstream csv;
  csv << "sample,psnr,ssim,rmse\n";
  std::printf("%-20s %10s %10s %10s\n", "sample", "psnr", "ssim", "rmse");
  metrics::Report mean;
  for (std::size_t i = 0; i < pred_rec.size(); ++i) {
    const auto p = dataset::read_sample(o.pred, pred_rec[i]);
    const auto g = dataset::read_sample(o.gt, gt_rec[i]);
    std::vector<const phantom::ConductivityImage*> channels{&p.truth, &p.lowpass};
    for (const auto& img : p.enhanced) channels.push_back(&img);
    if (o.channel >= channels.size()) throw UsageError("eval: channel out of range");
    const auto r = metrics::evaluate(channels[o.channel]->values, g.truth.values);
    mean.psnr += r.psnr / pred_rec.size();
    mean.ssim += r.ssim / pred_rec.size();
    mean.rmse += r.rmse / pred_rec.size();
    std::printf("%-20s %10.4f %10.6f %10.6f\n", pred_rec[i].file.c_str(), r.psnr, r.ssim, r.rmse);
    csv << pred_rec[i].file << "," << dataset::format_double(r.psnr) << "," << dataset::format_double(r.ssim) << ","
        << dataset::format_double(r.rmse) << "\n";
  }
  if (!pred_rec.empty()) {
    std::printf("%-20s %10.4f %10.6f %10.6f\n", "mean", mean.psnr, mean.ssim, mean.rmse);
    csv << "mean," << dataset::format_double(mean.psnr) << "," << dataset::format_double(mean.ssim) << ","
        << dataset::format_double(mean.rmse) << "\n";
  }
  if (!o.csv.empty()) {
    std::ofstream out(o.csv, std::ios::trunc);
    if (!out) throw Error("cannot write " + o.csv);
    out << csv.str();
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchOpts {
  std::string levels = "7";
  std::size_t points = 4;
  int iters = 5;
  double R = 4.0;
};

int run_bench(const BenchOpts& o) {
  const auto levels = parse_list(o.levels);
  log_config("bench", {{"l", levels}, {"points", o.points}, {"iters", o.iters}, {"R", o.R}});
  const auto pot = phantom::potential_q(phantom::generate_kit4(1));
  const auto tvals = scattering::scattering_asymptotic(pot, scattering::kpoints({0.0, o.R + 0.4}));
  std::printf("%-4s %-11s %14s %14s %12s\n", "l", "solver", "ms/pixel", "residual", "rel.diff");
  for (double lv : levels) {
    const int l = static_cast<int>(lv);
    const auto grid = dbar::build_kgrid(o.R, 2.1, l);
    const dbar::SpectralKernel K(grid);
    const auto field = scattering::assemble_t_field(tvals, {}, o.R, o.R, grid);
    auto residual = [&](cplx z, const dbar::MGrid& m) {
      const auto Am = dbar::apply_dbar_operator(z, field, K, m);
      double r = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) r = std::max(r, std::abs(m[i] - 1.0 - Am[i]));
      return r;
    };
    std::vector<cplx> zs;
    for (std::size_t i = 0; i < o.points; ++i) zs.push_back(std::polar(0.5, 2.0 * pi * i / o.points));
    std::vector<dbar::MGrid> rich;
    double worst = 0.0;
    auto t0 = std::chrono::steady_clock::now();
    for (cplx z : zs) rich.push_back(dbar::richardson_solve(z, field, K, o.iters));
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / zs.size();
    for (std::size_t i = 0; i < zs.size(); ++i) worst = std::max(worst, residual(zs[i], rich[i]));
    std::printf("%-4d %-11s %14.3f %14.3e %12s\n", l, "richardson", ms, worst, "-");
    if (l > 6) {
      std::printf("%-4d %-11s %14s %14s %12s\n", l, "direct", "skipped", "(l > 6)", "-");
      continue;
    }
    worst = 0.0;
    double diff = 0.0;
    t0 = std::chrono::steady_clock::now();
    std::vector<dbar::MGrid> direct;
    for (cplx z : zs) direct.push_back(dbar::direct_solve_oracle(z, field, K));
    ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / zs.size();
    for (std::size_t i = 0; i < zs.size(); ++i) {
      worst = std::max(worst, residual(zs[i], direct[i]));
      double e = 0.0, n = 0.0;
      for (std::size_t j = 0; j < direct[i].size(); ++j) {
        e += std::norm(rich[i][j] - direct[i][j]);
        n += std::norm(direct[i][j]);
      }
      diff = std::max(diff, std::sqrt(e / n));
    }
    std::printf("%-4d %-11s %14.3f %14.3e %12.3e\n", l, "direct", ms, worst, diff);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"D-bar EIT reconstruction and dataset tools"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (default: all cores)");

  SimulateOpts sim;
  auto* c_sim = app.add_subcommand("simulate", "simulate a noisy DtN matrix for a phantom");
  c_sim->add_option("--style", sim.style, "kit4 or act4")->capture_default_str();
  auto* sim_seed = c_sim->add_option("--seed", sim.seed, "phantom seed");
  c_sim->add_option("--phantom", sim.phantom, "phantom JSON file");
  c_sim->add_option("--noise", sim.noise, "relative noise level delta")->capture_default_str();
  c_sim->add_option("--level", sim.level, "mesh refinement level")->capture_default_str();
  c_sim->add_option("--out", sim.out, "output directory")->capture_default_str();
  c_sim->add_option("--png", sim.png, "also write the phantom as PNG");

  ScatterOpts sc;
  auto* c_sc = app.add_subcommand("scatter", "compute t^exp on a disk of k points");
  c_sc->add_option("--dtn", sc.dtn, "DtN file")->required();
  c_sc->add_option("--radius", sc.radius, "disk radius")->capture_default_str();
  c_sc->add_option("--kstep", sc.h, "k lattice spacing")->capture_default_str();
  c_sc->add_option("--mode", sc.mode, "full or born")->capture_default_str();
  c_sc->add_option("--boundary-points", sc.boundary_points, "boundary points M")->capture_default_str();
  c_sc->add_option("--out", sc.out, "output file")->capture_default_str();

  ReconstructOpts rc;
  auto* c_rc = app.add_subcommand("reconstruct", "D-bar reconstruction");
  c_rc->add_option("--dtn", rc.dtn, "DtN file");
  c_rc->add_option("--tvalues", rc.tvalues, "precomputed t^exp file");
  c_rc->add_option("--phantom", rc.phantom, "phantom JSON (t~ for R > Rdelta)");
  c_rc->add_option("--Rdelta", rc.Rdelta, "t^exp truncation radius")->capture_default_str();
  c_rc->add_option("--R", rc.R, "total truncation radius (default Rdelta)");
  c_rc->add_option("--l", rc.l, "k grid is 2^l x 2^l")->capture_default_str();
  c_rc->add_option("--s", rc.s, "k grid extent factor")->capture_default_str();
  c_rc->add_option("--iters", rc.iters, "Richardson iterations")->capture_default_str();
  c_rc->add_option("--zgrid", rc.zgrid, "image width in pixels")->capture_default_str();
  c_rc->add_option("--solver", rc.solver, "richardson or direct")->capture_default_str();
  c_rc->add_option("--mode", rc.mode, "CGO mode, full or born")->capture_default_str();
  c_rc->add_option("--kstep", rc.h, "k lattice spacing")->capture_default_str();
  c_rc->add_option("--out", rc.out, "output image file")->capture_default_str();
  c_rc->add_option("--png", rc.png, "also write a PNG");

  DatasetOpts ds;
  auto* c_ds = app.add_subcommand("dataset", "generate a training dataset");
  c_ds->add_option("--out", ds.out, "output directory")->required();
  c_ds->add_option("--count", ds.count, "number of samples")->capture_default_str();
  c_ds->add_option("--style", ds.style, "kit4 or act4")->capture_default_str();
  c_ds->add_option("--seed-base", ds.seed_base, "seed of sample 0")->capture_default_str();
  c_ds->add_option("--delta", ds.delta, "noise level override");
  c_ds->add_option("--Rdelta", ds.Rdelta, "low-pass radius override");
  c_ds->add_option("--radii", ds.radii, "enhanced radii, comma separated")->capture_default_str();
  c_ds->add_option("--l", ds.l, "k grid exponent")->capture_default_str();
  c_ds->add_option("--zgrid", ds.zgrid, "image width in pixels")->capture_default_str();
  c_ds->add_option("--iters", ds.iters, "Richardson iterations")->capture_default_str();
  c_ds->add_option("--level", ds.level, "mesh refinement level")->capture_default_str();
  c_ds->add_option("--mode", ds.mode, "CGO mode, full or born")->capture_default_str();
  c_ds->add_flag("--resume", ds.resume, "skip samples already on disk");

  EvalOpts ev;
  auto* c_ev = app.add_subcommand("eval", "PSNR / SSIM / RMSE of a dataset channel against ground truth");
  c_ev->add_option("--pred", ev.pred, "dataset holding predictions")->required();
  c_ev->add_option("--gt", ev.gt, "dataset holding ground truth")->required();
  c_ev->add_option("--channel", ev.channel, "channel of --pred: 0 truth, 1 low-pass, 2.. enhanced")
      ->capture_default_str();
  c_ev->add_option("--csv", ev.csv, "write the table as CSV");

  BenchOpts bn;
  auto* c_bn = app.add_subcommand("bench", "time Richardson against the direct solve");
  c_bn->add_option("--l", bn.levels, "comma separated grid exponents")->capture_default_str();
  c_bn->add_option("--points", bn.points, "z points per level")->capture_default_str();
  c_bn->add_option("--iters", bn.iters, "Richardson iterations")->capture_default_str();
  c_bn->add_option("--R", bn.R, "truncation radius")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (threads > 0) set_thread_count(threads);
    if (c_sim->parsed()) return run_simulate(sim, sim_seed->count() > 0);
    if (c_sc->parsed()) return run_scatter(sc);
    if (c_rc->parsed()) return run_reconstruct(rc);
    if (c_ds->parsed()) return run_dataset(ds);
    if (c_ev->parsed()) return run_eval(ev);
    if (c_bn->parsed()) return run_bench(bn);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
