// End-to-end acceptance run: one PASS/FAIL line per criterion, exit 1 if any
// fails. Runs the file-based stages exactly as the command line does.
//
// Configurations: flat 16^3 baseline, its 32^3 refinement, a conformal sine
// perturbation, the scalar wave, and the baseline with doubled delays.

#include "bcm/io.hpp"
#include "bcm/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

using namespace bcm;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Run {
  json report;
  double forward_s = 0, reconstruct_s = 0, verify_s = 0;
  double h = 0;
  fs::path dir;
  double total() const { return forward_s + reconstruct_s + verify_s; }
  const json& measured(const std::string& name) const {
    for (const auto& c : report["criteria"])
      if (c["name"] == name) return c["measured"];
    throw std::runtime_error("criterion missing from report: " + name);
  }
  bool passed(const std::string& name) const {
    for (const auto& c : report["criteria"])
      if (c["name"] == name) return c["pass"].get<bool>();
    return false;
  }
};

fs::path root;

Run full_run(const std::string& tag, RunConfig c) {
  c.output_dir = (root / tag).string();
  fs::create_directories(c.output_dir);
  std::cerr << "[" << tag << "] " << c.dims[0] << "^3 " << c.mode << " " << c.metric.name
            << " K=" << c.delays << "\n";
  const Problem p(c);
  Run r;
  r.dir = c.output_dir;
  r.h = p.grid.max_spacing();
  auto t0 = Clock::now();
  run_forward(p, c.output_dir);
  r.forward_s = since(t0);
  t0 = Clock::now();
  run_reconstruct(p, c.output_dir);
  r.reconstruct_s = since(t0);
  t0 = Clock::now();
  r.report = run_verify(p, c.output_dir).to_json();
  r.verify_s = since(t0);
  std::cerr << "[" << tag << "] forward " << r.forward_s << " s, reconstruct " << r.reconstruct_s
            << " s, verify " << r.verify_s << " s\n";
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int failures = 0;

void line(int id, bool pass, const std::string& text) {
  std::printf("%s criterion %2d: %s\n", pass ? "PASS" : "FAIL", id, text.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vec random_vec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Vec v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Mimetic identities on the baseline grid, flat and perturbed.
void mimetic() {
  const auto t0 = Clock::now();
  double worst_div = 0.0, worst_adj = 0.0;
  for (double amp : {0.0, 0.2}) {
    MetricSpec s;
    if (amp > 0) {
      s.name = "conformal_sine";
      s.amplitude = amp;
    }
    const MetricGrid g({16, 16, 16}, {1.0 / 16, 1.0 / 16, 1.0 / 16}, s);
    std::mt19937_64 rng(17);
    const double h = g.min_spacing();
    for (int t = 0; t < 100; ++t) {
      const Vec e = random_vec(g.num_edges(), rng);
      const double scale = e.cwiseAbs().maxCoeff() / (h * h);
      worst_div = std::max(worst_div, div(g, curl(g, {Placement::Edge, e})).values.cwiseAbs().maxCoeff() / scale);
    }
    for (int t = 0; t < 20; ++t) {
      Vec e = random_vec(g.num_edges(), rng);
      for (int b : g.boundary_edges()) e[b] = 0.0;
      const Vec f = random_vec(g.num_faces(), rng);
      const double lhs = inner(g, Placement::Face, curl(g, {Placement::Edge, e}).values, f);
      const double rhs = inner(g, Placement::Edge, e, curl_dual(g, {Placement::Face, f}).values);
      worst_adj = std::max(worst_adj, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
  }
  line(1, worst_div <= 1e-12 && worst_adj <= 1e-10,
       fmt("max|div curl z|/scale %.2e (<= 1e-12), adjointness %.2e (<= 1e-10), %.1f s", worst_div,
           worst_adj, since(t0)));
}

ControlSignal control(const WaveSystem& sys, const BoundaryPatch& patch, double dt, long steps,
                      int order) {
  ControlSignal c;
  c.patch = patch;
  std::tie(c.dofs, c.spatial) = spatial_profile(sys, patch, Polarization::Diagonal, 2);
  c.temporal = sample_bump(0.0, steps * dt, order, dt, steps);
  c.dt = dt;
  return c;
}

void energy_conservation() {
  const auto t0 = Clock::now();
  const MetricGrid g({16, 16, 16}, {1.0 / 16, 1.0 / 16, 1.0 / 16});
  double worst = 0.0;
  for (WaveMode mode : {WaveMode::Maxwell, WaveMode::Scalar}) {
    const WaveSystem sys(g, mode);
    const double dt = 0.2 * g.min_spacing();
    const ControlSignal c = control(sys, face_patch(g, 2), dt, 40, 3);
    WaveState s = zero_state(sys, dt);
    for (long n = 0; n < 40; ++n) step(sys, s, &c);
    const double e0 = energy(sys, s);
    for (int n = 0; n < 1000; ++n) step(sys, s, nullptr);
    worst = std::max(worst, std::abs(energy(sys, s) - e0) / e0);
  }
  const double secs = since(t0);
  line(2, worst < 1e-10 && secs < 60,
       fmt("relative drift per 1000 steps %.2e (< 1e-10), %.1f s", worst, secs));
}

void finite_speed() {
  const auto t0 = Clock::now();
  const MetricGrid g({16, 16, 16}, {1.0 / 16, 1.0 / 16, 1.0 / 16});
  const WaveSystem sys(g, WaveMode::Maxwell);
  const double h = g.max_spacing(), dt = 0.2 * g.min_spacing();
  double worst = 0.0;
  for (const auto& patch : {face_patch(g, 4), quarter_patch(g, 0, 0, 0), quarter_patch(g, 3, 1, 1)}) {
    const Vec dist = node_to(g, Placement::Edge, geodesic_distance(g, patch).values);
    const ControlSignal c = control(sys, patch, dt, 60, 20);
    WaveState s = zero_state(sys, dt);
    for (long checkpoint : {20L, 40L, 60L}) {
      while (s.step < checkpoint) step(sys, s, &c);
      const double peak = s.p.cwiseAbs().maxCoeff();
      double outside = 0.0;
      for (Eigen::Index i = 0; i < s.p.size(); ++i)
        if (dist[i] > s.time() + 2.0 * h) outside = std::max(outside, std::abs(s.p[i]));
      worst = std::max(worst, outside / peak);
    }
  }
  const double secs = since(t0);
  line(3, worst <= 1e-6 && secs < 300,
       fmt("field beyond t+2h / peak %.2e (<= 1e-6), 3 patches x 3 times, %.1f s", worst, secs));
}

struct Stability {
  double quantile = 0.0, padded = 0.0;
};

Stability eikonal_stability(const Run& base) {
  // Same eikonals with K doubled. Doubling K doubles the control space, so
  // spectra are compared as distributions; the zero-padded list distance is
  // reported too.
  RunConfig c;
  c.delays = 16;
  c.output_dir = (root / "k16").string();
  const Problem p16(c);
  std::cerr << "[k16] forward\n";
  const ForwardData d16 = forward(p16);
  const Reconstruction r16 = reconstruct(p16, d16.response, c.eps_rank, false);
  const RunConfig c8;
  const Problem p8(c8);
  const Reconstruction r8 = reconstruct(p8, load_response(p8, base.dir.string()), c8.eps_rank, false);
  Stability s;
  for (int i = 0; i < r8.family.size(); ++i) {
    const Vec a = sorted_spectrum(r8.family.members[i]), b = sorted_spectrum(r16.family.members[i]);
    s.quantile = std::max(s.quantile, quantile_distance(a, b));
    s.padded = std::max(s.padded, spectrum_distance(a, b));
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "bcm_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  mimetic();
  energy_conservation();
  finite_speed();

  RunConfig base_cfg;
  const Run base = full_run("base16", base_cfg);

  RunConfig fine_cfg;
  fine_cfg.dims = {32, 32, 32};
  const Run fine = full_run("fine32", fine_cfg);

  RunConfig pert_cfg;
  pert_cfg.metric.name = "conformal_sine";
  pert_cfg.metric.amplitude = 0.2;
  const Run pert = full_run("sine16", pert_cfg);

  RunConfig scalar_cfg;
  scalar_cfg.mode = "scalar";
  const Run scal = full_run("scalar16", scalar_cfg);

  // 4
  {
    double worst = 0.0;
    for (const Run* r : {&base, &fine, &pert})
      worst = std::max(worst, r->measured("solenoidal_snapshots")["max_div_ratio"].get<double>());
    line(4, worst <= 1e-10, fmt("max |div e(T)| h / max|e| %.2e (<= 1e-10) over flat, refined, perturbed", worst));
  }
  // 5
  {
    const double b16 = base.measured("blagoveshchenskii")["relative_error"];
    const double b32 = fine.measured("blagoveshchenskii")["relative_error"];
    line(5, b16 <= 0.05 && b32 < b16 && base.total() < 600,
         fmt("relative Frobenius error %.4f at 16^3 (<= 0.05), %.4f at 32^3 (< 16^3)", b16, b32));
  }
  // 6
  {
    const Stability stab = eikonal_stability(base);
    const bool nest = base.passed("projection_nesting") && fine.passed("projection_nesting");
    const bool range = base.passed("eikonal_range") && fine.passed("eikonal_range");
    line(6, nest && range && stab.quantile <= 0.10,
         fmt("nesting %s, spectra in [-1e-6 T, T+1e-6 T] %s, K=8 vs K=16 spectral quantile relative "
             "l2 %.4f (<= 0.10; zero-padded lists %.4f)",
             nest ? "exact" : "broken", range ? "yes" : "no", stab.quantile, stab.padded));
  }
  // 7
  {
    const double u = base.measured("unitary_equivalence")["max_relative_l2"];
    line(7, u <= 0.05, fmt("model vs oracle eikonal spectra, worst relative l2 %.2e (<= 0.05)", u));
  }
  // 8
  {
    const double m16 = base.report["details"]["commutators"]["mean_normalized"];
    const double m32 = fine.report["details"]["commutators"]["mean_normalized"];
    const double x16 = base.report["details"]["commutators"]["max_normalized"];
    const double x32 = fine.report["details"]["commutators"]["max_normalized"];
    const double ident = base.measured("defect_identity")["max_identity_residual"];
    const bool defect = base.passed("defect_identity");
    line(8, m16 / m32 >= 1.3 && defect,
         fmt("mean commutator %.4f -> %.4f (x%.2f, >= 1.3; max %.3f -> %.3f), defect k0 reported, "
             "identity residual %.3f delay steps (<= 1)",
             m16, m32, m16 / m32, x16, x32, ident));
  }
  // 9
  {
    const json& s = base.measured("separation");
    line(9, base.passed("separation"),
         fmt("%d of %d sampled pairs separated", s["separated"].get<int>(), s["sampled"].get<int>()));
  }
  // 10
  {
    const json& d = base.measured("density");
    line(10, base.passed("density"),
         fmt("default family injective: %s (%d colliding pairs), single patch injective: %s",
             d["injective"].get<bool>() ? "yes" : "no", d["colliding_pairs"].get<int>(),
             d["single_patch_injective"].get<bool>() ? "yes" : "no"));
  }
  // 11
  {
    auto hd = [](const Run& r) { return r.measured("hausdorff")["hausdorff"].get<double>(); };
    const double flat = hd(base), ref = hd(fine), per = hd(pert), sc = hd(scal);
    const bool ok = sc <= 2 * scal.h && flat <= 3 * base.h && per <= 5 * pert.h && ref <= 1.1 * flat;
    line(11, ok,
         fmt("Hausdorff scalar %.2fh (<= 2h), flat %.2fh (<= 3h), perturbed %.2fh (<= 5h), "
             "32^3 %.4f vs 16^3 %.4f (within 10%%)",
             sc / scal.h, flat / base.h, per / pert.h, ref, flat));
  }
  // 12
  {
    RunConfig c = base_cfg;
    c.threads = 2;
    c.output_dir = (root / "base16_again").string();
    fs::create_directories(c.output_dir);
    const Problem p(c);
    run_forward(p, c.output_dir);
    run_reconstruct(p, c.output_dir);
    bool same = true;
    for (const char* f : {"response.bcm", "snapshots.bcm", "cloud.bcm", "model_operator.bcm",
                          "eikonals.bcm"})
      same = same && slurp(base.dir / f) == slurp(fs::path(c.output_dir) / f);
    line(12, same, "repeat run (different thread count) matrix files byte-identical: " +
                       std::string(same ? "yes" : "no"));
  }
  // 13
  line(13, base.total() < 600,
       fmt("baseline forward %.1f s + reconstruct %.1f s + verify %.1f s = %.1f s (< 600)",
           base.forward_s, base.reconstruct_s, base.verify_s, base.total()));

  std::printf("%d of 13 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
