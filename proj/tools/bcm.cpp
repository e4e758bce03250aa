// Command surface: forward, reconstruct, verify, oracle.
// Exit codes: 0 ok, 1 failed criterion or stage, 2 bad configuration/input.

#include "bcm/io.hpp"
#include "bcm/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

namespace {

struct Options {
  std::string config;
  std::string out;
  int threads = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

bcm::RunConfig resolve(const Options& o) {
  bcm::RunConfig c = o.config.empty() ? bcm::RunConfig{} : bcm::load_config(o.config);
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.threads > 0) c.threads = o.threads;
  if (o.seed_set) c.seed = o.seed;
  bcm::validate_config(c);
  return c;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary-control reconstruction pipeline"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "run configuration (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory (overrides the config)");
    sub->add_option("--threads", opt.threads, "worker threads for forward solves")
        ->check(CLI::PositiveNumber);
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { opt.seed = s; opt.seed_set = true; },
        "random seed for audits");
  };
  CLI::App* fwd = app.add_subcommand("forward", "solve every basis control, write traces");
  CLI::App* rec = app.add_subcommand("reconstruct", "response data to spectrum cloud");
  CLI::App* ver = app.add_subcommand("verify", "oracle-side audits, JSON report");
  CLI::App* orc = app.add_subcommand("oracle", "geodesic distances and ground-truth embedding");
  CLI::App* cfg = app.add_subcommand("config", "print the resolved configuration");
  for (CLI::App* s : {fwd, rec, ver, orc, cfg}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const bcm::RunConfig c = resolve(opt);
    if (cfg->parsed()) {
      std::cout << bcm::config_to_json(c).dump(2) << "\n";
      return 0;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const bcm::Problem problem(c);
    const std::string& dir = c.output_dir;
    std::cerr << "config " << problem.hash << ": " << problem.basis.size() << " controls, "
              << problem.lattice.steps << " steps per T\n";

    if (fwd->parsed()) {
      bcm::run_forward(problem, dir);
      std::cerr << "forward done in " << seconds_since(t0) << " s\n";
      return 0;
    }
    if (rec->parsed()) {
      const bcm::Reconstruction r = bcm::run_reconstruct(problem, dir);
      std::cerr << "reconstruct done in " << seconds_since(t0) << " s: " << r.cloud.points.rows()
                << " points, residual " << r.jd.residual << "\n";
      return 0;
    }
    if (ver->parsed()) {
      const bcm::VerifyReport rep = bcm::run_verify(problem, dir);
      for (const auto& cr : rep.criteria)
        std::cout << (cr.pass ? "PASS " : "FAIL ") << cr.name << " " << cr.measured.dump() << "\n";
      std::cerr << "verify done in " << seconds_since(t0) << " s\n";
      return rep.all_pass() ? 0 : 1;
    }
    if (orc->parsed()) {
      bcm::run_oracle(problem, dir);
      return 0;
    }
  } catch (const bcm::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const bcm::IoError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
