// momsos: moment-SOS relaxations of generalized moment problems.
//
//   momsos hierarchy problem.gmp --dmax 5
//   momsos solve problem.gmp -d 2 --fix mu:x1=0.32 --format json
//   momsos export-sdpa problem.gmp -d 2 --out relax.dat-s

#include <CLI11.hpp>
#include <iostream>

#include "momsos/cli.hpp"

int main(int argc, char** argv) {
  using namespace momsos;
  CLI::App app{"Moment-SOS hierarchy toolkit for generalized moment problems"};
  app.require_subcommand(1, 1);

  RunConfig cfg;
  std::string format = "text";
  std::size_t order = 0, dmax = 0;
  double tol = 0, eps = 0;
  bool serial = false, plain = false;

  struct Spec {
    const char* name;
    Command cmd;
    const char* help;
  };
  const Spec specs[] = {
      {"relax", Command::relax, "Compile the order-d relaxation and describe it"},
      {"solve", Command::solve, "Solve the order-d moment relaxation"},
      {"dual", Command::dual, "Solve the order-d SOS program and check its certificate"},
      {"hierarchy", Command::hierarchy, "Run orders d0..dmax and tabulate values"},
      {"audit", Command::audit, "Run the hierarchy, then the duality gap and boundedness checks"},
      {"export-sdpa", Command::export_sdpa, "Write the order-d relaxation as SDPA sparse data"},
  };
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (const auto& s : specs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("input", cfg.input, "GMP problem file")->required()->check(CLI::ExistingFile);
    sub->add_option("-d,--order", order, "Relaxation order (default: minimal order)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--dmax", dmax, "Largest order for hierarchy/audit (default: d0 + 4)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--tol", tol, "Solver tolerance (default: $MOMSOS_TOL or 1e-8)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--eps", eps, "Trace penalty weight (nonzero)");
    sub->add_option("--fix", cfg.fixes, "Fix a moment, e.g. mu:x1=0.32 (repeatable)");
    sub->add_option("--format", format, "Output format")
        ->check(CLI::IsMember({"text", "csv", "json"}));
    sub->add_option("--seed", cfg.seed, "Seed for certificate sampling");
    sub->add_option("--samples", cfg.samples, "Sample points for certificate checks");
    sub->add_option("--out", cfg.out, "Write results to this file");
    sub->add_flag("--serial", serial, "Solve hierarchy orders one at a time");
    sub->add_flag("--no-precondition", plain, "Solve in the monomial basis directly");
    subs.emplace_back(sub, s.cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_code::ok : exit_code::usage;
  }

  for (const auto& [sub, cmd] : subs) {
    if (!sub->parsed()) continue;
    cfg.command = cmd;
    if (sub->count("--order")) cfg.order = order;
    if (sub->count("--dmax")) cfg.dmax = dmax;
    if (sub->count("--tol")) cfg.tol = tol;
    if (sub->count("--eps")) {
      if (eps == 0.0) {
        std::cerr << "error: --eps must be nonzero\n";
        return exit_code::usage;
      }
      cfg.eps = eps;
    }
  }
  cfg.format = *format_from_string(format);
  cfg.parallel = !serial;
  cfg.precondition = !plain;
  return run_guarded(cfg, std::cout, std::cerr);
}
