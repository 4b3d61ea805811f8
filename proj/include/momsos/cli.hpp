#pragma once

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "momsos/analysis.hpp"
#include "momsos/gmp.hpp"
#include "momsos/parse.hpp"
#include "momsos/relax.hpp"
#include "momsos/sdp.hpp"
#include "momsos/sdpa.hpp"
#include "momsos/trace_io.hpp"

namespace momsos {

enum class Command { relax, solve, hierarchy, dual, audit, export_sdpa };
enum class OutputFormat { text, csv, json };

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int parse = 2;
inline constexpr int infeasible = 3;
inline constexpr int solver_failure = 4;
inline constexpr int audit_violation = 5;
}  // namespace exit_code

/// Environment variable holding the default solver tolerance.
inline constexpr const char* kToleranceEnv = "MOMSOS_TOL";

struct RunConfig {
  std::string input;
  Command command = Command::solve;
  std::optional<std::size_t> order;  // relax, solve, dual, export-sdpa
  std::optional<std::size_t> dmax;   // hierarchy, audit
  std::optional<double> tol;         // falls back to MOMSOS_TOL, then 1e-8
  std::optional<double> eps;         // trace penalty
  std::vector<std::string> fixes;    // "mu:x1=0.32"
  OutputFormat format = OutputFormat::text;
  std::uint64_t seed = 1;
  std::size_t samples = 1000;        // certificate sampling in `dual`
  std::optional<std::string> out;
  bool parallel = true;
  bool precondition = true;
};

inline std::optional<Command> command_from_string(const std::string& s) {
  if (s == "relax") return Command::relax;
  if (s == "solve") return Command::solve;
  if (s == "hierarchy") return Command::hierarchy;
  if (s == "dual") return Command::dual;
  if (s == "audit") return Command::audit;
  if (s == "export-sdpa") return Command::export_sdpa;
  return std::nullopt;
}

inline std::optional<OutputFormat> format_from_string(const std::string& s) {
  if (s == "text") return OutputFormat::text;
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  return std::nullopt;
}

class UsageError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::string fixed6(double v) {
  if (std::isnan(v)) return "-";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v == 0.0 ? 0.0 : v);  // no "-0.000000"
  std::string s = buf;
  if (s == "-0.000000") s = "0.000000";
  return s;
}

inline std::string sci(double v) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

inline std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

/// "mu:x1=0.32" -> fixed moment.
inline GmpProblem apply_fix(const GmpProblem& p, const std::string& spec) {
  const auto colon = spec.find(':');
  const auto eq = spec.rfind('=');
  if (colon == std::string::npos || eq == std::string::npos || eq < colon) {
    throw UsageError("--fix expects measure:monomial=value, got '" + spec + "'");
  }
  const std::string measure = spec.substr(0, colon);
  const std::string mono = spec.substr(colon + 1, eq - colon - 1);
  const std::string val = spec.substr(eq + 1);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(val.c_str(), &end);
  if (val.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
    throw UsageError("--fix value '" + val + "' is not a number");
  }
  Monomial m = Monomial::one(0);
  try {
    m = parse_monomial(p, measure, mono);
  } catch (const ParseError& e) {
    throw UsageError("--fix monomial '" + mono + "': " + e.what());
  }
  return fix_moment(p, measure, m, v);
}

inline double default_tolerance() {
  if (const char* env = std::getenv(kToleranceEnv)) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (*env != '\0' && *end == '\0' && v > 0 && std::isfinite(v)) return v;
    throw UsageError(std::string(kToleranceEnv) + " must be a positive number");
  }
  return 1e-8;
}

inline SolverOptions solver_options(const RunConfig& c) {
  SolverOptions o;
  o.tol = c.tol ? *c.tol : default_tolerance();
  if (!(o.tol > 0)) throw UsageError("--tol must be positive");
  o.acceptable_tol = std::max(o.acceptable_tol, o.tol);
  return o;
}

inline std::string moments_line(const PseudoMoments& pm, std::size_t i) {
  std::string s;
  for (std::size_t k = 0; k < pm.z[i].size(); ++k) s += (k ? " " : "") + fixed6(pm.z[i][k]);
  return s;
}

}  // namespace detail

/// Runs one command; results go to `out` (or the --out file), diagnostics to
/// `err`. Returns the process exit code.
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  GmpProblem p = parse_gmp_file(cfg.input);
  for (const auto& f : cfg.fixes) p = detail::apply_fix(p, f);
  const SolverOptions sopts = detail::solver_options(cfg);
  const std::size_t d0 = min_degree(p);
  const std::size_t d = cfg.order.value_or(d0);
  if (d < 1) throw UsageError("order must be at least 1");
  if (cfg.order && d < d0) {
    throw UsageError("order " + std::to_string(d) + " is below the minimal order " +
                     std::to_string(d0));
  }
  const GmpProblem pe = cfg.eps ? penalized_problem(p, d, *cfg.eps) : p;

  std::ofstream file;
  if (cfg.out) {
    file.open(*cfg.out);
    if (!file) throw UsageError("cannot open '" + *cfg.out + "' for writing");
  }
  std::ostream& dst = cfg.out ? static_cast<std::ostream&>(file) : out;
  using nlohmann::json;

  switch (cfg.command) {
    case Command::relax: {
      const MomentRelaxation r = build_relaxation(pe, d);
      if (cfg.format == OutputFormat::json) {
        json j;
        j["order"] = d;
        j["min_order"] = d0;
        j["block_sizes"] = r.sdp.block_sizes;
        j["free_variables"] = r.sdp.num_vars();
        j["equality_rows"] = r.plan.eq_rows;
        j["inequality_rows"] = r.plan.ineq_rows;
        j["consistent"] = r.plan.consistent();
        dst << j.dump(2) << '\n';
      } else {
        dst << "order " << d << " (minimal " << d0 << ")\n";
        dst << "blocks";
        for (auto s : r.sdp.block_sizes) dst << ' ' << s;
        dst << "\nfree variables " << r.sdp.num_vars() << "\nequality rows "
            << r.plan.eq_rows.size() << "\ninequality rows " << r.plan.ineq_rows.size() << '\n';
        if (!r.plan.consistent()) dst << "equalities are inconsistent\n";
      }
      return r.plan.consistent() ? exit_code::ok : exit_code::infeasible;
    }

    case Command::export_sdpa: {
      const MomentRelaxation r = build_relaxation(pe, d);
      if (!r.plan.consistent()) {
        err << "GMP infeasible at order " << d << ": equality constraints are inconsistent\n";
        return exit_code::infeasible;
      }
      write_sdpa(r.sdp, dst);
      return exit_code::ok;
    }

    case Command::solve: {
      const MomentRelaxation r = build_relaxation(pe, d);
      if (!r.plan.consistent()) {
        err << "GMP infeasible at order " << d << ": equality constraints are inconsistent\n";
        return exit_code::infeasible;
      }
      const SdpSolution s =
          cfg.precondition
              ? solve_preconditioned(r.sdp, relaxation_congruence(r, measure_boxes(pe)), sopts)
              : solve(r.sdp, sopts);
      if (s.status == SdpStatus::infeasible) {
        err << "GMP infeasible at order " << d << ": relaxation has no feasible point\n";
        return exit_code::infeasible;
      }
      if (s.status != SdpStatus::optimal) {
        err << "solver: " << to_string(s.status) << (s.message.empty() ? "" : ": ") << s.message
            << '\n';
        return exit_code::solver_failure;
      }
      const double value = p.reported_value(r.value(s));
      const PseudoMoments pm = r.plan.moments(s.y);
      if (cfg.format == OutputFormat::json) {
        json j;
        j["order"] = d;
        j["status"] = to_string(s.status);
        j["value"] = value;
        j["gap"] = s.gap;
        j["iterations"] = s.iterations;
        json ms = json::array();
        for (std::size_t i = 0; i < pm.z.size(); ++i) {
          const MonomialBasis b = pm.basis(i);
          json names = json::array();
          for (const auto& mono : b.monomials()) names.push_back(mono.to_string());
          ms.push_back({{"measure", p.measure(i).name}, {"monomials", std::move(names)}, {"z", pm.z[i]}});
        }
        j["moments"] = std::move(ms);
        dst << j.dump(2) << '\n';
      } else if (cfg.format == OutputFormat::csv) {
        dst << "measure,index,monomial,value\n";
        for (std::size_t i = 0; i < pm.z.size(); ++i) {
          const MonomialBasis b = pm.basis(i);
          for (std::size_t k = 0; k < pm.z[i].size(); ++k) {
            dst << p.measure(i).name << ',' << k << ','
                << b.unrank(k).to_string(p.measure(i).variables) << ','
                << detail::csv_number(pm.z[i][k]) << '\n';
          }
        }
      } else {
        dst << "order " << d << ": " << to_string(s.status) << " after " << s.iterations
            << " iterations\nvalue " << detail::fixed6(value) << "\n";
        for (std::size_t i = 0; i < pm.z.size(); ++i) {
          dst << "z[" << p.measure(i).name << "] " << detail::moments_line(pm, i) << '\n';
        }
        dst << "feasibility of a relaxation does not certify feasibility of the GMP\n";
      }
      return exit_code::ok;
    }

    case Command::dual: {
      const SosProgram sos = build_sos_dual(pe, d);
      if (sos.unbounded_direction) {
        err << "SOS program unbounded at order " << d << ": GMP infeasible\n";
        return exit_code::infeasible;
      }
      const SdpSolution s =
          cfg.precondition
              ? solve_preconditioned(sos.sdp, sos_congruence(sos, pe, measure_boxes(pe)), sopts)
              : solve(sos.sdp, sopts);
      if (s.status == SdpStatus::unbounded) {
        err << "SOS program unbounded at order " << d << ": GMP infeasible\n";
        return exit_code::infeasible;
      }
      if (s.status != SdpStatus::optimal) {
        err << "solver: " << to_string(s.status) << (s.message.empty() ? "" : ": ") << s.message
            << '\n';
        return exit_code::solver_failure;
      }
      const double value = p.reported_value(sos.value(s));
      const SosCertificate cert = sos.certificate(s.y, pe);
      const CertificateReport rep = verify_certificate(cert, pe, d, cfg.samples, cfg.seed);
      if (cfg.format == OutputFormat::json) {
        json j;
        j["order"] = d;
        j["status"] = to_string(s.status);
        j["value"] = value;
        j["multipliers_eq"] = cert.x;
        j["multipliers_ineq"] = cert.y;
        j["certificate_passed"] = rep.passed;
        j["min_gram_eigenvalue"] = rep.min_gram_eigenvalue;
        j["identity_residual"] = rep.identity_residual;
        j["min_sample_value"] = rep.min_sample_value;
        json v = json::array();
        for (const auto& x : rep.violations) {
          v.push_back({{"kind", to_string(x.kind)}, {"where", x.where}, {"magnitude", x.magnitude}});
        }
        j["violations"] = std::move(v);
        dst << j.dump(2) << '\n';
      } else {
        dst << "order " << d << ": " << to_string(s.status) << " after " << s.iterations
            << " iterations\nvalue " << detail::fixed6(value) << '\n'
            << "certificate " << (rep.passed ? "verified" : "rejected")
            << ": min Gram eigenvalue " << detail::sci(rep.min_gram_eigenvalue)
            << ", identity residual " << detail::sci(rep.identity_residual) << ", "
            << rep.samples_checked << " samples, min value " << detail::sci(rep.min_sample_value)
            << '\n';
        for (const auto& x : rep.violations) {
          dst << "  " << to_string(x.kind) << " at " << x.where << ": "
              << detail::sci(x.magnitude) << '\n';
        }
      }
      return rep.passed ? exit_code::ok : exit_code::audit_violation;
    }

    case Command::hierarchy:
    case Command::audit: {
      const std::size_t dm = cfg.dmax.value_or(cfg.order.value_or(d0 + 4));
      if (dm < d0) {
        throw UsageError("--dmax " + std::to_string(dm) + " is below the minimal order " +
                         std::to_string(d0));
      }
      HierarchyOptions ho;
      ho.solver = sopts;
      ho.penalty = cfg.eps;
      ho.parallel = cfg.parallel;
      ho.precondition = cfg.precondition;
      const HierarchyTrace t = run_hierarchy(p, dm, ho);
      int code = t.status == TraceStatus::infeasible     ? exit_code::infeasible
                 : t.status == TraceStatus::solver_failure ? exit_code::solver_failure
                                                           : exit_code::ok;

      if (cfg.command == Command::hierarchy) {
        // Table to stdout; trace file in the requested format.
        auto table = [&](std::ostream& o) {
          o << "solver: embedded primal-dual interior point\n";
          o << detail::pad("d", 3) << detail::pad("p^d", 14) << detail::pad("d^d", 14)
            << detail::pad("gap", 11) << detail::pad("z_1", 12) << detail::pad("lemma", 11)
            << "  stable\n";
          for (const auto& e : t.entries) {
            const auto& z = e.moments.z.front();
            o << detail::pad(std::to_string(e.order), 3)
              << detail::pad(detail::fixed6(e.primal_value), 14)
              << detail::pad(detail::fixed6(e.dual_value), 14) << detail::pad(detail::sci(e.gap), 11)
              << detail::pad(z.size() > 1 ? detail::fixed6(z[1]) : "-", 12)
              << detail::pad(detail::sci(e.lemma.margin()), 11) << "  " << (e.stable ? "yes" : "no")
              << '\n';
          }
          o << "stabilization: " << t.stabilization.label();
          if (t.stabilization.stabilized_at) o << " from order " << *t.stabilization.stabilized_at;
          o << " (tolerance " << detail::sci(t.stabilization.tol) << ", not a certificate)\n";
          o << t.message << '\n';
        };
        if (cfg.format == OutputFormat::text) {
          table(dst);
        } else {
          if (cfg.out) table(out);
          if (cfg.format == OutputFormat::csv) {
            write_trace_csv(t, dst);
          } else {
            write_trace_json(t, dst);
          }
        }
        if (code != exit_code::ok) err << t.message << '\n';
        return code;
      }

      const GapAudit ga = gap_audit(t);
      bool lemma_ok = true;
      for (const auto& e : t.entries) lemma_ok = lemma_ok && e.lemma.ok();
      const bool passed = ga.ok() && lemma_ok;
      if (cfg.format == OutputFormat::json) {
        json j;
        j["gap_tol"] = ga.tol;
        j["max_gap"] = ga.max_gap;
        j["checked_orders"] = ga.checked_orders;
        j["gap_violations"] = ga.violations;
        json ex = json::array();
        for (const auto& [o, why] : ga.excluded) ex.push_back({{"d", o}, {"reason", why}});
        j["excluded"] = std::move(ex);
        json lm = json::array();
        for (const auto& e : t.entries) {
          lm.push_back({{"d", e.order}, {"margin", e.lemma.margin()}, {"violations", e.lemma.violations}});
        }
        j["lemma"] = std::move(lm);
        j["passed"] = passed;
        j["trace_status"] = to_string(t.status);
        dst << j.dump(2) << '\n';
      } else {
        dst << "gap audit: max relative gap " << detail::sci(ga.max_gap) << " over "
            << ga.checked_orders.size() << " orders (tolerance " << detail::sci(ga.tol) << ")"
            << (ga.ok() ? "" : ", VIOLATED") << '\n';
        for (const auto& [o, why] : ga.excluded) dst << "  order " << o << " excluded: " << why << '\n';
        for (const auto& e : t.entries) {
          dst << "lemma check order " << e.order << ": margin " << detail::sci(e.lemma.margin())
              << (e.lemma.ok() ? "" : ", VIOLATED") << '\n';
          for (const auto& v : e.lemma.violations) dst << "  " << v << '\n';
        }
        dst << "audit " << (passed ? "passed" : "failed") << '\n';
      }
      if (code != exit_code::ok) {
        err << t.message << '\n';
        return code;
      }
      return passed ? exit_code::ok : exit_code::audit_violation;
    }
  }
  return exit_code::usage;
}

/// Like run, but maps exceptions to exit codes with a message on `err`.
inline int run_guarded(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    return run(cfg, out, err);
  } catch (const ParseError& e) {
    err << cfg.input << ":" << e.what() << '\n';
    return exit_code::parse;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::usage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::usage;
  }
}

}  // namespace momsos
