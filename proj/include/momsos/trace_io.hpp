#pragma once

#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <ostream>
#include <string>

#include "momsos/analysis.hpp"

namespace momsos {

namespace detail {

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline nlohmann::json json_number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace detail

/// One row per solved order; empty cells where a value is missing.
inline void write_trace_csv(const HierarchyTrace& t, std::ostream& out) {
  out << "d,primal,dual,gap,lemma_margin,stabilized\n";
  for (const auto& e : t.entries) {
    out << e.order << ',' << detail::csv_number(e.primal_value) << ','
        << detail::csv_number(e.dual_value) << ',' << detail::csv_number(e.gap) << ','
        << detail::csv_number(e.lemma.margin()) << ',' << (e.stable ? 1 : 0) << '\n';
  }
}

inline nlohmann::json trace_to_json(const HierarchyTrace& t) {
  using nlohmann::json;
  json j;
  j["sense"] = t.sense == Sense::minimize ? "minimize" : "maximize";
  j["first_order"] = t.first_order;
  j["requested_max_order"] = t.requested_max;
  j["status"] = to_string(t.status);
  j["stopped_at"] = t.stopped_at ? json(*t.stopped_at) : json(nullptr);
  j["message"] = t.message;
  json st;
  st["label"] = t.stabilization.label();
  st["tol"] = t.stabilization.tol;
  st["stabilized_at"] =
      t.stabilization.stabilized_at ? json(*t.stabilization.stabilized_at) : json(nullptr);
  json per = json::array();
  for (const auto& col : t.stabilization.per_monomial) {
    json c = json::array();
    for (const auto& v : col) c.push_back(v ? json(*v) : json(nullptr));
    per.push_back(std::move(c));
  }
  st["per_monomial"] = std::move(per);
  j["stabilization"] = std::move(st);

  json entries = json::array();
  for (const auto& e : t.entries) {
    json x;
    x["d"] = e.order;
    x["primal_status"] = to_string(e.primal_status);
    x["dual_status"] = e.dual_solved ? json(to_string(e.dual_status)) : json(nullptr);
    x["primal"] = detail::json_number(e.primal_value);
    x["dual"] = detail::json_number(e.dual_value);
    x["gap"] = detail::json_number(e.gap);
    x["primal_iterations"] = e.primal_iterations;
    x["dual_iterations"] = e.dual_iterations;
    x["lemma_margin"] = detail::json_number(e.lemma.margin());
    x["lemma_violations"] = e.lemma.violations;
    x["diff"] = detail::json_number(e.diff);
    x["stabilized"] = e.stable;
    json ms = json::array();
    for (std::size_t i = 0; i < e.moments.z.size(); ++i) {
      json m;
      const MonomialBasis basis = e.moments.basis(i);
      json names = json::array();
      for (const auto& mono : basis.monomials()) names.push_back(mono.to_string());
      m["monomials"] = std::move(names);
      json z = json::array();
      for (double v : e.moments.z[i]) z.push_back(detail::json_number(v));
      m["z"] = std::move(z);
      ms.push_back(std::move(m));
    }
    x["moments"] = std::move(ms);
    entries.push_back(std::move(x));
  }
  j["entries"] = std::move(entries);
  return j;
}

inline void write_trace_json(const HierarchyTrace& t, std::ostream& out) {
  out << trace_to_json(t).dump(2) << '\n';
}

}  // namespace momsos
