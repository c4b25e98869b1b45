#pragma once

// Chart definition files.
//
//   { "v": "...", "d": "...", "e": "...", "f": "...",
//     "u": "...", "a": "...", "b": "...", "c": "...",
//     "params": {"eps": 0.1}, "theta_min": 0.001 }
//
// Every field is an expression string in (t, r, th, ph) and the names in
// "params".  "d" may be left out when the builder is going to solve for it.

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "imcvf_builder.hpp"

namespace imcvf {

struct ChartFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ChartDefinition {
  BlockMetric g;
  bool has_d = true;
  std::map<std::string, double> params;
};

inline ChartDefinition chart_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ChartFileError("chart file must hold a JSON object");
  ChartDefinition out;
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw ChartFileError("\"params\" must be an object");
    for (auto& [k, v] : j["params"].items()) {
      if (!v.is_number()) throw ChartFileError("param \"" + k + "\" is not a number");
      out.params[k] = v.get<double>();
    }
  }
  for (int f = 0; f < NFIELDS; ++f) {
    const char* name = field_names[f];
    if (!j.contains(name)) {
      if (f == FD) {
        out.has_d = false;
        out.g.fld[f] = FieldExpr(0.0);
        continue;
      }
      throw ChartFileError(std::string("missing field \"") + name + "\"");
    }
    const auto& v = j[name];
    if (v.is_number()) {
      out.g.fld[f] = FieldExpr(v.get<double>());
    } else if (v.is_string()) {
      try {
        out.g.fld[f] = parse(v.get<std::string>(), out.params);
      } catch (const ParseError& e) {
        throw ChartFileError(std::string("field \"") + name + "\": " + e.what());
      }
    } else {
      throw ChartFileError(std::string("field \"") + name + "\" must be a string");
    }
  }
  if (j.contains("theta_min")) {
    double tm = j["theta_min"].get<double>();
    if (!(tm > 0 && tm < 0.5)) throw ChartFileError("theta_min must lie in (0, 0.5)");
    out.g.theta_min = tm;
  }
  return out;
}

inline ChartDefinition load_chart(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ChartFileError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ChartFileError(path + ": " + e.what());
  }
  return chart_from_json(j);
}

inline nlohmann::json chart_to_json(const BlockMetric& g, bool with_d = true) {
  nlohmann::json j;
  for (int f = 0; f < NFIELDS; ++f) {
    if (f == FD && !with_d) continue;
    j[field_names[f]] = g.fld[f].str();
  }
  j["theta_min"] = g.theta_min;
  return j;
}

inline void save_chart(const std::string& path, const BlockMetric& g, bool with_d = true) {
  std::ofstream out(path);
  if (!out) throw ChartFileError("cannot write " + path);
  out << chart_to_json(g, with_d).dump(2) << '\n';
}

}  // namespace imcvf
