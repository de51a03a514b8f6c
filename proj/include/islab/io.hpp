#pragma once

// File forms of the library reports: CSV for grids (one row per sample),
// JSON for summaries.  Numbers in CSV are printed with %.17g so a rerun of
// the same configuration reproduces the payload bit for bit; JSON uses the
// shortest round-trip form the serializer emits.  Every JSON payload carries
// a schema_version field.

#include <fstream>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "islab/defect.hpp"
#include "islab/frames.hpp"
#include "islab/growth.hpp"
#include "islab/shadow.hpp"

namespace islab {

inline constexpr const char* kSchemaVersion = "1";

inline std::string csv_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline nlohmann::json vec_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

// ---------------------------------------------------------------------------
// orbit frames

// One row per frame: the orbit point, the field, the time-1 derivative (row
// major), and the normal-coordinate transport B (absent on the last frame,
// padded with empty cells so every row has the same width).
inline std::string frames_csv(const std::vector<OrbitFrame>& frames) {
  if (frames.empty()) throw PreconditionError("frames_csv: no frames");
  const int n = static_cast<int>(frames.front().p.size());
  std::string out = "k";
  for (int i = 0; i < n; ++i) out += ",p" + std::to_string(i);
  for (int i = 0; i < n; ++i) out += ",X" + std::to_string(i);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out += ",A" + std::to_string(i) + std::to_string(j);
  for (int i = 0; i + 1 < n; ++i)
    for (int j = 0; j + 1 < n; ++j) out += ",B" + std::to_string(i) + std::to_string(j);
  out += "\n";
  for (const OrbitFrame& f : frames) {
    out += std::to_string(f.k);
    for (int i = 0; i < n; ++i) out += "," + csv_num(f.p[i]);
    for (int i = 0; i < n; ++i) out += "," + csv_num(f.X[i]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out += "," + csv_num(f.A(i, j));
    for (int i = 0; i + 1 < n; ++i)
      for (int j = 0; j + 1 < n; ++j)
        out += f.B.size() ? "," + csv_num(f.B(i, j)) : ",";
    out += "\n";
  }
  return out;
}

inline nlohmann::json frame_identity_json(const FrameIdentityReport& rep) {
  return {{"schema_version", kSchemaVersion},
          {"field_transport_error", rep.field_transport_error},
          {"projection_error", rep.projection_error}};
}

// ---------------------------------------------------------------------------
// defect grids

inline std::string defect_csv(const DefectReport& rep) {
  std::string out = "t,s,case,delta,bound\n";
  for (const DefectRow& row : rep.rows) {
    out += csv_num(row.t) + "," + csv_num(row.s) + "," +
           std::to_string(row.case_label) + "," + csv_num(row.delta) + "," +
           csv_num(row.bound) + "\n";
  }
  return out;
}

inline nlohmann::json defect_summary_json(const DefectReport& rep) {
  nlohmann::json cs = nlohmann::json::array(), cb = nlohmann::json::array();
  for (int c = 1; c <= 6; ++c) {
    cs.push_back(rep.case_sup[c]);
    cb.push_back(rep.case_bound[c]);
  }
  return {{"schema_version", kSchemaVersion},
          {"parameters", {{"d", rep.d}, {"tau", rep.tau}, {"N", rep.N}, {"kappa", rep.kappa}}},
          {"rows", rep.rows.size()},
          {"sup", rep.sup},
          {"bound", rep.bound},
          {"within_bounds", rep.within_bounds},
          {"case_sup", cs},
          {"case_bound", cb}};
}

// ---------------------------------------------------------------------------
// growth windows

inline std::string growth_csv(const GrowthReport& rep) {
  std::string out = "N,trial,sup_norm\n";
  for (const GrowthRow& row : rep.rows)
    out += std::to_string(row.N) + "," + std::to_string(row.trial) + "," +
           csv_num(row.sup_norm) + "\n";
  return out;
}

inline nlohmann::json growth_json(const GrowthReport& rep) {
  return {{"schema_version", kSchemaVersion},
          {"N_list", rep.N_list},
          {"max_sup", rep.max_sup},
          {"verdict", rep.verdict},
          {"slope", rep.slope},
          {"limit_estimate", rep.limit_estimate}};
}

// ---------------------------------------------------------------------------
// shadow replays

inline nlohmann::json replay_json(const ShadowReplayReport& rep, const ReplayCheck& chk) {
  nlohmann::json sigma = rep.sigma, s = rep.s;
  nlohmann::json y = nlohmann::json::array(), W = nlohmann::json::array(),
                 w = nlohmann::json::array();
  for (const Vec& q : rep.y) y.push_back(vec_json(q));
  for (const Vec& q : rep.W) W.push_back(vec_json(q));
  for (const Vec& q : rep.w) w.push_back(vec_json(q));
  return {{"schema_version", kSchemaVersion},
          {"d", rep.d},
          {"tau", rep.tau},
          {"N", rep.N},
          {"shadow", vec_json(rep.shadow)},
          {"v", vec_json(rep.v)},
          {"beta", {{"knots", rep.beta.knots()}, {"values", rep.beta.values()}}},
          {"sigma", sigma},
          {"s", s},
          {"y", y},
          {"W", W},
          {"w", w},
          {"band", rep.band},
          {"band_limit", rep.band_limit},
          {"gamma_regime", rep.gamma_regime},
          {"regime_note", rep.regime_note},
          {"k5", rep.k5},
          {"check",
           {{"aborted", chk.aborted},
            {"diagnostic", chk.diagnostic},
            {"residual", chk.residual},
            {"residual_plain", chk.residual_plain}}}};
}

// ---------------------------------------------------------------------------

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw ConfigError("short write to '" + path + "'");
}

}  // namespace islab
