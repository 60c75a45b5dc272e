#ifndef PROACTIVE_SWEEP_HPP
#define PROACTIVE_SWEEP_HPP

#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "proactive/config.hpp"
#include "proactive/evaluation.hpp"
#include "proactive/pipeline.hpp"

namespace proactive::sweep {

/// Values to try per axis; an empty axis keeps the base config's value.
struct Grid {
  std::vector<std::size_t> dims;
  std::vector<std::size_t> clusters;
  std::vector<double> gammas;

  static Grid from_json(const nlohmann::json& j) {
    config_detail::reject_unknown(j, "grid", {"D", "M", "gamma"});
    Grid g;
    config_detail::read(j, "grid", "D", g.dims);
    config_detail::read(j, "grid", "M", g.clusters);
    config_detail::read(j, "grid", "gamma", g.gammas);
    return g;
  }
};

inline Grid load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open grid '" + path + "'");
  try {
    return Grid::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kConfig, "grid '" + path + "': " + e.what());
  }
}

struct Point {
  std::size_t dim;
  std::size_t clusters;
  double gamma;
};

inline std::vector<Point> expand(const Grid& g, const RunConfig& base) {
  const auto dims = g.dims.empty() ? std::vector<std::size_t>{base.model.encoder.dim} : g.dims;
  const auto ms = g.clusters.empty() ? std::vector<std::size_t>{base.model.clusters} : g.clusters;
  const auto gs = g.gammas.empty() ? std::vector<double>{base.train.gamma} : g.gammas;
  std::vector<Point> out;
  for (auto d : dims)
    for (auto m : ms)
      for (auto gm : gs) out.push_back({d, m, gm});
  return out;
}

inline std::string csv_number(double v) { return nlohmann::json(v).dump(); }

inline std::string csv_escape(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

/// Trains and evaluates one model per grid point with the base seeds, writing
/// one CSV row each. A failing point is recorded and the sweep moves on.
/// Returns the number of failed points.
inline std::size_t run(const RunConfig& base, const data::LoadedCorpus& corpus, const Grid& grid, std::ostream& csv) {
  csv << "D,M,gamma,apa,mae";
  for (double f : base.eval.prefixes) csv << ",gpa@" << evaluation::fraction_key(f);
  csv << ",cl,status,error\n";
  std::size_t failures = 0;
  for (const Point& p : expand(grid, base)) {
    RunConfig cfg = base;
    cfg.model.encoder.dim = p.dim;
    cfg.model.clusters = p.clusters;
    cfg.train.gamma = p.gamma;
    std::ostringstream row;
    row << p.dim << "," << p.clusters << "," << csv_number(p.gamma);
    try {
      cfg.model.validate();
      cfg.train.validate();
      auto prepared = pipeline::prepare(cfg, corpus);
      if (prepared.test.empty()) throw Error(ErrorCode::kConfig, "sweep needs data.split = true");
      pipeline::fit(cfg, prepared);
      const auto report = evaluation::evaluate(prepared.model, prepared.test, cfg.eval);
      row << "," << csv_number(report.apa) << "," << csv_number(report.mae);
      for (double f : cfg.eval.prefixes) row << "," << csv_number(report.gpa_at.at(evaluation::fraction_key(f)));
      row << "," << (report.has_generation ? csv_number(report.cl) : std::string()) << ",ok,";
    } catch (const Error& e) {
      ++failures;
      row.str("");
      row << p.dim << "," << p.clusters << "," << csv_number(p.gamma) << ",,";
      for (std::size_t i = 0; i < base.eval.prefixes.size(); ++i) row << ",";
      row << ",,failed," << csv_escape(std::string(error_code_name(e.code())) + ": " + e.what());
    }
    csv << row.str() << "\n";
    csv.flush();
  }
  return failures;
}

}  // namespace proactive::sweep

#endif  // PROACTIVE_SWEEP_HPP
