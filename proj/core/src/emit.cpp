#include "samlab/emit.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace samlab {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// JSON has no inf/nan; encode them as strings.
ordered_json jnum(double v) {
  if (std::isfinite(v)) return v;
  return num(v);
}

double from_jnum(const ordered_json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw std::invalid_argument("summary: bad number '" + s + "'");
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + p.string() + " for writing");
  f << content;
  if (!f) throw std::runtime_error("failed writing " + p.string());
}

}  // namespace

void prepare_output_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("output directory '" + dir + "' cannot be created");
  const fs::path probe = fs::path(dir) / ".samlab_write_probe";
  {
    std::ofstream f(probe);
    if (!f || !(f << "x")) throw std::runtime_error("output directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
}

std::string trajectory_csv(const Trajectory& tr, std::size_t dim) {
  std::string s = "t";
  for (std::size_t i = 0; i < dim; ++i) s += ",x" + std::to_string(i + 1);
  s += ",loss,grad_norm";
  for (const auto& n : tr.diagnostic_names) s += "," + n;
  s += "\n";
  for (const auto& r : tr.steps) {
    s += std::to_string(r.t);
    for (double v : r.x) s += "," + num(v);
    s += "," + num(r.loss) + "," + num(r.grad_norm);
    for (double v : r.diagnostics) s += "," + num(v);
    s += "\n";
  }
  return s;
}

std::string table_csv(const Table& table) {
  std::string s;
  for (std::size_t i = 0; i < table.header.size(); ++i) s += (i ? "," : "") + table.header[i];
  s += "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + num(row[i]);
    s += "\n";
  }
  return s;
}

std::string summary_json(const RunSummary& summary) {
  ordered_json j;
  j["experiment"] = summary.experiment;
  j["all_pass"] = summary.all_pass();
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : summary.config) cfg[k] = v;
  j["config"] = cfg;
  ordered_json claims = ordered_json::array();
  for (const auto& c : summary.claims) {
    claims.push_back({{"claim", c.id},
                      {"description", c.description},
                      {"target", jnum(c.target)},
                      {"measured", jnum(c.measured)},
                      {"tolerance", jnum(c.tolerance)},
                      {"pass", c.pass},
                      {"asserted", c.asserted},
                      {"provenance", c.provenance}});
  }
  j["claims"] = claims;
  ordered_json notes = ordered_json::array();
  for (const auto& [k, v] : summary.notes) notes.push_back({{"key", k}, {"value", v}});
  j["notes"] = notes;
  return j.dump(2) + "\n";
}

RunSummary parse_summary_json(const std::string& text) {
  const ordered_json j = ordered_json::parse(text);
  RunSummary s;
  s.experiment = j.at("experiment").get<std::string>();
  for (const auto& [k, v] : j.at("config").items()) s.config.emplace_back(k, v.get<std::string>());
  for (const auto& c : j.at("claims")) {
    Claim cl;
    cl.id = c.at("claim").get<std::string>();
    cl.description = c.at("description").get<std::string>();
    cl.target = from_jnum(c.at("target"));
    cl.measured = from_jnum(c.at("measured"));
    cl.tolerance = from_jnum(c.at("tolerance"));
    cl.pass = c.at("pass").get<bool>();
    cl.asserted = c.at("asserted").get<bool>();
    cl.provenance = c.at("provenance").get<std::string>();
    s.claims.push_back(std::move(cl));
  }
  for (const auto& n : j.at("notes")) s.notes.emplace_back(n.at("key").get<std::string>(), n.at("value").get<std::string>());
  return s;
}

std::vector<std::string> emit(const RunOutput& out, const std::string& dir, std::size_t dim) {
  prepare_output_dir(dir);
  std::vector<std::string> written;
  const fs::path base(dir);
  if (out.trajectory) {
    write_file(base / "trajectory.csv", trajectory_csv(*out.trajectory, dim));
    written.push_back((base / "trajectory.csv").string());
  }
  for (const auto& [name, table] : out.tables) {
    const fs::path p = base / (name + ".csv");
    write_file(p, table_csv(table));
    written.push_back(p.string());
  }
  write_file(base / "summary.json", summary_json(out.summary));
  written.push_back((base / "summary.json").string());
  return written;
}

}  // namespace samlab
