#pragma once

// Output files for a run:
//   <dir>/trajectory.csv   t, x1..xD, loss, grad_norm, <diagnostics...>
//   <dir>/<table>.csv      experiment-specific tables
//   <dir>/summary.json     claims, see docs/summary.schema.json

#include <cstddef>
#include <string>

#include "samlab/harness.hpp"

namespace samlab {

/// Creates dir if needed and checks that a file can be written in it.
/// Throws std::runtime_error otherwise.
void prepare_output_dir(const std::string& dir);

/// Header only for an empty trajectory. Numbers use the shortest
/// round-trip representation, so identical runs give identical bytes.
std::string trajectory_csv(const Trajectory& tr, std::size_t dim);
std::string table_csv(const Table& table);

std::string summary_json(const RunSummary& summary);
RunSummary parse_summary_json(const std::string& text);

/// Writes every artifact of the run into dir; returns the paths written.
std::vector<std::string> emit(const RunOutput& out, const std::string& dir, std::size_t dim);

}  // namespace samlab
