#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "uam/action.hpp"

namespace uam {

// One row per enroute aircraft per decision tick, taken after the tick's
// command is applied and before the aircraft moves.
struct TraceRow {
  double t = 0.0;
  std::string id;
  double x = 0.0;
  double y = 0.0;
  double z_ft = 0.0;
  double z_target_ft = 0.0;
  Action action = Action::Hold;  // executed
  bool changing = false;
  std::string link;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

// CSV columns: t,id,x,y,z_ft,action,b_changing,z_target_ft,link. Floats are
// written with round-trip precision so a reloaded trace is bit-identical.
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& rows);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);
std::vector<TraceRow> parse_trace_csv(std::istream& in, const std::string& source = "trace");

}  // namespace uam
