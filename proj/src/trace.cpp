#include "uam/trace.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "uam/errors.hpp"

namespace uam {

namespace {

constexpr const char* kHeader = "t,id,x,y,z_ft,action,b_changing,z_target_ft,link";

std::string exact(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ValidationError(where + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << kHeader << '\n';
  for (const auto& r : rows) {
    out << exact(r.t) << ',' << r.id << ',' << exact(r.x) << ',' << exact(r.y) << ',' << exact(r.z_ft) << ','
        << action_code(r.action) << ',' << (r.changing ? 1 : 0) << ',' << exact(r.z_target_ft) << ','
        << r.link << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace '" + path.string() + "'");
  write_trace_csv(out, rows);
}

std::vector<TraceRow> parse_trace_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw ValidationError(source + ": expected header '" + kHeader + "'");
  }
  std::vector<TraceRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    const std::string where = source + ":" + std::to_string(lineno);
    if (cells.size() != 9) throw ValidationError(where + ": expected 9 columns");
    TraceRow r;
    r.t = parse_double(cells[0], where);
    r.id = cells[1];
    r.x = parse_double(cells[2], where);
    r.y = parse_double(cells[3], where);
    r.z_ft = parse_double(cells[4], where);
    const double code = parse_double(cells[5], where);
    if (code != 0.0 && code != 1.0 && code != 2.0) throw ValidationError(where + ": action must be 0, 1 or 2");
    r.action = static_cast<Action>(static_cast<int>(code));
    if (cells[6] != "0" && cells[6] != "1") throw ValidationError(where + ": b_changing must be 0 or 1");
    r.changing = cells[6] == "1";
    r.z_target_ft = parse_double(cells[7], where);
    r.link = cells[8];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open trace '" + path.string() + "'");
  return parse_trace_csv(in, path.string());
}

}  // namespace uam
