#include "pc2dae/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

namespace pc2dae {

namespace {

std::vector<std::string> expected_header() {
  std::vector<std::string> cols;
  cols.push_back("t");
  for (const auto& ch : channel_table()) cols.push_back(ch.name);
  for (const char* e : kEnvNames) cols.push_back(e);
  for (const auto& ch : channel_table()) cols.push_back(ch.name + "__stale");
  return cols;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

// Parses one cell; returns false for blank (missing) or unparseable cells.
bool parse_cell(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0' || errno == ERANGE) return false;
  out = v;
  return true;
}

void format_value(char* buf, size_t n, double v) { std::snprintf(buf, n, "%.17g", v); }

}  // namespace

SeriesFrame read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open '" + path + "' for reading");

  std::string line;
  if (!std::getline(in, line)) throw data_error("'" + path + "' is empty");
  const auto header = split_line(line);
  const auto expected = expected_header();
  if (header != expected) {
    std::string missing;
    for (const auto& col : expected) {
      bool found = false;
      for (const auto& h : header) {
        if (h == col) {
          found = true;
          break;
        }
      }
      if (!found) missing += missing.empty() ? col : (", " + col);
    }
    if (!missing.empty()) {
      throw data_error("'" + path + "' schema mismatch, missing column(s): " +
                       missing);
    }
    throw data_error("'" + path +
                     "' schema mismatch: columns present but out of order or "
                     "extra columns found");
  }

  struct RawRow {
    double t;
    std::vector<double> vals;  // targets(15) + env(3), NaN when missing
    std::vector<bool> missing, stale;
  };
  std::vector<RawRow> rows;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (static_cast<Index>(cells.size()) !=
        1 + kNumChannels + kNumEnv + kNumChannels) {
      throw data_error("'" + path + "' row " + std::to_string(line_no) +
                       " has " + std::to_string(cells.size()) + " cells");
    }
    RawRow row;
    if (!parse_cell(cells[0], row.t)) {
      throw data_error("'" + path + "' row " + std::to_string(line_no) +
                       " has unparseable timestamp '" + cells[0] + "'");
    }
    row.vals.resize(static_cast<size_t>(kNumChannels + kNumEnv));
    row.missing.resize(static_cast<size_t>(kNumChannels));
    row.stale.resize(static_cast<size_t>(kNumChannels));
    for (Index c = 0; c < kNumChannels + kNumEnv; ++c) {
      double v = std::numeric_limits<double>::quiet_NaN();
      const bool ok = parse_cell(cells[static_cast<size_t>(1 + c)], v);
      row.vals[static_cast<size_t>(c)] = ok ? v : std::numeric_limits<double>::quiet_NaN();
      if (c < kNumChannels) row.missing[static_cast<size_t>(c)] = !ok;
    }
    for (Index c = 0; c < kNumChannels; ++c) {
      const auto& cell = cells[static_cast<size_t>(1 + kNumChannels + kNumEnv + c)];
      row.stale[static_cast<size_t>(c)] = (cell == "1");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw data_error("'" + path + "' has no data rows");

  // Timestamps must increase in whole seconds; interior gaps become fully
  // missing rows so downstream indexing stays 1 Hz.
  const double t0 = rows[0].t;
  Index total = 1;
  for (size_t i = 1; i < rows.size(); ++i) {
    const double dt = rows[i].t - rows[i - 1].t;
    const double rounded = std::round(dt);
    if (dt <= 0 || std::abs(dt - rounded) > 1e-9) {
      throw data_error("'" + path + "' timestamps not increasing in whole " +
                       "seconds at data row " + std::to_string(i + 1) +
                       " (t=" + std::to_string(rows[i].t) + ")");
    }
    total += static_cast<Index>(rounded);
  }

  SeriesFrame frame = SeriesFrame::zeros(total);
  frame.targets.setConstant(std::numeric_limits<double>::quiet_NaN());
  frame.env.setConstant(std::numeric_limits<double>::quiet_NaN());
  frame.missing_mask.setConstant(true);
  for (Index i = 0; i < total; ++i) frame.t[static_cast<size_t>(i)] = t0 + double(i);
  for (const auto& row : rows) {
    const Index i = static_cast<Index>(std::llround(row.t - t0));
    for (Index c = 0; c < kNumChannels; ++c) {
      frame.targets(i, c) = row.vals[static_cast<size_t>(c)];
      frame.missing_mask(i, c) = row.missing[static_cast<size_t>(c)];
      frame.stale_mask(i, c) = row.stale[static_cast<size_t>(c)];
    }
    for (Index c = 0; c < kNumEnv; ++c) {
      frame.env(i, c) = row.vals[static_cast<size_t>(kNumChannels + c)];
    }
  }
  frame.validate();
  return frame;
}

void write_csv(const SeriesFrame& frame, const std::string& path) {
  frame.validate();
  std::ofstream out(path, std::ios::binary);  // binary: force LF endings
  if (!out) throw data_error("cannot open '" + path + "' for writing");

  const auto header = expected_header();
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';

  char buf[40];
  for (Index i = 0; i < frame.length(); ++i) {
    format_value(buf, sizeof buf, frame.t[static_cast<size_t>(i)]);
    out << buf;
    for (Index c = 0; c < kNumChannels; ++c) {
      out << ',';
      if (!frame.missing_mask(i, c) && std::isfinite(frame.targets(i, c))) {
        format_value(buf, sizeof buf, frame.targets(i, c));
        out << buf;
      }
    }
    for (Index c = 0; c < kNumEnv; ++c) {
      out << ',';
      if (std::isfinite(frame.env(i, c))) {
        format_value(buf, sizeof buf, frame.env(i, c));
        out << buf;
      }
    }
    for (Index c = 0; c < kNumChannels; ++c) {
      out << ',' << (frame.stale_mask(i, c) ? '1' : '0');
    }
    out << '\n';
  }
  if (!out) throw data_error("write to '" + path + "' failed");
}

}  // namespace pc2dae
