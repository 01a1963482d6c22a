#include "nirsbci/layout.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "nirsbci/common.hpp"
#include "nirsbci/io.hpp"

namespace nirsbci {

std::string_view to_string(Hemisphere grid) { return grid == Hemisphere::left ? "left" : "right"; }

ChannelLayout::ChannelLayout(std::vector<ChannelRecord> records) : records_(std::move(records)) {
  std::vector<std::string> problems;
  const int expected = 2 * kChannelsPerGrid;
  if (static_cast<int>(records_.size()) != expected) {
    problems.push_back("expected " + std::to_string(expected) + " channels, found " +
                       std::to_string(records_.size()));
  }
  std::set<int> ids;
  std::set<std::pair<int, int>> pairs;
  int per_grid[2] = {0, 0};
  for (const auto& r : records_) {
    const std::string tag = "channel " + std::to_string(r.id);
    if (!ids.insert(r.id).second) problems.push_back("duplicate id " + std::to_string(r.id));
    if (r.id < 1 || r.id > expected) problems.push_back(tag + ": id out of range 1.." + std::to_string(expected));
    ++per_grid[r.grid == Hemisphere::left ? 0 : 1];
    if (r.source < 1) problems.push_back(tag + ": missing source index");
    if (r.detector < 1) problems.push_back(tag + ": missing detector index");
    if (std::abs(r.separation_mm - kSeparationMm) > 1e-9) {
      problems.push_back(tag + ": separation " + io::format_double(r.separation_mm) + " mm, expected 30");
    }
    if (!pairs.insert({r.source, r.detector}).second) {
      problems.push_back(tag + ": source/detector pair repeated");
    }
  }
  for (int g = 0; g < 2; ++g) {
    if (per_grid[g] != kChannelsPerGrid) {
      problems.push_back(std::string(g == 0 ? "left" : "right") + " grid has " + std::to_string(per_grid[g]) +
                         " channels, expected " + std::to_string(kChannelsPerGrid));
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid channel layout:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  std::sort(records_.begin(), records_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
}

const ChannelRecord& ChannelLayout::channel(int id) const {
  if (id < 1 || id > size()) throw DomainError("no channel with id " + std::to_string(id));
  return records_[static_cast<std::size_t>(id - 1)];
}

std::string ChannelLayout::ten20_label(int id) const {
  std::string out;
  for (const auto& a : channel(id).anchors) {
    if (!out.empty()) out += '|';
    out += a;
  }
  return out;
}

ChannelLayout parse_layout(std::istream& in) {
  auto table = io::read_csv(in);
  const char* required[] = {"id", "grid", "source", "detector", "separation_mm", "row", "col", "anchors"};
  std::vector<int> col;
  for (const char* name : required) {
    int c = table.column(name);
    if (c < 0) throw ConfigError(std::string("layout file missing column '") + name + "'");
    col.push_back(c);
  }
  std::vector<ChannelRecord> records;
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    try {
      ChannelRecord r;
      r.id = static_cast<int>(io::parse_int(row[col[0]], "id"));
      if (row[col[1]] == "left") {
        r.grid = Hemisphere::left;
      } else if (row[col[1]] == "right") {
        r.grid = Hemisphere::right;
      } else {
        throw ConfigError("unknown grid '" + row[col[1]] + "'");
      }
      r.source = static_cast<int>(io::parse_int(row[col[2]], "source"));
      r.detector = static_cast<int>(io::parse_int(row[col[3]], "detector"));
      r.separation_mm = io::parse_double(row[col[4]], "separation_mm");
      r.row = io::parse_double(row[col[5]], "row");
      r.col = io::parse_double(row[col[6]], "col");
      if (!row[col[7]].empty()) r.anchors = io::split(row[col[7]], '|');
      records.push_back(std::move(r));
    } catch (const Error& e) {
      problems.push_back("row " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid channel layout:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return ChannelLayout(std::move(records));
}

ChannelLayout load_layout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open layout file " + path.string());
  return parse_layout(in);
}

std::filesystem::path data_dir() { return std::filesystem::path(NIRSBCI_DATA_DIR); }

ChannelLayout default_layout() { return load_layout(data_dir() / "layout_default.csv"); }

}  // namespace nirsbci
