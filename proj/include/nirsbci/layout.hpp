#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace nirsbci {

enum class Hemisphere { left, right };

struct ChannelRecord {
  int id = 0;
  Hemisphere grid = Hemisphere::left;
  int source = 0;
  int detector = 0;
  double separation_mm = 30.0;
  double row = 0.0;  // grid-relative optode units
  double col = 0.0;
  std::vector<std::string> anchors;  // nearby 10-20 sites, may be empty
};

/// Validated probe geometry. Construction either yields a complete layout or
/// throws a ConfigError listing every violation found.
class ChannelLayout {
 public:
  static constexpr int kChannelsPerGrid = 22;
  static constexpr double kSeparationMm = 30.0;

  explicit ChannelLayout(std::vector<ChannelRecord> records);

  const std::vector<ChannelRecord>& channels() const { return records_; }
  int size() const { return static_cast<int>(records_.size()); }
  const ChannelRecord& channel(int id) const;  // 1-based id
  std::string ten20_label(int id) const;       // anchors joined with '|'

 private:
  std::vector<ChannelRecord> records_;  // sorted by id
};

std::string_view to_string(Hemisphere grid);

ChannelLayout parse_layout(std::istream& in);
ChannelLayout load_layout(const std::filesystem::path& path);
/// The bundled two-grid layout shipped under data/.
ChannelLayout default_layout();
std::filesystem::path data_dir();

}  // namespace nirsbci
