#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nirsbci/epoching.hpp"
#include "nirsbci/layout.hpp"
#include "nirsbci/study.hpp"

namespace nirsbci {

// ---------------------------------------------------------------------------
// Per-channel Fisher criterion

struct ChannelScore {
  int channel = 0;  // 1-based
  double between = 0.0;  // S_b = sum_k N_k (mu_kj - mu_j)^2
  double within = 0.0;   // S_w = sum_k sum_{i in I_k} (x_ij - mu_kj)^2
  double score = 0.0;    // S_b / S_w; +inf when S_w == 0 < S_b
  bool infinite = false;
  int rank = 0;  // 1 = most discriminative
};

struct ChannelScoreMap {
  std::vector<ChannelScore> channels;  // by channel id
  std::vector<int> ranking;            // channel ids, best first

  const ChannelScore& channel(int id) const { return channels.at(static_cast<std::size_t>(id - 1)); }
};

ChannelScoreMap fisher_scores(const LabeledDataset& data);

/// channel,grid,row,col,ten20_label,fisher_score,rank
std::string channel_map_csv(const ChannelScoreMap& map, const ChannelLayout& layout);

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test

enum class WilcoxonMethod { exact, normal };

struct WilcoxonResult {
  int n = 0;             // nonzero differences used
  int zeros_dropped = 0;
  double w_plus = 0.0;   // rank sum of positive differences (first - second)
  double w_minus = 0.0;
  double p_value = 1.0;  // two-sided
  double z = 0.0;        // normal method only
  WilcoxonMethod method = WilcoxonMethod::exact;
};

inline constexpr int kWilcoxonExactMaxN = 25;

/// Two-sided signed-rank test on differences first - second. Zero differences
/// are dropped and tied magnitudes share midranks. Uses the exact null
/// distribution up to `exact_max_n` nonzero pairs, otherwise the normal
/// approximation with tie-corrected variance and continuity correction.
WilcoxonResult wilcoxon_signed_rank(const std::vector<std::pair<double, double>>& pairs,
                                    int exact_max_n = kWilcoxonExactMaxN);

// ---------------------------------------------------------------------------
// Accuracy tables (one row per participant, one column per online block)

struct AccuracyTable {
  std::vector<std::string> rows;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> percent;  // rows x columns
  int trials_per_block = 24;

  std::vector<double> column(std::size_t c) const;
  AccuracyTable select_rows(const std::vector<std::string>& names) const;
};

struct ColumnSummary {
  double mean = 0.0;
  std::optional<double> sd;  // sample sd; absent for a single row
};

struct AggregateTable {
  std::vector<ColumnSummary> columns;  // per block column
  std::vector<double> last3;           // per row, percent
  ColumnSummary last3_summary;
  std::vector<std::vector<int>> block_stars;  // rows x columns, n = trials_per_block
  std::vector<int> last3_stars;                // n = 3 * trials_per_block
};

AggregateTable aggregate_table(const AccuracyTable& table, ThresholdMethod method = ThresholdMethod::normal);

/// The bundled published accuracy table with its printed summary values.
struct Table1Fixture {
  AccuracyTable table;
  std::vector<std::vector<int>> printed_block_stars;
  std::vector<double> printed_last3;
  std::vector<int> printed_last3_stars;
  std::vector<std::string> subset;  // participants in the reduced summary row
  std::vector<ColumnSummary> printed_mean_all;     // block columns then last-3 column
  std::vector<ColumnSummary> printed_mean_subset;
};

Table1Fixture load_table1_fixture(const std::filesystem::path& path);
Table1Fixture default_table1_fixture();

struct CheckLine {
  std::string name;
  std::string expected;
  std::string actual;
  bool pass = false;
  bool asserted = true;  // reported-only lines do not affect the verdict
};

struct Table1Check {
  std::vector<CheckLine> lines;
  WilcoxonResult first_vs_last;
  bool all_pass() const;
  std::string to_text() const;
  std::string to_json() const;
};

/// Recomputes every printed aggregate, the significance markers and the
/// first-vs-last online block signed-rank test.
Table1Check check_table1(const Table1Fixture& fixture, double tolerance = 0.1);

/// Accuracy percentages converted to correct-trial counts.
std::vector<double> to_counts(const std::vector<double>& percent, int trials);

// ---------------------------------------------------------------------------
// Regularization retrospective

struct PairedBlockAccuracy {
  int session = 1;
  int block = 1;
  double gamma = 0.0;
  double tuned = 0.0;
  double unregularized = 0.0;
};

/// Replays every online block from the same cumulative training data with
/// the tuned gamma and with gamma = 0.
std::vector<PairedBlockAccuracy> regularization_comparison(const StudyReport& report);

}  // namespace nirsbci
