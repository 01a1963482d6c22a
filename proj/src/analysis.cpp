#include "nirsbci/analysis.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "nirsbci/io.hpp"

namespace nirsbci {

ChannelScoreMap fisher_scores(const LabeledDataset& data) {
  const int n = data.size();
  const int k = data.num_classes();
  if (n <= k) throw DomainError("Fisher scores need N > K");
  const Eigen::MatrixXd& x = data.features();
  const Eigen::RowVectorXd overall = x.colwise().mean();
  Eigen::RowVectorXd between = Eigen::RowVectorXd::Zero(x.cols());
  Eigen::RowVectorXd within = Eigen::RowVectorXd::Zero(x.cols());
  for (auto label : data.classes()) {
    const auto idx = data.indices(label);
    Eigen::MatrixXd members(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) members.row(static_cast<Eigen::Index>(r)) = x.row(idx[r]);
    const Eigen::RowVectorXd mean = members.colwise().mean();
    between += static_cast<double>(idx.size()) * (mean - overall).array().square().matrix();
    within += (members.rowwise() - mean).array().square().colwise().sum().matrix();
  }
  ChannelScoreMap map;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    ChannelScore s;
    s.channel = static_cast<int>(j) + 1;
    s.between = between(j);
    s.within = within(j);
    if (s.within > 0.0) {
      s.score = s.between / s.within;
    } else if (s.between > 0.0) {
      s.score = std::numeric_limits<double>::infinity();
      s.infinite = true;
    } else {
      s.score = 0.0;
    }
    map.channels.push_back(s);
  }
  std::vector<int> order(map.channels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return map.channels[static_cast<std::size_t>(a)].score >
                                              map.channels[static_cast<std::size_t>(b)].score; });
  for (std::size_t r = 0; r < order.size(); ++r) {
    map.channels[static_cast<std::size_t>(order[r])].rank = static_cast<int>(r) + 1;
    map.ranking.push_back(order[r] + 1);
  }
  return map;
}

std::string channel_map_csv(const ChannelScoreMap& map, const ChannelLayout& layout) {
  if (static_cast<int>(map.channels.size()) != layout.size()) {
    throw ShapeError("score map has " + std::to_string(map.channels.size()) + " channels, layout has " +
                     std::to_string(layout.size()));
  }
  std::ostringstream out;
  out << "channel,grid,row,col,ten20_label,fisher_score,rank\n";
  for (const auto& s : map.channels) {
    const auto& rec = layout.channel(s.channel);
    out << s.channel << ',' << to_string(rec.grid) << ',' << io::format_double(rec.row) << ','
        << io::format_double(rec.col) << ',' << layout.ten20_label(s.channel) << ','
        << (s.infinite ? std::string("inf") : io::format_double(s.score)) << ',' << s.rank << '\n';
  }
  return out.str();
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<std::pair<double, double>>& pairs, int exact_max_n) {
  std::vector<double> diffs;
  WilcoxonResult res;
  for (const auto& [a, b] : pairs) {
    const double d = a - b;
    if (!std::isfinite(d)) throw DomainError("signed-rank test needs finite values");
    if (d == 0.0) {
      ++res.zeros_dropped;
    } else {
      diffs.push_back(d);
    }
  }
  res.n = static_cast<int>(diffs.size());
  if (res.n < 5) {
    throw DomainError("signed-rank test needs at least 5 nonzero differences, got " + std::to_string(res.n));
  }
  std::vector<std::size_t> order(diffs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(diffs[a]) < std::abs(diffs[b]); });
  // Doubled midranks are integers, which keeps the exact distribution integral.
  std::vector<long> doubled(diffs.size());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
    const long twice = static_cast<long>(i + 1 + j + 1);
    for (std::size_t m = i; m <= j; ++m) doubled[order[m]] = twice;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  long observed = 0;
  long total = 0;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    total += doubled[i];
    if (diffs[i] > 0) observed += doubled[i];
  }
  res.w_plus = observed / 2.0;
  res.w_minus = (total - observed) / 2.0;

  if (res.n <= exact_max_n) {
    res.method = WilcoxonMethod::exact;
    // counts[s] = number of sign assignments with doubled positive rank sum s
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(total) + 1, 0);
    counts[0] = 1;
    long reach = 0;
    for (long r : doubled) {
      for (long s = reach; s >= 0; --s) {
        if (counts[static_cast<std::size_t>(s)] != 0) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
      }
      reach += r;
    }
    std::uint64_t lower = 0;
    std::uint64_t upper = 0;
    for (long s = 0; s <= total; ++s) {
      if (s <= observed) lower += counts[static_cast<std::size_t>(s)];
      if (s >= observed) upper += counts[static_cast<std::size_t>(s)];
    }
    const double denom = std::ldexp(1.0, res.n);
    res.p_value = std::min(1.0, 2.0 * static_cast<double>(std::min(lower, upper)) / denom);
    return res;
  }

  res.method = WilcoxonMethod::normal;
  const double n = res.n;
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  const double dev = res.w_plus - mean;
  const double corrected = std::max(0.0, std::abs(dev) - 0.5);
  res.z = (dev < 0 ? -1.0 : 1.0) * corrected / std::sqrt(var);
  const boost::math::normal_distribution<double> unit(0.0, 1.0);
  res.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(unit, std::abs(res.z))));
  return res;
}

std::vector<double> AccuracyTable::column(std::size_t c) const {
  std::vector<double> out;
  for (const auto& row : percent) out.push_back(row.at(c));
  return out;
}

AccuracyTable AccuracyTable::select_rows(const std::vector<std::string>& names) const {
  AccuracyTable out;
  out.columns = columns;
  out.trials_per_block = trials_per_block;
  for (const auto& name : names) {
    auto it = std::find(rows.begin(), rows.end(), name);
    if (it == rows.end()) throw DomainError("no row named " + name);
    out.rows.push_back(name);
    out.percent.push_back(percent[static_cast<std::size_t>(it - rows.begin())]);
  }
  return out;
}

namespace {

ColumnSummary summarize(const std::vector<double>& values) {
  ColumnSummary s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

int count_stars(std::string_view cell) {
  int n = 0;
  while (!cell.empty() && cell.back() == '*') {
    ++n;
    cell.remove_suffix(1);
  }
  return n;
}

ColumnSummary parse_summary(const std::string& cell) {
  const std::string pm = "\xC2\xB1";  // U+00B1
  auto pos = cell.find(pm);
  if (pos == std::string::npos) throw ConfigError("summary cell '" + cell + "' lacks mean±sd");
  ColumnSummary s;
  s.mean = io::parse_double(cell.substr(0, pos), "mean");
  s.sd = io::parse_double(cell.substr(pos + pm.size()), "sd");
  return s;
}

std::string stars_text(int stars) { return stars == 0 ? std::string("-") : std::string(static_cast<std::size_t>(stars), '*'); }

std::string summary_text(const ColumnSummary& s) {
  return io::format_fixed(s.mean, 1) + "±" + (s.sd ? io::format_fixed(*s.sd, 1) : std::string("n/a"));
}

}  // namespace

AggregateTable aggregate_table(const AccuracyTable& table, ThresholdMethod method) {
  if (table.rows.empty()) throw ShapeError("accuracy table has no rows");
  if (table.percent.size() != table.rows.size()) throw ShapeError("accuracy table row count mismatch");
  for (const auto& row : table.percent) {
    if (row.size() != table.columns.size()) throw ShapeError("accuracy table is ragged");
  }
  const std::size_t cols = table.columns.size();
  if (cols < 3) throw ShapeError("accuracy table needs at least three block columns");
  AggregateTable agg;
  for (std::size_t c = 0; c < cols; ++c) agg.columns.push_back(summarize(table.column(c)));
  std::vector<double> pooled_last3;
  for (const auto& row : table.percent) {
    double sum = 0.0;
    for (std::size_t c = cols - 3; c < cols; ++c) {
      sum += row[c];
      pooled_last3.push_back(row[c]);
    }
    agg.last3.push_back(sum / 3.0);
    std::vector<int> stars;
    for (double v : row) stars.push_back(significance_stars(v / 100.0, table.trials_per_block, method));
    agg.block_stars.push_back(std::move(stars));
    agg.last3_stars.push_back(significance_stars(agg.last3.back() / 100.0, 3 * table.trials_per_block, method));
  }
  // The summary of the last-3 column pools the underlying block cells.
  agg.last3_summary = summarize(pooled_last3);
  return agg;
}

Table1Fixture load_table1_fixture(const std::filesystem::path& path) {
  auto csv = io::read_csv_file(path);
  Table1Fixture fx;
  for (const auto& c : csv.comments) {
    if (c.rfind("subset:", 0) == 0) {
      std::istringstream ss(c.substr(7));
      std::string name;
      while (ss >> name) fx.subset.push_back(name);
    } else if (c.rfind("trials_per_block:", 0) == 0) {
      fx.table.trials_per_block = static_cast<int>(io::parse_int(c.substr(17), "trials_per_block"));
    }
  }
  if (csv.header.size() < 5 || csv.header.front() != "participant" || csv.header.back() != "last3") {
    throw ShapeError("table fixture header must be participant,<blocks...>,last3");
  }
  fx.table.columns.assign(csv.header.begin() + 1, csv.header.end() - 1);
  const std::size_t cols = fx.table.columns.size();
  for (const auto& row : csv.rows) {
    if (row[0] == "mean_all" || row[0] == "mean_subset") {
      auto& dst = row[0] == "mean_all" ? fx.printed_mean_all : fx.printed_mean_subset;
      for (std::size_t c = 1; c < row.size(); ++c) dst.push_back(parse_summary(row[c]));
      continue;
    }
    fx.table.rows.push_back(row[0]);
    std::vector<double> values;
    std::vector<int> stars;
    for (std::size_t c = 1; c <= cols; ++c) {
      const int s = count_stars(row[c]);
      stars.push_back(s);
      values.push_back(io::parse_double(row[c].substr(0, row[c].size() - static_cast<std::size_t>(s)), "accuracy"));
    }
    fx.table.percent.push_back(std::move(values));
    fx.printed_block_stars.push_back(std::move(stars));
    const auto& last = row[cols + 1];
    const int ls = count_stars(last);
    fx.printed_last3_stars.push_back(ls);
    fx.printed_last3.push_back(io::parse_double(last.substr(0, last.size() - static_cast<std::size_t>(ls)), "last3"));
  }
  if (fx.printed_mean_all.size() != cols + 1 || fx.printed_mean_subset.size() != cols + 1) {
    throw ShapeError("table fixture needs mean_all and mean_subset rows covering every column");
  }
  return fx;
}

Table1Fixture default_table1_fixture() { return load_table1_fixture(data_dir() / "table1.csv"); }

std::vector<double> to_counts(const std::vector<double>& percent, int trials) {
  std::vector<double> out;
  for (double p : percent) out.push_back(std::round(p / 100.0 * trials));
  return out;
}

bool Table1Check::all_pass() const {
  return std::all_of(lines.begin(), lines.end(), [](const CheckLine& l) { return l.pass || !l.asserted; });
}

std::string Table1Check::to_text() const {
  std::ostringstream out;
  for (const auto& l : lines) {
    const char* verdict = l.pass ? "PASS" : (l.asserted ? "FAIL" : "DIFF");
    out << verdict << "  " << l.name << "  expected " << l.expected << "  got " << l.actual << '\n';
  }
  out << (all_pass() ? "table1: all asserted values reproduced\n" : "table1: mismatches found\n");
  return out.str();
}

std::string Table1Check::to_json() const {
  nlohmann::ordered_json j;
  j["all_pass"] = all_pass();
  j["wilcoxon_first_vs_last"] = {{"n", first_vs_last.n},
                                 {"w_plus", first_vs_last.w_plus},
                                 {"w_minus", first_vs_last.w_minus},
                                 {"p_value", first_vs_last.p_value},
                                 {"method", first_vs_last.method == WilcoxonMethod::exact ? "exact" : "normal"}};
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& l : lines) {
    j["checks"].push_back({{"name", l.name},
                           {"expected", l.expected},
                           {"actual", l.actual},
                           {"pass", l.pass},
                           {"asserted", l.asserted}});
  }
  return j.dump(2) + "\n";
}

Table1Check check_table1(const Table1Fixture& fx, double tolerance) {
  Table1Check check;
  const auto& t = fx.table;
  const std::size_t cols = t.columns.size();
  auto near = [&](double a, double b) { return std::abs(a - b) <= tolerance + 1e-9; };
  auto add_summary = [&](const std::string& name, const ColumnSummary& printed, const ColumnSummary& got) {
    const bool ok = near(printed.mean, got.mean) && printed.sd && got.sd && near(*printed.sd, *got.sd);
    check.lines.push_back({name, summary_text(printed), summary_text(got), ok, true});
  };

  const auto all = aggregate_table(t);
  const auto sub = aggregate_table(t.select_rows(fx.subset));
  for (std::size_t c = 0; c < cols; ++c) {
    add_summary("mean_all " + t.columns[c], fx.printed_mean_all[c], all.columns[c]);
    add_summary("mean_subset " + t.columns[c], fx.printed_mean_subset[c], sub.columns[c]);
  }
  add_summary("mean_all last3", fx.printed_mean_all[cols], all.last3_summary);
  add_summary("mean_subset last3", fx.printed_mean_subset[cols], sub.last3_summary);

  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    check.lines.push_back({t.rows[r] + " last3", io::format_fixed(fx.printed_last3[r], 1),
                           io::format_fixed(all.last3[r], 2), near(fx.printed_last3[r], all.last3[r]), true});
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int want = fx.printed_last3_stars[r];
    const int got = all.last3_stars[r];
    check.lines.push_back({t.rows[r] + " last3 stars (n=" + std::to_string(3 * t.trials_per_block) + ")",
                           stars_text(want), stars_text(got), want == got,
                           true});
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const int want = fx.printed_block_stars[r][c];
      const int got = all.block_stars[r][c];
      if (want == got) continue;
      check.lines.push_back({t.rows[r] + " " + t.columns[c] + " stars (n=" + std::to_string(t.trials_per_block) +
                                 ", " + io::format_fixed(t.percent[r][c], 1) + "%)",
                             stars_text(want), stars_text(got), false, false});
    }
  }

  const auto first = to_counts(t.column(0), t.trials_per_block);
  const auto last = to_counts(t.column(cols - 1), t.trials_per_block);
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t r = 0; r < first.size(); ++r) pairs.emplace_back(last[r], first[r]);
  check.first_vs_last = wilcoxon_signed_rank(pairs);
  const double p = check.first_vs_last.p_value;
  check.lines.push_back({"wilcoxon " + t.columns[0] + " vs " + t.columns[cols - 1] + " p", "[0.015, 0.035] (0.022)",
                         io::format_fixed(p, 4), p >= 0.015 && p <= 0.035, true});
  return check;
}

std::vector<PairedBlockAccuracy> regularization_comparison(const StudyReport& report) {
  std::vector<PairedBlockAccuracy> out;
  LabeledDataset training;
  std::size_t cursor = 0;
  for (std::size_t b = 0; b < report.schedule.size(); ++b) {
    const auto& plan = report.schedule[b];
    const auto& result = report.blocks.at(b);
    const std::size_t n = plan.order.size();
    if (cursor + n > report.features.size()) throw ProtocolError("report features do not cover the schedule");
    if (plan.mode == BlockMode::online) {
      const double gamma = *result.gamma_used;
      const auto tuned = train_rlda(training, gamma, report.loading);
      const auto plain = train_rlda(training, 0.0, report.loading);
      int tuned_ok = 0;
      int plain_ok = 0;
      for (std::size_t i = cursor; i < cursor + n; ++i) {
        const auto& fv = report.features[i];
        tuned_ok += tuned.predict(fv.values).label == fv.label;
        plain_ok += plain.predict(fv.values).label == fv.label;
      }
      out.push_back({plan.session, plan.block, gamma, static_cast<double>(tuned_ok) / static_cast<double>(n),
                     static_cast<double>(plain_ok) / static_cast<double>(n)});
    }
    for (std::size_t i = cursor; i < cursor + n; ++i) training.append(report.features[i]);
    cursor += n;
  }
  return out;
}

}  // namespace nirsbci
