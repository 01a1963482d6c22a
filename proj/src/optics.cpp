#include "nirsbci/optics.hpp"

#include <cmath>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "nirsbci/io.hpp"

namespace nirsbci {

namespace {

constexpr double kMaxCondition = 1e12;

std::string column_name(int channel, double wavelength) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ch%02d_%d", channel + 1, static_cast<int>(std::lround(wavelength)));
  return buf;
}

}  // namespace

void OpticalRecording::validate() const {
  if (channels < 1) throw ShapeError("recording must have at least one channel");
  if (sample_rate_hz <= 0.0) throw ConfigError("sample rate must be positive");
  if (samples.cols() != 2 * channels) {
    throw ShapeError("recording has " + std::to_string(samples.cols()) + " columns, expected " +
                     std::to_string(2 * channels) + " (both wavelengths per channel)");
  }
  if (reference.size() != samples.cols()) throw ShapeError("reference intensity count does not match columns");
}

void ExtinctionTable::validate() const {
  if (!(source_distance_mm > 0.0)) throw ConfigError("source distance must be positive");
  if (!(dpf[0] > 0.0) || !(dpf[1] > 0.0)) throw ConfigError("DPF must be positive");
  if (!epsilon.allFinite()) throw ConfigError("extinction coefficients must be finite");
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(epsilon);
  const auto& s = svd.singularValues();
  if (!(s(1) > 0.0) || s(0) / s(1) > kMaxCondition) {
    throw ConfigError("extinction matrix is singular or ill-conditioned (cond > 1e12)");
  }
}

Eigen::Matrix2d ExtinctionTable::path_matrix() const {
  Eigen::Matrix2d m = epsilon;
  for (int w = 0; w < 2; ++w) m.row(w) *= source_distance_mm * dpf[static_cast<std::size_t>(w)];
  return m;
}

ExtinctionTable default_extinction_table() {
  ExtinctionTable t;
  t.epsilon << 0.0283, 0.192312,
               0.0974, 0.069304;
  t.source_distance_mm = 30.0;
  t.dpf = {6.5, 5.9};
  t.note = "conventional literature defaults (not measured for this device)";
  return t;
}

ExtinctionTable parse_extinction_table(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("extinction table is not valid JSON: ") + e.what());
  }
  try {
    ExtinctionTable t;
    const auto& eps = j.at("epsilon_per_mM_mm");
    const char* wl[] = {"695", "830"};
    for (int w = 0; w < 2; ++w) {
      t.epsilon(w, 0) = eps.at(wl[w]).at("hbo").get<double>();
      t.epsilon(w, 1) = eps.at(wl[w]).at("hbr").get<double>();
      t.dpf[static_cast<std::size_t>(w)] = j.at("dpf").at(wl[w]).get<double>();
    }
    t.source_distance_mm = j.at("source_distance_mm").get<double>();
    t.note = j.value("note", "");
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed extinction table: ") + e.what());
  }
}

ExtinctionTable load_extinction_table(const std::filesystem::path& path) {
  return parse_extinction_table(io::read_text_file(path));
}

std::string extinction_table_json(const ExtinctionTable& table) {
  nlohmann::ordered_json j;
  j["wavelengths_nm"] = {695, 830};
  j["epsilon_per_mM_mm"]["695"] = {{"hbo", table.epsilon(0, 0)}, {"hbr", table.epsilon(0, 1)}};
  j["epsilon_per_mM_mm"]["830"] = {{"hbo", table.epsilon(1, 0)}, {"hbr", table.epsilon(1, 1)}};
  j["source_distance_mm"] = table.source_distance_mm;
  j["dpf"] = {{"695", table.dpf[0]}, {"830", table.dpf[1]}};
  j["note"] = table.note;
  return j.dump(2);
}

OpticalDensity optical_density(const OpticalRecording& recording) {
  recording.validate();
  OpticalDensity od;
  od.sample_rate_hz = recording.sample_rate_hz;
  od.channels = recording.channels;
  od.values.resize(recording.samples.rows(), recording.samples.cols());
  for (Eigen::Index c = 0; c < recording.samples.cols(); ++c) {
    const double i0 = recording.reference(c);
    if (!(i0 > 0.0)) {
      throw DomainError("nonpositive reference intensity at channel " + std::to_string(c / 2 + 1) +
                        ", wavelength index " + std::to_string(c % 2));
    }
    for (Eigen::Index s = 0; s < recording.samples.rows(); ++s) {
      const double v = recording.samples(s, c);
      if (!(v > 0.0)) {
        throw DomainError("nonpositive intensity at channel " + std::to_string(c / 2 + 1) + ", wavelength index " +
                          std::to_string(c % 2) + ", sample " + std::to_string(s));
      }
      od.values(s, c) = -std::log10(v / i0);
    }
  }
  return od;
}

Eigen::Vector2d solve_mbll(const Eigen::Vector2d& od, const ExtinctionTable& table) {
  table.validate();
  return table.path_matrix().partialPivLu().solve(od);
}

HemoSeries mbll_invert(const OpticalDensity& od, const ExtinctionTable& table) {
  table.validate();
  if (od.values.cols() != 2 * od.channels) throw ShapeError("optical density columns do not match channel count");
  const Eigen::Matrix2d inverse = table.path_matrix().inverse();
  HemoSeries out;
  out.sample_rate_hz = od.sample_rate_hz;
  out.channels = od.channels;
  out.hbo.resize(od.values.rows(), od.channels);
  out.hbr.resize(od.values.rows(), od.channels);
  for (int ch = 0; ch < od.channels; ++ch) {
    for (Eigen::Index s = 0; s < od.values.rows(); ++s) {
      Eigen::Vector2d pair(od.values(s, 2 * ch), od.values(s, 2 * ch + 1));
      Eigen::Vector2d conc = inverse * pair;
      out.hbo(s, ch) = conc(0) * kMicromolarPerMillimolar;
      out.hbr(s, ch) = conc(1) * kMicromolarPerMillimolar;
    }
  }
  return out;
}

std::string recording_csv(const OpticalRecording& recording) {
  recording.validate();
  std::ostringstream out;
  out << "# sample_rate_hz," << io::format_double(recording.sample_rate_hz) << '\n';
  out << "# reference_intensities";
  for (Eigen::Index c = 0; c < recording.reference.size(); ++c) out << ',' << io::format_double(recording.reference(c));
  out << "\nt";
  for (int ch = 0; ch < recording.channels; ++ch) {
    for (int w = 0; w < 2; ++w) out << ',' << column_name(ch, recording.wavelengths_nm[static_cast<std::size_t>(w)]);
  }
  out << '\n';
  for (Eigen::Index s = 0; s < recording.samples.rows(); ++s) {
    out << io::format_double(static_cast<double>(s) / recording.sample_rate_hz);
    for (Eigen::Index c = 0; c < recording.samples.cols(); ++c) out << ',' << io::format_double(recording.samples(s, c));
    out << '\n';
  }
  return out.str();
}

OpticalRecording parse_recording_csv(std::istream& in) {
  auto table = io::read_csv(in);
  OpticalRecording rec;
  if (table.header.empty() || table.header[0] != "t") throw ShapeError("recording csv must start with a 't' column");
  const auto cols = static_cast<int>(table.header.size()) - 1;
  if (cols < 2 || cols % 2 != 0) throw ShapeError("recording csv needs two wavelength columns per channel");
  rec.channels = cols / 2;
  for (int ch = 0; ch < rec.channels; ++ch) {
    for (int w = 0; w < 2; ++w) {
      const auto expected = column_name(ch, rec.wavelengths_nm[static_cast<std::size_t>(w)]);
      if (table.header[static_cast<std::size_t>(1 + 2 * ch + w)] != expected) {
        throw ShapeError("recording csv column " + std::to_string(2 + 2 * ch + w) + " should be " + expected);
      }
    }
  }
  bool have_reference = false;
  for (const auto& comment : table.comments) {
    auto fields = io::split(comment, ',');
    if (fields.empty()) continue;
    if (fields[0] == "sample_rate_hz" && fields.size() == 2) {
      rec.sample_rate_hz = io::parse_double(fields[1], "sample_rate_hz");
    } else if (fields[0] == "reference_intensities") {
      if (static_cast<int>(fields.size()) != cols + 1) throw ShapeError("reference intensity block has wrong length");
      rec.reference.resize(cols);
      for (int c = 0; c < cols; ++c) rec.reference(c) = io::parse_double(fields[static_cast<std::size_t>(c + 1)], "I0");
      have_reference = true;
    }
  }
  if (!have_reference) throw ShapeError("recording csv lacks a '# reference_intensities' header block");
  rec.samples.resize(static_cast<Eigen::Index>(table.rows.size()), cols);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (int c = 0; c < cols; ++c) {
      rec.samples(static_cast<Eigen::Index>(r), c) =
          io::parse_double(table.rows[r][static_cast<std::size_t>(c + 1)], "intensity");
    }
  }
  rec.validate();
  return rec;
}

OpticalRecording load_recording_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open recording " + path.string());
  return parse_recording_csv(in);
}

}  // namespace nirsbci
