#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adx/core/error.hpp"
#include "adx/core/text.hpp"
#include "adx/data/sample.hpp"

namespace adx::data {

/// One row of the metadata CSV before any preparation.
struct MetadataRecord {
  std::string id;
  Language language = Language::english;
  double age = 0.0;
  int gender = 0;
  std::optional<double> education;
  std::optional<Diagnosis> diagnosis;
  std::optional<int> mmse;
  std::size_t row = 0;  // 1-based data row, header excluded

  bool score_missing() const { return !mmse.has_value(); }
  bool operator==(const MetadataRecord&) const = default;
};

struct MetadataTable {
  std::vector<MetadataRecord> records;
  std::string digest;
};

inline constexpr std::array<std::string_view, 7> kMetadataColumns{
    "id", "language", "age", "gender", "education", "diagnosis", "mmse"};

namespace detail {

inline std::optional<Language> parse_language(std::string_view s) {
  const auto l = text::lower(s);
  if (l == "en" || l == "english" || l == "eng") return Language::english;
  if (l == "gr" || l == "el" || l == "greek" || l == "ell") return Language::greek;
  return std::nullopt;
}

inline std::optional<int> parse_gender(std::string_view s) {
  const auto l = text::lower(s);
  if (l == "male" || l == "m" || l == "0") return 0;
  if (l == "female" || l == "f" || l == "1") return 1;
  return std::nullopt;
}

inline std::optional<std::optional<Diagnosis>> parse_diagnosis(std::string_view s) {
  const auto l = text::lower(s);
  if (l.empty()) return std::optional<Diagnosis>{};
  if (l == "ad" || l == "1") return std::optional<Diagnosis>{Diagnosis::ad};
  if (l == "control" || l == "cn" || l == "hc" || l == "0") return std::optional<Diagnosis>{Diagnosis::control};
  return std::nullopt;
}

}  // namespace detail

/// Parses metadata CSV text. Columns are matched by header name.
inline MetadataTable parse_metadata(std::string_view contents, const std::string& source) {
  MetadataTable table;
  text::Digest digest;
  digest.update(contents);
  table.digest = digest.hex();

  std::istringstream in{std::string(contents)};
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty metadata file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = text::split_csv_line(line);
  std::array<std::size_t, kMetadataColumns.size()> col{};
  for (std::size_t k = 0; k < kMetadataColumns.size(); ++k) {
    auto it = std::find(header.begin(), header.end(), kMetadataColumns[k]);
    if (it == header.end()) {
      throw DataError(source + ": missing required column '" + std::string(kMetadataColumns[k]) + "'");
    }
    col[k] = static_cast<std::size_t>(it - header.begin());
  }

  std::set<std::string> seen;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    ++row;
    const auto cells = text::split_csv_line(line);
    const auto where = source + " row " + std::to_string(row);
    if (cells.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    }
    MetadataRecord r;
    r.row = row;
    r.id = cells[col[0]];
    if (r.id.empty()) throw DataError(where + ": empty id");
    if (!seen.insert(r.id).second) throw DataError(where + ": duplicate id '" + r.id + "'");

    const auto lang = detail::parse_language(cells[col[1]]);
    if (!lang) throw DataError(where + ": unknown language '" + cells[col[1]] + "'");
    r.language = *lang;

    const auto age = text::parse_double(cells[col[2]]);
    if (!age || !std::isfinite(*age)) throw DataError(where + ": non-numeric age '" + cells[col[2]] + "'");
    if (*age < 30.0 || *age > 110.0) throw DataError(where + ": age " + cells[col[2]] + " outside [30,110]");
    r.age = *age;

    const auto gender = detail::parse_gender(cells[col[3]]);
    if (!gender) throw DataError(where + ": unknown gender '" + cells[col[3]] + "'");
    r.gender = *gender;

    if (!cells[col[4]].empty()) {
      const auto edu = text::parse_double(cells[col[4]]);
      if (!edu || !std::isfinite(*edu)) throw DataError(where + ": non-numeric education '" + cells[col[4]] + "'");
      if (*edu < 0.0 || *edu > 30.0) throw DataError(where + ": education outside [0,30]");
      r.education = *edu;
    }

    const auto diag = detail::parse_diagnosis(cells[col[5]]);
    if (!diag) throw DataError(where + ": unknown diagnosis '" + cells[col[5]] + "'");
    r.diagnosis = *diag;

    if (!cells[col[6]].empty()) {
      const auto mmse = text::parse_int(cells[col[6]]);
      if (!mmse) throw DataError(where + ": non-numeric MMSE '" + cells[col[6]] + "'");
      if (*mmse < 0 || *mmse > 30) throw DataError(where + ": MMSE outside [0,30]");
      r.mmse = static_cast<int>(*mmse);
    }
    table.records.push_back(std::move(r));
  }
  return table;
}

inline MetadataTable load_metadata(const std::filesystem::path& path) {
  return parse_metadata(text::read_file(path), path.string());
}

inline std::string format_metadata(const std::vector<MetadataRecord>& records) {
  std::string out = "id,language,age,gender,education,diagnosis,mmse\n";
  for (const auto& r : records) {
    out += r.id;
    out += ',';
    out += to_string(r.language);
    out += ',' + text::format_double(r.age);
    out += r.gender == 1 ? ",female," : ",male,";
    if (r.education) out += text::format_double(*r.education);
    out += ',';
    if (r.diagnosis) out += to_string(*r.diagnosis);
    out += ',';
    if (r.mmse) out += std::to_string(*r.mmse);
    out += '\n';
  }
  return out;
}

// ------------------------------------------------------------------ features

struct FeatureSet {
  std::map<std::string, FeatureSequence> sequences;
  std::string digest;
};

/// Parses one `segment,f0,...,f24` file with segments 0..9 in order.
inline FeatureSequence parse_feature_csv(std::string_view contents, const std::string& source) {
  std::istringstream in{std::string(contents)};
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty feature file");
  const auto header = text::split_csv_line(line);
  if (header.size() != kFunctionals + 1) {
    throw DataError(source + ": expected " + std::to_string(kFunctionals) + " feature columns, got " +
                    std::to_string(header.empty() ? 0 : header.size() - 1));
  }
  if (header[0] != "segment") throw DataError(source + ": first column must be 'segment'");
  for (std::size_t f = 0; f < kFunctionals; ++f) {
    if (header[f + 1] != "f" + std::to_string(f)) {
      throw DataError(source + ": header column " + std::to_string(f + 1) + " must be 'f" +
                      std::to_string(f) + "'");
    }
  }

  std::vector<FeatureSequence::Row> rows;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto cells = text::split_csv_line(line);
    const auto r = rows.size();
    if (cells.size() != kFunctionals + 1) {
      throw DataError(source + ": row " + std::to_string(r) + " has " + std::to_string(cells.size() - 1) +
                      " feature columns, expected " + std::to_string(kFunctionals));
    }
    const auto seg = text::parse_int(cells[0]);
    if (!seg || *seg != static_cast<long long>(r)) {
      throw DataError(source + ": row " + std::to_string(r) + " has segment index '" + cells[0] +
                      "', expected " + std::to_string(r));
    }
    FeatureSequence::Row values{};
    for (std::size_t f = 0; f < kFunctionals; ++f) {
      const auto v = text::parse_double(cells[f + 1]);
      if (!v || !std::isfinite(*v)) {
        throw DataError(source + ": non-finite value at row " + std::to_string(r) + ", column f" +
                        std::to_string(f) + " ('" + cells[f + 1] + "')");
      }
      values[f] = *v;
    }
    if (rows.size() == kSegments) {
      throw DataError(source + ": expected 10 segments, found more");
    }
    rows.push_back(values);
  }
  if (rows.size() != kSegments) {
    throw DataError(source + ": expected 10 segments, found " + std::to_string(rows.size()));
  }
  std::array<FeatureSequence::Row, kSegments> fixed{};
  std::copy(rows.begin(), rows.end(), fixed.begin());
  return FeatureSequence(fixed);
}

/// Loads every `<id>.csv` under `dir`.
inline FeatureSet load_features(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("feature directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  FeatureSet set;
  text::Digest digest;
  for (const auto& f : files) {
    const auto contents = text::read_file(f);
    const auto id = f.stem().string();
    digest.update(id);
    digest.update(contents);
    set.sequences.emplace(id, parse_feature_csv(contents, f.string()));
  }
  set.digest = digest.hex();
  return set;
}

inline std::string format_feature_csv(const FeatureSequence& seq) {
  std::string out = "segment";
  for (std::size_t f = 0; f < kFunctionals; ++f) out += ",f" + std::to_string(f);
  out += '\n';
  for (std::size_t s = 0; s < kSegments; ++s) {
    out += std::to_string(s);
    for (std::size_t f = 0; f < kFunctionals; ++f) out += ',' + text::format_double(seq(s, f));
    out += '\n';
  }
  return out;
}

}  // namespace adx::data
