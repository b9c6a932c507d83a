#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "qgmm/diagnostics.hpp"
#include "qgmm/errors.hpp"
#include "qgmm/linalg.hpp"
#include "qgmm/moment_model.hpp"
#include "qgmm/samplers.hpp"

namespace qgmm::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// CSV

/// Header plus rows of raw string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column_index(std::string_view name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }
};

/// RFC-4180 parser: comma separated, double-quoted fields may contain commas,
/// doubled quotes and line breaks. CRLF and LF line endings are accepted.
inline CsvTable parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record.front().empty())) records.push_back(std::move(record));
    record.clear();
  };

  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started) throw CsvParseError("csv: stray quote inside an unquoted field");
        in_quotes = true;
        field_started = true;
        break;
      case ',': end_field(); break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n': end_record(); break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw CsvParseError("csv: unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();

  if (records.empty()) throw CsvParseError("csv: missing header row");
  CsvTable table;
  table.header = std::move(records.front());
  table.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    if (table.rows[r].size() != table.header.size())
      throw CsvParseError("csv: row " + std::to_string(r + 1) + " has " + std::to_string(table.rows[r].size()) +
                          " fields, header has " + std::to_string(table.header.size()));
  return table;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline CsvTable read_csv(const fs::path& path) { return parse_csv(read_file(path)); }

/// Parses a decimal floating-point cell; surrounding blanks are ignored.
inline std::optional<double> parse_number(std::string_view cell) {
  const auto first = cell.find_first_not_of(" \t");
  if (first == std::string_view::npos) return std::nullopt;
  const auto last = cell.find_last_not_of(" \t");
  cell = cell.substr(first, last - first + 1);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
  return value;
}

/// 17 significant digits: parses back to the identical double.
inline std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

/// Writes a matrix with the given header, one row per line.
inline void write_matrix_csv(const fs::path& path, const std::vector<std::string>& header, const Matrix& m) {
  if (static_cast<Eigen::Index>(header.size()) != m.cols()) throw InvalidArgument("csv: header/column mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// Reads an all-numeric CSV into a matrix.
inline Matrix read_matrix_csv(const fs::path& path, std::vector<std::string>* header = nullptr) {
  const CsvTable table = read_csv(path);
  Matrix m(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      const auto v = parse_number(table.rows[r][c]);
      if (!v)
        throw NonNumericCell(r + 1, table.header[c],
                             "row " + std::to_string(r + 1) + ", column '" + table.header[c] + "': not a number");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = *v;
    }
  if (header) *header = table.header;
  return m;
}

inline std::vector<std::string> theta_header(Eigen::Index k) {
  std::vector<std::string> h;
  for (Eigen::Index j = 1; j <= k; ++j) h.push_back("theta_" + std::to_string(j));
  return h;
}

inline void write_draws_csv(const fs::path& path, const Matrix& draws) {
  write_matrix_csv(path, theta_header(draws.cols()), draws);
}

inline Matrix read_draws_csv(const fs::path& path) { return read_matrix_csv(path); }

/// Exports a plain-regression dataset as y,x_1..x_k (X includes any intercept column).
inline void write_dataset_csv(const fs::path& path, const Dataset& data) {
  std::vector<std::string> header{"y"};
  for (Eigen::Index j = 1; j <= data.k(); ++j) header.push_back("x_" + std::to_string(j));
  Matrix m(data.n(), data.k() + 1);
  m.col(0) = data.y();
  m.rightCols(data.k()) = data.x();
  write_matrix_csv(path, header, m);
}

// ---------------------------------------------------------------------------
// Column mapping and ingestion

/// Role of each CSV column in an exactly identified IV (or plain) regression.
struct ColumnMapping {
  std::string outcome;
  std::vector<std::string> endogenous;
  std::vector<std::string> instruments;
  std::vector<std::string> exogenous;
  bool add_intercept = true;

  void validate() const {
    if (outcome.empty()) throw InvalidArgument("mapping: outcome column is required");
    if (instruments.size() != endogenous.size())
      throw InvalidArgument("mapping: need exactly one instrument per endogenous regressor");
    if (endogenous.empty() && exogenous.empty() && !add_intercept)
      throw InvalidArgument("mapping: no regressors");
  }

  std::size_t k() const { return (add_intercept ? 1 : 0) + endogenous.size() + exogenous.size(); }
};

inline void to_json(nlohmann::json& j, const ColumnMapping& m) {
  j = nlohmann::json{{"outcome", m.outcome},
                     {"endogenous", m.endogenous},
                     {"instruments", m.instruments},
                     {"exogenous", m.exogenous},
                     {"add_intercept", m.add_intercept}};
}

inline void from_json(const nlohmann::json& j, ColumnMapping& m) {
  j.at("outcome").get_to(m.outcome);
  m.endogenous = j.value("endogenous", std::vector<std::string>{});
  m.instruments = j.value("instruments", std::vector<std::string>{});
  m.exogenous = j.value("exogenous", std::vector<std::string>{});
  m.add_intercept = j.value("add_intercept", true);
}

inline ColumnMapping read_mapping(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path)).get<ColumnMapping>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("mapping '" + path.string() + "': " + e.what());
  }
}

/// Checks that every mapped column exists; returns their indices in declaration order.
inline std::map<std::string, std::size_t> resolve_columns(const CsvTable& table, const ColumnMapping& mapping) {
  mapping.validate();
  std::map<std::string, std::size_t> index;
  std::vector<std::string> names{mapping.outcome};
  for (const auto* list : {&mapping.endogenous, &mapping.instruments, &mapping.exogenous})
    names.insert(names.end(), list->begin(), list->end());
  for (const auto& name : names) {
    const auto idx = table.column_index(name);
    if (!idx) throw HeaderMismatch("mapping references column '" + name + "' which is not in the header");
    index[name] = *idx;
  }
  return index;
}

/// X = [1?, endogenous, exogenous], Z = [1?, instruments, exogenous].
inline Dataset dataset_from_table(const CsvTable& table, const ColumnMapping& mapping) {
  const auto index = resolve_columns(table, mapping);
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const Eigen::Index offset = mapping.add_intercept ? 1 : 0;
  const auto k = static_cast<Eigen::Index>(mapping.k());

  auto cell = [&](std::size_t row, const std::string& name) {
    const auto v = parse_number(table.rows[row][index.at(name)]);
    if (!v) {
      const bool blank = table.rows[row][index.at(name)].find_first_not_of(" \t") == std::string::npos;
      throw NonNumericCell(row + 1, name,
                           "row " + std::to_string(row + 1) + ", column '" + name + "': " +
                               (blank ? "missing value" : "not a number '" + table.rows[row][index.at(name)] + "'"));
    }
    return *v;
  };

  Vector y(n);
  Matrix x = Matrix::Ones(n, k);
  Matrix z = Matrix::Ones(n, k);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    y(i) = cell(r, mapping.outcome);
    Eigen::Index col = offset;
    for (std::size_t e = 0; e < mapping.endogenous.size(); ++e, ++col) {
      x(i, col) = cell(r, mapping.endogenous[e]);
      z(i, col) = cell(r, mapping.instruments[e]);
    }
    for (const auto& name : mapping.exogenous) {
      x(i, col) = z(i, col) = cell(r, name);
      ++col;
    }
  }
  return Dataset(std::move(y), std::move(x), std::move(z));
}

inline Dataset ingest_csv(const fs::path& path, const ColumnMapping& mapping) {
  return dataset_from_table(read_csv(path), mapping);
}

// ---------------------------------------------------------------------------
// Results

inline nlohmann::json results_json(const RunResult& result, const MessReport& report) {
  return nlohmann::json{{"algorithm", std::string(to_string(result.algorithm))},
                        {"prior", std::string(to_string(result.prior.family))},
                        {"n", result.n},
                        {"k", result.k},
                        {"seed", result.seed},
                        {"draws_total", result.total_draws},
                        {"draws_retained", result.retained_draws},
                        {"accept_stage1", result.accept_stage1},
                        {"accept_stage2", result.accept_stage2},
                        {"sampling_seconds", result.sampling_seconds},
                        {"mess", report.mess},
                        {"mess_per_iter", report.mess_per_iter},
                        {"mess_per_sec", report.mess_per_sec}};
}

inline void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// Writes the JSON summary and, when `draws_path` is given, the retained draws.
inline void write_results(const RunResult& result, const MessReport& report, const fs::path& json_path,
                          const std::optional<fs::path>& draws_path = std::nullopt) {
  write_text(json_path, results_json(result, report).dump(2) + "\n");
  if (draws_path) write_draws_csv(*draws_path, result.draws);
}

// ---------------------------------------------------------------------------
// Benchmark tables

struct BenchmarkRow {
  std::string scenario;
  Eigen::Index n = 0;
  Eigen::Index k = 0;
  Algorithm algorithm = Algorithm::MdaApprox;
  std::size_t requested = 0;
  std::size_t completed = 0;
  /// Medians over completed replications; empty when none completed.
  std::optional<double> mess_per_iter;
  std::optional<double> mess_per_sec;
};

struct BenchmarkTable {
  std::vector<BenchmarkRow> rows;

  /// Orders rows by (n, k, scenario, algorithm).
  void sort() {
    std::stable_sort(rows.begin(), rows.end(), [](const BenchmarkRow& a, const BenchmarkRow& b) {
      return std::tie(a.n, a.k, a.scenario, a.algorithm) < std::tie(b.n, b.k, b.scenario, b.algorithm);
    });
  }
};

struct RenderedTable {
  std::string text;
  std::string csv;
};

/// Integer with thousands separators, e.g. 52321 -> "52,321".
inline std::string format_grouped(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.0f", value);
  std::string digits(buf);
  std::string sign;
  if (!digits.empty() && digits.front() == '-') {
    sign = "-";
    digits.erase(0, 1);
  }
  std::string out;
  const std::size_t lead = digits.size() % 3;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i != 0 && i >= lead && (i - lead) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  if (sign == "-" && out == "0") sign.clear();
  return sign + out;
}

inline std::string format_fixed3(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", value);
  return buf;
}

struct RenderOptions {
  /// mESS/s depends on wall-clock time; leaving it out makes the CSV reproducible.
  bool include_timing = true;
};

/// Two-panel text table ((a) mESS/iter, (b) mESS/s) with one column per
/// algorithm, plus a long-format CSV companion. Absent cells render as "--".
inline RenderedTable render_table(BenchmarkTable table, RenderOptions options = {}) {
  if (table.rows.empty()) throw InvalidArgument("render_table: empty table");
  table.sort();

  std::vector<Algorithm> algorithms;
  for (Algorithm a : kAllAlgorithms)
    if (std::any_of(table.rows.begin(), table.rows.end(), [a](const auto& r) { return r.algorithm == a; }))
      algorithms.push_back(a);

  using Key = std::tuple<Eigen::Index, Eigen::Index, std::string>;
  std::vector<Key> keys;
  std::map<std::pair<Key, Algorithm>, const BenchmarkRow*> cells;
  for (const auto& row : table.rows) {
    Key key{row.n, row.k, row.scenario};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    cells[{key, row.algorithm}] = &row;
  }

  std::vector<std::string> head{"Data", "n", "k"};
  for (Algorithm a : algorithms) head.emplace_back(display_name(a));

  auto panel = [&](bool per_iter) {
    std::vector<std::vector<std::string>> lines{head};
    for (const auto& key : keys) {
      std::vector<std::string> line{std::get<2>(key), format_grouped(static_cast<double>(std::get<0>(key))),
                                    std::to_string(std::get<1>(key))};
      for (Algorithm a : algorithms) {
        const auto it = cells.find({key, a});
        const std::optional<double> v =
            it == cells.end() ? std::nullopt : (per_iter ? it->second->mess_per_iter : it->second->mess_per_sec);
        line.push_back(v ? (per_iter ? format_fixed3(*v) : format_grouped(*v)) : "--");
      }
      lines.push_back(std::move(line));
    }
    std::vector<std::size_t> width(head.size(), 0);
    for (const auto& l : lines)
      for (std::size_t c = 0; c < l.size(); ++c) width[c] = std::max(width[c], l[c].size());
    std::string out;
    for (const auto& l : lines) {
      for (std::size_t c = 0; c < l.size(); ++c) {
        const std::size_t pad = width[c] - l[c].size();
        if (c == 0) {
          out += l[c] + std::string(pad, ' ');
        } else {
          out += "  " + std::string(pad, ' ') + l[c];
        }
      }
      out += '\n';
    }
    return out;
  };

  RenderedTable rendered;
  rendered.text = "(a) mESS/iter\n" + panel(true) + "\n(b) mESS/s\n" + panel(false);

  std::string csv = "scenario,n,k,algorithm,requested,completed,mess_per_iter";
  if (options.include_timing) csv += ",mess_per_sec";
  csv += '\n';
  for (const auto& row : table.rows) {
    csv += row.scenario + "," + std::to_string(row.n) + "," + std::to_string(row.k) + "," +
           std::string(to_string(row.algorithm)) + "," + std::to_string(row.requested) + "," +
           std::to_string(row.completed) + "," + (row.mess_per_iter ? format_double(*row.mess_per_iter) : "");
    if (options.include_timing) csv += "," + (row.mess_per_sec ? format_double(*row.mess_per_sec) : "");
    csv += '\n';
  }
  rendered.csv = std::move(csv);
  return rendered;
}

}  // namespace qgmm::io
