#pragma once

// CSV emission and a small reader for round-trip checks.
//
// Layout contract: one header row, data rows, then a trailing comment block
// of `# key=value` lines carrying the resolved run configuration and any
// summary statistics. Numbers are formatted with %.12g in the C locale, so
// identical inputs produce byte-identical files.

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qkdsim {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(std::string path, std::vector<std::string> columns)
      : path_(std::move(path)), columns_(std::move(columns)) {
    if (columns_.empty()) throw CsvError("CSV needs at least one column");
    out_.open(path_);
    if (!out_) throw CsvError("cannot open '" + path_ + "' for writing");
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns_[i];
    }
    out_ << '\n';
  }

  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  ~CsvWriter() {
    try {
      close();
    } catch (...) {
      // Destructor must not throw; an explicit close() reports errors.
    }
  }

  // A row of numbers; strings are allowed via the mixed overload below.
  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_number(v));
    row(cells);
  }

  void row(const std::vector<std::string>& cells) {
    if (closed_) throw CsvError("row() after close() on '" + path_ + "'");
    if (cells.size() != columns_.size()) {
      throw CsvError("row width " + std::to_string(cells.size()) +
                     " does not match header width " +
                     std::to_string(columns_.size()) + " in '" + path_ + "'");
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void metadata(const std::string& key, const std::string& value) {
    if (closed_) throw CsvError("metadata() after close() on '" + path_ + "'");
    metadata_.emplace_back(key, value);
  }

  void metadata(const std::string& key, double value) {
    metadata(key, format_number(value));
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    for (const auto& [k, v] : metadata_) {
      out_ << "# " << k << '=' << v << '\n';
    }
    out_.close();
    if (!out_) throw CsvError("failed writing '" + path_ + "'");
  }

 private:
  std::string path_;
  std::vector<std::string> columns_;
  std::vector<std::pair<std::string, std::string>> metadata_;
  std::ofstream out_;
  bool closed_ = false;
};

struct CsvFile {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::map<std::string, std::string> metadata;

  double cell(std::size_t r, const std::string& column) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c] == column) return std::stod(rows.at(r).at(c));
    }
    throw CsvError("no column named '" + column + "'");
  }

  double meta_number(const std::string& key) const {
    auto it = metadata.find(key);
    if (it == metadata.end()) throw CsvError("no metadata key '" + key + "'");
    return std::stod(it->second);
  }
};

inline CsvFile read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");
  CsvFile file;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      std::size_t b = body.find_first_not_of(' ');
      if (b == std::string::npos) continue;
      body = body.substr(b);
      auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      file.metadata[body.substr(0, eq)] = body.substr(eq + 1);
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream row(line);
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (!saw_header) {
      file.columns = cells;
      saw_header = true;
    } else {
      file.rows.push_back(cells);
    }
  }
  if (!saw_header) throw CsvError("'" + path + "' has no header row");
  return file;
}

}  // namespace qkdsim
