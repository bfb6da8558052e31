#pragma once

#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpest {

/// Minimal CSV emitter. Numbers print with %.17g so round-tripping through
/// text preserves the double exactly and repeated runs are byte-identical.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns)
      : out_(path, std::ios::binary), ncols_(columns.size()) {
    if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
    for (size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns[i];
    }
    out_ << '\n';
  }

  void row(std::span<const double> values) {
    if (values.size() != ncols_)
      throw std::runtime_error("CsvWriter: row width mismatch");
    char buf[32];
    for (size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      std::snprintf(buf, sizeof buf, "%.17g", values[i]);
      out_ << buf;
    }
    out_ << '\n';
  }

  void close() { out_.close(); }

 private:
  std::ofstream out_;
  size_t ncols_;
};

}  // namespace cpest
