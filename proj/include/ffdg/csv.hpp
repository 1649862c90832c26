#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ffdg/error.hpp"

namespace ffdg {

// Minimal CSV writer; numbers at full precision (%.17g) for byte-stable output.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    require(out_.good(), errc::io_error, "cannot open '" + path + "' for writing");
  }

  void header(const std::vector<std::string>& cols) {
    for (size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
    out_ << "\n";
  }

  CsvWriter& field(const std::string& s) {
    sep();
    out_ << s;
    return *this;
  }
  CsvWriter& field(double v) {
    sep();
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out_ << buf;
    return *this;
  }
  CsvWriter& field(int v) {
    sep();
    out_ << v;
    return *this;
  }
  void endrow() {
    out_ << "\n";
    first_ = true;
  }

  static void write_matrix(const std::string& path, const Eigen::MatrixXd& M) {
    CsvWriter w(path);
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      for (Eigen::Index j = 0; j < M.cols(); ++j) w.field(M(i, j));
      w.endrow();
    }
  }

 private:
  void sep() {
    if (!first_) out_ << ",";
    first_ = false;
  }
  std::ofstream out_;
  bool first_ = true;
};

}  // namespace ffdg
