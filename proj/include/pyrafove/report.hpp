#pragma once

#include <optional>
#include <string>
#include <vector>

namespace pyrafove {

/// Text for a double: 10 significant digits when that parses back to the
/// same value, otherwise 17.
std::string format_number(double v);

/// Column-oriented CSV table with fixed number formatting.
class Table {
 public:
  explicit Table(std::vector<std::string> columns = {}) : columns_(std::move(columns)) {}

  void add_row(std::vector<std::string> cells);
  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  std::string csv() const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool line = true;
  bool markers = true;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::optional<double> reference_y;  // dashed horizontal line
};

std::string render_svg(const Plot& plot);

void write_text(const std::string& path, const std::string& content);

}  // namespace pyrafove
