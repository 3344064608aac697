#pragma once

#include <filesystem>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace soma {

/// Shortest round-trip decimal form, '.' separator regardless of locale.
std::string format_number(double v);
std::string format_number(std::size_t v);

/// Header-first CSV built in memory; written in one piece by OutputDir.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);

  std::size_t columns() const noexcept { return columns_.size(); }
  std::size_t rows() const noexcept { return rows_; }

  /// Cells are appended left to right; the row closes after the last column.
  CsvTable& cell(std::string_view text);
  CsvTable& cell(double v) { return cell(format_number(v)); }
  CsvTable& cell(std::size_t v) { return cell(format_number(v)); }
  CsvTable& cell(bool v) { return cell(std::string_view(v ? "true" : "false")); }
  CsvTable& cell(const char* text) { return cell(std::string_view(text)); }
  CsvTable& cell(const std::string& text) { return cell(std::string_view(text)); }

  std::string str() const;

 private:
  std::vector<std::string> columns_;
  std::ostringstream body_;
  std::size_t col_ = 0;
  std::size_t rows_ = 0;
};

/// Output directory that writes every file through a temporary and a rename,
/// and can remove everything it wrote when a run fails.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path write(const std::string& relative, const std::string& content);
  void rollback() noexcept;
  const std::vector<std::filesystem::path>& written() const noexcept { return written_; }

 private:
  std::filesystem::path root_;
  std::vector<std::filesystem::path> written_;
  std::vector<std::filesystem::path> created_dirs_;
};

std::string read_file(const std::filesystem::path& path);

}  // namespace soma
