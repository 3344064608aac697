#include "soma/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include "soma/errors.hpp"

namespace soma {

namespace fs = std::filesystem;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string format_number(std::size_t v) {
  char buf[24];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
  if (columns_.empty()) throw PreconditionError("a CSV table needs at least one column");
}

CsvTable& CsvTable::cell(std::string_view text) {
  if (col_ > 0) body_ << ',';
  body_ << text;
  if (++col_ == columns_.size()) {
    body_ << '\n';
    col_ = 0;
    ++rows_;
  }
  return *this;
}

std::string CsvTable::str() const {
  if (col_ != 0) throw PreconditionError("CSV row left incomplete");
  std::string out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i > 0) out += ',';
    out += columns_[i];
  }
  out += '\n';
  return out + body_.str();
}

OutputDir::OutputDir(fs::path root) : root_(std::move(root)) {}

fs::path OutputDir::write(const std::string& relative, const std::string& content) {
  const fs::path target = root_ / relative;
  // remember which directories we create so a rollback leaves no trace
  std::vector<fs::path> missing;
  for (fs::path dir = target.parent_path(); !dir.empty() && !fs::exists(dir); dir = dir.parent_path()) {
    missing.push_back(dir);
  }
  fs::create_directories(target.parent_path().empty() ? fs::path(".") : target.parent_path());
  created_dirs_.insert(created_dirs_.end(), missing.begin(), missing.end());

  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ResourceError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw ResourceError("failed writing " + tmp.string());
  }
  fs::rename(tmp, target);
  written_.push_back(target);
  return target;
}

void OutputDir::rollback() noexcept {
  std::error_code ec;
  for (const auto& p : written_) fs::remove(p, ec);
  written_.clear();
  std::sort(created_dirs_.begin(), created_dirs_.end(), [](const fs::path& a, const fs::path& b) {
    return a.native().size() > b.native().size();
  });
  for (const auto& d : created_dirs_) fs::remove(d, ec);
  created_dirs_.clear();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace soma
