#pragma once

#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace qnet {

/// Shortest round-trip decimal form, independent of the C++ locale.
std::string format_double(double v);

/// Comma-separated rows with a header. Fields containing a comma, quote or
/// newline are quoted.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void header(std::initializer_list<std::string_view> names);
  void header(const std::vector<std::string>& names);

  CsvWriter& field(double v);
  CsvWriter& field(std::int64_t v);
  CsvWriter& field(std::uint64_t v);
  CsvWriter& field(int v) { return field(static_cast<std::int64_t>(v)); }
  CsvWriter& field(unsigned v) { return field(static_cast<std::uint64_t>(v)); }
  CsvWriter& field(std::string_view v);
  CsvWriter& field(const char* v) { return field(std::string_view(v)); }
  CsvWriter& field(const std::string& v) { return field(std::string_view(v)); }
  void end_row();

 private:
  void separator();

  std::ostream& out_;
  bool first_ = true;
};

}  // namespace qnet
