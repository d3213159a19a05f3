#include "qnet/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace qnet {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void CsvWriter::separator() {
  if (!first_) out_ << ',';
  first_ = false;
}

void CsvWriter::header(std::initializer_list<std::string_view> names) {
  for (auto n : names) field(n);
  end_row();
}

void CsvWriter::header(const std::vector<std::string>& names) {
  for (const auto& n : names) field(n);
  end_row();
}

CsvWriter& CsvWriter::field(double v) {
  separator();
  out_ << format_double(v);
  return *this;
}

CsvWriter& CsvWriter::field(std::int64_t v) {
  separator();
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out_.write(buf.data(), res.ptr - buf.data());
  return *this;
}

CsvWriter& CsvWriter::field(std::uint64_t v) {
  separator();
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out_.write(buf.data(), res.ptr - buf.data());
  return *this;
}

CsvWriter& CsvWriter::field(std::string_view v) {
  separator();
  if (v.find_first_of(",\"\n\r") == std::string_view::npos) {
    out_ << v;
    return *this;
  }
  out_ << '"';
  for (char c : v) {
    if (c == '"') out_ << '"';
    out_ << c;
  }
  out_ << '"';
  return *this;
}

void CsvWriter::end_row() {
  out_ << '\n';
  first_ = true;
}

}  // namespace qnet
