#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prpm::csv {

/// RFC-4180 record reader. Quoted fields may contain commas, doubled quotes
/// and line breaks; CRLF and LF line endings are both accepted.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Reads the next record into `fields`. Returns false at end of input.
  bool next(std::vector<std::string>& fields);

  /// 1-based physical line on which the last returned record started.
  std::size_t record_line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

std::string escape(std::string_view field);

void write_row(std::ostream& out, std::span<const std::string> fields);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace prpm::csv
