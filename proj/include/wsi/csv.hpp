#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace wsi::csv {

/// One parsed record plus the physical line it started on (1-based).
struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines, CRLF.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// nullopt at end of input. Throws wsi::LoadError on an unterminated quote.
  std::optional<Row> next();

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::vector<Row> read_all(std::istream& in);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace wsi::csv
