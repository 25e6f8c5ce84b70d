#pragma once
// Line-oriented text parsing shared by the graph, dataset and config readers.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ugre {

// Carries the file name and 1-based line number of the offending record.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& msg);

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

std::vector<std::string> split_tabs(std::string_view line);
std::vector<std::string> split_ws(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string_view trim(std::string_view s);

// Strict numeric parsing: the whole field must be consumed.
bool parse_size(std::string_view s, std::size_t& out);
bool parse_int(std::string_view s, long long& out);
bool parse_double(std::string_view s, double& out);

// Calls fn(line_number, line) for each line. A trailing '\r' is rejected
// since files are LF only. Blank lines are passed through.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, const std::string&)>& fn);

// Number formatting used by every text output; round-trips doubles exactly.
std::string format_double(double v);

}  // namespace ugre
