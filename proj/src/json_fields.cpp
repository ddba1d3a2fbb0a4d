#include "voltlab/json_fields.hpp"

#include <fstream>
#include <sstream>

namespace voltlab {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return ss.str();
}

nlohmann::json parse_json_document(std::string_view document, std::string_view what) {
  try {
    return nlohmann::json::parse(document.begin(), document.end(), nullptr,
                                 /*allow_exceptions=*/true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    // Map the byte offset back to a line/column for the message.
    const size_t offset = std::min<size_t>(e.byte == 0 ? 0 : e.byte - 1, document.size());
    size_t line = 1, column = 1;
    for (size_t i = 0; i < offset; ++i) {
      if (document[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError(std::string(what) + " document, line " + std::to_string(line) +
                     ", column " + std::to_string(column) + ": " + e.what());
  }
}

}  // namespace voltlab
