#pragma once

#include <string>
#include <vector>

namespace rimpact {

// 17 significant digits: round-trips every double exactly.
std::string fmt17(double x);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

struct CsvWriter {
    explicit CsvWriter(std::vector<std::string> header);
    void row(const std::vector<std::string>& cells);
    const std::string& text() const { return buffer_; }

private:
    std::size_t columns_;
    std::string buffer_;
};

}  // namespace rimpact
