#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace edna {

/// Collects run log lines and mirrors them to a stream. The accumulated
/// text is what LOG-category backups persist.
class Logger {
public:
  explicit Logger(std::ostream* mirror = &std::cout) : mirror_(mirror) {}

  void info(const std::string& line) {
    lines_.push_back(line);
    if (mirror_ != nullptr) {
      (*mirror_) << line << "\n";
    }
  }

  const std::vector<std::string>& lines() const { return lines_; }

  std::string text() const {
    std::string out;
    for (const std::string& l : lines_) {
      out += l;
      out += '\n';
    }
    return out;
  }

  void set_mirror(std::ostream* mirror) { mirror_ = mirror; }

private:
  std::ostream* mirror_;
  std::vector<std::string> lines_;
};

} // namespace edna
