#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctsim/bytes.hpp"

namespace ctsim {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2 };

std::optional<LogLevel> parse_log_level(std::string_view name);
std::string_view log_level_name(LogLevel level);

/// JSON-lines event log. Each line is one object with sorted keys: the
/// simulated time "t", the node name (null for world events), the event
/// "kind" and kind-specific details.
class EventLog {
 public:
  explicit EventLog(LogLevel threshold = LogLevel::Info) : threshold_(threshold) {}

  bool enabled(LogLevel level) const { return level >= threshold_; }

  void emit(LogLevel level, Millis t, std::optional<std::string_view> node, std::string_view kind,
            nlohmann::json details = nlohmann::json::object());

  const std::vector<std::string>& lines() const { return lines_; }
  std::string text() const;
  void write(const std::filesystem::path& path) const;

 private:
  LogLevel threshold_;
  std::vector<std::string> lines_;
};

/// Splits a JSON-lines document into parsed objects.
std::vector<nlohmann::json> parse_event_lines(std::string_view text);

}  // namespace ctsim
