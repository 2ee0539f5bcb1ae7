#include "ctsim/event_log.hpp"

#include <fstream>
#include <stdexcept>

namespace ctsim {

std::optional<LogLevel> parse_log_level(std::string_view name) {
  if (name == "debug") return LogLevel::Debug;
  if (name == "info") return LogLevel::Info;
  if (name == "warn") return LogLevel::Warn;
  return std::nullopt;
}

std::string_view log_level_name(LogLevel level) {
  switch (level) {
    case LogLevel::Debug:
      return "debug";
    case LogLevel::Info:
      return "info";
    case LogLevel::Warn:
      return "warn";
  }
  return "info";
}

void EventLog::emit(LogLevel level, Millis t, std::optional<std::string_view> node,
                    std::string_view kind, nlohmann::json details) {
  if (!enabled(level)) return;
  if (!details.is_object()) throw std::invalid_argument("event details must be an object");
  details["t"] = t;
  details["kind"] = kind;
  details["node"] = node ? nlohmann::json(*node) : nlohmann::json(nullptr);
  lines_.push_back(details.dump());
}

std::string EventLog::text() const {
  std::string out;
  for (const auto& line : lines_) {
    out += line;
    out += '\n';
  }
  return out;
}

void EventLog::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text();
}

std::vector<nlohmann::json> parse_event_lines(std::string_view text) {
  std::vector<nlohmann::json> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    if (end > pos) out.push_back(nlohmann::json::parse(text.substr(pos, end - pos)));
    pos = end + 1;
  }
  return out;
}

}  // namespace ctsim
