#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "s2p2/bench.hpp"
#include "s2p2/events.hpp"

namespace s2p2::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_flat_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty()) throw ValidationError(path.string() + ":" + std::to_string(no) + ": empty key");
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

std::vector<std::string> expand_config(const std::vector<std::string>& args,
                                       const std::vector<std::string>& subcommands) {
  std::vector<std::string> rest;
  std::vector<std::string> from_file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ValidationError("--config needs a file");
      path = args[++i];
    } else if (args[i].starts_with("--config=")) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
      continue;
    }
    for (auto& [key, value] : read_flat_config(path)) {
      from_file.push_back("--" + key);
      from_file.push_back(value);
    }
  }
  if (from_file.empty()) return rest;
  auto sub = std::find_if(rest.begin() + (rest.empty() ? 0 : 1), rest.end(), [&](const std::string& a) {
    return std::find(subcommands.begin(), subcommands.end(), a) != subcommands.end();
  });
  if (sub == rest.end()) throw ValidationError("--config must follow a subcommand");
  rest.insert(sub + 1, from_file.begin(), from_file.end());
  return rest;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ValidationError("not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> parse_lengths(const std::string& text) {
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const auto lo = parse_list(text.substr(0, dots));
    const auto hi = parse_list(text.substr(dots + 2));
    if (lo.size() != 1 || hi.size() != 1 || lo[0] < 1 || hi[0] < lo[0]) {
      throw ValidationError("lengths range must be lo..hi with 1 <= lo <= hi");
    }
    return geometric_lengths(static_cast<std::size_t>(lo[0]), static_cast<std::size_t>(hi[0]));
  }
  std::vector<std::size_t> out;
  for (double v : parse_list(text)) {
    if (v < 1 || v != std::floor(v)) throw ValidationError("lengths must be positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ValidationError("no lengths given");
  return out;
}

void write_json_atomic(const nlohmann::json& j, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace s2p2::cli
