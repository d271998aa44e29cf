#include "s2p2/events.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

namespace s2p2 {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

EventSequence parse_sequence(const nlohmann::json& obj, std::size_t line) {
  if (!obj.is_object()) {
    throw ParseError(line, "expected a JSON object");
  }
  for (const char* key : {"times", "marks", "t_end"}) {
    if (!obj.contains(key)) {
      throw ParseError(line, std::string("missing field \"") + key + "\"");
    }
  }
  const auto& jt = obj["times"];
  const auto& jm = obj["marks"];
  if (!jt.is_array() || !jm.is_array()) {
    throw ParseError(line, "\"times\" and \"marks\" must be arrays");
  }
  std::vector<double> times;
  times.reserve(jt.size());
  for (const auto& v : jt) {
    if (!v.is_number()) throw ParseError(line, "non-numeric entry in \"times\"");
    times.push_back(v.get<double>());
  }
  std::vector<Mark> marks;
  marks.reserve(jm.size());
  for (const auto& v : jm) {
    if (!v.is_number_integer()) throw ParseError(line, "non-integer entry in \"marks\"");
    marks.push_back(v.get<Mark>());
  }
  if (!obj["t_end"].is_number()) throw ParseError(line, "\"t_end\" must be a number");
  const double t_end = obj["t_end"].get<double>();
  double t_start = 0.0;
  if (obj.contains("t_start")) {
    if (!obj["t_start"].is_number()) throw ParseError(line, "\"t_start\" must be a number");
    t_start = obj["t_start"].get<double>();
  }
  try {
    return EventSequence(std::move(times), std::move(marks), t_end, t_start);
  } catch (const ValidationError& e) {
    throw ValidationError("line " + std::to_string(line) + ": " + e.what());
  }
}

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

EventSequence::EventSequence(std::vector<double> times, std::vector<Mark> marks, double t_end,
                             double t_start)
    : times_(std::move(times)), marks_(std::move(marks)), t_start_(t_start), t_end_(t_end) {
  if (times_.size() != marks_.size()) {
    throw ValidationError("times and marks differ in length (" + std::to_string(times_.size()) +
                          " vs " + std::to_string(marks_.size()) + ")");
  }
  if (!std::isfinite(t_start_) || !std::isfinite(t_end_) || t_end_ < t_start_) {
    throw ValidationError("observation window must be finite with t_start <= t_end");
  }
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!std::isfinite(times_[i])) {
      throw ValidationError("event " + std::to_string(i) + " has a non-finite time");
    }
    if (marks_[i] < 0) {
      throw ValidationError("event " + std::to_string(i) + " has a negative mark");
    }
    if (i > 0 && !(times_[i] > times_[i - 1])) {
      throw ValidationError("event times must be strictly increasing (event " +
                            std::to_string(i) + ")");
    }
  }
  if (!times_.empty() && (times_.front() < t_start_ || times_.back() > t_end_)) {
    throw ValidationError("event times fall outside the observation window");
  }
}

Mark EventSequence::max_mark() const noexcept {
  return marks_.empty() ? Mark{-1} : *std::max_element(marks_.begin(), marks_.end());
}

EventSequence EventSequence::prefix(std::size_t n) const {
  n = std::min(n, times_.size());
  EventSequence out;
  out.times_.assign(times_.begin(), times_.begin() + static_cast<std::ptrdiff_t>(n));
  out.marks_.assign(marks_.begin(), marks_.begin() + static_cast<std::ptrdiff_t>(n));
  out.t_start_ = t_start_;
  out.t_end_ = t_end_;
  return out;
}

void Dataset::validate() const {
  if (num_marks < 1) {
    throw ValidationError("num_marks must be at least 1");
  }
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    if (sequences[s].max_mark() >= num_marks) {
      throw ValidationError("sequence " + std::to_string(s) + " has a mark >= num_marks (" +
                            std::to_string(num_marks) + ")");
    }
  }
}

std::size_t Dataset::num_events() const noexcept {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.size();
  return n;
}

Dataset read_jsonl(std::istream& in, const std::string& name) {
  Dataset ds;
  ds.name = name;
  bool have_header = false;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line, e.what());
    }
    if (!have_header) {
      if (!obj.is_object() || !obj.contains("num_marks")) {
        throw ParseError(line, "first record must be a header with \"num_marks\"");
      }
      if (!obj["num_marks"].is_number_integer()) {
        throw ParseError(line, "\"num_marks\" must be an integer");
      }
      ds.num_marks = obj["num_marks"].get<int>();
      if (obj.contains("name") && obj["name"].is_string() && ds.name.empty()) {
        ds.name = obj["name"].get<std::string>();
      }
      have_header = true;
      continue;
    }
    ds.sequences.push_back(parse_sequence(obj, line));
    if (ds.sequences.back().max_mark() >= ds.num_marks) {
      throw ValidationError("line " + std::to_string(line) + ": mark out of range for num_marks=" +
                            std::to_string(ds.num_marks));
    }
  }
  if (!have_header) {
    throw ParseError(line, "missing header record");
  }
  ds.validate();
  return ds;
}

Dataset load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  return read_jsonl(in, path.stem().string());
}

void write_jsonl(const Dataset& dataset, std::ostream& out) {
  nlohmann::json header = {{"num_marks", dataset.num_marks}};
  if (!dataset.name.empty()) header["name"] = dataset.name;
  out << header.dump() << '\n';
  for (const auto& seq : dataset.sequences) {
    std::string line = "{\"times\":[";
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) line += ',';
      line += format_double(seq.time(i));
    }
    line += "],\"marks\":[";
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) line += ',';
      line += std::to_string(seq.mark(i));
    }
    line += "],\"t_end\":" + format_double(seq.t_end());
    if (seq.t_start() != 0.0) line += ",\"t_start\":" + format_double(seq.t_start());
    line += "}\n";
    out << line;
  }
}

void save_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  write_jsonl(dataset, out);
  out.flush();
  if (!out) {
    throw std::runtime_error("write failed for " + path.string());
  }
}

std::vector<std::int64_t> counting_process(const EventSequence& seq, double t, int num_marks) {
  if (t < seq.t_start() || t > seq.t_end()) {
    throw std::out_of_range("query time outside the observation window");
  }
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_marks), 0);
  for (std::size_t i = 0; i < seq.size() && seq.time(i) <= t; ++i) {
    const auto k = seq.mark(i);
    if (k >= num_marks) throw ValidationError("mark out of range");
    ++counts[static_cast<std::size_t>(k)];
  }
  return counts;
}

double mean_inter_arrival(const Dataset& dataset) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& seq : dataset.sequences) {
    double prev = seq.t_start();
    for (double t : seq.times()) {
      total += t - prev;
      prev = t;
      ++n;
    }
  }
  return n == 0 ? 1.0 : total / static_cast<double>(n);
}

}  // namespace s2p2
