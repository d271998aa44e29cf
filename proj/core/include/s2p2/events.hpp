#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace s2p2 {

using Mark = std::int32_t;

/// Raised when data violates the marked point process assumptions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for malformed JSON Lines input. `line()` is 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Ordered (time, mark) pairs observed on the window [t_start, t_end].
///
/// Times are strictly increasing; ties are rejected at construction. Mark
/// range is checked against the number of marks by `Dataset::validate`.
class EventSequence {
 public:
  EventSequence() = default;
  EventSequence(std::vector<double> times, std::vector<Mark> marks, double t_end,
                double t_start = 0.0);

  std::span<const double> times() const noexcept { return times_; }
  std::span<const Mark> marks() const noexcept { return marks_; }
  double time(std::size_t i) const { return times_.at(i); }
  Mark mark(std::size_t i) const { return marks_.at(i); }
  double t_start() const noexcept { return t_start_; }
  double t_end() const noexcept { return t_end_; }
  std::size_t size() const noexcept { return times_.size(); }
  bool empty() const noexcept { return times_.empty(); }
  Mark max_mark() const noexcept;

  /// First `n` events on the same window.
  EventSequence prefix(std::size_t n) const;

  bool operator==(const EventSequence&) const = default;

 private:
  std::vector<double> times_;
  std::vector<Mark> marks_;
  double t_start_ = 0.0;
  double t_end_ = 0.0;
};

struct Dataset {
  std::vector<EventSequence> sequences;
  int num_marks = 1;
  std::string name;

  /// Throws ValidationError when K < 1 or a mark falls outside [0, K).
  void validate() const;
  std::size_t num_events() const noexcept;

  bool operator==(const Dataset&) const = default;
};

/// JSON Lines: a header record `{"num_marks": K}` followed by one
/// `{"times": [...], "marks": [...], "t_end": T}` object per line.
Dataset read_jsonl(std::istream& in, const std::string& name = {});
Dataset load_jsonl(const std::filesystem::path& path);

/// Numbers are written with 17 significant digits so load(save(d)) == d.
void write_jsonl(const Dataset& dataset, std::ostream& out);
void save_jsonl(const Dataset& dataset, const std::filesystem::path& path);

/// Per-mark counts of events with time <= t.
std::vector<std::int64_t> counting_process(const EventSequence& seq, double t, int num_marks);

/// Mean gap between consecutive events (window start counts as the first
/// origin); 1.0 when the dataset has no events.
double mean_inter_arrival(const Dataset& dataset);

}  // namespace s2p2
