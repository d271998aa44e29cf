#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "s2p2/events.hpp"

using namespace s2p2;

namespace {

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return read_jsonl(in);
}

}  // namespace

TEST(Events, LoadsSequenceWithDirectFieldMapping) {
  const auto ds = parse("{\"num_marks\":3}\n{\"times\":[0.5,1.2],\"marks\":[0,2],\"t_end\":2.0}\n");
  ASSERT_EQ(ds.sequences.size(), 1u);
  EXPECT_EQ(ds.num_marks, 3);
  const auto& s = ds.sequences[0];
  EXPECT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s.time(1), 1.2);
  EXPECT_EQ(s.mark(1), 2);
  EXPECT_DOUBLE_EQ(s.t_end(), 2.0);
}

TEST(Events, RejectsTies) {
  EXPECT_THROW(parse("{\"num_marks\":1}\n{\"times\":[1.0,1.0],\"marks\":[0,0],\"t_end\":2.0}\n"),
               ValidationError);
}

TEST(Events, AcceptsEmptySequence) {
  const auto ds = parse("{\"num_marks\":1}\n{\"times\":[],\"marks\":[],\"t_end\":5.0}\n");
  ASSERT_EQ(ds.sequences.size(), 1u);
  EXPECT_TRUE(ds.sequences[0].empty());
  EXPECT_DOUBLE_EQ(ds.sequences[0].t_end(), 5.0);
}

TEST(Events, RejectsMarkOutOfRangeAndLengthMismatch) {
  EXPECT_THROW(parse("{\"num_marks\":2}\n{\"times\":[1.0],\"marks\":[2],\"t_end\":2.0}\n"),
               ValidationError);
  EXPECT_THROW(parse("{\"num_marks\":2}\n{\"times\":[1.0,1.5],\"marks\":[0],\"t_end\":2.0}\n"),
               ValidationError);
  EXPECT_THROW(parse("{\"num_marks\":2}\n{\"times\":[3.0],\"marks\":[0],\"t_end\":2.0}\n"),
               ValidationError);
}

TEST(Events, ParseErrorsCarryLineNumbers) {
  try {
    parse("{\"num_marks\":1}\n{\"times\":[1.0],\"marks\":[0],\"t_end\":2.0}\n{not json\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  try {
    parse("{\"num_marks\":1}\n{\"times\":[1.0],\"t_end\":2.0}\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("{\"times\":[],\"marks\":[],\"t_end\":1.0}\n"), ParseError);
}

TEST(Events, RoundTripIsBitExact) {
  Dataset ds;
  ds.num_marks = 2;
  ds.name = "rt";
  ds.sequences.emplace_back(std::vector<double>{0.1 + 0.2, 1.0 / 3.0, 2.0 / 3.0},
                            std::vector<Mark>{0, 1, 0}, 1.0);
  ds.sequences.emplace_back(std::vector<double>{}, std::vector<Mark>{}, 7.25);
  ds.sequences.emplace_back(std::vector<double>{5.000000000000001}, std::vector<Mark>{1}, 9.0, 4.5);
  std::stringstream buf;
  write_jsonl(ds, buf);
  const auto back = read_jsonl(buf, "rt");
  EXPECT_EQ(back, ds);
  EXPECT_EQ(back.sequences[0].time(1), 1.0 / 3.0);
}

TEST(Events, SaveLoadFileAndEmptyDataset) {
  const auto dir = std::filesystem::temp_directory_path() / "s2p2_events_test";
  std::filesystem::create_directories(dir);
  Dataset empty;
  empty.num_marks = 4;
  empty.name = "empty";
  save_jsonl(empty, dir / "empty.jsonl");
  std::ifstream in(dir / "empty.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 1u);
  EXPECT_EQ(load_jsonl(dir / "empty.jsonl"), empty);
  std::filesystem::remove_all(dir);
}

TEST(Events, CountingProcess) {
  const EventSequence s({1.0, 2.0}, {0, 1}, 3.0);
  EXPECT_EQ(counting_process(s, 1.5, 2), (std::vector<std::int64_t>{1, 0}));
  EXPECT_EQ(counting_process(s, 0.0, 2), (std::vector<std::int64_t>{0, 0}));
  EXPECT_EQ(counting_process(s, 3.0, 2), (std::vector<std::int64_t>{1, 1}));
  EXPECT_EQ(counting_process(s, 1.0, 2), (std::vector<std::int64_t>{1, 0}));
  EXPECT_THROW(counting_process(s, 3.5, 2), std::out_of_range);
  std::vector<std::int64_t> prev{0, 0};
  for (double t = 0.0; t <= 3.0; t += 0.05) {
    const auto c = counting_process(s, t, 2);
    EXPECT_GE(c[0], prev[0]);
    EXPECT_GE(c[1], prev[1]);
    prev = c;
  }
}

TEST(Events, MeanInterArrival) {
  Dataset ds;
  ds.sequences.emplace_back(std::vector<double>{1.0, 3.0}, std::vector<Mark>{0, 0}, 4.0);
  EXPECT_DOUBLE_EQ(mean_inter_arrival(ds), 1.5);
}
