#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "mixdetect/config.hpp"
#include "mixdetect/ingest.hpp"
#include "mixdetect/io.hpp"

using namespace mixdetect;

TEST(FormatDouble, RoundTrips) {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, i % 20 - 10);
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(3), "3");
}

TEST(ParseDouble, WholeStringOnly) {
  EXPECT_EQ(parse_double(" 2.5 "), 2.5);
  EXPECT_THROW(parse_double("2.5x"), std::invalid_argument);
  EXPECT_THROW(parse_double(""), std::invalid_argument);
}

TEST(Split, KeepsEmptyFields) {
  const auto f = split("a,,b,", ',');
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[1], "");
  EXPECT_EQ(f[3], "");
  EXPECT_EQ(trim("  x \t"), "x");
}

TEST(AtomicWrite, ReplacesOrLeavesNothing) {
  const auto dir = std::filesystem::temp_directory_path() / ("mixdetect_io_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const auto path = dir / "out.txt";
  atomic_write(path, [](std::ostream& o) { o << "first\n"; });
  EXPECT_EQ(read_file(path), "first\n");
  EXPECT_THROW(atomic_write(path,
                            [](std::ostream& o) {
                              o << "partial";
                              throw std::runtime_error("boom");
                            }),
               std::runtime_error);
  EXPECT_EQ(read_file(path), "first\n");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++entries;
  EXPECT_EQ(entries, 1u);
  std::filesystem::remove_all(dir);
}

TEST(ParseKeyValues, CommentsAndDuplicates) {
  std::istringstream in("# run settings\nepsilon = 0.7\n\n seed=4 \n");
  const auto kv = parse_key_values(in);
  EXPECT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv.at("epsilon"), "0.7");
  EXPECT_EQ(kv.at("seed"), "4");

  std::istringstream dup("seed = 1\nseed = 2\n");
  try {
    parse_key_values(dup);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream noeq("seed 1\n");
  EXPECT_THROW(parse_key_values(noeq), ParseError);
}

TEST(ParseDuration, Units) {
  EXPECT_EQ(parse_duration("10800"), 10800);
  EXPECT_EQ(parse_duration("3h"), 10800);
  EXPECT_EQ(parse_duration("0.25h"), 900);
  EXPECT_EQ(parse_duration("90m"), 5400);
  EXPECT_EQ(parse_duration("45s"), 45);
  EXPECT_THROW(parse_duration("0.5s"), std::invalid_argument);
  EXPECT_THROW(parse_duration("0"), std::invalid_argument);
  EXPECT_THROW(parse_duration("-2h"), std::invalid_argument);
  EXPECT_THROW(parse_duration("3d"), std::invalid_argument);
}

TEST(ApplyConfig, OverridesAndValidation) {
  std::istringstream in("delta = 6h\nepsilon = 0.8\nn_runs = 7\nsynth.seed = 3\nthreads = 2\n");
  PipelineConfig c;
  apply_config(c, parse_key_values(in));
  EXPECT_EQ(c.delta, 6 * 3600);
  EXPECT_EQ(c.epsilon, 0.8);
  EXPECT_EQ(c.n_runs, 7u);
  EXPECT_EQ(c.threads, 2u);
  EXPECT_EQ(c.lambda, 1.0);
  EXPECT_NO_THROW(validate(c));

  std::istringstream unknown("epsilonn = 0.8\n");
  EXPECT_THROW(apply_config(c, parse_key_values(unknown)), std::invalid_argument);
  std::istringstream bad_number("lambda = fast\n");
  EXPECT_THROW(apply_config(c, parse_key_values(bad_number)), std::invalid_argument);

  c.epsilon = 1.0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c.epsilon = 0.6;
  c.n_null = 1;
  EXPECT_THROW(validate(c), std::invalid_argument);
}
