#include <gtest/gtest.h>

#include <sstream>

#include "twae/config.hpp"

using namespace twae;

TEST(ParseConfig, KeysValuesAndComments) {
  std::istringstream in("# header\nm = 20\n\n  lambda=0.5   # weight\nhidden = 64,64\n");
  const auto e = parse_config(in);
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0].key, "m");
  EXPECT_EQ(e[0].value, "20");
  EXPECT_EQ(e[1].key, "lambda");
  EXPECT_EQ(e[1].value, "0.5");
  EXPECT_EQ(e[1].line, 4u);
  EXPECT_EQ(e[2].value, "64,64");
}

TEST(ParseConfig, Errors) {
  std::istringstream missing("m 20\n");
  EXPECT_THROW(parse_config(missing), ConfigError);
  std::istringstream empty_key("= 3\n");
  EXPECT_THROW(parse_config(empty_key), ConfigError);
  std::istringstream repeated("m = 1\nm = 2\n");
  EXPECT_THROW(parse_config(repeated), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config"), ConfigError);
}

TEST(WriteConfig, RoundTrip) {
  std::ostringstream os;
  write_config(os, {{"alpha", "0.2"}, {"m", "20"}});
  std::istringstream in(os.str());
  const auto e = parse_config(in);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].key, "alpha");
  EXPECT_EQ(e[1].value, "20");
}
