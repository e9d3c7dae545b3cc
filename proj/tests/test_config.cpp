#include "sigver/config.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace sigver;

TEST(KeyValueConfig, ParsesTypedValuesAndComments) {
  std::istringstream in("# comment\nlr = 0.5\n\nname = abc  # trailing\nflag = yes\nn=12\n");
  const auto cfg = KeyValueConfig::parse(in);
  double lr = 0;
  std::string name;
  bool flag = false;
  int n = 0;
  cfg.get("lr", lr);
  cfg.get("name", name);
  cfg.get("flag", flag);
  cfg.get("n", n);
  EXPECT_DOUBLE_EQ(lr, 0.5);
  EXPECT_EQ(name, "abc");
  EXPECT_TRUE(flag);
  EXPECT_EQ(n, 12);
  EXPECT_NO_THROW(cfg.reject_unknown());
}

TEST(KeyValueConfig, MissingKeyLeavesTarget) {
  std::istringstream in("a = 1\n");
  const auto cfg = KeyValueConfig::parse(in);
  int b = 7;
  cfg.get("b", b);
  EXPECT_EQ(b, 7);
  EXPECT_THROW(cfg.reject_unknown(), Error);
}

TEST(KeyValueConfig, Errors) {
  std::istringstream dup("a = 1\na = 2\n");
  try {
    KeyValueConfig::parse(dup);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream junk("just words\n");
  EXPECT_THROW(KeyValueConfig::parse(junk), ParseError);
  std::istringstream bad("n = 1x\n");
  const auto cfg = KeyValueConfig::parse(bad);
  int n = 0;
  EXPECT_THROW(cfg.get("n", n), Error);
}
