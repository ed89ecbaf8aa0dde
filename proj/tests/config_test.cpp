#include <fogroute/config.hpp>

#include <gtest/gtest.h>

namespace fogroute {
namespace {

TEST(Config, DefaultsDescribeTheTestbed) {
  const auto config = default_config();
  EXPECT_NO_THROW(config.validate());
  EXPECT_EQ(config.local_environment().id, "local");
  EXPECT_DOUBLE_EQ(config.environment("londonServer").latency_ms, 71.153);
  EXPECT_DOUBLE_EQ(config.environment("frankfurtServer").latency_ms, 52.297);

  const auto* heavy = config.find_function("func_heavy");
  ASSERT_NE(heavy, nullptr);
  EXPECT_DOUBLE_EQ(*heavy->local_service_time, 2.0);
  EXPECT_DOUBLE_EQ(heavy->cloud_service_time, 1.0);
  EXPECT_EQ(heavy->registered_environments.size(), 3u);

  const auto* obese = config.find_function("func_obese_heavy");
  ASSERT_NE(obese, nullptr);
  EXPECT_TRUE(obese->cloud_only);
  EXPECT_EQ(obese->pinned_environment, "londonServer");
  EXPECT_FALSE(obese->registered_environments.contains("local"));
}

TEST(Config, JsonRoundTrip) {
  const auto config = default_config();
  const auto again = config_from_json(config_to_json(config));
  EXPECT_EQ(config_to_json(again), config_to_json(config));
}

TEST(Config, RejectsBrokenTopologies) {
  auto doc = config_to_json(default_config());
  auto no_local = doc;
  for (auto& env : no_local["environments"]) {
    env["kind"] = "cloud";
  }
  EXPECT_THROW((void)config_from_json(no_local), std::invalid_argument);

  auto duplicate = doc;
  duplicate["environments"].push_back(duplicate["environments"][0]);
  EXPECT_THROW((void)config_from_json(duplicate), std::invalid_argument);

  auto negative = doc;
  negative["environments"][1]["latency_ms"] = -1.0;
  EXPECT_THROW((void)config_from_json(negative), std::invalid_argument);
}

TEST(Config, HostPort) {
  const auto a = parse_host_port("http://127.0.0.1:8101/x");
  EXPECT_EQ(a.host, "127.0.0.1");
  EXPECT_EQ(a.port, 8101);
  EXPECT_EQ(parse_host_port("localhost:80").port, 80);
  EXPECT_THROW((void)parse_host_port("localhost"), std::invalid_argument);
  EXPECT_THROW((void)parse_host_port("localhost:http"), std::invalid_argument);
}

} // namespace
} // namespace fogroute
