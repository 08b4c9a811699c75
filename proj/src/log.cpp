// SPDX-License-Identifier: Apache-2.0
#include "openbook/log.hpp"

#include <cstdlib>
#include <mutex>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "openbook/error.hpp"

namespace openbook
{

namespace
{

std::shared_ptr<spdlog::logger> &logger()
{
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_mt("openbook");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return instance;
}

}  // namespace

void set_log_level(const std::string &level)
{
  const auto lv = spdlog::level::from_str(level);
  if (lv == spdlog::level::off && level != "off")
  {
    fail(ErrorKind::Config, "unknown log level '" + level + "'");
  }
  logger()->set_level(lv);
}

void init_logging()
{
  static std::once_flag once;
  std::call_once(once, [] {
    if (const char *env = std::getenv("OPENBOOK_LOG"); env && *env)
    {
      set_log_level(env);
    }
  });
}

void log_debug(const std::string &msg)
{
  logger()->debug(msg);
}

void log_info(const std::string &msg)
{
  logger()->info(msg);
}

void log_warn(const std::string &msg)
{
  logger()->warn(msg);
}

}  // namespace openbook
