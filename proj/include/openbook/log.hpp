// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace openbook
{

// Level from OPENBOOK_LOG (trace, debug, info, warn, error, off); default warn.
void init_logging();
void set_log_level(const std::string &level);

void log_debug(const std::string &msg);
void log_info(const std::string &msg);
void log_warn(const std::string &msg);

}  // namespace openbook
