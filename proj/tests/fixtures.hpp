// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#ifndef OPENBOOK_FIXTURE_DIR
#define OPENBOOK_FIXTURE_DIR "fixtures"
#endif

inline std::string fixture(const std::string &name)
{
  return std::string(OPENBOOK_FIXTURE_DIR) + "/" + name;
}
