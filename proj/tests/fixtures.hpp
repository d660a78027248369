#pragma once

#include <fstream>
#include <sstream>
#include <string>

inline std::string fixture(const std::string& name) {
  std::ifstream f(std::string(SASSKIT_FIXTURES) + "/" + name);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}
