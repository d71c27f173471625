#include "spinbath/parallel.hpp"

#include <cstdlib>
#include <string>

#include "spinbath/core.hpp"

namespace spinbath {

int default_workers() {
  if (const char* env = std::getenv("SPINBATH_WORKERS"); env && *env) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(env, &used);
      if (used == std::string(env).size() && n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw InvalidArgument(std::string("SPINBATH_WORKERS must be a positive integer, got '") + env + "'");
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace spinbath
