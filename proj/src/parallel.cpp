#include "scoremix/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <string_view>

namespace smx {

std::size_t default_workers() {
  if (const char* env = std::getenv("SMX_THREADS")) {
    std::string_view text(env);
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec == std::errc{} && ptr == text.data() + text.size() && value > 0) return value;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

std::size_t resolve_workers(std::size_t requested) {
  return requested == 0 ? default_workers() : requested;
}

}  // namespace smx
