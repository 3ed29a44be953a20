#pragma once

#include <functional>
#include <iostream>
#include <string>

namespace diar {

// Warnings go through a swappable handler so callers (and tests) can capture
// or silence them. Errors are exceptions throughout the library.
using WarnHandler = std::function<void(const std::string&)>;

inline WarnHandler& warn_handler() {
  static WarnHandler handler = [](const std::string& msg) {
    std::cerr << "diar: warning: " << msg << '\n';
  };
  return handler;
}

inline void warn(const std::string& msg) {
  if (warn_handler()) warn_handler()(msg);
}

// RAII scope that redirects warnings, restoring the previous handler on exit.
class ScopedWarnHandler {
 public:
  explicit ScopedWarnHandler(WarnHandler h) : previous_(warn_handler()) {
    warn_handler() = std::move(h);
  }
  ~ScopedWarnHandler() { warn_handler() = std::move(previous_); }
  ScopedWarnHandler(const ScopedWarnHandler&) = delete;
  ScopedWarnHandler& operator=(const ScopedWarnHandler&) = delete;

 private:
  WarnHandler previous_;
};

}  // namespace diar
