#pragma once

#include <csignal>
#include <pthread.h>

namespace fogroute::tools {

// Call before any thread starts so every thread inherits the mask.
inline sigset_t block_shutdown_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

inline int wait_for_shutdown(const sigset_t& set) {
  int signal = 0;
  sigwait(&set, &signal);
  return signal;
}

} // namespace fogroute::tools
