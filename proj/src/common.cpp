// Copyright 2026 The enerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "enerf/common.hpp"

#include <cstdio>
#include <mutex>

namespace enerf {

namespace {

LogLevel parse_log_level() {
  const char* env = std::getenv("ENERF_LOG");
  if (env == nullptr) return LogLevel::info;
  const std::string v(env);
  if (v == "error") return LogLevel::error;
  if (v == "info") return LogLevel::info;
  if (v == "debug") return LogLevel::debug;
  std::fprintf(stderr, "[enerf] unknown ENERF_LOG value '%s', using 'info'\n", v.c_str());
  return LogLevel::info;
}

std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

void emit(const char* tag, const std::string& msg) {
  std::lock_guard<std::mutex> lock(log_mutex());
  std::fprintf(stderr, "[enerf %s] %s\n", tag, msg.c_str());
}

}  // namespace

LogLevel log_level() {
  static const LogLevel level = parse_log_level();
  return level;
}

void log_error(const std::string& msg) { emit("error", msg); }

void log_warn(const std::string& msg) {
  if (log_level() >= LogLevel::error) emit("warn", msg);
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) emit("info", msg);
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) emit("debug", msg);
}

}  // namespace enerf
