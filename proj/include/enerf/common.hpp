// Copyright 2026 The enerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace enerf {

inline constexpr const char* kVersion = "0.1.0";

// Rendered colors live in [0,1]; intensities (scenes, image files, metrics)
// live in [0,255]. Renders are scaled by this constant before the linlog
// mapping so that the simulator and the renderer share one intensity domain.
inline constexpr double kIntensityScale = 255.0;

// Default linlog threshold B: linear response below B, logarithmic above.
inline constexpr double kDefaultLinlogThreshold = 20.0;

// RGB -> luminance weights, used for event-ray grayscale reduction and for
// the luminance channel of SSIM.
inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

// Error categories map to CLI exit codes: config 2, data format 3, numeric 4.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataFormatError : public std::runtime_error {
 public:
  explicit DataFormatError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// A scene ray missed all geometry and the scene declares no background.
class CoverageError : public ConfigError {
 public:
  explicit CoverageError(const std::string& msg) : ConfigError(msg) {}
};

enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel log_level();
void log_error(const std::string& msg);
void log_warn(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace enerf
