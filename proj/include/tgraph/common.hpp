// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace tgraph {

// Exit codes used by the CLI: 0 success, 2 validation, 3 numeric, 4 I/O.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Parse/schema failure; carries the offending field path in the message.
class SchemaError : public ValidationError {
 public:
  explicit SchemaError(const std::string& what) : ValidationError(what) {}
};

// NaN or other numeric breakdown detected mid-computation (fail fast).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

enum class LogLevel : int { error = 0, warn = 1, info = 2, debug = 3 };

// Log level comes from TGRAPH_LOG (error|warn|info|debug), default warn.
LogLevel log_level();
void set_log_level(LogLevel level);

void log_msg(LogLevel level, const char* fmt, ...);

#define TGRAPH_LOG_INFO(...) ::tgraph::log_msg(::tgraph::LogLevel::info, __VA_ARGS__)
#define TGRAPH_LOG_WARN(...) ::tgraph::log_msg(::tgraph::LogLevel::warn, __VA_ARGS__)
#define TGRAPH_LOG_ERROR(...) ::tgraph::log_msg(::tgraph::LogLevel::error, __VA_ARGS__)
#define TGRAPH_LOG_DEBUG(...) ::tgraph::log_msg(::tgraph::LogLevel::debug, __VA_ARGS__)

}  // namespace tgraph
