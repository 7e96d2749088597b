#pragma once
#include <chrono>
#include <cstddef>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <utility>

#include "httplib.h"
// <resolv.h> defines `_res` as a macro, which breaks Eigen parameter names.
#undef _res
#include "json.hpp"

#include "dmtc/errors.hpp"

namespace dmtc {

namespace detail {

// Whole-line stderr writes; requests for several classes run concurrently.
inline void log_line(const std::string& line) {
  static std::mutex mu;
  const std::lock_guard lock(mu);
  std::cerr << line << '\n';
}

}  // namespace detail

struct RetryPolicy {
  double timeout_seconds = 60.0;
  int max_retries = 3;
  int initial_backoff_ms = 500;  // doubles after every failed attempt
};

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

inline ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ValidationError("endpoint URL '" + url + "' lacks a scheme");
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw ValidationError("unsupported URL scheme '" + scheme + "'");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https")
    throw ValidationError("https endpoints need a build with OpenSSL support");
#endif
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (out.origin.size() <= scheme_end + 3) throw ValidationError("endpoint URL '" + url + "' lacks a host");
  return out;
}

// POSTs a JSON body and returns the parsed JSON reply. Transport failures,
// non-2xx statuses and unparseable bodies are retried with exponential
// backoff; the last failure is rethrown as RemoteServiceError.
inline nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                                const httplib::Headers& headers, const RetryPolicy& policy) {
  if (policy.timeout_seconds <= 0) throw ValidationError("timeout must be positive");
  if (policy.max_retries < 0) throw ValidationError("max_retries must be >= 0");
  const ParsedUrl target = parse_url(url);
  const std::string payload = body.dump();
  const auto secs = static_cast<time_t>(policy.timeout_seconds);
  const auto usecs = static_cast<time_t>((policy.timeout_seconds - static_cast<double>(secs)) * 1e6);

  std::string last_error;
  int backoff = policy.initial_backoff_ms;
  const int attempts = policy.max_retries + 1;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    httplib::Client client(target.origin);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    auto res = client.Post(target.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP status " + std::to_string(res->status);
    } else {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error&) {
        last_error = "reply is not valid JSON";
      }
    }
    if (attempt < attempts) {
      detail::log_line("[dmtc] POST " + url + " failed (attempt " + std::to_string(attempt) + "/" +
                       std::to_string(attempts) + "): " + last_error + "; retrying in " +
                       std::to_string(backoff) + " ms");
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }
  throw RemoteServiceError("POST " + url + " failed after " + std::to_string(attempts) +
                           " attempt(s): " + last_error);
}

}  // namespace dmtc
