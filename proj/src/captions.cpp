/*
 * Copyright 2026 The sweepnav Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "sweepnav/captions.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "sweepnav/common.hpp"
#include "sweepnav/io.hpp"

namespace sweepnav {

std::vector<CaptureImage> load_images(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  std::vector<CaptureImage> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(lines[i]);
      out.push_back({j.at("image_id").get<std::string>(), j.at("frame").get<std::size_t>(),
                     j.at("image_ref").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), i + 1, e.what());
    }
  }
  return out;
}

std::string images_jsonl(std::span<const CaptureImage> images) {
  std::string out;
  for (const auto& im : images) {
    nlohmann::ordered_json j = {{"image_id", im.image_id}, {"frame", im.frame}, {"image_ref", im.image_ref}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

MockCaptionSource::MockCaptionSource(const std::filesystem::path& path) {
  const auto file = std::filesystem::is_directory(path) ? path / "captions.jsonl" : path;
  for (auto& rec : load_captions(file)) {
    const std::string id = rec.image_id;
    if (!records_.emplace(id, std::move(rec)).second)
      throw ValidationError(fmt::format("{}: duplicate image_id '{}'", file.string(), id));
  }
}

CaptionResult MockCaptionSource::fetch(const CaptureImage& image) const {
  CaptionResult res;
  res.attempts = 1;
  auto it = records_.find(image.image_id);
  if (it == records_.end()) {
    res.error = "no caption record";
    return res;
  }
  res.record = it->second;
  return res;
}

HttpCaptionSource::HttpCaptionSource(ServiceConfig cfg) : cfg_(std::move(cfg)) {
  const auto scheme = cfg_.endpoint.find("://");
  if (scheme == std::string::npos) throw ValidationError("caption endpoint must be an http(s) URL: " + cfg_.endpoint);
  const std::string proto = cfg_.endpoint.substr(0, scheme);
  if (proto != "http" && proto != "https")
    throw ValidationError("caption endpoint must use http or https: " + cfg_.endpoint);
  const auto slash = cfg_.endpoint.find('/', scheme + 3);
  host_ = cfg_.endpoint.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : cfg_.endpoint.substr(slash);
  if (cfg_.attempts < 1) throw ValidationError("caption.attempts must be >= 1");
  if (cfg_.backoff_ms < 0) throw ValidationError("caption.backoff_ms must be >= 0");
  if (const char* tok = std::getenv(cfg_.token_env.c_str()); tok != nullptr) token_ = tok;
  else spdlog::warn("{} is not set; sending caption requests without a token", cfg_.token_env);
}

CaptionResult HttpCaptionSource::fetch(const CaptureImage& image) const {
  CaptionResult res;
  const std::string body = nlohmann::json{{"image_ref", image.image_ref}, {"prompt", cfg_.prompt}}.dump();
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
  const auto timeout = std::chrono::duration<double>(cfg_.timeout_s);
  int delay = cfg_.backoff_ms;
  for (int attempt = 1; attempt <= cfg_.attempts; ++attempt) {
    res.attempts = attempt;
    httplib::Client client(host_);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    auto reply = client.Post(path_, headers, body, "application/json");
    if (reply && reply->status == 200) {
      try {
        const auto j = nlohmann::json::parse(reply->body);
        CaptionRecord rec;
        rec.image_id = image.image_id;
        rec.frame = image.frame;
        rec.items = j.at("items").get<std::vector<std::string>>();
        res.record = std::move(rec);
        res.error.clear();
      } catch (const nlohmann::json::exception& e) {
        res.error = fmt::format("malformed response: {}", e.what());
      }
      return res;
    }
    res.error = reply ? fmt::format("HTTP {}", reply->status) : "connection failed: " + httplib::to_string(reply.error());
    if (attempt < cfg_.attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      delay *= 2;
    }
  }
  return res;
}

std::vector<CaptionRecord> fetch_captions(std::span<const CaptureImage> images, const CaptionSource& source,
                                          int concurrency, FetchStats* stats) {
  if (concurrency < 1) throw ValidationError("caption.concurrency must be >= 1");
  std::vector<CaptionResult> results(images.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < images.size(); i = next++) results[i] = source.fetch(images[i]);
  };
  const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(concurrency), images.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  FetchStats local;
  std::vector<CaptionRecord> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto& r = results[i];
    local.retries += static_cast<std::size_t>(std::max(0, r.attempts - 1));
    if (r.record) {
      if (r.attempts > 1) spdlog::info("{}: caption received after {} attempts", images[i].image_id, r.attempts);
      ++local.succeeded;
      out.push_back(std::move(*r.record));
    } else {
      spdlog::warn("{}: caption skipped after {} attempt(s): {}", images[i].image_id, r.attempts, r.error);
      ++local.failed;
      local.failures.push_back(images[i].image_id + ": " + r.error);
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
  std::sort(local.failures.begin(), local.failures.end());
  if (stats != nullptr) *stats = std::move(local);
  return out;
}

}  // namespace sweepnav
