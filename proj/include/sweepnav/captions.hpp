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

#ifndef SWEEPNAV_CAPTIONS_HPP_
#define SWEEPNAV_CAPTIONS_HPP_

// Item-name extraction for captured images, either from a pre-authored JSONL
// file or from an HTTP captioning service.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sweepnav/object_map.hpp"

namespace sweepnav {

inline constexpr const char* kCaptionPrompt =
    "Describe the names of all the products in the image while emphasizing texts if they exist.";

struct CaptureImage {
  std::string image_id;
  std::size_t frame = 0;
  std::string image_ref;
};

std::vector<CaptureImage> load_images(const std::filesystem::path& path);
std::string images_jsonl(std::span<const CaptureImage> images);

struct CaptionResult {
  std::optional<CaptionRecord> record;
  int attempts = 0;
  std::string error;  // set when record is empty
};

// fetch() is called concurrently from several workers.
class CaptionSource {
 public:
  virtual ~CaptionSource() = default;
  virtual CaptionResult fetch(const CaptureImage& image) const = 0;
};

// Reads {"image_id", "frame", "items"} records. `path` is the JSONL file or a
// directory holding captions.jsonl.
class MockCaptionSource final : public CaptionSource {
 public:
  explicit MockCaptionSource(const std::filesystem::path& path);
  CaptionResult fetch(const CaptureImage& image) const override;

 private:
  std::map<std::string, CaptionRecord> records_;
};

struct ServiceConfig {
  std::string endpoint;  // http(s)://host[:port]/path
  std::string token_env = "SWEEPNAV_CAPTION_TOKEN";
  std::string prompt = kCaptionPrompt;
  int attempts = 3;
  int backoff_ms = 200;  // doubled after every failed attempt
  double timeout_s = 30.0;
};

// POSTs {"image_ref", "prompt"} and expects {"items": [string, ...]}. The
// bearer token is read from the environment variable named in the config.
class HttpCaptionSource final : public CaptionSource {
 public:
  explicit HttpCaptionSource(ServiceConfig cfg);
  CaptionResult fetch(const CaptureImage& image) const override;

 private:
  ServiceConfig cfg_;
  std::string host_;
  std::string path_;
  std::string token_;
};

struct FetchStats {
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  std::size_t retries = 0;
  std::vector<std::string> failures;  // "image_id: reason", sorted
};

// Failures are logged and skipped. Output is sorted by image_id.
std::vector<CaptionRecord> fetch_captions(std::span<const CaptureImage> images, const CaptionSource& source,
                                          int concurrency = 4, FetchStats* stats = nullptr);

}  // namespace sweepnav

#endif  // SWEEPNAV_CAPTIONS_HPP_
