#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "hyrsm/error.hpp"

namespace hyrsm {

// Flat `key = value` text: one pair per line, '#' starts a comment, blank
// lines ignored, duplicate keys rejected. `origin` is used in error messages
// (usually the file path).
using KvMap = std::map<std::string, std::string>;

KvMap parse_kv_text(const std::string& text, const std::string& origin);
KvMap parse_kv_file(const std::string& path);

// Typed access with defaults; finish() rejects keys nobody asked for, which
// catches misspelled names.
class KvReader {
 public:
  KvReader(KvMap kv, std::string origin) : kv_(std::move(kv)), origin_(std::move(origin)) {}

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_str(const std::string& key, const std::string& fallback);
  std::size_t get_size(const std::string& key, std::size_t fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);

  void finish() const;

 private:
  const std::string* raw(const std::string& key);

  KvMap kv_;
  std::string origin_;
  std::set<std::string> used_;
};

}  // namespace hyrsm
