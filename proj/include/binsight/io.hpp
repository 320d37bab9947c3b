#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "binsight/wave.hpp"

namespace binsight::io {

// "BSNA" audio container: magic, u32 version=1, u32 sample_rate,
// u32 channels, u64 samples_per_channel, then planar float32 payload,
// channel by channel, little-endian. Channel ids are positional (1..n).
void write_bsna(const std::filesystem::path& path,
                const std::vector<dsp::Waveform>& channels);
std::vector<dsp::Waveform> read_bsna(const std::filesystem::path& path);

// "BSNT" tensor container: magic, u32 version=1, u32 rank, u32 dims[rank],
// float32 row-major payload, little-endian.
void write_bsnt(const std::filesystem::path& path,
                const std::vector<std::uint32_t>& dims,
                const std::vector<float>& data);
void read_bsnt(const std::filesystem::path& path,
               std::vector<std::uint32_t>& dims, std::vector<float>& data);

// "BSNC" checkpoint container: magic, u32 version=1, u32 config_len,
// config text (key=value), u32 count, then per record a name, dims and a
// float32 payload. The name list is the index into the container.
struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};
void write_bsnc(const std::filesystem::path& path,
                const std::string& config_text,
                const std::vector<NamedTensor>& tensors);
void read_bsnc(const std::filesystem::path& path, std::string& config_text,
               std::vector<NamedTensor>& tensors);

// Flat "key = value" text config. '#' starts a comment; keys are unique;
// later writes of the same key overwrite.
class Config {
 public:
  Config() = default;
  static Config from_file(const std::filesystem::path& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get(const std::string& key) const;  // throws ConfigError
  std::string get_or(const std::string& key, const std::string& dflt) const;
  long get_int(const std::string& key) const;
  long get_int_or(const std::string& key, long dflt) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double dflt) const;
  bool get_bool_or(const std::string& key, bool dflt) const;
  // Comma-separated integer list, e.g. "3,8".
  std::vector<int> get_int_list_or(const std::string& key,
                                   const std::vector<int>& dflt) const;

  void set(const std::string& key, const std::string& value);
  std::string to_string() const;  // deterministic, sorted by key

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace binsight::io
