#include "binsight/io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "binsight/error.hpp"

namespace binsight::io {
namespace {

// All containers are little-endian; this code assumes a little-endian
// host, which covers x86-64 and the usual aarch64 deployments.

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T take(std::istream& is, const char* what) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw DataError(std::string("truncated file while reading ") + what);
  return v;
}

void check_magic(std::istream& is, const char* magic, const std::string& path) {
  char buf[4];
  is.read(buf, 4);
  if (!is || std::memcmp(buf, magic, 4) != 0)
    throw DataError("bad magic in " + path + " (want " + magic + ")");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void write_bsna(const std::filesystem::path& path,
                const std::vector<dsp::Waveform>& channels) {
  if (channels.empty()) throw InvalidInput("write_bsna: no channels");
  const std::size_t len = channels[0].samples.size();
  const int rate = channels[0].sample_rate;
  for (const auto& c : channels) {
    if (c.samples.size() != len || c.sample_rate != rate)
      throw InvalidInput("write_bsna: channels disagree on length or rate");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  os.write("BSNA", 4);
  put<std::uint32_t>(os, 1);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(rate));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(channels.size()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(len));
  for (const auto& c : channels) {
    for (double v : c.samples) put<float>(os, static_cast<float>(v));
  }
  if (!os) throw DataError("write failed: " + path.string());
}

std::vector<dsp::Waveform> read_bsna(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path.string());
  check_magic(is, "BSNA", path.string());
  const auto version = take<std::uint32_t>(is, "version");
  if (version != 1) throw DataError("unsupported BSNA version in " + path.string());
  const auto rate = take<std::uint32_t>(is, "sample_rate");
  const auto nch = take<std::uint32_t>(is, "channels");
  const auto len = take<std::uint64_t>(is, "samples_per_channel");
  if (nch == 0 || len == 0) throw DataError("empty BSNA: " + path.string());
  std::vector<dsp::Waveform> out(nch);
  for (std::uint32_t c = 0; c < nch; ++c) {
    out[c].sample_rate = static_cast<int>(rate);
    out[c].channel_id = static_cast<int>(c + 1);
    out[c].samples.resize(len);
    for (std::uint64_t i = 0; i < len; ++i)
      out[c].samples[i] = take<float>(is, "samples");
  }
  return out;
}

void write_bsnt(const std::filesystem::path& path,
                const std::vector<std::uint32_t>& dims,
                const std::vector<float>& data) {
  std::size_t prod = 1;
  for (auto d : dims) prod *= d;
  if (dims.empty() || prod != data.size())
    throw InvalidInput("write_bsnt: dims do not match payload");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  os.write("BSNT", 4);
  put<std::uint32_t>(os, 1);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put<std::uint32_t>(os, d);
  os.write(reinterpret_cast<const char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!os) throw DataError("write failed: " + path.string());
}

void read_bsnt(const std::filesystem::path& path,
               std::vector<std::uint32_t>& dims, std::vector<float>& data) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path.string());
  check_magic(is, "BSNT", path.string());
  const auto version = take<std::uint32_t>(is, "version");
  if (version != 1) throw DataError("unsupported BSNT version in " + path.string());
  const auto rank = take<std::uint32_t>(is, "rank");
  if (rank == 0 || rank > 8) throw DataError("bad BSNT rank in " + path.string());
  dims.resize(rank);
  std::size_t prod = 1;
  for (auto& d : dims) {
    d = take<std::uint32_t>(is, "dims");
    prod *= d;
  }
  data.resize(prod);
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(prod * sizeof(float)));
  if (!is) throw DataError("truncated BSNT payload in " + path.string());
}

void write_bsnc(const std::filesystem::path& path,
                const std::string& config_text,
                const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  os.write("BSNC", 4);
  put<std::uint32_t>(os, 1);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(config_text.size()));
  os.write(config_text.data(),
           static_cast<std::streamsize>(config_text.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    std::size_t prod = 1;
    for (auto d : t.dims) prod *= d;
    if (t.dims.empty() || prod != t.data.size())
      throw InvalidInput("write_bsnc: dims mismatch for " + t.name);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint32_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!os) throw DataError("write failed: " + path.string());
}

void read_bsnc(const std::filesystem::path& path, std::string& config_text,
               std::vector<NamedTensor>& tensors) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path.string());
  check_magic(is, "BSNC", path.string());
  const auto version = take<std::uint32_t>(is, "version");
  if (version != 1) throw DataError("unsupported BSNC version in " + path.string());
  const auto cfg_len = take<std::uint32_t>(is, "config length");
  config_text.resize(cfg_len);
  is.read(config_text.data(), cfg_len);
  if (!is) throw DataError("truncated config in " + path.string());
  const auto count = take<std::uint32_t>(is, "tensor count");
  tensors.clear();
  tensors.resize(count);
  for (auto& t : tensors) {
    const auto name_len = take<std::uint32_t>(is, "name length");
    t.name.resize(name_len);
    is.read(t.name.data(), name_len);
    const auto rank = take<std::uint32_t>(is, "rank");
    if (!is || rank == 0 || rank > 8)
      throw DataError("bad tensor record in " + path.string());
    t.dims.resize(rank);
    std::size_t prod = 1;
    for (auto& d : t.dims) {
      d = take<std::uint32_t>(is, "dims");
      prod *= d;
    }
    t.data.resize(prod);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(prod * sizeof(float)));
    if (!is) throw DataError("truncated payload in " + path.string());
  }
}

Config Config::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return from_string(ss.str());
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    cfg.kv_[key] = value;
  }
  return cfg;
}

bool Config::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string Config::get(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("missing config key: " + key);
  return it->second;
}

std::string Config::get_or(const std::string& key,
                           const std::string& dflt) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? dflt : it->second;
}

long Config::get_int(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t pos = 0;
    const long r = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not an integer: " + v);
  }
}

long Config::get_int_or(const std::string& key, long dflt) const {
  return has(key) ? get_int(key) : dflt;
}

double Config::get_double(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not a number: " + v);
  }
}

double Config::get_double_or(const std::string& key, double dflt) const {
  return has(key) ? get_double(key) : dflt;
}

bool Config::get_bool_or(const std::string& key, bool dflt) const {
  if (!has(key)) return dflt;
  const std::string v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key " + key + ": not a boolean: " + v);
}

std::vector<int> Config::get_int_list_or(const std::string& key,
                                         const std::vector<int>& dflt) const {
  if (!has(key)) return dflt;
  std::vector<int> out;
  std::istringstream is(get(key));
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": bad integer list entry: " + item);
    }
  }
  if (out.empty()) throw ConfigError("config key " + key + ": empty list");
  return out;
}

void Config::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

std::string Config::to_string() const {
  std::ostringstream os;
  for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
  return os.str();
}

}  // namespace binsight::io
