#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "mixdec/error.hpp"
#include "mixdec/rng.hpp"

namespace mixdec::io {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open " + path.string());
  return in;
}

/// Writes `content` to a sibling temp file and renames it over `path`.
inline void atomic_write(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

// Little-endian binary buffer; the host is assumed little-endian.
class BinaryWriter {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void put_doubles(const std::vector<double>& v) {
    buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  void put_bytes(std::string_view s) { buf_.append(s); }
  /// Appends an FNV-1a checksum of everything written so far.
  void seal() { put<std::uint64_t>(fnv1a64(buf_)); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::string data, std::string source)
      : data_(std::move(data)), source_(std::move(source)) {}

  template <class T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void get_doubles(std::vector<double>& v) {
    need(v.size() * sizeof(double));
    std::memcpy(v.data(), data_.data() + pos_, v.size() * sizeof(double));
    pos_ += v.size() * sizeof(double);
  }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  /// Checks the trailing checksum; call before parsing anything else.
  void verify_seal() {
    if (data_.size() < sizeof(std::uint64_t)) throw IoError(source_ + ": file too short");
    std::size_t body = data_.size() - sizeof(std::uint64_t);
    std::uint64_t stored;
    std::memcpy(&stored, data_.data() + body, sizeof stored);
    if (stored != fnv1a64(std::string_view(data_).substr(0, body)))
      throw IoError(source_ + ": checksum mismatch (corrupt file)");
    end_ = body;
  }
  bool at_end() const { return pos_ == end_; }
  const std::string& source() const { return source_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw IoError(source_ + ": unexpected end of file");
  }
  std::string data_;
  std::string source_;
  std::size_t pos_ = 0;
  std::size_t end_ = data_.size();
};

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace mixdec::io
