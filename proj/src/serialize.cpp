#include "prismquant/serialize.hpp"

#include <cstdio>
#include <memory>

namespace prismquant {

namespace {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace

std::vector<std::uint8_t> read_file(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw Error("cannot open for reading: " + path);
  std::fseek(f.get(), 0, SEEK_END);
  const long size = std::ftell(f.get());
  if (size < 0) throw Error("cannot stat: " + path);
  std::fseek(f.get(), 0, SEEK_SET);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0 && std::fread(bytes.data(), 1, bytes.size(), f.get()) != bytes.size()) {
    throw Error("short read: " + path);
  }
  return bytes;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error("cannot open for writing: " + path);
  if (!bytes.empty() && std::fwrite(bytes.data(), 1, bytes.size(), f.get()) != bytes.size()) {
    throw Error("short write: " + path);
  }
}

}  // namespace prismquant
