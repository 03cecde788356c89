#include "cefr/binary_io.hpp"

#include <bit>
#include <cstring>

#include "cefr/errors.hpp"

namespace cefr {

void BinaryWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void BinaryWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(std::string_view s) {
  u64(s.size());
  buf_.append(s);
}

void BinaryWriter::f64s(const std::vector<double>& v) {
  u64(v.size());
  for (double x : v) f64(x);
}

void BinaryWriter::strs(const std::vector<std::string>& v) {
  u64(v.size());
  for (const auto& s : v) str(s);
}

std::string_view BinaryReader::take(std::size_t n) {
  if (n > remaining())
    throw ModelTruncatedError("model data truncated: needed " + std::to_string(n) +
                              " bytes, " + std::to_string(remaining()) + " left");
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t BinaryReader::u8() { return static_cast<std::uint8_t>(take(1)[0]); }

std::uint32_t BinaryReader::u32() {
  const auto b = take(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

std::uint64_t BinaryReader::u64() {
  const auto b = take(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::uint64_t BinaryReader::count(std::size_t min_item_bytes) {
  const auto n = u64();
  if (min_item_bytes > 0 && n > remaining() / min_item_bytes)
    throw ModelTruncatedError("model data truncated: count " + std::to_string(n) +
                              " exceeds remaining bytes");
  return n;
}

std::string BinaryReader::str() {
  const auto n = count(1);
  return std::string(take(n));
}

std::vector<double> BinaryReader::f64s() {
  const auto n = count(8);
  std::vector<double> v;
  v.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) v.push_back(f64());
  return v;
}

std::vector<std::string> BinaryReader::strs() {
  const auto n = count(8);
  std::vector<std::string> v;
  v.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) v.push_back(str());
  return v;
}

}  // namespace cefr
