#include "fq/frame_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fq {
namespace {

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}

template <class T>
T get(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("frame container truncated");
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  pos += sizeof(T);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

FrameContainer to_container(const SymbolFrame& f) {
  FrameContainer c;
  c.role = f.role == FrameRole::Transmitted ? ContainerRole::Transmitted : ContainerRole::Received;
  c.order = static_cast<std::uint16_t>(f.order);
  c.sps = 1;
  c.symbol_rate = f.symbol_rate;
  c.x = f.syms_x;
  c.y = f.syms_y;
  return c;
}

FrameContainer to_container(const SignalFrame& f, int order) {
  FrameContainer c;
  c.role = ContainerRole::Waveform;
  c.order = static_cast<std::uint16_t>(order);
  c.sps = static_cast<std::uint16_t>(f.sps);
  c.symbol_rate = f.symbol_rate;
  c.x = f.samples_x;
  c.y = f.samples_y;
  return c;
}

SymbolFrame to_symbol_frame(const FrameContainer& c) {
  if (c.role == ContainerRole::Waveform) throw std::invalid_argument("container holds a waveform, not symbols");
  SymbolFrame f;
  f.role = c.role == ContainerRole::Transmitted ? FrameRole::Transmitted : FrameRole::Received;
  f.order = c.order;
  f.symbol_rate = c.symbol_rate;
  f.syms_x = c.x;
  f.syms_y = c.y;
  return f;
}

SignalFrame to_signal_frame(const FrameContainer& c) {
  SignalFrame f;
  f.symbol_rate = c.symbol_rate;
  f.sps = c.sps;
  f.samples_x = c.x;
  f.samples_y = c.y;
  return f;
}

std::vector<std::uint8_t> encode_frame(const FrameContainer& c) {
  if (c.x.size() != c.y.size()) throw std::invalid_argument("encode_frame: polarization length mismatch");
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderBytes + c.x.size() * 32);
  for (char ch : {'F', 'Q', 'S', 'F'}) out.push_back(static_cast<std::uint8_t>(ch));
  put<std::uint16_t>(out, kFrameVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(c.role));
  put<std::uint16_t>(out, c.order);
  put<std::uint16_t>(out, c.sps);
  put<double>(out, c.symbol_rate);
  put<std::uint64_t>(out, c.x.size());
  for (std::size_t i = 0; i < c.x.size(); ++i) {
    put<double>(out, c.x[i].real());
    put<double>(out, c.x[i].imag());
    put<double>(out, c.y[i].real());
    put<double>(out, c.y[i].imag());
  }
  return out;
}

FrameContainer decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderBytes || std::memcmp(bytes.data(), "FQSF", 4) != 0) {
    throw std::runtime_error("not an FQSF frame container");
  }
  std::size_t pos = 4;
  const auto version = get<std::uint16_t>(bytes, pos);
  if (version != kFrameVersion) throw std::runtime_error("unsupported FQSF version " + std::to_string(version));
  FrameContainer c;
  const auto role = get<std::uint8_t>(bytes, pos);
  if (role > 2) throw std::runtime_error("bad FQSF role byte");
  c.role = static_cast<ContainerRole>(role);
  c.order = get<std::uint16_t>(bytes, pos);
  c.sps = get<std::uint16_t>(bytes, pos);
  c.symbol_rate = get<double>(bytes, pos);
  const auto n = get<std::uint64_t>(bytes, pos);
  if ((bytes.size() - kFrameHeaderBytes) / 32 < n) throw std::runtime_error("frame container truncated");
  c.x.resize(n);
  c.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double xr = get<double>(bytes, pos), xi = get<double>(bytes, pos);
    const double yr = get<double>(bytes, pos), yi = get<double>(bytes, pos);
    c.x[i] = {xr, xi};
    c.y[i] = {yr, yi};
  }
  return c;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void save_frame(const std::filesystem::path& path, const FrameContainer& c) { write_file_atomic(path, encode_frame(c)); }

FrameContainer load_frame(const std::filesystem::path& path) { return decode_frame(read_file(path)); }

}  // namespace fq
