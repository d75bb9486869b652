#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fq/qam.hpp"
#include "fq/signal.hpp"

namespace fq {

/// Flat little-endian frame container.
///
///   offset size field
///   0      4    magic "FQSF"
///   4      2    version (u16, currently 1)
///   6      1    role (u8: 0 transmitted symbols, 1 received symbols,
///               2 waveform)
///   7      2    MF (u16, 0 when unknown)
///   9      2    sps (u16, 1 for symbol frames)
///   11     8    symbol_rate (f64, Hz)
///   19     8    length (u64, samples per polarization)
///   27     ...  length * 4 f64: re_x, im_x, re_y, im_y per sample
inline constexpr std::uint16_t kFrameVersion = 1;
inline constexpr std::size_t kFrameHeaderBytes = 27;

enum class ContainerRole : std::uint8_t { Transmitted = 0, Received = 1, Waveform = 2 };

struct FrameContainer {
  ContainerRole role = ContainerRole::Transmitted;
  std::uint16_t order = 0;
  std::uint16_t sps = 1;
  double symbol_rate = 0.0;
  CVec x;
  CVec y;
};

FrameContainer to_container(const SymbolFrame& f);
FrameContainer to_container(const SignalFrame& f, int order);
SymbolFrame to_symbol_frame(const FrameContainer& c);
SignalFrame to_signal_frame(const FrameContainer& c);

std::vector<std::uint8_t> encode_frame(const FrameContainer& c);
/// Throws std::runtime_error on bad magic, version or truncated payload.
FrameContainer decode_frame(std::span<const std::uint8_t> bytes);

/// Writes via a temporary file and rename so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

void save_frame(const std::filesystem::path& path, const FrameContainer& c);
FrameContainer load_frame(const std::filesystem::path& path);

}  // namespace fq
