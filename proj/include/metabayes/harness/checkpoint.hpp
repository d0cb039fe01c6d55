#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <variant>

#include "metabayes/metarl/trainer.hpp"
#include "metabayes/metasl/trainer.hpp"

namespace metabayes {

inline constexpr int kCheckpointFormatVersion = 1;

/// Trainer state plus the config echo it was produced under. Every double is
/// stored as a C99 hex-float string, so a save/load cycle is bitwise exact.
/// A FNV-1a 64 checksum over the compact JSON dump (without the checksum
/// field itself) is verified on load.
struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  std::map<std::string, std::string> config;
  std::variant<SupervisedState, BanditState> state;

  bool supervised() const { return std::holds_alternative<SupervisedState>(state); }
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
/// Throws ParseError on malformed JSON and ValidationError on a checksum,
/// version or shape mismatch.
Checkpoint parse_checkpoint(const std::string& text);

/// Writes through a temporary file and a rename.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// %a formatting and its inverse.
std::string hex_double(double v);
double parse_hex_double(const std::string& text);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace metabayes
