#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctsim/consensus.hpp"
#include "ctsim/ledger.hpp"

namespace ctsim::ledger {

/// On-disk layout: the line "CTSIM1\n", a u32-length-prefixed parameter
/// record, then one u32-length-prefixed serialized block per height.
inline constexpr std::string_view kLedgerMagic = "CTSIM1\n";

struct LedgerFile {
  consensus::ConsensusParams params;
  std::vector<Block> blocks;
};

/// Structural failure while reading a ledger. height is the index of the
/// record that failed to parse (0 for the header and parameters).
class LedgerFormatError : public std::runtime_error {
 public:
  LedgerFormatError(std::uint64_t height, const std::string& what)
      : std::runtime_error(what), height_(height) {}
  std::uint64_t height() const { return height_; }

 private:
  std::uint64_t height_;
};

Bytes encode_ledger(const consensus::ConsensusParams& params, std::span<const Block> blocks);
LedgerFile decode_ledger(std::span<const std::uint8_t> bytes);

void write_ledger_file(const std::filesystem::path& path, const consensus::ConsensusParams& params,
                       std::span<const Block> blocks);
/// Throws std::runtime_error when the file cannot be read, LedgerFormatError
/// when it does not parse.
LedgerFile read_ledger_file(const std::filesystem::path& path);

Bytes read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace ctsim::ledger
