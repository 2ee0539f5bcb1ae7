#include "ctsim/ledger_file.hpp"

#include <fstream>
#include <iterator>

namespace ctsim::ledger {

Bytes encode_ledger(const consensus::ConsensusParams& params, std::span<const Block> blocks) {
  ByteWriter out;
  out.raw(as_bytes(kLedgerMagic));
  out.var(params.encode());
  for (const Block& block : blocks) {
    out.var(serialize_block(block));
  }
  return out.take();
}

LedgerFile decode_ledger(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  LedgerFile file;
  try {
    auto magic = in.raw(kLedgerMagic.size());
    if (!std::equal(magic.begin(), magic.end(), kLedgerMagic.begin())) {
      throw DecodeError("bad magic line");
    }
    file.params = consensus::ConsensusParams::decode(in.var(1u << 20));
  } catch (const DecodeError& e) {
    throw LedgerFormatError(0, std::string("ledger header: ") + e.what());
  }
  std::uint64_t index = 0;
  while (!in.done()) {
    try {
      const Bytes record = in.var();
      Block block = deserialize_block(record);
      if (serialize_block(block) != record) throw DecodeError("non-canonical block encoding");
      file.blocks.push_back(std::move(block));
    } catch (const DecodeError& e) {
      throw LedgerFormatError(index, "block record " + std::to_string(index) + ": " + e.what());
    }
    ++index;
  }
  if (file.blocks.empty()) throw LedgerFormatError(0, "ledger holds no genesis block");
  return file;
}

Bytes read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

void write_ledger_file(const std::filesystem::path& path, const consensus::ConsensusParams& params,
                       std::span<const Block> blocks) {
  write_file_bytes(path, encode_ledger(params, blocks));
}

LedgerFile read_ledger_file(const std::filesystem::path& path) {
  return decode_ledger(read_file_bytes(path));
}

}  // namespace ctsim::ledger
