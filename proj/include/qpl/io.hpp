#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qpl/generative.hpp"
#include "qpl/vqe.hpp"

namespace qpl {

inline constexpr const char* kCodeVersion = "0.1.0";
inline constexpr int kDatasetFormatVersion = 1;
inline constexpr int kCheckpointFormatVersion = 1;

// Line-oriented dataset container: the first line is a metadata object, every
// following line one record. Floats are serialized as shortest round-trip
// decimals; write -> read -> write is byte-identical.
void write_dataset(const std::filesystem::path& path, const SweepDataset& ds);
SweepDataset read_dataset(const std::filesystem::path& path);

// Binary checkpoint: magic, version, JSON header (tensor catalog with byte
// offsets, config echo, layout_id, standardization stats), then raw
// little-endian float64 payloads. Round-trips bit-exactly.
void write_vae_checkpoint(const std::filesystem::path& path, const VaeModel& model,
                          const std::string& config_hash);
VaeModel read_vae_checkpoint(const std::filesystem::path& path);

void write_diffusion_checkpoint(const std::filesystem::path& path, const DiffusionModel& model,
                                const std::string& layout_id, const std::string& config_hash);
struct DiffusionCheckpoint {
  DiffusionModel model;
  std::string layout_id;
};
DiffusionCheckpoint read_diffusion_checkpoint(const std::filesystem::path& path);

// Shortest-round-trip decimal formatting ('.' decimal, locale-free).
std::string format_double(double v);

// CSV writer: first line is a comment carrying (format version, layout_id,
// config hash), then the header row, then data rows.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header,
            const std::string& layout_id, const std::string& config_hash);
  ~CsvWriter();

  void row(const std::vector<std::string>& cells);
  void row_values(const std::vector<double>& values);
  static std::string cell(double v) { return format_double(v); }

 private:
  std::string buffer_;
  std::filesystem::path path_;
  std::size_t columns_;
};

// FNV-1a over a string, hex-encoded; used for config hashes.
std::string hash_string(const std::string& s);

}  // namespace qpl
