#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ilt/cot.hpp"
#include "ilt/ctc_align.hpp"

namespace ilt {

inline constexpr std::string_view kToolName = "ilt";
inline constexpr std::string_view kToolVersion = "0.1.0";

/// Provenance stamped into every artifact the pipeline writes.
struct ArtifactHeader {
  std::string kind;         // e.g. "dataset", "bpe", "checkpoint"
  std::string config_hash;  // hex digest of the producing command's settings
  std::uint64_t seed = 0;
};

/// `{"header":{"tool":..,"version":..,"kind":..,"config_hash":..,"seed":..}}`
std::string header_json(const ArtifactHeader& header);
/// Hex FNV-1a of a canonical settings string.
std::string config_hash(std::string_view canonical_settings);

/// One parallel utterance pair with units and word alignments on both sides.
struct PairRecord {
  long id = 0;
  std::string src_text;
  std::string tgt_text;
  std::vector<int> src_units;
  std::vector<int> tgt_units;
  WordAlignment src_align;
  WordAlignment tgt_align;

  bool operator==(const PairRecord&) const = default;
};

std::string to_json_line(const PairRecord& record);
PairRecord pair_from_json_line(std::string_view line);

/// JSON-Lines file: header line first, then one record per line.
void write_pairs(const std::filesystem::path& path, const ArtifactHeader& header, const std::vector<PairRecord>& records);
std::vector<PairRecord> read_pairs(const std::filesystem::path& path);

/// Assembled training example as stored by `make-dataset`.
struct ExampleRecord {
  long id = 0;
  TrainingExample example;
  double f_src = 0.0;
  double f_tgt = 0.0;
};

std::string to_json_line(const ExampleRecord& record);
ExampleRecord example_from_json_line(std::string_view line);
void write_examples(const std::filesystem::path& path, const ArtifactHeader& header,
                    const std::vector<ExampleRecord>& records);
std::vector<ExampleRecord> read_examples(const std::filesystem::path& path);

/// Reads all non-header lines of a JSON-Lines artifact.
std::vector<std::string> read_record_lines(const std::filesystem::path& path);

}  // namespace ilt
