#include "ilt/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "ilt/rng.hpp"
#include "json.hpp"

namespace ilt {

using nlohmann::json;
using nlohmann::ordered_json;

std::string header_json(const ArtifactHeader& header) {
  ordered_json h;
  h["tool"] = kToolName;
  h["version"] = kToolVersion;
  h["kind"] = header.kind;
  h["config_hash"] = header.config_hash;
  h["seed"] = header.seed;
  ordered_json j;
  j["header"] = h;
  return j.dump();
}

std::string config_hash(std::string_view canonical_settings) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(canonical_settings.data(), canonical_settings.size())));
  return buf;
}

namespace {

ordered_json align_to_json(const WordAlignment& align) {
  auto arr = ordered_json::array();
  for (const auto& s : align) arr.push_back(ordered_json::array({s.start, s.end, s.word}));
  return arr;
}

WordAlignment align_from_json(const json& arr) {
  WordAlignment out;
  for (const auto& s : arr) out.push_back(WordSpan{s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<std::string>()});
  return out;
}

ordered_json range_to_json(const Range& r) { return ordered_json::array({r.begin, r.end}); }
Range range_from_json(const json& j) { return Range{j.at(0).get<int>(), j.at(1).get<int>()}; }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

}  // namespace

std::string to_json_line(const PairRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["src_text"] = r.src_text;
  j["tgt_text"] = r.tgt_text;
  j["src_units"] = r.src_units;
  j["tgt_units"] = r.tgt_units;
  j["src_align"] = align_to_json(r.src_align);
  j["tgt_align"] = align_to_json(r.tgt_align);
  return j.dump();
}

PairRecord pair_from_json_line(std::string_view line) {
  const auto j = json::parse(line);
  PairRecord r;
  r.id = j.at("id").get<long>();
  r.src_text = j.at("src_text").get<std::string>();
  r.tgt_text = j.at("tgt_text").get<std::string>();
  r.src_units = j.at("src_units").get<std::vector<int>>();
  r.tgt_units = j.at("tgt_units").get<std::vector<int>>();
  r.src_align = align_from_json(j.at("src_align"));
  r.tgt_align = align_from_json(j.at("tgt_align"));
  return r;
}

std::vector<std::string> read_record_lines(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (first && line.rfind("{\"header\"", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_pairs(const std::filesystem::path& path, const ArtifactHeader& header, const std::vector<PairRecord>& records) {
  auto f = open_out(path);
  f << header_json(header) << '\n';
  for (const auto& r : records) f << to_json_line(r) << '\n';
}

std::vector<PairRecord> read_pairs(const std::filesystem::path& path) {
  std::vector<PairRecord> out;
  for (const auto& line : read_record_lines(path)) out.push_back(pair_from_json_line(line));
  return out;
}

std::string to_json_line(const ExampleRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["tokens"] = r.example.tokens;
  j["mask"] = r.example.loss_mask;
  ordered_json seg;
  seg["i_src"] = range_to_json(r.example.segments.i_src);
  seg["t_src"] = range_to_json(r.example.segments.t_src);
  seg["t_tgt"] = range_to_json(r.example.segments.t_tgt);
  seg["i_tgt"] = range_to_json(r.example.segments.i_tgt);
  j["segments"] = seg;
  j["f_src"] = r.f_src;
  j["f_tgt"] = r.f_tgt;
  return j.dump();
}

ExampleRecord example_from_json_line(std::string_view line) {
  const auto j = json::parse(line);
  ExampleRecord r;
  r.id = j.value("id", 0L);
  r.example.tokens = j.at("tokens").get<std::vector<TokenId>>();
  r.example.loss_mask = j.at("mask").get<std::vector<unsigned char>>();
  const auto& seg = j.at("segments");
  r.example.segments.i_src = range_from_json(seg.at("i_src"));
  r.example.segments.t_src = range_from_json(seg.at("t_src"));
  r.example.segments.t_tgt = range_from_json(seg.at("t_tgt"));
  r.example.segments.i_tgt = range_from_json(seg.at("i_tgt"));
  r.f_src = j.value("f_src", 0.0);
  r.f_tgt = j.value("f_tgt", 0.0);
  if (r.example.tokens.size() != r.example.loss_mask.size()) throw std::invalid_argument("example: tokens/mask length mismatch");
  return r;
}

void write_examples(const std::filesystem::path& path, const ArtifactHeader& header,
                    const std::vector<ExampleRecord>& records) {
  auto f = open_out(path);
  f << header_json(header) << '\n';
  for (const auto& r : records) f << to_json_line(r) << '\n';
}

std::vector<ExampleRecord> read_examples(const std::filesystem::path& path) {
  std::vector<ExampleRecord> out;
  for (const auto& line : read_record_lines(path)) out.push_back(example_from_json_line(line));
  return out;
}

}  // namespace ilt
