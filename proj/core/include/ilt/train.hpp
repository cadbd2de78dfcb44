#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "ilt/bpe.hpp"
#include "ilt/cot.hpp"
#include "ilt/dataset.hpp"
#include "ilt/interleave.hpp"
#include "ilt/model.hpp"
#include "ilt/vocab.hpp"

namespace ilt {

enum class ScheduleKind {
  kScheduled,  // stepwise decaying text ratio
  kConstant,   // fixed text ratio
  kNone,       // no interleaving (p = 0 throughout)
};

ScheduleKind parse_schedule_kind(std::string_view name);
std::string_view to_string(ScheduleKind kind);

enum class Side { kBoth, kInput, kOutput };

Side parse_side(std::string_view name);
std::string_view to_string(Side side);

struct TrainConfig {
  AdamConfig adam;
  int batch_size = 8;
  long total_steps = 3000;
  ScheduleKind schedule = ScheduleKind::kScheduled;
  double p0 = 0.9;
  double delta = 0.1;
  long interval = 300;
  double constant_p = kConstantTextRatio;
  double lambda = 1.0;
  InterleaveMode mode = InterleaveMode::kText;
  Side side = Side::kBoth;
  CotMode format = CotMode::kCot;
  std::uint64_t seed = 0;
  /// Worker threads for per-example gradients; 0 picks hardware concurrency.
  int threads = 0;

  void validate() const;
  [[nodiscard]] double text_ratio(long step) const;
  [[nodiscard]] std::string to_canonical_string() const;
};

/// Per-(example, step, side) interleaving stream.
std::uint64_t interleave_seed(std::uint64_t seed, long example_id, long step, int side);

/// Builds the (possibly interleaved) training example for one pair.
struct AssembledExample {
  TrainingExample example;
  double f_src = 0.0;
  double f_tgt = 0.0;
};

AssembledExample assemble_example(const PairRecord& pair, double p, const TrainConfig& cfg, const BpeModel& bpe,
                                  const JointVocab& vocab, long step);

struct MetricsRow {
  long step = 0;
  double p = 0.0;
  double loss = 0.0;
  double f_src = 0.0;
  double f_tgt = 0.0;
  double len_mean = 0.0;
  int skipped = 0;
};

struct Checkpoint {
  Model model;
  AdamState optimizer;
  TrainConfig train_config;
  /// Steps completed. Data order, interleaving and dropout draws are
  /// functions of (seed, step), so this is the whole RNG state.
  long step = 0;
};

struct TrainHooks {
  /// Called after completing step `s` when s % every == 0 (every > 0).
  long checkpoint_every = 0;
  std::function<void(const Checkpoint&)> on_checkpoint;
  std::function<void(const MetricsRow&)> on_step;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<MetricsRow> metrics;
};

/// Runs train_cfg.total_steps - start.step Adam steps. Each step draws a
/// batch, re-interleaves both sides at the scheduled p with fresh per-example
/// streams, assembles chain-of-thought examples and applies the averaged
/// gradient. Examples longer than max_seq_len are skipped and counted.
TrainResult train(const std::vector<PairRecord>& dataset, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const JointVocab& vocab, const BpeModel& bpe, const TrainHooks& hooks = {});

/// Continues from a checkpoint up to ckpt.train_config.total_steps.
TrainResult resume(const std::vector<PairRecord>& dataset, Checkpoint ckpt, const JointVocab& vocab,
                   const BpeModel& bpe, const TrainHooks& hooks = {});

/// Versioned binary container: magic, JSON header, raw little-endian
/// doubles for parameters and both Adam moments.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, const ArtifactHeader& header);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// CSV with header `step,p,loss,f_src,f_tgt,len_mean`, preceded by a
/// `# {header json}` provenance line.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows,
                       const ArtifactHeader& header);

}  // namespace ilt
