#include "ilt/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace ilt {

using nlohmann::json;
using nlohmann::ordered_json;

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "scheduled") return ScheduleKind::kScheduled;
  if (name == "constant") return ScheduleKind::kConstant;
  if (name == "none") return ScheduleKind::kNone;
  throw std::invalid_argument("unknown schedule '" + std::string(name) + "'");
}

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kScheduled: return "scheduled";
    case ScheduleKind::kConstant: return "constant";
    case ScheduleKind::kNone: return "none";
  }
  return "none";
}

Side parse_side(std::string_view name) {
  if (name == "both") return Side::kBoth;
  if (name == "input") return Side::kInput;
  if (name == "output") return Side::kOutput;
  throw std::invalid_argument("unknown side '" + std::string(name) + "'");
}

std::string_view to_string(Side side) {
  switch (side) {
    case Side::kBoth: return "both";
    case Side::kInput: return "input";
    case Side::kOutput: return "output";
  }
  return "both";
}

void TrainConfig::validate() const {
  if (!(adam.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be > 0");
  if (total_steps < 1) throw std::invalid_argument("train: total_steps must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(constant_p >= 0.0 && constant_p <= 1.0)) throw std::invalid_argument("train: constant p must be in [0, 1]");
  if (!(lambda >= 0.0)) throw std::invalid_argument("train: lambda must be >= 0");
  // Validates p0/delta/interval.
  (void)schedule_text_ratio(0, p0, delta, interval);
}

double TrainConfig::text_ratio(long step) const {
  switch (schedule) {
    case ScheduleKind::kScheduled: return schedule_text_ratio(step, p0, delta, interval);
    case ScheduleKind::kConstant: return constant_p;
    case ScheduleKind::kNone: return 0.0;
  }
  return 0.0;
}

std::string TrainConfig::to_canonical_string() const {
  std::ostringstream os;
  os.precision(17);
  os << "lr=" << adam.learning_rate << ";b1=" << adam.beta1 << ";b2=" << adam.beta2 << ";eps=" << adam.eps
     << ";clip=" << adam.grad_clip_norm << ";batch=" << batch_size << ";steps=" << total_steps
     << ";schedule=" << to_string(schedule) << ";p0=" << p0 << ";delta=" << delta << ";interval=" << interval
     << ";constant_p=" << constant_p << ";lambda=" << lambda << ";mode=" << to_string(mode)
     << ";side=" << to_string(side) << ";format=" << to_string(format) << ";seed=" << seed;
  return os.str();
}

std::uint64_t interleave_seed(std::uint64_t seed, long example_id, long step, int side) {
  return derive_seed(seed, static_cast<std::uint64_t>(example_id), static_cast<std::uint64_t>(step),
                     static_cast<std::uint64_t>(side));
}

namespace {

std::vector<TokenId> text_ids(const std::string& text, const BpeModel& bpe, const JointVocab& vocab) {
  std::vector<TokenId> out;
  for (TokenId id : bpe.encode(text)) out.push_back(vocab.text_id(id));
  return out;
}

std::vector<TokenId> unit_ids(const std::vector<int>& units, const JointVocab& vocab) {
  std::vector<TokenId> out;
  out.reserve(units.size());
  for (int u : units) out.push_back(vocab.unit_id(u));
  return out;
}

}  // namespace

AssembledExample assemble_example(const PairRecord& pair, double p, const TrainConfig& cfg, const BpeModel& bpe,
                                  const JointVocab& vocab, long step) {
  AssembledExample out;
  auto side_tokens = [&](const std::vector<int>& units, const WordAlignment& align, bool active, int side,
                         double& fraction) {
    if (!active || p <= 0.0) {
      fraction = 0.0;
      return unit_ids(units, vocab);
    }
    Rng rng(interleave_seed(cfg.seed, pair.id, step, side));
    InterleaveConfig icfg{p, cfg.lambda, cfg.mode};
    auto seq = interleave(UnitSequence{units}, align, icfg, vocab, bpe, rng);
    fraction = realized_text_fraction(seq);
    return std::move(seq.tokens);
  };
  const auto i_src = side_tokens(pair.src_units, pair.src_align, cfg.side != Side::kOutput, 1, out.f_src);
  const auto i_tgt = side_tokens(pair.tgt_units, pair.tgt_align, cfg.side != Side::kInput, 2, out.f_tgt);
  const auto t_src = text_ids(pair.src_text, bpe, vocab);
  const auto t_tgt = text_ids(pair.tgt_text, bpe, vocab);
  out.example = build_training_example(i_src, t_src, t_tgt, i_tgt, cfg.format, vocab);
  return out;
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

TrainResult run_training(const std::vector<PairRecord>& dataset, Checkpoint ckpt, const JointVocab& vocab,
                         const BpeModel& bpe, const TrainHooks& hooks) {
  const TrainConfig& cfg = ckpt.train_config;
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (ckpt.model.config.vocab_size != vocab.size()) throw std::invalid_argument("train: model vocab size != joint vocab size");

  TrainResult result;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const auto max_len = static_cast<std::size_t>(ckpt.model.config.max_seq_len);
  const std::size_t n_params = ckpt.model.params.size();
  std::vector<std::vector<double>> grads(batch);
  std::vector<double> losses(batch), f_src(batch), f_tgt(batch), lens(batch);
  std::vector<char> used(batch);
  std::vector<double> total(n_params);

  for (long step = ckpt.step; step < cfg.total_steps; ++step) {
    const double p = cfg.text_ratio(step);
    Rng pick(derive_seed(cfg.seed, static_cast<std::uint64_t>(step), 0xBA7C));
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = pick.below(dataset.size());

    parallel_for(batch, cfg.threads, [&](std::size_t b) {
      const auto& pair = dataset[idx[b]];
      auto assembled = assemble_example(pair, p, cfg, bpe, vocab, step);
      f_src[b] = assembled.f_src;
      f_tgt[b] = assembled.f_tgt;
      lens[b] = static_cast<double>(assembled.example.tokens.size());
      if (assembled.example.tokens.size() > max_len) {
        used[b] = 0;
        return;
      }
      used[b] = 1;
      Rng dropout(derive_seed(cfg.seed, static_cast<std::uint64_t>(pair.id), static_cast<std::uint64_t>(step), 3));
      auto lg = loss_and_grads(ckpt.model, assembled.example.tokens, assembled.example.loss_mask, true, &dropout);
      losses[b] = lg.loss;
      grads[b] = std::move(lg.grads);
    });

    MetricsRow row;
    row.step = step;
    row.p = p;
    std::size_t n_used = 0;
    std::fill(total.begin(), total.end(), 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      row.f_src += f_src[b];
      row.f_tgt += f_tgt[b];
      row.len_mean += lens[b];
      if (!used[b]) {
        ++row.skipped;
        continue;
      }
      ++n_used;
      row.loss += losses[b];
      const auto& g = grads[b];
      for (std::size_t i = 0; i < n_params; ++i) total[i] += g[i];
    }
    row.f_src /= static_cast<double>(batch);
    row.f_tgt /= static_cast<double>(batch);
    row.len_mean /= static_cast<double>(batch);
    if (n_used > 0) {
      row.loss /= static_cast<double>(n_used);
      const double inv = 1.0 / static_cast<double>(n_used);
      for (double& g : total) g *= inv;
      adam_step(ckpt.model.params, total, ckpt.optimizer, cfg.adam);
    } else {
      row.loss = std::nan("");
    }
    ckpt.step = step + 1;
    result.metrics.push_back(row);
    if (hooks.on_step) hooks.on_step(row);
    if (hooks.checkpoint_every > 0 && hooks.on_checkpoint && ckpt.step % hooks.checkpoint_every == 0) {
      hooks.on_checkpoint(ckpt);
    }
  }
  result.checkpoint = std::move(ckpt);
  return result;
}

}  // namespace

TrainResult train(const std::vector<PairRecord>& dataset, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const JointVocab& vocab, const BpeModel& bpe, const TrainHooks& hooks) {
  train_cfg.validate();
  Checkpoint ckpt{init_model(model_cfg), AdamState{}, train_cfg, 0};
  ckpt.optimizer = AdamState(ckpt.model.params.size());
  return run_training(dataset, std::move(ckpt), vocab, bpe, hooks);
}

TrainResult resume(const std::vector<PairRecord>& dataset, Checkpoint ckpt, const JointVocab& vocab,
                   const BpeModel& bpe, const TrainHooks& hooks) {
  return run_training(dataset, std::move(ckpt), vocab, bpe, hooks);
}

namespace {

constexpr char kMagic[8] = {'I', 'L', 'T', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

ordered_json model_config_json(const ModelConfig& c) {
  ordered_json j;
  j["n_layers"] = c.n_layers;
  j["d_model"] = c.d_model;
  j["n_heads"] = c.n_heads;
  j["d_ff"] = c.d_ff;
  j["max_seq_len"] = c.max_seq_len;
  j["vocab_size"] = c.vocab_size;
  j["dropout"] = c.dropout;
  j["seed"] = c.seed;
  j["init_std"] = c.init_std;
  j["zero_init"] = c.zero_init;
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.n_layers = j.at("n_layers").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.init_std = j.at("init_std").get<double>();
  c.zero_init = j.at("zero_init").get<bool>();
  return c;
}

ordered_json train_config_json(const TrainConfig& c) {
  ordered_json j;
  j["learning_rate"] = c.adam.learning_rate;
  j["beta1"] = c.adam.beta1;
  j["beta2"] = c.adam.beta2;
  j["eps"] = c.adam.eps;
  j["grad_clip_norm"] = c.adam.grad_clip_norm;
  j["batch_size"] = c.batch_size;
  j["total_steps"] = c.total_steps;
  j["schedule"] = to_string(c.schedule);
  j["p0"] = c.p0;
  j["delta"] = c.delta;
  j["interval"] = c.interval;
  j["constant_p"] = c.constant_p;
  j["lambda"] = c.lambda;
  j["mode"] = to_string(c.mode);
  j["side"] = to_string(c.side);
  j["format"] = to_string(c.format);
  j["seed"] = c.seed;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.adam.learning_rate = j.at("learning_rate").get<double>();
  c.adam.beta1 = j.at("beta1").get<double>();
  c.adam.beta2 = j.at("beta2").get<double>();
  c.adam.eps = j.at("eps").get<double>();
  c.adam.grad_clip_norm = j.at("grad_clip_norm").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.total_steps = j.at("total_steps").get<long>();
  c.schedule = parse_schedule_kind(j.at("schedule").get<std::string>());
  c.p0 = j.at("p0").get<double>();
  c.delta = j.at("delta").get<double>();
  c.interval = j.at("interval").get<long>();
  c.constant_p = j.at("constant_p").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.mode = parse_interleave_mode(j.at("mode").get<std::string>());
  c.side = parse_side(j.at("side").get<std::string>());
  c.format = parse_cot_mode(j.at("format").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

void write_doubles(std::ofstream& f, const std::vector<double>& v) {
  f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::ifstream& f, std::vector<double>& v) {
  f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!f) throw std::runtime_error("checkpoint: truncated tensor data");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, const ArtifactHeader& header) {
  ordered_json h = json::parse(header_json(header));
  h["format_version"] = kCheckpointVersion;
  h["model"] = model_config_json(ckpt.model.config);
  h["train"] = train_config_json(ckpt.train_config);
  h["step"] = ckpt.step;
  h["adam_step"] = ckpt.optimizer.step;
  auto tensors = ordered_json::array();
  for (const auto& t : ckpt.model.layout.tensors) tensors.push_back({{"name", t.name}, {"offset", t.offset}, {"shape", {t.rows, t.cols}}});
  h["tensors"] = tensors;
  h["blocks"] = {"params", "adam_m", "adam_v"};
  const std::string text = h.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(kMagic, sizeof kMagic);
  const std::uint32_t version = kCheckpointVersion;
  f.write(reinterpret_cast<const char*>(&version), sizeof version);
  const std::uint64_t len = text.size();
  f.write(reinterpret_cast<const char*>(&len), sizeof len);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  const std::size_t n = ckpt.model.params.size();
  write_doubles(f, ckpt.model.params);
  write_doubles(f, ckpt.optimizer.m.size() == n ? ckpt.optimizer.m : std::vector<double>(n, 0.0));
  write_doubles(f, ckpt.optimizer.v.size() == n ? ckpt.optimizer.v : std::vector<double>(n, 0.0));
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  char magic[8];
  f.read(magic, sizeof magic);
  if (!f || std::memcmp(magic, kMagic, sizeof magic) != 0) throw std::runtime_error("checkpoint: bad magic in " + path.string());
  std::uint32_t version = 0;
  f.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != kCheckpointVersion) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  std::uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string text(len, '\0');
  f.read(text.data(), static_cast<std::streamsize>(len));
  if (!f) throw std::runtime_error("checkpoint: truncated header");
  const auto h = json::parse(text);

  Checkpoint ckpt{Model(model_config_from_json(h.at("model"))), AdamState{}, train_config_from_json(h.at("train")),
                  h.at("step").get<long>()};
  const std::size_t n = ckpt.model.params.size();
  ckpt.optimizer = AdamState(n);
  ckpt.optimizer.step = h.at("adam_step").get<long>();
  read_doubles(f, ckpt.model.params);
  read_doubles(f, ckpt.optimizer.m);
  read_doubles(f, ckpt.optimizer.v);
  return ckpt;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows,
                       const ArtifactHeader& header) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "# " << header_json(header) << '\n';
  f << "step,p,loss,f_src,f_tgt,len_mean\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.p, r.loss, r.f_src, r.f_tgt,
                  r.len_mean);
    f << buf;
  }
}

}  // namespace ilt
