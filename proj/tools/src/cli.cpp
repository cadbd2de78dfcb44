#include "ilt/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "ilt/bpe.hpp"
#include "ilt/cot.hpp"
#include "ilt/ctc_align.hpp"
#include "ilt/dataset.hpp"
#include "ilt/eval.hpp"
#include "ilt/interleave.hpp"
#include "ilt/model.hpp"
#include "ilt/quantizer.hpp"
#include "ilt/synth.hpp"
#include "ilt/train.hpp"
#include "ilt/vocab.hpp"

namespace ilt {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Content digest of input artifacts, so hashes track what was consumed
/// rather than where it lives.
std::string inputs_digest(std::initializer_list<fs::path> paths) {
  std::string out;
  for (const auto& p : paths) {
    const auto bytes = read_file(p);
    out += hex(fnv1a(bytes.data(), bytes.size())) + ",";
  }
  return out;
}

/// Prepends a "header" field to a JSON object document.
std::string with_header(const std::string& json_text, const ArtifactHeader& header) {
  const auto body = ordered_json::parse(json_text);
  ordered_json out = ordered_json::parse(header_json(header));
  for (auto it = body.begin(); it != body.end(); ++it) out[it.key()] = it.value();
  return out.dump(1) + "\n";
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Feature synthesis settings shared by fit-kmeans and align; stored in the
// codebook file so both commands see identical features.
struct FeatureSpec {
  int n_units = 64;
  int dim = 16;
  double noise = 0.5;
  std::uint64_t seed = 0;
};

Matrix pair_features(const std::vector<int>& units, const Matrix& prototypes, const FeatureSpec& spec, long id,
                     int side) {
  for (int u : units) {
    if (u < 0 || u >= spec.n_units) throw std::invalid_argument("unit id " + std::to_string(u) + " outside feature table");
  }
  Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(side), 0xFEA7));
  return synthesize_features(units, prototypes, spec.noise, rng);
}

struct GenOpts {
  long n = 0;
  std::uint64_t seed = 0;
  std::string out;
  CorpusParams params;
};

int cmd_gen(const GenOpts& o, std::ostream& out) {
  const auto splits = gen_corpus(o.n, o.seed, o.params);
  const ArtifactHeader header{"dataset", config_hash("gen;n=" + std::to_string(o.n) + ";" + to_canonical_string(o.params)),
                              o.seed};
  write_corpus(o.out, splits, header);
  out << "wrote " << splits.train.size() << "/" << splits.dev.size() << "/" << splits.test.size()
      << " train/dev/test pairs to " << o.out << "\n";
  return 0;
}

struct BpeOpts {
  std::string data;
  int size = 512;
  std::string out;
};

int cmd_train_bpe(const BpeOpts& o, std::ostream& out) {
  std::vector<std::string> texts;
  for (const auto& p : read_pairs(o.data)) {
    texts.push_back(p.src_text);
    texts.push_back(p.tgt_text);
  }
  const auto bpe = train_bpe(texts, o.size);
  const ArtifactHeader header{"bpe", config_hash("train-bpe;size=" + std::to_string(o.size) + ";in=" + inputs_digest({o.data})),
                              0};
  write_file(o.out, with_header(bpe.to_json(), header));
  out << "bpe vocabulary " << bpe.vocab_size() << " tokens -> " << o.out << "\n";
  return 0;
}

struct KMeansCmdOpts {
  std::string data;
  std::string out;
  int k = 64;
  int max_iters = 100;
  FeatureSpec features;
};

int cmd_fit_kmeans(const KMeansCmdOpts& o, std::ostream& out) {
  const auto pairs = read_pairs(o.data);
  const auto protos = make_unit_prototypes(o.features.n_units, o.features.dim, o.features.seed);
  std::size_t frames = 0;
  for (const auto& p : pairs) frames += p.src_units.size() + p.tgt_units.size();
  Matrix feats(frames, static_cast<std::size_t>(o.features.dim));
  std::size_t row = 0;
  for (const auto& p : pairs) {
    for (int side : {1, 2}) {
      const auto f = pair_features(side == 1 ? p.src_units : p.tgt_units, protos, o.features, p.id, side);
      std::copy(f.data.begin(), f.data.end(), feats.data.begin() + static_cast<long>(row * feats.cols));
      row += f.rows;
    }
  }
  const auto cb = kmeans_fit(feats, {o.k, o.max_iters, o.features.seed});
  const std::string settings = "fit-kmeans;k=" + std::to_string(o.k) + ";iters=" + std::to_string(o.max_iters) +
                               ";n_units=" + std::to_string(o.features.n_units) + ";dim=" +
                               std::to_string(o.features.dim) + ";noise=" + fmt(o.features.noise) +
                               ";in=" + inputs_digest({o.data});
  auto doc = ordered_json::parse(with_header(cb.to_json(), {"codebook", config_hash(settings), o.features.seed}));
  doc["features"] = {{"n_units", o.features.n_units},
                     {"dim", o.features.dim},
                     {"noise", o.features.noise},
                     {"seed", o.features.seed}};
  write_file(o.out, doc.dump(1) + "\n");
  out << "k-means k=" << cb.k << " on " << frames << " frames, " << cb.inertia_trace.size()
      << " iterations, inertia " << cb.inertia << " -> " << o.out << "\n";
  return 0;
}

struct AlignOpts {
  std::string data;
  std::string bpe;
  std::string codebook;
  std::string out;
  std::string vocab_out;
  double sharpness = 0.9;
};

int cmd_align(const AlignOpts& o, std::ostream& out) {
  const auto bpe = BpeModel::load(o.bpe);
  const auto cb_text = read_file(o.codebook);
  const auto cb = Codebook::from_json(cb_text);
  const auto fj = nlohmann::json::parse(cb_text).at("features");
  const FeatureSpec spec{fj.at("n_units").get<int>(), fj.at("dim").get<int>(), fj.at("noise").get<double>(),
                         fj.at("seed").get<std::uint64_t>()};
  const auto protos = make_unit_prototypes(spec.n_units, spec.dim, spec.seed);
  const int n_labels = bpe.vocab_size() + 1;  // label = bpe id + 1, blank = 0

  std::vector<PairRecord> aligned;
  double boundary_error = 0.0;
  long boundaries = 0;
  for (const auto& p : read_pairs(o.data)) {
    PairRecord r = p;
    for (int side : {1, 2}) {
      const auto& units = side == 1 ? p.src_units : p.tgt_units;
      const auto& gold = side == 1 ? p.src_align : p.tgt_align;
      const auto q = quantize(cb, pair_features(units, protos, spec, p.id, side));

      std::vector<std::vector<int>> labels;
      std::vector<int> reference, counts;
      std::vector<std::string> words;
      for (const auto& w : gold) {
        std::vector<int> l;
        for (TokenId id : bpe.encode(w.word)) l.push_back(id + 1);
        reference.insert(reference.end(), l.begin(), l.end());
        counts.push_back(static_cast<int>(l.size()));
        words.push_back(w.word);
        labels.push_back(std::move(l));
      }
      const auto post = make_posteriors(units.size(), gold, labels, n_labels, o.sharpness);
      CtcAlignment ctc;
      try {
        ctc = ctc_forced_align(post, reference, 0);
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("pair " + std::to_string(p.id) + (side == 1 ? " source: " : " target: ") + e.what());
      }
      auto spans = tokens_to_word_spans(ctc.spans, counts, words);
      for (std::size_t i = 0; i < spans.size(); ++i) {
        boundary_error += std::abs(spans[i].start - gold[i].start) + std::abs(spans[i].end - gold[i].end);
        boundaries += 2;
      }
      (side == 1 ? r.src_units : r.tgt_units) = q.units;
      (side == 1 ? r.src_align : r.tgt_align) = std::move(spans);
    }
    aligned.push_back(std::move(r));
  }
  const std::string settings = "align;sharpness=" + fmt(o.sharpness) + ";in=" + inputs_digest({o.data, o.bpe, o.codebook});
  write_pairs(o.out, {"aligned-dataset", config_hash(settings), spec.seed}, aligned);
  if (!o.vocab_out.empty()) {
    const JointVocab vocab(bpe.vocab_size(), cb.k);
    write_file(o.vocab_out, with_header(vocab.to_json(), {"vocab", config_hash("vocab;" + settings), spec.seed}));
  }
  out << "aligned " << aligned.size() << " pairs, mean boundary error "
      << (boundaries ? boundary_error / static_cast<double>(boundaries) : 0.0) << " frames -> " << o.out << "\n";
  return 0;
}

void add_interleave_flags(CLI::App* cmd, TrainConfig& cfg, std::string& mode, std::string& side, std::string& format) {
  cmd->add_option("--lambda", cfg.lambda, "Poisson mean of extra span length")->check(CLI::NonNegativeNumber);
  cmd->add_option("--mode", mode, "text | mask | text_equal_interval")
      ->check(CLI::IsMember({"text", "mask", "text_equal_interval"}));
  cmd->add_option("--side", side, "both | input | output")->check(CLI::IsMember({"both", "input", "output"}));
  cmd->add_option("--format", format, "cot | direct")->check(CLI::IsMember({"cot", "direct"}));
}

struct DatasetOpts {
  std::string data, bpe, vocab, out;
  double p = 0.0;
  long step = 0;
  TrainConfig cfg;
  std::string mode = "text", side = "both", format = "cot";
};

int cmd_make_dataset(DatasetOpts o, std::ostream& out) {
  o.cfg.mode = parse_interleave_mode(o.mode);
  o.cfg.side = parse_side(o.side);
  o.cfg.format = parse_cot_mode(o.format);
  const auto bpe = BpeModel::load(o.bpe);
  const auto vocab = JointVocab::load(o.vocab);
  std::vector<ExampleRecord> records;
  double f_src = 0, f_tgt = 0;
  for (const auto& pair : read_pairs(o.data)) {
    auto a = assemble_example(pair, o.p, o.cfg, bpe, vocab, o.step);
    f_src += a.f_src;
    f_tgt += a.f_tgt;
    records.push_back({pair.id, std::move(a.example), a.f_src, a.f_tgt});
  }
  const std::string settings = "make-dataset;p=" + fmt(o.p) + ";step=" + std::to_string(o.step) + ";" +
                               o.cfg.to_canonical_string() + ";in=" + inputs_digest({o.data, o.bpe, o.vocab});
  write_examples(o.out, {"examples", config_hash(settings), o.cfg.seed}, records);
  const double n = records.empty() ? 1.0 : static_cast<double>(records.size());
  out << "assembled " << records.size() << " examples at p=" << o.p << " (f_src " << f_src / n << ", f_tgt "
      << f_tgt / n << ") -> " << o.out << "\n";
  return 0;
}

struct TrainOpts {
  std::string data, bpe, vocab, out_dir, resume;
  ModelConfig model;
  TrainConfig cfg;
  std::string schedule = "scheduled", mode = "text", side = "both", format = "cot";
  long checkpoint_every = 0;
  bool quiet = false;
};

std::string checkpoint_name(long step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%06ld.bin", step);
  return buf;
}

int cmd_train(TrainOpts o, const CLI::App& sub, std::ostream& out) {
  const auto bpe = BpeModel::load(o.bpe);
  const auto vocab = JointVocab::load(o.vocab);
  const auto data = read_pairs(o.data);
  const fs::path dir(o.out_dir);
  fs::create_directories(dir);

  Checkpoint start;
  if (!o.resume.empty()) {
    start = load_checkpoint(o.resume);
    if (sub.count("--steps") > 0) start.train_config.total_steps = o.cfg.total_steps;
    if (sub.count("--threads") > 0) start.train_config.threads = o.cfg.threads;
  } else {
    o.cfg.schedule = parse_schedule_kind(o.schedule);
    o.cfg.mode = parse_interleave_mode(o.mode);
    o.cfg.side = parse_side(o.side);
    o.cfg.format = parse_cot_mode(o.format);
    o.model.vocab_size = vocab.size();
    o.model.seed = o.cfg.seed;
    o.model.validate();
    o.cfg.validate();
    start.model = init_model(o.model);
    start.optimizer = AdamState(start.model.params.size());
    start.train_config = o.cfg;
  }
  const auto& mc = start.model.config;
  const std::string settings =
      "train;model=" + std::to_string(mc.n_layers) + "," + std::to_string(mc.d_model) + "," +
      std::to_string(mc.n_heads) + "," + std::to_string(mc.d_ff) + "," + std::to_string(mc.max_seq_len) + "," +
      fmt(mc.dropout) + ";" + start.train_config.to_canonical_string() + ";in=" + inputs_digest({o.data, o.bpe, o.vocab});
  const ArtifactHeader header{"checkpoint", config_hash(settings), start.train_config.seed};

  TrainHooks hooks;
  hooks.checkpoint_every = o.checkpoint_every;
  hooks.on_checkpoint = [&](const Checkpoint& c) { save_checkpoint(dir / checkpoint_name(c.step), c, header); };
  if (!o.quiet) {
    hooks.on_step = [&](const MetricsRow& m) {
      if (m.step % 100 == 0) out << "step " << m.step << " p=" << m.p << " loss=" << m.loss << "\n" << std::flush;
    };
  }
  const auto result = resume(data, std::move(start), vocab, bpe, hooks);
  save_checkpoint(dir / "final.ckpt", result.checkpoint, header);
  write_metrics_csv(dir / "metrics.csv", result.metrics, {"metrics", header.config_hash, header.seed});
  long skipped = 0;
  for (const auto& m : result.metrics) skipped += m.skipped;
  out << "trained to step " << result.checkpoint.step << ", final loss "
      << (result.metrics.empty() ? 0.0 : result.metrics.back().loss) << ", skipped " << skipped
      << " overlong examples -> " << (dir / "final.ckpt").string() << "\n";
  return 0;
}

struct EvalOpts {
  std::string checkpoint, data, bpe, vocab, out;
  int max_new_tokens = 0;
};

int cmd_eval(const EvalOpts& o, std::ostream& out) {
  const auto ckpt = load_checkpoint(o.checkpoint);
  const auto bpe = BpeModel::load(o.bpe);
  const auto vocab = JointVocab::load(o.vocab);
  const auto test = read_pairs(o.data);
  const auto report = evaluate_s2st(ckpt.model, test, bpe, vocab, ckpt.train_config.format, o.max_new_tokens);
  const std::string settings = "eval;max_new=" + std::to_string(o.max_new_tokens) +
                               ";in=" + inputs_digest({o.checkpoint, o.data, o.bpe, o.vocab});
  write_file(o.out, report.to_json(header_json({"report", config_hash(settings), ckpt.train_config.seed})) + "\n");
  out << "unit_bleu=" << report.unit_bleu << " t_src_exact=" << report.t_src_exact
      << " t_tgt_exact=" << report.t_tgt_exact << " malformed=" << report.malformed_rate << " n=" << report.n << "\n";
  return 0;
}

struct AnalyzeOpts {
  std::string data, bpe, vocab, out;
  std::vector<std::string> checkpoints;
  std::vector<double> p_values{0.0, 0.3, 0.6, 0.9};
  double lambda = 1.0;
  std::string mode = "text";
  std::uint64_t seed = 0;
  long max_pairs = 200;
};

int cmd_analyze(const AnalyzeOpts& o, std::ostream& out) {
  const auto bpe = BpeModel::load(o.bpe);
  const auto vocab = JointVocab::load(o.vocab);
  auto data = read_pairs(o.data);
  if (o.max_pairs > 0 && static_cast<long>(data.size()) > o.max_pairs) data.resize(static_cast<std::size_t>(o.max_pairs));

  EvalReport report;
  report.n = static_cast<int>(data.size());
  const InterleaveConfig base{0.0, o.lambda, parse_interleave_mode(o.mode)};
  report.length_table = length_ratio_stats(data, o.p_values, base, bpe, vocab, o.seed);

  // Similarity is measured on inference-style inputs: pure speech, gold text.
  TrainConfig plain;
  plain.seed = o.seed;
  std::vector<TrainingExample> examples;
  for (const auto& pair : data) examples.push_back(assemble_example(pair, 0.0, plain, bpe, vocab, 0).example);
  std::string inputs = inputs_digest({o.data, o.bpe, o.vocab});
  for (const auto& path : o.checkpoints) {
    const auto ckpt = load_checkpoint(path);
    std::vector<TrainingExample> fitting;
    for (const auto& ex : examples) {
      if (ex.tokens.size() <= static_cast<std::size_t>(ckpt.model.config.max_seq_len)) fitting.push_back(ex);
    }
    auto sim = segment_similarity(ckpt.model, fitting);
    sim.excluded += static_cast<int>(examples.size() - fitting.size());
    report.similarity_table.emplace_back(ckpt.step, sim);
    inputs += inputs_digest({path});
  }

  std::string settings = "analyze;lambda=" + fmt(o.lambda) + ";mode=" + o.mode + ";max_pairs=" +
                         std::to_string(o.max_pairs) + ";p=";
  for (double p : o.p_values) settings += fmt(p) + ",";
  settings += ";in=" + inputs;
  const ArtifactHeader header{"analysis", config_hash(settings), o.seed};
  write_file(o.out, report.to_json(header_json(header)) + "\n");

  const fs::path base_path(o.out);
  const std::string comment = "# " + header_json(header) + "\n";
  std::string lengths = comment + "p,src_ratio,tgt_ratio\n";
  for (const auto& r : report.length_table) lengths += fmt(r.p) + "," + fmt(r.src_ratio) + "," + fmt(r.tgt_ratio) + "\n";
  write_file(fs::path(base_path).replace_extension(".lengths.csv"), lengths);
  std::string sims = comment + "step,src_S_T,src_tgt_T,tgt_T_S,excluded\n";
  for (const auto& [step, s] : report.similarity_table) {
    sims += std::to_string(step) + "," + fmt(s.src_speech_text) + "," + fmt(s.src_tgt_text) + "," +
            fmt(s.tgt_text_speech) + "," + std::to_string(s.excluded) + "\n";
  }
  write_file(fs::path(base_path).replace_extension(".similarity.csv"), sims);

  for (const auto& r : report.length_table) {
    out << "p=" << r.p << " |I_p|/|T| src=" << r.src_ratio << " tgt=" << r.tgt_ratio << "\n";
  }
  for (const auto& [step, s] : report.similarity_table) {
    out << "step " << step << " src S-T=" << s.src_speech_text << " src-tgt T=" << s.src_tgt_text
        << " tgt T-S=" << s.tgt_text_speech << "\n";
  }
  return 0;
}

std::string error_line(const std::string& command, const std::string& message) {
  ordered_json j;
  j["error"] = {{"command", command}, {"message", message}};
  return j.dump();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scheduled interleaved speech-text training pipeline", std::string(kToolName)};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.set_config("--config", "", "TOML/INI file with flag values");
  app.require_subcommand(1);

  GenOpts gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic parallel corpus");
  g->add_option("--n", gen.n, "Number of pairs")->required()->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Corpus seed");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--dict-words", gen.params.dict_words);
  g->add_option("--min-len", gen.params.min_len);
  g->add_option("--max-len", gen.params.max_len);
  g->add_option("--r", gen.params.expansion_r, "Mean units per word");
  g->add_option("--jitter", gen.params.jitter);
  g->add_option("--n-units", gen.params.n_units);
  g->add_option("--pattern-len", gen.params.pattern_len);

  BpeOpts bpe;
  auto* b = app.add_subcommand("train-bpe", "Train a byte-level BPE on corpus text");
  b->add_option("--data", bpe.data, "Dataset JSON-Lines")->required()->check(CLI::ExistingFile);
  b->add_option("--size", bpe.size, "Target vocabulary size (>= 256)");
  b->add_option("--out", bpe.out)->required();

  KMeansCmdOpts km;
  auto* k = app.add_subcommand("fit-kmeans", "Fit the unit codebook on synthesized frame features");
  k->add_option("--data", km.data)->required()->check(CLI::ExistingFile);
  k->add_option("--out", km.out)->required();
  k->add_option("--k", km.k);
  k->add_option("--max-iters", km.max_iters);
  k->add_option("--n-units", km.features.n_units, "Generator unit inventory size");
  k->add_option("--dim", km.features.dim, "Feature dimension");
  k->add_option("--noise", km.features.noise, "Feature noise std");
  k->add_option("--seed", km.features.seed);

  AlignOpts al;
  auto* a = app.add_subcommand("align", "Quantize units and derive word spans by CTC forced alignment");
  a->add_option("--data", al.data)->required()->check(CLI::ExistingFile);
  a->add_option("--bpe", al.bpe)->required()->check(CLI::ExistingFile);
  a->add_option("--codebook", al.codebook)->required()->check(CLI::ExistingFile);
  a->add_option("--out", al.out)->required();
  a->add_option("--vocab-out", al.vocab_out, "Also write the joint vocabulary");
  a->add_option("--sharpness", al.sharpness)->check(CLI::Range(0.0, 1.0));

  DatasetOpts ds;
  auto* d = app.add_subcommand("make-dataset", "Assemble interleaved chain-of-thought examples at a fixed p");
  d->add_option("--data", ds.data)->required()->check(CLI::ExistingFile);
  d->add_option("--bpe", ds.bpe)->required()->check(CLI::ExistingFile);
  d->add_option("--vocab", ds.vocab)->required()->check(CLI::ExistingFile);
  d->add_option("--out", ds.out)->required();
  d->add_option("--p", ds.p, "Text ratio in [0, 1]")->check(CLI::Range(0.0, 1.0));
  d->add_option("--step", ds.step, "Step coordinate of the interleaving streams");
  d->add_option("--seed", ds.cfg.seed);
  add_interleave_flags(d, ds.cfg, ds.mode, ds.side, ds.format);

  TrainOpts tr;
  auto* t = app.add_subcommand("train", "Train the toy LM with a text-ratio schedule");
  t->add_option("--data", tr.data)->required()->check(CLI::ExistingFile);
  t->add_option("--bpe", tr.bpe)->required()->check(CLI::ExistingFile);
  t->add_option("--vocab", tr.vocab)->required()->check(CLI::ExistingFile);
  t->add_option("--out-dir", tr.out_dir)->required();
  t->add_option("--resume", tr.resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  t->add_option("--schedule", tr.schedule, "scheduled | constant | none")
      ->check(CLI::IsMember({"scheduled", "constant", "none"}));
  t->add_option("--p0", tr.cfg.p0)->check(CLI::Range(0.0, 1.0));
  t->add_option("--delta", tr.cfg.delta)->check(CLI::PositiveNumber);
  t->add_option("--interval", tr.cfg.interval)->check(CLI::PositiveNumber);
  t->add_option("--constant-p", tr.cfg.constant_p)->check(CLI::Range(0.0, 1.0));
  add_interleave_flags(t, tr.cfg, tr.mode, tr.side, tr.format);
  t->add_option("--steps", tr.cfg.total_steps);
  t->add_option("--batch", tr.cfg.batch_size);
  t->add_option("--lr", tr.cfg.adam.learning_rate);
  t->add_option("--clip", tr.cfg.adam.grad_clip_norm);
  t->add_option("--seed", tr.cfg.seed);
  t->add_option("--threads", tr.cfg.threads);
  t->add_option("--layers", tr.model.n_layers);
  t->add_option("--d-model", tr.model.d_model);
  t->add_option("--heads", tr.model.n_heads);
  t->add_option("--d-ff", tr.model.d_ff);
  t->add_option("--max-seq-len", tr.model.max_seq_len);
  t->add_option("--dropout", tr.model.dropout);
  t->add_option("--checkpoint-every", tr.checkpoint_every);
  t->add_flag("--quiet", tr.quiet);

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "Greedy-decode the test set and score it");
  e->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
  e->add_option("--data", ev.data)->required()->check(CLI::ExistingFile);
  e->add_option("--bpe", ev.bpe)->required()->check(CLI::ExistingFile);
  e->add_option("--vocab", ev.vocab)->required()->check(CLI::ExistingFile);
  e->add_option("--out", ev.out)->required();
  e->add_option("--max-new-tokens", ev.max_new_tokens, "0 = up to max_seq_len");

  AnalyzeOpts an;
  auto* z = app.add_subcommand("analyze", "Length-ratio and segment-similarity tables");
  z->add_option("--data", an.data)->required()->check(CLI::ExistingFile);
  z->add_option("--bpe", an.bpe)->required()->check(CLI::ExistingFile);
  z->add_option("--vocab", an.vocab)->required()->check(CLI::ExistingFile);
  z->add_option("--out", an.out)->required();
  z->add_option("--checkpoint", an.checkpoints, "Checkpoint(s) for the similarity table")->check(CLI::ExistingFile);
  z->add_option("--p-values", an.p_values)->delimiter(',')->check(CLI::Range(0.0, 1.0));
  z->add_option("--lambda", an.lambda)->check(CLI::NonNegativeNumber);
  z->add_option("--mode", an.mode)->check(CLI::IsMember({"text", "mask", "text_equal_interval"}));
  z->add_option("--seed", an.seed);
  z->add_option("--max-pairs", an.max_pairs);

  std::string command = "ilt";
  try {
    // CLI11 consumes arguments back to front, without the program name.
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();
    app.parse(rev);
    for (auto* sub : app.get_subcommands()) command = sub->get_name();
    if (command == "gen") return cmd_gen(gen, out);
    if (command == "train-bpe") return cmd_train_bpe(bpe, out);
    if (command == "fit-kmeans") return cmd_fit_kmeans(km, out);
    if (command == "align") return cmd_align(al, out);
    if (command == "make-dataset") return cmd_make_dataset(ds, out);
    if (command == "train") return cmd_train(tr, *t, out);
    if (command == "eval") return cmd_eval(ev, out);
    if (command == "analyze") return cmd_analyze(an, out);
    throw std::logic_error("unhandled command " + command);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    for (auto* sub : app.get_subcommands()) command = sub->get_name();
    err << error_line(command, e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << error_line(command, e.what()) << "\n";
    return 1;
  }
}

}  // namespace ilt
