// emodub: command-line front end for the reference library, retrieval,
// progressive graph encoding, toy training and the surrogate sweeps.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emodub/checkpoint.h"
#include "emodub/errors.h"
#include "emodub/grad_check.h"
#include "emodub/harness.h"

using namespace emodub;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// "8" sets every modality, "8,8,6,6,12" sets them in schema order.
std::optional<LibrarySchema> dim_override() {
  const char* env = std::getenv("MRFL_DIM_OVERRIDE");
  if (env == nullptr || *env == '\0') return std::nullopt;
  std::vector<std::uint32_t> dims;
  std::stringstream ss(env);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(tok, &used);
      if (used != tok.size() || v == 0 || v > 1u << 20) throw std::invalid_argument(tok);
      dims.push_back(static_cast<std::uint32_t>(v));
    } catch (const std::exception&) {
      throw ArgumentError("MRFL_DIM_OVERRIDE: bad dim '" + tok + "'");
    }
  }
  if (dims.size() == 1) return LibrarySchema::uniform(dims[0]);
  if (dims.size() != 5) throw ArgumentError("MRFL_DIM_OVERRIDE needs 1 or 5 dims");
  LibrarySchema s;
  for (std::size_t i = 0; i < 5; ++i) s.dims[i] = dims[i];
  return s;
}

SimilarityMetric metric_arg(const std::string& name) {
  auto m = parse_metric(name);
  if (!m) throw ArgumentError("unknown metric '" + name + "' (cosine, dot, euclid)");
  return *m;
}

RetrievalMode mode_arg(const std::string& name) {
  auto m = parse_mode(name);
  if (!m) throw ArgumentError("unknown mode '" + name + "' (agnostic, specific)");
  return *m;
}

std::size_t single_k(const std::vector<std::size_t>& ks) {
  if (ks.size() != 1) throw ArgumentError("this command takes a single --k value");
  if (ks[0] == 0) throw ArgumentError("--k must be >= 1");
  return ks[0];
}

// Writes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw IoError("cannot open " + path + " for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
  void finish(const std::string& path) {
    stream().flush();
    if (!stream()) throw IoError("write failed for " + (path.empty() ? std::string("stdout") : path));
  }

 private:
  std::ofstream file_;
};

struct Common {
  std::string lib;
  std::string out;
  std::uint64_t seed = 1;
  std::vector<std::size_t> ks;
  std::string metric = "cosine";
  std::string mode = "agnostic";
};

struct SynthFlags {
  std::size_t records = 200;
  std::size_t clusters = 4;
  double separation = 6.0;
  std::size_t speakers = 8;
  bool speaker_per_cluster = false;
  std::uint32_t dim = 8;
};

void add_synth_flags(CLI::App* cmd, SynthFlags& f) {
  cmd->add_option("--records", f.records, "Library size N")->capture_default_str();
  cmd->add_option("--clusters", f.clusters, "Emotion clusters")->capture_default_str();
  cmd->add_option("--separation", f.separation, "Minimum centroid distance in noise radii")->capture_default_str();
  cmd->add_option("--speakers", f.speakers, "Distinct speakers")->capture_default_str();
  cmd->add_flag("--speaker-per-cluster", f.speaker_per_cluster, "Each speaker owns a single cluster");
  cmd->add_option("--dim", f.dim, "Per-modality dim (MRFL_DIM_OVERRIDE wins)")->capture_default_str();
}

SyntheticConfig synth_config(const SynthFlags& f, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.seed = seed;
  cfg.records = f.records;
  cfg.clusters = f.clusters;
  cfg.separation = f.separation;
  cfg.speakers = f.speakers;
  cfg.speaker_per_cluster = f.speaker_per_cluster;
  cfg.schema = dim_override().value_or(LibrarySchema::uniform(f.dim));
  return cfg;
}

FootageLibrary open_library(const std::string& path) { return load_library(path, dim_override()); }

// --lib when given, else a synthetic library from the generator flags.
FootageLibrary library_or_synthetic(const Common& c, const SynthFlags& f) {
  return c.lib.empty() ? generate_synthetic_library(synth_config(f, c.seed)) : open_library(c.lib);
}

std::vector<const FootageRecord*> pick_queries(const FootageLibrary& lib, const std::vector<std::uint64_t>& ids) {
  std::vector<const FootageRecord*> out;
  if (ids.empty()) {
    for (const FootageRecord& r : lib.records()) out.push_back(&r);
  } else {
    for (std::uint64_t id : ids) out.push_back(&lib.at(id));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emotion reference library, retrieval, progressive graph encoding and surrogate sweeps"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Common c;
  SynthFlags synth;
  auto add_common = [&](CLI::App* cmd, bool lib, bool k) {
    cmd->add_option("--seed", c.seed, "Seed")->capture_default_str();
    cmd->add_option("--out", c.out, "Output path (stdout when omitted for text outputs)");
    if (lib) cmd->add_option("--lib", c.lib, "MRFL library")->check(CLI::ExistingFile);
    if (k) {
      cmd->add_option("--k", c.ks, "Top-K value(s), comma separated")->delimiter(',');
      cmd->add_option("--metric", c.metric, "cosine | dot | euclid")->capture_default_str();
      cmd->add_option("--mode", c.mode, "agnostic | specific")->capture_default_str();
    }
  };

  auto* gen = app.add_subcommand("gen-synthetic", "Write a clustered synthetic MRFL library");
  add_common(gen, false, false);
  add_synth_flags(gen, synth);
  gen->get_option("--out")->required();

  std::string ingest_in;
  bool export_jsonl = false;
  auto* ingest = app.add_subcommand("ingest", "Convert JSONL interchange to MRFL (or back with --to-jsonl)");
  add_common(ingest, false, false);
  ingest->add_option("--in", ingest_in, "Input file")->required()->check(CLI::ExistingFile);
  ingest->add_flag("--to-jsonl", export_jsonl, "Read MRFL and write JSONL");
  ingest->get_option("--out")->required();

  std::vector<std::uint64_t> query_ids;
  auto* retrieve = app.add_subcommand("retrieve", "Top-K retrieval CSV for library records used as queries");
  add_common(retrieve, true, true);
  retrieve->get_option("--lib")->required();
  retrieve->add_option("--query-id", query_ids, "Query record id(s); all records when omitted")->delimiter(',');

  std::uint64_t encode_query = 0;
  std::size_t encode_hidden = 256;
  bool encode_features = false;
  auto* encode = app.add_subcommand("encode", "Dump the three progressive graphs as JSON");
  add_common(encode, true, true);
  encode->get_option("--lib")->required();
  encode->add_option("--query-id", encode_query, "Query record id (first record when omitted)");
  encode->add_option("--hidden-dim", encode_hidden, "Graph hidden dim")->capture_default_str();
  encode->add_flag("--features", encode_features, "Include encoded node features");

  ToyFixtureConfig toy;
  std::size_t toy_steps = 200;
  std::string toy_checkpoint;
  auto* train = app.add_subcommand("train-toy", "Train on the fixed synthetic batch; CSV of step,loss");
  add_common(train, false, true);
  train->add_option("--steps", toy_steps, "Adam steps")->capture_default_str();
  train->add_option("--library-size", toy.library_size, "Synthetic library size")->capture_default_str();
  train->add_option("--emotion-dim", toy.emotion_dim, "Per-modality emotion dim")->capture_default_str();
  train->add_option("--hidden-dim", toy.graph.hidden_dim, "Graph hidden dim")->capture_default_str();
  train->add_option("--model-dim", toy.head.model_dim, "Aggregation model dim")->capture_default_str();
  train->add_option("--n-mel", toy.head.n_mel, "Mel bins")->capture_default_str();
  train->add_option("--length", toy.length, "Aligned sequence length")->capture_default_str();
  train->add_option("--checkpoint", toy_checkpoint, "ADPK checkpoint path")->required();

  SweepConfig sweep;
  std::vector<std::string> sweep_metrics;
  std::vector<std::string> sweep_modes;
  auto add_sweep = [&](CLI::App* cmd) {
    add_common(cmd, true, true);
    add_synth_flags(cmd, synth);
  };
  auto* topk = app.add_subcommand("sweep-topk", "Purity per (K, mode)");
  add_sweep(topk);
  topk->add_option("--modes", sweep_modes, "Modes to sweep (default both)")->delimiter(',');
  auto* metric = app.add_subcommand("sweep-metric", "Purity per (metric, K)");
  add_sweep(metric);
  metric->add_option("--metrics", sweep_metrics, "Metrics to sweep (default all)")->delimiter(',');
  auto* scale = app.add_subcommand("sweep-scale", "Purity per (library fraction, K)");
  add_sweep(scale);
  scale->add_option("--fractions", sweep.fractions, "Library fractions in (0, 1]")->delimiter(',');

  double gc_tol = 1e-4;
  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of the full pipeline");
  add_common(gc, false, false);
  ToyFixtureConfig gc_cfg;
  gc_cfg.library_size = 24;
  gc_cfg.k = 2;
  gc_cfg.length = 5;
  gc_cfg.graph.hidden_dim = 8;
  gc_cfg.head.model_dim = 8;
  gc_cfg.head.n_mel = 4;
  gc->add_option("--hidden-dim", gc_cfg.graph.hidden_dim, "Graph hidden dim")->capture_default_str();
  gc->add_option("--model-dim", gc_cfg.head.model_dim, "Aggregation model dim")->capture_default_str();
  gc->add_option("--length", gc_cfg.length, "Aligned sequence length")->capture_default_str();
  gc->add_option("--topk", gc_cfg.k, "Retrieved records per channel")->capture_default_str();
  gc->add_option("--tol", gc_tol, "Maximum relative error")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      save_library(generate_synthetic_library(synth_config(synth, c.seed)), c.out);
    } else if (ingest->parsed()) {
      if (export_jsonl) {
        Output out(c.out);
        write_interchange(open_library(ingest_in), out.stream());
        out.finish(c.out);
      } else {
        std::ifstream in(ingest_in);
        if (!in) throw IoError("cannot open " + ingest_in);
        save_library(read_interchange(in, dim_override()), c.out);
      }
    } else if (retrieve->parsed()) {
      const FootageLibrary lib = open_library(c.lib);
      const std::size_t k = c.ks.empty() ? kDefaultTopK : single_k(c.ks);
      const SimilarityMetric m = metric_arg(c.metric);
      const RetrievalMode mode = mode_arg(c.mode);
      const auto queries = pick_queries(lib, query_ids);
      Output out(c.out);
      write_retrieval_csv_header(out.stream());
      for (const FootageRecord* q : queries) {
        write_retrieval_csv(out.stream(), q->record_id, retrieve_all(lib, Query::from_record(*q), k, m, mode), lib);
      }
      out.finish(c.out);
    } else if (encode->parsed()) {
      const FootageLibrary lib = open_library(c.lib);
      if (lib.empty()) throw ArgumentError("library is empty");
      const std::size_t k = c.ks.empty() ? kDefaultTopK : single_k(c.ks);
      const FootageRecord& q = encode_query == 0 ? lib.records().front() : lib.at(encode_query);
      const RetrievalResult res =
          retrieve_all(lib, Query::from_record(q), k, metric_arg(c.metric), mode_arg(c.mode));
      GraphConfig gcfg;
      gcfg.hidden_dim = encode_hidden;
      GraphEncoder enc(lib.schema(), gcfg, c.seed);
      Tape tape;
      const auto graphs = progressive_encode(tape, q.scene.values, q.face.values, q.text_concat(), res, enc);
      for (const EmotionGraph* g : {&graphs.beg, &graphs.ieg, &graphs.deg}) check_topology(*g);
      nlohmann::json j = progressive_to_json(graphs, encode_features);
      j["query_id"] = q.record_id;
      j["k"] = k;
      Output out(c.out);
      out.stream() << j.dump(2) << '\n';
      out.finish(c.out);
    } else if (train->parsed()) {
      toy.seed = c.seed;
      if (!c.ks.empty()) toy.k = single_k(c.ks);
      toy.metric = metric_arg(c.metric);
      toy.mode = mode_arg(c.mode);
      ToyFixture fx = make_toy_fixture(toy);
      DubberModel model(fx.library.schema(), toy.graph, toy.head, c.seed);
      const std::vector<double> losses = train_toy(fx.batch, model, toy_steps);
      Output out(c.out);
      out.stream() << "step,loss\n";
      for (std::size_t s = 0; s < losses.size(); ++s) out.stream() << s << ',' << format_g17(losses[s]) << '\n';
      out.finish(c.out);
      save_checkpoint(model.parameters(), toy_checkpoint);
    } else if (topk->parsed() || metric->parsed() || scale->parsed()) {
      sweep.seed = c.seed;
      if (!c.ks.empty()) sweep.ks = c.ks;
      sweep.metric = metric_arg(c.metric);
      if (!sweep_modes.empty()) {
        sweep.modes.clear();
        for (const auto& s : sweep_modes) sweep.modes.push_back(mode_arg(s));
      } else if (!topk->parsed()) {
        sweep.modes = {mode_arg(c.mode)};
      }
      if (!sweep_metrics.empty()) {
        sweep.metrics.clear();
        for (const auto& s : sweep_metrics) sweep.metrics.push_back(metric_arg(s));
      }
      sweep.validate();
      const FootageLibrary lib = library_or_synthetic(c, synth);
      Output out(c.out);
      if (topk->parsed()) write_topk_csv(out.stream(), sweep_topk(lib, sweep));
      if (metric->parsed()) write_metric_csv(out.stream(), sweep_metric(lib, sweep));
      if (scale->parsed()) write_scale_csv(out.stream(), sweep_scale(lib, sweep));
      out.finish(c.out);
    } else if (gc->parsed()) {
      gc_cfg.seed = c.seed;
      ToyFixture fx = make_toy_fixture(gc_cfg);
      DubberModel model(fx.library.schema(), gc_cfg.graph, gc_cfg.head, c.seed);
      const GradCheckReport report =
          grad_check([&](Tape& t) { return forward_pipeline(t, fx.batch, model).loss; }, model.parameters());
      Output out(c.out);
      out.stream() << "parameter,max_rel_error,max_abs_diff,max_abs_grad\n";
      for (const ParamGradError& p : report.per_param) {
        out.stream() << p.name << ',' << format_g17(p.max_rel_error) << ',' << format_g17(p.max_abs_diff) << ','
                     << format_g17(p.max_abs_analytic) << '\n';
      }
      out.finish(c.out);
      std::cerr << "max relative error " << report.max_rel_error << ", max |analytic - numeric| "
                << report.max_abs_diff << " over " << report.evaluations
                << " loss evaluations\n";
      if (!(report.max_rel_error < gc_tol)) {
        std::cerr << "grad-check: exceeds tolerance " << gc_tol << '\n';
        return kExitNumeric;
      }
    }
  } catch (const Error& e) {
    std::cerr << "emodub: " << e.what() << " [" << to_string(e.kind()) << "]" << '\n';
    switch (e.kind()) {
      case ErrorKind::Argument:
      case ErrorKind::Config: return kExitUsage;
      case ErrorKind::Numeric: return kExitNumeric;
      default: return kExitData;
    }
  }
  return kExitOk;
}
