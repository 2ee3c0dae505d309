#include "emodub/harness.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "emodub/errors.h"
#include "emodub/rng.h"

namespace emodub {

namespace {

std::vector<std::vector<double>> make_centroids(const SyntheticConfig& cfg, Modality m, std::size_t dim) {
  std::vector<std::vector<double>> centroids(cfg.clusters, std::vector<double>(dim, 0.0));
  if (cfg.clusters <= dim) {
    const double radius = cfg.separation / std::sqrt(2.0);
    for (std::size_t c = 0; c < cfg.clusters; ++c) {
      centroids[c][(c + static_cast<std::size_t>(m)) % dim] = radius;
    }
    return centroids;
  }
  auto rng = SplitMix64::keyed(cfg.seed, "centroids", static_cast<std::uint64_t>(m));
  for (auto& c : centroids) {
    for (double& x : c) x = rng.normal();
  }
  double closest = INFINITY;
  for (std::size_t a = 0; a < cfg.clusters; ++a) {
    for (std::size_t b = a + 1; b < cfg.clusters; ++b) {
      double ss = 0.0;
      for (std::size_t i = 0; i < dim; ++i) ss += (centroids[a][i] - centroids[b][i]) * (centroids[a][i] - centroids[b][i]);
      closest = std::min(closest, std::sqrt(ss));
    }
  }
  const double factor = closest > 0.0 ? cfg.separation / closest : 0.0;
  for (auto& c : centroids) {
    for (double& x : c) x *= factor;
  }
  return centroids;
}

}  // namespace

FootageLibrary generate_synthetic_library(const SyntheticConfig& cfg) {
  if (cfg.clusters == 0) throw ArgumentError("synthetic library needs at least one cluster");
  if (cfg.speakers == 0) throw ArgumentError("synthetic library needs at least one speaker");
  if (!(cfg.separation >= 0.0)) throw ArgumentError("cluster separation must be >= 0");

  std::array<std::vector<std::vector<double>>, 5> centroids;
  for (Modality m : kAllModalities) {
    centroids[static_cast<std::size_t>(m)] = make_centroids(cfg, m, cfg.schema.dim(m));
  }
  const std::size_t speakers_per_cluster = std::max<std::size_t>(1, cfg.speakers / cfg.clusters);

  auto noise = SplitMix64::keyed(cfg.seed, "noise", 0);
  auto speaker_rng = SplitMix64::keyed(cfg.seed, "speaker", 0);
  FootageLibrary lib(cfg.schema);
  for (std::size_t i = 0; i < cfg.records; ++i) {
    const std::size_t c = i % cfg.clusters;
    FootageRecord r;
    r.record_id = i + 1;
    r.movie_id = "movie_" + std::to_string(i % 10);
    r.emotion_label = "emotion_" + std::to_string(c);
    if (cfg.speaker_per_cluster) {
      r.speaker_id = "spk_" + std::to_string(c * speakers_per_cluster + (i / cfg.clusters) % speakers_per_cluster);
    } else {
      r.speaker_id = "spk_" + std::to_string(speaker_rng.below(cfg.speakers));
    }
    for (Modality m : kAllModalities) {
      const std::size_t dim = cfg.schema.dim(m);
      const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
      EmotionVector& v = r.vector(m);
      v.modality = m;
      v.values = centroids[static_cast<std::size_t>(m)][c];
      for (double& x : v.values) x += sd * noise.normal();
    }
    lib.add(std::move(r));
  }
  return lib;
}

PurityStats evaluate_purity(const FootageLibrary& lib, std::span<const FootageRecord> queries, std::size_t k,
                            SimilarityMetric metric, RetrievalMode mode) {
  PurityStats s;
  std::size_t matches = 0, lists = 0;
  double score_sum = 0.0;
  for (const FootageRecord& q : queries) {
    const RetrievalResult res = retrieve_all(lib, Query::from_record(q), k, metric, mode);
    ++s.queries;
    for (Channel c : kAllChannels) {
      ++lists;
      for (const RankedHit& hit : res[c].hits) {
        ++s.hits;
        score_sum += hit.score;
        if (lib.at(hit.record_id).emotion_label == q.emotion_label) ++matches;
      }
    }
  }
  if (s.hits > 0) {
    s.purity = static_cast<double>(matches) / static_cast<double>(s.hits);
    s.mean_score = score_sum / static_cast<double>(s.hits);
  }
  if (lists > 0) s.mean_list_len = static_cast<double>(s.hits) / static_cast<double>(lists);
  return s;
}

void SweepConfig::validate() const {
  if (ks.empty() || metrics.empty() || fractions.empty() || modes.empty()) {
    throw ArgumentError("sweep lists must be non-empty");
  }
  for (std::size_t k : ks) {
    if (k == 0) throw ArgumentError("K values must be >= 1");
  }
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ArgumentError("scale fractions must lie in (0, 1]");
  }
}

std::vector<TopKRow> sweep_topk(const FootageLibrary& lib, const SweepConfig& cfg) {
  cfg.validate();
  std::vector<TopKRow> rows;
  for (std::size_t k : cfg.ks) {
    for (RetrievalMode mode : cfg.modes) {
      rows.push_back({k, mode, evaluate_purity(lib, lib.records(), k, cfg.metric, mode)});
    }
  }
  return rows;
}

std::vector<MetricRow> sweep_metric(const FootageLibrary& lib, const SweepConfig& cfg) {
  cfg.validate();
  std::vector<MetricRow> rows;
  for (SimilarityMetric metric : cfg.metrics) {
    for (std::size_t k : cfg.ks) {
      rows.push_back({metric, k, evaluate_purity(lib, lib.records(), k, metric, cfg.modes.front())});
    }
  }
  return rows;
}

std::vector<ScaleRow> sweep_scale(const FootageLibrary& lib, const SweepConfig& cfg) {
  cfg.validate();
  std::vector<double> fractions = cfg.fractions;
  std::sort(fractions.begin(), fractions.end());
  std::vector<ScaleRow> rows;
  for (double f : fractions) {
    const FootageLibrary part = subsample(lib, f, cfg.seed);
    for (std::size_t k : cfg.ks) {
      rows.push_back({f, k, cfg.modes.front(), evaluate_purity(part, lib.records(), k, cfg.metric, cfg.modes.front())});
    }
  }
  return rows;
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_topk_csv(std::ostream& out, const std::vector<TopKRow>& rows) {
  out << "k,mode,purity,mean_score,mean_list_len\n";
  for (const TopKRow& r : rows) {
    out << r.k << ',' << to_string(r.mode) << ',' << format_g17(r.stats.purity) << ','
        << format_g17(r.stats.mean_score) << ',' << format_g17(r.stats.mean_list_len) << '\n';
  }
}

void write_metric_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << "metric,k,purity\n";
  for (const MetricRow& r : rows) {
    out << to_string(r.metric) << ',' << r.k << ',' << format_g17(r.stats.purity) << '\n';
  }
}

void write_scale_csv(std::ostream& out, const std::vector<ScaleRow>& rows) {
  out << "fraction,k,purity\n";
  for (const ScaleRow& r : rows) {
    out << format_g17(r.fraction) << ',' << r.k << ',' << format_g17(r.stats.purity) << '\n';
  }
}

void write_retrieval_csv_header(std::ostream& out) { out << "query_id,modality,rank,record_id,score,speaker_id\n"; }

void write_retrieval_csv(std::ostream& out, std::uint64_t query_id, const RetrievalResult& result,
                         const FootageLibrary& lib) {
  for (Channel c : kAllChannels) {
    const auto& hits = result[c].hits;
    for (std::size_t r = 0; r < hits.size(); ++r) {
      out << query_id << ',' << to_string(c) << ',' << r + 1 << ',' << hits[r].record_id << ','
          << format_g17(hits[r].score) << ',' << lib.at(hits[r].record_id).speaker_id << '\n';
    }
  }
}

nlohmann::json graph_to_json(const EmotionGraph& g, bool with_features) {
  nlohmann::json j;
  j["stage"] = to_string(g.stage);
  j["nodes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const GraphNode& n = g.nodes[i];
    nlohmann::json node{{"index", i}, {"kind", to_string(n.kind)}, {"rank", n.rank}};
    node["source_record_id"] = n.source_record_id ? nlohmann::json(*n.source_record_id) : nlohmann::json(nullptr);
    j["nodes"].push_back(std::move(node));
  }
  j["edges"] = nlohmann::json::array();
  for (const GraphEdge& e : g.edges) j["edges"].push_back({{"a", e.a}, {"b", e.b}, {"kind", to_string(e.kind)}});
  if (with_features && g.features.valid()) {
    nlohmann::json rows = nlohmann::json::array();
    const Matrix& f = g.features.value();
    for (std::size_t i = 0; i < f.rows(); ++i) {
      rows.push_back(std::vector<double>(f.row(i).begin(), f.row(i).end()));
    }
    j["features"] = std::move(rows);
  }
  return j;
}

nlohmann::json progressive_to_json(const ProgressiveOutput& out, bool with_features) {
  return nlohmann::json{{"stages",
                         {graph_to_json(out.beg, with_features), graph_to_json(out.ieg, with_features),
                          graph_to_json(out.deg, with_features)}}};
}

ToyBatch make_toy_batch(const FootageLibrary& lib, const FootageRecord& target, const ToyFixtureConfig& cfg) {
  ToyBatch b;
  b.scene = target.scene.values;
  b.face = target.face.values;
  b.text_concat = target.text_concat();
  b.retrieved = retrieve_all(lib, Query::from_record(target), cfg.k, cfg.metric, cfg.mode);
  b.aligned = stub_aligned_sequence(cfg.seed, cfg.length, cfg.head.model_dim);
  auto rng = SplitMix64::keyed(cfg.seed, "target-mel", cfg.length);
  b.target_mel = Matrix(cfg.length, cfg.head.n_mel);
  for (double& x : b.target_mel.data()) x = rng.uniform_pm1();
  return b;
}

ToyFixture make_toy_fixture(const ToyFixtureConfig& cfg) {
  SyntheticConfig synth;
  synth.seed = cfg.seed;
  synth.records = cfg.library_size;
  synth.clusters = cfg.clusters;
  synth.schema = LibrarySchema::uniform(cfg.emotion_dim);
  FootageLibrary lib = generate_synthetic_library(synth);
  if (lib.empty()) throw ArgumentError("toy fixture needs a non-empty library");
  ToyBatch batch = make_toy_batch(lib, lib.records().front(), cfg);
  return {std::move(lib), std::move(batch)};
}

std::vector<double> train_toy(const ToyBatch& batch, DubberModel& model, std::size_t steps, AdamConfig adam) {
  AdamState state(adam);
  std::vector<double> losses;
  losses.reserve(steps + 1);
  for (std::size_t s = 0; s < steps; ++s) losses.push_back(toy_train_step(batch, model, state));
  Tape tape;
  losses.push_back(forward_pipeline(tape, batch, model).loss.value()(0, 0));
  return losses;
}

}  // namespace emodub
