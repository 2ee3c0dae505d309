#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "emodub/aggregation_head.h"
#include "emodub/footage_library.h"
#include "emodub/progressive_graph.h"
#include "emodub/retrieval.h"

namespace emodub {

// --- synthetic clustered libraries ---------------------------------------------

/// Records carry labels emotion_0..emotion_{clusters-1}, assigned round-robin
/// by record order. Each modality draws its own centroids; a record's vector
/// is its cluster centroid plus isotropic Gaussian noise whose RMS radius is
/// 1 (per-coordinate std 1/sqrt(dim)). `separation` is the minimum pairwise
/// centroid distance in units of that radius: with clusters <= dim the
/// centroids sit on distinct coordinate axes at distance separation/sqrt(2)
/// from the origin, otherwise they are random directions rescaled so the
/// closest pair is exactly `separation` apart.
struct SyntheticConfig {
  std::uint64_t seed = 1;
  std::size_t records = 200;
  std::size_t clusters = 4;
  double separation = 6.0;
  std::size_t speakers = 8;
  // Each speaker owns records of a single cluster only.
  bool speaker_per_cluster = false;
  LibrarySchema schema = LibrarySchema::uniform(8);
};

FootageLibrary generate_synthetic_library(const SyntheticConfig& cfg);

// --- purity (surrogate for emotion accuracy) -------------------------------

struct PurityStats {
  double purity = 0.0;         // fraction of retrieved hits sharing the query label
  double mean_score = 0.0;
  double mean_list_len = 0.0;  // average hits per (query, channel) list
  std::size_t hits = 0;
  std::size_t queries = 0;
};

/// Every query record retrieves from `lib` with its own id excluded; hits of
/// all three channels are pooled.
PurityStats evaluate_purity(const FootageLibrary& lib, std::span<const FootageRecord> queries, std::size_t k,
                            SimilarityMetric metric, RetrievalMode mode);

// --- sweeps --------------------------------------------------------------------

struct SweepConfig {
  std::uint64_t seed = 1;
  std::vector<std::size_t> ks = {1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<SimilarityMetric> metrics = {SimilarityMetric::Cosine, SimilarityMetric::DotProduct,
                                           SimilarityMetric::NegEuclidean};
  std::vector<double> fractions = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<RetrievalMode> modes = {RetrievalMode::SpeakerAgnostic, RetrievalMode::SpeakerSpecific};
  SimilarityMetric metric = SimilarityMetric::Cosine;  // for the K and scale sweeps
  // Throws ArgumentError on an empty list or a fraction outside (0, 1].
  void validate() const;
};

struct TopKRow {
  std::size_t k;
  RetrievalMode mode;
  PurityStats stats;
};
struct MetricRow {
  SimilarityMetric metric;
  std::size_t k;
  PurityStats stats;
};
struct ScaleRow {
  double fraction;
  std::size_t k;
  RetrievalMode mode;
  PurityStats stats;
};

std::vector<TopKRow> sweep_topk(const FootageLibrary& lib, const SweepConfig& cfg);
std::vector<MetricRow> sweep_metric(const FootageLibrary& lib, const SweepConfig& cfg);
/// Queries are always the full library; retrieval runs over
/// subsample(lib, fraction, cfg.seed).
std::vector<ScaleRow> sweep_scale(const FootageLibrary& lib, const SweepConfig& cfg);

void write_topk_csv(std::ostream& out, const std::vector<TopKRow>& rows);
void write_metric_csv(std::ostream& out, const std::vector<MetricRow>& rows);
void write_scale_csv(std::ostream& out, const std::vector<ScaleRow>& rows);

// query_id,modality,rank,record_id,score,speaker_id  (rank is 1-based)
void write_retrieval_csv_header(std::ostream& out);
void write_retrieval_csv(std::ostream& out, std::uint64_t query_id, const RetrievalResult& result,
                         const FootageLibrary& lib);

std::string format_g17(double v);

// --- encode dump ---------------------------------------------------------------

nlohmann::json graph_to_json(const EmotionGraph& g, bool with_features);
nlohmann::json progressive_to_json(const ProgressiveOutput& out, bool with_features);

// --- toy training ----------------------------------------------------------------

struct ToyFixtureConfig {
  std::uint64_t seed = 7;
  std::size_t library_size = 48;
  std::size_t clusters = 4;
  std::uint32_t emotion_dim = 8;
  std::size_t k = kDefaultTopK;
  std::size_t length = 8;
  SimilarityMetric metric = SimilarityMetric::Cosine;
  RetrievalMode mode = RetrievalMode::SpeakerAgnostic;
  // Narrower than the model defaults: at 256 wide, plain Adam at the fixed
  // learning rate oscillates on this single batch instead of fitting it.
  GraphConfig graph{.hidden_dim = 64};
  HeadConfig head{.model_dim = 64};
};

/// Batch for the first library record: its basic emotion, its retrieval
/// (self excluded), a stub aligned sequence and a uniform [-1, 1) mel target
/// from SplitMix64::keyed(seed, "target-mel", length).
ToyBatch make_toy_batch(const FootageLibrary& lib, const FootageRecord& target, const ToyFixtureConfig& cfg);

struct ToyFixture {
  FootageLibrary library;
  ToyBatch batch;
};

/// The fixed fixture: a clustered synthetic library of cfg.library_size
/// records and the batch built for its first record.
ToyFixture make_toy_fixture(const ToyFixtureConfig& cfg);

/// Runs `steps` Adam steps and returns the loss before each step followed by
/// the loss after the last one (steps + 1 entries).
std::vector<double> train_toy(const ToyBatch& batch, DubberModel& model, std::size_t steps, AdamConfig adam = {});

}  // namespace emodub
