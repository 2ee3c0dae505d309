#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "emodub/footage_library.h"

namespace emodub {

// All three metrics are "higher is better"; Euclidean distance is negated.
enum class SimilarityMetric { Cosine, DotProduct, NegEuclidean };

const char* to_string(SimilarityMetric m);
std::optional<SimilarityMetric> parse_metric(std::string_view name);  // cosine | dot | euclid

enum class RetrievalMode { SpeakerAgnostic, SpeakerSpecific };

const char* to_string(RetrievalMode m);
std::optional<RetrievalMode> parse_mode(std::string_view name);  // agnostic | specific

// The three retrieval channels. Text scores the self/react halves separately
// and averages them.
enum class Channel : std::uint8_t { Scene = 0, Face = 1, Text = 2 };
inline constexpr std::array<Channel, 3> kAllChannels = {Channel::Scene, Channel::Face, Channel::Text};
const char* to_string(Channel c);

/// Throws SchemaError on dim mismatch and ArgumentError for a zero-norm
/// operand under Cosine.
double similarity(SimilarityMetric metric, std::span<const double> a, std::span<const double> b);

/// Mean of the self-half and react-half similarities.
double text_criterion(std::span<const double> query_self, std::span<const double> query_react,
                      std::span<const double> record_self, std::span<const double> record_react,
                      SimilarityMetric metric);

struct Query {
  std::vector<double> scene;
  std::vector<double> face;
  std::vector<double> text_self;
  std::vector<double> text_react;
  std::optional<std::string> speaker_id;
  std::unordered_set<std::uint64_t> exclude_ids;

  /// Query built from a stored record. Its own id is excluded so the record
  /// cannot retrieve itself.
  static Query from_record(const FootageRecord& r, bool keep_speaker = true);
};

struct RankedHit {
  std::uint64_t record_id = 0;
  double score = 0.0;
  bool operator==(const RankedHit&) const = default;
};

/// Total order used for ranking: score descending, then record_id ascending.
inline bool ranks_before(const RankedHit& a, const RankedHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.record_id < b.record_id;
}

struct ChannelResult {
  std::vector<RankedHit> hits;
  // Indirect vectors in rank order; for Text this is self ‖ react.
  std::vector<std::vector<double>> indirect;
  // Audio vector of the record at the same rank, found by id lookup.
  std::vector<std::vector<double>> matched_audio;
};

struct RetrievalResult {
  std::array<ChannelResult, 3> channels;

  const ChannelResult& operator[](Channel c) const { return channels[static_cast<std::size_t>(c)]; }
  ChannelResult& operator[](Channel c) { return channels[static_cast<std::size_t>(c)]; }
};

/// Exhaustive top-K over one channel. Fewer than K hits only when the
/// candidate set (after speaker filter and exclusions) is smaller than K.
std::vector<RankedHit> retrieve_channel(const FootageLibrary& lib, const Query& query, Channel channel,
                                        std::size_t k, SimilarityMetric metric, RetrievalMode mode);

RetrievalResult retrieve_all(const FootageLibrary& lib, const Query& query, std::size_t k,
                             SimilarityMetric metric, RetrievalMode mode);

inline constexpr std::size_t kDefaultTopK = 3;

}  // namespace emodub
