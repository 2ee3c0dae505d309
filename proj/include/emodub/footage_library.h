#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace emodub {

// Schema order; also the order of vector payloads in the MRFL file.
enum class Modality : std::uint8_t { Scene = 0, Face = 1, TextSelf = 2, TextReact = 3, Audio = 4 };

inline constexpr std::array<Modality, 5> kAllModalities = {
    Modality::Scene, Modality::Face, Modality::TextSelf, Modality::TextReact, Modality::Audio};

const char* to_string(Modality m);
std::optional<Modality> parse_modality(std::string_view name);

struct EmotionVector {
  Modality modality = Modality::Scene;
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const EmotionVector&) const = default;
};

struct LibrarySchema {
  std::array<std::uint32_t, 5> dims{};

  static LibrarySchema uniform(std::uint32_t dim) {
    LibrarySchema s;
    s.dims.fill(dim);
    return s;
  }
  std::uint32_t dim(Modality m) const { return dims[static_cast<std::size_t>(m)]; }

  // Throws SchemaError unless v is finite, tagged `expected` and of the registered dim.
  void check(const EmotionVector& v, Modality expected) const;

  bool operator==(const LibrarySchema&) const = default;
};

struct FootageRecord {
  std::uint64_t record_id = 0;
  std::string movie_id;
  std::string speaker_id;
  std::string emotion_label;  // empty when unlabeled
  EmotionVector scene{Modality::Scene, {}};
  EmotionVector face{Modality::Face, {}};
  EmotionVector text_self{Modality::TextSelf, {}};
  EmotionVector text_react{Modality::TextReact, {}};
  EmotionVector audio{Modality::Audio, {}};

  const EmotionVector& vector(Modality m) const;
  EmotionVector& vector(Modality m);
  // T = T_self ‖ T_react, the graph-side text representation.
  std::vector<double> text_concat() const;

  bool operator==(const FootageRecord&) const = default;
};

/// The reference footage store. Single writer while building; once built it
/// is only read, and concurrent readers need no synchronization.
class FootageLibrary {
 public:
  explicit FootageLibrary(LibrarySchema schema);

  const LibrarySchema& schema() const { return schema_; }
  const std::vector<FootageRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  /// Validates against the schema and rejects a duplicate record_id
  /// (ArgumentError). The library is unchanged when this throws.
  void add(FootageRecord record);

  const FootageRecord* find(std::uint64_t record_id) const;
  const FootageRecord& at(std::uint64_t record_id) const;

  bool operator==(const FootageLibrary& other) const {
    return schema_ == other.schema_ && records_ == other.records_;
  }

 private:
  LibrarySchema schema_;
  std::vector<FootageRecord> records_;
  std::unordered_map<std::uint64_t, std::size_t> id_index_;
};

// --- extraction -----------------------------------------------------------

/// Deterministic stand-in for a pretrained emotion recognizer: values are
/// uniform_pm1() draws from SplitMix64::keyed(seed, content_key, modality).
/// Throws SchemaError for dim < 2.
EmotionVector synthetic_extract(std::uint64_t seed, std::string_view content_key, Modality modality,
                                std::uint32_t dim);

/// Raw per-sample material handed to the extractors. For the synthetic suite
/// these are opaque content keys; a real suite would receive captions or
/// paths to media.
struct RawInputs {
  std::string scene;
  std::string face;
  std::string text;
  std::string audio;
};

/// Interface for the four emotion extractors. Implementations must be
/// deterministic. The text extractor returns the self and react halves
/// separately; callers concatenate when they need T.
///
/// A real scene/face extractor is expected to caption the clip with a video
/// language model, feeding low-level cues (hue, lightness, saturation) into
/// the prompt, then run a text emotion recognizer over the caption.
class ExtractorSuite {
 public:
  virtual ~ExtractorSuite() = default;
  virtual EmotionVector scene(std::string_view raw) const = 0;
  virtual EmotionVector face(std::string_view raw) const = 0;
  virtual std::pair<EmotionVector, EmotionVector> text(std::string_view raw) const = 0;
  virtual EmotionVector audio(std::string_view raw) const = 0;
};

class SyntheticExtractorSuite final : public ExtractorSuite {
 public:
  SyntheticExtractorSuite(std::uint64_t seed, LibrarySchema schema) : seed_(seed), schema_(schema) {}

  EmotionVector scene(std::string_view raw) const override;
  EmotionVector face(std::string_view raw) const override;
  std::pair<EmotionVector, EmotionVector> text(std::string_view raw) const override;
  EmotionVector audio(std::string_view raw) const override;

 private:
  std::uint64_t seed_;
  LibrarySchema schema_;
};

/// Runs every extractor over `raw`; throws SchemaError when an extractor
/// returns a vector that does not fit `schema`.
FootageRecord build_record(std::uint64_t record_id, std::string movie_id, std::string speaker_id,
                           std::string emotion_label, const RawInputs& raw,
                           const ExtractorSuite& extractors, const LibrarySchema& schema);

// --- persistence ----------------------------------------------------------

inline constexpr std::uint32_t kMrflVersion = 1;

std::vector<char> encode_library(const FootageLibrary& lib);
/// Throws FormatError with reason BadMagic / VersionMismatch / Truncated /
/// DimMismatch (header dims differ from `expected`, or a zero dim) /
/// TrailingBytes / BadValue (non-finite payload or duplicate id).
FootageLibrary decode_library(std::span<const char> bytes,
                              const std::optional<LibrarySchema>& expected = std::nullopt);

void save_library(const FootageLibrary& lib, const std::filesystem::path& path);
FootageLibrary load_library(const std::filesystem::path& path,
                            const std::optional<LibrarySchema>& expected = std::nullopt);

// JSON-lines interchange: one object per record with keys record_id,
// movie_id, speaker_id, emotion_label, scene, face, text_self, text_react,
// audio. Doubles are printed shortest-round-trip, so a write/read cycle is
// bit-exact.
void write_interchange(const FootageLibrary& lib, std::ostream& out);
/// Schema is taken from `schema` when given, else from the first record.
/// An empty stream with no schema yields an error.
FootageLibrary read_interchange(std::istream& in, const std::optional<LibrarySchema>& schema = std::nullopt);

/// Uniform sample without replacement of ceil(fraction * N) records, kept in
/// library order. fraction must lie in (0, 1].
FootageLibrary subsample(const FootageLibrary& lib, double fraction, std::uint64_t seed);

}  // namespace emodub
