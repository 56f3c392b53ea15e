#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace emostress {

// Class codes of the 7-way head, in this fixed order.
enum class EmotionLabel : std::uint8_t { Angry = 0, Boredom, Disgust, Fear, Happy, Neutral, Sad };
inline constexpr std::size_t kNumEmotions = 7;

std::string_view to_string(EmotionLabel label);

// Emotions as annotated in the corpora. Surprise only occurs in SAVEE.
enum class CorpusEmotion : std::uint8_t { Angry, Boredom, Disgust, Fear, Happy, Neutral, Sad, Surprise };

std::string_view to_string(CorpusEmotion emotion);
std::optional<CorpusEmotion> corpus_emotion_from_string(std::string_view name);

enum class DatasetKind : std::uint8_t { EmoDB, SAVEE, Synth };

std::string_view to_string(DatasetKind kind);
std::optional<DatasetKind> dataset_kind_from_string(std::string_view name);

// Assignment of corpus emotions to the seven class codes. For SAVEE, Surprise
// takes the slot Boredom occupies for Emo-DB.
struct ClassMap {
  std::array<CorpusEmotion, kNumEmotions> classes;

  static ClassMap for_dataset(DatasetKind kind);

  std::optional<std::size_t> class_of(CorpusEmotion emotion) const;
  std::string_view class_name(std::size_t code) const { return to_string(classes.at(code)); }
};

}  // namespace emostress
