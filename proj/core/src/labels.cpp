#include "emostress/labels.hpp"

namespace emostress {

namespace {

constexpr std::array<std::string_view, 8> kCorpusNames = {"Angry", "Boredom", "Disgust", "Fear",
                                                          "Happy", "Neutral", "Sad",     "Surprise"};

}  // namespace

std::string_view to_string(EmotionLabel label) { return kCorpusNames.at(static_cast<std::size_t>(label)); }

std::string_view to_string(CorpusEmotion emotion) { return kCorpusNames.at(static_cast<std::size_t>(emotion)); }

std::optional<CorpusEmotion> corpus_emotion_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kCorpusNames.size(); ++i)
    if (kCorpusNames[i] == name) return static_cast<CorpusEmotion>(i);
  return std::nullopt;
}

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::EmoDB: return "emodb";
    case DatasetKind::SAVEE: return "savee";
    case DatasetKind::Synth: return "synth";
  }
  return "unknown";
}

std::optional<DatasetKind> dataset_kind_from_string(std::string_view name) {
  if (name == "emodb") return DatasetKind::EmoDB;
  if (name == "savee") return DatasetKind::SAVEE;
  if (name == "synth") return DatasetKind::Synth;
  return std::nullopt;
}

ClassMap ClassMap::for_dataset(DatasetKind kind) {
  ClassMap m{{CorpusEmotion::Angry, CorpusEmotion::Boredom, CorpusEmotion::Disgust, CorpusEmotion::Fear,
              CorpusEmotion::Happy, CorpusEmotion::Neutral, CorpusEmotion::Sad}};
  if (kind == DatasetKind::SAVEE) m.classes[static_cast<std::size_t>(EmotionLabel::Boredom)] = CorpusEmotion::Surprise;
  return m;
}

std::optional<std::size_t> ClassMap::class_of(CorpusEmotion emotion) const {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == emotion) return i;
  return std::nullopt;
}

}  // namespace emostress
