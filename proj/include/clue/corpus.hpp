#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clue/wav.hpp"

namespace clue::corpus {

struct DetectionEvent {
  double t = 0.0;  // seconds
  std::string label;
  double confidence = 0.0;  // in [0, 1]
};

// Detector output for one lecture; events sorted by t, t <= duration.
struct DetectionTimeline {
  std::vector<DetectionEvent> events;

  bool empty() const { return events.empty(); }
  size_t size() const { return events.size(); }
};

// One lecture: transcript + title, mono audio, detection timeline, duration,
// optional normalized user rating.
struct LectureBundle {
  std::string id;
  std::string title;
  std::string transcript;
  AudioClip audio;
  DetectionTimeline detections;
  double duration_seconds = 0.0;
  std::optional<double> rating;  // normalized to [0, 1]
};

// Canonical feature column order; the label column is `median_engagement`.
inline const std::array<std::string, 14> kFeatureNames = {
    "conjugate_rate",
    "pronoun_rate",
    "preposition_rate",
    "tobe_verb_rate",
    "auxiliary_rate",
    "normalization_rate",
    "fraction_stopword_coverage",
    "fraction_stopword_presence",
    "easiness",
    "document_entropy",
    "word_count",
    "title_word_count",
    "duration",
    "speaker_speed"};

inline const std::string kLabelName = "median_engagement";

// Rows of (14 features in canonical order, label in [0, 1]).
struct FeatureTable {
  std::vector<std::array<double, 14>> features;
  std::vector<double> labels;

  size_t size() const { return features.size(); }
};

// raw in [0, scale_max] -> raw / scale_max
double normalize_rating(double raw, double scale_max);

// Manifest is one JSON document per lecture:
//   {id, title, transcript_path, audio_path, detections_path?,
//    duration_seconds, rating?, rating_scale_max?}
// Audio is decoded to mono float and resampled to target_sample_rate.
LectureBundle load_lecture_bundle(const std::filesystem::path& manifest_path,
                                  int target_sample_rate = 22050);

// Detection records: JSON Lines, one {"t", "label", "confidence"} per line.
DetectionTimeline load_detection_timeline(const std::filesystem::path& path,
                                          double duration_seconds);

// CSV with the 14 feature columns + median_engagement, any column order.
FeatureTable load_feature_table(const std::filesystem::path& csv_path);
FeatureTable parse_feature_table(const std::string& csv_text, const std::string& origin);
std::string format_feature_table(const FeatureTable& table);
void save_feature_table(const FeatureTable& table, const std::filesystem::path& csv_path);

}  // namespace clue::corpus
