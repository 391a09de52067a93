#include "clue/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "clue/errors.hpp"
#include "clue/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace clue::corpus {

namespace {

double parse_double_cell(const std::string& cell, const std::string& context) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw_schema(context + ": non-numeric cell '" + cell + "'");
  return value;
}

json parse_json_file(const fs::path& path) {
  std::string text = read_text_file(path);
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw_schema("invalid JSON in " + path.string());
  return doc;
}

}  // namespace

double normalize_rating(double raw, double scale_max) {
  if (!(scale_max > 0.0)) throw_schema("rating scale_max must be > 0");
  if (raw < 0.0 || raw > scale_max)
    throw_schema("rating " + std::to_string(raw) + " outside [0, " +
                 std::to_string(scale_max) + "]");
  return raw / scale_max;
}

DetectionTimeline load_detection_timeline(const fs::path& path, double duration_seconds) {
  std::string text = read_text_file(path);
  DetectionTimeline timeline;
  std::istringstream lines(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec = json::parse(line, nullptr, false);
    auto where = path.string() + ":" + std::to_string(line_no);
    if (rec.is_discarded() || !rec.is_object())
      throw_schema(where + ": invalid detection record");
    if (!rec.contains("t") || !rec.contains("label") || !rec.contains("confidence"))
      throw_schema(where + ": detection record needs t, label, confidence");
    DetectionEvent ev;
    ev.t = rec["t"].get<double>();
    ev.label = rec["label"].get<std::string>();
    ev.confidence = rec["confidence"].get<double>();
    if (ev.t < 0.0) throw_schema(where + ": negative timestamp");
    if (ev.t > duration_seconds)
      throw_schema(where + ": timestamp " + std::to_string(ev.t) +
                   " exceeds lecture duration " + std::to_string(duration_seconds));
    if (ev.confidence < 0.0 || ev.confidence > 1.0)
      throw_schema(where + ": confidence outside [0, 1]");
    timeline.events.push_back(std::move(ev));
  }
  std::stable_sort(timeline.events.begin(), timeline.events.end(),
                   [](const DetectionEvent& a, const DetectionEvent& b) { return a.t < b.t; });
  return timeline;
}

LectureBundle load_lecture_bundle(const fs::path& manifest_path, int target_sample_rate) {
  json doc = parse_json_file(manifest_path);
  if (!doc.is_object()) throw_schema("manifest must be a JSON object: " + manifest_path.string());

  auto require = [&](const char* key) -> const json& {
    if (!doc.contains(key))
      throw_schema("manifest " + manifest_path.string() + " missing field '" + key + "'");
    return doc[key];
  };

  LectureBundle bundle;
  bundle.id = require("id").get<std::string>();
  bundle.title = require("title").get<std::string>();
  bundle.duration_seconds = require("duration_seconds").get<double>();
  if (!(bundle.duration_seconds > 0.0))
    throw_schema("manifest " + manifest_path.string() + ": duration_seconds must be > 0");

  fs::path base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  bundle.transcript = read_text_file(resolve(require("transcript_path").get<std::string>()));

  AudioClip raw = read_wav(resolve(require("audio_path").get<std::string>()));
  double audio_seconds = raw.seconds();
  if (std::fabs(audio_seconds - bundle.duration_seconds) > 0.1 * bundle.duration_seconds)
    throw_schema("manifest " + manifest_path.string() + ": audio is " +
                 std::to_string(audio_seconds) + " s but duration_seconds is " +
                 std::to_string(bundle.duration_seconds) + " (mismatch > 10%)");
  bundle.audio.sample_rate = target_sample_rate;
  bundle.audio.samples = resample_linear(raw.samples, raw.sample_rate, target_sample_rate);

  if (doc.contains("detections_path"))
    bundle.detections = load_detection_timeline(
        resolve(doc["detections_path"].get<std::string>()), bundle.duration_seconds);

  if (doc.contains("rating")) {
    // The scale is never inferred: ratings arrive on different scales.
    if (!doc.contains("rating_scale_max"))
      throw_schema("manifest " + manifest_path.string() +
                   ": rating requires explicit rating_scale_max");
    bundle.rating = normalize_rating(doc["rating"].get<double>(),
                                     doc["rating_scale_max"].get<double>());
  }
  return bundle;
}

FeatureTable parse_feature_table(const std::string& csv_text, const std::string& origin) {
  CsvTable csv = parse_csv(csv_text, origin);

  std::array<int, 14> feature_cols{};
  for (size_t f = 0; f < kFeatureNames.size(); ++f) {
    int col = csv.column(kFeatureNames[f]);
    if (col < 0) throw_schema(origin + ": missing column '" + kFeatureNames[f] + "'");
    feature_cols[f] = col;
  }
  int label_col = csv.column(kLabelName);
  if (label_col < 0) throw_schema(origin + ": missing column '" + kLabelName + "'");

  FeatureTable table;
  for (size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    std::string context = origin + ": row " + std::to_string(r + 1);
    std::array<double, 14> feats{};
    for (size_t f = 0; f < 14; ++f)
      feats[f] = parse_double_cell(row[static_cast<size_t>(feature_cols[f])],
                                   context + " column '" + kFeatureNames[f] + "'");
    double label = parse_double_cell(row[static_cast<size_t>(label_col)],
                                     context + " column '" + kLabelName + "'");
    if (label < 0.0 || label > 1.0)
      throw_schema(context + ": label " + std::to_string(label) + " outside [0, 1]");
    table.features.push_back(feats);
    table.labels.push_back(label);
  }
  return table;
}

FeatureTable load_feature_table(const fs::path& csv_path) {
  return parse_feature_table(read_text_file(csv_path), csv_path.string());
}

std::string format_feature_table(const FeatureTable& table) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& name : kFeatureNames) out << name << ',';
  out << kLabelName << '\n';
  for (size_t r = 0; r < table.size(); ++r) {
    for (double v : table.features[r]) out << v << ',';
    out << table.labels[r] << '\n';
  }
  return out.str();
}

void save_feature_table(const FeatureTable& table, const fs::path& csv_path) {
  write_file_atomic(csv_path, format_feature_table(table));
}

}  // namespace clue::corpus
