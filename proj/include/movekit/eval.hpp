#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "movekit/dataset.hpp"

namespace movekit {

struct WindowPrediction {
  std::string video_id;
  double start_sec = 0.0;
  double end_sec = 0.0;
  Label pred = Label::none;
  bool from_decoder = false;
  bool parse_ok = true;
  std::string raw_text;
};

// How overlapping windows vote for a shared frame.
enum class OverlapRule { nearest_center, latest_window };

// Whether unannotated (ground-truth none) frames count toward accuracy.
enum class FrameCountMode { all_frames, annotated_only };

struct VideoMeta {
  std::string video_id;
  double fps = 0.0;
  double duration_sec = 0.0;
};

struct FrameSeries {
  std::string video_id;
  double fps = 0.0;
  std::vector<Label> gt;
  std::vector<Label> pred;
};

// Expands window predictions to per-frame labels. Frame i sits at time
// (i + 0.5) / fps; it takes the covering window whose center is nearest
// (ties to the earlier window), or the latest covering window under the
// alternate rule. Frames no window covers default to none.
FrameSeries windows_to_frames(const std::vector<WindowPrediction>& preds,
                              const VideoMeta& meta,
                              const std::vector<SegmentAnnotation>& annotations,
                              OverlapRule rule = OverlapRule::nearest_center);

struct AccuracyReport {
  double overall = 0.0;
  double per_video_mean = 0.0;
  double per_video_std = 0.0;  // population std
  std::size_t total_frames = 0;
  std::size_t correct_frames = 0;
  std::size_t num_videos = 0;
  std::array<std::array<std::size_t, 4>, 4> confusion{};  // [gt][pred]
  FrameCountMode mode = FrameCountMode::all_frames;
  std::size_t parse_failures = 0;
};

AccuracyReport frame_accuracy(const std::vector<FrameSeries>& series,
                              FrameCountMode mode = FrameCountMode::all_frames);

struct ParsedLabel {
  Label label = Label::none;
  bool ok = false;
};

// Case-insensitive scan for the last "move ::" followed by a label token.
// Never throws; unparseable text yields none with ok = false.
ParsedLabel parse_decoder_output(const std::string& text);

// Two-decimal report row: overall as "0.69", per-video as "0.66 ± 0.08".
struct AccuracySummary {
  std::string overall;
  std::string per_video;
};
AccuracySummary format_accuracy_summary(const AccuracyReport& report);

// mean(std) over runs, scaled x100, rendered "MM.MM(S.SS)" with population std.
std::string format_mean_std(const std::vector<double>& values);

// Aggregates identical metric sets across runs into formatted cells.
std::map<std::string, std::string> aggregate_runs(
    const std::vector<std::map<std::string, double>>& runs);

}  // namespace movekit
