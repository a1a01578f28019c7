#include "movekit/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace movekit {

FrameSeries windows_to_frames(const std::vector<WindowPrediction>& preds,
                              const VideoMeta& meta,
                              const std::vector<SegmentAnnotation>& annotations,
                              OverlapRule rule) {
  if (meta.fps <= 0.0 || meta.duration_sec <= 0.0)
    fail(Errc::missing_meta, "windows_to_frames: fps/duration missing for " + meta.video_id);

  std::vector<const WindowPrediction*> own;
  for (const auto& p : preds)
    if (p.video_id == meta.video_id) own.push_back(&p);
  std::sort(own.begin(), own.end(), [](const WindowPrediction* a, const WindowPrediction* b) {
    if (a->start_sec != b->start_sec) return a->start_sec < b->start_sec;
    return a->end_sec < b->end_sec;
  });

  std::vector<SegmentAnnotation> gt_segments;
  for (const auto& a : annotations)
    if (a.video_id == meta.video_id) gt_segments.push_back(a);
  gt_segments = resolve_overlaps(std::move(gt_segments));

  FrameSeries out;
  out.video_id = meta.video_id;
  out.fps = meta.fps;
  auto n_frames = static_cast<std::size_t>(std::llround(meta.duration_sec * meta.fps));
  out.gt.assign(n_frames, Label::none);
  out.pred.assign(n_frames, Label::none);

  std::size_t seg = 0;
  std::size_t first_candidate = 0;
  for (std::size_t i = 0; i < n_frames; ++i) {
    double t = (static_cast<double>(i) + 0.5) / meta.fps;

    while (seg < gt_segments.size() && gt_segments[seg].end_sec <= t) ++seg;
    if (seg < gt_segments.size() && gt_segments[seg].start_sec <= t)
      out.gt[i] = gt_segments[seg].label;

    // Windows are sorted by start, so ones ending before t never come back.
    while (first_candidate < own.size() && own[first_candidate]->end_sec <= t)
      ++first_candidate;
    const WindowPrediction* chosen = nullptr;
    double chosen_dist = 0.0;
    for (std::size_t w = first_candidate; w < own.size(); ++w) {
      const WindowPrediction* cand = own[w];
      if (cand->start_sec > t) break;
      if (t >= cand->end_sec) continue;
      if (rule == OverlapRule::latest_window) {
        chosen = cand;  // sorted ascending by start: the last hit wins
        continue;
      }
      double center = 0.5 * (cand->start_sec + cand->end_sec);
      double dist = std::abs(t - center);
      // tie -> earlier window, which the sort order already delivers
      if (!chosen || dist < chosen_dist) {
        chosen = cand;
        chosen_dist = dist;
      }
    }
    if (chosen) out.pred[i] = chosen->pred;
  }
  return out;
}

AccuracyReport frame_accuracy(const std::vector<FrameSeries>& series, FrameCountMode mode) {
  if (series.empty()) fail(Errc::empty_input, "frame_accuracy: no videos");

  AccuracyReport r;
  r.mode = mode;
  std::vector<double> per_video;
  for (const auto& s : series) {
    if (s.gt.size() != s.pred.size())
      fail(Errc::shape_mismatch, "frame_accuracy: gt/pred length mismatch for " + s.video_id);
    std::size_t counted = 0, correct = 0;
    for (std::size_t i = 0; i < s.gt.size(); ++i) {
      if (mode == FrameCountMode::annotated_only && s.gt[i] == Label::none) continue;
      ++counted;
      r.confusion[static_cast<int>(s.gt[i])][static_cast<int>(s.pred[i])] += 1;
      if (s.gt[i] == s.pred[i]) ++correct;
    }
    r.total_frames += counted;
    r.correct_frames += correct;
    if (counted > 0)
      per_video.push_back(static_cast<double>(correct) / static_cast<double>(counted));
  }
  r.num_videos = per_video.size();
  if (r.total_frames == 0) fail(Errc::empty_input, "frame_accuracy: no counted frames");
  r.overall = static_cast<double>(r.correct_frames) / static_cast<double>(r.total_frames);

  double mean = 0.0;
  for (double a : per_video) mean += a;
  mean /= static_cast<double>(per_video.size());
  double var = 0.0;
  for (double a : per_video) var += (a - mean) * (a - mean);
  var /= static_cast<double>(per_video.size());
  r.per_video_mean = mean;
  r.per_video_std = std::sqrt(var);
  return r;
}

ParsedLabel parse_decoder_output(const std::string& text) {
  std::string lower(text.size(), '\0');
  std::transform(text.begin(), text.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

  const std::string needle = "move ::";
  std::size_t pos = lower.rfind(needle);
  if (pos == std::string::npos) return {Label::none, false};
  std::size_t p = pos + needle.size();
  while (p < lower.size() && std::isspace(static_cast<unsigned char>(lower[p]))) ++p;
  std::size_t end = p;
  while (end < lower.size() && std::isalpha(static_cast<unsigned char>(lower[end]))) ++end;
  Label l;
  if (end > p && try_parse_label(lower.substr(p, end - p), l)) return {l, true};
  return {Label::none, false};
}

AccuracySummary format_accuracy_summary(const AccuracyReport& report) {
  AccuracySummary s;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", report.overall);
  s.overall = buf;
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", report.per_video_mean,
                report.per_video_std);
  s.per_video = buf;
  return s;
}

std::string format_mean_std(const std::vector<double>& values) {
  if (values.empty()) fail(Errc::empty_input, "format_mean_std: no runs");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f(%.2f)", mean * 100.0, std::sqrt(var) * 100.0);
  return buf;
}

std::map<std::string, std::string> aggregate_runs(
    const std::vector<std::map<std::string, double>>& runs) {
  if (runs.empty()) fail(Errc::empty_input, "aggregate_runs: no runs");
  for (const auto& r : runs) {
    if (r.size() != runs.front().size())
      fail(Errc::invalid_argument, "aggregate_runs: runs disagree on metric set");
    for (const auto& [k, v] : runs.front())
      if (!r.count(k)) fail(Errc::invalid_argument, "aggregate_runs: missing metric " + k);
  }
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : runs.front()) {
    std::vector<double> vals;
    vals.reserve(runs.size());
    for (const auto& r : runs) vals.push_back(r.at(k));
    out[k] = format_mean_std(vals);
  }
  return out;
}

}  // namespace movekit
