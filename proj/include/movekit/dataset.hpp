#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "movekit/common.hpp"

namespace movekit {

// The four window classes. Annotated segments only ever carry the first
// three; "none" marks spans without a move.
enum class Label : int { powermove = 0, footwork = 1, toprock = 2, none = 3 };

constexpr int kNumClasses = 4;

const char* label_name(Label l);
Label parse_label(const std::string& s);           // throws invalid_argument
bool try_parse_label(const std::string& s, Label& out);

struct SegmentAnnotation {
  std::string video_id;
  double start_sec = 0.0;
  double end_sec = 0.0;
  Label label = Label::none;  // never none in a valid annotation
};

struct VideoEmbeddings {
  std::string video_id;
  std::string encoder_name;
  std::size_t dim = 0;
  double fps = 0.0;
  double duration_sec = 0.0;
  double window_sec = 10.0;
  double stride_sec = 5.0;
  std::size_t num_sub = 1;
  // num_windows rows, each num_sub * dim doubles (sub-major).
  Mat rows;

  std::size_t num_windows() const { return rows.rows; }
  const double* window_data(std::size_t w) const { return rows.row(w); }
  double window_start(std::size_t w) const { return static_cast<double>(w) * stride_sec; }
  double window_end(std::size_t w) const { return window_start(w) + window_sec; }
};

struct EmbeddingDataset {
  std::size_t dim = 0;
  std::string encoder_name;
  std::vector<VideoEmbeddings> videos;
  std::vector<SegmentAnnotation> annotations;

  const VideoEmbeddings* find_video(const std::string& id) const;
  std::vector<const SegmentAnnotation*> annotations_for(const std::string& id) const;
};

struct LabeledWindow {
  std::string video_id;
  std::size_t index = 0;
  double start_sec = 0.0;
  double end_sec = 0.0;
  std::vector<double> embedding;
  Label label = Label::none;
};

enum class PoolMode { mean, max };

// num_windows = floor((duration - window) / stride) + 1
std::size_t derive_num_windows(double duration_sec, double window_sec, double stride_sec);

// Collapses num_sub sub-embeddings into one d-vector.
std::vector<double> pool_subembeddings(const double* rows, std::size_t num_sub,
                                       std::size_t dim, PoolMode mode);

// Clips overlapping annotations so earlier start wins; output is disjoint and
// sorted by start. Inputs must all belong to one video.
std::vector<SegmentAnnotation> resolve_overlaps(std::vector<SegmentAnnotation> anns);

// Largest-overlap label over [start, end), provided the overlap reaches
// min_coverage * (end - start); otherwise none. Ties break by label order.
Label assign_window_label(double start_sec, double end_sec,
                          const std::vector<SegmentAnnotation>& annotations,
                          double min_coverage);

std::vector<LabeledWindow> labeled_windows(const VideoEmbeddings& video,
                                           const std::vector<SegmentAnnotation>& annotations,
                                           double min_coverage, PoolMode pool);
std::vector<LabeledWindow> labeled_windows(const EmbeddingDataset& ds,
                                           double min_coverage, PoolMode pool);

// Binary tensor block: magic "EMB1", little-endian u32 rows/num_sub/cols,
// then rows*num_sub*cols float32, row-major. Also reused by checkpoints.
std::string encode_emb1(const Mat& rows, std::size_t num_sub, std::size_t dim);
void decode_emb1(const std::string& bytes, const std::string& where, Mat& rows,
                 std::size_t& num_sub, std::size_t& dim);

// Manifest + binary loading. See write_manifest for the on-disk layout.
EmbeddingDataset load_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const EmbeddingDataset& ds, const std::filesystem::path& manifest_path);

// Validates that every annotation references a loaded video, then adopts them.
void attach_annotations(EmbeddingDataset& ds, std::vector<SegmentAnnotation> anns);

std::vector<SegmentAnnotation> load_annotations(const std::filesystem::path& csv_path);
void write_annotations(const std::vector<SegmentAnnotation>& anns,
                       const std::filesystem::path& csv_path);

std::vector<std::string> load_split_file(const std::filesystem::path& path);
void write_split_file(const std::vector<std::string>& test_ids,
                      const std::filesystem::path& path);

struct SplitResult {
  EmbeddingDataset train;
  EmbeddingDataset test;
};

SplitResult split_train_test(const EmbeddingDataset& ds,
                             const std::vector<std::string>& test_ids);

// Synthetic dataset: classes 0..num_classes-1 drawn from unit-variance
// isotropic Gaussians whose means sit at mutual distance class_separation.
// Windows do not overlap (stride = window) so every window's assigned label
// equals its generating class; class 3 windows are left unannotated (none).
EmbeddingDataset gen_synthetic(int num_classes, std::size_t d, std::size_t videos,
                               std::size_t windows_per_video, double class_separation,
                               std::uint64_t seed);

}  // namespace movekit
