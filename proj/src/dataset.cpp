#include "movekit/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "movekit/simd.hpp"

namespace movekit {

namespace fs = std::filesystem;
using nlohmann::json;

const char* label_name(Label l) {
  switch (l) {
    case Label::powermove: return "powermove";
    case Label::footwork: return "footwork";
    case Label::toprock: return "toprock";
    case Label::none: return "none";
  }
  return "none";
}

bool try_parse_label(const std::string& s, Label& out) {
  std::string lower(s.size(), '\0');
  std::transform(s.begin(), s.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "powermove") { out = Label::powermove; return true; }
  if (lower == "footwork") { out = Label::footwork; return true; }
  if (lower == "toprock") { out = Label::toprock; return true; }
  if (lower == "none") { out = Label::none; return true; }
  return false;
}

Label parse_label(const std::string& s) {
  Label l;
  if (!try_parse_label(s, l)) fail(Errc::invalid_argument, "unknown label: " + s);
  return l;
}

const VideoEmbeddings* EmbeddingDataset::find_video(const std::string& id) const {
  for (const auto& v : videos)
    if (v.video_id == id) return &v;
  return nullptr;
}

std::vector<const SegmentAnnotation*> EmbeddingDataset::annotations_for(
    const std::string& id) const {
  std::vector<const SegmentAnnotation*> out;
  for (const auto& a : annotations)
    if (a.video_id == id) out.push_back(&a);
  return out;
}

std::size_t derive_num_windows(double duration_sec, double window_sec, double stride_sec) {
  if (window_sec <= 0.0 || stride_sec <= 0.0) return 0;
  double nw = std::floor((duration_sec - window_sec) / stride_sec) + 1.0;
  if (nw < 1.0) return 0;
  return static_cast<std::size_t>(nw);
}

std::vector<double> pool_subembeddings(const double* rows, std::size_t num_sub,
                                       std::size_t dim, PoolMode mode) {
  if (num_sub == 0 || dim == 0) fail(Errc::empty_input, "pool_subembeddings: empty input");
  std::vector<double> out(rows, rows + dim);
  if (mode == PoolMode::mean) {
    for (std::size_t s = 1; s < num_sub; ++s)
      simd::axpy(1.0, rows + s * dim, out.data(), dim);
    simd::scal(1.0 / static_cast<double>(num_sub), out.data(), dim);
  } else {
    for (std::size_t s = 1; s < num_sub; ++s)
      simd::max_inplace(rows + s * dim, out.data(), dim);
  }
  return out;
}

std::vector<SegmentAnnotation> resolve_overlaps(std::vector<SegmentAnnotation> anns) {
  std::sort(anns.begin(), anns.end(), [](const SegmentAnnotation& a, const SegmentAnnotation& b) {
    if (a.start_sec != b.start_sec) return a.start_sec < b.start_sec;
    if (a.end_sec != b.end_sec) return a.end_sec < b.end_sec;
    return static_cast<int>(a.label) < static_cast<int>(b.label);
  });
  std::vector<SegmentAnnotation> out;
  double covered_until = -1.0;
  for (auto& a : anns) {
    double s = std::max(a.start_sec, covered_until);
    if (s < a.end_sec) {
      SegmentAnnotation clipped = a;
      clipped.start_sec = s;
      out.push_back(clipped);
      covered_until = a.end_sec;
    }
    covered_until = std::max(covered_until, a.end_sec);
  }
  return out;
}

Label assign_window_label(double start_sec, double end_sec,
                          const std::vector<SegmentAnnotation>& annotations,
                          double min_coverage) {
  double window_len = end_sec - start_sec;
  if (window_len <= 0.0) return Label::none;
  double overlap[3] = {0.0, 0.0, 0.0};
  for (const auto& a : resolve_overlaps(annotations)) {
    double ov = std::min(end_sec, a.end_sec) - std::max(start_sec, a.start_sec);
    if (ov > 0.0) overlap[static_cast<int>(a.label)] += ov;
  }
  int best = 0;
  for (int k = 1; k < 3; ++k)
    if (overlap[k] > overlap[best]) best = k;
  if (overlap[best] <= 0.0 || overlap[best] < min_coverage * window_len) return Label::none;
  return static_cast<Label>(best);
}

std::vector<LabeledWindow> labeled_windows(const VideoEmbeddings& video,
                                           const std::vector<SegmentAnnotation>& annotations,
                                           double min_coverage, PoolMode pool) {
  std::vector<SegmentAnnotation> own;
  for (const auto& a : annotations)
    if (a.video_id == video.video_id) own.push_back(a);
  own = resolve_overlaps(std::move(own));

  std::vector<LabeledWindow> out;
  out.reserve(video.num_windows());
  for (std::size_t w = 0; w < video.num_windows(); ++w) {
    LabeledWindow lw;
    lw.video_id = video.video_id;
    lw.index = w;
    lw.start_sec = video.window_start(w);
    lw.end_sec = video.window_end(w);
    lw.embedding = pool_subembeddings(video.window_data(w), video.num_sub, video.dim, pool);
    lw.label = assign_window_label(lw.start_sec, lw.end_sec, own, min_coverage);
    out.push_back(std::move(lw));
  }
  return out;
}

std::vector<LabeledWindow> labeled_windows(const EmbeddingDataset& ds,
                                           double min_coverage, PoolMode pool) {
  std::vector<LabeledWindow> out;
  for (const auto& v : ds.videos) {
    auto ws = labeled_windows(v, ds.annotations, min_coverage, pool);
    out.insert(out.end(), std::make_move_iterator(ws.begin()),
               std::make_move_iterator(ws.end()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};

void put_u32(std::string& buf, std::uint32_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
  buf.push_back(static_cast<char>((v >> 16) & 0xff));
  buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32(std::string& buf, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(buf, bits);
}

float get_f32(const unsigned char* p) {
  std::uint32_t bits = get_u32(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

std::string read_file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(Errc::missing_file, "cannot open file: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write file: " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::io_error, "write failed: " + p.string());
}

}  // namespace

std::string encode_emb1(const Mat& rows, std::size_t num_sub, std::size_t dim) {
  std::string buf;
  buf.reserve(16 + rows.size() * 4);
  buf.append(kMagic, 4);
  put_u32(buf, static_cast<std::uint32_t>(rows.rows));
  put_u32(buf, static_cast<std::uint32_t>(num_sub));
  put_u32(buf, static_cast<std::uint32_t>(dim));
  for (double v : rows.data) put_f32(buf, static_cast<float>(v));
  return buf;
}

void decode_emb1(const std::string& bytes, const std::string& where, Mat& rows,
                 std::size_t& num_sub, std::size_t& dim) {
  if (bytes.size() < 16) fail(Errc::bad_magic, where + ": file too short");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(Errc::bad_magic, where + ": bad magic bytes");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  std::size_t n_rows = get_u32(p + 4);
  num_sub = get_u32(p + 8);
  dim = get_u32(p + 12);
  std::size_t count = n_rows * num_sub * dim;
  if (bytes.size() != 16 + count * 4)
    fail(Errc::io_error, where + ": payload size does not match header");
  rows = Mat(n_rows, num_sub * dim);
  for (std::size_t i = 0; i < count; ++i) {
    double v = static_cast<double>(get_f32(p + 16 + i * 4));
    if (!std::isfinite(v)) fail(Errc::non_finite_value, where + ": non-finite embedding value");
    rows.data[i] = v;
  }
}

EmbeddingDataset load_manifest(const fs::path& manifest_path) {
  if (!fs::exists(manifest_path))
    fail(Errc::missing_file, "manifest not found: " + manifest_path.string());
  json m;
  try {
    std::ifstream in(manifest_path);
    in >> m;
  } catch (const std::exception& e) {
    fail(Errc::io_error, "manifest parse error: " + std::string(e.what()));
  }

  EmbeddingDataset ds;
  try {
    ds.dim = m.at("dim").get<std::size_t>();
    ds.encoder_name = m.at("encoder").get<std::string>();
    if (ds.dim == 0) fail(Errc::io_error, "manifest dim must be positive");
    fs::path base = manifest_path.parent_path();
    for (const auto& jv : m.at("videos")) {
      VideoEmbeddings v;
      v.video_id = jv.at("id").get<std::string>();
      v.encoder_name = ds.encoder_name;
      v.dim = ds.dim;
      v.fps = jv.at("fps").get<double>();
      v.duration_sec = jv.at("duration_sec").get<double>();
      v.window_sec = jv.value("window_sec", 10.0);
      v.stride_sec = jv.value("stride_sec", 5.0);
      v.num_sub = jv.value("num_sub", std::size_t{1});
      if (v.fps <= 0.0 || v.duration_sec <= 0.0 || v.window_sec <= 0.0 || v.stride_sec <= 0.0)
        fail(Errc::io_error, "manifest video " + v.video_id + ": non-positive meta field");
      if (v.num_sub == 0)
        fail(Errc::io_error, "manifest video " + v.video_id + ": num_sub must be >= 1");

      fs::path emb = base / jv.at("embeddings_file").get<std::string>();
      if (!fs::exists(emb))
        fail(Errc::missing_file, "embeddings file not found: " + emb.string());
      std::size_t file_sub = 0, file_dim = 0;
      decode_emb1(read_file_bytes(emb), emb.string(), v.rows, file_sub, file_dim);
      if (file_dim != ds.dim)
        fail(Errc::dim_mismatch, v.video_id + ": manifest dim " + std::to_string(ds.dim) +
                                     " but file cols " + std::to_string(file_dim));
      if (file_sub != v.num_sub)
        fail(Errc::dim_mismatch, v.video_id + ": manifest num_sub " + std::to_string(v.num_sub) +
                                     " but file num_sub " + std::to_string(file_sub));
      std::size_t expect = derive_num_windows(v.duration_sec, v.window_sec, v.stride_sec);
      if (expect == 0)
        fail(Errc::window_count_mismatch, v.video_id + ": duration shorter than one window");
      if (v.rows.rows != expect)
        fail(Errc::window_count_mismatch,
             v.video_id + ": file has " + std::to_string(v.rows.rows) + " windows, expected " +
                 std::to_string(expect));
      ds.videos.push_back(std::move(v));
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(Errc::io_error, "manifest schema error: " + std::string(e.what()));
  }
  return ds;
}

void write_manifest(const EmbeddingDataset& ds, const fs::path& manifest_path) {
  fs::path base = manifest_path.parent_path();
  if (!base.empty()) fs::create_directories(base);
  json m;
  m["dim"] = ds.dim;
  m["encoder"] = ds.encoder_name;
  m["videos"] = json::array();
  for (const auto& v : ds.videos) {
    std::string fname = v.video_id + ".emb";
    write_file_bytes(base / fname, encode_emb1(v.rows, v.num_sub, v.dim));
    m["videos"].push_back({{"id", v.video_id},
                           {"fps", v.fps},
                           {"duration_sec", v.duration_sec},
                           {"window_sec", v.window_sec},
                           {"stride_sec", v.stride_sec},
                           {"num_sub", v.num_sub},
                           {"embeddings_file", fname}});
  }
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write manifest: " + manifest_path.string());
  out << m.dump(2) << "\n";
}

std::vector<SegmentAnnotation> load_annotations(const fs::path& csv_path) {
  if (!fs::exists(csv_path))
    fail(Errc::missing_file, "annotations not found: " + csv_path.string());
  std::ifstream in(csv_path);
  std::string line;
  if (!std::getline(in, line)) fail(Errc::io_error, "annotations file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "video_id,start_sec,end_sec,label")
    fail(Errc::io_error, "annotations header mismatch: " + line);

  std::vector<SegmentAnnotation> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string, 4> fields;
    std::size_t field = 0, pos = 0;
    for (; field < 4; ++field) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) {
        fields[field] = line.substr(pos);
        pos = line.size();
        ++field;
        break;
      }
      fields[field] = line.substr(pos, comma - pos);
      pos = comma + 1;
    }
    if (field != 4 || pos != line.size())
      fail(Errc::io_error, "annotations line " + std::to_string(lineno) + ": expected 4 fields");
    SegmentAnnotation a;
    a.video_id = fields[0];
    try {
      a.start_sec = std::stod(fields[1]);
      a.end_sec = std::stod(fields[2]);
    } catch (const std::exception&) {
      fail(Errc::io_error, "annotations line " + std::to_string(lineno) + ": bad number");
    }
    if (!(a.end_sec > a.start_sec) || a.start_sec < 0.0)
      fail(Errc::io_error, "annotations line " + std::to_string(lineno) + ": bad segment span");
    a.label = parse_label(fields[3]);
    if (a.label == Label::none)
      fail(Errc::io_error,
           "annotations line " + std::to_string(lineno) + ": 'none' is not an annotated move");
    out.push_back(std::move(a));
  }
  return out;
}

void write_annotations(const std::vector<SegmentAnnotation>& anns, const fs::path& csv_path) {
  std::ofstream out(csv_path, std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write annotations: " + csv_path.string());
  out << "video_id,start_sec,end_sec,label\n";
  out.precision(17);
  for (const auto& a : anns)
    out << a.video_id << ',' << a.start_sec << ',' << a.end_sec << ',' << label_name(a.label)
        << '\n';
}

std::vector<std::string> load_split_file(const fs::path& path) {
  if (!fs::exists(path)) fail(Errc::missing_file, "split file not found: " + path.string());
  std::ifstream in(path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    std::size_t e = line.find_last_not_of(" \t");
    line = line.substr(b, e - b + 1);
    if (line.empty() || line[0] == '#') continue;
    ids.push_back(line);
  }
  return ids;
}

void write_split_file(const std::vector<std::string>& test_ids, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write split file: " + path.string());
  out << "# test video ids\n";
  for (const auto& id : test_ids) out << id << '\n';
}

void attach_annotations(EmbeddingDataset& ds, std::vector<SegmentAnnotation> anns) {
  for (const auto& a : anns) {
    if (!ds.find_video(a.video_id))
      fail(Errc::unknown_video_id, "annotation references unknown video: " + a.video_id);
  }
  ds.annotations = std::move(anns);
}

SplitResult split_train_test(const EmbeddingDataset& ds,
                             const std::vector<std::string>& test_ids) {
  for (const auto& id : test_ids)
    if (!ds.find_video(id)) fail(Errc::unknown_video_id, "test id not in dataset: " + id);

  auto is_test = [&](const std::string& id) {
    return std::find(test_ids.begin(), test_ids.end(), id) != test_ids.end();
  };

  SplitResult r;
  r.train.dim = r.test.dim = ds.dim;
  r.train.encoder_name = r.test.encoder_name = ds.encoder_name;
  for (const auto& v : ds.videos) (is_test(v.video_id) ? r.test : r.train).videos.push_back(v);
  for (const auto& a : ds.annotations)
    (is_test(a.video_id) ? r.test : r.train).annotations.push_back(a);
  return r;
}

EmbeddingDataset gen_synthetic(int num_classes, std::size_t d, std::size_t videos,
                               std::size_t windows_per_video, double class_separation,
                               std::uint64_t seed) {
  if (num_classes < 1 || num_classes > kNumClasses)
    fail(Errc::invalid_argument, "num_classes must be in [1, 4]");
  if (d < static_cast<std::size_t>(num_classes))
    fail(Errc::invalid_argument, "d must be >= num_classes");
  if (videos == 0 || windows_per_video == 0)
    fail(Errc::invalid_argument, "videos and windows_per_video must be positive");
  if (class_separation < 0.0) fail(Errc::invalid_argument, "class_separation must be >= 0");

  const double window_sec = 10.0;
  // Means sit on scaled basis vectors; |e_i - e_j| = sqrt(2), so this scale
  // puts every pair of means exactly class_separation apart.
  const double mean_scale = class_separation / std::sqrt(2.0);

  Rng rng(substream_seed(seed, "synth"));
  EmbeddingDataset ds;
  ds.dim = d;
  ds.encoder_name = "synthetic";

  for (std::size_t v = 0; v < videos; ++v) {
    VideoEmbeddings ve;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth_%03zu", v);
    ve.video_id = buf;
    ve.encoder_name = ds.encoder_name;
    ve.dim = d;
    ve.fps = 25.0;
    ve.window_sec = window_sec;
    ve.stride_sec = window_sec;  // non-overlapping: window label == generating class
    ve.duration_sec = window_sec * static_cast<double>(windows_per_video);
    ve.num_sub = 1;
    ve.rows = Mat(windows_per_video, d);
    for (std::size_t w = 0; w < windows_per_video; ++w) {
      int cls = static_cast<int>(rng.index(static_cast<std::size_t>(num_classes)));
      double* row = ve.rows.row(w);
      for (std::size_t j = 0; j < d; ++j) row[j] = rng.normal();
      row[cls] += mean_scale;
      if (cls != static_cast<int>(Label::none)) {
        SegmentAnnotation a;
        a.video_id = ve.video_id;
        a.start_sec = window_sec * static_cast<double>(w);
        a.end_sec = a.start_sec + window_sec;
        a.label = static_cast<Label>(cls);
        ds.annotations.push_back(std::move(a));
      }
    }
    ds.videos.push_back(std::move(ve));
  }
  return ds;
}

}  // namespace movekit
