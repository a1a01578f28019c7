#include "movekit/head.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "movekit/simd.hpp"

namespace movekit {

using nlohmann::json;

namespace {

void validate(const HeadConfig& cfg) {
  if (cfg.d == 0) fail(Errc::invalid_argument, "head: d must be positive");
  if (cfg.n_h < 0 || cfg.n_c < 0) fail(Errc::invalid_argument, "head: n_h/n_c must be >= 0");
  if (cfg.scale < 1.0) fail(Errc::invalid_argument, "head: scale must be >= 1");
}

}  // namespace

std::vector<std::size_t> classifier_widths(const HeadConfig& cfg) {
  validate(cfg);
  std::vector<std::size_t> w;
  w.push_back(cfg.d);
  for (int k = 0; k < cfg.n_c; ++k) {
    auto next = static_cast<std::size_t>(
        std::floor(static_cast<double>(w.back()) / cfg.scale));
    w.push_back(std::max<std::size_t>(kNumClasses, next));
  }
  w.push_back(kNumClasses);
  return w;
}

HeadParams HeadParams::zeros_like(const HeadConfig& cfg) {
  HeadParams p;
  p.config = cfg;
  for (int i = 0; i < cfg.n_h; ++i)
    p.fm_blocks.push_back({Mat(cfg.d, cfg.d), std::vector<double>(cfg.d, 0.0)});
  auto widths = classifier_widths(cfg);
  for (std::size_t k = 0; k + 1 < widths.size(); ++k)
    p.classifier.push_back({Mat(widths[k + 1], widths[k]),
                            std::vector<double>(widths[k + 1], 0.0)});
  return p;
}

std::size_t HeadParams::num_params() const {
  std::size_t n = 0;
  for_each_tensor([&](const double*, std::size_t len) { n += len; });
  return n;
}

HeadParams init_head(const HeadConfig& cfg) {
  HeadParams p = HeadParams::zeros_like(cfg);
  Rng rng(substream_seed(cfg.seed, "init"));
  auto glorot = [&](Layer& l) {
    double limit = std::sqrt(6.0 / static_cast<double>(l.w.rows + l.w.cols));
    for (double& v : l.w.data) v = rng.uniform(-limit, limit);
  };
  for (auto& l : p.fm_blocks) glorot(l);
  for (auto& l : p.classifier) glorot(l);
  return p;
}

std::vector<double> fm_forward(const HeadParams& p, const std::vector<double>& x) {
  if (x.size() != p.config.d) fail(Errc::shape_mismatch, "fm_forward: bad input dim");
  std::size_t d = p.config.d;
  std::vector<double> cur = x;
  std::vector<double> pre(d);
  std::vector<double> act(d);
  for (const Layer& l : p.fm_blocks) {
    simd::matvec(l.w.data.data(), cur.data(), pre.data(), d, d);
    simd::axpy(1.0, l.b.data(), pre.data(), d);
    simd::relu(pre.data(), act.data(), d);
    simd::axpy(1.0, act.data(), cur.data(), d);
  }
  if (p.config.global_residual && !p.fm_blocks.empty())
    simd::axpy(1.0, x.data(), cur.data(), d);
  return cur;
}

std::vector<double> classifier_forward(const HeadParams& p, const std::vector<double>& z) {
  auto widths = classifier_widths(p.config);
  if (z.size() != widths[0]) fail(Errc::shape_mismatch, "classifier_forward: bad input dim");
  std::vector<double> cur = z;
  std::vector<double> next;
  for (std::size_t k = 0; k < p.classifier.size(); ++k) {
    const Layer& l = p.classifier[k];
    next.assign(l.w.rows, 0.0);
    simd::matvec(l.w.data.data(), cur.data(), next.data(), l.w.rows, l.w.cols);
    simd::axpy(1.0, l.b.data(), next.data(), l.w.rows);
    if (k + 1 < p.classifier.size()) simd::relu(next.data(), next.data(), l.w.rows);
    cur.swap(next);
  }
  return cur;
}

ForwardCache forward_cached(const HeadParams& p, const std::vector<double>& x) {
  if (x.size() != p.config.d) fail(Errc::shape_mismatch, "fm_forward: bad input dim");
  ForwardCache c;
  std::vector<double> cur = x;
  std::vector<double> pre(p.config.d);
  std::vector<double> act(p.config.d);
  for (const Layer& l : p.fm_blocks) {
    c.fm_in.push_back(cur);
    simd::matvec(l.w.data.data(), cur.data(), pre.data(), l.w.rows, l.w.cols);
    simd::axpy(1.0, l.b.data(), pre.data(), l.w.rows);
    c.fm_pre.push_back(pre);
    simd::relu(pre.data(), act.data(), p.config.d);
    simd::axpy(1.0, act.data(), cur.data(), p.config.d);
  }
  if (p.config.global_residual && !p.fm_blocks.empty())
    simd::axpy(1.0, x.data(), cur.data(), p.config.d);
  c.fm_out = cur;

  for (std::size_t k = 0; k < p.classifier.size(); ++k) {
    const Layer& l = p.classifier[k];
    c.cls_in.push_back(cur);
    std::vector<double> zpre(l.w.rows, 0.0);
    simd::matvec(l.w.data.data(), cur.data(), zpre.data(), l.w.rows, l.w.cols);
    simd::axpy(1.0, l.b.data(), zpre.data(), l.w.rows);
    c.cls_pre.push_back(zpre);
    if (k + 1 < p.classifier.size()) {
      cur.assign(l.w.rows, 0.0);
      simd::relu(zpre.data(), cur.data(), l.w.rows);
    } else {
      cur = zpre;
    }
  }
  c.logits = cur;
  return c;
}

int argmax_index(const double* v, std::size_t n) {
  int best = 0;
  for (std::size_t k = 1; k < n; ++k)
    if (v[k] > v[best]) best = static_cast<int>(k);
  return best;
}

Label predict(const HeadParams& p, const std::vector<double>& x) {
  ForwardCache c = forward_cached(p, x);
  return static_cast<Label>(argmax_index(c.logits.data(), c.logits.size()));
}

void classifier_backward(const HeadParams& p, const ForwardCache& cache,
                         const double* dlogits, HeadParams& grads, double* dz) {
  std::size_t n_layers = p.classifier.size();
  std::vector<double> g(dlogits, dlogits + kNumClasses);
  std::vector<double> gprev;
  for (std::size_t k = n_layers; k-- > 0;) {
    const Layer& l = p.classifier[k];
    Layer& gl = grads.classifier[k];
    // dW += g x^T, db += g
    simd::ger(1.0, g.data(), cache.cls_in[k].data(), gl.w.data.data(), l.w.rows, l.w.cols);
    simd::axpy(1.0, g.data(), gl.b.data(), l.w.rows);
    gprev.assign(l.w.cols, 0.0);
    simd::matvec_t(l.w.data.data(), g.data(), gprev.data(), l.w.rows, l.w.cols);
    if (k > 0) {
      // propagate through the preceding layer's relu
      g.resize(gprev.size());
      simd::relu_mask_mul(cache.cls_pre[k - 1].data(), gprev.data(), g.data(), gprev.size());
    } else {
      g = gprev;
    }
  }
  for (std::size_t j = 0; j < p.config.d; ++j) dz[j] = g[j];
}

void fm_backward(const HeadParams& p, const ForwardCache& cache, const double* dz,
                 HeadParams& grads) {
  std::size_t d = p.config.d;
  std::vector<double> g(dz, dz + d);
  std::vector<double> masked(d);
  std::vector<double> back(d);
  // The global skip feeds the input straight to the output; nothing upstream
  // of the blocks is trainable, so it contributes no parameter gradient.
  for (std::size_t k = p.fm_blocks.size(); k-- > 0;) {
    const Layer& l = p.fm_blocks[k];
    Layer& gl = grads.fm_blocks[k];
    simd::relu_mask_mul(cache.fm_pre[k].data(), g.data(), masked.data(), d);
    simd::ger(1.0, masked.data(), cache.fm_in[k].data(), gl.w.data.data(), d, d);
    simd::axpy(1.0, masked.data(), gl.b.data(), d);
    simd::matvec_t(l.w.data.data(), masked.data(), back.data(), d, d);
    simd::axpy(1.0, back.data(), g.data(), d);  // residual path
  }
}

void save_checkpoint(const std::filesystem::path& path, const HeadParams& params,
                     int epoch) {
  const HeadConfig& cfg = params.config;
  json hdr = {{"format", "movekit-checkpoint-v1"},
              {"epoch", epoch},
              {"config",
               {{"d", cfg.d},
                {"n_h", cfg.n_h},
                {"n_c", cfg.n_c},
                {"scale", cfg.scale},
                {"seed", cfg.seed},
                {"global_residual", cfg.global_residual}}}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write checkpoint: " + path.string());
  out << hdr.dump() << "\n";
  auto write_block = [&](const double* data, std::size_t rows, std::size_t cols) {
    Mat m(rows, cols);
    std::copy(data, data + rows * cols, m.data.begin());
    std::string bytes = encode_emb1(m, 1, cols);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  };
  for (const auto& l : params.fm_blocks) {
    write_block(l.w.data.data(), l.w.rows, l.w.cols);
    write_block(l.b.data(), 1, l.b.size());
  }
  for (const auto& l : params.classifier) {
    write_block(l.w.data.data(), l.w.rows, l.w.cols);
    write_block(l.b.data(), 1, l.b.size());
  }
  if (!out) fail(Errc::io_error, "checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::missing_file, "checkpoint not found: " + path.string());
  std::string header_line;
  if (!std::getline(in, header_line)) fail(Errc::io_error, "checkpoint missing header");
  json hdr;
  try {
    hdr = json::parse(header_line);
  } catch (const std::exception& e) {
    fail(Errc::io_error, "checkpoint header parse error: " + std::string(e.what()));
  }
  if (hdr.value("format", "") != std::string("movekit-checkpoint-v1"))
    fail(Errc::bad_magic, "not a movekit checkpoint: " + path.string());

  Checkpoint ck;
  ck.epoch = hdr.value("epoch", 0);
  HeadConfig cfg;
  const json& jc = hdr.at("config");
  cfg.d = jc.at("d").get<std::size_t>();
  cfg.n_h = jc.at("n_h").get<int>();
  cfg.n_c = jc.at("n_c").get<int>();
  cfg.scale = jc.at("scale").get<double>();
  cfg.seed = jc.at("seed").get<std::uint64_t>();
  cfg.global_residual = jc.value("global_residual", false);
  ck.params = HeadParams::zeros_like(cfg);

  std::ostringstream rest;
  rest << in.rdbuf();
  std::string bytes = rest.str();
  std::size_t pos = 0;
  auto read_block = [&](double* data, std::size_t rows, std::size_t cols) {
    std::size_t need = 16 + rows * cols * 4;
    if (pos + need > bytes.size()) fail(Errc::io_error, "checkpoint truncated");
    Mat m;
    std::size_t sub = 0, dim = 0;
    decode_emb1(bytes.substr(pos, need), path.string(), m, sub, dim);
    if (m.rows != rows || dim != cols)
      fail(Errc::shape_mismatch, "checkpoint tensor shape mismatch");
    std::copy(m.data.begin(), m.data.end(), data);
    pos += need;
  };
  for (auto& l : ck.params.fm_blocks) {
    read_block(l.w.data.data(), l.w.rows, l.w.cols);
    read_block(l.b.data(), 1, l.b.size());
  }
  for (auto& l : ck.params.classifier) {
    read_block(l.w.data.data(), l.w.rows, l.w.cols);
    read_block(l.b.data(), 1, l.b.size());
  }
  if (pos != bytes.size()) fail(Errc::io_error, "checkpoint has trailing bytes");
  return ck;
}

}  // namespace movekit
