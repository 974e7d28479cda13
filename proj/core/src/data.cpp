#include "tea/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "tea/rng.hpp"

namespace tea {

using nlohmann::json;

void SyntheticDataSpec::validate() const {
  if (classes != 4) throw ValueError("data: the motion task has exactly 4 classes");
  if (frames_raw <= 0 || height <= 0 || width <= 0 || channels <= 0)
    throw ValueError("data: bad clip geometry");
  if (sprite <= 0 || sprite > std::min(height, width))
    throw ValueError("data: sprite does not fit the frame");
  if (speed < 0.0) throw ValueError("data: negative speed");
  if (noise < 0.0) throw ValueError("data: negative noise");
}

namespace {

// class -> unit direction (dy, dx); y grows downward
constexpr int kDir[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};

// smooth fixed bump, peak 1 at the sprite centre
double sprite_value(int u, int v, int side) {
  const double cu = (side - 1) / 2.0, cv = (side - 1) / 2.0;
  const double du = (u - cu) / (0.6 * side), dv = (v - cv) / (0.6 * side);
  return std::exp(-(du * du + dv * dv) * 4.0);
}

}  // namespace

std::vector<ClipRecord> generate_dataset(const SyntheticDataSpec& spec, int per_class) {
  spec.validate();
  if (per_class <= 0) throw ValueError("data: per_class must be positive");
  std::vector<ClipRecord> out;
  out.reserve(static_cast<std::size_t>(per_class) * spec.classes);
  const int T = spec.frames_raw, C = spec.channels, H = spec.height, W = spec.width;

  for (int label = 0; label < spec.classes; ++label)
    for (int idx = 0; idx < per_class; ++idx) {
      // every appearance draw depends only on (seed, idx): matched clips of
      // different classes differ in motion alone
      std::mt19937 rng = make_rng(mix_seed(spec.seed, static_cast<std::uint64_t>(idx)));
      std::uniform_int_distribution<int> px(0, W - 1), py(0, H - 1);
      std::uniform_real_distribution<double> tint(0.5, 1.0), un(0.0, 1.0);
      const int x0 = px(rng), y0 = py(rng);
      double color[3] = {1.0, 1.0, 1.0};
      for (int c = 0; c < std::min(C, 3); ++c) color[c] = tint(rng);

      ClipRecord rec;
      rec.label = label;
      rec.clip_id = label * per_class + idx;
      rec.frames = Tensor::zeros({T, C, H, W});
      float* F = rec.frames.ptr();
      const std::int64_t plane = static_cast<std::int64_t>(H) * W;

      for (int t = 0; t < T; ++t) {
        const int dy = static_cast<int>(std::lround(t * spec.speed)) * kDir[label][0];
        const int dx = static_cast<int>(std::lround(t * spec.speed)) * kDir[label][1];
        const int sy = ((y0 + dy) % H + H) % H;
        const int sx = ((x0 + dx) % W + W) % W;
        for (int c = 0; c < C; ++c) {
          float* fp = F + (static_cast<std::int64_t>(t) * C + c) * plane;
          for (int u = 0; u < spec.sprite; ++u)
            for (int v = 0; v < spec.sprite; ++v) {
              const int yy = (sy + u) % H, xx = (sx + v) % W;
              fp[static_cast<std::int64_t>(yy) * W + xx] += static_cast<float>(
                  color[std::min(c, 2)] * sprite_value(u, v, spec.sprite));
            }
        }
        if (spec.noise > 0.0)
          for (int c = 0; c < C; ++c) {
            float* fp = F + (static_cast<std::int64_t>(t) * C + c) * plane;
            for (std::int64_t i = 0; i < plane; ++i)
              fp[i] += static_cast<float>(spec.noise * un(rng));
          }
      }
      for (std::int64_t i = 0; i < rec.frames.numel(); ++i)
        F[i] = std::clamp(F[i], 0.0f, 1.0f);
      out.push_back(std::move(rec));
    }
  return out;
}

// ---------------------------------------------------------------------------
// sparse sampling
// ---------------------------------------------------------------------------

std::vector<int> sparse_sample_indices(int t_raw, int t_out, SampleMode mode,
                                       std::mt19937* rng) {
  if (t_raw <= 0 || t_out <= 0) throw ValueError("sparse_sample: frame counts must be positive");
  if (mode == SampleMode::Train && !rng)
    throw ValueError("sparse_sample: train mode needs an rng");
  std::vector<int> idx(static_cast<std::size_t>(t_out));
  for (int i = 0; i < t_out; ++i) {
    const int s = static_cast<int>((static_cast<std::int64_t>(i) * t_raw) / t_out);
    const int e = static_cast<int>((static_cast<std::int64_t>(i + 1) * t_raw) / t_out);
    if (e <= s) {
      idx[i] = s > 0 ? s - 1 : 0;
      continue;
    }
    if (mode == SampleMode::Test) {
      idx[i] = s + (e - s) / 2;
    } else {
      std::uniform_int_distribution<int> d(s, e - 1);
      idx[i] = d(*rng);
    }
  }
  return idx;
}

Tensor sparse_sample(const Tensor& frames, int t_out, SampleMode mode, std::mt19937* rng) {
  if (frames.ndim() != 4)
    throw ShapeError("sparse_sample: expected [T,C,H,W] clip, got " + shape_str(frames.shape));
  const int T = frames.shape[0], C = frames.shape[1], H = frames.shape[2], W = frames.shape[3];
  const std::vector<int> idx = sparse_sample_indices(T, t_out, mode, rng);
  Tensor out = Tensor::zeros({t_out, C, H, W});
  const std::int64_t frame = static_cast<std::int64_t>(C) * H * W;
  for (int i = 0; i < t_out; ++i)
    std::copy_n(frames.ptr() + static_cast<std::int64_t>(idx[i]) * frame, frame,
                out.ptr() + static_cast<std::int64_t>(i) * frame);
  return out;
}

Tensor center_crop(const Tensor& frames, int h, int w) {
  if (frames.ndim() != 4)
    throw ShapeError("center_crop: expected [T,C,H,W] clip");
  const int T = frames.shape[0], C = frames.shape[1], H = frames.shape[2], W = frames.shape[3];
  if (h > H || w > W) throw ShapeError("center_crop: target larger than clip");
  if (h == H && w == W) return frames;
  const int oy = (H - h) / 2, ox = (W - w) / 2;
  Tensor out = Tensor::zeros({T, C, h, w});
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < h; ++y)
        std::copy_n(frames.ptr() + ((static_cast<std::int64_t>(t) * C + c) * H + oy + y) * W + ox,
                    w,
                    out.ptr() + ((static_cast<std::int64_t>(t) * C + c) * h + y) * w);
  return out;
}

Tensor stack_clips(const std::vector<Tensor>& clips) {
  if (clips.empty()) throw ValueError("stack_clips: empty batch");
  const Shape& s = clips[0].shape;
  if (s.size() != 4) throw ShapeError("stack_clips: clips must be [T,C,H,W]");
  Tensor out = Tensor::zeros({static_cast<int>(clips.size()), s[0], s[1], s[2], s[3]});
  const std::int64_t clip_elems = clips[0].numel();
  for (std::size_t n = 0; n < clips.size(); ++n) {
    if (clips[n].shape != s) throw ShapeError("stack_clips: mixed clip shapes");
    std::copy_n(clips[n].ptr(), clip_elems, out.ptr() + static_cast<std::int64_t>(n) * clip_elems);
  }
  return out;
}

// ---------------------------------------------------------------------------
// clip files
// ---------------------------------------------------------------------------

namespace {
constexpr char kClipMagic[4] = {'T', 'E', 'A', 'C'};

void wr_u32(std::ofstream& f, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  f.write(b, 4);
}

std::uint32_t rd_u32(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (f.gcount() != 4) throw TruncatedFileError("clip: truncated header in '" + path + "'");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
}  // namespace

void write_clip(const std::string& path, const ClipRecord& clip) {
  if (clip.frames.ndim() != 4) throw ShapeError("write_clip: frames must be [T,C,H,W]");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("clip: cannot open '" + path + "' for writing");
  f.write(kClipMagic, 4);
  wr_u32(f, kClipVersion);
  wr_u32(f, static_cast<std::uint32_t>(clip.label));
  for (int d : clip.frames.shape) wr_u32(f, static_cast<std::uint32_t>(d));
  f.write(reinterpret_cast<const char*>(clip.frames.ptr()),
          static_cast<std::streamsize>(clip.frames.numel() * sizeof(float)));
  if (!f) throw IoError("clip: short write to '" + path + "'");
}

ClipRecord read_clip(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("clip: cannot open '" + path + "'");
  char magic[4];
  f.read(magic, 4);
  if (f.gcount() != 4) throw TruncatedFileError("clip: truncated header in '" + path + "'");
  if (std::memcmp(magic, kClipMagic, 4) != 0)
    throw BadMagicError("clip: bad magic in '" + path + "'");
  const std::uint32_t version = rd_u32(f, path);
  if (version != kClipVersion)
    throw VersionError("clip: unsupported version " + std::to_string(version) + " in '" +
                       path + "'");
  ClipRecord rec;
  rec.label = static_cast<int>(rd_u32(f, path));
  Shape shape(4);
  std::int64_t count = 1;
  for (int i = 0; i < 4; ++i) {
    shape[i] = static_cast<int>(rd_u32(f, path));
    if (shape[i] <= 0) throw ValueError("clip: non-positive dimension in '" + path + "'");
    count *= shape[i];
  }
  rec.frames = Tensor::zeros(shape);
  f.read(reinterpret_cast<char*>(rec.frames.ptr()),
         static_cast<std::streamsize>(count * sizeof(float)));
  if (f.gcount() != static_cast<std::streamsize>(count * sizeof(float)))
    throw TruncatedFileError("clip: payload ends early in '" + path + "'");
  return rec;
}

// ---------------------------------------------------------------------------
// manifests
// ---------------------------------------------------------------------------

std::string manifest_json(const std::vector<ManifestEntry>& entries) {
  json j = json::array();
  for (const auto& e : entries)
    j.push_back({{"path", e.path}, {"label", e.label}, {"clip_id", e.clip_id}});
  return j.dump(2);
}

std::vector<ManifestEntry> write_dataset(const std::string& dir,
                                         const std::vector<ClipRecord>& clips) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<ManifestEntry> entries;
  for (const auto& clip : clips) {
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%05d.teac", clip.clip_id);
    write_clip((fs::path(dir) / name).string(), clip);
    entries.push_back(ManifestEntry{name, clip.label, clip.clip_id});
  }
  std::ofstream mf(fs::path(dir) / "manifest.json", std::ios::trunc);
  if (!mf) throw IoError("manifest: cannot write to '" + dir + "'");
  mf << manifest_json(entries) << "\n";
  return entries;
}

std::vector<ManifestEntry> read_manifest(const std::string& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw IoError("manifest: cannot open '" + manifest_path + "'");
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw ValueError(std::string("manifest: invalid JSON: ") + e.what());
  }
  if (!j.is_array()) throw ValueError("manifest: top-level value must be an array");
  std::vector<ManifestEntry> entries;
  for (const json& e : j) {
    try {
      entries.push_back(ManifestEntry{e.at("path").get<std::string>(),
                                      e.at("label").get<int>(),
                                      e.at("clip_id").get<int>()});
    } catch (const json::exception& ex) {
      throw ValueError(std::string("manifest: bad entry: ") + ex.what());
    }
  }
  return entries;
}

// ---------------------------------------------------------------------------
// linear probe
// ---------------------------------------------------------------------------

double linear_probe_accuracy(const std::vector<ClipRecord>& train,
                             const std::vector<ClipRecord>& val, int classes,
                             std::uint64_t seed) {
  if (train.empty() || val.empty()) throw ValueError("linear_probe: empty split");
  const Tensor& f0 = train[0].frames;
  const int T = f0.shape[0];
  const std::int64_t dim = f0.numel() / T;

  auto features = [&](const ClipRecord& r) {
    const float* p = r.frames.ptr() + (r.frames.shape[0] / 2) * dim;
    return p;  // centre frame, raw pixels
  };

  std::vector<double> Wm(static_cast<std::size_t>(classes) * dim, 0.0);
  std::vector<double> b(classes, 0.0);
  std::mt19937 rng = make_rng(mix_seed(seed, 0x11beULL));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const double lr = 0.05;
  std::vector<double> logits(classes), probs(classes);
  for (int epoch = 0; epoch < 60; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t oi : order) {
      const float* x = features(train[oi]);
      for (int k = 0; k < classes; ++k) {
        double acc = b[k];
        const double* wk = Wm.data() + static_cast<std::size_t>(k) * dim;
        for (std::int64_t d = 0; d < dim; ++d) acc += wk[d] * x[d];
        logits[k] = acc;
      }
      double mx = logits[0];
      for (int k = 1; k < classes; ++k) mx = std::max(mx, logits[k]);
      double denom = 0;
      for (int k = 0; k < classes; ++k) denom += (probs[k] = std::exp(logits[k] - mx));
      for (int k = 0; k < classes; ++k) {
        const double g = probs[k] / denom - (train[oi].label == k ? 1.0 : 0.0);
        double* wk = Wm.data() + static_cast<std::size_t>(k) * dim;
        for (std::int64_t d = 0; d < dim; ++d) wk[d] -= lr * g * x[d];
        b[k] -= lr * g;
      }
    }
  }

  int hits = 0;
  for (const auto& r : val) {
    const float* x = features(r);
    int best = 0;
    double best_v = -1e300;
    for (int k = 0; k < classes; ++k) {
      double acc = b[k];
      const double* wk = Wm.data() + static_cast<std::size_t>(k) * dim;
      for (std::int64_t d = 0; d < dim; ++d) acc += wk[d] * x[d];
      if (acc > best_v) {
        best_v = acc;
        best = k;
      }
    }
    if (best == r.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(val.size());
}

}  // namespace tea
