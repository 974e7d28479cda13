#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tea/tensor.hpp"

namespace tea {

// Four-class synthetic motion task: one shared sprite drifts up, down,
// left or right over a noisy background with toroidal wrap-around. The
// per-clip random draws (start position, tint, noise) depend only on
// (seed, clip index), never on the class, so every class has the same
// appearance distribution frame by frame; direction of motion is the only
// signal. With speed 0 the four classes are bit-identical.
struct SyntheticDataSpec {
  int classes = 4;  // 0 up, 1 down, 2 left, 3 right
  int frames_raw = 32;
  int height = 16, width = 16, channels = 3;
  int sprite = 4;       // square sprite side
  double speed = 1.0;   // pixels per raw frame
  double noise = 0.05;  // uniform background noise amplitude
  std::uint64_t seed = 0;

  void validate() const;
};

struct ClipRecord {
  Tensor frames;  // [T_raw, C, H, W]
  int label = 0;
  int clip_id = 0;
};

// `per_class` clips for each class, ordered class-major; clip_id is
// label * per_class + index.
std::vector<ClipRecord> generate_dataset(const SyntheticDataSpec& spec, int per_class);

// ---------------------------------------------------------------------------
// sparse temporal sampling
// ---------------------------------------------------------------------------

enum class SampleMode { Train, Test };

// Splits [0, t_raw) into t_out segments [floor(i*t_raw/t_out),
// floor((i+1)*t_raw/t_out)). Test mode picks each segment's centre
// s + len/2; train mode draws uniformly inside the segment. An empty
// segment falls back to s-1 (or 0 at the start). rng may be null in test
// mode.
std::vector<int> sparse_sample_indices(int t_raw, int t_out, SampleMode mode,
                                       std::mt19937* rng);

// Gathers the sampled frames of a [T_raw,C,H,W] clip into [t_out,C,H,W].
Tensor sparse_sample(const Tensor& frames, int t_out, SampleMode mode, std::mt19937* rng);

// Centre crop to (h, w); identity when already that size.
Tensor center_crop(const Tensor& frames, int h, int w);

// Stacks rank-4 clips into a rank-5 batch [N,T,C,H,W].
Tensor stack_clips(const std::vector<Tensor>& clips);

// ---------------------------------------------------------------------------
// clip files and manifests
// ---------------------------------------------------------------------------

// Binary clip format, magic "TEAC", little-endian:
//   magic[4] | u32 version | u32 label | u32 T | u32 C | u32 H | u32 W
//   | f32 data[T*C*H*W]
inline constexpr std::uint32_t kClipVersion = 1;

void write_clip(const std::string& path, const ClipRecord& clip);
ClipRecord read_clip(const std::string& path);

struct ManifestEntry {
  std::string path;
  int label = 0;
  int clip_id = 0;
};

// Writes clips as clip_NNNNN.teac plus manifest.json (a JSON array of
// {path,label,clip_id}, paths relative to the manifest) into `dir`.
std::vector<ManifestEntry> write_dataset(const std::string& dir,
                                         const std::vector<ClipRecord>& clips);
std::vector<ManifestEntry> read_manifest(const std::string& manifest_path);
std::string manifest_json(const std::vector<ManifestEntry>& entries);

// ---------------------------------------------------------------------------
// appearance-blindness probe
// ---------------------------------------------------------------------------

// Multinomial logistic regression on the raw pixels of each clip's centre
// frame. Because single frames carry no class signal by construction, this
// should hover at chance; it guards against accidental appearance leaks.
double linear_probe_accuracy(const std::vector<ClipRecord>& train,
                             const std::vector<ClipRecord>& val, int classes,
                             std::uint64_t seed);

}  // namespace tea
