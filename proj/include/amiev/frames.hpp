#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "amiev/error.hpp"
#include "amiev/events.hpp"
#include "amiev/geometry.hpp"
#include "amiev/iwe.hpp"
#include "amiev/scene.hpp"

namespace amiev {

struct Frame {
  std::uint64_t t = 0;  // microseconds
  std::vector<float> intensity;
};

/// Time-ordered intensity frames.
struct FrameSequence {
  Resolution resolution{};
  double framerate = 0.0;
  std::vector<Frame> frames;
  // Largest scene motion between consecutive frames, when known.
  double max_motion_px = 0.0;
  std::optional<EdgeGeometry> edges;  // at t = 0

  int width() const { return resolution.width; }
  int height() const { return resolution.height; }
  double motion_px_per_frame() const { return max_motion_px; }
  std::size_t frame_count() const { return frames.size(); }
  std::uint64_t time_us(std::size_t k) const { return frames[k].t; }
  const std::vector<float>& frame(std::size_t k) const { return frames[k].intensity; }

  void validate() const {
    for (std::size_t k = 0; k < frames.size(); ++k) {
      if (frames[k].intensity.size() != static_cast<std::size_t>(width()) * height()) {
        fail(ErrorCode::InvalidArgument, "frame " + std::to_string(k) + " has wrong size");
      }
      if (k > 0 && frames[k].t <= frames[k - 1].t) {
        fail(ErrorCode::InvalidArgument, "frame timestamps must be strictly increasing");
      }
      for (float v : frames[k].intensity) {
        if (!(v >= 0.0f) || !std::isfinite(v)) fail(ErrorCode::InvalidArgument, "intensities must be finite and >= 0");
      }
    }
  }
};

inline std::uint64_t frame_time_us(std::size_t k, double framerate) {
  return static_cast<std::uint64_t>(std::llround(static_cast<double>(k) * 1e6 / framerate));
}

inline void check_scene_motion(const SceneSpec& spec, double framerate) {
  if (!(framerate > 0.0)) fail(ErrorCode::InvalidArgument, "framerate must be positive");
  if (spec.max_speed() / framerate >= 1.0) {
    fail(ErrorCode::MotionTooFast, "scene moves " + std::to_string(spec.max_speed() / framerate) +
                                       " px per frame; need < 1");
  }
}

inline std::size_t scene_frame_count(const SceneSpec& spec, double framerate) {
  return static_cast<std::size_t>(std::floor(spec.duration_s * framerate + 1e-9)) + 1;
}

/// Frame source that renders a scene on demand, caching the last frame (or
/// the only frame, for static scenes).
class SceneFrames {
 public:
  SceneFrames(SceneSpec spec, double framerate) : renderer_(std::move(spec)), framerate_(framerate) {
    check_scene_motion(renderer_.spec(), framerate);
    count_ = scene_frame_count(renderer_.spec(), framerate);
  }

  int width() const { return renderer_.spec().width; }
  int height() const { return renderer_.spec().height; }
  double framerate() const { return framerate_; }
  double motion_px_per_frame() const { return renderer_.spec().max_speed() / framerate_; }
  std::size_t frame_count() const { return count_; }
  std::uint64_t time_us(std::size_t k) const { return frame_time_us(k, framerate_); }
  const SceneRenderer& renderer() const { return renderer_; }

  /// Box-filtered scene intensity around an arbitrary image point at time t
  /// (microseconds).
  double intensity(double t_us, const Point2& p) const { return renderer_.intensity(p, 1e-6 * t_us); }

  /// Not thread-safe; callers fetch frames from one thread.
  const std::vector<float>& frame(std::size_t k) const {
    const bool is_static = renderer_.spec().motion == MotionKind::Static;
    if (cached_ != k && !(is_static && cached_ != kNone)) {
      renderer_.render(1e-6 * static_cast<double>(time_us(k)), cache_);
      cached_ = k;
    }
    return cache_;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  SceneRenderer renderer_;
  double framerate_;
  std::size_t count_ = 0;
  mutable std::size_t cached_ = kNone;
  mutable std::vector<float> cache_;
};

/// Renders a scene into a materialized frame sequence.
inline FrameSequence generate_scene(const SceneSpec& spec, double framerate) {
  const SceneFrames src(spec, framerate);
  FrameSequence seq;
  seq.resolution = {spec.width, spec.height};
  seq.framerate = framerate;
  seq.max_motion_px = src.motion_px_per_frame();
  seq.edges = src.renderer().edges(0.0);
  seq.frames.reserve(src.frame_count());
  for (std::size_t k = 0; k < src.frame_count(); ++k) seq.frames.push_back({src.time_us(k), src.frame(k)});
  return seq;
}

// PGM (binary P5) images.

struct GrayImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint16_t> pixels;
};

inline void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot create " + path.string());
  out << "P5\n" << img.width << ' ' << img.height << '\n' << img.maxval << '\n';
  std::string buf;
  buf.reserve(img.pixels.size() * 2);
  for (std::uint16_t v : img.pixels) {
    if (img.maxval > 255) buf.push_back(static_cast<char>(v >> 8));
    buf.push_back(static_cast<char>(v & 0xFF));
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
}

inline GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(c);
    }
    return t;
  };
  if (token() != "P5") fail(ErrorCode::ParseError, path.string() + ": not a binary PGM");
  GrayImage img;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    img.maxval = std::stoi(token());
  } catch (const std::exception&) {
    fail(ErrorCode::ParseError, path.string() + ": bad PGM header");
  }
  if (img.width <= 0 || img.height <= 0 || img.maxval <= 0 || img.maxval > 65535) {
    fail(ErrorCode::ParseError, path.string() + ": bad PGM header");
  }
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  const std::size_t bytes = img.maxval > 255 ? 2 : 1;
  std::string raw(n * bytes, '\0');
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) fail(ErrorCode::ParseError, path.string() + ": truncated PGM");
  img.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    img.pixels[i] = bytes == 2 ? static_cast<std::uint16_t>((static_cast<unsigned char>(raw[2 * i]) << 8) |
                                                            static_cast<unsigned char>(raw[2 * i + 1]))
                               : static_cast<unsigned char>(raw[i]);
  }
  return img;
}

/// Linear heatmap of an accumulator, scaled so the maximum maps to 255.
inline GrayImage heatmap(const IWE& iwe) {
  GrayImage img{iwe.width, iwe.height, 255, {}};
  double peak = 0.0;
  for (double c : iwe.counts) peak = std::max(peak, c);
  img.pixels.reserve(iwe.counts.size());
  for (double c : iwe.counts) {
    img.pixels.push_back(peak > 0.0 ? static_cast<std::uint16_t>(std::lround(255.0 * c / peak)) : 0);
  }
  return img;
}

inline GrayImage to_image(const EdgeMap& m) {
  GrayImage img{m.width, m.height, 255, {}};
  img.pixels.reserve(m.mask.size());
  for (auto v : m.mask) img.pixels.push_back(v ? 255 : 0);
  return img;
}

/// Reads a directory of PGM frames plus a timestamps file of `index,t_us`
/// lines, where index is the position of the frame among the directory's
/// .pgm files in lexicographic order.
inline FrameSequence read_frame_directory(const std::filesystem::path& dir,
                                          const std::filesystem::path& timestamps) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::ifstream ts(timestamps);
  if (!ts) fail(ErrorCode::IoError, "cannot open " + timestamps.string());
  FrameSequence seq;
  std::string line;
  int no = 0;
  while (std::getline(ts, line)) {
    ++no;
    if (line.empty() || line[0] == '#') continue;
    std::size_t index = 0;
    std::uint64_t t = 0;
    char comma = 0;
    std::istringstream ss(line);
    if (!(ss >> index >> comma >> t) || comma != ',') {
      fail(ErrorCode::ParseError, timestamps.string() + ":" + std::to_string(no) + ": expected index,t_us");
    }
    if (index >= files.size()) fail(ErrorCode::ParseError, timestamps.string() + ":" + std::to_string(no) + ": no such frame");
    const GrayImage img = read_pgm(files[index]);
    if (seq.frames.empty()) {
      seq.resolution = {img.width, img.height};
    } else if (img.width != seq.width() || img.height != seq.height()) {
      fail(ErrorCode::DimensionMismatch, files[index].string() + ": frame size differs");
    }
    Frame f{t, {}};
    f.intensity.reserve(img.pixels.size());
    for (auto v : img.pixels) f.intensity.push_back(static_cast<float>(v) / static_cast<float>(img.maxval));
    seq.frames.push_back(std::move(f));
  }
  if (seq.frames.size() >= 2) {
    seq.framerate = 1e6 * static_cast<double>(seq.frames.size() - 1) /
                    static_cast<double>(seq.frames.back().t - seq.frames.front().t);
  }
  seq.validate();
  return seq;
}

inline void write_frame_directory(const FrameSequence& seq, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream ts(dir / "timestamps.txt", std::ios::trunc);
  if (!ts) fail(ErrorCode::IoError, "cannot create timestamps file in " + dir.string());
  for (std::size_t k = 0; k < seq.frames.size(); ++k) {
    GrayImage img{seq.width(), seq.height(), 65535, {}};
    img.pixels.reserve(seq.frames[k].intensity.size());
    for (float v : seq.frames[k].intensity) {
      img.pixels.push_back(static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 65535.0f)));
    }
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06zu.pgm", k);
    write_pgm(img, dir / name);
    ts << k << ',' << seq.frames[k].t << '\n';
  }
}

}  // namespace amiev
