// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "amiev/amiev.hpp"

using namespace amiev;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("%s %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// Runs a criterion, turning an unexpected library error into a failure.
void criterion(int id, const char* name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [ok, detail] = body();
    report(id, name, ok, detail);
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

SynthConfig truth_config(const SceneSpec& scene, double r = 25.0, double theta_b_deg = 40.0) {
  SynthConfig cfg;
  cfg.params.r = r;
  cfg.params.theta_b = deg2rad(theta_b_deg);
  cfg.params.center = {0.5 * (scene.width - 1), 0.5 * (scene.height - 1)};
  return cfg;
}

CompensationParams guess(const SceneSpec& scene, double r) {
  CompensationParams p;
  p.r = r;
  p.center = {0.5 * (scene.width - 1), 0.5 * (scene.height - 1)};
  return p;
}

double angle_error_deg(double a, double b) { return std::abs(rad2deg(wrap_pi(a - b))); }

std::string slurp(const fs::path& p) { return detail::slurp(p); }

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("amiev_acceptance_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

int main() {
  SceneSpec standard;
  standard.duration_s = 2.0;
  const SynthConfig standard_cfg = truth_config(standard);
  const EventStream standard_stream = synth_events_from_frames(SceneFrames(standard, 2500.0), standard_cfg, true);

  criterion(1, "calibration recovery", [&] {
    std::string detail;
    bool ok = true;
    for (double noise : {0.0, 0.1}) {
      const EventStream s = noise > 0.0 ? attach_theta(inject_noise(standard_stream, noise, 7), standard_cfg)
                                        : standard_stream;
      const auto t0 = Clock::now();
      const Calibration c = calibrate(s, guess(standard, 20.0), SearchConfig{});
      const double dt = seconds_since(t0);
      const double dr = std::abs(c.params.r - 25.0);
      const double dth = angle_error_deg(c.params.theta_b, deg2rad(40.0));
      ok = ok && dr <= 0.5 && dth <= 1.0 && dt <= 60.0;
      detail += fmt("noise %.0f%%: r=%.3f (|dr| %.3f <= 0.5) theta_b=%.3f deg (|d| %.3f <= 1.0) %.1fs; ",
                    100 * noise, c.params.r, dr, rad2deg(c.params.theta_b), dth, dt);
    }
    return std::pair{ok, detail};
  });

  criterion(2, "compensation residual", [&] {
    // Full two-surface optics, sensor field of view chosen so the axial
    // deflection is 25 px.
    SceneSpec scene;
    scene.duration_s = 2.0;
    PrismConfig prism;  // alpha 1 deg, n 1.55, 12 Hz
    const double f = 25.0 / std::tan(axial_deviation(prism));
    const double hfov = 2.0 * std::atan(0.5 * scene.width / f);
    const Intrinsics k = Intrinsics::from_hfov(scene.width, scene.height, hfov);
    SynthConfig cfg = truth_config(scene);
    cfg.prism = prism;
    const FullOpticsDisplacement full(prism, k, cfg.params.theta_b, 4, 360);
    const EventStream s = synth_events_from_frames(SceneFrames(scene, 2500.0), cfg, true, full);
    const Calibration c = calibrate(s, guess(scene, 20.0), SearchConfig{});
    const EdgeGeometry gt = compensated_edges(SceneRenderer(scene).edges(0.0), c.params, c.params.center);
    const double spread = compensation_error(compensate_stream(s, c.params), gt, 10.0);
    return std::pair{spread <= 2.0, fmt("edge spread %.3f px <= 2.0 (fitted r=%.3f theta_b=%.3f deg, %zu events)",
                                        spread, c.params.r, rad2deg(c.params.theta_b), s.size())};
  });

  criterion(3, "model simplification bound", [&] {
    const Intrinsics k = Intrinsics::from_hfov(640, 480, deg2rad(90.0));
    std::string detail;
    bool ok = true;
    for (double alpha : {0.5, 1.0}) {
      PrismConfig p;
      p.alpha = deg2rad(alpha);
      p.n = 1.55;
      const SimplificationReport r = simplification_error(p, k, 8, 36);
      ok = ok && r.max_px <= 2.0;
      detail += fmt("alpha %.1f deg: max %.3f px <= 2.0 (mean %.3f, %zu samples); ", alpha, r.max_px, r.mean_px, r.samples);
    }
    return std::pair{ok, detail};
  });

  criterion(4, "sharpness ordering", [&] {
    std::string detail;
    bool ok = true;
    for (double r : {2.0, 5.0, 12.0}) {
      SceneSpec scene;
      scene.duration_s = 0.5;
      const SynthConfig cfg = truth_config(scene, r, 130.0);
      const EventStream s = synth_events_from_frames(SceneFrames(scene, 2500.0), cfg, true);
      const Calibration c = calibrate(s, guess(scene, 0.8 * r), SearchConfig{});
      const SharpnessComparison j = compare_sharpness(s, c.params);
      ok = ok && j.compensated < j.uncompensated;
      detail += fmt("r*=%.0f: J %.1f < %.1f; ", r, j.compensated, j.uncompensated);
    }
    const Calibration c = calibrate(standard_stream, guess(standard, 20.0), SearchConfig{});
    const SharpnessComparison j = compare_sharpness(standard_stream, c.params);
    const double ratio = j.uncompensated / j.compensated;
    ok = ok && ratio >= 10.0;
    detail += fmt("standard scene: J %.1f vs %.1f, ratio %.1f >= 10", j.compensated, j.uncompensated, ratio);
    return std::pair{ok, detail};
  });

  criterion(5, "orientation completeness", [&] {
    SceneSpec scene;
    scene.duration_s = 0.5;
    const SynthConfig cfg = truth_config(scene);
    const SceneFrames frames(scene, 2500.0);
    const EventStream on = synth_events_from_frames(frames, cfg, true);
    const EventStream off = synth_events_from_frames(frames, cfg, false);
    const EdgeGeometry gt = compensated_edges(frames.renderer().edges(0.0), cfg.params, cfg.params.center);
    const double quarter_us = 1e6 / cfg.prism.rotation_speed / 4.0;
    const int windows = static_cast<int>(std::floor(scene.duration_s * 1e6 / quarter_us));
    int complete = 0;
    std::size_t worst_missing = 0;
    for (int w = 0; w < windows; ++w) {
      const auto t0 = static_cast<std::uint64_t>(std::llround(w * quarter_us));
      const auto t1 = static_cast<std::uint64_t>(std::llround((w + 1) * quarter_us));
      const WarpedStream ws = compensate_stream(slice(on, t0, t1), cfg.params);
      std::vector<char> hit(gt.segments.size(), 0);
      for (const auto& e : ws.events) {
        for (std::size_t k = 0; k < gt.segments.size(); ++k) {
          if (!hit[k] && std::abs(signed_distance({e.x, e.y}, gt.segments[k])) <= 3.0) hit[k] = 1;
        }
      }
      const auto missing = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 0));
      worst_missing = std::max(worst_missing, missing);
      complete += missing == 0 ? 1 : 0;
    }
    const bool ok = complete == windows && off.size() == 0;
    return std::pair{ok, fmt("%d/%d quarter-period windows (%.2f ms) cover all %zu edge segments within 3 px "
                             "(worst window misses %zu); prism-off events %zu",
                             complete, windows, quarter_us / 1e3, gt.segments.size(), worst_missing, off.size())};
  });

  criterion(6, "metric orderings", [&] {
    int kde_ok = 0, entropy_ok = 0;
    std::string worst;
    double worst_kde_margin = 1e9, worst_h_margin = 1e9;
    KdeOptions kde;
    kde.exact_limit = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      SceneSpec scene;
      scene.duration_s = 0.2;
      scene.jitter_px = 6.0;
      scene.seed = seed;
      scene.motion = MotionKind::Sinusoid;
      scene.amplitude_px = 8.0;
      scene.frequency_hz = 2.0;
      scene.direction_deg = 0.0;
      const SynthConfig cfg = truth_config(scene);
      const SceneFrames frames(scene, 2500.0);
      const EventStream ami = synth_events_from_frames(frames, cfg, true);
      const EventStream sev = synth_events_from_frames(frames, cfg, false);
      const double v_ami = kde_density_variance(ami, kde).variance;
      const double v_sev = kde_density_variance(sev, kde).variance;
      const double h_ami = binarized_entropy(accumulate_iwe(compensate_stream(ami, cfg.params), Binning::Nearest).iwe);
      const double h_sev = binarized_entropy(accumulate_iwe(sev).iwe);
      kde_ok += v_ami < v_sev ? 1 : 0;
      entropy_ok += h_ami >= h_sev ? 1 : 0;
      worst_kde_margin = std::min(worst_kde_margin, v_sev - v_ami);
      worst_h_margin = std::min(worst_h_margin, h_ami - h_sev);
      if (seed == 1) worst = fmt("seed 1: KDE var %.3f vs %.3f, entropy %.4f vs %.4f", v_ami, v_sev, h_ami, h_sev);
    }
    return std::pair{kde_ok == 10 && entropy_ok == 10,
                     fmt("KDE var AMI < S-EV on %d/10 seeds (min margin %.3f); entropy AMI >= S-EV on %d/10 "
                         "(min margin %.4f); %s",
                         kde_ok, worst_kde_margin, entropy_ok, worst_h_margin, worst.c_str())};
  });

  criterion(7, "geometry unit suite", [&] {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t checks = 0, passed = 0;
    auto check = [&](bool c) {
      ++checks;
      passed += c ? 1 : 0;
    };
    const Intrinsics k{500, 500, 320, 240, 640, 480};
    for (int i = 0; i < 10000; ++i) {
      const double a = (u(rng) - 0.5) * 3.1;
      const double n = 1.01 + 1.5 * u(rng);
      check(std::abs(snell_refract(snell_refract(a, 1.0, n), n, 1.0) - a) <= 1e-9);

      const Vec3 raw{u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5};
      const Vec3 axis = raw / raw.norm();
      const Vec3 v{u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5};
      const double ang = 20.0 * (u(rng) - 0.5);
      const Vec3 r = rotate_about_axis(v, axis, ang);
      check((rotate_about_axis(r, axis, -ang) - v).norm() <= 1e-12);
      check(std::abs(r.norm() - v.norm()) <= 1e-12);
      check((rotate_about_axis(v, axis, 0.0) - v).norm() <= 1e-15);
      check((rotate_about_axis(v, axis, kTwoPi) - v).norm() <= 1e-12);

      const Point2 p{640 * u(rng), 480 * u(rng)};
      const Point2 q = project(backproject(p, k), k);
      check(std::hypot(q.x - p.x, q.y - p.y) <= 1e-6);

      const double polar = deg2rad(5.0) * u(rng), az = kTwoPi * u(rng);
      const UnitVec3 in(std::sin(polar) * std::cos(az), std::sin(polar) * std::sin(az), -std::cos(polar));
      PrismConfig prism;
      const UnitVec3 out = prism_transmit_full(in, wedge_axis(kTwoPi * u(rng), prism.alpha), prism.n);
      const double dev = std::atan2(cross(in.vec(), out.vec()).norm(), dot(in.vec(), out.vec()));
      const double thin = (prism.n - 1.0) * prism.alpha;
      check(std::abs(dev - thin) <= 0.01 * thin);
    }
    return std::pair{passed == checks, fmt("%zu/%zu checks", passed, checks)};
  });

  criterion(8, "serialization", [&] {
    const fs::path dir = scratch("serialization");
    std::string detail;
    bool ok = true;
    for (std::size_t n : {std::size_t{1}, std::size_t{100000}, std::size_t{10000000}}) {
      std::mt19937_64 rng(n);
      std::vector<Event> ev(n);
      std::uint64_t t = 0;
      for (auto& e : ev) {
        t += rng() % 3;
        e = {t, static_cast<std::uint16_t>(rng() % 1280), static_cast<std::uint16_t>(rng() % 720),
             static_cast<std::int8_t>(rng() % 2 ? 1 : -1)};
      }
      std::sort(ev.begin(), ev.end(), event_less);
      const EventStream s({1280, 720}, std::move(ev));
      for (EventFormat f : {EventFormat::Csv, EventFormat::Amev}) {
        const fs::path a = dir / ("a" + std::string(extension(f)));
        const fs::path b = dir / ("b" + std::string(extension(f)));
        write_events(s, a, f);
        const EventStream back = read_events(a).stream;
        write_events(back, b, f);
        bool same = back.size() == s.size() && back.resolution() == s.resolution();
        for (std::size_t i = 0; same && i < s.size(); ++i) same = back[i] == s[i];
        same = same && slurp(a) == slurp(b);
        ok = ok && same;
        if (!same) detail += fmt("%s round trip of %zu events differs; ", f == EventFormat::Csv ? "csv" : "amev", n);
        fs::remove(a);
        fs::remove(b);
      }
    }
    detail += "round trips of 1, 1e5, 1e7 events lossless: " + std::string(ok ? "yes" : "no") + "; ";

    // Compensation as the CLI runs it: read, attach angles, warp, write.
    SynthConfig cfg = truth_config(standard);
    const std::size_t n = 5000000;
    std::vector<Event> ev;
    ev.reserve(n);
    std::mt19937_64 rng(8);
    for (std::size_t i = 0; i < n; ++i) {
      ev.push_back({i / 2, static_cast<std::uint16_t>(rng() % 240), static_cast<std::uint16_t>(rng() % 180), 1});
    }
    std::sort(ev.begin(), ev.end(), event_less);
    const EventStream s({240, 180}, std::move(ev));
    write_events(s, dir / "in.amev", EventFormat::Amev);
    write_encoder(synth_encoder(cfg, 0, s.t_end()), dir / "enc.csv");
    const auto t0 = Clock::now();
    const EventStream in = sync_theta(read_events(dir / "in.amev").stream, read_encoder(dir / "enc.csv"));
    const auto t1 = Clock::now();
    const WarpedStream w = compensate_stream(in, cfg.params);
    const double warp_s = seconds_since(t1);
    write_warped_csv(w, dir / "out.csv");
    const double total_s = seconds_since(t0);
    const double rate = static_cast<double>(n) / total_s;
    ok = ok && rate >= 1e6;
    detail += fmt("compensate %.2f Mev/s end to end >= 1 (warp alone %.1f Mev/s)", rate / 1e6, n / warp_s / 1e6);
    fs::remove_all(dir);
    return std::pair{ok, detail};
  });

  criterion(9, "determinism", [&] {
    const fs::path dir = scratch("determinism");
    const std::string cli = AMIEV_CLI;
    {
      std::ofstream(dir / "scene.cfg") << "duration_s = 0.3\njitter_px = 4\nnoise_fraction = 0.05\nwrite_frames = false\n";
      std::ofstream(dir / "eval.cfg") << "window_ms = 100\nkde_exact_limit = 0\n";
    }
    const auto run_all = [&](const std::string& tag, int threads) {
      const fs::path o = dir / tag;
      const std::string th = " --threads " + std::to_string(threads);
      const std::string q = " >/dev/null 2>&1";
      const std::string ev = " --events " + (o / "synth" / "events.amev").string() + " --encoder " +
                             (o / "synth" / "encoder.csv").string();
      const std::string cal = " --calibration " + (o / "cal" / "calibration.txt").string();
      int rc = 0;
      rc |= std::system((cli + " synth --config " + (dir / "scene.cfg").string() + th + " --out " + (o / "synth").string() + q).c_str());
      rc |= std::system((cli + " calibrate" + ev + th + " --out " + (o / "cal").string() + q).c_str());
      rc |= std::system((cli + " compensate" + ev + cal + th + " --out " + (o / "comp").string() + q).c_str());
      rc |= std::system((cli + " eval" + ev + cal + " --edges " + (o / "synth" / "edges.txt").string() + " --config " +
                         (dir / "eval.cfg").string() + th + " --out " + (o / "eval").string() + q).c_str());
      rc |= std::system((cli + " translate --events " + (o / "synth" / "events.amev").string() + th + " --out " +
                         (o / "tr").string() + q).c_str());
      return rc == 0;
    };
    bool ok = run_all("a", 1) && run_all("b", 1) && run_all("c", 3);
    std::size_t files = 0, differing = 0;
    for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
      if (!entry.is_regular_file()) continue;
      const fs::path rel = fs::relative(entry.path(), dir / "a");
      ++files;
      const std::string ref = slurp(entry.path());
      for (const char* other : {"b", "c"}) {
        const fs::path p = dir / other / rel;
        if (!fs::exists(p) || slurp(p) != ref) ++differing;
      }
    }
    ok = ok && files > 0 && differing == 0;
    fs::remove_all(dir);
    return std::pair{ok, fmt("%zu output files compared across 2 runs and --threads 1/3, %zu differ", files, differing)};
  });

  return failures == 0 ? 0 : 1;
}
