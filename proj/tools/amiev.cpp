// amiev command-line tool: scene synthesis, translation, calibration,
// compensation, evaluation and stream statistics.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "amiev/amiev.hpp"

namespace fs = std::filesystem;
using namespace amiev;

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 42;
  int threads = 1;
  std::string format = "amev";
};

KeyValues load_config(const Common& c) { return c.config.empty() ? KeyValues{} : KeyValues::load(c.config); }

fs::path prepare_out(const Common& c) {
  const fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot create " + path.string());
  out << text;
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
}

// Loads events and attaches angles from an encoder log when one is given.
EventStream load_stream(const std::string& events, const std::string& encoder) {
  EventStream s = read_events(events).stream;
  if (!encoder.empty()) s = sync_theta(s, read_encoder(encoder));
  return s;
}

SearchConfig search_config(const KeyValues& kv, int threads) {
  SearchConfig sc;
  if (kv.has("r_min_px")) sc.r_min = kv.require_double("r_min_px");
  if (kv.has("r_max_px")) sc.r_max = kv.require_double("r_max_px");
  sc.r_step = kv.get_double("r_step_px", sc.r_step);
  sc.theta_step = deg2rad(kv.get_double("theta_step_deg", rad2deg(sc.theta_step)));
  sc.r_tol = kv.get_double("r_tol_px", sc.r_tol);
  sc.theta_tol = deg2rad(kv.get_double("theta_tol_deg", rad2deg(sc.theta_tol)));
  sc.max_iterations = static_cast<int>(kv.get_int("max_iterations", sc.max_iterations));
  sc.window_s = kv.get_double("window_s", sc.window_s);
  if (kv.has("eta")) sc.eta = kv.require_double("eta");
  const std::string rule = kv.get_string("eta_rule", "mass_median");
  if (rule == "mass_median") sc.eta_rule = EtaRule::MassMedian;
  else if (rule == "median_positive") sc.eta_rule = EtaRule::MedianPositive;
  else fail(ErrorCode::ParseError, "unknown eta_rule '" + rule + "'");
  const std::string binning = kv.get_string("binning", "bilinear");
  if (binning == "bilinear") sc.binning = Binning::Bilinear;
  else if (binning == "nearest") sc.binning = Binning::Nearest;
  else fail(ErrorCode::ParseError, "unknown binning '" + binning + "'");
  if (kv.has("max_events")) sc.max_events = static_cast<std::size_t>(kv.get_int("max_events", 0));
  sc.min_turns = kv.get_double("min_turns", sc.min_turns);
  sc.threads = threads;
  sc.validate();
  return sc;
}

KdeOptions kde_options(const KeyValues& kv, int threads) {
  KdeOptions o;
  o.exact_limit = static_cast<std::size_t>(kv.get_int("kde_exact_limit", static_cast<std::int64_t>(o.exact_limit)));
  o.grid_cells = static_cast<int>(kv.get_int("kde_grid_cells", o.grid_cells));
  if (kv.has("kde_low_cutoff")) o.low_cutoff = kv.require_double("kde_low_cutoff");
  o.threads = threads;
  return o;
}

std::string params_text(const CompensationParams& p) {
  return "r_px = " + format_double(p.r) + "\ntheta_b_rad = " + format_double(p.theta_b) +
         "\ncenter_x = " + format_double(p.center.x) + "\ncenter_y = " + format_double(p.center.y) +
         "\nk1 = " + format_double(p.k1.value_or(0.0)) + "\n";
}

// synth: render a scene, translate it to events, write ground truth.
void cmd_synth(const Common& c) {
  KeyValues kv = load_config(c);
  if (!kv.has("seed")) kv.set("seed", std::to_string(c.seed));
  const SceneSpec spec = SceneSpec::from_config(kv);
  SynthConfig cfg = SynthConfig::from_config(kv, spec.width, spec.height);
  cfg.threads = c.threads;
  const double fps = kv.get_double("framerate", 2500.0);
  const bool prism = kv.get_bool("prism", true);
  const double noise = kv.get_double("noise_fraction", 0.0);
  const EventFormat fmt = parse_event_format(c.format);
  const fs::path dir = prepare_out(c);

  const SceneFrames src(spec, fps);
  EventStream ev = synth_events_from_frames(src, cfg, prism);
  if (noise > 0.0) {
    ev = inject_noise(ev, noise, c.seed);
    if (prism) ev = attach_theta(ev, cfg);
  }
  write_events(ev, dir / ("events" + std::string(extension(fmt))), fmt);
  const auto t_end = static_cast<std::uint64_t>(std::llround(spec.duration_s * 1e6));
  if (prism) write_encoder(synth_encoder(cfg, 0, t_end), dir / "encoder.csv");
  if (spec.pattern == Pattern::Edges || spec.pattern == Pattern::Disk) {
    write_edges(src.renderer().edges(0.0), dir / "edges.txt");
  }
  write_text(dir / "truth.txt", params_text(cfg.params));
  if (kv.get_bool("write_frames", false)) write_frame_directory(generate_scene(spec, fps), dir / "frames");
  std::cout << "events " << ev.size() << '\n';
}

// translate: frames and/or events to prism-on events.
void cmd_translate(const Common& c, const std::string& frames, const std::string& timestamps,
                   const std::string& events) {
  if (frames.empty() && events.empty()) fail(ErrorCode::InvalidArgument, "translate needs --frames or --events");
  const KeyValues kv = load_config(c);
  const EventFormat fmt = parse_event_format(c.format);
  std::optional<FrameSequence> seq;
  if (!frames.empty()) {
    seq = read_frame_directory(frames, timestamps.empty() ? fs::path(frames) / "timestamps.txt" : fs::path(timestamps));
  }
  std::optional<EventStream> in;
  if (!events.empty()) in = read_events(events).stream;
  const int w = seq ? seq->width() : in->width();
  const int h = seq ? seq->height() : in->height();
  SynthConfig cfg = SynthConfig::from_config(kv, w, h);
  cfg.threads = c.threads;
  const fs::path dir = prepare_out(c);

  EventStream out = seq && in ? synth_ami_from_frames_plus_events(*seq, *in, cfg)
                    : seq     ? synth_events_from_frames(*seq, cfg, true)
                              : synth_ami_from_events(*in, cfg);
  write_events(out, dir / ("events" + std::string(extension(fmt))), fmt);
  std::uint64_t t0 = 0, t1 = 0;
  if (!out.empty()) {
    t0 = out.t_begin();
    t1 = out.t_end();
  }
  write_encoder(synth_encoder(cfg, t0, t1), dir / "encoder.csv");
  std::cout << "events " << out.size() << '\n';
}

void cmd_calibrate(const Common& c, const std::string& events, const std::string& encoder) {
  const KeyValues kv = load_config(c);
  const EventStream s = load_stream(events, encoder);
  const SearchConfig sc = search_config(kv, c.threads);
  CompensationParams init;
  // Initial radius: explicit, or the prism deflection for a given field of view.
  if (kv.has("hfov_deg")) {
    PrismConfig prism;
    prism.alpha = deg2rad(kv.get_double("prism_alpha_deg", rad2deg(prism.alpha)));
    prism.n = kv.get_double("prism_n", prism.n);
    prism.validate();
    init.r = deflection_radius_px(prism, Intrinsics::from_hfov(s.width(), s.height(), deg2rad(kv.require_double("hfov_deg"))));
  } else {
    init.r = kv.get_double("r_init_px", 20.0);
  }
  init.theta_b = wrap_2pi(deg2rad(kv.get_double("theta_b_init_deg", 0.0)));
  init.center = {kv.get_double("center_x", 0.5 * (s.width() - 1)), kv.get_double("center_y", 0.5 * (s.height() - 1))};
  if (kv.has("k1")) init.k1 = kv.require_double("k1");
  init.validate();
  const fs::path dir = prepare_out(c);

  const Calibration cal = calibrate(s, init, sc);
  write_calibration({cal.params, cal.report.cost, sc.window_s}, dir / "calibration.txt");
  std::string surface = "r_px,theta_b_deg,cost\n";
  for (const auto& p : cal.report.samples) {
    surface += format_double(p.r) + ',' + format_double(rad2deg(p.theta_b)) + ',' + format_double(p.cost) + '\n';
  }
  write_text(dir / "cost_surface.csv", surface);
  std::cout << "r_px " << format_double(cal.params.r) << "\ntheta_b_deg " << format_double(rad2deg(cal.params.theta_b))
            << "\ncost " << format_double(cal.report.cost) << "\ncost_uncompensated "
            << format_double(cal.report.cost_uncompensated) << "\neta " << format_double(cal.report.eta) << '\n';
}

void cmd_compensate(const Common& c, const std::string& events, const std::string& encoder,
                    const std::string& calibration) {
  const EventStream s = load_stream(events, encoder);
  const CalibrationFile cal = read_calibration(calibration);
  const fs::path dir = prepare_out(c);
  const WarpedStream w = compensate_stream(s, cal.params);
  write_warped_csv(w, dir / "compensated.csv");
  write_pgm(heatmap(accumulate_iwe(s).iwe), dir / "iwe_before.pgm");
  write_pgm(heatmap(accumulate_iwe(w).iwe), dir / "iwe_after.pgm");
  std::cout << "events " << w.size() << '\n';
}

void cmd_eval(const Common& c, const std::vector<std::string>& events, const std::vector<std::string>& encoders,
              const std::string& calibration, const std::string& edges_path) {
  if (events.empty()) fail(ErrorCode::InvalidArgument, "eval needs at least one --events file");
  if (!encoders.empty() && encoders.size() != events.size()) {
    fail(ErrorCode::InvalidArgument, "give one --encoder per --events file, '-' for none");
  }
  const KeyValues kv = load_config(c);
  const KdeOptions kde = kde_options(kv, c.threads);
  const double radius = kv.get_double("match_radius_px", 2.0);
  const double spread_cap = kv.get_double("spread_max_distance_px", 10.0);
  const std::optional<CalibrationFile> cal =
      calibration.empty() ? std::nullopt : std::optional<CalibrationFile>(read_calibration(calibration));
  const std::optional<EdgeGeometry> edges =
      edges_path.empty() ? std::nullopt : std::optional<EdgeGeometry>(read_edges(edges_path));
  const auto t0 = static_cast<std::uint64_t>(kv.get_int("t_begin_us", 0));
  const std::optional<double> window_ms = kv.has("window_ms") ? std::optional(kv.require_double("window_ms")) : std::nullopt;
  const fs::path dir = prepare_out(c);

  std::vector<StreamMetrics> rows;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const std::string enc = encoders.empty() || encoders[i] == "-" ? "" : encoders[i];
    EventStream s = load_stream(events[i], enc);
    if (window_ms) s = slice(s, t0, t0 + static_cast<std::uint64_t>(std::llround(*window_ms * 1e3)));
    if (s.empty()) fail(ErrorCode::EmptyStream, events[i] + ": no events in the evaluation window");
    StreamMetrics m;
    m.label = fs::path(events[i]).stem().string();
    if (std::any_of(rows.begin(), rows.end(), [&](const StreamMetrics& r) { return r.label == m.label; })) {
      m.label += "_" + std::to_string(i);
    }
    m.events = s.size();
    const DensityReport d = kde_density_variance(s, kde);
    m.kde_variance = d.variance;
    m.low_density_fraction = d.low_fraction;
    const bool warp = cal && s.has_theta();
    const WarpedStream ws = warp ? compensate_stream(s, cal->params) : uncompensated(s);
    IWE iwe = accumulate_iwe(ws, Binning::Nearest).iwe;
    m.entropy = binarized_entropy(iwe);
    if (edges) {
      const EdgeGeometry gt = warp ? compensated_edges(*edges, cal->params, cal->params.center) : *edges;
      const OdsResult ods = ods_f(iwe, rasterize(gt, s.width(), s.height()), radius, default_thresholds(iwe));
      m.ods_f = ods.f1;
      m.ods_threshold = ods.threshold;
      m.edge_spread = compensation_error(ws, gt, spread_cap);
    }
    m.iwe = std::move(iwe);
    rows.push_back(std::move(m));
  }
  write_report(rows, dir);
  std::ifstream txt(dir / "report.txt");
  std::cout << txt.rdbuf();
}

void cmd_info(const Common& c, const std::string& events) {
  const EventStream s = read_events(events).stream;
  std::size_t positive = 0;
  for (const Event& e : s.events()) positive += e.polarity > 0;
  const double duration = s.empty() ? 0.0 : static_cast<double>(s.t_end() - s.t_begin());
  std::string text = "events " + std::to_string(s.size()) + "\nwidth " + std::to_string(s.width()) + "\nheight " +
                     std::to_string(s.height()) + "\nt_begin_us " + std::to_string(s.empty() ? 0 : s.t_begin()) +
                     "\nt_end_us " + std::to_string(s.empty() ? 0 : s.t_end()) + "\nduration_us " +
                     format_double(duration) + "\nrate_eps " +
                     format_double(duration > 0.0 ? 1e6 * static_cast<double>(s.size()) / duration : 0.0) +
                     "\npositive_fraction " +
                     format_double(s.empty() ? 0.0 : static_cast<double>(positive) / static_cast<double>(s.size())) +
                     '\n';
  std::cout << text;
  if (c.out != ".") write_text(prepare_out(c) / "info.txt", text);
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Artificial-microsaccade event tools"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "output directory");
    sub->add_option("--seed", common.seed, "random seed");
    sub->add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--format", common.format, "event file format")->check(CLI::IsMember({"csv", "amev"}));
  };

  std::string frames, timestamps, events, encoder, calibration, edges;
  std::vector<std::string> event_list, encoder_list;

  auto* synth = app.add_subcommand("synth", "render a synthetic scene and translate it to events");
  add_common(synth);
  auto* translate = app.add_subcommand("translate", "turn frames and/or events into prism-on events");
  add_common(translate);
  translate->add_option("--frames", frames, "directory of PGM frames")->check(CLI::ExistingDirectory);
  translate->add_option("--timestamps", timestamps, "index,t_us file (default FRAMES/timestamps.txt)");
  translate->add_option("--events", events, "event file")->check(CLI::ExistingFile);
  auto* calib = app.add_subcommand("calibrate", "fit the circle displacement model");
  add_common(calib);
  calib->add_option("--events", events, "event file")->required()->check(CLI::ExistingFile);
  calib->add_option("--encoder", encoder, "encoder log")->required()->check(CLI::ExistingFile);
  auto* comp = app.add_subcommand("compensate", "warp events to the reference phase");
  add_common(comp);
  comp->add_option("--events", events, "event file")->required()->check(CLI::ExistingFile);
  comp->add_option("--encoder", encoder, "encoder log")->required()->check(CLI::ExistingFile);
  comp->add_option("--calibration", calibration, "calibration file")->required()->check(CLI::ExistingFile);
  auto* eval = app.add_subcommand("eval", "density, entropy and edge metrics");
  add_common(eval);
  eval->add_option("--events", event_list, "event file (repeatable)")->required()->check(CLI::ExistingFile);
  eval->add_option("--encoder", encoder_list, "encoder log per event file, '-' for none");
  eval->add_option("--calibration", calibration, "calibration applied to streams with angles")->check(CLI::ExistingFile);
  eval->add_option("--edges", edges, "ground-truth edge file")->check(CLI::ExistingFile);
  auto* info = app.add_subcommand("info", "stream statistics");
  add_common(info);
  info->add_option("--events", events, "event file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error UsageError " << one_line(e.what()) << '\n';
    return 64;
  }

  try {
    if (*synth) cmd_synth(common);
    else if (*translate) cmd_translate(common, frames, timestamps, events);
    else if (*calib) cmd_calibrate(common, events, encoder);
    else if (*comp) cmd_compensate(common, events, encoder, calibration);
    else if (*eval) cmd_eval(common, event_list, encoder_list, calibration, edges);
    else if (*info) cmd_info(common, events);
  } catch (const Error& e) {
    std::cerr << "error " << to_string(e.code()) << ' ' << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error Internal " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}
