#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "support.hpp"

using namespace amiev;
using amiev::testing::scratch_dir;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliResult run(const std::string& args) {
  static int counter = 0;
  const fs::path err = fs::temp_directory_path() / ("amiev_cli_err_" + std::to_string(counter++));
  const std::string cmd = std::string(AMIEV_CLI) + " " + args + " 2>" + err.string();
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = read_file(err);
  fs::remove(err);
  return r;
}

void write_file(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

double value_of(const std::string& out, const std::string& key) {
  std::istringstream in(out);
  std::string k;
  double v;
  while (in >> k >> v) {
    if (k == key) return v;
  }
  return NAN;
}

// A short synthetic recording shared by the end-to-end tests.
const fs::path& recording() {
  static const fs::path dir = [] {
    const fs::path d = scratch_dir("cli_recording");
    write_file(d / "scene.cfg", "duration_s = 0.3\nr_px = 25\ntheta_b_deg = 40\n");
    const CliResult r = run("synth --config " + (d / "scene.cfg").string() + " --out " + (d / "synth").string());
    EXPECT_EQ(r.code, 0) << r.err;
    return d;
  }();
  return dir;
}

}  // namespace

TEST(Cli, InfoGolden) {
  const fs::path d = scratch_dir("cli_info");
  write_file(d / "e.csv", "# width=4 height=3\n100,0,0,1\n300,1,2,-1\n600,3,1,1\n1100,2,2,1\n");
  const CliResult r = run("info --events " + (d / "e.csv").string());
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out,
            "events 4\nwidth 4\nheight 3\nt_begin_us 100\nt_end_us 1100\nduration_us 1000\nrate_eps 4000\n"
            "positive_fraction 0.75\n");
  EXPECT_FALSE(fs::exists(d / "info.txt"));
  EXPECT_EQ(run("info --events " + (d / "e.csv").string() + " --out " + (d / "o").string()).code, 0);
  EXPECT_EQ(read_file(d / "o" / "info.txt"), r.out);
}

TEST(Cli, UsageErrors) {
  CliResult r = run("");
  EXPECT_EQ(r.code, 64);
  EXPECT_EQ(r.err.rfind("error UsageError ", 0), 0u) << r.err;
  r = run("info --events /nonexistent/file.csv");
  EXPECT_EQ(r.code, 64);
  r = run("calibrate --events /dev/null");
  EXPECT_EQ(r.code, 64);
  r = run("info --format bin --events /dev/null");
  EXPECT_EQ(r.code, 64);
  EXPECT_EQ(count_lines(r.err), 1u);
}

TEST(Cli, LibraryErrorsAreOneLine) {
  const fs::path d = scratch_dir("cli_errors");
  write_file(d / "bad.csv", "# width=4 height=3\n1,0,0,1\n2,0,zero,1\n");
  CliResult r = run("info --events " + (d / "bad.csv").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error ParseError line 3: ", 0), 0u) << r.err;
  EXPECT_EQ(count_lines(r.err), 1u);
  write_file(d / "empty.csv", "# width=4 height=3\n");
  r = run("info --events " + (d / "empty.csv").string());
  EXPECT_EQ(r.err.rfind("error EmptyStream ", 0), 0u) << r.err;
  r = run("translate --out " + d.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error InvalidArgument ", 0), 0u) << r.err;
  write_file(d / "enc.csv", "0,0\n100,0.5\n");
  write_file(d / "e.csv", "# width=4 height=3\n50,0,0,1\n200,0,0,1\n");
  r = run("calibrate --events " + (d / "e.csv").string() + " --encoder " + (d / "enc.csv").string());
  EXPECT_EQ(r.err.rfind("error OutOfRange ", 0), 0u) << r.err;
}

TEST(Cli, SynthWritesTheRecording) {
  const fs::path s = recording() / "synth";
  for (const char* f : {"events.amev", "encoder.csv", "edges.txt", "truth.txt"}) {
    EXPECT_TRUE(fs::exists(s / f)) << f;
  }
  const CliResult info = run("info --events " + (s / "events.amev").string());
  EXPECT_EQ(info.code, 0);
  EXPECT_GT(value_of(info.out, "events"), 10000.0);
  EXPECT_EQ(value_of(info.out, "width"), 240.0);
  EXPECT_NE(read_file(s / "truth.txt").find("r_px = 25\n"), std::string::npos);
}

TEST(Cli, CalibrateCompensateEval) {
  const fs::path d = recording();
  const fs::path s = d / "synth";
  const std::string stream = " --events " + (s / "events.amev").string() + " --encoder " + (s / "encoder.csv").string();
  const CliResult cal = run("calibrate" + stream + " --out " + (d / "cal").string());
  ASSERT_EQ(cal.code, 0) << cal.err;
  EXPECT_NEAR(value_of(cal.out, "r_px"), 25.0, 0.5);
  EXPECT_NEAR(value_of(cal.out, "theta_b_deg"), 40.0, 1.0);
  EXPECT_LT(value_of(cal.out, "cost"), value_of(cal.out, "cost_uncompensated"));
  EXPECT_EQ(count_lines(read_file(d / "cal" / "cost_surface.csv")), 1u + 21u * 72u);
  const CalibrationFile file = read_calibration(d / "cal" / "calibration.txt");
  EXPECT_EQ(file.params.center.x, 119.5);

  const std::string calib = " --calibration " + (d / "cal" / "calibration.txt").string();
  const CliResult comp = run("compensate" + stream + calib + " --out " + (d / "comp").string());
  ASSERT_EQ(comp.code, 0) << comp.err;
  const double events = value_of(comp.out, "events");
  EXPECT_EQ(static_cast<double>(count_lines(read_file(d / "comp" / "compensated.csv"))), events + 1.0);
  EXPECT_EQ(read_pgm(d / "comp" / "iwe_after.pgm").width, 240);
  EXPECT_TRUE(fs::exists(d / "comp" / "iwe_before.pgm"));

  write_file(d / "eval.cfg", "window_ms = 100\n");
  const CliResult ev = run("eval" + stream + calib + " --edges " + (s / "edges.txt").string() + " --config " +
                     (d / "eval.cfg").string() + " --out " + (d / "eval").string());
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_EQ(ev.out.rfind("stream  events", 0), 0u) << ev.out;
  EXPECT_EQ(ev.out, read_file(d / "eval" / "report.txt"));
  std::istringstream csv(read_file(d / "eval" / "report.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  std::vector<std::string> cells;
  std::stringstream rs(row);
  for (std::string c; std::getline(rs, c, ',');) cells.push_back(c);
  ASSERT_EQ(cells.size(), 8u);
  EXPECT_EQ(cells[0], "events");
  EXPECT_GT(std::stod(cells[5]), 0.8);  // ODS-F
  EXPECT_LT(std::stod(cells[7]), 1.0);  // edge spread, px
  EXPECT_TRUE(fs::exists(d / "eval" / "events_iwe.pgm"));
}

TEST(Cli, OutputsAreDeterministic) {
  const fs::path d = scratch_dir("cli_determinism");
  write_file(d / "scene.cfg", "duration_s = 0.2\nwidth = 120\nheight = 90\nmargin = 10\njitter_px = 3\nnoise_fraction = 0.05\n");
  const std::string cfg = " --config " + (d / "scene.cfg").string();
  ASSERT_EQ(run("synth" + cfg + " --seed 9 --out " + (d / "a").string()).code, 0);
  ASSERT_EQ(run("synth" + cfg + " --seed 9 --threads 3 --out " + (d / "b").string()).code, 0);
  ASSERT_EQ(run("synth" + cfg + " --seed 10 --out " + (d / "c").string()).code, 0);
  EXPECT_EQ(read_file(d / "a" / "events.amev"), read_file(d / "b" / "events.amev"));
  EXPECT_NE(read_file(d / "a" / "events.amev"), read_file(d / "c" / "events.amev"));
  EXPECT_EQ(read_file(d / "a" / "edges.txt"), read_file(d / "b" / "edges.txt"));

  const std::string stream = " --events " + (d / "a" / "events.amev").string() + " --encoder " +
                             (d / "a" / "encoder.csv").string();
  ASSERT_EQ(run("calibrate" + stream + " --out " + (d / "ca").string()).code, 0);
  ASSERT_EQ(run("calibrate" + stream + " --threads 3 --out " + (d / "cb").string()).code, 0);
  EXPECT_EQ(read_file(d / "ca" / "calibration.txt"), read_file(d / "cb" / "calibration.txt"));
  EXPECT_EQ(read_file(d / "ca" / "cost_surface.csv"), read_file(d / "cb" / "cost_surface.csv"));
}

TEST(Cli, TranslateEventsAndFormats) {
  const fs::path d = scratch_dir("cli_translate");
  write_file(d / "cam.csv", "# width=100 height=80\n1000,50,40,1\n2000,10,10,-1\n3000,60,30,1\n");
  write_file(d / "t.cfg", "r_px = 5\ntheta_b_deg = 0\n");
  const CliResult r = run("translate --events " + (d / "cam.csv").string() + " --config " + (d / "t.cfg").string() +
                    " --format csv --out " + d.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "events 3\n");
  const EventStream s = read_events(d / "events.csv").stream;
  ASSERT_EQ(s.size(), 3u);
  // theta = 2 pi * 12 Hz * 1 ms; displacement (5 cos theta, 5 sin theta), rounded.
  const double th = kTwoPi * 12.0 * 1e-3;
  EXPECT_EQ(s[0].x, static_cast<int>(std::floor(50 + 5 * std::cos(th) + 0.5)));
  EXPECT_EQ(s[0].y, static_cast<int>(std::floor(40 + 5 * std::sin(th) + 0.5)));
  EXPECT_FALSE(read_encoder(d / "encoder.csv").empty());
}

TEST(Cli, TranslateFramesDirectory) {
  const fs::path d = scratch_dir("cli_frames");
  write_file(d / "scene.cfg", "duration_s = 0.02\nwidth = 80\nheight = 60\nmargin = 8\nspacing = 30\nbar_length = 16\nbar_width = 6\nwrite_frames = true\nprism = false\n");
  ASSERT_EQ(run("synth --config " + (d / "scene.cfg").string() + " --out " + d.string()).code, 0);
  ASSERT_TRUE(fs::exists(d / "frames" / "timestamps.txt"));
  const CliResult r = run("translate --frames " + (d / "frames").string() + " --out " + (d / "t").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_GT(value_of(r.out, "events"), 100.0);
}
