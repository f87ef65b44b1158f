#pragma once

// Event and encoder file formats.
//
// CSV:  one event per line, `t_us,x,y,polarity` with polarity 1 or -1. Lines
//       starting with '#' are comments; a `# width=W height=H` comment fixes
//       the resolution.
// AMEV: little-endian binary. "AMEV", u32 version (1), u16 width, u16 height,
//       u64 count, then `count` packed 13-byte records: u64 t_us, u16 x,
//       u16 y, u8 polarity (1 for +1, 0 for -1).
// Encoder CSV: `t_us,theta_rad`.

#include <charconv>
#include <cstdio>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "amiev/error.hpp"
#include "amiev/events.hpp"

namespace amiev {

enum class EventFormat { Csv, Amev };

inline EventFormat parse_event_format(std::string_view s) {
  if (s == "csv") return EventFormat::Csv;
  if (s == "amev") return EventFormat::Amev;
  fail(ErrorCode::InvalidArgument, "unknown event format '" + std::string(s) + "'");
}

inline std::string_view extension(EventFormat f) { return f == EventFormat::Csv ? ".csv" : ".amev"; }

inline EventFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".amev" ? EventFormat::Amev : EventFormat::Csv;
}

struct ReadResult {
  EventStream stream;
  std::size_t reordered = 0;  // events found out of order and sorted
};

namespace detail {

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::string data;
  in.seekg(0, std::ios::end);
  data.resize(static_cast<std::size_t>(in.tellg()));
  in.seekg(0);
  in.read(data.data(), static_cast<std::streamsize>(data.size()));
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  return data;
}

inline void dump(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot create " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
}

/// Splits `text` into lines and yields the non-comment ones together with
/// their 1-based line numbers. Comment lines go to `on_comment`.
template <typename OnLine, typename OnComment>
void for_each_line(std::string_view text, OnLine on_line, OnComment on_comment) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      on_comment(line);
      continue;
    }
    on_line(line, line_no);
  }
}

template <typename T>
T parse_field(std::string_view& line, std::size_t line_no, bool last) {
  const std::size_t comma = line.find(',');
  if (last != (comma == std::string_view::npos)) {
    fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": wrong number of fields");
  }
  std::string_view tok = line.substr(0, comma);
  while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
  while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
  T value{};
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    fail(ErrorCode::ParseError,
         "line " + std::to_string(line_no) + ": cannot parse '" + std::string(tok) + "'");
  }
  line = last ? std::string_view{} : line.substr(comma + 1);
  return value;
}

inline std::optional<Resolution> parse_resolution_comment(std::string_view line) {
  int w = 0, h = 0;
  const std::string s(line);
  if (std::sscanf(s.c_str(), "# width=%d height=%d", &w, &h) == 2) return Resolution{w, h};
  return std::nullopt;
}

template <typename T>
void put_le(std::string& buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(const char* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return static_cast<T>(v);
}

inline void append_number(std::string& out, auto value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, res.ptr);
}

inline constexpr std::size_t kAmevHeader = 20;
inline constexpr std::size_t kAmevRecord = 13;

}  // namespace detail

inline ReadResult finalize_read(Resolution res, std::vector<Event> events) {
  if (events.empty()) fail(ErrorCode::EmptyStream, "event file contains no events");
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].x >= res.width || events[i].y >= res.height) {
      fail(ErrorCode::ResolutionMismatch, "event " + std::to_string(i) + " at (" +
                                              std::to_string(events[i].x) + "," +
                                              std::to_string(events[i].y) + ") exceeds " +
                                              std::to_string(res.width) + "x" +
                                              std::to_string(res.height));
    }
  }
  const std::size_t reordered = sort_events(events);
  return {EventStream(res, std::move(events)), reordered};
}

/// Reads an event file. For CSV without a resolution comment, `expected`
/// supplies the resolution; when both are present they must agree.
inline ReadResult read_events(const std::filesystem::path& path, EventFormat format,
                              std::optional<Resolution> expected = std::nullopt) {
  const std::string data = detail::slurp(path);
  if (format == EventFormat::Amev) {
    if (data.size() < detail::kAmevHeader || std::memcmp(data.data(), "AMEV", 4) != 0) {
      fail(ErrorCode::ParseError, "offset 0: missing AMEV magic");
    }
    const auto version = detail::get_le<std::uint32_t>(data.data() + 4);
    if (version != 1) fail(ErrorCode::ParseError, "offset 4: unsupported version " + std::to_string(version));
    const Resolution res{detail::get_le<std::uint16_t>(data.data() + 8),
                         detail::get_le<std::uint16_t>(data.data() + 10)};
    if (expected && *expected != res) fail(ErrorCode::ResolutionMismatch, "file resolution differs from expected");
    const auto count = detail::get_le<std::uint64_t>(data.data() + 12);
    if (data.size() != detail::kAmevHeader + count * detail::kAmevRecord) {
      fail(ErrorCode::ParseError, "offset 12: record count " + std::to_string(count) +
                                      " does not match file size " + std::to_string(data.size()));
    }
    std::vector<Event> events(count);
    const char* p = data.data() + detail::kAmevHeader;
    for (std::uint64_t i = 0; i < count; ++i, p += detail::kAmevRecord) {
      const auto pol = static_cast<unsigned char>(p[12]);
      if (pol > 1) {
        fail(ErrorCode::ParseError, "offset " + std::to_string(p + 12 - data.data()) + ": bad polarity byte");
      }
      events[i] = {detail::get_le<std::uint64_t>(p), detail::get_le<std::uint16_t>(p + 8),
                   detail::get_le<std::uint16_t>(p + 10), static_cast<std::int8_t>(pol ? 1 : -1)};
    }
    return finalize_read(res, std::move(events));
  }

  std::optional<Resolution> declared;
  std::vector<Event> events;
  events.reserve(data.size() / 16);
  detail::for_each_line(
      data,
      [&](std::string_view line, std::size_t no) {
        Event e;
        e.t = detail::parse_field<std::uint64_t>(line, no, false);
        e.x = detail::parse_field<std::uint16_t>(line, no, false);
        e.y = detail::parse_field<std::uint16_t>(line, no, false);
        const int pol = detail::parse_field<int>(line, no, true);
        if (pol != 1 && pol != -1) {
          fail(ErrorCode::ParseError, "line " + std::to_string(no) + ": polarity must be 1 or -1");
        }
        e.polarity = static_cast<std::int8_t>(pol);
        events.push_back(e);
      },
      [&](std::string_view line) {
        if (auto r = detail::parse_resolution_comment(line)) declared = r;
      });
  if (declared && expected && *declared != *expected) {
    fail(ErrorCode::ResolutionMismatch, "declared resolution differs from expected");
  }
  const std::optional<Resolution> res = declared ? declared : expected;
  if (!res) fail(ErrorCode::ParseError, "CSV file declares no resolution and none was given");
  return finalize_read(*res, std::move(events));
}

inline ReadResult read_events(const std::filesystem::path& path,
                              std::optional<Resolution> expected = std::nullopt) {
  return read_events(path, format_from_path(path), expected);
}

inline void write_events(const EventStream& stream, const std::filesystem::path& path, EventFormat format) {
  std::string buf;
  if (format == EventFormat::Amev) {
    buf.reserve(detail::kAmevHeader + stream.size() * detail::kAmevRecord);
    buf.append("AMEV", 4);
    detail::put_le<std::uint32_t>(buf, 1);
    detail::put_le<std::uint16_t>(buf, static_cast<std::uint16_t>(stream.width()));
    detail::put_le<std::uint16_t>(buf, static_cast<std::uint16_t>(stream.height()));
    detail::put_le<std::uint64_t>(buf, stream.size());
    for (const Event& e : stream.events()) {
      detail::put_le<std::uint64_t>(buf, e.t);
      detail::put_le<std::uint16_t>(buf, e.x);
      detail::put_le<std::uint16_t>(buf, e.y);
      detail::put_le<std::uint8_t>(buf, e.polarity > 0 ? 1 : 0);
    }
  } else {
    buf.reserve(32 + stream.size() * 20);
    buf += "# width=" + std::to_string(stream.width()) + " height=" + std::to_string(stream.height()) + "\n";
    for (const Event& e : stream.events()) {
      detail::append_number(buf, e.t);
      buf += ',';
      detail::append_number(buf, e.x);
      buf += ',';
      detail::append_number(buf, e.y);
      buf += e.polarity > 0 ? ",1\n" : ",-1\n";
    }
  }
  detail::dump(path, buf);
}

/// Sub-pixel events as CSV: `t_us,x,y,polarity` with shortest round-trip
/// coordinates.
inline void write_warped_csv(const WarpedStream& stream, const std::filesystem::path& path) {
  std::string buf;
  buf.reserve(48 + stream.size() * 36);
  buf += "# width=" + std::to_string(stream.resolution.width) + " height=" + std::to_string(stream.resolution.height) + "\n";
  for (const WarpedEvent& e : stream.events) {
    detail::append_number(buf, e.t);
    buf += ',';
    detail::append_number(buf, e.x);
    buf += ',';
    detail::append_number(buf, e.y);
    buf += e.polarity > 0 ? ",1\n" : ",-1\n";
  }
  detail::dump(path, buf);
}

inline std::vector<EncoderSample> read_encoder(const std::filesystem::path& path) {
  const std::string data = detail::slurp(path);
  std::vector<EncoderSample> out;
  detail::for_each_line(
      data,
      [&](std::string_view line, std::size_t no) {
        EncoderSample s;
        s.t = detail::parse_field<std::uint64_t>(line, no, false);
        s.theta = detail::parse_field<double>(line, no, true);
        if (!out.empty() && s.t <= out.back().t) {
          fail(ErrorCode::ParseError, "line " + std::to_string(no) + ": encoder time not increasing");
        }
        out.push_back(s);
      },
      [](std::string_view) {});
  if (out.empty()) fail(ErrorCode::EmptyStream, "encoder file contains no samples");
  return out;
}

inline void write_encoder(std::span<const EncoderSample> samples, const std::filesystem::path& path) {
  std::string buf = "# t_us,theta_rad\n";
  for (const auto& s : samples) {
    detail::append_number(buf, s.t);
    buf += ',';
    detail::append_number(buf, s.theta);
    buf += '\n';
  }
  detail::dump(path, buf);
}

}  // namespace amiev
