#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "evkit/core.hpp"

namespace evkit {

// File formats owned by this library:
//
//   .evt  binary events   header: magic "EVT0", version u16, width u16,
//                         height u16, count u64; then `count` 14-byte records
//                         (t u64, x u16, y u16, p i8, pad u8). Little-endian.
//   .txt  text events     `t x y p` per line, `#` comments; the writer puts
//                         `# evkit-events <width> <height> <count>` first.
//   .egt  flat tensor     magic "EGT0", version u16, dtype u8 (1 = f64),
//                         rank u8, dims u64[rank], row-major f64 payload.
//   frame directory       frame_%06d.pgm|.ppm (8-bit binary PNM) plus
//                         timestamps.txt, one integer microsecond per line.

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

inline std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ifstream in(path, mode);
    if (!in) throw io_error("cannot open " + path.string());
    return in;
}

}  // namespace detail

// Writes through a temp file in the same directory, then renames, so an
// interrupted run never leaves a truncated output behind.
template <class WriteFn>
void atomic_write_file(const std::filesystem::path& path, WriteFn&& write_fn,
                       std::ios::openmode mode = std::ios::binary) {
    namespace fs = std::filesystem;
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, mode | std::ios::trunc);
        if (!out) throw io_error("cannot open " + tmp.string() + " for writing");
        write_fn(out);
        out.flush();
        if (!out) throw io_error("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw io_error("cannot rename " + tmp.string() + " to " + path.string());
    }
}

// ---------------------------------------------------------------------------
// Text event format
// ---------------------------------------------------------------------------

inline void write_events_text(const EventStream& s, const std::filesystem::path& path) {
    atomic_write_file(path, [&](std::ofstream& out) {
        out << "# evkit-events " << s.width() << ' ' << s.height() << ' ' << s.size() << '\n';
        for (const Event& e : s)
            out << e.t << ' ' << e.x << ' ' << e.y << ' ' << static_cast<int>(e.p) << '\n';
    }, std::ios::out);
}

namespace detail {

inline EventStream read_events_text_impl(const std::filesystem::path& path,
                                         std::optional<std::uint16_t> width,
                                         std::optional<std::uint16_t> height) {
    std::ifstream in = open_input(path, std::ios::in);
    std::vector<Event> events;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            // The writer's header comment carries the resolution.
            std::istringstream hs(line.substr(1));
            std::string tag;
            if (hs >> tag && tag == "evkit-events") {
                unsigned long w = 0, h = 0;
                if (hs >> w >> h) {
                    if (!width) width = static_cast<std::uint16_t>(w);
                    if (!height) height = static_cast<std::uint16_t>(h);
                }
            }
            continue;
        }
        std::istringstream ls(line);
        std::uint64_t t;
        long long x, y, p;
        if (!(ls >> t >> x >> y >> p))
            throw parse_error("expected `t x y p` in " + path.string(), lineno);
        std::string extra;
        if (ls >> extra) throw parse_error("trailing token after `t x y p`", lineno);
        if (x < 0 || y < 0 || x > 0xffff || y > 0xffff)
            throw parse_error("coordinate out of u16 range", lineno);
        if (p != -1 && p != 0 && p != 1) throw parse_error("polarity must be -1, 0, or 1", lineno);
        events.push_back(Event{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                               static_cast<std::int8_t>(p == 0 ? -1 : p)});
    }
    if (!width || !height)
        throw format_error("no resolution header in " + path.string() +
                           " and none supplied by the caller");
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    return EventStream(*width, *height, std::move(events));
}

}  // namespace detail

// Resolution comes from the `# evkit-events` header comment.
inline EventStream read_events_text(const std::filesystem::path& path) {
    return detail::read_events_text_impl(path, std::nullopt, std::nullopt);
}

// Resolution supplied by the caller; any header comment is ignored.
inline EventStream read_events_text(const std::filesystem::path& path, std::uint16_t width,
                                    std::uint16_t height) {
    return detail::read_events_text_impl(path, width, height);
}

// ---------------------------------------------------------------------------
// Binary event format
// ---------------------------------------------------------------------------

inline constexpr char kEventMagic[4] = {'E', 'V', 'T', '0'};
inline constexpr std::uint16_t kEventFormatVersion = 1;
inline constexpr std::size_t kEventHeaderBytes = 18;
inline constexpr std::size_t kEventRecordBytes = 14;

inline void write_events_binary(const EventStream& s, const std::filesystem::path& path) {
    atomic_write_file(path, [&](std::ofstream& out) {
        std::string buf;
        buf.reserve(kEventHeaderBytes + s.size() * kEventRecordBytes);
        buf.append(kEventMagic, 4);
        detail::put_u16(buf, kEventFormatVersion);
        detail::put_u16(buf, s.width());
        detail::put_u16(buf, s.height());
        detail::put_u64(buf, s.size());
        for (const Event& e : s) {
            detail::put_u64(buf, e.t);
            detail::put_u16(buf, e.x);
            detail::put_u16(buf, e.y);
            buf.push_back(static_cast<char>(e.p));
            buf.push_back('\0');  // pad
        }
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    });
}

inline EventStream read_events_binary(const std::filesystem::path& path) {
    std::ifstream in = detail::open_input(path, std::ios::binary);
    std::array<unsigned char, kEventHeaderBytes> hdr;
    in.read(reinterpret_cast<char*>(hdr.data()), kEventHeaderBytes);
    if (in.gcount() != static_cast<std::streamsize>(kEventHeaderBytes))
        throw format_error("event file shorter than its header: " + path.string());
    if (std::memcmp(hdr.data(), kEventMagic, 4) != 0)
        throw format_error("bad magic in " + path.string() + " (want EVT0)");
    const std::uint16_t version = detail::get_u16(hdr.data() + 4);
    if (version != kEventFormatVersion)
        throw format_error("unsupported event file version " + std::to_string(version));
    const std::uint16_t width = detail::get_u16(hdr.data() + 6);
    const std::uint16_t height = detail::get_u16(hdr.data() + 8);
    const std::uint64_t count = detail::get_u64(hdr.data() + 10);

    // Never reads past `count` records, even if the file is longer.
    std::vector<unsigned char> blob(count * kEventRecordBytes);
    in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    const std::uint64_t got = static_cast<std::uint64_t>(in.gcount());
    if (got != blob.size())
        throw corruption_error("truncated event records in " + path.string() + ": expected " +
                               std::to_string(blob.size()) + " bytes, got " + std::to_string(got));

    std::vector<Event> events(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const unsigned char* rec = blob.data() + i * kEventRecordBytes;
        events[i].t = detail::get_u64(rec);
        events[i].x = detail::get_u16(rec + 8);
        events[i].y = detail::get_u16(rec + 10);
        events[i].p = static_cast<std::int8_t>(rec[12]);
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    return EventStream(width, height, std::move(events));
}

// ---------------------------------------------------------------------------
// Frame directories (binary PNM + timestamp sidecar)
// ---------------------------------------------------------------------------

namespace detail {

inline std::string frame_stem(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%06zu", index);
    return buf;
}

inline int pnm_next_token(std::istream& in) {
    // PNM headers allow `#` comments between tokens.
    int c = in.get();
    while (c == '#' || std::isspace(c)) {
        if (c == '#')
            while (c != '\n' && c != EOF) c = in.get();
        c = in.get();
    }
    return c;
}

inline unsigned pnm_read_uint(std::istream& in, const std::filesystem::path& path) {
    int c = pnm_next_token(in);
    if (c == EOF || !std::isdigit(c)) throw format_error("malformed PNM header: " + path.string());
    unsigned v = 0;
    while (std::isdigit(c)) {
        v = v * 10 + static_cast<unsigned>(c - '0');
        c = in.get();
    }
    return v;
}

}  // namespace detail

// 8-bit binary PGM (P5, grayscale) or PPM (P6, RGB).
inline Frame read_pnm(const std::filesystem::path& path) {
    std::ifstream in = detail::open_input(path, std::ios::binary);
    char p, kind;
    in.get(p).get(kind);
    if (p != 'P' || (kind != '5' && kind != '6'))
        throw format_error("not a binary PGM/PPM file: " + path.string());
    const std::uint32_t channels = (kind == '5') ? 1 : 3;
    const unsigned width = detail::pnm_read_uint(in, path);
    const unsigned height = detail::pnm_read_uint(in, path);
    const unsigned maxval = detail::pnm_read_uint(in, path);
    if (maxval != 255) throw format_error("only maxval 255 PNM supported: " + path.string());
    // pnm_read_uint consumed the single whitespace after maxval; binary data starts here.

    std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height * channels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw corruption_error("truncated PNM payload: " + path.string());

    std::vector<double> pixels(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) pixels[i] = raw[i] / 255.0;
    return Frame(width, height, channels, std::move(pixels));
}

inline void write_pnm(const Frame& f, const std::filesystem::path& path) {
    atomic_write_file(path, [&](std::ofstream& out) {
        out << (f.channels() == 1 ? "P5" : "P6") << '\n'
            << f.width() << ' ' << f.height() << '\n'
            << "255\n";
        std::vector<unsigned char> raw(f.pixels().size());
        for (std::size_t i = 0; i < raw.size(); ++i)
            raw[i] = static_cast<unsigned char>(std::lround(f.pixels()[i] * 255.0));
        out.write(reinterpret_cast<const char*>(raw.data()),
                  static_cast<std::streamsize>(raw.size()));
    });
}

inline FrameSequence read_frames(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw io_error("not a directory: " + dir.string());

    std::vector<Frame> frames;
    for (std::size_t i = 0;; ++i) {
        const fs::path pgm = dir / (detail::frame_stem(i) + ".pgm");
        const fs::path ppm = dir / (detail::frame_stem(i) + ".ppm");
        if (fs::exists(pgm))
            frames.push_back(read_pnm(pgm));
        else if (fs::exists(ppm))
            frames.push_back(read_pnm(ppm));
        else
            break;
    }
    if (frames.empty()) throw io_error("no frame_%06d images in " + dir.string());

    const fs::path manifest = dir / "timestamps.txt";
    std::ifstream ts = detail::open_input(manifest, std::ios::in);
    std::vector<Timestamp> timestamps;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ts, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::uint64_t t;
        if (!(ls >> t)) throw parse_error("bad timestamp in " + manifest.string(), lineno);
        timestamps.push_back(t);
    }
    if (timestamps.size() < frames.size())
        throw validation_error("manifest error: " + std::to_string(frames.size()) +
                               " frames but only " + std::to_string(timestamps.size()) +
                               " timestamps in " + manifest.string());
    if (timestamps.size() > frames.size())
        throw validation_error("manifest error: more timestamps than frames in " +
                               manifest.string());
    return FrameSequence(std::move(frames), std::move(timestamps));
}

inline void write_frames(const FrameSequence& seq, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const char* ext = seq.frame(i).channels() == 1 ? ".pgm" : ".ppm";
        write_pnm(seq.frame(i), dir / (detail::frame_stem(i) + ext));
    }
    atomic_write_file(dir / "timestamps.txt", [&](std::ofstream& out) {
        for (Timestamp t : seq.timestamps()) out << t << '\n';
    }, std::ios::out);
}

// ---------------------------------------------------------------------------
// Flat tensor container
// ---------------------------------------------------------------------------

struct Tensor {
    std::vector<std::uint64_t> dims;
    std::vector<double> values;

    std::size_t size() const {
        std::size_t n = 1;
        for (std::uint64_t d : dims) n *= d;
        return n;
    }
};

inline constexpr char kTensorMagic[4] = {'E', 'G', 'T', '0'};
inline constexpr std::uint16_t kTensorFormatVersion = 1;

inline void write_tensor(const Tensor& t, const std::filesystem::path& path) {
    if (t.values.size() != t.size()) throw shape_error("tensor buffer does not match its dims");
    atomic_write_file(path, [&](std::ofstream& out) {
        std::string buf;
        buf.append(kTensorMagic, 4);
        detail::put_u16(buf, kTensorFormatVersion);
        buf.push_back(1);  // dtype: f64
        buf.push_back(static_cast<char>(t.dims.size()));
        for (std::uint64_t d : t.dims) detail::put_u64(buf, d);
        for (double v : t.values) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            detail::put_u64(buf, bits);
        }
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    });
}

inline Tensor to_tensor(const FeatureMap& m) {
    return Tensor{{m.channels(), m.height(), m.width()}, m.values()};
}

inline FeatureMap feature_map_from_tensor(const Tensor& t) {
    if (t.dims.size() != 3) throw shape_error("feature map tensor must have rank 3");
    return FeatureMap(static_cast<std::uint32_t>(t.dims[0]), static_cast<std::uint32_t>(t.dims[1]),
                      static_cast<std::uint32_t>(t.dims[2]), t.values);
}

inline Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in = detail::open_input(path, std::ios::binary);
    std::array<unsigned char, 8> hdr;
    in.read(reinterpret_cast<char*>(hdr.data()), 8);
    if (in.gcount() != 8 || std::memcmp(hdr.data(), kTensorMagic, 4) != 0)
        throw format_error("bad tensor magic in " + path.string() + " (want EGT0)");
    if (detail::get_u16(hdr.data() + 4) != kTensorFormatVersion)
        throw format_error("unsupported tensor version in " + path.string());
    if (hdr[6] != 1) throw format_error("unsupported tensor dtype in " + path.string());
    const unsigned rank = hdr[7];

    Tensor t;
    std::vector<unsigned char> dimbuf(rank * 8);
    in.read(reinterpret_cast<char*>(dimbuf.data()), static_cast<std::streamsize>(dimbuf.size()));
    if (in.gcount() != static_cast<std::streamsize>(dimbuf.size()))
        throw corruption_error("truncated tensor dims in " + path.string());
    for (unsigned i = 0; i < rank; ++i) t.dims.push_back(detail::get_u64(dimbuf.data() + 8 * i));

    std::vector<unsigned char> payload(t.size() * 8);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (in.gcount() != static_cast<std::streamsize>(payload.size()))
        throw corruption_error("truncated tensor payload in " + path.string() + ": expected " +
                               std::to_string(payload.size()) + " bytes, got " +
                               std::to_string(in.gcount()));
    t.values.resize(t.size());
    for (std::size_t i = 0; i < t.values.size(); ++i) {
        const std::uint64_t bits = detail::get_u64(payload.data() + 8 * i);
        std::memcpy(&t.values[i], &bits, 8);
    }
    return t;
}

}  // namespace evkit
