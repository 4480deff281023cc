#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "evkit/io.hpp"
#include "evkit/rng.hpp"
#include "support/fixtures.hpp"

using namespace evkit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("evkit_test_" + std::to_string(Catch::rngSeed()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

void write_text_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("text reader transcribes t x y p with caller-supplied resolution") {
    TempDir tmp;
    const fs::path f = tmp.path / "e.txt";
    write_text_file(f, "5 1 2 1\n7 0 0 -1\n");
    const EventStream s = read_events_text(f, 4, 4);
    REQUIRE(s.size() == 2);
    CHECK(s.events()[0] == Event{5, 1, 2, 1});
    CHECK(s.events()[1] == Event{7, 0, 0, -1});
}

TEST_CASE("text reader maps polarity 0 to -1") {
    TempDir tmp;
    const fs::path f = tmp.path / "e.txt";
    write_text_file(f, "5 1 2 0\n");
    CHECK(read_events_text(f, 4, 4).events()[0].p == -1);
}

TEST_CASE("empty text file yields an empty stream") {
    TempDir tmp;
    const fs::path f = tmp.path / "e.txt";
    write_text_file(f, "");
    CHECK(read_events_text(f, 4, 4).empty());
    // without a resolution source the format is incomplete
    CHECK_THROWS_AS(read_events_text(f), format_error);
}

TEST_CASE("short line is a parse error carrying the line number") {
    TempDir tmp;
    const fs::path f = tmp.path / "e.txt";
    write_text_file(f, "5 1 2\n");
    try {
        read_events_text(f, 4, 4);
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        CHECK(e.line() == 1);
    }
}

TEST_CASE("trailing tokens and bad polarity are parse errors") {
    TempDir tmp;
    write_text_file(tmp.path / "a.txt", "5 1 2 1 9\n");
    CHECK_THROWS_AS(read_events_text(tmp.path / "a.txt", 4, 4), parse_error);
    write_text_file(tmp.path / "b.txt", "5 1 2 3\n");
    CHECK_THROWS_AS(read_events_text(tmp.path / "b.txt", 4, 4), parse_error);
}

TEST_CASE("out-of-bounds coordinates fail stream validation") {
    TempDir tmp;
    const fs::path f = tmp.path / "e.txt";
    write_text_file(f, "5 9 0 1\n");
    CHECK_THROWS_AS(read_events_text(f, 4, 4), validation_error);
}

TEST_CASE("writing an empty stream produces a header comment only") {
    TempDir tmp;
    const fs::path f = tmp.path / "e.txt";
    write_events_text(EventStream(4, 4, {}), f);
    const std::string content = slurp(f);
    CHECK(content == "# evkit-events 4 4 0\n");
    CHECK(read_events_text(f).empty());
}

TEST_CASE("single-event stream writes one data line") {
    TempDir tmp;
    const fs::path f = tmp.path / "e.txt";
    write_events_text(EventStream(4, 4, {{5, 1, 2, -1}}), f);
    CHECK(slurp(f) == "# evkit-events 4 4 1\n5 1 2 -1\n");
}

TEST_CASE("text round trip is exact on generated streams") {
    TempDir tmp;
    Rng rng(21);
    for (int i = 0; i < 5; ++i) {
        const EventStream s = fixtures::random_stream(rng, 32, 24, i == 0 ? 10000 : 500);
        const fs::path f = tmp.path / ("rt" + std::to_string(i) + ".txt");
        write_events_text(s, f);
        CHECK(read_events_text(f) == s);
    }
}

TEST_CASE("binary header with count 0 reads as an empty stream") {
    TempDir tmp;
    const fs::path f = tmp.path / "e.evt";
    write_events_binary(EventStream(7, 9, {}), f);
    const EventStream s = read_events_binary(f);
    CHECK(s.empty());
    CHECK(s.width() == 7);
    CHECK(s.height() == 9);
}

TEST_CASE("binary round trip is exact and matches the text reader") {
    TempDir tmp;
    Rng rng(22);
    const EventStream s = fixtures::random_stream(rng, 64, 48, 10000);
    const fs::path fb = tmp.path / "e.evt";
    const fs::path ft = tmp.path / "e.txt";
    write_events_binary(s, fb);
    write_events_text(s, ft);
    CHECK(read_events_binary(fb) == s);
    CHECK(read_events_binary(fb) == read_events_text(ft));
}

TEST_CASE("bad magic is a format error") {
    TempDir tmp;
    const fs::path f = tmp.path / "e.evt";
    write_text_file(f, "NOPE------------------");
    CHECK_THROWS_AS(read_events_binary(f), format_error);
}

TEST_CASE("truncated record region is a corruption error naming byte counts") {
    TempDir tmp;
    const fs::path f = tmp.path / "e.evt";
    write_events_binary(EventStream(4, 4, {{1, 0, 0, 1}, {2, 1, 1, -1}}), f);
    std::string bytes = slurp(f);
    bytes.resize(bytes.size() - 5);  // cut into the second record
    write_text_file(f, bytes);
    try {
        read_events_binary(f);
        FAIL("expected corruption_error");
    } catch (const corruption_error& e) {
        CHECK(std::string(e.what()).find("28") != std::string::npos);  // expected record bytes
        CHECK(std::string(e.what()).find("23") != std::string::npos);  // actual
    }
}

TEST_CASE("binary reader stops at count even if the file is longer") {
    TempDir tmp;
    const fs::path f = tmp.path / "e.evt";
    const EventStream s(4, 4, {{1, 0, 0, 1}});
    write_events_binary(s, f);
    std::ofstream app(f, std::ios::binary | std::ios::app);
    app << "trailing garbage beyond the declared records";
    app.close();
    CHECK(read_events_binary(f) == s);
}

TEST_CASE("frame directory round trip preserves 8-bit data exactly") {
    TempDir tmp;
    Rng rng(23);
    for (std::uint32_t channels : {1u, 3u}) {
        std::vector<Frame> frames;
        std::vector<Timestamp> times;
        for (int i = 0; i < 4; ++i) {
            frames.push_back(fixtures::random_frame(rng, 17, 11, channels));
            times.push_back(1000 * (i + 1));
        }
        const FrameSequence seq(std::move(frames), std::move(times));
        const fs::path dir = tmp.path / ("frames" + std::to_string(channels));
        write_frames(seq, dir);
        const FrameSequence back = read_frames(dir);
        REQUIRE(back.size() == seq.size());
        for (std::size_t i = 0; i < seq.size(); ++i) {
            CHECK(back.frame(i) == seq.frame(i));
            CHECK(back.timestamp(i) == seq.timestamp(i));
        }
    }
}

TEST_CASE("two uniform frames with timestamps load as a sequence") {
    TempDir tmp;
    const Frame f = Frame::filled(8, 8, 1, 0.5);
    write_frames(FrameSequence({f, f}, {0, 1000}), tmp.path / "d");
    const FrameSequence seq = read_frames(tmp.path / "d");
    CHECK(seq.size() == 2);
    CHECK(seq.timestamp(1) == 1000);
}

TEST_CASE("non-monotonic or missing timestamps are manifest errors") {
    TempDir tmp;
    const Frame f = Frame::filled(8, 8, 1, 0.5);
    write_frames(FrameSequence({f, f}, {0, 1000}), tmp.path / "d");
    write_text_file(tmp.path / "d" / "timestamps.txt", "1000\n0\n");
    CHECK_THROWS_AS(read_frames(tmp.path / "d"), validation_error);
    write_text_file(tmp.path / "d" / "timestamps.txt", "1000\n");
    CHECK_THROWS_AS(read_frames(tmp.path / "d"), validation_error);
}

TEST_CASE("tensor container round trip") {
    TempDir tmp;
    Rng rng(24);
    Tensor t;
    t.dims = {3, 4, 5};
    for (std::size_t i = 0; i < 60; ++i) t.values.push_back(rng.gaussian());
    const fs::path f = tmp.path / "t.egt";
    write_tensor(t, f);
    const Tensor back = read_tensor(f);
    CHECK(back.dims == t.dims);
    CHECK(back.values == t.values);
    CHECK_THROWS_AS(read_tensor(tmp.path / "absent.egt"), io_error);
}

TEST_CASE("feature maps serialize through the tensor container losslessly") {
    TempDir tmp;
    Rng rng(25);
    const FeatureMap m = fixtures::random_feature_map(rng, 2, 3, 4);
    const fs::path f = tmp.path / "m.egt";
    write_tensor(to_tensor(m), f);
    CHECK(feature_map_from_tensor(read_tensor(f)) == m);
    CHECK_THROWS_AS(feature_map_from_tensor(Tensor{{4}, {0, 0, 0, 0}}), shape_error);
}
