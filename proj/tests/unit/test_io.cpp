#include <greenexp/io/csv.hpp>
#include <greenexp/io/geojson.hpp>
#include <greenexp/io/raster_io.hpp>
#include <greenexp/io/tables.hpp>
#include <greenexp/pipeline/config.hpp>
#include <greenexp/pipeline/digest.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace greenexp;
namespace gp = greenexp::pipeline;

namespace {

GreenRaster random_raster(std::uint64_t seed, std::size_t w, std::size_t h, double p = 0.3) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution green(p);
    GreenRaster r(Point{530000.0, 180000.0}, 2.0, w, h);
    for (std::size_t row = 0; row < h; ++row)
        for (std::size_t col = 0; col < w; ++col)
            if (green(rng)) r.set(col, row);
    return r;
}

void expect_same(const GreenRaster& a, const GreenRaster& b) {
    ASSERT_EQ(a.width(), b.width());
    ASSERT_EQ(a.height(), b.height());
    EXPECT_EQ(a.origin().x(), b.origin().x());
    EXPECT_EQ(a.origin().y(), b.origin().y());
    EXPECT_EQ(a.cell_size(), b.cell_size());
    for (std::size_t row = 0; row < a.height(); ++row)
        for (std::size_t col = 0; col < a.width(); ++col) ASSERT_EQ(a.at(col, row), b.at(col, row)) << col << "," << row;
}

} // namespace

TEST(Csv, QuotedFieldsAndTrailingEmpty) {
    const auto t = io::parse_csv("a,b,c\n1,\"x, y\",\n\n2,z,3\r\n");
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][1], "x, y");
    EXPECT_EQ(t.rows[0][2], "");
    EXPECT_EQ(t.rows[1][2], "3");
    EXPECT_EQ(t.lines[1], 4u);
}

TEST(Csv, FieldCountMismatchNamesTheLine) {
    try {
        io::parse_csv("a,b\n1,2\n1,2,3\n", "t.csv");
        FAIL();
    } catch (const IngestError& e) {
        EXPECT_EQ(e.rows, std::vector<std::size_t>{3});
    }
}

TEST(Csv, WriterRoundTrip) {
    io::CsvWriter w({"id", "text", "v"});
    w.row({"a", "has, comma", io::format_number(0.1)});
    w.row({"b", "has \"quote\"", io::format_number(std::optional<double>{})});
    const auto t = io::parse_csv(w.str());
    EXPECT_EQ(t.rows[0][1], "has, comma");
    EXPECT_EQ(t.rows[1][1], "has \"quote\"");
    EXPECT_EQ(std::stod(t.rows[0][2]), 0.1);
    EXPECT_EQ(t.rows[1][2], "");
}

TEST(RasterIo, BinaryRoundTrip) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto r = random_raster(seed, 37 + seed, 11 + 3 * seed);
        expect_same(r, io::decode_binary(io::encode_binary(r)));
    }
}

TEST(RasterIo, BinaryLayoutIsNorthUpLsbFirst) {
    GreenRaster r(Point{10.0, 20.0}, 1.0, 9, 2);
    r.set(0, 1); // north-west
    r.set(8, 0); // south-east
    const std::string b = io::encode_binary(r);
    ASSERT_EQ(b.size(), 4u + 4u + 24u + 16u + 2u * 2u);
    EXPECT_EQ(b.substr(0, 4), "GRNR");
    const std::size_t payload = 48;
    EXPECT_EQ(static_cast<unsigned char>(b[payload]), 0x01);
    EXPECT_EQ(static_cast<unsigned char>(b[payload + 1]), 0x00);
    EXPECT_EQ(static_cast<unsigned char>(b[payload + 2]), 0x00);
    EXPECT_EQ(static_cast<unsigned char>(b[payload + 3]), 0x01);
}

TEST(RasterIo, TruncatedBinaryRejected) {
    std::string b = io::encode_binary(random_raster(4, 16, 4));
    b.pop_back();
    EXPECT_THROW(io::decode_binary(b), IngestError);
    EXPECT_THROW(io::decode_binary("NOPE"), IngestError);
}

TEST(RasterIo, AsciiRoundTrip) {
    const auto r = random_raster(5, 23, 17);
    expect_same(r, io::decode_ascii_grid(io::encode_ascii_grid(r)));
}

TEST(RasterIo, AsciiCentreHeaderAndNoData) {
    const auto r = io::decode_ascii_grid("ncols 3\nnrows 2\nxllcenter 100.5\nyllcenter 200.5\ncellsize 1\n"
                                         "NODATA_value -9999\n1 0 -9999\n0 0 1\n");
    EXPECT_EQ(r.origin().x(), 100.0);
    EXPECT_EQ(r.origin().y(), 200.0);
    EXPECT_TRUE(r.at(0, 1));
    EXPECT_FALSE(r.at(2, 1));
    EXPECT_TRUE(r.at(2, 0));
    EXPECT_EQ(r.count(), 2u);
}

TEST(RasterIo, AsciiWithoutNoDataLine) {
    const auto r = io::decode_ascii_grid("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 5\n1 0\n");
    EXPECT_TRUE(r.at(0, 0));
    EXPECT_FALSE(r.at(1, 0));
}

TEST(GeoJson, AreasRoundTrip) {
    AreaUnit a;
    a.id = "W1";
    a.boundary = rectangle(530000, 180000, 530150, 180150);
    io::json fc = io::feature_collection(io::json::array(
        {io::feature(io::to_json(a.boundary), {{"id", "W1"}, {"kind", "ward"}, {"population", 1200}, {"imd_score", 20.5}}),
         io::feature(io::to_json(rectangle(530150, 180000, 530300, 180150)), {{"id", 7}, {"kind", "lsoa"}})}));
    const auto areas = io::parse_areas(io::json::parse(fc.dump()));
    ASSERT_EQ(areas.size(), 2u);
    EXPECT_EQ(areas[0].id, "W1");
    EXPECT_EQ(areas[0].population, 1200.0);
    EXPECT_EQ(areas[0].covariates.at("imd_score"), 20.5);
    EXPECT_EQ(areas[1].id, "7");
    EXPECT_EQ(areas[1].kind, AreaKind::lsoa);
    EXPECT_DOUBLE_EQ(area(areas[0].boundary), 22500.0);
}

TEST(GeoJson, GeographicCoordinatesRejected) {
    io::json fc = io::feature_collection(
        io::json::array({io::feature(io::to_json(rectangle(-0.12, 51.5, -0.11, 51.51)), {{"id", "A"}})}));
    EXPECT_THROW(io::parse_areas(fc), ConfigError);
}

TEST(GeoJson, SegmentsAndParks) {
    io::json segs = io::feature_collection(io::json::array(
        {io::feature(io::to_json(Polyline{{530000, 180000}, {530050, 180000}}), {{"id", "S1"}}),
         io::feature({{"type", "MultiLineString"}, {"coordinates", {{{530050, 180000}, {530050, 180040}}}}}, {{"id", "S2"}})}));
    const auto s = io::parse_segments(segs);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_DOUBLE_EQ(s[1].length, 40.0);

    io::json parks = io::feature_collection(io::json::array(
        {io::feature(io::to_json(rectangle(530000, 180000, 530050, 180100)), {{"id", "P"}, {"kind", "garden"}, {"access", "restricted"}})}));
    const auto p = io::parse_green_spaces(parks);
    EXPECT_EQ(p[0].kind, GreenSpaceKind::garden);
    EXPECT_FALSE(p[0].is_public());
    EXPECT_DOUBLE_EQ(p[0].area_m2(), 5000.0);
}

TEST(Tables, CovariatesMissingAndDuplicates) {
    const auto t = io::parse_covariates(io::parse_csv(
        "area_id,imd_score,building_density,median_age,white_percent\nA,1,0.2,NA,50\nB,2,0.3,40,\n"));
    EXPECT_FALSE(t.get("A", 2).has_value());
    EXPECT_EQ(*t.get("B", 2), 40.0);
    EXPECT_FALSE(t.get("B", 3).has_value());
    EXPECT_THROW(io::parse_covariates(io::parse_csv(
                     "area_id,imd_score,building_density,median_age,white_percent\nA,1,1,1,1\nA,1,1,1,1\n")),
                 IngestError);
}

TEST(Config, DefaultsAndRelativePaths) {
    const auto c = gp::parse_config("[inputs]\nareas = a/areas.geojson ; wards\n[parameters]\nbootstrap = 50\n",
                                    "/data/run/config.ini");
    EXPECT_EQ(c.input("areas"), std::filesystem::path("/data/run/a/areas.geojson"));
    EXPECT_EQ(c.params.bootstrap, 50u);
    EXPECT_EQ(c.params.buffer_half_width, 10.0);
    EXPECT_EQ(c.params.choice_radius, 500.0);
    EXPECT_EQ(c.params.walk_budget_minutes, 5.0);
    EXPECT_EQ(c.params.walk_speed_kmh, 4.8);
    EXPECT_EQ(c.out_dir, std::filesystem::path("/data/run/out"));
}

TEST(Config, DefaultTemplateParses) {
    const auto c = gp::parse_config(gp::default_config_text(), "/x/config.ini");
    gp::Parameters d;
    EXPECT_EQ(gp::parameters_text(c.params), gp::parameters_text(d));
    for (const auto& k : gp::kRequiredInputs) EXPECT_TRUE(c.has(k)) << k;
}

TEST(Config, RejectsBadValues) {
    EXPECT_THROW(gp::parse_config("[parameters]\nbuffer_half_width = -1\n", "c.ini"), ConfigError);
    EXPECT_THROW(gp::parse_config("[parameters]\nchoice_mode = metric\n", "c.ini"), ConfigError);
    EXPECT_THROW(gp::parse_config("[inputs]\nsatellite = s.tif\n", "c.ini"), ConfigError);
    EXPECT_THROW(gp::parse_config("[prescriptions]\nmonth_13 = m.csv\n", "c.ini"), ConfigError);
    EXPECT_THROW(gp::parse_config("[conditions]\nmigraine = m.csv\n", "c.ini"), ConfigError);
    EXPECT_EQ(gp::parse_config("[parameters]\nchoice_radius = inf\n", "c.ini").params.choice_radius, kInfiniteRadius);
}

TEST(Digest, KnownVectors) {
    EXPECT_EQ(gp::sha256(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(gp::sha256("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    // Length-prefixed fields keep ("ab","c") and ("a","bc") apart.
    EXPECT_NE(gp::Sha256().field("ab").field("c").hex(), gp::Sha256().field("a").field("bc").hex());
}
