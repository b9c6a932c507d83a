#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "qgmm/io.hpp"

namespace fs = std::filesystem;
namespace io = qgmm::io;
using qgmm::Matrix;
using qgmm::Vector;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("qgmm_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) { return io::read_file(p); }

/// AJR-shaped table: outcome, endogenous regressor, its instrument and eight controls.
std::string ajr_like_csv(int rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::ostringstream out;
  out << "shortnam,logpgp95,avexpr,logem4,lat_abst,lat_abst2,africa,asia,other,neoeuro,malfal94,meantemp\n";
  for (int i = 0; i < rows; ++i) {
    const double instr = 4.0 + normal(rng);
    const double lat = std::abs(0.3 * normal(rng));
    const double avexpr = 10.0 - 0.6 * instr + 0.5 * normal(rng);
    out << "C" << i << "," << 1.0 + 0.9 * avexpr + normal(rng) << "," << avexpr << "," << instr << "," << lat << ","
        << lat * lat << "," << (i % 4 == 0) << "," << (i % 4 == 1) << "," << (i % 9 == 2) << "," << (i % 16 == 3)
        << "," << 0.5 + 0.2 * normal(rng) << "," << 20.0 + 3.0 * normal(rng) << "\n";
  }
  return out.str();
}

io::ColumnMapping ajr_mapping() {
  io::ColumnMapping m;
  m.outcome = "logpgp95";
  m.endogenous = {"avexpr"};
  m.instruments = {"logem4"};
  m.exogenous = {"lat_abst", "lat_abst2", "africa", "asia", "other", "neoeuro", "malfal94", "meantemp"};
  return m;
}

}  // namespace

TEST(Csv, ParsesQuotesAndLineEndings) {
  const auto t = io::parse_csv("\xEF\xBB\xBF" "a,b,c\r\n1,\"x, y\",\"say \"\"hi\"\"\"\r\n2,,\"multi\nline\"\n");
  ASSERT_EQ(t.header, (std::vector<std::string>{"a", "b", "c"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][1], "x, y");
  EXPECT_EQ(t.rows[0][2], "say \"hi\"");
  EXPECT_EQ(t.rows[1][1], "");
  EXPECT_EQ(t.rows[1][2], "multi\nline");
  EXPECT_THROW(io::parse_csv("a,b\n1\n"), qgmm::CsvParseError);
  EXPECT_THROW(io::parse_csv("a\n\"open\n"), qgmm::CsvParseError);
  EXPECT_THROW(io::parse_csv(""), qgmm::CsvParseError);
}

TEST(Csv, NumberParsing) {
  EXPECT_EQ(io::parse_number(" 1.5 "), 1.5);
  EXPECT_EQ(io::parse_number("+2e3"), 2000.0);
  EXPECT_FALSE(io::parse_number(""));
  EXPECT_FALSE(io::parse_number("NA"));
  EXPECT_FALSE(io::parse_number("1.5x"));
}

TEST(Ingest, ShapeAndColumnOrder) {
  TempDir dir;
  io::write_text(dir / "d.csv", "y,w,z,c\n1,2,3,4\n2,1,5,1\n0,4,2,2\n5,3,1,7\n3,3,3,2\n");
  io::ColumnMapping m;
  m.outcome = "y";
  m.endogenous = {"w"};
  m.instruments = {"z"};
  const auto d = io::ingest_csv(dir / "d.csv", m);
  EXPECT_EQ(d.n(), 5);
  EXPECT_EQ(d.k(), 2);
  EXPECT_TRUE(d.x().col(0).isOnes());
  EXPECT_EQ(d.x().col(1), (Vector(5) << 2, 1, 4, 3, 3).finished());
  EXPECT_EQ(d.z().col(1), (Vector(5) << 3, 5, 2, 1, 3).finished());
  EXPECT_EQ(d.y(), (Vector(5) << 1, 2, 0, 5, 3).finished());

  m.exogenous = {"c"};
  const auto d2 = io::ingest_csv(dir / "d.csv", m);
  EXPECT_EQ(d2.k(), 3);
  EXPECT_EQ(d2.x().col(2), d2.z().col(2));

  // an endogenous regressor used as its own instrument reduces to Z = X
  m.instruments = {"w"};
  const auto d3 = io::ingest_csv(dir / "d.csv", m);
  EXPECT_EQ(d3.x(), d3.z());
}

TEST(Ingest, AjrShapedTemplate) {
  TempDir dir;
  io::write_text(dir / "ajr.csv", ajr_like_csv(64, 1));
  const auto d = io::ingest_csv(dir / "ajr.csv", ajr_mapping());
  EXPECT_EQ(d.n(), 64);
  EXPECT_EQ(d.k(), 10);
  const qgmm::MomentModel model(d);
  EXPECT_TRUE(model.pivot().allFinite());
}

TEST(Ingest, Errors) {
  TempDir dir;
  io::write_text(dir / "d.csv", "y,w,z\n1,2,3\n2,abc,5\n0,4,2\n5,3,1\n");
  io::ColumnMapping m;
  m.outcome = "y";
  m.endogenous = {"w"};
  m.instruments = {"z"};
  try {
    io::ingest_csv(dir / "d.csv", m);
    FAIL() << "expected NonNumericCell";
  } catch (const qgmm::NonNumericCell& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.column(), "w");
  }

  io::write_text(dir / "missing.csv", "y,w,z\n1,2,3\n2,,5\n0,4,2\n5,3,1\n");
  try {
    io::ingest_csv(dir / "missing.csv", m);
    FAIL() << "expected NonNumericCell";
  } catch (const qgmm::NonNumericCell& e) {
    EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);
  }

  m.exogenous = {"nope"};
  io::write_text(dir / "ok.csv", "y,w,z\n1,2,3\n2,1,5\n0,4,2\n5,3,1\n");
  EXPECT_THROW(io::ingest_csv(dir / "ok.csv", m), qgmm::HeaderMismatch);
  m.exogenous.clear();
  EXPECT_THROW(io::ingest_csv(dir / "absent.csv", m), qgmm::FileNotFound);

  // instrument proportional to the intercept: Z'X singular
  io::write_text(dir / "rank.csv", "y,w,z\n1,2,1\n2,1,1\n0,4,1\n5,3,1\n");
  EXPECT_THROW(io::ingest_csv(dir / "rank.csv", m), qgmm::RankDeficient);

  m.instruments.clear();
  EXPECT_THROW(io::ingest_csv(dir / "ok.csv", m), qgmm::InvalidArgument);
}

TEST(Mapping, JsonRoundTrip) {
  const io::ColumnMapping m = ajr_mapping();
  const nlohmann::json j = m;
  const auto back = j.get<io::ColumnMapping>();
  EXPECT_EQ(back.outcome, m.outcome);
  EXPECT_EQ(back.exogenous, m.exogenous);
  EXPECT_EQ(back.k(), 10u);
  TempDir dir;
  io::write_text(dir / "bad.json", "{\"endogenous\": []}");
  EXPECT_THROW(io::read_mapping(dir / "bad.json"), qgmm::IoError);
}

TEST(Draws, RoundTripIsBitIdentical) {
  TempDir dir;
  std::mt19937_64 rng(3);
  Matrix draws = oracle::iid_normal(50, 3, rng) * 1e-3;
  draws(0, 0) = 1.0 / 3.0;
  draws(1, 1) = -1e-300;
  draws(2, 2) = 123456789.123456789;
  io::write_draws_csv(dir / "draws.csv", draws);
  std::vector<std::string> header;
  const Matrix back = io::read_matrix_csv(dir / "draws.csv", &header);
  EXPECT_EQ(back, draws);
  EXPECT_EQ(header, (std::vector<std::string>{"theta_1", "theta_2", "theta_3"}));

  io::write_draws_csv(dir / "two.csv", Matrix::Ones(2, 2));
  const std::string text = slurp(dir / "two.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(Results, JsonFields) {
  qgmm::RunResult r;
  r.algorithm = qgmm::Algorithm::MdaExact;
  r.prior = {qgmm::PriorFamily::NigHetero, 2.0, 1.0};
  r.n = 100;
  r.k = 5;
  r.seed = 7;
  r.total_draws = 20;
  r.retained_draws = 10;
  r.accept_stage1 = 1.0;
  r.accept_stage2 = 0.5;
  qgmm::MessReport rep;
  rep.mess = 8.0;
  rep.mess_per_iter = 0.8;
  const auto j = io::results_json(r, rep);
  EXPECT_EQ(j.size(), 13u);
  EXPECT_EQ(j["algorithm"], "mda-exact");
  EXPECT_EQ(j["prior"], "nig-hetero");
  EXPECT_EQ(j["draws_retained"], 10);
  EXPECT_EQ(j["mess_per_iter"], 0.8);
}

TEST(Tables, Formatting) {
  EXPECT_EQ(io::format_grouped(52321.4), "52,321");
  EXPECT_EQ(io::format_grouped(999.0), "999");
  EXPECT_EQ(io::format_grouped(1000.0), "1,000");
  EXPECT_EQ(io::format_grouped(1234567.0), "1,234,567");
  EXPECT_EQ(io::format_grouped(12345.0), "12,345");
  EXPECT_EQ(io::format_grouped(-12345.0), "-12,345");
  EXPECT_EQ(io::format_fixed3(0.84751), "0.848");
}

TEST(Tables, RenderAndSort) {
  io::BenchmarkTable table;
  table.rows.push_back({"synthetic", 1000, 20, qgmm::Algorithm::MdaApprox, 5, 5, 0.5, 1234.0});
  table.rows.push_back({"synthetic", 100, 5, qgmm::Algorithm::MdaExact, 10, 10, 0.84751, 52321.4});
  table.rows.push_back({"synthetic", 100, 5, qgmm::Algorithm::Ram, 10, 0, std::nullopt, std::nullopt});
  const auto rendered = io::render_table(table);
  EXPECT_NE(rendered.text.find("(a) mESS/iter"), std::string::npos);
  EXPECT_NE(rendered.text.find("(b) mESS/s"), std::string::npos);
  EXPECT_NE(rendered.text.find("0.848"), std::string::npos);
  EXPECT_NE(rendered.text.find("52,321"), std::string::npos);
  EXPECT_NE(rendered.text.find("--"), std::string::npos);
  EXPECT_NE(rendered.text.find("1,000"), std::string::npos);
  // n = 100 rows come before n = 1000 rows
  EXPECT_LT(rendered.csv.find("synthetic,100,5"), rendered.csv.find("synthetic,1000,20"));
  EXPECT_NE(rendered.csv.find("mess_per_sec"), std::string::npos);
  const auto no_timing = io::render_table(table, {false});
  EXPECT_EQ(no_timing.csv.find("mess_per_sec"), std::string::npos);
  EXPECT_EQ(no_timing.csv.find("52321"), std::string::npos);
  EXPECT_THROW(io::render_table({}), qgmm::InvalidArgument);
}
