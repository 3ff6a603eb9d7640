#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "scoremix/cli.hpp"
#include "support.hpp"

using namespace smx;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
  json report() const { return json::parse(out); }
};

Result smx_run(std::vector<std::string> args) {
  args.insert(args.begin(), "smx");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("theorem bound") {
  auto r = smx_run({"theorem", "bound", "--rho", "0.9633", "--delta", "1e-5", "--n", "10000", "--kind", "cosine",
                    "--topk", "20000"});
  REQUIRE(r.code == 0);
  auto j = r.report();
  CHECK(std::abs(j["result"]["lower_bound"].get<double>() - 0.599) <= 1e-3);
  CHECK(std::abs(j["result"]["expected_overlap_rounded"].get<long>() - 11984) <= 1);
  CHECK(j["result"]["slice_dim"] == 49995000);
  CHECK(j["manifest"]["subcommand"] == "theorem bound");
  CHECK(j["manifest"]["flags"]["--rho"] == "0.9633");

  auto ex = smx_run({"theorem", "exact", "--rho", "0.9", "--delta", "0.01", "--residual", "1", "--N", "100"});
  REQUIRE(ex.code == 0);
  CHECK(ex.report()["result"]["exact_probability"].get<double>() > 0.5);
}

TEST_CASE("usage errors exit 2") {
  auto r = smx_run({"frobnicate"});
  CHECK(r.code == 2);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(smx_run({"mine"}).code == 2);
  CHECK(smx_run({"theorem", "bound", "--rho", "2", "--delta", "1", "--n", "5"}).code == 2);
  CHECK(smx_run({"--help"}).code == 0);
}

TEST_CASE("mine on the line fixture") {
  auto dir = test::scratch_dir("cli_mine");
  std::ofstream(dir / "line.csv") << "0\n1\n3\n";
  auto r = smx_run({"mine", "--embeddings", (dir / "line.csv").string(), "--metric", "euclidean", "--m", "2",
                    "--topk", "1", "--direction", "max", "--csv", (dir / "top.csv").string()});
  REQUIRE(r.code == 0);
  auto j = r.report();
  CHECK(j["result"]["entries"][0]["indices"] == json::array({0, 2}));
  CHECK(j["result"]["entries"][0]["score"] == 3.0);
  CHECK(j["manifest"]["inputs"].begin().value().get<std::string>().size() == 64);
  CHECK(slurp(dir / "top.csv").find("0,2") != std::string::npos);

  auto t = smx_run({"mine", "--embeddings", (dir / "line.csv").string(), "--metric", "euclidean", "--m", "4",
                    "--topk", "1", "--direction", "max"});
  CHECK(t.code == 1);  // n < 4
  CHECK(json::parse(t.err)["code"] == "invalid_argument");
}

TEST_CASE("mine reports are reproducible") {
  auto dir = test::scratch_dir("cli_repro");
  save_embeddings(test::gaussian(40, 5, 3), dir / "e.bin", EmbeddingFormat::binary);
  std::vector<std::string> args{"mine",   "--embeddings", (dir / "e.bin").string(), "--m", "3", "--topk", "12",
                                "--verify", "2000",       "--seed",                 "9",   "--exact-merge"};
  auto a = smx_run(args), b = smx_run(args);
  REQUIRE(a.code == 0);
  auto ja = a.report(), jb = b.report();
  CHECK(ja["result"]["entries"] == jb["result"]["entries"]);
  CHECK(ja["result"]["verification"] == jb["result"]["verification"]);
  CHECK(ja["result"]["verification"]["exceedances_new"] == 0);
  CHECK(ja["result"]["exactness"] == "exact");
  CHECK(ja["manifest"]["seeds"]["verify"] == 9);
}

TEST_CASE("convert round trip and parse errors") {
  auto dir = test::scratch_dir("cli_convert");
  save_embeddings(test::gaussian(6, 3, 4), dir / "a.bin", EmbeddingFormat::binary);
  REQUIRE(smx_run({"convert", "--in", (dir / "a.bin").string(), "--out", (dir / "a.csv").string()}).code == 0);
  REQUIRE(smx_run({"convert", "--in", (dir / "a.csv").string(), "--out", (dir / "b.bin").string()}).code == 0);
  CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));

  std::ofstream(dir / "ragged.csv") << "1,2\n3,4\n5\n";
  auto r = smx_run({"convert", "--in", (dir / "ragged.csv").string(), "--out", (dir / "x.bin").string()});
  CHECK(r.code == 1);
  auto err = json::parse(r.err);
  CHECK(err["code"] == "parse_error");
  CHECK(err["context"].get<std::string>().find("line 3") != std::string::npos);

  std::ofstream(dir / "empty.csv") << "";
  CHECK(smx_run({"convert", "--in", (dir / "empty.csv").string(), "--out", (dir / "y.bin").string()}).code == 1);
}

TEST_CASE("align") {
  auto dir = test::scratch_dir("cli_align");
  save_embeddings(test::gaussian(20, 4, 5), dir / "x.csv", EmbeddingFormat::csv);
  save_embeddings(test::gaussian(20, 3, 6), dir / "y.csv", EmbeddingFormat::csv);
  auto r = smx_run({"align", "--x", (dir / "x.csv").string(), "--y", (dir / "x.csv").string(), "--pairs-csv",
                    (dir / "pairs.csv").string(), "--baseline-seed", "3"});
  REQUIRE(r.code == 0);
  auto j = r.report()["result"];
  CHECK(std::abs(j["cka"]["value"].get<double>() - 1.0) <= 1e-10);
  CHECK(j["cknna"]["tau"] == 0.07);
  CHECK(j["cknna"]["tau_source"] == "default");
  CHECK(j["distance_correlation"]["pairs"] == 190);
  CHECK(slurp(dir / "pairs.csv").rfind("i,j,dist_emb,dist_cond\n", 0) == 0);
  auto mism = smx_run({"align", "--x", (dir / "x.csv").string(), "--y", (dir / "y.csv").string(), "--metric", "cka",
                       "--tau", "0.5"});
  CHECK(mism.code == 0);
}

TEST_CASE("theorem simulate and overlap") {
  auto r = smx_run({"theorem", "simulate", "--n", "15", "--rho", "0.8", "--triplets", "5", "--trials", "400",
                    "--kind", "squared_euclidean", "--seed", "2"});
  REQUIRE(r.code == 0);
  auto j = r.report()["result"];
  CHECK(j["trials"] == 400);
  CHECK(j["triplets"].size() == 5);
  CHECK(j["triplets"][0].contains("exact_probability"));

  auto dir = test::scratch_dir("cli_overlap");
  save_embeddings(test::gaussian(30, 4, 7), dir / "x.bin", EmbeddingFormat::binary);
  auto o = smx_run({"theorem", "overlap", "--x", (dir / "x.bin").string(), "--y", (dir / "x.bin").string(), "--topk",
                    "20", "--pairs-csv", (dir / "pairs.csv").string()});
  REQUIRE(o.code == 0);
  CHECK(o.report()["result"]["overlap"] == 20);
}

TEST_CASE("sample writes points") {
  auto dir = test::scratch_dir("cli_sample");
  auto r = smx_run({"sample", "--class-a", "1;0,0;1", "--class-b", "1;3,1;0.5", "--grid", "0:1:0.5,0:1:1", "--n", "3",
                    "--steps", "16", "--out", (dir / "pts.csv").string()});
  REQUIRE(r.code == 0);
  auto csv = slurp(dir / "pts.csv");
  CHECK(csv.rfind("cell_alpha,cell_beta,sample_index,x_0,x_1,log_density_a,log_density_b,log_density_mix_reference\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 6 * 3);
  CHECK(r.report()["result"]["cells"].size() == 6);
  CHECK(smx_run({"sample", "--class-a", "1;0;1", "--class-b", "1;1;1", "--guidance", "2"}).code == 1);
  CHECK(smx_run({"sample", "--class-a", "1;0;1", "--class-b", "1;1;1", "--lambda", "0.5", "--alpha", "1"}).code == 2);
}

TEST_CASE("select and genmetrics") {
  auto dir = test::scratch_dir("cli_select");
  save_embeddings(test::gaussian(12, 4, 8), dir / "e.bin", EmbeddingFormat::binary);
  save_embeddings(test::gaussian(12, 2, 9), dir / "c.bin", EmbeddingFormat::binary);
  auto r = smx_run({"select", "--embeddings", (dir / "e.bin").string(), "--conditions", (dir / "c.bin").string(),
                    "--strategy", "combined_top", "--count", "3", "--samples-per-pair", "2", "--out",
                    (dir / "pairs.csv").string(), "--manifest", (dir / "manifest.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(r.report()["result"]["manifest_rows"] == 6);
  auto manifest = slurp(dir / "manifest.csv");
  CHECK(std::count(manifest.begin(), manifest.end(), '\n') == 7);

  std::ofstream(dir / "feat.csv") << "1,0\n0,1\n";
  std::ofstream(dir / "labels.txt") << "a\nb\n";
  auto g = smx_run({"genmetrics", "--features", (dir / "feat.csv").string(), "--labels", (dir / "labels.txt").string(),
                    "--targets", (dir / "feat.csv").string()});
  REQUIRE(g.code == 0);
  auto j = g.report()["result"];
  CHECK(j["m_coverage"] == 1.0);
  CHECK(j["m_align"]["mean"] == 0.0);
}

}
