#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "app.hpp"
#include "ehom/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ehom_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(EHOM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

json identity_config() {
  return {{"environment", {{"model", "identity"}, {"dimension", 2}}},
          {"grid", {{"cells_per_side", 16}}},
          {"moments", {{"p", 3}, {"q", 3}}}};
}

} // namespace

TEST(Cli, IdentityCheckPasses) {
  const auto dir = scratch("identity");
  const auto cfg = write_config(dir, identity_config());
  EXPECT_EQ(run("run --config " + cfg.string() + " --out " + (dir / "out").string() + " --check"), 0);
  const json r = json::parse(slurp(dir / "out" / "report.json"));
  EXPECT_EQ(r.at("effective").at("D")[0][0].get<double>(), 2.0);
  EXPECT_TRUE(r.at("check").at("passed").get<bool>());
  EXPECT_TRUE(fs::exists(dir / "out" / "field.ehf"));
  EXPECT_TRUE(fs::exists(dir / "out" / "chi.chi1"));
}

TEST(Cli, CriticalMomentsExitTwo) {
  const auto dir = scratch("critical");
  json c = identity_config();
  c["moments"] = {{"p", 2}, {"q", 2}};
  const auto cfg = write_config(dir, c);
  EXPECT_EQ(run("validate --config " + cfg.string() + " --out " + (dir / "out").string()), 2);
}

TEST(Cli, TamperedOracleExitFour) {
  const auto dir = scratch("tamper");
  json c = {{"environment", {{"model", "checkerboard"}, {"a_low", 1}, {"a_high", 4}, {"tile_cells", 16}}},
            {"grid", {{"cells_per_side", 64}}},
            {"moments", {{"p", 3}, {"q", 3}}}};
  const auto good = write_config(dir, c);
  EXPECT_EQ(run("effective --config " + good.string() + " --out " + (dir / "a").string() + " --check"), 0);
  c["oracle"] = {{"D", {{4.5, 0}, {0, 4.5}}}, {"tolerance", 0.02}};
  const auto bad = write_config(dir, c);
  EXPECT_EQ(run("effective --config " + bad.string() + " --out " + (dir / "b").string() + " --check"), 4);
  EXPECT_EQ(run("effective --config " + bad.string() + " --out " + (dir / "c").string()), 0);
}

TEST(Cli, TrapSimulationExitTwo) {
  const auto dir = scratch("trap");
  const json c = {{"environment", {{"model", "bessel_trap"}, {"exponent", 2}}},
                  {"grid", {{"cells_per_side", 16}}},
                  {"moments", {{"p", 3}, {"q", 3}}},
                  {"montecarlo", {{"paths", 10}}}};
  const auto cfg = write_config(dir, c);
  EXPECT_EQ(run("simulate --config " + cfg.string() + " --out " + (dir / "out").string()), 2);
}

TEST(Cli, SolverNonConvergenceExitThree) {
  const auto dir = scratch("nonconv");
  json c = {{"environment", {{"model", "heavy_tail"}}},
            {"grid", {{"cells_per_side", 32}}},
            {"moments", {{"p", 2.5}, {"q", 2.5}}},
            {"solver", {{"tol", 1e-14}, {"max_iter", 2}, {"preconditioner", "none"}}}};
  const auto cfg = write_config(dir, c);
  EXPECT_EQ(run("solve --config " + cfg.string() + " --out " + (dir / "out").string()), 3);
}

TEST(Cli, BadParameterNamesItself) {
  json c = identity_config();
  c["grid"]["cells_per_side"] = 1;
  try {
    ehom::app::parse_config(c);
    FAIL();
  } catch (const ehom::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("grid.cells_per_side"), std::string::npos);
  }
  c = identity_config();
  c["environment"]["model"] = "unknown";
  EXPECT_THROW(ehom::app::parse_config(c), ehom::ConfigError);
  c = identity_config();
  c["audit"] = {{"sigma_prime", 0.9}, {"sigma", 0.8}, {"sizes", {16, 32}}};
  EXPECT_THROW(ehom::app::parse_config(c), ehom::ConfigError);
}

TEST(Cli, ReportRendering) {
  const auto dir = scratch("report");
  json c = identity_config();
  c["sublinearity"] = {{"radius", 0.25}, {"sizes", {16, 32}}};
  c["audit"] = {{"sizes", {16, 32}}};
  const auto cfg = write_config(dir, c);
  const auto out = dir / "out";
  ASSERT_EQ(run("run --config " + cfg.string() + " --out " + out.string()), 0);
  const auto report = out / "report.json";
  EXPECT_EQ(run("report " + report.string() + " --format json > " + (dir / "re.json").string()), 0);
  std::system((std::string(EHOM_CLI_PATH) + " report " + report.string() + " --format json > " +
               (dir / "re.json").string())
                  .c_str());
  EXPECT_EQ(slurp(dir / "re.json"), slurp(report));

  const json r = ehom::app::load_report(report);
  const std::string md = ehom::app::render_report(r, "md", dir);
  EXPECT_NE(md.find("D₁₁ = 2.000000"), std::string::npos);
  EXPECT_NE(md.find("Variational bounds"), std::string::npos);
  EXPECT_NE(md.find("envelope"), std::string::npos);

  const auto csv_dir = dir / "csv";
  ehom::app::render_report(r, "csv", csv_dir);
  EXPECT_TRUE(fs::exists(csv_dir / "sublinearity.csv"));
  EXPECT_TRUE(fs::exists(csv_dir / "audit.csv"));

  json wrong = r;
  wrong["schema_version"] = 999;
  std::ofstream(dir / "wrong.json") << wrong.dump();
  EXPECT_THROW(ehom::app::load_report(dir / "wrong.json"), ehom::FormatError);
  EXPECT_EQ(run("report " + (dir / "wrong.json").string()), 2);
}

TEST(Cli, RunsAreDeterministic) {
  const auto dir = scratch("determinism");
  json c = {{"environment", {{"model", "heavy_tail"}, {"seed", 4}}},
            {"grid", {{"cells_per_side", 16}}},
            {"moments", {{"p", 2.5}, {"q", 2.5}}},
            {"montecarlo", {{"paths", 200}, {"t_max", 0.2}, {"theta", "Lambda"}, {"trace_paths", 2}}}};
  const auto cfg = ehom::app::parse_config(c);
  ehom::app::RunOptions o1, o2;
  o1.output_dir = dir / "a";
  o2.output_dir = dir / "b";
  o2.threads = 2;
  json a = ehom::app::run_pipeline(cfg, {}, o1);
  json b = ehom::app::run_pipeline(cfg, {}, o2);
  a.erase("timings");
  b.erase("timings");
  EXPECT_EQ(a, b);
  EXPECT_EQ(slurp(dir / "a" / "field.ehf"), slurp(dir / "b" / "field.ehf"));
  EXPECT_EQ(slurp(dir / "a" / "walks" / "path_000001.wlk"), slurp(dir / "b" / "walks" / "path_000001.wlk"));
  EXPECT_EQ(json::parse(slurp(dir / "a" / "report.json")).dump(), json::parse(slurp(dir / "a" / "report.json")).dump());
}

TEST(Cli, SeedOverrideChangesField) {
  const auto dir = scratch("seed");
  json c = {{"environment", {{"model", "heavy_tail"}}}, {"grid", {{"cells_per_side", 8}}}, {"moments", {{"p", 2.5}, {"q", 2.5}}}};
  const auto cfg = write_config(dir, c);
  ASSERT_EQ(run("gen --config " + cfg.string() + " --out " + (dir / "a").string() + " --seed 1"), 0);
  ASSERT_EQ(run("gen --config " + cfg.string() + " --out " + (dir / "b").string() + " --seed 2"), 0);
  EXPECT_NE(slurp(dir / "a" / "field.ehf"), slurp(dir / "b" / "field.ehf"));
}
