#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "momsos/cli.hpp"

using namespace momsos;

namespace {

std::string data(const std::string& name) { return std::string(MOMSOS_DATA_DIR) + "/" + name; }

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI binary; stderr is discarded unless `with_err`.
Result cli(const std::string& args, bool with_err = false, const std::string& env = "") {
  const std::string cmd =
      env + " \"" + std::string(MOMSOS_CLI) + "\" " + args + (with_err ? " 2>&1" : " 2>/dev/null");
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("momsos_cli_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST(Cli, HierarchyTableOnIntervalPop) {
  const Result r = cli("hierarchy " + data("pop.gmp") + " --dmax 5");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto lines = lines_of(r.out);
  ASSERT_GE(lines.size(), 7u);
  EXPECT_NE(lines[0].find("embedded primal-dual interior point"), std::string::npos);
  std::size_t rows = 0;
  for (const auto& l : lines) {
    std::istringstream in(l);
    std::size_t d;
    std::string pd, dd;
    if (!(in >> d >> pd >> dd)) continue;
    ++rows;
    EXPECT_EQ(d, rows);
    EXPECT_EQ(pd, "0.000000") << l;
    EXPECT_EQ(dd, "0.000000") << l;
  }
  EXPECT_EQ(rows, 5u);
}

TEST(Cli, AuditPasses) {
  const Result r = cli("audit " + data("pop.gmp") + " --dmax 5");
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST(Cli, ExportReimportsIdentically) {
  const std::string path = temp_path("pop2.dat-s");
  const Result r = cli("export-sdpa " + data("pop.gmp") + " -d 2 --out " + path);
  ASSERT_EQ(r.code, 0) << r.out;
  const SdpProblem imported = import_sdpa(path);
  const MomentRelaxation built = build_relaxation(parse_gmp_file(data("pop.gmp")), 2);
  EXPECT_EQ(imported.block_sizes, built.sdp.block_sizes);
  EXPECT_EQ(imported.b, built.sdp.b);
  EXPECT_TRUE(imported.c == built.sdp.c);
  ASSERT_EQ(imported.a.size(), built.sdp.a.size());
  for (std::size_t k = 0; k < imported.a.size(); ++k) EXPECT_TRUE(imported.a[k] == built.sdp.a[k]);
  EXPECT_EQ(to_sdpa(imported), slurp(path));
  std::filesystem::remove(path);
}

TEST(Cli, ExitCodes) {
  const std::string bad = temp_path("bad.gmp");
  std::ofstream(bad) << "measure mu on x1 { x1 >= 0 }\nsubject to <1, nu> == 1\n";
  const Result parse = cli("solve " + bad, true);
  EXPECT_EQ(parse.code, exit_code::parse);
  EXPECT_NE(parse.out.find(":2:"), std::string::npos) << parse.out;
  std::filesystem::remove(bad);

  EXPECT_EQ(cli("hierarchy " + data("kmoment_infeasible.gmp") + " --dmax 2").code,
            exit_code::infeasible);
  EXPECT_EQ(cli("solve " + data("pop.gmp") + " --fix mu:x1=2").code, exit_code::infeasible);
  EXPECT_EQ(cli("solve " + data("pop.gmp") + " --fix mu:x2=1").code, exit_code::usage);
  EXPECT_EQ(cli("solve " + data("pop.gmp") + " --fix garbage").code, exit_code::usage);
  EXPECT_EQ(cli("solve " + data("pop.gmp") + " --eps 0").code, exit_code::usage);
  EXPECT_EQ(cli("frobnicate " + data("pop.gmp")).code, exit_code::usage);
  EXPECT_EQ(cli("solve /nonexistent.gmp").code, exit_code::usage);
  EXPECT_EQ(cli("solve " + data("pop.gmp"), false, "MOMSOS_TOL=abc").code, exit_code::usage);
  EXPECT_EQ(cli("solve " + data("pop.gmp"), false, "MOMSOS_TOL=1e-7").code, exit_code::ok);
}

TEST(Cli, FixedMomentSolve) {
  const Result r = cli("solve " + data("pop.gmp") + " -d 2 --fix mu:x1=0.32 --format json");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  const auto& z = j.at("moments").at(0).at("z");
  ASSERT_EQ(z.size(), 5u);
  EXPECT_NEAR(z[0].get<double>(), 1.0, 1e-7);
  for (std::size_t k = 1; k < z.size(); ++k) EXPECT_NEAR(z[k].get<double>(), 0.32, 1e-5);
}

TEST(Cli, PenaltyFlag) {
  const Result r = cli("hierarchy " + data("pop.gmp") + " --dmax 3 --eps -0.01 --format csv");
  ASSERT_EQ(r.code, 0);
  const auto lines = lines_of(r.out);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "d,primal,dual,gap,lemma_margin,stabilized");
  EXPECT_NEAR(std::stod(lines[3].substr(2)), -0.04, 1e-6);
}

TEST(Cli, OutputsAreDeterministic) {
  for (const char* fmt : {"csv", "json"}) {
    const std::string args = "hierarchy " + data("volume.gmp") + " --dmax 4 --format " + fmt;
    const Result a = cli(args), b = cli(args + " --serial");
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out) << fmt;
    EXPECT_EQ(a.out, cli(args).out) << fmt;
  }
  const std::string dual = "dual " + data("pop.gmp") + " -d 2 --seed 5 --samples 200";
  const Result d1 = cli(dual);
  EXPECT_EQ(d1.code, 0) << d1.out;
  EXPECT_EQ(d1.out, cli(dual).out);
}

TEST(Cli, JsonTraceContents) {
  const std::string path = temp_path("trace.json");
  const Result r = cli("hierarchy " + data("pop_fixed.gmp") + " --dmax 3 --format json --out " + path);
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("p^d"), std::string::npos);  // table still on stdout
  const auto j = nlohmann::json::parse(slurp(path));
  std::filesystem::remove(path);
  EXPECT_EQ(j.at("status"), "complete");
  EXPECT_EQ(j.at("sense"), "minimize");
  EXPECT_EQ(j.at("stabilization").at("label"), "stabilized");
  EXPECT_EQ(j.at("stabilization").at("stabilized_at"), 2);
  ASSERT_EQ(j.at("entries").size(), 3u);
  EXPECT_EQ(j.at("entries")[2].at("moments")[0].at("monomials")[6], "x1^6");
}

TEST(Cli, RelaxSummary) {
  RunConfig cfg;
  cfg.input = data("pop.gmp");
  cfg.command = Command::relax;
  cfg.order = 2;
  cfg.format = OutputFormat::json;
  std::ostringstream out, err;
  ASSERT_EQ(run_guarded(cfg, out, err), exit_code::ok) << err.str();
  const auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j.at("block_sizes"), nlohmann::json({3, 2, 2}));
}

TEST(Cli, InProcessMatchesBinary) {
  RunConfig cfg;
  cfg.input = data("pop.gmp");
  cfg.command = Command::hierarchy;
  cfg.dmax = 3;
  cfg.format = OutputFormat::csv;
  std::ostringstream out, err;
  ASSERT_EQ(run_guarded(cfg, out, err), exit_code::ok);
  EXPECT_EQ(out.str(), cli("hierarchy " + data("pop.gmp") + " --dmax 3 --format csv").out);
  EXPECT_EQ(command_from_string("export-sdpa"), Command::export_sdpa);
  EXPECT_FALSE(format_from_string("xml"));
}
