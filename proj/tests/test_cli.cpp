#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "popmdp/cli.hpp"

using namespace popmdp;
using Catch::Approx;
using nlohmann::json;

namespace {

const std::string kData = POPMDP_DATA_DIR;
const std::string kCli = POPMDP_CLI_PATH;

std::string data(const std::string& name) { return kData + "/" + name; }

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "popmdp_cli_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string write_file(const std::string& name, const std::string& body) {
  const auto path = scratch(name);
  std::ofstream(path) << body;
  return path.string();
}

cli::CommandResult run(const std::string& cmd, cli::Options o) { return cli::run_command(cmd, o); }

json run_json(const std::string& cmd, cli::Options o) {
  o.json = true;
  const auto r = cli::run_command(cmd, o);
  INFO(r.stderr_text);
  REQUIRE(r.exit_code == 0);
  return json::parse(r.stdout_text);
}

double rounded(double x) { return std::strtod(cli::fmt(x).c_str(), nullptr); }

/// Runs the executable through the shell and returns its exit status.
int shell_status(const std::string& args) {
  const std::string cmd = "\"" + kCli + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string shell_output(const std::string& args) {
  const auto out = scratch("shell_out.txt");
  std::system(("\"" + kCli + "\" " + args + " > \"" + out.string() + "\" 2>/dev/null").c_str());
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("number formatting uses 12 significant digits", "[cli]") {
  REQUIRE(cli::fmt(-0.04) == "-0.04");
  REQUIRE(cli::fmt(1.0 / 3.0) == "0.333333333333");
  REQUIRE(cli::fmt(-0.0) == "0");
  REQUIRE(cli::fmt(123456789.123456) == "123456789.123");
  const json j = cli::round_floats(json{{"a", 2.0 / 3.0}, {"b", json::array({1.0 / 7.0, 3})}, {"c", "text"}});
  REQUIRE(j["a"].get<double>() == 0.666666666667);
  REQUIRE(j["b"][0].get<double>() == 0.142857142857);
  REQUIRE(j["b"][1].is_number_integer());
}

TEST_CASE("solve-mv reports the closed-form values", "[cli]") {
  cli::Options o;
  o.model = data("two_point_n1.json");
  o.lambda = 1.0;
  o.x0 = 0.0;
  o.method = "precommit";
  const auto pre = run_json("solve-mv", o);
  REQUIRE(pre["outputs"]["value"].get<double>() == -0.04);
  REQUIRE(pre["outputs"]["kind"] == "precommit");
  REQUIRE(pre["outputs"]["rules"][0]["kappa"].get<double>() == Approx(0.693333333333).margin(1e-12));
  REQUIRE(pre["version"] == std::string(kVersion));
  o.method = "equilibrium";
  REQUIRE(run_json("solve-mv", o)["outputs"]["value"].get<double>() == -0.04);

  o.method = "population";
  o.x0.reset();
  o.mu0 = data("mu0_two_point.json");
  const auto pop = run_json("solve-mv", o);
  REQUIRE(pop["outputs"]["value"].get<double>() == Approx(-0.999134).margin(1e-6));
  REQUIRE(pop["outputs"]["measures"].size() == 2);
  REQUIRE(pop["outputs"]["measures"][1]["support"] == 4);
  REQUIRE_FALSE(pop["outputs"].contains("snapshots"));
  o.snapshots = true;
  REQUIRE(run_json("solve-mv", o)["outputs"]["snapshots"][1]["points"].size() == 4);
}

TEST_CASE("printed numbers round-trip to library values", "[cli]") {
  cli::Options o;
  o.model = data("two_asset_n2.json");
  o.lambda = 0.7;
  o.mu0 = data("mu0_two_point.json");
  o.method = "population";
  const auto report = run_json("solve-mv", o);
  const auto model = io::market_from_json(io::load_json_file(o.model));
  const auto p = make_mv_problem(model, 0.7, io::measure_from_json(io::load_json_file(o.mu0)));
  const auto sol = population_solve(p);
  REQUIRE(report["outputs"]["value"].get<double>() == rounded(sol.value));
  for (std::size_t n = 0; n < sol.rules.size(); ++n) {
    const auto& r = report["outputs"]["rules"][n];
    REQUIRE(r["kappa"].get<double>() == rounded(sol.rules[n].kappa()));
    for (Eigen::Index k = 0; k < sol.rules[n].direction().size(); ++k)
      REQUIRE(r["direction"][static_cast<std::size_t>(k)].get<double>() == rounded(sol.rules[n].direction()(k)));
  }
  for (std::size_t n = 0; n < sol.measures.size(); ++n) {
    REQUIRE(report["outputs"]["measures"][n]["mean"].get<double>() == rounded(mean(sol.measures[n])));
    REQUIRE(report["outputs"]["measures"][n]["variance"].get<double>() == rounded(variance(sol.measures[n])));
  }
  for (int k = 1; k <= 2; ++k) REQUIRE(report["outputs"]["ell"][static_cast<std::size_t>(k - 1)].get<double>() == rounded(p.moments.ell(k)));

  cli::Options lq;
  lq.model = data("lq_n3.json");
  const auto lqr = run_json("solve-lq", lq);
  const auto sol_lq = lq_solve(io::lq_from_json(io::load_json_file(lq.model)));
  REQUIRE(lqr["outputs"]["value"].get<double>() == rounded(sol_lq.forward.value));
  REQUIRE(lqr["outputs"]["equilibrium"]["value"].get<double>() == rounded(sol_lq.equilibrium.value));
  for (std::size_t n = 0; n < sol_lq.backward.beta.size(); ++n)
    REQUIRE(lqr["outputs"]["beta"][n].get<double>() == rounded(sol_lq.backward.beta[n]));
}

TEST_CASE("policy files written by solve-mv drive simulate", "[cli]") {
  cli::Options o;
  o.model = data("two_point_n2.json");
  o.method = "precommit";
  o.json = true;
  o.out = scratch("policy.json").string();
  REQUIRE(run("solve-mv", o).exit_code == 0);

  cli::Options s;
  s.model = data("two_point_n2.json");
  s.policy = o.out;
  s.paths = 200'000;
  s.seed = 3;
  const auto from_file = run_json("simulate", s);
  s.policy.clear();
  s.method = "precommit";
  const auto from_method = run_json("simulate", s);
  // The report stores rule coefficients at 12 significant digits.
  REQUIRE(from_file["outputs"]["estimate"]["paths"] == from_method["outputs"]["estimate"]["paths"]);
  REQUIRE(from_file["outputs"]["estimate"]["value"].get<double>() ==
          Approx(from_method["outputs"]["estimate"]["value"].get<double>()).epsilon(1e-9));
  const double est = from_method["outputs"]["estimate"]["value"].get<double>();
  const double se = from_method["outputs"]["estimate"]["stderr"].get<double>();
  REQUIRE(std::abs(est - from_method["outputs"]["closed_form"].get<double>()) <= 4.0 * se);
}

TEST_CASE("solve-lq examples", "[cli]") {
  cli::Options o;
  o.model = data("lq_n3.json");
  const auto r = run_json("solve-lq", o);
  REQUIRE(r["outputs"]["value"].get<double>() == 1.0);
  REQUIRE(r["outputs"]["equilibrium"]["value"].get<double>() == rounded(1.0 + 17.0 / 36.0));
  o.x0 = 0.0;
  const auto z = run_json("solve-lq", o);
  REQUIRE(z["outputs"]["value"].get<double>() == 0.0);
  REQUIRE(z["outputs"]["equilibrium"]["value"].get<double>() == rounded(17.0 / 36.0));
}

TEST_CASE("figure1 CSV", "[cli]") {
  cli::Options o;
  o.n_max = 10;
  const auto r = run("figure1", o);
  REQUIRE(r.exit_code == 0);
  std::istringstream in(r.stdout_text);
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "N,Vo,Ve,gap");
  std::getline(in, line);
  REQUIRE(line == "1,-0.04,-0.04,0");
  std::getline(in, line);
  REQUIRE(line == "2,-0.0816,-0.08,0.0016");
  for (int k = 3; k <= 10; ++k) std::getline(in, line);
  REQUIRE(line.rfind("10,", 0) == 0);
  REQUIRE(line.substr(line.rfind(',') + 1).rfind("0.080244", 0) == 0);
  o.ell = "0.5";
  o.n_max = 2;
  REQUIRE(run_json("figure1", o)["outputs"]["rows"][1]["gap"].get<double>() == 1.0);
}

TEST_CASE("simulate reports are byte-identical across runs and thread counts", "[cli]") {
  cli::Options o;
  o.model = data("two_point_n2.json");
  o.method = "population";
  o.paths = 50'000;
  o.seed = 11;
  o.json = true;
  const auto a = run("simulate", o);
  const auto b = run("simulate", o);
  o.threads = 4;
  const auto c = run("simulate", o);
  REQUIRE(a.exit_code == 0);
  REQUIRE(a.stdout_text == b.stdout_text);
  REQUIRE(a.stdout_text == c.stdout_text);
}

TEST_CASE("simulate CSV and file output", "[cli]") {
  cli::Options o;
  o.model = data("lq_n3.json");
  o.method = "equilibrium";
  o.paths = 10;
  o.csv = true;
  o.out = scratch("samples.csv").string();
  const auto r = run("simulate", o);
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.stdout_text.empty());
  std::ifstream in(o.out);
  int rows = 0;
  for (std::string line; std::getline(in, line);) {
    REQUIRE_NOTHROW(std::stod(line));
    ++rows;
  }
  REQUIRE(rows == 10);
}

TEST_CASE("engine command", "[cli]") {
  cli::Options o;
  o.model = data("two_point_n2.json");
  o.x0 = 0.0;
  const auto r = run_json("engine", o);
  REQUIRE(r["outputs"]["choices"] == json::array({0, 0}));
  REQUIRE(r["outputs"]["value"] == r["outputs"]["closed_form"]);
  REQUIRE(r["outputs"]["caveat"] == "optimal within the declared rule families only");
  cli::Options lq;
  lq.model = data("lq_n3.json");
  const auto l = run_json("engine", lq);
  REQUIRE(l["outputs"]["value"].get<double>() == 1.0);
}

TEST_CASE("error categories map to exit codes", "[cli]") {
  cli::Options bad;
  bad.model = data("does_not_exist.json");
  REQUIRE(run("solve-mv", bad).exit_code == 2);

  cli::Options neg;
  neg.model = write_file("neg.json", R"({"rates":[0.5],"assets":1,"returns":[{"points":[[3.0],[-0.5]],"probs":[0.5,0.5]}]})");
  REQUIRE(run("solve-mv", neg).exit_code == 2);

  cli::Options flat;
  flat.model = write_file("flat.json", R"({"rates":[0.0],"assets":1,"returns":[{"points":[[1.0]],"probs":[1.0]}]})");
  const auto zm = run("solve-mv", flat);
  REQUIRE(zm.exit_code == 3);
  REQUIRE(zm.stderr_text.find("ZeroMeanRisk") != std::string::npos);

  cli::Options both;
  both.model = data("two_point_n1.json");
  both.x0 = 0.0;
  both.mu0 = data("mu0_two_point.json");
  REQUIRE(run("solve-mv", both).exit_code == 2);

  cli::Options method;
  method.model = data("two_point_n1.json");
  method.method = "greedy";
  REQUIRE(run("solve-mv", method).exit_code == 2);

  cli::Options ell;
  ell.ell = "1.5";
  REQUIRE(run("figure1", ell).exit_code == 2);
  ell.ell = "abc";
  REQUIRE(run("figure1", ell).exit_code == 2);

  cli::Options blow;
  blow.model = data("lq_n3.json");
  blow.family_size = 101;
  const auto cap = run("engine", blow);
  REQUIRE(cap.exit_code == 4);
  REQUIRE(cap.stderr_text.find("SearchBlowup") != std::string::npos);

  cli::Options unit;
  unit.model = write_file("wide_lq.json", R"({"b":1,"d":1,"sigma":1,"N":2,"x0":1,"noise":{"points":[-2,2],"probs":[0.5,0.5]}})");
  unit.method = "equilibrium";
  unit.paths = 10;
  REQUIRE(run("simulate", unit).exit_code == 3);
}

TEST_CASE("the executable honours the exit-code contract", "[cli]") {
  REQUIRE(shell_status("figure1 --Nmax 3") == 0);
  REQUIRE(shell_status("figure1 --ell 2") == 2);
  REQUIRE(shell_status("figure1 --no-such-flag") == 2);
  REQUIRE(shell_status("") == 2);
  REQUIRE(shell_status("solve-mv --model \"" + write_file("flat2.json", R"({"rates":[0.0],"assets":1,"returns":[{"points":[[1.0]],"probs":[1.0]}]})") + "\"") == 3);
  REQUIRE(shell_status("engine --model \"" + data("lq_n3.json") + "\" --family-size 101") == 4);
  REQUIRE(shell_output("solve-mv --model \"" + data("two_point_n1.json") + "\" --lambda 1 --x0 0 --method equilibrium --csv")
              .rfind("stage,form", 0) == 0);
}
