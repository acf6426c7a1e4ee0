#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <sys/wait.h>

#ifndef FKC_CLI_PATH
#error "FKC_CLI_PATH must point at the fkc executable"
#endif

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args) {
  static int counter = 0;
  const auto path = std::filesystem::temp_directory_path() / ("fkc_cli_" + std::to_string(counter++) + ".txt");
  const std::string cmd = std::string(FKC_CLI_PATH) + " " + args + " > " + path.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  r.out = ss.str();
  std::filesystem::remove(path);
  return r;
}

nlohmann::json last_record(const std::string& out) {
  std::istringstream in(out);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty() && line[0] == '{') last = line;
  return nlohmann::json::parse(last);
}

}  // namespace

TEST_CASE("compile prints a report record") {
  auto r = run("compile --form laplace --cell hex --degree 4 --mode spectral --report");
  REQUIRE(r.status == 0);
  auto j = last_record(r.out);
  CHECK(j["mode"] == "spectral");
  CHECK(j["form"] == "laplace");
  CHECK(j["cell"] == "hex");
  CHECK(j["degree"] == 4);
  CHECK(j["flops"].get<int64_t>() > 0);
  CHECK(j["table_bytes"].get<int64_t>() > 0);
  CHECK(j["kernel_hash"].get<std::string>().size() == 16);
}

TEST_CASE("collocated quadrature needs spectral gll elements") {
  auto r = run("compile --form laplace --cell quad --degree 2 --quadrature collocated-gll");
  CHECK(r.status == 2);
  CHECK(r.out.find("spectral_gll") != std::string::npos);
  auto ok = run("compile --form laplace --cell quad --degree 2 --variant spectral_gll --quadrature collocated-gll");
  CHECK(ok.status == 0);
}

TEST_CASE("same request gives the same hash") {
  auto a = run("compile --form mass_action --cell prism --degree 2 --mode coffee");
  auto b = run("compile --form mass_action --cell prism --degree 2 --mode coffee");
  REQUIRE(a.status == 0);
  REQUIRE(b.status == 0);
  CHECK(last_record(a.out)["kernel_hash"] == last_record(b.out)["kernel_hash"]);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run("compile --form nope").status == 2);
  CHECK(run("compile --cell dodecahedron").status == 2);
  CHECK(run("compile --degree 0").status == 2);
  CHECK(run("compile --form curl_curl --cell hex").status == 2);
  CHECK(run("compile --mode fast").status == 2);
  CHECK(run("compile --emit pdf").status == 2);
  CHECK(run("").status == 2);
}

TEST_CASE("emitted files land in the output directory") {
  const auto dir = std::filesystem::temp_directory_path() / "fkc_cli_out";
  std::filesystem::remove_all(dir);
  auto r = run("compile --form mass --cell quad --degree 2 --emit both --out " + dir.string());
  REQUIRE(r.status == 0);
  CHECK(std::filesystem::exists(dir / "mass_quad_2_spectral.c"));
  CHECK(std::filesystem::exists(dir / "mass_quad_2_spectral.json"));
  std::filesystem::remove_all(dir);

  auto c = run("compile --form mass --cell quad --degree 1 --emit c");
  CHECK(c.status == 0);
  CHECK(c.out.find("void kernel(") != std::string::npos);
}

TEST_CASE("sweep reports one record per degree and a slope") {
  auto r = run("sweep --form laplace_action --cell quad --mode spectral --from 2 --to 5");
  REQUIRE(r.status == 0);
  std::istringstream in(r.out);
  std::string line;
  int records = 0;
  nlohmann::json last;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] != '{') continue;
    last = nlohmann::json::parse(line);
    ++records;
  }
  CHECK(records == 5);
  CHECK(last.contains("slope"));
  CHECK(last["slope"].get<double>() > 1.0);
}
