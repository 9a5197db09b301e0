#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

namespace {

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run(const std::string& args) {
  std::string cmd = std::string(PLASTAR_BIN) + " " + args + " 2>&1";
  std::array<char, 4096> buf{};
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buf.data(), buf.size(), pipe)) out += buf.data();
  int status = pclose(pipe);
  return {WEXITSTATUS(status), out};
}

std::string write_temp(const std::string& name, const std::string& text) {
  std::string path = std::string("cli_") + name;
  std::ofstream out(path);
  out << text;
  return path;
}

}  // namespace

TEST_CASE("eval") {
  auto r = run("eval --seq path --n 10 --formula \"exists y . E(x, y)\" --at x=3");
  CHECK(r.exit_code == 0);
  CHECK(r.output == "1\n");
  auto c = run("eval --formula 0.25");
  CHECK(c.output == "0.25\n");
}

TEST_CASE("malformed formula exits 2 with a position") {
  auto r = run("eval --formula \"am[\"");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("offset") != std::string::npos);
}

TEST_CASE("exact and over-budget exact") {
  std::string net = write_temp("set_net.txt", "sigma R/1 | tau=0\nprob R(x): 0.5\n");
  auto r = run("exact --seq set --n 4 --net " + net + " --event \"exists x . R(x)\"");
  CHECK(r.exit_code == 0);
  CHECK(r.output == "0.9375\n");

  auto over = run("exact --seq set --n 64 --net " + net +
                  " --event \"exists x . R(x)\"");
  CHECK(over.exit_code == 3);
  CHECK(over.output.find("budget") != std::string::npos);
}

TEST_CASE("sample determinism") {
  std::string net =
      write_temp("path_net.txt", "sigma E/2 R/1 | tau=1\nprob R(x): 0.5\n");
  auto a = run("sample --seq path --n 12 --net " + net + " --seed 7");
  auto b = run("sample --seq path --n 12 --net " + net + " --seed 7");
  auto c = run("sample --seq path --n 12 --net " + net + " --seed 8");
  CHECK(a.exit_code == 0);
  CHECK(a.output == b.output);
  CHECK(a.output != c.output);
}

TEST_CASE("estimate prints a radius") {
  std::string net = write_temp("set_net2.txt", "sigma R/1 | tau=0\nprob R(x): 0.5\n");
  auto r = run("estimate --seq set --n 4 --net " + net +
               " --event \"exists x . R(x)\" --samples 2000 --seed 5");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("# estimate radius samples confidence") == 0);
}

TEST_CASE("types and classify") {
  auto r = run("types --seq path --lambda 1 --arity 1 --probes 16,32");
  CHECK(r.exit_code == 0);
  int rows = 0;
  for (char ch : r.output) rows += ch == '\n';
  CHECK(rows == 10);  // header + 9 realized types

  auto c = run("classify --seq path --lambda 1 --arity 1 --probes 16,32");
  CHECK(c.exit_code == 0);
  CHECK(c.output.find("Bounded") != std::string::npos);
  CHECK(c.output.find("StronglyUnbounded") != std::string::npos);
}

TEST_CASE("compile, check and distribution") {
  std::string net =
      write_temp("r03_net.txt", "sigma E/2 R/1 | tau=1\nprob R(x): 0.3\n");
  std::string basic = "cli_basic_out.txt";
  auto comp = run("compile --seq path --net " + net +
                  " --formula \"R(x)\" --probes 8,16 --out " + basic);
  CHECK(comp.exit_code == 0);
  CHECK(comp.output.find("mode=exact") != std::string::npos);

  std::ifstream in(basic);
  std::string line;
  std::getline(in, line);
  CHECK(line.find("basic level=0") == 0);

  auto chk = run("check --seq path --net " + net +
                 " --formula \"R(x)\" --basic " + basic +
                 " --probes 8,16 --samples 20");
  CHECK(chk.exit_code == 0);
  CHECK(chk.output.find("PASS") != std::string::npos);

  auto dist = run("distribution --seq path --net " + net +
                  " --formula \"R(x)\" --probes 2,3 --samples 200 --seed 3");
  CHECK(dist.exit_code == 0);
  CHECK(dist.output.find("# value beta") != std::string::npos);
  CHECK(dist.output.find("0.3") != std::string::npos);
}

TEST_CASE("PLASTAR_SEED supplies the default seed") {
  std::string net =
      write_temp("env_net.txt", "sigma E/2 R/1 | tau=1\nprob R(x): 0.5\n");
  auto a = run("sample --seq path --n 10 --net " + net + " --seed 99");
  setenv("PLASTAR_SEED", "99", 1);
  auto b = run("sample --seq path --n 10 --net " + net);
  unsetenv("PLASTAR_SEED");
  CHECK(a.output == b.output);
}

TEST_CASE("config file values apply with flags taking precedence") {
  std::string net =
      write_temp("cfg_net.txt", "sigma E/2 R/1 | tau=1\nprob R(x): 0.5\n");
  std::string cfg = write_temp("run.ini",
                               "seq=path\nn=10\nformula=\"exists y . E(x, y)\"\n"
                               "at=x=3\n");
  auto r = run("eval --config " + std::string("cli_run.ini"));
  CHECK(r.exit_code == 0);
  CHECK(r.output == "1\n");
  // a flag overrides the config file
  auto s = run("eval --config cli_run.ini --at x=10");
  CHECK(s.exit_code == 0);
  CHECK(s.output == "0\n");
}
