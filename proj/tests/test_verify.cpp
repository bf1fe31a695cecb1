#include "verify.hpp"

#include <doctest.h>

using namespace vse;

TEST_CASE("verify suite passes on small instances") {
  VerifyOptions opt;
  opt.instances = 6;
  opt.max_T = 4;
  opt.probes = 20;
  const auto report = run_verify(opt);
  CHECK(report.instances == 6);
  CHECK(report.checks.size() == 7);
  for (const auto& c : report.checks) {
    INFO(c.name);
    CHECK(c.evaluated > 0);
    CHECK(c.passed());
  }
  CHECK(report.passed());
  CHECK(report.table().find("PASS") != std::string::npos);
}

TEST_CASE("injected violation is detected") {
  VerifyOptions opt;
  opt.instances = 3;
  opt.max_T = 3;
  opt.probes = 10;
  opt.inject_violation = true;
  const auto report = run_verify(opt);
  CHECK_FALSE(report.passed());
  CHECK(report.table().find("FAIL") != std::string::npos);
}

TEST_CASE("verify is deterministic in the seed") {
  VerifyOptions opt;
  opt.instances = 3;
  opt.max_T = 3;
  opt.probes = 10;
  CHECK(run_verify(opt).table() == run_verify(opt).table());
}

TEST_CASE("verify refuses instances beyond the enumeration cap") {
  VerifyOptions opt;
  opt.max_M = 4;
  opt.max_T = 10;
  try {
    run_verify(opt);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("4194304") != std::string::npos);
  }
  opt.max_M = 0;
  CHECK_THROWS_AS(run_verify(opt), InputError);
}
