// Acceptance runner: one pass/fail line per criterion, nonzero exit on any
// failing criterion.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vptrap/acceptance.hpp"
#include "vptrap/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"vptrap acceptance suites"};
  std::vector<std::string> suites;
  int workers = 0;
  app.add_option("--suite", suites, "suite to run (repeatable); all when omitted")
      ->check(CLI::IsMember(vptrap::suite_names()));
  app.add_option("--workers", workers, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  CLI11_PARSE(app, argc, argv);
  if (workers > 0) vptrap::set_workers(workers);
  if (suites.empty()) suites = vptrap::suite_names();

  const vptrap::AcceptanceSetup setup;
  bool ok = true;
  for (const std::string& name : suites) {
    try {
      const vptrap::SuiteResult r = vptrap::run_suite(name, setup);
      vptrap::print_suite(std::cout, r);
      ok = ok && r.pass();
    } catch (const std::exception& e) {
      std::cout << "[FAIL] " << name << ": suite aborted -- " << e.what() << '\n';
      ok = false;
    }
    std::cout.flush();
  }
  return ok ? 0 : 1;
}
