// picone_lab command line tool.
//
//   picone_lab <subcommand> --config run.json [--out report.json] [--seed N]
//              [--frame NAME] [--mode algebraic|discrete] [--strict] [--dump-config]
//
// Exit codes: 0 all checks pass, 1 a check failed or a numeric failure,
// 2 invalid input.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "picone_lab/cli/run.hpp"

namespace {

using picone_lab::cli::json;

void print_table(const json& report, std::ostream& out) {
  out << report.at("subcommand").get<std::string>() << "\n";
  for (const auto& c : report.at("checks")) {
    out << "  " << (c.at("pass").get<bool>() ? "PASS " : "FAIL ") << c.at("name").get<std::string>();
    const json& v = c.at("values");
    for (const char* key : {"lhs", "rhs", "residual", "lambda", "order", "deviation"}) {
      if (v.contains(key) && v.at(key).is_number()) out << "  " << key << "=" << v.at(key).get<double>();
    }
    out << "\n";
  }
  const json& s = report.at("summary");
  out << "  " << s.at("passed").get<std::size_t>() << "/" << s.at("total").get<std::size_t>() << " checks passed\n";
}

int fail(int code, const std::string& message) {
  std::string line = message;
  for (char& ch : line) {
    if (ch == '\n') ch = ' ';
  }
  std::cerr << "picone_lab: " << line << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable-exponent Picone identity laboratory"};
  std::string subcommand;
  std::string config_path;
  picone_lab::cli::Overrides o;
  std::string out, frame, mode;
  std::uint64_t seed = 0;
  bool dump = false;
  app.add_option("subcommand", subcommand, "norm, picone, eigen, monotonicity, simplicity, hardy, caccioppoli, "
                                           "logcaccioppoli or convergence");
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  auto* out_opt = app.add_option("--out", out, "report path");
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  auto* frame_opt = app.add_option("--frame", frame, "euclidean2, euclidean3, grushin or heisenberg");
  auto* mode_opt = app.add_option("--mode", mode, "algebraic or discrete")->check(CLI::IsMember({"algebraic", "discrete"}));
  app.add_flag("--strict", o.strict, "add a coarse-grid discretization allowance to inequality checks");
  app.add_flag("--dump-config", dump, "print the resolved config and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, e.what());
  }

  try {
    json cfg = json::object();
    std::filesystem::path base = std::filesystem::current_path();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      cfg = json::parse(in);
      base = std::filesystem::absolute(config_path).parent_path();
    }
    if (!subcommand.empty()) o.subcommand = subcommand;
    if (*out_opt) o.out = out;
    if (*seed_opt) o.seed = seed;
    if (*frame_opt) o.frame = frame;
    if (*mode_opt) o.mode = mode;
    cfg = picone_lab::cli::apply_overrides(std::move(cfg), o);
    if (dump) {
      std::cout << cfg.dump(2) << "\n";
      return 0;
    }
    picone_lab::cli::Runner runner(cfg, base);
    const json report = runner.run();
    const std::string report_path =
        cfg.contains("outputs") ? cfg.at("outputs").value("report", std::string{}) : std::string{};
    if (report_path.empty()) {
      std::cout << report.dump(2) << "\n";
    } else {
      std::filesystem::path p(report_path);
      if (p.is_relative() && !*out_opt) p = base / p;
      std::ofstream f(p);
      if (!f) return fail(2, "cannot write report to " + p.string());
      f << report.dump(2) << "\n";
      print_table(report, std::cout);
    }
    return report.at("summary").at("all_pass").get<bool>() ? 0 : 1;
  } catch (const picone_lab::InvalidInput& e) {
    return fail(2, e.what());
  } catch (const json::exception& e) {
    return fail(2, e.what());
  } catch (const picone_lab::NumericError& e) {
    return fail(1, e.what());
  } catch (const std::exception& e) {
    return fail(1, e.what());
  }
}
