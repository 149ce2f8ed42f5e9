#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "app.hpp"
#include "ehom/errors.hpp"

namespace {

std::optional<int> env_threads() {
  const char* v = std::getenv("EH_THREADS");
  if (v == nullptr || *v == '\0') {
    return std::nullopt;
  }
  try {
    const int n = std::stoi(v);
    if (n >= 1) {
      return n;
    }
  } catch (const std::exception&) {
  }
  throw ehom::ConfigError("EH_THREADS must be a positive integer");
}

} // namespace

int main(int argc, char** argv) {
  using namespace ehom::app;

  CLI::App cli{"Numerical homogenization of degenerate elliptic media"};
  cli.require_subcommand(1);
  cli.set_version_flag("--version", kToolVersion);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool check = false;
  std::string report_path;
  std::string format = "json";

  const std::vector<std::pair<std::string, std::string>> stages = {
      {"gen", "Generate the coefficient field"},
      {"validate", "Check the moment condition"},
      {"solve", "Solve the corrector problems"},
      {"effective", "Assemble D and check the variational bounds"},
      {"sublinearity", "Corrector sup-norm under refinement"},
      {"audit", "Maximal inequality audit"},
      {"simulate", "Monte Carlo walk and CLT statistics"},
      {"run", "Run every stage listed in the config"},
  };
  std::vector<CLI::App*> stage_cmds;
  for (const auto& [name, help] : stages) {
    CLI::App* sub = cli.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Config file (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Master seed override");
    sub->add_option("--threads", threads, "Worker threads (default EH_THREADS or 1)")->check(CLI::PositiveNumber);
    sub->add_flag("--check", check, "Exit 4 when an acceptance check fails");
    stage_cmds.push_back(sub);
  }
  CLI::App* report_cmd = cli.add_subcommand("report", "Render a stored report");
  report_cmd->add_option("report", report_path, "Path to report.json")->required();
  report_cmd->add_option("--format", format, "json, csv or md")->check(CLI::IsMember({"json", "csv", "md"}));
  report_cmd->add_option("--out", out_dir, "Directory for csv files");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? kOk : kValidationFailure;
  }

  try {
    if (report_cmd->parsed()) {
      const nlohmann::json report = load_report(report_path);
      const std::filesystem::path dir =
          out_dir.empty() ? std::filesystem::path(report_path).parent_path() : std::filesystem::path(out_dir);
      std::cout << render_report(report, format, dir);
      return kOk;
    }
    for (std::size_t i = 0; i < stage_cmds.size(); ++i) {
      if (!stage_cmds[i]->parsed()) {
        continue;
      }
      RunConfig config = load_config(config_path);
      RunOptions options;
      options.check = check;
      options.seed = seed;
      options.threads = threads ? threads : env_threads();
      if (!out_dir.empty()) {
        options.output_dir = out_dir;
      }
      std::vector<std::string> requested;
      if (stages[i].first != "run") {
        requested.push_back(stages[i].first);
      }
      const nlohmann::json report = run_pipeline(std::move(config), requested, options);
      if (check && !report_check_passed(report)) {
        for (const auto& item : report.at("check").at("items")) {
          if (!item.at("passed").get<bool>()) {
            std::cerr << "check failed: " << item.at("name").get<std::string>() << ": "
                      << item.at("detail").get<std::string>() << '\n';
          }
        }
        return kCheckFailure;
      }
      return kOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kFailure;
}
