// Command-line front end: one subcommand per pipeline stage plus `run` and
// `synth`. Exit status is 0 on success, 1 on a hard failure, 2 on usage
// errors. Backends that fail without aborting the run are reported but do
// not change the exit status.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "wsi/error.hpp"
#include "wsi/format.hpp"
#include "wsi/pipeline.hpp"
#include "wsi/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config_path = "wsi.conf";
  std::optional<int> parallelism;
  std::optional<std::string> output;
};

wsi::RunConfig load(const Overrides& o) {
  auto cfg = wsi::load_config(o.config_path);
  if (o.parallelism) {
    cfg.translate_parallelism = cfg.classify_parallelism = cfg.backend_parallelism = cfg.kernel_threads =
        *o.parallelism;
  }
  if (o.output) cfg.output_dir = *o.output;
  return cfg;
}

void print_summary(const wsi::ReportBundle& bundle) {
  std::cout << "run " << bundle.run_id << " -> " << bundle.run_dir.string() << "\n";
  for (const auto& b : bundle.backends) {
    if (!b.failure.empty()) {
      std::cout << fmt::format("  {}: FAILED ({})\n", b.backend_id, b.failure);
      continue;
    }
    for (const auto& [kind, sweep] : {std::pair{"standard", &b.standard}, std::pair{"weighted", &b.weighted}}) {
      if (!*sweep || (*sweep)->results.empty()) continue;
      const auto& best = *std::min_element((*sweep)->results.begin(), (*sweep)->results.end(),
                                           [](const auto& x, const auto& y) { return x.p_value < y.p_value; });
      std::cout << fmt::format("  {} {}: strongest lag {} F={} p={}{}\n", b.backend_id, kind, best.lag,
                               wsi::format_fixed(best.f_stat, 3), wsi::format_fixed(best.p_value, 3),
                               wsi::to_string(best.stars));
    }
  }
  std::cout << fmt::format("  wire attempts: {}, cache hits: {}\n", bundle.wire_attempts, bundle.cache_hits);
}

void write_synth_config(const fs::path& dir) {
  std::ofstream out(dir / "wsi.conf");
  out << "# generated by `wsi synth`\n"
         "survey = survey\n"
         "wages = wages.csv\n"
         "backend.mock.endpoint = mock\n"
         "backend.lexicon.endpoint = lexicon\n"
         "normalization = per_comment\n"
         "max_lag = 24\n"
         "output = out\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wage Sentiment Index pipeline"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("-c,--config", o.config_path, "Key-value configuration file")->capture_default_str();
  app.add_option("-j,--parallelism", o.parallelism, "Set every parallelism limit to N");
  app.add_option("-o,--output", o.output, "Override the output directory");

  auto* ingest = app.add_subcommand("ingest", "Load surveys and wages, translate if configured");
  auto* classify = app.add_subcommand("classify", "Classify comments with one or all backends");
  std::string backend;
  classify->add_option("-b,--backend", backend, "Backend id (default: all)");
  auto* index = app.add_subcommand("index", "Build the monthly index series");
  auto* granger = app.add_subcommand("granger", "Run the Granger sweep");
  std::optional<int> max_lag;
  granger->add_option("--max-lag", max_lag, "Largest lag to test");
  auto* report = app.add_subcommand("report", "Write tables, charts and the manifest");
  auto* run = app.add_subcommand("run", "Run every stage");
  run->add_option("--max-lag", max_lag, "Largest lag to test");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus and wage series");
  wsi::SyntheticSpec spec;
  std::uint64_t seed = 42;
  std::string synth_out = "synth";
  synth->add_option("--months", spec.months)->capture_default_str();
  synth->add_option("--lead", spec.lead)->capture_default_str();
  synth->add_option("--seed", seed)->capture_default_str();
  synth->add_option("--comments", spec.comments_per_month, "Comments per month")->capture_default_str();
  synth->add_flag("--independent", spec.independent, "Sentiment independent of wages");
  synth->add_option("--out", synth_out, "Output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      if (spec.months < 1 || spec.lead < 0 || spec.comments_per_month < 1) {
        throw wsi::ConfigError("synth: months >= 1, lead >= 0 and comments >= 1 required");
      }
      auto files = wsi::generate_synthetic(spec, seed, synth_out);
      write_synth_config(synth_out);
      std::cout << fmt::format("wrote {} survey files and {} under {} (config: {})\n", files.survey_files.size(),
                               fs::path(files.wage_file).filename().string(), synth_out,
                               (fs::path(synth_out) / "wsi.conf").string());
      return 0;
    }

    auto cfg = load(o);
    if (max_lag) cfg.max_lag = *max_lag;
    wsi::Pipeline pipeline(std::move(cfg));
    if (run->parsed()) {
      auto bundle = pipeline.run();
      print_summary(bundle);
    } else if (ingest->parsed()) {
      pipeline.ingest();
      std::cout << "ingested -> " << pipeline.run_dir().string() << "\n";
    } else if (classify->parsed()) {
      pipeline.classify(backend);
      std::cout << "classified -> " << pipeline.run_dir().string() << "\n";
    } else if (index->parsed()) {
      pipeline.index();
      std::cout << "indexed -> " << pipeline.run_dir().string() << "\n";
    } else if (granger->parsed()) {
      pipeline.granger();
      std::cout << "granger -> " << pipeline.run_dir().string() << "\n";
    } else if (report->parsed()) {
      print_summary(pipeline.report());
    }
  } catch (const wsi::ConfigError& e) {
    std::cerr << "wsi: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "wsi: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
