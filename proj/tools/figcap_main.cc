// Copyright 2026 The figcap Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// figcap: validate | filter-audit | optimize | run | eval | report

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "figcap/commands.h"
#include "figcap/config.h"
#include "figcap/corpus.h"

namespace {

using figcap::cli::RunConfig;

struct Overrides {
  std::string config;
  std::optional<std::string> split;
  std::optional<uint64_t> seed;
  std::optional<double> lambda;
  bool filtered_inference = false;
  bool stage1_only = false;
  std::optional<size_t> workers;
  bool mock = false;
  std::optional<std::string> out_dir;
};

void add_run_flags(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "INI configuration file");
  app->add_option("--split", o.split, "Corpus split: train, val or test");
  app->add_option("--seed", o.seed, "Random seed");
  app->add_option("--lambda", o.lambda, "Relevance threshold (> 0)");
  app->add_flag("--filtered-inference", o.filtered_inference,
                "Filter paragraphs at inference");
  app->add_flag("--stage1-only", o.stage1_only, "Skip stage-2 refinement");
  app->add_option("--workers", o.workers, "Worker threads (0 = all processors)");
  app->add_flag("--mock", o.mock, "Use the offline mock backend");
  app->add_option("--out-dir", o.out_dir, "Run directory");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
  if (o.split) c.split = *o.split;
  if (o.seed) c.seed = *o.seed;
  if (o.lambda) c.lambda = *o.lambda;
  if (o.filtered_inference) c.filtered_inference = true;
  if (o.stage1_only) c.stage1_only = true;
  if (o.workers) c.workers = *o.workers;
  if (o.mock) c.backend.kind = "mock";
  if (o.out_dir) c.out_dir = *o.out_dir;
  // Re-validate after overrides.
  return RunConfig::parse(c.dump());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Figure-caption generation and evaluation"};
  app.require_subcommand(1);

  std::string validate_path;
  std::optional<std::string> validate_split;
  CLI::App* validate = app.add_subcommand("validate", "Check a corpus file");
  validate->add_option("corpus", validate_path, "JSONL corpus")->required();
  validate->add_option("--split", validate_split, "Only this split");

  Overrides audit_o, optimize_o, run_o;
  CLI::App* audit = app.add_subcommand("filter-audit", "Dump per-chunk relevance scores");
  add_run_flags(audit, audit_o);
  CLI::App* optimize = app.add_subcommand("optimize", "Optimize per-category templates");
  add_run_flags(optimize, optimize_o);
  CLI::App* run = app.add_subcommand("run", "Generate captions end to end");
  add_run_flags(run, run_o);

  std::vector<std::string> eval_candidates;
  std::string eval_refs, eval_baseline, eval_out = "eval";
  CLI::App* eval = app.add_subcommand("eval", "Score caption files against references");
  eval->add_option("--candidates", eval_candidates, "[name=]path JSONL, repeatable")
      ->required();
  eval->add_option("--references", eval_refs, "Reference JSONL")->required();
  eval->add_option("--baseline", eval_baseline, "Baseline condition name");
  eval->add_option("--out-dir", eval_out, "Output directory");

  std::string report_in, report_baseline, report_format = "markdown";
  CLI::App* rep = app.add_subcommand("report", "Re-render a report.json");
  rep->add_option("report", report_in, "report.json")->required();
  rep->add_option("--baseline", report_baseline, "Baseline condition name");
  rep->add_option("--format", report_format, "markdown, csv or json");

  CLI11_PARSE(app, argc, argv);

  try {
    namespace cli = figcap::cli;
    if (*validate) {
      std::optional<figcap::corpus::Split> split;
      if (validate_split) split = figcap::corpus::parse_split(*validate_split);
      return cli::cmd_validate(validate_path, split, std::cout);
    }
    if (*audit) return cli::cmd_filter_audit(resolve(audit_o), std::cout);
    if (*optimize) return cli::cmd_optimize(resolve(optimize_o), std::cout);
    if (*run) return cli::cmd_run(resolve(run_o), std::cout);
    if (*eval) {
      std::vector<cli::CandidateSpec> specs;
      for (const std::string& s : eval_candidates) specs.push_back(cli::CandidateSpec::parse(s));
      return cli::cmd_eval(specs, eval_refs, eval_baseline, eval_out, std::cout);
    }
    if (*rep) return cli::cmd_report(report_in, report_baseline, report_format, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return figcap::cli::kExitValidation;
  }
  return 0;
}
