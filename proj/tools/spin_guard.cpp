// spin-guard command line front end.
//
// Exit status: 0 ok, 1 request flagged or refused (defend), 2 bad
// configuration or input, 3 model backend failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spin_guard/attack.hpp"
#include "spin_guard/config.hpp"
#include "spin_guard/detection.hpp"
#include "spin_guard/evaluation.hpp"
#include "spin_guard/jsonl.hpp"
#include "spin_guard/pipeline.hpp"
#include "spin_guard/reversal.hpp"
#include "spin_guard/serialize.hpp"
#include "spin_guard/text.hpp"

namespace sg = spin_guard;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRefused = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;

struct Common {
  std::string config_path;
  std::string input;
};

std::string resolve_input(const std::string& arg) {
  if (arg.size() > 1 && arg.front() == '@') {
    std::string s = sg::text::read_file(arg.substr(1));
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
  }
  return arg;
}

sg::PipelineConfig load_config(const std::string& flag) {
  std::string path = flag;
  if (path.empty()) {
    if (const char* env = std::getenv("SPIN_GUARD_CONFIG")) path = env;
  }
  if (path.empty()) sg::fail(sg::ErrorKind::ConfigError, "no config given (use --config or SPIN_GUARD_CONFIG)");
  return sg::parse_config(path);
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<double> losses_for(const std::vector<sg::EvalRecord>& records, const std::string& field) {
  std::vector<double> out;
  for (const auto& r : records) {
    if (!r.response) continue;
    if (field == "reversal") {
      if (r.response->reversal && !r.response->reversal->state.loss_trace.empty())
        out.push_back(r.response->reversal->state.loss_trace.front());
      continue;
    }
    const auto layer = sg::parse_detection_layer(field);
    if (!layer) sg::fail(sg::ErrorKind::InvalidArgument, "unknown --field '" + field + "'");
    if (const auto* l = r.response->detection.find(*layer); l && l->loss) out.push_back(*l->loss);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spin-guard: jailbreak detection and reversal for language model prompts"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool with_input) {
    sub->add_option("--config", common.config_path, "Pipeline config (JSON); defaults to $SPIN_GUARD_CONFIG");
    if (with_input) sub->add_option("--input", common.input, "Request text, or @file to read it")->required();
  };

  auto* detect_cmd = app.add_subcommand("detect", "Run the repeat/interjection layers");
  add_common(detect_cmd, true);
  auto* reverse_cmd = app.add_subcommand("reverse", "Run the defense-prefix search");
  add_common(reverse_cmd, true);
  auto* defend_cmd = app.add_subcommand("defend", "Run the full pipeline on one request");
  add_common(defend_cmd, true);

  auto* attack_cmd = app.add_subcommand("attack", "Optimize an adversarial suffix against the defenses");
  add_common(attack_cmd, false);
  std::string request;
  std::optional<double> lambda_r, lambda_i, lambda_p;
  std::size_t rounds = 0;
  std::string trace_path;
  attack_cmd->add_option("--request", request, "Request to attack")->required();
  attack_cmd->add_option("--lambda-r", lambda_r, "Weight of the repeat loss");
  attack_cmd->add_option("--lambda-i", lambda_i, "Weight of the interjection loss");
  attack_cmd->add_option("--lambda-p", lambda_p, "Weight of the perplexity loss");
  attack_cmd->add_option("--rounds", rounds, "Alternate attack and defense for this many rounds");
  attack_cmd->add_option("--trace", trace_path, "Write per-iteration losses as JSONL");

  auto* eval_cmd = app.add_subcommand("eval", "Benchmark the pipeline over a dataset");
  add_common(eval_cmd, false);
  std::string dataset, templates, out_path, summary_path, label_flag;
  std::size_t per_template = 30;
  std::uint64_t pair_seed = 0;
  bool append = false;
  eval_cmd->add_option("--dataset", dataset, "Request CSV")->required();
  eval_cmd->add_option("--templates", templates, "Directory of jailbreak templates (*.txt)");
  eval_cmd->add_option("--per-template", per_template, "Malicious requests paired with each template");
  eval_cmd->add_option("--pair-seed", pair_seed, "Seed for template pairing");
  eval_cmd->add_option("--label", label_flag, "Label every row (benign|malicious)");
  eval_cmd->add_option("--out", out_path, "JSONL output")->required();
  eval_cmd->add_option("--summary", summary_path, "Machine-readable summary (JSON)");
  eval_cmd->add_flag("--append", append, "Append to --out instead of replacing it");

  auto* roc_cmd = app.add_subcommand("roc", "ROC curve of a detection loss over two record files");
  std::string benign_path, malicious_path, field;
  roc_cmd->add_option("--benign", benign_path, "JSONL of benign records")->required();
  roc_cmd->add_option("--malicious", malicious_path, "JSONL of malicious records")->required();
  roc_cmd->add_option("--field", field, "repeat | interject | reversal")
      ->required()
      ->check(CLI::IsMember({"repeat", "interject", "reversal"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*roc_cmd) {
      const auto b = losses_for(sg::read_records(benign_path), field);
      const auto m = losses_for(sg::read_records(malicious_path), field);
      const auto curve = sg::roc(b, m);
      json out = curve;
      out["best_threshold"] = sg::threshold_to_json(sg::best_threshold(curve));
      out["field"] = field;
      out["benign"] = b.size();
      out["malicious"] = m.size();
      print(out);
      return kExitOk;
    }

    const auto config = load_config(common.config_path);
    const auto backend = sg::load_backend(config.backend);

    if (*detect_cmd) {
      sg::DetectionConfig det = config.detection;
      if (det.layers.empty()) det.layers = {sg::DetectionLayer::Repeat, sg::DetectionLayer::Interject};
      print(sg::detect(resolve_input(common.input), *backend, det));
      return kExitOk;
    }
    if (*reverse_cmd) {
      print(sg::reverse(resolve_input(common.input), *backend, config.reversal));
      return kExitOk;
    }
    if (*defend_cmd) {
      const auto r = sg::defend(resolve_input(common.input), config, *backend);
      print(r);
      const bool answered =
          r.verdict == sg::ResponseVerdict::BenignAnswered || r.verdict == sg::ResponseVerdict::DefendedAnswered;
      return answered ? kExitOk : kExitRefused;
    }
    if (*attack_cmd) {
      if (rounds > 0) {
        sg::AlternationConfig alt = config.alternation;
        alt.rounds = rounds;
        print(sg::alternating_attack_defense(request, *backend, config.attack, config.reversal, alt));
        return kExitOk;
      }
      sg::Lambdas l = config.lambdas;
      if (lambda_r) l.repeat = *lambda_r;
      if (lambda_i) l.interject = *lambda_i;
      if (lambda_p) l.autoreg = *lambda_p;
      l.validate();
      const auto state = sg::adaptive_attack(request, *backend, config.attack, l, config.detection);
      if (!trace_path.empty()) {
        std::filesystem::remove(trace_path);
        sg::JsonlWriter w(trace_path);
        for (const auto& it : state.trace)
          w.write(json{{"iteration", it.iteration}, {"losses", it.losses}, {"success", it.success}});
      }
      print(state);
      return kExitOk;
    }
    if (*eval_cmd) {
      std::optional<sg::Label> label;
      if (!label_flag.empty()) {
        label = sg::parse_label(label_flag);
        if (!label) sg::fail(sg::ErrorKind::ConfigError, "--label must be benign or malicious");
      }
      auto requests = sg::load_requests(dataset, label);
      if (!templates.empty()) {
        auto paired = sg::pair_templates(sg::load_templates(templates), requests, per_template, pair_seed);
        for (const auto& r : requests)
          if (r.label == sg::Label::Benign) paired.push_back(r);
        requests = std::move(paired);
      }
      if (!append) std::filesystem::remove(out_path);
      sg::JsonlWriter sink(out_path);
      const auto run = sg::run_benchmark(requests, config, *backend, &sink);
      std::cout << sg::format_summary(run.summary);
      if (!summary_path.empty()) {
        std::ofstream f(summary_path);
        if (!f) sg::fail(sg::ErrorKind::IoError, "cannot write '" + summary_path + "'");
        f << json(run.summary).dump(2) << '\n';
      }
      return kExitOk;
    }
  } catch (const sg::Error& e) {
    std::cerr << "spin-guard: " << e.what() << '\n';
    return sg::is_backend_error(e.kind()) ? kExitBackend : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "spin-guard: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
