#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "p3ls/harness.hpp"
#include "p3ls/simulator.hpp"
#include "p3ls/transcript.hpp"

namespace {

int log_level() {
  const char* env = std::getenv("P3LS_LOG");
  if (!env) return 0;
  const std::string value(env);
  if (value == "debug") return 2;
  if (value == "info" || value == "1") return 1;
  return 0;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "p3ls: " << msg << '\n';
}

void fail(const std::string& code, const std::string& message) {
  nlohmann::json j{{"error", code}, {"message", message}};
  std::cerr << j.dump() << '\n';
  std::exit(1);
}

std::vector<p3ls::sim::StageConfig> load_stage_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw p3ls::Error("cannot read config file " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  std::vector<p3ls::sim::StageConfig> stages;
  for (const auto& s : j.at("stages")) {
    p3ls::sim::StageConfig cfg;
    cfg.n_vars = s.at("n_vars").get<p3ls::Index>();
    cfg.n_resp = s.at("n_resp").get<p3ls::Index>();
    cfg.n_carry = s.value("n_carry", p3ls::Index{0});
    cfg.lin_low = s.value("lin_low", -1.0);
    cfg.lin_high = s.value("lin_high", 1.0);
    cfg.quad_low = s.value("quad_low", -0.01);
    cfg.quad_high = s.value("quad_high", 0.01);
    cfg.lin_sparsity = s.value("lin_sparsity", 0.0);
    cfg.quad_sparsity = s.value("quad_sparsity", 0.999);
    cfg.noise_std = s.value("noise_std", 0.001);
    stages.push_back(cfg);
  }
  return stages;
}

std::vector<std::string> split_models(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t next = csv.find(',', pos);
    out.push_back(csv.substr(pos, next == std::string::npos ? next : next - pos));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"P3LS experiment runner"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic multistage dataset");
  std::string gen_dataset = "1";
  p3ls::Seed gen_seed = 1;
  std::string gen_out = "dataset";
  p3ls::Index gen_samples = 1000;
  gen->add_option("--dataset", gen_dataset, "Dataset id 1..5 or path to a stage config JSON");
  gen->add_option("--seed", gen_seed, "Generation seed");
  gen->add_option("--samples", gen_samples, "Number of samples");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // run
  auto* run = app.add_subcommand("run", "Run the CenPLS / LocalPLS / P3LS comparison");
  std::string run_data;
  std::string run_models = "cen,local,p3ls";
  int run_reps = 100;
  p3ls::Index run_kmax = 10;
  p3ls::Seed run_seed = 1;
  std::string run_out = "results";
  bool run_quick = false;
  run->add_option("--data", run_data, "Dataset directory written by gen")->required();
  run->add_option("--models", run_models, "Comma-separated subset of cen,local,p3ls");
  run->add_option("--reps", run_reps, "Number of repetitions");
  run->add_option("--kmax", run_kmax, "Largest latent-variable count to try");
  run->add_option("--seed", run_seed, "Master seed");
  run->add_option("--out", run_out, "Output directory")->required();
  run->add_flag("--quick", run_quick, "Use 10 repetitions");

  // audit
  auto* audit = app.add_subcommand("audit", "Audit a protocol transcript for visibility violations");
  std::string audit_file;
  audit->add_option("--transcript", audit_file, "Transcript JSON-lines file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      std::vector<p3ls::sim::StageConfig> stages;
      if (gen_dataset.size() == 1 && gen_dataset[0] >= '0' && gen_dataset[0] <= '9')
        stages = p3ls::sim::builtin_config(gen_dataset[0] - '0');
      else
        stages = load_stage_config(gen_dataset);
      log_info("generating dataset into " + gen_out);
      p3ls::sim::SimulatedDataset ds = p3ls::sim::generate_dataset(stages, gen_samples, gen_seed);
      p3ls::sim::export_csv(ds, gen_out);
      std::cout << "wrote " << ds.x_blocks.size() << " blocks and y to " << gen_out << '\n';
      return 0;
    }

    if (run->parsed()) {
      p3ls::sim::SimulatedDataset ds = p3ls::sim::load_csv(run_data);
      p3ls::harness::ExperimentConfig cfg;
      cfg.dataset_label = run_data;
      cfg.repetitions = run_quick ? 10 : run_reps;
      cfg.master_seed = run_seed;
      cfg.k_max = run_kmax;
      cfg.models = split_models(run_models);
      log_info("running " + std::to_string(cfg.repetitions) + " repetitions");
      p3ls::fed::ProtocolTranscript transcript;
      p3ls::harness::ExperimentReport report =
          p3ls::harness::run_experiment(ds, cfg, &transcript);
      p3ls::harness::emit_report(report, run_out);
      if (transcript.size() > 0) {
        std::ofstream out(std::filesystem::path(run_out) / "transcript.jsonl");
        transcript.to_jsonl(out);
      }
      for (const std::string& model : cfg.models)
        std::cout << model << " mean test R2 = " << report.mean_test_r2(model) << '\n';
      return 0;
    }

    if (audit->parsed()) {
      std::ifstream in(audit_file);
      if (!in) throw p3ls::Error("cannot read transcript " + audit_file);
      p3ls::fed::ProtocolTranscript transcript = p3ls::fed::ProtocolTranscript::from_jsonl(in);
      std::vector<std::string> violations = p3ls::fed::audit_views(transcript);
      for (const std::string& v : violations) std::cout << "VIOLATION: " << v << '\n';
      std::cout << transcript.size() << " messages, " << violations.size() << " violations\n";
      return violations.empty() ? 0 : 2;
    }
  } catch (const p3ls::Error& err) {
    fail("p3ls_error", err.what());
  } catch (const std::exception& err) {
    fail("internal_error", err.what());
  }
  return 0;
}
