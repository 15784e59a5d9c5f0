#include "p3ls/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>

#include "p3ls/errors.hpp"
#include "p3ls/federation.hpp"
#include "p3ls/pls.hpp"
#include "p3ls/rng.hpp"

namespace p3ls::harness {

namespace {

using nlohmann::json;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Matrix concat_cols(const std::vector<Matrix>& blocks) {
  Index cols = 0;
  for (const Matrix& b : blocks) cols += b.cols();
  Matrix out(blocks.front().rows(), cols);
  Index at = 0;
  for (const Matrix& b : blocks) {
    out.middleCols(at, b.cols()) = b;
    at += b.cols();
  }
  return out;
}

/// Sign vector aligning the federated components to the centralized ones,
/// chosen jointly over (t_j, w_j, p_j, q_j).
Vector alignment_signs(const PlsModel& cen, const Matrix& t, const Matrix& w, const Matrix& p,
                       const Matrix& q) {
  Vector signs(cen.components);
  for (Index j = 0; j < cen.components; ++j) {
    const double agreement = cen.scores.col(j).dot(t.col(j)) + cen.weights.col(j).dot(w.col(j)) +
                             cen.x_loadings.col(j).dot(p.col(j)) +
                             cen.y_loadings.col(j).dot(q.col(j));
    signs(j) = agreement < 0.0 ? -1.0 : 1.0;
  }
  return signs;
}

double mean_squared_distance(const Matrix& a, const Matrix& b) {
  return (a - b).squaredNorm() / double(a.size());
}

json model_to_json(const ModelRecord& r) {
  return {{"test_r2", r.test_r2},
          {"chosen_k", r.chosen_k},
          {"fit_seconds", r.fit_seconds},
          {"inference_seconds", r.inference_seconds}};
}

ModelRecord model_from_json(const json& j) {
  ModelRecord r;
  r.test_r2 = j.at("test_r2").get<double>();
  r.chosen_k = j.at("chosen_k").get<Index>();
  r.fit_seconds = j.at("fit_seconds").get<double>();
  r.inference_seconds = j.at("inference_seconds").get<double>();
  return r;
}

void strip_timings(json& j) {
  if (j.is_object()) {
    j.erase("fit_seconds");
    j.erase("inference_seconds");
    j.erase("mean_fit_seconds");
    j.erase("mean_inference_seconds");
    for (auto& [key, value] : j.items()) strip_timings(value);
  } else if (j.is_array()) {
    for (auto& value : j) strip_timings(value);
  }
}

}  // namespace

SplitIndices split_dataset(Index samples, Seed seed) {
  if (samples < 10) throw TooFewRows(samples);
  std::vector<Index> order(static_cast<std::size_t>(samples));
  std::iota(order.begin(), order.end(), Index{0});
  // Explicit Fisher-Yates; std::shuffle output is not pinned by the standard.
  auto gen = rng::engine(seed);
  for (Index i = samples - 1; i > 0; --i) {
    const Index j = static_cast<Index>(gen() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[i], order[j]);
  }
  const Index n_train = samples * 6 / 10;
  const Index n_val = samples * 2 / 10;
  SplitIndices split;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.validation.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  split.test.assign(order.begin() + n_train + n_val, order.end());
  return split;
}

Matrix take_rows(const Matrix& mat, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), mat.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = mat.row(rows[i]);
  return out;
}

double ExperimentReport::mean_test_r2(const std::string& model) const {
  double sum = 0.0;
  int count = 0;
  for (const RepetitionRecord& rep : repetitions) {
    auto it = rep.models.find(model);
    if (it == rep.models.end()) continue;
    sum += it->second.test_r2;
    ++count;
  }
  return count ? sum / count : 0.0;
}

double ExperimentReport::std_test_r2(const std::string& model) const {
  const double mean = mean_test_r2(model);
  double sum = 0.0;
  int count = 0;
  for (const RepetitionRecord& rep : repetitions) {
    auto it = rep.models.find(model);
    if (it == rep.models.end()) continue;
    sum += (it->second.test_r2 - mean) * (it->second.test_r2 - mean);
    ++count;
  }
  return count > 1 ? std::sqrt(sum / (count - 1)) : 0.0;
}

ExperimentReport run_experiment(const sim::SimulatedDataset& dataset,
                                const ExperimentConfig& config,
                                fed::ProtocolTranscript* transcript_out) {
  const int g = static_cast<int>(dataset.x_blocks.size());
  const Index m = dataset.y.rows();
  ExperimentReport report;
  report.config = config;
  for (const std::string& model : config.models) report.block_access[model].assign(g, 0);

  auto wants = [&](const std::string& model) {
    return std::find(config.models.begin(), config.models.end(), model) != config.models.end();
  };
  auto fetch_block = [&](const std::string& model, int block) -> const Matrix& {
    report.block_access[model][block] += 1;
    return dataset.x_blocks[block];
  };

  for (int rep = 0; rep < config.repetitions; ++rep) {
    const Seed rep_seed = rng::derive(config.master_seed, "repetition-" + std::to_string(rep));
    const SplitIndices split = split_dataset(m, rng::derive(rep_seed, "split"));
    const Matrix y_train = take_rows(dataset.y, split.train);
    const Matrix y_val = take_rows(dataset.y, split.validation);
    const Matrix y_test = take_rows(dataset.y, split.test);

    RepetitionRecord record;
    record.index = rep;
    PlsModel cen_model;
    bool have_cen = false;

    try {
      if (wants("cen")) {
        std::vector<Matrix> blocks;
        for (int b = 0; b < g; ++b) blocks.push_back(fetch_block("cen", b));
        const Matrix x_all = concat_cols(blocks);
        const Matrix x_train = take_rows(x_all, split.train);
        const Matrix x_val = take_rows(x_all, split.validation);
        const Matrix x_test = take_rows(x_all, split.test);

        ModelRecord mr;
        mr.chosen_k = select_k(x_train, y_train, x_val, y_val, config.k_max);
        auto t0 = std::chrono::steady_clock::now();
        cen_model = fit_standardizing(x_train, y_train, mr.chosen_k);
        mr.fit_seconds = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        const Matrix yhat = predict(cen_model, x_test);
        mr.inference_seconds = seconds_since(t0);
        mr.test_r2 = r2_per_column(y_test, yhat).mean();
        record.models["cen"] = mr;
        have_cen = true;
      }

      if (wants("local")) {
        const Matrix& x_last = fetch_block("local", g - 1);
        const Matrix x_train = take_rows(x_last, split.train);
        const Matrix x_val = take_rows(x_last, split.validation);
        const Matrix x_test = take_rows(x_last, split.test);

        ModelRecord mr;
        mr.chosen_k = select_k(x_train, y_train, x_val, y_val, config.k_max);
        auto t0 = std::chrono::steady_clock::now();
        PlsModel model = fit_standardizing(x_train, y_train, mr.chosen_k);
        mr.fit_seconds = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        const Matrix yhat = predict(model, x_test);
        mr.inference_seconds = seconds_since(t0);
        mr.test_r2 = r2_per_column(y_test, yhat).mean();
        record.models["local"] = mr;
      }

      if (wants("p3ls")) {
        std::vector<Matrix> train_blocks, val_blocks, test_blocks;
        std::vector<Index> widths;
        for (int b = 0; b < g; ++b) {
          const Matrix& block = fetch_block("p3ls", b);
          train_blocks.push_back(take_rows(block, split.train));
          val_blocks.push_back(take_rows(block, split.validation));
          test_blocks.push_back(take_rows(block, split.test));
          widths.push_back(block.cols());
        }
        const Index n = std::accumulate(widths.begin(), widths.end(), Index{0});
        const Index cap = std::min<Index>(config.k_max,
                                          std::min<Index>(Index(split.train.size()) - 1, n));
        const Seed protocol_seed = rng::derive(rep_seed, "protocol");
        auto make_config = [&](Index k) {
          fed::FederationConfig fc;
          fc.block_widths = widths;
          fc.targets = dataset.y.cols();
          fc.components = k;
          fc.master_seed = protocol_seed;
          fc.lc_owns_last_block = true;  // the last company also holds Y
          return fc;
        };

        // Federated k selection: validation R^2 computed at the LC.
        Index best_k = 1;
        double best_r2 = -std::numeric_limits<double>::infinity();
        for (Index k = 1; k <= cap; ++k) {
          fed::Federation federation(make_config(k), train_blocks, y_train);
          try {
            federation.run_training();
          } catch (const RankDeficient&) {
            break;
          }
          const Matrix yhat_val = federation.run_inference(val_blocks).predictions;
          const double r2 = r2_per_column(y_val, yhat_val).mean();
          if (r2 > best_r2 + 1e-10) {
            best_r2 = r2;
            best_k = k;
          }
        }

        ModelRecord mr;
        mr.chosen_k = best_k;
        fed::Federation federation(make_config(best_k), train_blocks, y_train);
        auto t0 = std::chrono::steady_clock::now();
        const fed::TrainingResult shares = federation.run_training();
        mr.fit_seconds = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        const fed::InferenceResult inference = federation.run_inference(test_blocks);
        mr.inference_seconds = seconds_since(t0);
        mr.test_r2 = r2_per_column(y_test, inference.predictions).mean();
        record.models["p3ls"] = mr;

        if (have_cen) {
          // Compare against a centralized fit with the same k; lossless runs
          // select identical k, so this normally reuses the cen model.
          PlsModel reference = cen_model;
          if (reference.components != best_k) {
            const Matrix x_train = concat_cols(train_blocks);
            reference = fit_standardizing(x_train, y_train, best_k);
          }
          Matrix w_fed(n, best_k), p_fed(n, best_k), b_fed(n, dataset.y.cols());
          Index at = 0;
          for (int b = 0; b < g; ++b) {
            w_fed.middleRows(at, widths[b]) = shares.fc_shares[b].weights;
            p_fed.middleRows(at, widths[b]) = shares.fc_shares[b].x_loadings;
            b_fed.middleRows(at, widths[b]) = shares.fc_shares[b].coefficients;
            at += widths[b];
          }
          const Matrix& t_fed = shares.fc_shares[0].scores;
          const Matrix& q_fed = shares.lc_share.y_loadings;
          Vector signs = alignment_signs(reference, t_fed, w_fed, p_fed, q_fed);
          record.component_distances["T"] =
              mean_squared_distance(reference.scores, t_fed * signs.asDiagonal());
          record.component_distances["W"] =
              mean_squared_distance(reference.weights, w_fed * signs.asDiagonal());
          record.component_distances["Q"] =
              mean_squared_distance(reference.y_loadings, q_fed * signs.asDiagonal());
          record.component_distances["B"] = mean_squared_distance(reference.coefficients, b_fed);
          Index row = 0;
          for (int b = 0; b < g; ++b) {
            record.component_distances["P" + std::to_string(b + 1)] = mean_squared_distance(
                reference.x_loadings.middleRows(row, widths[b]),
                shares.fc_shares[b].x_loadings * signs.asDiagonal());
            row += widths[b];
          }
        }

        if (transcript_out && rep == config.repetitions - 1) {
          federation.run_contribution();
          *transcript_out = federation.transcript();
        }
      }
    } catch (const Error& err) {
      throw Error("repetition " + std::to_string(rep) + " failed: " + err.what());
    }

    report.repetitions.push_back(std::move(record));
  }
  return report;
}

void emit_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  json j;
  j["config"] = {{"dataset", report.config.dataset_label},
                 {"repetitions", report.config.repetitions},
                 {"master_seed", report.config.master_seed},
                 {"k_max", report.config.k_max},
                 {"models", report.config.models}};
  j["block_access"] = report.block_access;
  j["repetitions"] = json::array();
  for (const RepetitionRecord& rep : report.repetitions) {
    json r;
    r["index"] = rep.index;
    r["models"] = json::object();
    for (const auto& [name, record] : rep.models) r["models"][name] = model_to_json(record);
    r["component_distances"] = rep.component_distances;
    j["repetitions"].push_back(std::move(r));
  }
  j["summary"] = json::object();
  for (const std::string& model : report.config.models) {
    double fit_sum = 0.0, inf_sum = 0.0;
    int count = 0;
    for (const RepetitionRecord& rep : report.repetitions) {
      auto it = rep.models.find(model);
      if (it == rep.models.end()) continue;
      fit_sum += it->second.fit_seconds;
      inf_sum += it->second.inference_seconds;
      ++count;
    }
    j["summary"][model] = {{"mean_test_r2", report.mean_test_r2(model)},
                           {"std_test_r2", report.std_test_r2(model)},
                           {"mean_fit_seconds", count ? fit_sum / count : 0.0},
                           {"mean_inference_seconds", count ? inf_sum / count : 0.0}};
  }

  std::ofstream json_out(dir / "report.json");
  if (!json_out) throw Error("cannot write report.json in " + dir.string());
  json_out << j.dump(2) << '\n';

  std::ofstream csv_out(dir / "summary.csv");
  if (!csv_out) throw Error("cannot write summary.csv in " + dir.string());
  csv_out << "model,dataset,mean_test_r2,std_test_r2,mean_fit_seconds,mean_inference_seconds\n";
  csv_out.precision(17);
  for (const std::string& model : report.config.models) {
    const auto& s = j["summary"][model];
    csv_out << model << ',' << report.config.dataset_label << ','
            << s["mean_test_r2"].get<double>() << ',' << s["std_test_r2"].get<double>() << ','
            << s["mean_fit_seconds"].get<double>() << ','
            << s["mean_inference_seconds"].get<double>() << '\n';
  }
}

ExperimentReport load_report(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw Error("cannot read " + json_path.string());
  json j = json::parse(in);

  ExperimentReport report;
  report.config.dataset_label = j.at("config").at("dataset").get<std::string>();
  report.config.repetitions = j.at("config").at("repetitions").get<int>();
  report.config.master_seed = j.at("config").at("master_seed").get<Seed>();
  report.config.k_max = j.at("config").at("k_max").get<Index>();
  report.config.models = j.at("config").at("models").get<std::vector<std::string>>();
  report.block_access = j.at("block_access").get<BlockAccessCounts>();
  for (const json& r : j.at("repetitions")) {
    RepetitionRecord rep;
    rep.index = r.at("index").get<int>();
    for (const auto& [name, record] : r.at("models").items())
      rep.models[name] = model_from_json(record);
    rep.component_distances = r.at("component_distances").get<std::map<std::string, double>>();
    report.repetitions.push_back(std::move(rep));
  }
  return report;
}

std::string report_without_timings(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw Error("cannot read " + json_path.string());
  json j = json::parse(in);
  strip_timings(j);
  return j.dump(2);
}

}  // namespace p3ls::harness
