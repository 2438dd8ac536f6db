// Copyright 2026 The rdp-kit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rdpkit/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "rdpkit/autodiff.hpp"
#include "rdpkit/chain.hpp"
#include "rdpkit/error.hpp"
#include "rdpkit/harness.hpp"
#include "rdpkit/hypertree.hpp"
#include "rdpkit/numerics.hpp"
#include "rdpkit/proposals.hpp"
#include "rdpkit/train.hpp"

namespace rdp::cli {
namespace {

using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr const char* kSchemaLine = "# rdp-kit schema v1\n";
constexpr double kGradcheckTolerance = 1e-4;

// Flags shared by every command. Unset optionals take command-specific
// defaults in resolve().
struct Options {
  std::string command;
  std::string model = "chain";
  std::string quantity = "logz";
  std::optional<std::size_t> n;
  std::optional<std::size_t> t;
  std::optional<std::size_t> k1;
  std::size_t k2 = 1;
  std::optional<std::string> proposal;
  std::optional<std::string> profile;
  std::size_t runs = 100;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string blocks = "full-cross";
  std::string output;
  std::string json;
  std::string potentials;
  std::string output_dir = "rdp-train";
  std::string mode = "likelihood";
  std::vector<std::string> arms{"topk", "rdp"};
  std::size_t dim = 8;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> sequences;
  std::optional<double> learning_rate;
  std::size_t vocab = 30;
  double temperature = 1.0;
  bool straight_through = false;
  std::string gumbel = "importance";
};

// Options after defaults are applied and strings parsed.
struct Resolved {
  harness::ModelKind model = harness::ModelKind::kChain;
  harness::Quantity quantity = harness::Quantity::kLogZ;
  harness::ProfileKind profile = harness::ProfileKind::kDense;
  harness::ProposalKind proposal = harness::ProposalKind::kUniform;
  tree::InsideBlocks blocks = tree::InsideBlocks::kFullCross;
  std::size_t n = 0;
  std::size_t t = 0;
  std::size_t k1 = 0;
  std::size_t k2 = 1;
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::size_t default_k(std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(n))));
}

Resolved resolve(const Options& o) {
  Resolved r;
  r.model = harness::parse_model(o.model);
  r.quantity = harness::parse_quantity(o.quantity);
  const bool tree_model = r.model == harness::ModelKind::kTree;
  const bool train = o.command == "train";
  const bool autoencoder = train && o.mode == "autoencoder";

  std::size_t n = tree_model ? 100 : 500;
  std::size_t t = tree_model ? 8 : 20;
  if (o.command == "gradcheck") {
    n = 6;
    t = 4;
  } else if (autoencoder) {
    n = 40;
    t = 6;
  } else if (train) {
    n = 50;
    t = 8;
  }
  r.n = o.n.value_or(n);
  r.t = o.t.value_or(t);
  if (r.n == 0) throw ConfigError("--n must be at least 1");
  if (r.t == 0) throw ConfigError("--t must be at least 1");
  if (o.runs == 0) throw ConfigError("--runs must be at least 1");
  if (o.jobs == 0) throw ConfigError("--jobs must be at least 1");

  r.profile = harness::parse_profile(o.profile.value_or(train ? "long-tail" : "dense"));
  r.proposal = harness::parse_proposal(
      o.proposal.value_or(tree_model ? "uniform" : "local-global"));
  if (o.blocks == "full-cross") {
    r.blocks = tree::InsideBlocks::kFullCross;
  } else if (o.blocks == "two-block") {
    r.blocks = tree::InsideBlocks::kTwoBlock;
  } else {
    throw ConfigError("unknown --blocks '" + o.blocks + "' (expected full-cross or two-block)");
  }

  r.k2 = o.k2;
  if (o.k1) {
    r.k1 = *o.k1;
  } else if (o.command == "gradcheck") {
    r.k1 = r.n / 3;
  } else {
    const std::size_t k = default_k(r.n);
    r.k1 = k > r.k2 ? k - r.k2 : 0;
  }
  if (r.k1 + r.k2 > r.n) {
    throw ConfigError("K exceeds N: k1 + k2 = " + std::to_string(r.k1 + r.k2) +
                      " > n = " + std::to_string(r.n));
  }
  if (r.k1 + r.k2 == 0) throw ConfigError("k1 + k2 must be at least 1");
  return r;
}

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  if (ec) throw ConfigError("cannot create directory " + p.parent_path().string() + ": " + ec.message());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f << text;
  if (!f) throw ConfigError("write failed for " + path);
}

// CSV to `path`, or to `out` when no path was given.
void emit_csv(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    write_text(path, text);
  }
}

void emit_json(const std::string& path, const Json& doc) {
  if (!path.empty()) write_text(path, doc.dump(2) + "\n");
}

Json config_json(const Options& o, const Resolved& r) {
  Json j;
  j["command"] = o.command;
  j["model"] = std::string(harness::name(r.model));
  j["quantity"] = std::string(harness::name(r.quantity));
  j["n"] = r.n;
  j["t"] = r.t;
  j["k1"] = r.k1;
  j["k2"] = r.k2;
  j["proposal"] = std::string(harness::name(r.proposal));
  j["profile"] = std::string(harness::name(r.profile));
  j["runs"] = o.runs;
  j["seed"] = o.seed;
  j["jobs"] = o.jobs;
  return j;
}

// Runs fn(i) for i < count on up to `jobs` threads; exceptions are rethrown
// in index order.
void run_parallel(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&](std::size_t w, std::size_t stride) {
    for (std::size_t i = w; i < count; i += stride) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(jobs, count);
  if (workers <= 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker, w, workers);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

harness::EstimateConfig estimate_config(const Options& o, const Resolved& r,
                                        std::size_t k1, std::size_t k2) {
  harness::EstimateConfig c;
  c.k1 = k1;
  c.k2 = k2;
  c.proposal = r.proposal;
  c.runs = o.runs;
  c.seed = o.seed;
  c.jobs = o.jobs;
  c.blocks = r.blocks;
  return c;
}

void require_tree_logz(const Resolved& r) {
  if (r.model == harness::ModelKind::kTree && r.quantity != harness::Quantity::kLogZ) {
    throw ConfigError("tree model supports --quantity logz only");
  }
}

// ---------------------------------------------------------------- estimate

int cmd_estimate(const Options& o, std::ostream& out) {
  const auto start = Clock::now();
  const Resolved r = resolve(o);
  require_tree_logz(r);
  const auto cfg = estimate_config(o, r, r.k1, r.k2);

  harness::EstimateReport report;
  harness::TailProfile profile;
  double normalized_entropy = 0.0;
  Json tape_nodes = nullptr;
  if (r.model == harness::ModelKind::kChain) {
    const auto sim = harness::simulate_chain(r.n, r.t, r.profile, o.seed);
    report = harness::evaluate(sim, r.quantity, cfg);
    tape_nodes = harness::randomized_tape_nodes(sim, r.quantity, cfg);
    profile = sim.profile;
    normalized_entropy = sim.normalized_entropy;
  } else {
    const auto sim = harness::simulate_tree(r.n, r.t, r.profile, o.seed);
    report = harness::evaluate(sim, cfg);
    profile = sim.profile;
    normalized_entropy = sim.normalized_entropy;
  }

  std::ostringstream csv;
  csv << kSchemaLine << "run,estimate,exact,error\n";
  Json rows = Json::array();
  for (std::size_t i = 0; i < report.replicates.size(); ++i) {
    const double est = report.replicates[i];
    csv << i << ',' << num(est) << ',' << num(report.exact) << ','
        << num(est - report.exact) << '\n';
    rows.push_back({{"run", i}, {"estimate", est}, {"exact", report.exact},
                    {"error", est - report.exact}});
  }
  emit_csv(o.output, csv.str(), out);

  Json doc;
  doc["schema"] = "rdp-kit v1";
  doc["config"] = config_json(o, r);
  doc["summary"] = {{"exact", report.exact}, {"mean", report.mean},
                    {"bias", report.bias}, {"variance", report.variance},
                    {"mse", report.mse}};
  doc["rows"] = rows;
  doc["metadata"] = {{"calibrated_temperature", profile.temperature},
                     {"target_normalized_entropy", profile.target_entropy},
                     {"normalized_entropy", normalized_entropy},
                     {"randomized_tape_nodes", tape_nodes},
                     {"wall_clock_seconds", seconds_since(start)}};
  emit_json(o.json, doc);
  return kExitOk;
}

// ------------------------------------------------------------------- bench

int cmd_bench(const Options& o, std::ostream& out) {
  const auto start = Clock::now();
  const Resolved r = resolve(o);
  require_tree_logz(r);
  const harness::ProfileKind profiles[] = {harness::ProfileKind::kDense,
                                           harness::ProfileKind::kIntermediate,
                                           harness::ProfileKind::kLongTail};
  const int percents[] = {1, 10, 20};

  std::ostringstream csv;
  csv << kSchemaLine
      << "profile,method,k_percent,k1,k2,mean,exact,bias,variance,mse\n";
  Json rows = Json::array();
  Json temperatures = Json::object();
  Json tape_nodes = Json::object();

  auto add_row = [&](harness::ProfileKind pk, const std::string& method, int pct,
                     std::size_t k1, std::size_t k2,
                     const harness::EstimateReport& rep) {
    const std::string pname(harness::name(pk));
    csv << pname << ',' << method << ',' << pct << ',' << k1 << ',' << k2 << ','
        << num(rep.mean) << ',' << num(rep.exact) << ',' << num(rep.bias) << ','
        << num(rep.variance) << ',' << num(rep.mse) << '\n';
    rows.push_back({{"profile", pname}, {"method", method}, {"k_percent", pct},
                    {"k1", k1}, {"k2", k2}, {"mean", rep.mean}, {"exact", rep.exact},
                    {"bias", rep.bias}, {"variance", rep.variance}, {"mse", rep.mse}});
  };

  for (const auto pk : profiles) {
    std::optional<harness::SimulatedChain> chain_sim;
    std::optional<harness::SimulatedTree> tree_sim;
    if (r.model == harness::ModelKind::kChain) {
      chain_sim = harness::simulate_chain(r.n, r.t, pk, o.seed);
      temperatures[std::string(harness::name(pk))] = chain_sim->profile.temperature;
    } else {
      tree_sim = harness::simulate_tree(r.n, r.t, pk, o.seed);
      temperatures[std::string(harness::name(pk))] = tree_sim->profile.temperature;
    }
    auto eval = [&](std::size_t k1, std::size_t k2) {
      const auto cfg = estimate_config(o, r, k1, k2);
      return chain_sim ? harness::evaluate(*chain_sim, r.quantity, cfg)
                       : harness::evaluate(*tree_sim, cfg);
    };

    const auto full = eval(r.n, 0);
    add_row(pk, "exact", 100, r.n, 0, full);
    for (const int pct : percents) {
      const std::size_t k = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::lround(pct * static_cast<double>(r.n) / 100.0)));
      add_row(pk, "topk", pct, k, 0, eval(k, 0));
      const std::size_t k2 = std::min(r.k2, k);
      add_row(pk, "rdp", pct, k - k2, k2, eval(k - k2, k2));
      if (chain_sim && pct == percents[2]) {
        tape_nodes[std::string(harness::name(pk))] = harness::randomized_tape_nodes(
            *chain_sim, r.quantity, estimate_config(o, r, k - k2, k2));
      }
    }
  }
  emit_csv(o.output, csv.str(), out);

  Json doc;
  doc["schema"] = "rdp-kit v1";
  doc["config"] = config_json(o, r);
  doc["rows"] = rows;
  doc["metadata"] = {{"calibrated_temperature", temperatures},
                     {"randomized_tape_nodes_at_20_percent", tape_nodes},
                     {"wall_clock_seconds", seconds_since(start)}};
  emit_json(o.json, doc);
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Options& o, std::ostream& out) {
  const auto start = Clock::now();
  const Resolved r = resolve(o);
  std::ostringstream csv;
  csv << kSchemaLine
      << "model,n,t,profile,temperature,target_normalized_entropy,"
         "normalized_entropy,exact_log_z,exact_entropy\n";
  std::ostringstream dump;
  dump << kSchemaLine;
  Json summary;
  harness::TailProfile profile;
  double normalized_entropy = 0.0;
  std::optional<double> log_z;
  std::optional<double> entropy;

  if (r.model == harness::ModelKind::kChain) {
    const auto sim = harness::simulate_chain(r.n, r.t, r.profile, o.seed);
    profile = sim.profile;
    normalized_entropy = sim.normalized_entropy;
    const double cells = static_cast<double>(r.t) * static_cast<double>(r.n) *
                         static_cast<double>(r.n);
    if (cells <= harness::kChainExactLimit) {
      log_z = chain::exact_forward(sim.potentials).log_z;
      entropy = chain::exact_entropy(sim.potentials);
    }
    dump << "step,from,to,log_potential\n";
    for (std::size_t i = 0; i < r.n; ++i) {
      dump << "0,-1," << i << ',' << num(sim.potentials.init[i]) << '\n';
    }
    for (std::size_t s = 0; s + 1 < r.t; ++s) {
      for (std::size_t j = 0; j < r.n; ++j) {
        for (std::size_t i = 0; i < r.n; ++i) {
          dump << s + 1 << ',' << j << ',' << i << ','
               << num(sim.potentials.pair(s, j, i)) << '\n';
        }
      }
    }
  } else {
    const auto sim = harness::simulate_tree(r.n, r.t, r.profile, o.seed);
    profile = sim.profile;
    normalized_entropy = sim.normalized_entropy;
    if (r.n <= harness::kTreeExactStates) {
      log_z = tree::exact_inside(sim.potentials).log_z;
    }
    dump << "start,end,state,log_potential\n";
    for (std::size_t i = 0; i < r.t; ++i) {
      for (std::size_t j = i; j < r.t; ++j) {
        for (std::size_t k = 0; k < r.n; ++k) {
          dump << i << ',' << j << ',' << k << ',' << num(sim.potentials.at(i, j, k)) << '\n';
        }
      }
    }
  }

  const auto opt = [](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
  csv << harness::name(r.model) << ',' << r.n << ',' << r.t << ','
      << harness::name(r.profile) << ',' << num(profile.temperature) << ','
      << num(profile.target_entropy) << ',' << num(normalized_entropy) << ','
      << opt(log_z) << ',' << opt(entropy) << '\n';
  emit_csv(o.output, csv.str(), out);
  if (!o.potentials.empty()) write_text(o.potentials, dump.str());

  const auto jopt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json doc;
  doc["schema"] = "rdp-kit v1";
  doc["config"] = config_json(o, r);
  doc["instance"] = {{"model", std::string(harness::name(r.model))},
                     {"n", r.n},
                     {"t", r.t},
                     {"profile", std::string(harness::name(r.profile))},
                     {"normalized_entropy", normalized_entropy},
                     {"exact_log_z", jopt(log_z)},
                     {"exact_entropy", jopt(entropy)}};
  doc["metadata"] = {{"calibrated_temperature", profile.temperature},
                     {"target_normalized_entropy", profile.target_entropy},
                     {"wall_clock_seconds", seconds_since(start)}};
  emit_json(o.json, doc);
  return kExitOk;
}

// --------------------------------------------------------------- gradcheck

chain::TapeChainPotentials unpack_chain(std::span<const ad::Var> xs, std::size_t t,
                                        std::size_t n) {
  chain::TapeChainPotentials p;
  p.length = t;
  p.num_states = n;
  p.init.assign(xs.begin(), xs.begin() + static_cast<long>(n));
  p.pairwise.assign(xs.begin() + static_cast<long>(n), xs.end());
  return p;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  const auto start = Clock::now();
  const Resolved r = resolve(o);
  std::vector<std::pair<std::string, double>> checks;

  if (r.model == harness::ModelKind::kChain) {
    const auto sim = harness::simulate_chain(r.n, r.t, r.profile, o.seed);
    std::vector<double> point(sim.potentials.init);
    point.insert(point.end(), sim.potentials.pairwise.begin(), sim.potentials.pairwise.end());
    const auto sel = Selection::from_proposal(harness::make_proposal(sim, r.proposal),
                                              r.k1, r.k2, Rng(o.seed).split(1));
    Rng noise_rng = Rng(o.seed).split(2);
    const auto noise = gumbel_noise(noise_rng, r.t * r.n);
    Rng weight_rng = Rng(o.seed).split(3);
    std::vector<double> weights(r.t * r.n);
    for (double& w : weights) w = weight_rng.normal();
    const std::size_t t = r.t;
    const std::size_t n = r.n;

    checks.emplace_back("exact_log_z", ad::gradcheck(
        [&](std::span<const ad::Var> xs) {
          return chain::exact_forward(unpack_chain(xs, t, n)).log_z;
        }, point));
    checks.emplace_back("exact_entropy", ad::gradcheck(
        [&](std::span<const ad::Var> xs) {
          return chain::exact_entropy(unpack_chain(xs, t, n));
        }, point));
    checks.emplace_back("randomized_log_z", ad::gradcheck(
        [&](std::span<const ad::Var> xs) {
          return chain::randomized_forward(unpack_chain(xs, t, n), sel).log_z;
        }, point));
    checks.emplace_back("randomized_entropy", ad::gradcheck(
        [&](std::span<const ad::Var> xs) {
          const auto p = unpack_chain(xs, t, n);
          return chain::randomized_entropy(p, sel, chain::randomized_forward(p, sel));
        }, point));
    checks.emplace_back("relaxed_sample", ad::gradcheck(
        [&](std::span<const ad::Var> xs) {
          const auto p = unpack_chain(xs, t, n);
          const auto s = chain::gumbel_backward_sample(
              p, sel, chain::randomized_forward(p, sel), noise, o.temperature);
          ad::Var total(0.0);
          for (std::size_t step = 0; step < t; ++step) {
            for (std::size_t a = 0; a < s.support[step].size(); ++a) {
              const auto state = static_cast<std::size_t>(s.support[step][a]);
              total = total + s.soft[step][a] * weights[step * n + state];
            }
          }
          return total;
        }, point));
  } else {
    const auto sim = harness::simulate_tree(r.n, r.t, r.profile, o.seed);
    const auto& point = sim.potentials.span_potentials;
    const auto sel = Selection::from_proposal(
        proposals::uniform_proposal(r.n, tree::num_spans(r.t)), r.k1, r.k2,
        Rng(o.seed).split(1));
    const std::size_t t = r.t;
    const std::size_t n = r.n;
    auto unpack = [t, n](std::span<const ad::Var> xs) {
      tree::TapeHypertreePotentials p(t, n);
      p.span_potentials.assign(xs.begin(), xs.end());
      return p;
    };
    checks.emplace_back("exact_log_z", ad::gradcheck(
        [&](std::span<const ad::Var> xs) { return tree::exact_inside(unpack(xs)).log_z; },
        point));
    checks.emplace_back("randomized_log_z", ad::gradcheck(
        [&](std::span<const ad::Var> xs) {
          return tree::randomized_inside(unpack(xs), sel, r.blocks).log_z;
        }, point));
  }

  double worst = 0.0;
  for (const auto& [name, err] : checks) worst = std::max(worst, std::isnan(err) ? INFINITY : err);
  out << "max relative error: " << num(worst) << '\n';

  std::ostringstream csv;
  csv << kSchemaLine << "check,max_relative_error\n";
  Json rows = Json::array();
  for (const auto& [name, err] : checks) {
    csv << name << ',' << num(err) << '\n';
    rows.push_back({{"check", name}, {"max_relative_error", err}});
  }
  if (!o.output.empty()) write_text(o.output, csv.str());

  Json doc;
  doc["schema"] = "rdp-kit v1";
  doc["config"] = config_json(o, r);
  doc["rows"] = rows;
  doc["max_relative_error"] = worst;
  doc["tolerance"] = kGradcheckTolerance;
  doc["metadata"] = {{"wall_clock_seconds", seconds_since(start)}};
  emit_json(o.json, doc);
  return worst < kGradcheckTolerance ? kExitOk : kExitNumerical;
}

// ------------------------------------------------------------------- train

std::string histogram_csv(const std::vector<std::size_t>& counts) {
  std::ostringstream csv;
  csv << kSchemaLine << "state,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i) csv << i << ',' << counts[i] << '\n';
  return csv.str();
}

std::string curve_csv(const std::vector<double>& values, const char* column) {
  std::ostringstream csv;
  csv << kSchemaLine << "step," << column << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) csv << i << ',' << num(values[i]) << '\n';
  return csv.str();
}

std::filesystem::path arm_file(const Options& o, const std::string& stem,
                               const std::string& arm) {
  return std::filesystem::path(o.output_dir) / (stem + "_" + arm + ".csv");
}

std::vector<std::string> check_arms(const Options& o) {
  if (o.arms.empty()) throw ConfigError("--arms needs at least one of exact, rdp, topk");
  for (const auto& a : o.arms) train::parse_estimator(a);
  std::vector<std::string> seen;
  for (const auto& a : o.arms) {
    if (std::find(seen.begin(), seen.end(), a) != seen.end()) {
      throw ConfigError("duplicate arm '" + a + "'");
    }
    seen.push_back(a);
  }
  return seen;
}

int train_likelihood(const Options& o, const Resolved& r, Json& doc) {
  const auto arms = check_arms(o);
  const auto teacher = train::calibrated_embeddings(
      r.n, o.dim, r.t, o.seed + 1000, harness::target_normalized_entropy(r.profile));
  const auto data = train::sample_sequences(teacher, o.sequences.value_or(64), o.seed + 2000);
  auto init = train::random_embeddings(r.n, o.dim, r.t, o.seed + 3000, 0.1);
  init.context_features = teacher.context_features;

  std::vector<train::FitResult> results(arms.size());
  std::vector<std::vector<std::size_t>> histograms(arms.size());
  std::vector<double> wall(arms.size());
  run_parallel(arms.size(), o.jobs, [&](std::size_t a) {
    const auto arm_start = Clock::now();
    train::FitConfig cfg;
    cfg.estimator = train::parse_estimator(arms[a]);
    cfg.k1 = r.k1;
    cfg.k2 = r.k2;
    if (cfg.estimator == train::Estimator::kTopK) {
      cfg.k1 = r.k1 + r.k2;
      cfg.k2 = 0;
    }
    cfg.steps = o.steps.value_or(200);
    cfg.learning_rate = o.learning_rate.value_or(0.05);
    cfg.seed = o.seed;
    results[a] = train::fit_marginal_likelihood(data, init, cfg);
    auto& h = histograms[a];
    h.assign(r.n, 0);
    for (const auto& seq : train::sample_sequences(results[a].params, data.size(), o.seed + 4000)) {
      for (const int s : seq) ++h[static_cast<std::size_t>(s)];
    }
    wall[a] = seconds_since(arm_start);
  });

  Json arms_json = Json::array();
  for (std::size_t a = 0; a < arms.size(); ++a) {
    write_text(arm_file(o, "loss", arms[a]).string(), curve_csv(results[a].nll, "nll"));
    write_text(arm_file(o, "histogram", arms[a]).string(), histogram_csv(histograms[a]));
    arms_json.push_back({{"arm", arms[a]},
                         {"final_nll", results[a].nll.back()},
                         {"nll", results[a].nll},
                         {"histogram", histograms[a]},
                         {"peak_tape_nodes", results[a].peak_tape_nodes},
                         {"wall_clock_seconds", wall[a]}});
  }
  doc["arms"] = arms_json;
  doc["metadata"]["teacher_normalized_entropy"] = harness::target_normalized_entropy(r.profile);
  return kExitOk;
}

int train_autoencoder(const Options& o, const Resolved& r, Json& doc) {
  const auto arms = check_arms(o);
  chain::GumbelLogits gumbel;
  if (o.gumbel == "importance") {
    gumbel = chain::GumbelLogits::kImportanceWeighted;
  } else if (o.gumbel == "unweighted") {
    gumbel = chain::GumbelLogits::kUnweighted;
  } else {
    throw ConfigError("unknown --gumbel '" + o.gumbel + "' (expected importance or unweighted)");
  }
  const auto data = train::make_symbol_data(o.vocab, r.t, o.sequences.value_or(96), o.seed + 5);

  std::vector<train::AutoencoderResult> results(arms.size());
  std::vector<double> wall(arms.size());
  std::vector<std::pair<std::size_t, std::size_t>> budgets(arms.size());
  run_parallel(arms.size(), o.jobs, [&](std::size_t a) {
    const auto arm_start = Clock::now();
    train::AutoencoderConfig cfg;
    cfg.num_states = r.n;
    cfg.dim = o.dim;
    cfg.k1 = r.k1;
    cfg.k2 = r.k2;
    switch (train::parse_estimator(arms[a])) {
      case train::Estimator::kTopK:
        cfg.k1 = r.k1 + r.k2;
        cfg.k2 = 0;
        break;
      case train::Estimator::kExact:
        cfg.k1 = r.n;
        cfg.k2 = 0;
        break;
      case train::Estimator::kRdp:
        break;
    }
    cfg.steps = o.steps.value_or(60);
    cfg.learning_rate = o.learning_rate.value_or(0.05);
    cfg.temperature = o.temperature;
    cfg.straight_through = o.straight_through;
    cfg.gumbel = gumbel;
    cfg.seed = o.seed;
    budgets[a] = {cfg.k1, cfg.k2};
    results[a] = train::fit_toy_autoencoder(data, cfg);
    wall[a] = seconds_since(arm_start);
  });

  Json arms_json = Json::array();
  for (std::size_t a = 0; a < arms.size(); ++a) {
    write_text(arm_file(o, "loss", arms[a]).string(), curve_csv(results[a].elbo, "elbo"));
    write_text(arm_file(o, "histogram", arms[a]).string(), histogram_csv(results[a].histogram));
    arms_json.push_back({{"arm", arms[a]},
                         {"k1", budgets[a].first},
                         {"k2", budgets[a].second},
                         {"final_elbo", results[a].elbo.back()},
                         {"elbo", results[a].elbo},
                         {"histogram", results[a].histogram},
                         {"never_used", results[a].never_used},
                         {"tail_mass", results[a].tail_mass},
                         {"peak_tape_nodes", results[a].peak_tape_nodes},
                         {"wall_clock_seconds", wall[a]}});
  }
  doc["arms"] = arms_json;
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  const auto start = Clock::now();
  const Resolved r = resolve(o);
  if (r.model != harness::ModelKind::kChain) throw ConfigError("train supports --model chain only");
  if (o.dim == 0) throw ConfigError("--dim must be at least 1");
  Json doc;
  doc["schema"] = "rdp-kit v1";
  doc["config"] = config_json(o, r);
  doc["config"]["mode"] = o.mode;
  doc["config"]["output_dir"] = o.output_dir;
  int code;
  if (o.mode == "likelihood") {
    code = train_likelihood(o, r, doc);
  } else if (o.mode == "autoencoder") {
    code = train_autoencoder(o, r, doc);
  } else {
    throw ConfigError("unknown --mode '" + o.mode + "' (expected likelihood or autoencoder)");
  }
  doc["metadata"]["wall_clock_seconds"] = seconds_since(start);
  const std::string json_path =
      o.json.empty() ? (std::filesystem::path(o.output_dir) / "train.json").string() : o.json;
  emit_json(json_path, doc);
  for (const auto& arm : doc["arms"]) {
    out << arm["arm"].get<std::string>() << ": "
        << (o.mode == "likelihood" ? "final nll " : "final elbo ")
        << num(arm[o.mode == "likelihood" ? "final_nll" : "final_elbo"].get<double>()) << '\n';
  }
  return code;
}

void add_options(CLI::App& app, Options& o) {
  app.add_option("--model", o.model, "chain or tree");
  app.add_option("--quantity", o.quantity, "logz or entropy");
  app.add_option("--n", o.n, "number of states");
  app.add_option("--t", o.t, "sequence length");
  app.add_option("--k1", o.k1, "top-k1 summands per node (default 20% of N minus k2)");
  app.add_option("--k2", o.k2, "sampled summands per node");
  app.add_option("--proposal", o.proposal, "uniform, local, global, local-global or oracle");
  app.add_option("--profile", o.profile, "dense, intermediate or long-tail");
  app.add_option("--runs", o.runs, "replicates per estimate");
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--jobs", o.jobs, "worker threads");
  app.add_option("--blocks", o.blocks, "tree inside blocks: full-cross or two-block");
  app.add_option("--output", o.output, "CSV path (default: standard output)");
  app.add_option("--json", o.json, "JSON result path");
  app.add_option("--potentials", o.potentials, "simulate: CSV dump of the log-potentials");
  app.add_option("--output-dir", o.output_dir, "train: directory for curve and histogram CSVs");
  app.add_option("--mode", o.mode, "train: likelihood or autoencoder");
  app.add_option("--arms", o.arms, "train: comma-separated arms (exact, rdp, topk)")
      ->delimiter(',');
  app.add_option("--dim", o.dim, "train: embedding dimension");
  app.add_option("--steps", o.steps, "train: gradient steps");
  app.add_option("--sequences", o.sequences, "train: training sequences");
  app.add_option("--lr", o.learning_rate, "train: learning rate");
  app.add_option("--vocab", o.vocab, "train: symbols in the autoencoder data");
  app.add_option("--temperature", o.temperature, "Gumbel relaxation temperature");
  app.add_flag("--straight-through", o.straight_through, "train: decode hard samples");
  app.add_option("--gumbel", o.gumbel, "train: importance or unweighted Gumbel logits");
  // A repeated flag keeps its last value, so sweeps can append overrides.
  for (CLI::Option* opt : app.get_options()) {
    if (opt->get_name() != "--arms" && opt->get_expected_max() == 1) {
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Randomized dynamic programming estimators", "rdp-kit"};
  app.fallthrough();
  app.set_config("--config", "", "key=value file; flags override it");
  add_options(app, o);
  const std::pair<const char*, const char*> commands[] = {
      {"estimate", "replicated estimates against the exact value"},
      {"bench", "topk vs rdp sweep over K and profiles"},
      {"simulate", "summarize or dump a simulated instance"},
      {"gradcheck", "finite differences against tape gradients"},
      {"train", "training demo arms"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);
  app.require_subcommand(1);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  o.command = app.get_subcommands().front()->get_name();

  try {
    if (o.command == "estimate") return cmd_estimate(o, out);
    if (o.command == "bench") return cmd_bench(o, out);
    if (o.command == "simulate") return cmd_simulate(o, out);
    if (o.command == "gradcheck") return cmd_gradcheck(o, out);
    return cmd_train(o, out);
  } catch (const ConfigError& e) {
    err << "rdp-kit: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const GuardError& e) {
    err << "rdp-kit: guard: " << e.what() << '\n';
    return kExitGuard;
  } catch (const NumericalError& e) {
    err << "rdp-kit: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    err << "rdp-kit: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "rdp-kit: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace rdp::cli
