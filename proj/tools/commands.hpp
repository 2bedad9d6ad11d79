#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace recourse::cli {

struct SynthArgs {
  std::string out;
  std::size_t k = 3;
  std::size_t n = 400;
  double rotation = 30.0;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::string config;
  std::string data;
  std::optional<std::string> mode;
  std::string out;
  std::optional<std::string> log;
  std::optional<std::string> subset;
  std::optional<std::uint64_t> seed;
};

struct EvaluateArgs {
  std::string data;
  std::string config;
  std::string methods = "rocoursenet,counternet,vanillacf";
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct AttackArgs {
  std::string ckpt;
  std::string data;
  std::string t_grid = "0,5,10,20";
  std::string e_grid = "0.1,0.3,0.5";
  std::string norm = "linf";
  std::string out;
  std::optional<std::string> subset;
  int unroll = 2;
  double eta = 0.003;
  std::size_t batch_size = 128;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct AblationArgs {
  std::string data;
  std::string config;
  std::string e_grid = "0.05,0.1,0.3";
  std::string seeds = "0";
  std::string out;
  std::optional<std::uint64_t> seed;
};

void run_synth(const SynthArgs& args);
void run_train(const TrainArgs& args);
void run_evaluate(const EvaluateArgs& args);
void run_attack(const AttackArgs& args);
void run_ablation(const AblationArgs& args);

// Comma-separated lists; malformed entries are ConfigErrors.
std::vector<int> parse_int_list(const std::string& text, const std::string& what);
std::vector<double> parse_double_list(const std::string& text, const std::string& what);
std::vector<std::string> split_list(const std::string& text);

}  // namespace recourse::cli
