#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmtp/mvn.hpp"
#include "lmtp/sdr.hpp"
#include "lmtp/simulation.hpp"

namespace lmtp {

/// Everything a CLI run depends on. Serialized into every output file.
struct RunConfig {
  std::string subcommand;
  std::string input;
  std::string policy_prime = "identity";
  std::string policy_dprime = "shift:-1";
  std::string contrast = "baseline";  // baseline | adjacent | file:<path>
  double alpha = 0.05;
  int folds = 5;
  std::uint64_t seed = 1;
  double ratio_p_min = 1e-2;
  LearnerSettings learners;
  double mvn_se = 1e-4;
  int mvn_max_points = 1 << 15;
  std::string out = ".";
  std::string config_file;
  bool dump_eif = false;
  // simulate / truth
  bool desk_scale = false;
  std::string grid;
  double beta = 0.0;            // truth
  std::vector<double> betas;    // simulate --beta overrides
  bool raw = false;             // per-replicate records in the study output
  int threads = 0;              // 0 leaves the OpenMP default

  MvnConfig mvn_config() const;
  SdrConfig sdr_config() const;
  StudyConfig study_config() const;
};

/// Applies a key = value file on top of `config`. Blank lines and '#'
/// comments are ignored; unknown keys are a config error. Keys:
///   folds, seed, alpha, ratio_p_min, classifier_p_min, stack_folds,
///   boost_rounds, boost_learning_rate, boost_depth, mvn_se, mvn_max_points,
///   regression_learners, classification_learners (comma separated).
void apply_config_file(const std::string& path, RunConfig& config);
void apply_config_text(const std::string& text, RunConfig& config, const std::string& source = "config");

// Canonical text form used for the provenance hash.
std::string canonical_string(const RunConfig& config);
// FNV-1a 64-bit hash of canonical_string, as 16 hex digits.
std::string config_hash(const RunConfig& config);

}  // namespace lmtp
