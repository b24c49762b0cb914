#include "lmtp/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lmtp/random.hpp"

namespace lmtp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, const std::string& key) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) throw Error(ErrorKind::config, key + ": empty list entry");
    out.push_back(item);
  }
  if (out.empty()) throw Error(ErrorKind::config, key + ": empty list");
  return out;
}

template <typename T>
T parse_value(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !in.eof()) throw Error(ErrorKind::config, "invalid value '" + value + "' for " + key);
  return out;
}

}  // namespace

MvnConfig RunConfig::mvn_config() const {
  MvnConfig m;
  m.target_se = mvn_se;
  m.max_points = mvn_max_points;
  m.min_points = std::min(m.min_points, mvn_max_points);
  m.seed = derive_seed(seed, {0x6d766eULL});
  m.validate();
  return m;
}

SdrConfig RunConfig::sdr_config() const {
  SdrConfig c = make_sdr_config(learners, folds, seed, ratio_p_min);
  c.validate();
  return c;
}

StudyConfig RunConfig::study_config() const {
  StudyConfig s;
  if (desk_scale) s.grid = StudyGrid{{250, 1000, 2500}, {0.0, 0.5, 1.0}, 300};
  if (!grid.empty()) s.grid = parse_grid(grid, s.grid);
  if (!betas.empty()) s.grid.beta = betas;
  s.alpha = alpha;
  s.seed = seed;
  s.learners = learners;
  s.folds = folds;
  s.ratio_p_min = ratio_p_min;
  s.mvn = mvn_config();
  return s;
}

void apply_config_text(const std::string& text, RunConfig& config, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw Error(ErrorKind::config, where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto& l = config.learners;
    if (key == "folds") config.folds = parse_value<int>(key, value);
    else if (key == "seed") config.seed = parse_value<std::uint64_t>(key, value);
    else if (key == "alpha") config.alpha = parse_value<double>(key, value);
    else if (key == "ratio_p_min") config.ratio_p_min = parse_value<double>(key, value);
    else if (key == "classifier_p_min") l.classifier_p_min = parse_value<double>(key, value);
    else if (key == "stack_folds") l.stack_folds = parse_value<int>(key, value);
    else if (key == "boost_rounds") l.boost_rounds = parse_value<int>(key, value);
    else if (key == "boost_learning_rate") l.boost_learning_rate = parse_value<double>(key, value);
    else if (key == "boost_depth") l.boost_depth = parse_value<int>(key, value);
    else if (key == "mvn_se") config.mvn_se = parse_value<double>(key, value);
    else if (key == "mvn_max_points") config.mvn_max_points = parse_value<int>(key, value);
    else if (key == "regression_learners") l.regression_learners = split_list(value, key);
    else if (key == "classification_learners") l.classification_learners = split_list(value, key);
    else throw Error(ErrorKind::config, where + ": unknown key '" + key + "'");
  }
}

void apply_config_file(const std::string& path, RunConfig& config) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  apply_config_text(buffer.str(), config, path);
}

std::string canonical_string(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["subcommand"] = c.subcommand;
  j["input"] = c.input;
  j["policy_prime"] = c.policy_prime;
  j["policy_dprime"] = c.policy_dprime;
  j["contrast"] = c.contrast;
  j["alpha"] = c.alpha;
  j["folds"] = c.folds;
  j["seed"] = c.seed;
  j["ratio_p_min"] = c.ratio_p_min;
  j["learners"] = {
      {"regression", c.learners.regression_learners},
      {"classification", c.learners.classification_learners},
      {"boost_rounds", c.learners.boost_rounds},
      {"boost_learning_rate", c.learners.boost_learning_rate},
      {"boost_depth", c.learners.boost_depth},
      {"stack_folds", c.learners.stack_folds},
      {"classifier_p_min", c.learners.classifier_p_min},
  };
  j["mvn_se"] = c.mvn_se;
  j["mvn_max_points"] = c.mvn_max_points;
  j["config_file"] = c.config_file;
  j["dump_eif"] = c.dump_eif;
  j["desk_scale"] = c.desk_scale;
  j["grid"] = c.grid;
  j["beta"] = c.beta;
  j["betas"] = c.betas;
  j["raw"] = c.raw;
  return j.dump();
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_string(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lmtp
