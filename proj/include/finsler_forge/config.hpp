#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "finsler_forge/dconn.hpp"

namespace finsler {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Command { hessian, connection, curvature, verify, cosmo_evolve, cosmo_classify, soliton };

std::string command_name(Command c);
Command parse_command(const std::string& name);
ConnKind parse_conn_kind(const std::string& name);

// Evaluation points: either a full tensor-product grid over the box, or the
// first `count` points of a Halton sequence starting at index `seed` + 1.
struct SampleSpec {
  bool grid = false;
  std::vector<int> shape;
  int count = 0;
  unsigned seed = 0;
  Eigen::VectorXd lo, hi;
};

std::vector<Eigen::VectorXd> sample_points(const SampleSpec& spec);

struct RunConfig {
  int spec_version = 1;
  Command command = Command::verify;
  ConnKind connection = ConnKind::canonical;
  nlohmann::json model;   // command-specific model description
  nlohmann::json params;  // command-specific parameters
  std::optional<SampleSpec> samples;
  double tolerance = 1e-6;
  std::string output = "out.csv";
  int threads = 0;  // 0 = unset; the front end resolves flag > config > env
};

RunConfig load_run_config(const std::string& path);

}  // namespace finsler
