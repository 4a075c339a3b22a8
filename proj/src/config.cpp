#include "finsler_forge/config.hpp"

#include <fstream>

namespace finsler {

std::string command_name(Command c) {
  switch (c) {
    case Command::hessian: return "hessian";
    case Command::connection: return "connection";
    case Command::curvature: return "curvature";
    case Command::verify: return "verify";
    case Command::cosmo_evolve: return "cosmo-evolve";
    case Command::cosmo_classify: return "cosmo-classify";
    case Command::soliton: return "soliton";
  }
  return "?";
}

Command parse_command(const std::string& name) {
  for (Command c : {Command::hessian, Command::connection, Command::curvature, Command::verify,
                    Command::cosmo_evolve, Command::cosmo_classify, Command::soliton})
    if (command_name(c) == name) return c;
  throw ConfigError("unknown command '" + name + "'");
}

ConnKind parse_conn_kind(const std::string& name) {
  if (name == "canonical") return ConnKind::canonical;
  if (name == "cartan") return ConnKind::cartan;
  if (name == "hv") return ConnKind::hv;
  if (name == "berwald") return ConnKind::berwald;
  if (name == "chern") return ConnKind::chern;
  if (name == "hashiguchi") return ConnKind::hashiguchi;
  throw ConfigError("unknown connection kind '" + name + "'");
}

namespace {

double halton(unsigned long long index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % static_cast<unsigned long long>(base));
    index /= static_cast<unsigned long long>(base);
  }
  return r;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

}  // namespace

std::vector<Eigen::VectorXd> sample_points(const SampleSpec& spec) {
  const int d = static_cast<int>(spec.lo.size());
  if (d == 0 || spec.hi.size() != d) throw ConfigError("sample box is degenerate");
  for (int k = 0; k < d; ++k)
    if (!(spec.lo[k] < spec.hi[k])) throw ConfigError("sample box is degenerate");
  std::vector<Eigen::VectorXd> pts;
  if (spec.grid) {
    if (static_cast<int>(spec.shape.size()) != d)
      throw ConfigError("grid shape does not match box dimension");
    long total = 1;
    for (int s : spec.shape) {
      if (s < 1) throw ConfigError("grid shape entries must be positive");
      total *= s;
    }
    pts.reserve(static_cast<std::size_t>(total));
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    for (long t = 0; t < total; ++t) {
      Eigen::VectorXd u(d);
      for (int k = 0; k < d; ++k) {
        const int s = spec.shape[static_cast<std::size_t>(k)];
        const double frac = (s == 1) ? 0.5 : static_cast<double>(idx[static_cast<std::size_t>(k)]) / (s - 1);
        u[k] = spec.lo[k] + frac * (spec.hi[k] - spec.lo[k]);
      }
      pts.push_back(u);
      for (int k = d - 1; k >= 0; --k) {
        if (++idx[static_cast<std::size_t>(k)] < spec.shape[static_cast<std::size_t>(k)]) break;
        idx[static_cast<std::size_t>(k)] = 0;
      }
    }
  } else {
    if (spec.count < 1) throw ConfigError("sample count must be positive");
    if (d > static_cast<int>(std::size(kPrimes)))
      throw ConfigError("too many dimensions for the Halton sampler");
    pts.reserve(static_cast<std::size_t>(spec.count));
    for (int i = 0; i < spec.count; ++i) {
      Eigen::VectorXd u(d);
      for (int k = 0; k < d; ++k) {
        const double h = halton(static_cast<unsigned long long>(spec.seed) + 1 + i, kPrimes[k]);
        u[k] = spec.lo[k] + h * (spec.hi[k] - spec.lo[k]);
      }
      pts.push_back(u);
    }
  }
  return pts;
}

namespace {

SampleSpec parse_samples(const nlohmann::json& j) {
  SampleSpec s;
  if (!j.contains("box") || !j["box"].is_object())
    throw ConfigError("samples: missing domain box");
  const auto lo = j["box"].value("lo", std::vector<double>{});
  const auto hi = j["box"].value("hi", std::vector<double>{});
  if (lo.empty() || lo.size() != hi.size())
    throw ConfigError("samples: box lo/hi must be nonempty and equal length");
  s.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<long>(lo.size()));
  s.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<long>(hi.size()));
  if (j.contains("grid")) {
    s.grid = true;
    s.shape = j["grid"].get<std::vector<int>>();
  } else if (j.contains("count")) {
    s.count = j["count"].get<int>();
    s.seed = j.value("seed", 0u);
  } else {
    throw ConfigError("samples: need either 'grid' or 'count'");
  }
  return s;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  RunConfig cfg;
  if (!j.contains("spec_version")) throw ConfigError("config missing 'spec_version'");
  cfg.spec_version = j["spec_version"].get<int>();
  if (cfg.spec_version != 1)
    throw ConfigError("unsupported spec_version " + std::to_string(cfg.spec_version));
  if (!j.contains("command")) throw ConfigError("config missing 'command'");
  cfg.command = parse_command(j["command"].get<std::string>());
  if (j.contains("connection")) cfg.connection = parse_conn_kind(j["connection"].get<std::string>());
  if (j.contains("model")) cfg.model = j["model"];
  if (j.contains("params")) cfg.params = j["params"];
  if (j.contains("samples")) cfg.samples = parse_samples(j["samples"]);
  cfg.tolerance = j.value("tolerance", 1e-6);
  cfg.output = j.value("output", std::string("out.csv"));
  cfg.threads = j.value("threads", 0);  // 0 = unset; resolved by the front end
  return cfg;
}

}  // namespace finsler
