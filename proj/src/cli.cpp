#include "finsler_forge/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"

#include "finsler_forge/ansatz.hpp"
#include "finsler_forge/cosmo.hpp"
#include "finsler_forge/csvio.hpp"
#include "finsler_forge/expr.hpp"
#include "finsler_forge/finsler.hpp"

namespace finsler {
namespace {

using nlohmann::json;

ScalarField field_from(const json& m, const char* key, const std::vector<std::string>& coords) {
  if (!m.contains(key)) return ScalarField();
  return parse_expression(m.at(key).get<std::string>(), coords);
}

Source source_from(const json& m, const std::vector<std::string>& coords) {
  Source src;
  if (!m.contains("source")) return src;
  const json& s = m.at("source");
  src.ups2 = field_from(s, "ups2", coords);
  src.ups4 = field_from(s, "ups4", coords);
  src.ups6 = field_from(s, "ups6", coords);
  src.ups8 = field_from(s, "ups8", coords);
  return src;
}

const std::vector<std::string> kSol1Coords = {"x1", "x2", "v", "w"};
const std::vector<std::string> kCosmo4dCoords = {"hr", "t", "htheta", "hphi"};

SolutionRecipe sol1_recipe_from(const json& m) {
  SolutionRecipe r;
  if (m.contains("eps")) {
    const auto e = m.at("eps").get<std::vector<double>>();
    if (e.size() != 4) throw ConfigError("sol1 model: 'eps' needs 4 entries");
    r.eps1 = e[0];
    r.eps2 = e[1];
    r.eps3 = e[2];
    r.eps4 = e[3];
  }
  r.psi = field_from(m, "psi", kSol1Coords);
  r.f = field_from(m, "f", kSol1Coords);
  if (!r.f.valid()) throw ConfigError("sol1 model: missing generating function 'f'");
  r.f0 = field_from(m, "f0", kSol1Coords);
  r.h0 = field_from(m, "h0", kSol1Coords);
  r.sigma0 = field_from(m, "sigma0", kSol1Coords);
  r.w01 = field_from(m, "w01", kSol1Coords);
  r.w02 = field_from(m, "w02", kSol1Coords);
  r.n01 = field_from(m, "n01", kSol1Coords);
  r.n02 = field_from(m, "n02", kSol1Coords);
  r.src = source_from(m, kSol1Coords);
  r.steps = m.value("steps", 64);
  r.v_base = m.value("v_base", 0.0);
  return r;
}

Cosmo4dRecipe cosmo4d_recipe_from(const json& m) {
  Cosmo4dRecipe r;
  r.ha = field_from(m, "ha", kCosmo4dCoords);
  if (!r.ha.valid()) throw ConfigError("cosmo4d model: missing scale factor 'ha'");
  r.psi = field_from(m, "psi", kCosmo4dCoords);
  r.f = field_from(m, "f", kCosmo4dCoords);
  r.f0 = field_from(m, "f0", kCosmo4dCoords);
  r.h0 = field_from(m, "h0", kCosmo4dCoords);
  r.sigma0 = field_from(m, "sigma0", kCosmo4dCoords);
  r.w01 = field_from(m, "w01", kCosmo4dCoords);
  r.w02 = field_from(m, "w02", kCosmo4dCoords);
  r.n01 = field_from(m, "n01", kCosmo4dCoords);
  r.n02 = field_from(m, "n02", kCosmo4dCoords);
  r.src = source_from(m, kCosmo4dCoords);
  r.steps = m.value("steps", 64);
  r.v_base = m.value("v_base", 0.2);
  return r;
}

struct DMetricModel {
  DMetric dm;
  std::vector<std::string> coords;
  Source src;
};

DMetricModel dmetric_model_from(const json& m) {
  if (!m.is_object() || !m.contains("type")) throw ConfigError("model: missing 'type'");
  const std::string type = m.at("type").get<std::string>();
  DMetricModel out;
  if (type == "sol1") {
    const SolutionRecipe r = sol1_recipe_from(m);
    out.dm = generate_sol1(r);
    out.coords = kSol1Coords;
    out.src = r.src;
    return out;
  }
  if (type == "cosmo4d") {
    const Cosmo4dRecipe r = cosmo4d_recipe_from(m);
    out.dm = generate_4d_cosmo(r);
    out.coords = kCosmo4dCoords;
    out.src = r.src;
    return out;
  }
  if (type != "dmetric") throw ConfigError("model: unknown type '" + type + "'");

  out.coords = m.at("coords").get<std::vector<std::string>>();
  const int n = m.at("n").get<int>();
  const int dim = static_cast<int>(out.coords.size());
  const int mm = dim - n;
  if (n < 1 || mm < 1) throw ConfigError("dmetric model: bad base/fiber split");
  DMetric dm = DMetric::single_shell(n, mm);
  auto fill = [&](const char* key, std::vector<ScalarField>& dst, int count) {
    if (!m.contains(key)) {
      if (std::string(key) == "N") return;  // vanishing N-connection by default
      throw ConfigError(std::string("dmetric model: missing '") + key + "'");
    }
    const auto exprs = m.at(key).get<std::vector<std::string>>();
    if (static_cast<int>(exprs.size()) != count)
      throw ConfigError(std::string("dmetric model: '") + key + "' needs " +
                        std::to_string(count) + " entries");
    for (int i = 0; i < count; ++i)
      dst[static_cast<std::size_t>(i)] = parse_expression(exprs[static_cast<std::size_t>(i)], out.coords);
  };
  fill("g", dm.g, n * n);
  fill("h", dm.h[0], mm * mm);
  fill("N", dm.N[0], n * mm);
  out.dm = std::move(dm);
  out.src = source_from(m, out.coords);
  return out;
}

FinslerFunction finsler_model_from(const json& m, std::vector<std::string>& coords_out) {
  if (!m.is_object() || !m.contains("type")) throw ConfigError("model: missing 'type'");
  const std::string type = m.at("type").get<std::string>();
  if (type == "minkowski") {
    coords_out = {"x0", "x1", "x2", "x3", "y0", "y1", "y2", "y3"};
    return minkowski_quadratic();
  }
  if (type == "bogoslovsky") {
    coords_out = {"x0", "x1", "x2", "x3", "y0", "y1", "y2", "y3"};
    const auto nv = m.at("direction").get<std::vector<double>>();
    if (nv.size() != 4) throw ConfigError("bogoslovsky model: 'direction' needs 4 entries");
    return bogoslovsky(m.at("b").get<double>(), Eigen::Vector4d(nv[0], nv[1], nv[2], nv[3]));
  }
  if (type != "finsler") throw ConfigError("model: unknown type '" + type + "'");
  coords_out = m.at("coords").get<std::vector<std::string>>();
  if (coords_out.size() % 2 != 0)
    throw ConfigError("finsler model: coords must list base then fiber names (even count)");
  const int n = static_cast<int>(coords_out.size()) / 2;
  const ScalarField f2 = parse_expression(m.at("f2").get<std::string>(), coords_out);
  return make_finsler(n, [f2](auto u) { return f2(u); });
}

std::vector<Eigen::VectorXd> require_points(const RunConfig& cfg, int dim) {
  if (!cfg.samples) throw ConfigError("this command needs a 'samples' section");
  if (cfg.samples->lo.size() != dim)
    throw ConfigError("samples: box dimension " + std::to_string(cfg.samples->lo.size()) +
                      " does not match model dimension " + std::to_string(dim));
  return sample_points(*cfg.samples);
}

std::string out_file(const RunConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  return (std::filesystem::path(out_dir) / cfg.output).string();
}

int run_hessian(const RunConfig& cfg, const std::string& out_dir) {
  std::vector<std::string> coords;
  const FinslerFunction fin = finsler_model_from(cfg.model, coords);
  const auto pts = require_points(cfg, static_cast<int>(coords.size()));
  CsvTable t;
  t.header = coords;
  const int n = fin.n();
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      t.header.push_back("g_" + std::to_string(a) + "_" + std::to_string(b));
  for (const auto& u : pts) {
    const Eigen::MatrixXd g = hessian_metric(fin, u);
    std::vector<std::string> row;
    for (int k = 0; k < u.size(); ++k) row.push_back(format_double(u[k]));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) row.push_back(format_double(g(a, b)));
    t.add_row(std::move(row));
  }
  export_csv(t, out_file(cfg, out_dir));
  return kExitOk;
}

int run_connection(const RunConfig& cfg, const std::string& out_dir) {
  const DMetricModel m = dmetric_model_from(cfg.model);
  const auto pts = require_points(cfg, m.dm.dim());
  CsvTable t;
  t.header = m.coords;
  for (const char* c : {"block", "i", "j", "k", "value"}) t.header.emplace_back(c);
  for (const auto& u : pts) {
    const auto su = to_std(u);
    const auto c = dconnection_t(m.dm, cfg.connection, std::span<const double>(su.data(), su.size()));
    std::vector<std::string> pt;
    for (int k = 0; k < u.size(); ++k) pt.push_back(format_double(u[k]));
    auto emit = [&](const char* block, int i, int j, int k, double v) {
      auto row = pt;
      row.emplace_back(block);
      row.push_back(std::to_string(i));
      row.push_back(std::to_string(j));
      row.push_back(std::to_string(k));
      row.push_back(format_double(v));
      t.add_row(std::move(row));
    };
    const int n = c.n, mm = c.m;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) emit("Lh", i, j, k, c.lh(i, j, k));
    for (int a = 0; a < mm; ++a)
      for (int b = 0; b < mm; ++b)
        for (int k = 0; k < n; ++k) emit("Lv", a, b, k, c.lv(a, b, k));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int cc = 0; cc < mm; ++cc) emit("Ch", i, j, cc, c.ch(i, j, cc));
    for (int a = 0; a < mm; ++a)
      for (int b = 0; b < mm; ++b)
        for (int cc = 0; cc < mm; ++cc) emit("Cv", a, b, cc, c.cv(a, b, cc));
  }
  export_csv(t, out_file(cfg, out_dir));
  return kExitOk;
}

int run_curvature(const RunConfig& cfg, const std::string& out_dir) {
  const DMetricModel m = dmetric_model_from(cfg.model);
  const auto pts = require_points(cfg, m.dm.dim());
  const int dim = m.dm.dim();
  CsvTable t;
  t.header = m.coords;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      t.header.push_back("ricci_" + std::to_string(i) + "_" + std::to_string(j));
  t.header.emplace_back("scalar_h");
  t.header.emplace_back("scalar_v");
  t.header.emplace_back("scalar");
  for (const auto& u : pts) {
    const CurvaturePack p = curvature_pack(m.dm, cfg.connection, u);
    std::vector<std::string> row;
    for (int k = 0; k < u.size(); ++k) row.push_back(format_double(u[k]));
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) row.push_back(format_double(p.ricci(i, j)));
    row.push_back(format_double(p.scalar_h));
    row.push_back(format_double(p.scalar_v));
    row.push_back(format_double(p.scalar));
    t.add_row(std::move(row));
  }
  export_csv(t, out_file(cfg, out_dir));
  return kExitOk;
}

int run_verify(const RunConfig& cfg, const std::string& out_dir) {
  const DMetricModel m = dmetric_model_from(cfg.model);
  const auto pts = require_points(cfg, m.dm.dim());
  const std::string method = cfg.params.value("method", std::string("separated"));
  ResidualReport rep;
  if (method == "separated")
    rep = residuals_separated(m.dm, cfg.connection, m.src, pts);
  else if (method == "generic")
    rep = residuals_generic(m.dm, cfg.connection, m.src, pts);
  else
    throw ConfigError("verify: method must be 'separated' or 'generic'");
  CsvTable t;
  t.header = {"equation", "max_abs", "samples", "violated"};
  for (const auto& e : rep.entries)
    t.add_row({e.equation, format_double(e.max_abs), std::to_string(e.samples),
               e.max_abs > cfg.tolerance ? "1" : "0"});
  export_csv(t, out_file(cfg, out_dir));
  return rep.worst() > cfg.tolerance ? kExitResidual : kExitOk;
}

int run_cosmo_evolve(const RunConfig& cfg, const std::string& out_dir) {
  const json& p = cfg.params;
  CosmoParams cp;
  cp.hk = p.value("hk", 0.0);
  cp.vk = p.value("vk", 0.0);
  cp.h_omega = p.value("h_omega", 0.0);
  cp.v_omega = p.value("v_omega", 0.0);
  cp.G_bar = p.value("G_bar", 1.0);
  const double rho0 = p.value("rho0", 0.0);
  const double t0 = p.value("t0", 0.0);
  const double t1 = p.value("t1", 1.0);
  const double dt = p.value("dt", 1e-3);
  const std::string mode = p.value("mode", std::string("hubble"));
  Trajectory tr;
  if (mode == "hubble") {
    HubbleState s{p.value("hH0", 0.0), p.value("vH0", 1.0)};
    tr = integrate_trajectory(s, t0, t1, dt, cp, rho0);
  } else if (mode == "closure") {
    CosmoState s;
    s.ha = p.value("ha", 1.0);
    s.va = p.value("va", 1.0);
    s.ha_dot = p.value("ha_dot", 0.0);
    s.va_dot = p.value("va_dot", 0.0);
    tr = integrate_trajectory(s, t0, t1, dt, cp, rho0);
  } else {
    throw ConfigError("cosmo-evolve: mode must be 'hubble' or 'closure'");
  }
  const bool accel = p.value("accel_flag", false);
  CsvTable t;
  t.header = {"t", "hH", "vH", "gamma", "ha", "va", "rho"};
  if (accel) t.header.emplace_back("accel_flag");
  for (const auto& r : tr.rows) {
    std::vector<std::string> row = {format_double(r.t),  format_double(r.hH),
                                    format_double(r.vH), format_double(r.gamma),
                                    format_double(r.ha), format_double(r.va),
                                    format_double(r.rho)};
    if (accel) row.push_back(acceleration_test(r.gamma) ? "1" : "0");
    t.add_row(std::move(row));
  }
  export_csv(t, out_file(cfg, out_dir));
  if (tr.singular)
    std::cerr << "cosmo-evolve: finite-time singularity at t = " << tr.t_last << "\n";
  return kExitOk;
}

int run_cosmo_classify(const RunConfig& cfg, const std::string& out_dir) {
  const json& p = cfg.params;
  const double g0 = p.value("gamma_min", -3.0);
  const double g1 = p.value("gamma_max", 4.0);
  const int count = p.value("count", 29);
  if (count < 1 || !(g1 > g0)) throw ConfigError("cosmo-classify: bad gamma range");
  const bool lit = p.value("include_literal", false);
  CsvTable t;
  t.header = {"gamma0", "label"};
  if (lit) t.header.emplace_back("literal_label");
  for (int i = 0; i < count; ++i) {
    const double g = (count == 1) ? g0 : g0 + (g1 - g0) * i / (count - 1);
    std::vector<std::string> row = {format_double(g), regime_name(classify_regime(g))};
    if (lit) row.emplace_back(regime_name(classify_regime_literal(g)));
    t.add_row(std::move(row));
  }
  export_csv(t, out_file(cfg, out_dir));
  return kExitOk;
}

int run_soliton(const RunConfig& cfg, const std::string& out_dir) {
  const json& p = cfg.params;
  std::vector<json> cases;
  if (p.contains("cases"))
    cases = p.at("cases").get<std::vector<json>>();
  else
    cases.push_back(p);
  CsvTable t;
  t.header = {"kappa", "l", "eps", "omega", "residual"};
  for (const json& c : cases) {
    SolitonParams sp;
    sp.kappa = c.value("kappa", 1.0);
    sp.l = c.value("l", 0.0);
    sp.eps_sign = c.value("eps_sign", 1);
    const SolitonWave w = kp_line_soliton(sp);
    t.add_row({format_double(sp.kappa), format_double(sp.l), std::to_string(sp.eps_sign),
               format_double(w.omega), format_double(w.residual)});
  }
  export_csv(t, out_file(cfg, out_dir));
  return kExitOk;
}

}  // namespace

int run(const RunConfig& cfg, const std::string& out_dir) {
  try {
    switch (cfg.command) {
      case Command::hessian: return run_hessian(cfg, out_dir);
      case Command::connection: return run_connection(cfg, out_dir);
      case Command::curvature: return run_curvature(cfg, out_dir);
      case Command::verify: return run_verify(cfg, out_dir);
      case Command::cosmo_evolve: return run_cosmo_evolve(cfg, out_dir);
      case Command::cosmo_classify: return run_cosmo_classify(cfg, out_dir);
      case Command::soliton: return run_soliton(cfg, out_dir);
    }
    return kExitInput;
  } catch (const ExprError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ConfigError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const FinslerDomainError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kExitModel;
  } catch (const AnsatzError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kExitModel;
  } catch (const CosmoError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kExitModel;
  } catch (const std::exception& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

int run_main(int argc, const char* const* argv) {
  CLI::App app{"Finsler d-metric and cosmology batch runner"};
  app.name("finsler_forge");
  std::string command, config_path, out_dir = ".";
  int threads = 0;
  double tol = std::numeric_limits<double>::quiet_NaN();
  app.add_option("command", command, "one of: hessian, connection, curvature, verify, cosmo-evolve, cosmo-classify, soliton")->required();
  app.add_option("--config", config_path, "path to the run configuration")->required();
  app.add_option("--out", out_dir, "output directory (default: current)");
  app.add_option("--threads", threads, "worker thread count");
  app.add_option("--tolerance", tol, "override the configured tolerance");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }
  RunConfig cfg;
  try {
    const Command want = parse_command(command);
    cfg = load_run_config(config_path);
    if (cfg.command != want)
      throw ConfigError("command '" + command + "' does not match config command '" +
                        command_name(cfg.command) + "'");
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  }
  if (threads > 0) {
    cfg.threads = threads;
  } else if (cfg.threads <= 0) {
    const char* env = std::getenv("FINSLER_FORGE_THREADS");
    cfg.threads = env ? std::max(1, std::atoi(env)) : 1;
  }
  if (!std::isnan(tol)) cfg.tolerance = tol;
  return run(cfg, out_dir);
}

}  // namespace finsler
