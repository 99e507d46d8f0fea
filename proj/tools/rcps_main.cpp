// Command-line front end: CSV in, fitted curves / confidence bands /
// mixed-model fits / simulation reports out.
#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rcps/errors.hpp"
#include "rcps/fit.hpp"
#include "rcps/inference.hpp"
#include "rcps/mixed.hpp"
#include "rcps/penalty.hpp"
#include "rcps/sim.hpp"
#include "rcps/stats.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

// exit codes: 0 ok, 2 data, 3 configuration, 4 convergence, 5 numerical
enum ExitCode { kOk = 0, kData = 2, kConfig = 3, kConvergence = 4, kNumeric = 5 };

struct Csv {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    throw rcps::data_error("column '" + name + "' not found in input");
  }
};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.push_back("");
  return out;
}

Csv read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rcps::data_error("cannot open input file '" + path + "'");
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) throw rcps::data_error("input file '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  csv.columns = split(line, ',');
  if (csv.columns.empty()) throw rcps::data_error("input header row has no columns");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != csv.columns.size())
      throw rcps::data_error("row " + std::to_string(lineno) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(csv.columns.size()));
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      try {
        std::size_t used = 0;
        row[c] = std::stod(fields[c], &used);
        if (used != fields[c].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw rcps::data_error("row " + std::to_string(lineno) + ", column '" +
                               csv.columns[c] + "': cannot parse '" + fields[c] + "'");
      }
    }
    csv.rows.push_back(std::move(row));
  }
  if (csv.rows.empty()) throw rcps::data_error("input file '" + path + "' has no data rows");
  return csv;
}

struct CommonOptions {
  std::string input;
  std::string response;
  std::vector<std::string> covariates;
  std::string family = "gaussian";
  double gamma_shape = 1.0;
  int degree = 3;
  std::string knots = "gcv";
  int penalty_order = 2;
  std::string lambda = "gcv";
  double ridge = 1e-6;
  double alpha = 0.05;
  int grid = 200;
  std::uint64_t seed = 1;
  std::string out = "rcps";
};

rcps::GamData load_data(const CommonOptions& opt, const Csv& csv) {
  if (opt.covariates.empty()) throw rcps::config_error("no covariate columns given");
  const int yc = csv.column_index(opt.response);
  std::vector<int> xc;
  for (const auto& name : opt.covariates) xc.push_back(csv.column_index(name));
  const auto n = static_cast<Eigen::Index>(csv.rows.size());
  rcps::GamData data;
  data.response.resize(n);
  data.covariates.resize(n, static_cast<Eigen::Index>(xc.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    data.response[i] = csv.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(yc)];
    for (std::size_t j = 0; j < xc.size(); ++j)
      data.covariates(i, static_cast<Eigen::Index>(j)) =
          csv.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(xc[j])];
  }
  return data;
}

void check_response_support(const rcps::FamilyModel& family, const Eigen::VectorXd& y) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    try {
      family.check_support(y[i]);
    } catch (const std::domain_error& e) {
      throw rcps::data_error("response row " + std::to_string(i) + ": " + e.what());
    }
  }
}

std::vector<double> parse_lambda_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& tok : split(text, ':')) out.push_back(std::stod(tok));
  return out;
}

std::string config_line(const CommonOptions& opt, const rcps::GamSpec& spec) {
  std::ostringstream os;
  os << "# rcps " << kVersion << " seed=" << opt.seed << " family=" << spec.family.name()
     << " degree=" << spec.bases[0].degree << " knots=" << spec.bases[0].knot_count
     << " penalty_order=" << spec.bases[0].penalty_order << " lambda=";
  for (Eigen::Index j = 0; j < spec.penalty.lambdas.size(); ++j) {
    if (j) os << ":";
    os << spec.penalty.lambdas[j];
  }
  os << " ridge=" << spec.penalty.ridge << " alpha=" << opt.alpha << " input=" << opt.input
     << " response=" << opt.response;
  return os.str();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Resolve the model: either the fixed (knots, lambda) configuration or a
// GCV search over the requested grid.
rcps::GamSpec resolve_spec(const CommonOptions& opt, const rcps::FamilyModel& family,
                           const rcps::GamData& data) {
  const auto D = static_cast<std::size_t>(data.covariates.cols());
  const bool gcv_knots = (opt.knots == "gcv");
  const bool gcv_lambda = (opt.lambda == "gcv");

  std::vector<int> knot_candidates;
  if (gcv_knots) {
    knot_candidates = {4, 6, 8, 12, 16, 20};
  } else {
    knot_candidates = {std::stoi(opt.knots)};
  }

  std::vector<std::vector<double>> grids(D);
  if (gcv_lambda) {
    // multiplier grid on the sqrt(n/K) scale, shared shape per covariate
    const double n = static_cast<double>(data.response.size());
    const double kbar = static_cast<double>(knot_candidates[0]);
    const double scale = std::sqrt(n / kbar);
    for (auto& g : grids)
      g = {0.01 * scale, 0.1 * scale, scale, 10.0 * scale, 100.0 * scale};
  } else {
    const auto values = parse_lambda_list(opt.lambda);
    if (values.size() == 1) {
      for (auto& g : grids) g = {values[0]};
    } else if (values.size() == D) {
      for (std::size_t j = 0; j < D; ++j) grids[j] = {values[j]};
    } else {
      throw rcps::config_error("--lambda needs one value or one per covariate");
    }
  }

  if (!gcv_knots && !gcv_lambda) {
    rcps::GamSpec spec;
    spec.family = family;
    spec.penalty.order = opt.penalty_order;
    spec.penalty.ridge = opt.ridge;
    spec.penalty.lambdas.resize(static_cast<Eigen::Index>(D));
    for (std::size_t j = 0; j < D; ++j) {
      spec.bases.emplace_back(opt.degree, knot_candidates[0], opt.penalty_order);
      spec.penalty.lambdas[static_cast<Eigen::Index>(j)] = grids[j][0];
    }
    return spec;
  }

  rcps::GcvCandidates cands;
  cands.degree = opt.degree;
  cands.order = opt.penalty_order;
  cands.ridge = opt.ridge;
  cands.knot_counts = knot_candidates;
  cands.lambda_grids = grids;
  return rcps::gcv_select(data, family, cands);
}

nlohmann::json fit_summary_json(const CommonOptions& opt, const rcps::GamSpec& spec,
                                const rcps::GamFit& fit, const rcps::GamData& data) {
  nlohmann::json doc;
  doc["tool"] = "rcps";
  doc["version"] = kVersion;
  doc["seed"] = opt.seed;
  doc["input"] = opt.input;
  doc["family"] = spec.family.name();
  doc["n"] = data.response.size();
  doc["covariates"] = opt.covariates;
  nlohmann::json model;
  model["degree"] = spec.bases[0].degree;
  model["knots"] = spec.bases[0].knot_count;
  model["penalty_order"] = spec.bases[0].penalty_order;
  model["lambda"] = std::vector<double>(spec.penalty.lambdas.data(),
                                        spec.penalty.lambdas.data() + spec.penalty.lambdas.size());
  model["ridge"] = spec.penalty.ridge;
  doc["model"] = model;
  doc["iterations"] = fit.iterations;
  doc["converged"] = fit.converged;
  doc["gradient_norm"] = fit.gradient_norm;
  doc["deviance"] = fit.deviance;
  doc["edf"] = fit.edf;
  doc["gcv"] = fit.gcv;
  doc["intercept"] = fit.intercept;
  doc["centering"] = std::vector<double>(fit.centering.data(),
                                         fit.centering.data() + fit.centering.size());
  nlohmann::json coefs = nlohmann::json::array();
  for (int j = 0; j < fit.n_covariates(); ++j) {
    const Eigen::VectorXd b = fit.block(j);
    coefs.push_back(std::vector<double>(b.data(), b.data() + b.size()));
  }
  doc["coefficients"] = coefs;
  // advisory smoothing-regime check per covariate
  nlohmann::json adm = nlohmann::json::array();
  for (int j = 0; j < fit.n_covariates(); ++j) {
    Eigen::VectorXd u(data.covariates.rows());
    for (Eigen::Index i = 0; i < u.size(); ++i)
      u[i] = std::clamp(fit.normalizers[static_cast<std::size_t>(j)].to_unit(
                            data.covariates(i, j)), 0.0, 1.0);
    const Eigen::MatrixXd Zj = rcps::design_matrix(fit.bases[static_cast<std::size_t>(j)], u);
    try {
      const auto rep = rcps::lambda_admissible(Zj, fit.penalty.lambdas[j],
                                               fit.bases[static_cast<std::size_t>(j)].penalty_order);
      adm.push_back({{"covariate", opt.covariates[static_cast<std::size_t>(j)]},
                     {"admissible", rep.admissible},
                     {"lambda_inverse", rep.lambda_inverse},
                     {"max_eigenvalue", rep.max_eigenvalue}});
    } catch (const rcps::numeric_error&) {
      adm.push_back({{"covariate", opt.covariates[static_cast<std::size_t>(j)]},
                     {"admissible", nullptr}});
    }
  }
  doc["lambda_admissible"] = adm;
  return doc;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw rcps::data_error("cannot write output file '" + path + "'");
  out << text;
}

Eigen::VectorXd curve_grid(const rcps::GamFit& fit, int points) {
  return rcps::inference_grid(fit.bases[0], points);
}

int run_fit(const CommonOptions& opt) {
  const auto family = rcps::FamilyModel::parse(opt.family, opt.gamma_shape);
  const Csv csv = read_csv(opt.input);
  const rcps::GamData data = load_data(opt, csv);
  check_response_support(family, data.response);
  const rcps::GamSpec spec = resolve_spec(opt, family, data);
  const rcps::GamFit fit = rcps::fit_rcps(spec, data);

  write_text(opt.out + "_summary.json", fit_summary_json(opt, spec, fit, data).dump(2) + "\n");
  for (int j = 0; j < fit.n_covariates(); ++j) {
    const auto& nrm = fit.normalizers[static_cast<std::size_t>(j)];
    const Eigen::VectorXd grid = rcps::inference_grid(fit.bases[static_cast<std::size_t>(j)],
                                                      opt.grid);
    std::ostringstream os;
    os << config_line(opt, spec) << " covariate=" << opt.covariates[static_cast<std::size_t>(j)]
       << "\n";
    os << "x,eta_hat\n";
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const double eta =
          rcps::curve_value(fit.bases[static_cast<std::size_t>(j)], fit.block(j), grid[i]);
      os << fmt(nrm.from_unit(grid[i])) << "," << fmt(eta) << "\n";
    }
    write_text(opt.out + "_curve_x" + std::to_string(j + 1) + ".csv", os.str());
  }
  std::cout << "fit: converged=" << (fit.converged ? "yes" : "no")
            << " iterations=" << fit.iterations << " edf=" << fit.edf << " gcv=" << fit.gcv
            << "\n";
  return kOk;
}

int run_confint(const CommonOptions& opt) {
  const auto family = rcps::FamilyModel::parse(opt.family, opt.gamma_shape);
  const Csv csv = read_csv(opt.input);
  const rcps::GamData data = load_data(opt, csv);
  check_response_support(family, data.response);
  const rcps::GamSpec spec = resolve_spec(opt, family, data);
  const rcps::GamFit fit = rcps::fit_rcps(spec, data);
  const rcps::GamFit pilot = rcps::fit_pilot(spec, data);

  for (int j = 0; j < fit.n_covariates(); ++j) {
    const auto& nrm = fit.normalizers[static_cast<std::size_t>(j)];
    const Eigen::VectorXd grid = rcps::inference_grid(fit.bases[static_cast<std::size_t>(j)],
                                                      opt.grid);
    const rcps::InferenceBand band =
        rcps::confidence_interval(fit, data, j, grid, opt.alpha, &pilot);
    std::ostringstream os;
    os << config_line(opt, spec) << " covariate=" << opt.covariates[static_cast<std::size_t>(j)]
       << "\n";
    os << "x,eta_hat,bias_a,bias_lambda,se,lower,upper,lower2se,upper2se\n";
    for (Eigen::Index i = 0; i < grid.size(); ++i)
      os << fmt(nrm.from_unit(grid[i])) << "," << fmt(band.eta_hat[i]) << ","
         << fmt(band.bias_a[i]) << "," << fmt(band.bias_lambda[i]) << "," << fmt(band.se[i])
         << "," << fmt(band.lower[i]) << "," << fmt(band.upper[i]) << ","
         << fmt(band.lower_2se[i]) << "," << fmt(band.upper_2se[i]) << "\n";
    write_text(opt.out + "_band_x" + std::to_string(j + 1) + ".csv", os.str());
  }

  std::ostringstream os;
  os << config_line(opt, spec) << "\n";
  os << "covariate,x,partial_residual\n";
  for (int j = 0; j < fit.n_covariates(); ++j) {
    const Eigen::VectorXd pr = rcps::partial_residuals(fit, data, j);
    for (Eigen::Index i = 0; i < pr.size(); ++i)
      os << (j + 1) << "," << fmt(data.covariates(i, j)) << "," << fmt(pr[i]) << "\n";
  }
  write_text(opt.out + "_partial_residuals.csv", os.str());
  std::cout << "confint: wrote " << fit.n_covariates() << " band files, alpha=" << opt.alpha
            << "\n";
  return kOk;
}

int run_pql(const CommonOptions& opt, const std::string& sigma2_text, double ridge_tilde) {
  const auto family = rcps::FamilyModel::parse(opt.family, opt.gamma_shape);
  const Csv csv = read_csv(opt.input);
  const rcps::GamData data = load_data(opt, csv);
  check_response_support(family, data.response);

  if (sigma2_text.empty())
    throw rcps::config_error("pql requires --sigma2 with one value per covariate");
  if (sigma2_text == "estimate" || sigma2_text == "reml" || sigma2_text == "ml")
    throw rcps::config_error(
        "variance-component estimation is out of scope; supply --sigma2 values");
  const auto sig = parse_lambda_list(sigma2_text);
  const auto D = static_cast<std::size_t>(data.covariates.cols());
  rcps::MixedSpec spec;
  spec.degree = opt.degree;
  spec.knot_count = (opt.knots == "gcv") ? 10 : std::stoi(opt.knots);
  spec.family = family;
  spec.ridge_tilde = ridge_tilde;
  spec.sigma2.resize(static_cast<Eigen::Index>(D));
  if (sig.size() == 1) {
    spec.sigma2.setConstant(sig[0]);
  } else if (sig.size() == D) {
    for (std::size_t j = 0; j < D; ++j) spec.sigma2[static_cast<Eigen::Index>(j)] = sig[j];
  } else {
    throw rcps::config_error("--sigma2 needs one value or one per covariate");
  }

  const rcps::PqlFit fit = rcps::pql_fit(spec, data);

  nlohmann::json doc;
  doc["tool"] = "rcps";
  doc["version"] = kVersion;
  doc["seed"] = opt.seed;
  doc["family"] = family.name();
  doc["degree"] = spec.degree;
  doc["knots"] = spec.knot_count;
  doc["sigma2"] = std::vector<double>(spec.sigma2.data(), spec.sigma2.data() + spec.sigma2.size());
  doc["ridge_tilde"] = spec.ridge_tilde;
  doc["iterations"] = fit.bfit.iterations;
  doc["converged"] = fit.bfit.converged;
  doc["equivalence_residual"] = fit.reparam_residual;
  nlohmann::json beta = nlohmann::json::array(), u = nlohmann::json::array();
  for (std::size_t j = 0; j < D; ++j) {
    beta.push_back(std::vector<double>(fit.beta[j].data(), fit.beta[j].data() + fit.beta[j].size()));
    u.push_back(std::vector<double>(fit.u[j].data(), fit.u[j].data() + fit.u[j].size()));
  }
  doc["beta"] = beta;
  doc["u"] = u;
  write_text(opt.out + "_summary.json", doc.dump(2) + "\n");

  for (std::size_t j = 0; j < D; ++j) {
    const auto& nrm = fit.bfit.normalizers[j];
    const Eigen::VectorXd grid = rcps::inference_grid(fit.bfit.bases[j], opt.grid);
    std::ostringstream os;
    os << "# rcps " << kVersion << " seed=" << opt.seed << " pql sigma2=" << sigma2_text
       << " degree=" << spec.degree << " knots=" << spec.knot_count
       << " covariate=" << opt.covariates[j] << "\n";
    os << "x,eta_hat\n";
    for (Eigen::Index i = 0; i < grid.size(); ++i)
      os << fmt(nrm.from_unit(grid[i])) << ","
         << fmt(rcps::curve_value(fit.bfit.bases[j], fit.bfit.block(static_cast<int>(j)), grid[i]))
         << "\n";
    write_text(opt.out + "_curve_x" + std::to_string(j + 1) + ".csv", os.str());
  }
  std::cout << "pql: converged=" << (fit.bfit.converged ? "yes" : "no")
            << " equivalence_residual=" << fit.reparam_residual << "\n";
  return kOk;
}

int run_simulate(const rcps::SimConfig& cfg, const std::string& out) {
  const rcps::SimReport report = rcps::run_monte_carlo(cfg);
  write_text(out + "_report.json", rcps::report_json(report, kVersion));

  for (int j = 0; j < 3; ++j) {
    const auto& c = report.component_kde[static_cast<std::size_t>(j)];
    std::ostringstream os;
    os << "# rcps " << kVersion << " seed=" << cfg.seed << " simulate n=" << cfg.n
       << " reps=" << cfg.reps << " rho=" << cfg.rho << " family=" << cfg.family.name()
       << " component=" << (j + 1) << "\n";
    os << "u,density,normal\n";
    for (Eigen::Index i = 0; i < c.grid.size(); ++i)
      os << fmt(c.grid[i]) << "," << fmt(c.density[i]) << "," << fmt(c.reference[i]) << "\n";
    write_text(out + "_kde_u" + std::to_string(j + 1) + ".csv", os.str());
  }
  for (const auto& p : report.pairs) {
    std::ostringstream os;
    os << "# rcps " << kVersion << " seed=" << cfg.seed << " simulate n=" << cfg.n
       << " reps=" << cfg.reps << " rho=" << cfg.rho << " family=" << cfg.family.name()
       << " pair=" << (p.a + 1) << "," << (p.b + 1) << "\n";
    os << "u" << (p.a + 1) << ",u" << (p.b + 1) << ",density,normal\n";
    for (Eigen::Index i = 0; i < p.kde.grid.size(); ++i)
      for (Eigen::Index k = 0; k < p.kde.grid.size(); ++k)
        os << fmt(p.kde.grid[i]) << "," << fmt(p.kde.grid[k]) << "," << fmt(p.kde.density(i, k))
           << "," << fmt(p.kde.reference(i, k)) << "\n";
    write_text(out + "_kde2d_u" + std::to_string(p.a + 1) + "u" + std::to_string(p.b + 1) +
                   ".csv",
               os.str());
  }

  std::cout << "component,ks_to_normal,converged,total\n";
  for (int j = 0; j < 3; ++j)
    std::cout << "U" << (j + 1) << "," << report.ks[static_cast<std::size_t>(j)] << ","
              << report.converged << "," << report.requested << "\n";
  std::cout << "pair,corr\n";
  for (const auto& p : report.pairs)
    std::cout << "U" << (p.a + 1) << "U" << (p.b + 1) << "," << p.corr << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"penalized-spline additive models with asymptotic confidence intervals"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::string sigma2_text;
  double ridge_tilde = 1e-8;
  rcps::SimConfig sim_cfg;
  std::string eval_text = "0.5,0.5,0.5";
  std::string sim_family = "bernoulli";

  auto add_common = [&](CLI::App* cmd, bool needs_input) {
    cmd->add_option("--input", opt.input, "input CSV path")->required(needs_input);
    cmd->add_option("--response", opt.response, "response column name")->required(needs_input);
    cmd->add_option("--covariates", opt.covariates, "covariate column names")
        ->required(needs_input)
        ->delimiter(',');
    cmd->add_option("--family", opt.family, "gaussian|bernoulli|poisson|gamma");
    cmd->add_option("--gamma-shape", opt.gamma_shape, "shape for the gamma family");
    cmd->add_option("--degree", opt.degree, "spline degree p");
    cmd->add_option("--knots", opt.knots, "knot count K or 'gcv'");
    cmd->add_option("--penalty-order", opt.penalty_order, "difference order m");
    cmd->add_option("--lambda", opt.lambda, "colon list of smoothing parameters or 'gcv'");
    cmd->add_option("--ridge", opt.ridge, "ridge correction gamma");
    cmd->add_option("--alpha", opt.alpha, "interval level");
    cmd->add_option("--grid", opt.grid, "evaluation grid size");
    cmd->add_option("--seed", opt.seed, "seed recorded in artifacts");
    cmd->add_option("--out", opt.out, "output path prefix");
  };

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit the penalized spline model");
  add_common(fit_cmd, true);
  CLI::App* ci_cmd = app.add_subcommand("confint", "fit and export confidence bands");
  add_common(ci_cmd, true);
  CLI::App* pql_cmd = app.add_subcommand("pql", "mixed-model fit with given variance components");
  add_common(pql_cmd, true);
  pql_cmd->add_option("--sigma2", sigma2_text, "colon list of variance components");
  pql_cmd->add_option("--ridge-tilde", ridge_tilde, "regularizer for the mixed fit");

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Monte Carlo study of the standardized fits");
  sim_cmd->add_option("--n", sim_cfg.n, "sample size");
  sim_cmd->add_option("--reps", sim_cfg.reps, "Monte Carlo replicates");
  sim_cmd->add_option("--rho", sim_cfg.rho, "design correlation");
  sim_cmd->add_option("--family", sim_family, "bernoulli|poisson|gaussian");
  sim_cmd->add_option("--eval", eval_text, "comma list, evaluation point");
  sim_cmd->add_option("--knots", sim_cfg.knot_override, "override the knot rule");
  sim_cmd->add_option("--ridge", sim_cfg.gamma, "ridge correction");
  sim_cmd->add_option("--seed", sim_cfg.seed, "simulation seed");
  sim_cmd->add_option("--threads", sim_cfg.threads, "worker threads (0 = auto)");
  std::string sim_out = "rcps_sim";
  sim_cmd->add_option("--out", sim_out, "output path prefix");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(fit_cmd)) return run_fit(opt);
    if (app.got_subcommand(ci_cmd)) return run_confint(opt);
    if (app.got_subcommand(pql_cmd)) return run_pql(opt, sigma2_text, ridge_tilde);
    if (app.got_subcommand(sim_cmd)) {
      sim_cfg.family = rcps::FamilyModel::parse(sim_family);
      const auto parts = split(eval_text, ',');
      if (parts.size() != 3) throw rcps::config_error("--eval needs three values");
      for (int j = 0; j < 3; ++j) sim_cfg.eval_point[j] = std::stod(parts[static_cast<std::size_t>(j)]);
      return run_simulate(sim_cfg, sim_out);
    }
  } catch (const rcps::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const rcps::config_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const rcps::convergence_error& e) {
    std::cerr << "convergence error: " << e.what()
              << " (gradient norm " << e.gradient_norm() << ")\n";
    return kConvergence;
  } catch (const rcps::numeric_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::domain_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kOk;
}
