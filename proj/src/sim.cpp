#include "rcps/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "rcps/errors.hpp"
#include "rcps/inference.hpp"
#include "rcps/stats.hpp"

namespace rcps {

namespace {

constexpr double kPi = 3.14159265358979323846;

void parallel_for(int items, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads <= 0) threads = 1;
  threads = std::min(threads, items);
  if (threads <= 1) {
    for (int i = 0; i < items; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= items) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

int knot_rule(int n) { return 2 * static_cast<int>(std::ceil(std::pow(n, 0.4))); }

double interpolated_quantile(std::vector<double> sorted, double q) {
  const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

double sample_scale(const Eigen::VectorXd& x) {
  const double n = static_cast<double>(x.size());
  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().sum() / (n - 1.0));
  std::vector<double> sorted(x.data(), x.data() + x.size());
  std::sort(sorted.begin(), sorted.end());
  const double iqr =
      interpolated_quantile(sorted, 0.75) - interpolated_quantile(sorted, 0.25);
  double scale = sd;
  if (iqr > 0.0) scale = std::min(scale, iqr / 1.349);
  return scale;
}

double phi4(double x) { return (((x * x - 6.0) * x * x) + 3.0) * normal_pdf(x); }
double phi6(double x) {
  const double x2 = x * x;
  return (((x2 - 15.0) * x2 + 45.0) * x2 - 15.0) * normal_pdf(x);
}

// pairwise sums used by the plug-in bandwidth; diagonal included as in the
// classical implementation
double sum_phi4(const Eigen::VectorXd& x, double h) {
  const auto n = x.size();
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) s += phi4((x[i] - x[j]) / h);
  return 2.0 * s + static_cast<double>(n) * phi4(0.0);
}

double sum_phi6(const Eigen::VectorXd& x, double h) {
  const auto n = x.size();
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) s += phi6((x[i] - x[j]) / h);
  return 2.0 * s + static_cast<double>(n) * phi6(0.0);
}

}  // namespace

Eigen::MatrixXd gen_design(int n, double rho, Rng& rng) {
  if (rho < 0.0 || rho >= 1.0) throw std::domain_error("gen_design: rho must be in [0,1)");
  Eigen::Matrix3d mix;
  mix << 1.0, rho, rho * rho, rho, 1.0, rho, rho * rho, rho, 1.0;
  Eigen::Vector3d norm(1.0 / (1.0 + rho + rho * rho), 1.0 / (1.0 + 2.0 * rho),
                       1.0 / (1.0 + rho + rho * rho));
  const Eigen::Matrix3d T = norm.asDiagonal() * mix;
  Eigen::MatrixXd X(n, 3);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d z(rng.uniform(), rng.uniform(), rng.uniform());
    X.row(i) = (T * z).transpose();
  }
  return X;
}

std::array<std::function<double(double)>, 3> sim_truth_functions() {
  return {[](double x) { return std::sin(2.0 * kPi * x); },
          [](double x) { return 2.0 * std::cos(2.0 * kPi * x); },
          [](double x) {
            const double s = std::sin(kPi / 2.0 * x);
            return s * s;
          }};
}

Eigen::VectorXd center_truth(const std::vector<std::function<double(double)>>& fns, double rho,
                             Rng& rng, long draws) {
  if (fns.size() != 3) throw config_error("center_truth: expected three component functions");
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  const long block = 4096;
  long done = 0;
  while (done < draws) {
    const long m = std::min(block, draws - done);
    Eigen::MatrixXd X = gen_design(static_cast<int>(m), rho, rng);
    for (long i = 0; i < m; ++i)
      for (int j = 0; j < 3; ++j) acc[j] += fns[static_cast<std::size_t>(j)](X(i, j));
    done += m;
  }
  return acc / static_cast<double>(draws);
}

SimContext prepare_sim(const SimConfig& cfg) {
  if (cfg.reps < 1) throw config_error("sim: reps must be >= 1");
  for (int j = 0; j < 3; ++j)
    if (!(cfg.eval_point[j] > 0.0 && cfg.eval_point[j] < 1.0))
      throw config_error("sim: evaluation point must be interior to (0,1)^3");

  const int K = cfg.knot_override > 0 ? cfg.knot_override : knot_rule(cfg.n);
  const double scale = std::sqrt(static_cast<double>(cfg.n) / K);

  GamSpec main_spec;
  main_spec.family = cfg.family;
  main_spec.penalty.order = 2;
  main_spec.penalty.ridge = cfg.gamma;
  main_spec.penalty.lambdas.resize(3);
  for (int j = 0; j < 3; ++j) {
    main_spec.bases.emplace_back(3, K, 2);
    main_spec.penalty.lambdas[j] = cfg.lambda_scale[static_cast<std::size_t>(j)] * scale;
  }
  main_spec.normalize = false;  // the design generator already lives on [0,1]

  Rng design_rng = Rng::child(cfg.seed, 1);
  Eigen::MatrixXd design = gen_design(cfg.n, cfg.rho, design_rng);

  Rng center_rng = Rng::child(cfg.seed, 2);
  const auto fns = sim_truth_functions();
  Eigen::VectorXd offsets =
      center_truth({fns[0], fns[1], fns[2]}, cfg.rho, center_rng);

  Eigen::VectorXd eta_true(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) s += fns[static_cast<std::size_t>(j)](design(i, j)) - offsets[j];
    eta_true[i] = s;
  }
  Eigen::Vector3d eta_eval;
  for (int j = 0; j < 3; ++j)
    eta_eval[j] = fns[static_cast<std::size_t>(j)](cfg.eval_point[j]) - offsets[j];

  GamDesign main_design(main_spec, design);
  GamDesign pilot_design(pilot_spec(main_spec), design);
  return SimContext{cfg,
                    K,
                    main_spec.penalty.lambdas,
                    std::move(design),
                    offsets,
                    std::move(eta_true),
                    eta_eval,
                    std::move(main_design),
                    std::move(pilot_design)};
}

std::optional<Eigen::Vector3d> run_replicate(const SimContext& ctx, Rng& rng) {
  const auto n = ctx.eta_true.size();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = ctx.cfg.family.sample(ctx.eta_true[i], rng);

  GamFit fit, pilot;
  try {
    fit = ctx.main_design.fit(y);
    pilot = fit_pilot_on_design(ctx.pilot_design, y);
  } catch (const convergence_error&) {
    return std::nullopt;
  }

  const auto& offsets = ctx.main_design.offsets();
  Eigen::Vector3d U;
  for (int j = 0; j < 3; ++j) {
    const auto& basis = ctx.main_design.spec().bases[static_cast<std::size_t>(j)];
    const auto Zj = ctx.main_design.design().middleCols(offsets[static_cast<std::size_t>(j)],
                                                        basis.size());
    const ComponentInference ci(basis, Zj, fit.weights, fit.block(j), ctx.lambdas[j]);
    const PilotDerivative pd = pilot_derivative(pilot, j);
    const double e = ctx.cfg.eval_point[j];
    const double eta_hat = curve_value(basis, fit.block(j), e);
    const double bias = bias_a_value(pd(e), basis, e) + ci.bias_lambda(e);
    const double v = ci.variance(e);
    if (!(v > 0.0)) return std::nullopt;
    U[j] = (eta_hat - ctx.eta_eval[j] - bias) / std::sqrt(v);
  }
  return U;
}

std::optional<double> sj_bandwidth(const Eigen::VectorXd& x) {
  const auto n = x.size();
  if (n < 10) throw std::domain_error("sj_bandwidth: need at least 10 samples");
  const double scale = sample_scale(x);
  if (!(scale > 0.0)) throw numeric_error("sj_bandwidth: degenerate sample (zero spread)");
  const double nd = static_cast<double>(n);

  const double a = 0.920 * scale * std::pow(nd, -1.0 / 7.0);
  const double b = 0.912 * scale * std::pow(nd, -1.0 / 9.0);
  const double TD = -sum_phi6(x, b) / (nd * (nd - 1.0) * std::pow(b, 7));
  const double SD = sum_phi4(x, a) / (nd * (nd - 1.0) * std::pow(a, 5));
  if (!(TD > 0.0) || !(SD > 0.0)) return std::nullopt;

  const double rk = 1.0 / (2.0 * std::sqrt(kPi));
  auto fixed_point_gap = [&](double h) {
    const double g = 1.357 * std::pow(SD / TD, 1.0 / 7.0) * std::pow(h, 5.0 / 7.0);
    const double sdh = sum_phi4(x, g) / (nd * (nd - 1.0) * std::pow(g, 5));
    if (!(sdh > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return std::pow(rk / (nd * sdh), 0.2) - h;
  };

  const double h0 = silverman_bandwidth(x);
  double lo = h0 / 8.0, hi = h0 * 8.0;
  double flo = fixed_point_gap(lo), fhi = fixed_point_gap(hi);
  for (int expand = 0; expand < 4 && (std::isnan(flo) || std::isnan(fhi) || flo * fhi > 0.0);
       ++expand) {
    lo /= 4.0;
    hi *= 4.0;
    flo = fixed_point_gap(lo);
    fhi = fixed_point_gap(hi);
  }
  if (std::isnan(flo) || std::isnan(fhi) || flo * fhi > 0.0) return std::nullopt;
  for (int iter = 0; iter < 80; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = fixed_point_gap(mid);
    if (std::isnan(fmid)) return std::nullopt;
    if (flo * fmid <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fmid;
    }
    if (hi - lo < 1e-10 * h0) break;
  }
  return 0.5 * (lo + hi);
}

double silverman_bandwidth(const Eigen::VectorXd& x) {
  if (x.size() < 2) throw std::domain_error("silverman_bandwidth: need at least 2 samples");
  const double scale = sample_scale(x);
  if (!(scale > 0.0))
    throw numeric_error("silverman_bandwidth: degenerate sample (zero spread)");
  return 0.9 * scale * std::pow(static_cast<double>(x.size()), -0.2);
}

KdeCurve kde(const Eigen::VectorXd& samples, int grid_points, double lo, double hi) {
  if (samples.size() < 10) throw std::domain_error("kde: need at least 10 samples");
  KdeCurve curve;
  const auto h_sj = sj_bandwidth(samples);
  curve.used_sj = h_sj.has_value();
  curve.bandwidth = h_sj.value_or(silverman_bandwidth(samples));
  curve.grid.resize(grid_points);
  curve.density.resize(grid_points);
  curve.reference.resize(grid_points);
  const double nd = static_cast<double>(samples.size());
  for (int g = 0; g < grid_points; ++g) {
    const double t = lo + (hi - lo) * static_cast<double>(g) / (grid_points - 1);
    curve.grid[g] = t;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < samples.size(); ++i)
      acc += normal_pdf((t - samples[i]) / curve.bandwidth);
    curve.density[g] = acc / (nd * curve.bandwidth);
    curve.reference[g] = normal_pdf(t);
  }
  return curve;
}

Kde2d kde2d(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys, int grid_points, double lo,
            double hi) {
  if (xs.size() != ys.size()) throw std::domain_error("kde2d: sample length mismatch");
  if (xs.size() < 10) throw std::domain_error("kde2d: need at least 10 samples");
  Kde2d out;
  out.bandwidth_x = sj_bandwidth(xs).value_or(silverman_bandwidth(xs));
  out.bandwidth_y = sj_bandwidth(ys).value_or(silverman_bandwidth(ys));
  out.grid.resize(grid_points);
  for (int g = 0; g < grid_points; ++g)
    out.grid[g] = lo + (hi - lo) * static_cast<double>(g) / (grid_points - 1);
  out.density.setZero(grid_points, grid_points);
  out.reference.resize(grid_points, grid_points);
  const double nd = static_cast<double>(xs.size());
  for (int gx = 0; gx < grid_points; ++gx)
    for (int gy = 0; gy < grid_points; ++gy) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < xs.size(); ++i)
        acc += normal_pdf((out.grid[gx] - xs[i]) / out.bandwidth_x) *
               normal_pdf((out.grid[gy] - ys[i]) / out.bandwidth_y);
      out.density(gx, gy) = acc / (nd * out.bandwidth_x * out.bandwidth_y);
      out.reference(gx, gy) = normal_pdf(out.grid[gx]) * normal_pdf(out.grid[gy]);
    }
  return out;
}

double ks_distance(const Eigen::VectorXd& samples) {
  if (samples.size() < 10) throw std::domain_error("ks_distance: need at least 10 samples");
  std::vector<double> sorted(samples.data(), samples.data() + samples.size());
  std::sort(sorted.begin(), sorted.end());
  const double nd = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double cdf = normal_cdf(sorted[i]);
    d = std::max(d, std::fabs((static_cast<double>(i) + 1.0) / nd - cdf));
    d = std::max(d, std::fabs(cdf - static_cast<double>(i) / nd));
  }
  return d;
}

SimReport run_monte_carlo(const SimConfig& cfg) {
  const SimContext ctx = prepare_sim(cfg);

  std::vector<std::optional<Eigen::Vector3d>> slots(static_cast<std::size_t>(cfg.reps));
  parallel_for(cfg.reps, cfg.threads, [&](int r) {
    Rng rng = Rng::child(cfg.seed, 1000 + static_cast<std::uint64_t>(r));
    slots[static_cast<std::size_t>(r)] = run_replicate(ctx, rng);
  });

  SimReport report;
  report.cfg = cfg;
  report.K = ctx.K;
  report.lambdas = ctx.lambdas;
  report.offsets = ctx.offsets;
  report.requested = cfg.reps;
  int ok = 0;
  for (const auto& s : slots) ok += s.has_value() ? 1 : 0;
  report.converged = ok;
  report.nonconverged = cfg.reps - ok;
  if (report.nonconverged * 5 > cfg.reps)
    throw convergence_error("sim: " + std::to_string(report.nonconverged) + " of " +
                                std::to_string(cfg.reps) + " replicates failed to converge",
                            0, 0.0);
  report.U.resize(ok, 3);
  int row = 0;
  for (const auto& s : slots)
    if (s) report.U.row(row++) = s->transpose();

  for (int j = 0; j < 3; ++j) {
    report.component_kde[static_cast<std::size_t>(j)] = kde(report.U.col(j));
    report.ks[static_cast<std::size_t>(j)] = ks_distance(report.U.col(j));
  }
  const int pair_idx[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  for (int p = 0; p < 3; ++p) {
    auto& panel = report.pairs[static_cast<std::size_t>(p)];
    panel.a = pair_idx[p][0];
    panel.b = pair_idx[p][1];
    const Eigen::VectorXd ua = report.U.col(panel.a);
    const Eigen::VectorXd ub = report.U.col(panel.b);
    const double ca = (ua.array() - ua.mean()).matrix().norm();
    const double cb = (ub.array() - ub.mean()).matrix().norm();
    panel.corr = (ua.array() - ua.mean()).cwiseProduct(ub.array() - ub.mean()).sum() / (ca * cb);
    panel.kde = kde2d(ua, ub);
  }
  return report;
}

std::string report_json(const SimReport& report, const std::string& tool_version) {
  using nlohmann::json;
  json doc;
  doc["tool"] = "rcps";
  doc["version"] = tool_version;
  doc["seed"] = report.cfg.seed;
  json cfg;
  cfg["n"] = report.cfg.n;
  cfg["reps"] = report.cfg.reps;
  cfg["rho"] = report.cfg.rho;
  cfg["family"] = report.cfg.family.name();
  cfg["eval_point"] = {report.cfg.eval_point[0], report.cfg.eval_point[1],
                       report.cfg.eval_point[2]};
  cfg["lambda_scale"] = report.cfg.lambda_scale;
  cfg["gamma"] = report.cfg.gamma;
  cfg["degree"] = 3;
  cfg["penalty_order"] = 2;
  doc["config"] = cfg;
  doc["knots"] = report.K;
  doc["lambdas"] = {report.lambdas[0], report.lambdas[1], report.lambdas[2]};
  doc["truth_offsets"] = {report.offsets[0], report.offsets[1], report.offsets[2]};
  doc["replicates"] = {{"requested", report.requested},
                       {"converged", report.converged},
                       {"nonconverged", report.nonconverged}};
  json rows = json::array();
  for (Eigen::Index r = 0; r < report.U.rows(); ++r)
    rows.push_back({report.U(r, 0), report.U(r, 1), report.U(r, 2)});
  doc["U"] = std::move(rows);
  json comps = json::array();
  for (int j = 0; j < 3; ++j) {
    const auto& c = report.component_kde[static_cast<std::size_t>(j)];
    json item;
    item["component"] = j + 1;
    item["ks_to_normal"] = report.ks[static_cast<std::size_t>(j)];
    item["bandwidth"] = c.bandwidth;
    item["bandwidth_rule"] = c.used_sj ? "sheather-jones" : "silverman";
    item["grid"] = std::vector<double>(c.grid.data(), c.grid.data() + c.grid.size());
    item["density"] = std::vector<double>(c.density.data(), c.density.data() + c.density.size());
    item["normal"] =
        std::vector<double>(c.reference.data(), c.reference.data() + c.reference.size());
    comps.push_back(std::move(item));
  }
  doc["components"] = std::move(comps);
  json pairs = json::array();
  for (const auto& p : report.pairs) {
    json item;
    item["components"] = {p.a + 1, p.b + 1};
    item["corr"] = p.corr;
    item["bandwidth"] = {p.kde.bandwidth_x, p.kde.bandwidth_y};
    item["grid"] = std::vector<double>(p.kde.grid.data(), p.kde.grid.data() + p.kde.grid.size());
    json dens = json::array(), ref = json::array();
    for (Eigen::Index i = 0; i < p.kde.density.rows(); ++i) {
      dens.push_back(std::vector<double>(p.kde.density.row(i).begin(),
                                         p.kde.density.row(i).end()));
      ref.push_back(std::vector<double>(p.kde.reference.row(i).begin(),
                                        p.kde.reference.row(i).end()));
    }
    item["density"] = std::move(dens);
    item["normal"] = std::move(ref);
    pairs.push_back(std::move(item));
  }
  doc["pairs"] = std::move(pairs);
  return doc.dump(2);
}

}  // namespace rcps
