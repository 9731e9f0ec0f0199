// Command line front end: fits effects on CSV panels, reproduces the
// simulation tables, and exposes the moment-problem diagnostics.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "felogit/bounds.hpp"
#include "felogit/cmle.hpp"
#include "felogit/errors.hpp"
#include "felogit/localpoly.hpp"
#include "felogit/moments.hpp"
#include "felogit/montecarlo.hpp"
#include "felogit/panel.hpp"
#include "felogit/parallel.hpp"
#include "felogit/simple.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumeric = 2;

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

void emit(const json& payload, const std::string& out_path) {
  const std::string body = payload.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << body;
    return;
  }
  const std::string tmp = out_path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw felogit::SchemaError("cannot write '" + tmp + "'");
    out << body;
  }
  std::filesystem::rename(tmp, out_path);
}

json ci_to_json(const felogit::ConfidenceInterval& ci) {
  return json{{"lo", ci.lo},
              {"hi", ci.hi},
              {"level", ci.level},
              {"method", ci.method}};
}

struct FitArgs {
  std::string input;
  std::string effect;
  std::string target = "ame";
  std::string method = "chebyshev";
  int ci = 0;
  double level = 0.95;
  double gamma = 0.01;
  double delta = 0.04;
  double bandwidth = 0.0;
  int ell = 1;
  std::string x0;
  std::string out;
  std::string dump_weights;
};

felogit::EffectTarget resolve_target(const FitArgs& args, int k, int p) {
  using felogit::EffectKind;
  using felogit::EffectTarget;
  if (args.target == "ame") return EffectTarget::ame(k);
  if (args.target == "att") return EffectTarget::att(k);
  if (args.target == "atu") return EffectTarget::atu(k);
  if (args.target == "ate") return EffectTarget::ate(k);
  if (args.target == "asf") {
    const std::vector<double> values = parse_number_list(args.x0);
    if (static_cast<int>(values.size()) != p) {
      throw felogit::ValidationError(
          "--x0 must provide one value per covariate column");
    }
    Eigen::VectorXd x0(p);
    for (int j = 0; j < p; ++j) x0(j) = values[static_cast<std::size_t>(j)];
    return EffectTarget::asf(x0);
  }
  throw felogit::ValidationError("unknown target '" + args.target + "'");
}

void dump_diagnostics(const felogit::BoundsEstimate& est,
                      const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw felogit::SchemaError("cannot write '" + tmp + "'");
    out << "id,s,I_hat,c0,lambda_top,q_lower,q_upper,v_lower,v_upper\n";
    for (const auto& d : est.diagnostics) {
      out << d.id << ',' << d.s << ',' << d.I_hat << ',' << d.c0 << ','
          << d.lambda_top << ',' << d.q_lower << ',' << d.q_upper << ','
          << d.v_lower << ',' << d.v_upper << '\n';
    }
  }
  std::filesystem::rename(tmp, path);
}

int run_fit(const FitArgs& args) {
  using namespace felogit;
  if (!(args.level > 0.5 && args.level < 1.0)) {
    throw ValidationError("--level must lie in (0.5, 1)");
  }
  int ci_choice = args.ci;
  if (ci_choice == 0) ci_choice = (args.method == "bounds") ? 1 : 2;
  if (args.method == "bounds" && ci_choice != 1) {
    throw ValidationError("--method bounds pairs with --ci 1");
  }
  if (args.method == "chebyshev" && ci_choice != 2 && ci_choice != 3) {
    throw ValidationError("--method chebyshev pairs with --ci 2 or 3");
  }

  const PanelDataset data = [&] {
    PanelDataset d = load_panel(args.input);
    if (!args.effect.empty()) {
      const auto it = std::find(d.covariate_names.begin(),
                                d.covariate_names.end(), args.effect);
      if (it == d.covariate_names.end()) {
        throw SchemaError("--effect column '" + args.effect + "' not found");
      }
      d.effect_index = static_cast<int>(it - d.covariate_names.begin());
    }
    return d;
  }();
  if (data.stayer_count > 0) {
    std::cerr << "note: " << data.stayer_count << " of " << data.size()
              << " units have time-constant covariates\n";
  }

  const EffectTarget target = resolve_target(args, data.effect_index, data.p);
  const double alpha = 1.0 - args.level;

  const CmleFit fit = fit_cmle(data);
  const double root_n = std::sqrt(static_cast<double>(data.size()));
  json out;
  out["command"] = "fit";
  out["input"] = args.input;
  out["n"] = data.size();
  out["target"] = args.target;
  out["method"] = args.method;
  out["effect"] = data.covariate_names[static_cast<std::size_t>(
      data.effect_index)];
  out["beta"] = std::vector<double>(fit.beta_hat.data(),
                                    fit.beta_hat.data() + fit.beta_hat.size());
  std::vector<double> se(static_cast<std::size_t>(fit.tau.size()));
  for (Eigen::Index j = 0; j < fit.tau.size(); ++j) {
    se[static_cast<std::size_t>(j)] = fit.tau(j) / root_n;
  }
  out["se"] = se;
  out["converged"] = fit.converged;
  out["iterations"] = fit.iterations;
  out["gradient_norm"] = fit.gradient_norm;

  std::cerr << "cmle: converged in " << fit.iterations
            << " iteration(s), gradient " << fit.gradient_norm << "\n";

  if (args.method == "bounds") {
    GammaOptions gopts;
    gopts.ell = args.ell;
    gopts.bandwidth_override = args.bandwidth;
    ProjectionConfig proj;
    const bool want_diag = !args.dump_weights.empty();
    const BoundsEstimate est =
        estimate_bounds(data, fit, gopts, proj, target, want_diag);
    out["lower"] = est.lower;
    out["upper"] = est.upper;
    out["sigma"] = {{est.sigma(0, 0), est.sigma(0, 1)},
                    {est.sigma(1, 0), est.sigma(1, 1)}};
    out["width_bound"] = est.width_bound;
    out["I_hat_counts"] = est.I_hat_counts;
    out["ci"] = ci_to_json(ci1(est, fit, alpha, data.effect_index));
    if (want_diag) dump_diagnostics(est, args.dump_weights);
  } else {
    const SimpleEstimate est = estimate_simple(data, fit, target);
    out["delta_hat"] = est.delta_hat;
    out["sigma_hat"] = est.sigma_hat;
    out["rbar_hat"] = est.rbar_hat;
    out["bbar_hat"] = est.bbar_hat;
    if (ci_choice == 2) {
      out["ci"] = ci_to_json(ci2(est, alpha));
    } else {
      if (std::abs(args.gamma + args.delta - alpha) > 1e-9) {
        throw ValidationError("--gamma + --delta must equal 1 - level");
      }
      out["ci"] = ci_to_json(ci3(est, fit, args.gamma, args.delta));
    }
  }
  emit(out, args.out);
  return kExitOk;
}

struct SimArgs {
  int dgp = 1;
  int T = 2;
  std::size_t n = 500;
  double beta = 1.0;
  std::size_t reps = 200;
  std::uint64_t seed = 0;
  std::string methods = "bounds,chebyshev,lpm";
  std::string out;
  double level = 0.95;
  double gamma = 0.01;
  double delta = 0.04;
};

int run_simulate(const SimArgs& args) {
  using namespace felogit;
  std::set<std::string> methods;
  {
    std::stringstream ss(args.methods);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      if (item != "bounds" && item != "chebyshev" && item != "lpm") {
        throw ValidationError("unknown method '" + item + "'");
      }
      methods.insert(item);
    }
  }
  if (methods.empty()) throw ValidationError("--methods must not be empty");

  DgpConfig cfg;
  cfg.dgp = args.dgp;
  cfg.T = args.T;
  cfg.n = args.n;
  cfg.beta0 = args.beta;
  cfg.seed = args.seed;
  cfg.reps = args.reps;

  const StudyResult result =
      run_study(cfg, methods, args.level, args.gamma, args.delta);
  std::cerr << "completed " << cfg.reps << " replications with "
            << result.failures << " failure(s)\n";
  if (args.out.empty()) {
    std::cout << "dgp,T,n,method,stat,value\n";
    for (const auto& row : result.rows) {
      std::cout << cfg.dgp << ',' << cfg.T << ',' << cfg.n << ','
                << row.method << ',' << row.stat << ',' << row.value << '\n';
    }
  } else {
    write_study_csv(result, args.out);
  }
  return kExitOk;
}

int run_qbounds(const std::string& m_text, const std::string& out_path) {
  using namespace felogit;
  const std::vector<double> values = parse_number_list(m_text);
  if (values.size() < 2) {
    throw ValidationError("--m needs at least m_0 and m_1");
  }
  const MomentVector m{std::vector<double>(values)};
  const HankelDiagnostics diag = hankel_determinants(m);
  json out;
  out["command"] = "moments qbounds";
  out["m"] = values;
  out["member"] = diag.member;
  out["lower_dets"] = diag.lower_dets;
  out["upper_dets"] = diag.upper_dets;
  if (diag.first_boundary_index) {
    out["first_boundary_index"] = *diag.first_boundary_index;
  }
  if (diag.member) {
    const ExtremalMoments ext = extremal_moments(m);
    out["q_lower"] = ext.q_lower;
    out["q_upper"] = ext.q_upper;
    out["boundary"] = ext.boundary;
  }
  emit(out, out_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Average marginal and treatment effects in fixed effects "
               "logit panels"};
  app.set_version_flag("--version", "felogit 0.1.0");
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "cap worker threads");

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "estimate an effect from a CSV");
  fit->add_option("--input", fit_args.input, "long-format CSV")->required();
  fit->add_option("--effect", fit_args.effect, "covariate column of interest");
  fit->add_option("--target", fit_args.target,
                  "ame|att|atu|ate|asf (default ame)");
  fit->add_option("--method", fit_args.method, "bounds|chebyshev");
  fit->add_option("--ci", fit_args.ci, "1 (bounds) or 2|3 (chebyshev)");
  fit->add_option("--level", fit_args.level, "confidence level");
  fit->add_option("--gamma", fit_args.gamma, "slope share of alpha for --ci 3");
  fit->add_option("--delta", fit_args.delta, "quantile share for --ci 3");
  fit->add_option("--bandwidth", fit_args.bandwidth,
                  "override the plug-in bandwidth");
  fit->add_option("--ell", fit_args.ell, "local polynomial degree");
  fit->add_option("--x0", fit_args.x0, "evaluation point for --target asf");
  fit->add_option("--out", fit_args.out, "write JSON here instead of stdout");
  fit->add_option("--dump-weights", fit_args.dump_weights,
                  "write per-observation diagnostics CSV");

  SimArgs sim_args;
  CLI::App* sim = app.add_subcommand("simulate", "run a simulation study");
  sim->add_option("--dgp", sim_args.dgp, "design 1..5")->required();
  sim->add_option("--T", sim_args.T, "periods")->required();
  sim->add_option("--n", sim_args.n, "units per replication")->required();
  sim->add_option("--beta", sim_args.beta, "true slope");
  sim->add_option("--reps", sim_args.reps, "replications");
  sim->add_option("--seed", sim_args.seed, "master seed");
  sim->add_option("--methods", sim_args.methods, "comma list");
  sim->add_option("--out", sim_args.out, "output CSV path");
  sim->add_option("--level", sim_args.level, "confidence level");

  CLI::App* moments = app.add_subcommand("moments", "moment-space tools");
  std::string m_text;
  std::string moments_out;
  CLI::App* qbounds = moments->add_subcommand(
      "qbounds", "membership diagnostics and extremal next moment");
  qbounds->add_option("--m", m_text, "comma list m_0,m_1,...")->required();
  qbounds->add_option("--out", moments_out, "write JSON here");
  moments->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  if (threads > 0) felogit::set_thread_cap(threads);

  try {
    if (*fit) return run_fit(fit_args);
    if (*sim) return run_simulate(sim_args);
    if (*qbounds) return run_qbounds(m_text, moments_out);
    std::cerr << "no subcommand selected\n";
    return kExitValidation;
  } catch (const felogit::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const felogit::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const felogit::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const felogit::Error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}
