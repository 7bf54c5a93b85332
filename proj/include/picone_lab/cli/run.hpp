#pragma once

// Config-driven experiment runner behind the picone_lab command line tool.
// A run takes a JSON config and returns a JSON report; the report payload
// (everything except wall_time_s) is a deterministic function of the config.

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "picone_lab/eigenproblem.hpp"
#include "picone_lab/errors.hpp"
#include "picone_lab/field_io.hpp"
#include "picone_lab/frames.hpp"
#include "picone_lab/grid.hpp"
#include "picone_lab/inequalities.hpp"
#include "picone_lab/lebesgue.hpp"
#include "picone_lab/linear_p2.hpp"
#include "picone_lab/parallel.hpp"
#include "picone_lab/picone.hpp"

namespace picone_lab::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "1.0.0";

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"norm",  "picone", "eigen",        "monotonicity",   "simplicity",
                                              "hardy", "caccioppoli", "logcaccioppoli", "convergence"};
  return names;
}

struct Check {
  std::string name;
  bool pass = false;
  json values = json::object();
};

namespace detail {

inline void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw InvalidInput(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw InvalidInput("unknown key '" + key + "' in " + where);
  }
}

template <class T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidInput("key '" + key + "' has the wrong type");
  }
}

inline const json& require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw InvalidInput("missing key '" + key + "' in " + where);
  return obj.at(key);
}

inline std::vector<double> number_list(const json& j, const std::string& what) {
  if (!j.is_array()) throw InvalidInput(what + " must be a list of numbers");
  std::vector<double> out;
  for (const auto& x : j) {
    if (!x.is_number()) throw InvalidInput(what + " must be a list of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline std::vector<Interval> parse_bounds(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw InvalidInput(what + " must be a list of [lo, hi] pairs");
  std::vector<Interval> out;
  for (const auto& pair : j) {
    const auto v = number_list(pair, what);
    if (v.size() != 2) throw InvalidInput(what + " entries must be [lo, hi]");
    out.push_back({v[0], v[1]});
  }
  return out;
}

// 64-bit FNV-1a, used to derive per-field seeds from names.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::vector<double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

}  // namespace detail

/// Observed order of err ~ C h^k by least squares on log-log data.
inline double fitted_order(const std::vector<double>& h, const std::vector<double>& err) {
  if (h.size() != err.size() || h.size() < 2) throw InvalidInput("order fit needs at least two levels");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!(err[i] > 0.0) || !(h[i] > 0.0)) throw NumericError("order fit needs positive errors");
    lx.push_back(std::log(h[i]));
    ly.push_back(std::log(err[i]));
  }
  return detail::fit_line(lx, ly)[0];
}

/// Grid, mask and frame of one configuration at a given resolution.
struct Setup {
  Grid grid;
  DomainMask mask;
  Frame frame;
  std::vector<DomainMask> inner;
};

class Runner {
 public:
  explicit Runner(json config, std::filesystem::path base_dir = std::filesystem::current_path())
      : cfg_(std::move(config)), base_(std::move(base_dir)) {
    detail::check_keys(cfg_,
                       {"subcommand", "frame", "grid", "mask", "masks", "exponent", "q_exponent", "weight", "u",
                        "v", "phi", "nonlinearity", "solver", "mode", "strict", "seed", "expect", "outputs",
                        "restarts", "mu_factor", "violation_factor", "samples", "lambda", "case", "scale",
                        "convergence", "identity_tol", "hypothesis_tol", "require_orthogonality"},
                       "config");
    subcommand_ = detail::get_or<std::string>(cfg_, "subcommand", "");
    if (std::find(subcommands().begin(), subcommands().end(), subcommand_) == subcommands().end()) {
      throw InvalidInput("unknown subcommand '" + subcommand_ + "'");
    }
    seed_ = detail::get_or<std::uint64_t>(cfg_, "seed", 0);
    frame_name_ = detail::get_or<std::string>(cfg_, "frame", "euclidean2");
  }

  [[nodiscard]] const json& config() const { return cfg_; }

  json run() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Check> checks;
    json results = json::object();
    if (subcommand_ == "norm") run_norm(checks, results);
    if (subcommand_ == "picone") run_picone(checks, results);
    if (subcommand_ == "eigen") run_eigen(checks, results);
    if (subcommand_ == "monotonicity") run_monotonicity(checks, results);
    if (subcommand_ == "simplicity") run_simplicity(checks, results);
    if (subcommand_ == "hardy") run_hardy(checks, results);
    if (subcommand_ == "caccioppoli") run_caccioppoli(checks, results, false);
    if (subcommand_ == "logcaccioppoli") run_caccioppoli(checks, results, true);
    if (subcommand_ == "convergence") run_convergence(checks, results);

    json report = json::object();
    report["tool"] = "picone_lab";
    report["version"] = kVersion;
    report["subcommand"] = subcommand_;
    report["config"] = cfg_;
    report["results"] = results;
    json list = json::array();
    std::size_t passed = 0;
    for (const auto& c : checks) {
      list.push_back({{"name", c.name}, {"pass", c.pass}, {"values", c.values}});
      passed += c.pass ? 1 : 0;
    }
    report["checks"] = list;
    report["summary"] = {{"total", checks.size()},
                         {"passed", passed},
                         {"failed", checks.size() - passed},
                         {"all_pass", passed == checks.size()}};
    report["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
  }

  // ---- configuration pieces -------------------------------------------------

  Setup setup(std::optional<std::vector<std::size_t>> resolution = std::nullopt) const {
    const json& gj = detail::require(cfg_, "grid", "config");
    detail::check_keys(gj, {"bounds", "n"}, "grid");
    const auto bounds = detail::parse_bounds(detail::require(gj, "bounds", "grid"), "grid.bounds");
    std::vector<std::size_t> n;
    if (resolution) {
      n = *resolution;
    } else {
      const json& nj = detail::require(gj, "n", "grid");
      if (nj.is_number_integer()) {
        n.assign(bounds.size(), nj.get<std::size_t>());
      } else if (nj.is_array()) {
        for (const auto& x : nj) {
          if (!x.is_number_integer() || x.get<long long>() < 1) throw InvalidInput("grid.n entries must be positive integers");
          n.push_back(x.get<std::size_t>());
        }
      } else {
        throw InvalidInput("grid.n must be an integer or a list of integers");
      }
    }
    Grid grid = build_grid(bounds, n);
    Frame frame = frame_by_name(frame_name_);
    if (frame.ambient_dim() != grid.dim()) {
      throw InvalidInput("frame '" + frame_name_ + "' needs a " + std::to_string(frame.ambient_dim()) + "D grid");
    }
    const auto mask_of = [&grid](const json& mj, const std::string& where) {
      detail::check_keys(mj, {"bounds"}, where);
      return rect_mask(grid, detail::parse_bounds(detail::require(mj, "bounds", where), where + ".bounds"));
    };
    DomainMask mask = cfg_.contains("mask") ? mask_of(cfg_.at("mask"), "mask") : full_mask(grid);
    std::vector<DomainMask> inner;
    if (cfg_.contains("masks")) {
      if (!cfg_.at("masks").is_array()) throw InvalidInput("masks must be a list");
      for (const auto& mj : cfg_.at("masks")) inner.push_back(mask_of(mj, "masks[]"));
    }
    return {std::move(grid), std::move(mask), std::move(frame), std::move(inner)};
  }

  std::vector<std::size_t> base_resolution() const {
    const Setup s = setup();
    return {s.grid.resolution().begin(), s.grid.resolution().begin() + static_cast<std::ptrdiff_t>(s.grid.dim())};
  }

  SolverOptions solver_options() const {
    SolverOptions o;
    o.seed = seed_;
    if (!cfg_.contains("solver")) return o;
    const json& sj = cfg_.at("solver");
    detail::check_keys(sj, {"grad_tol", "max_iter", "init", "seed"}, "solver");
    o.grad_tol = detail::get_or<double>(sj, "grad_tol", o.grad_tol);
    o.max_iter = detail::get_or<std::size_t>(sj, "max_iter", o.max_iter);
    o.seed = detail::get_or<std::uint64_t>(sj, "seed", o.seed);
    const auto init = detail::get_or<std::string>(sj, "init", "bump");
    if (init == "bump") {
      o.init = InitKind::bump;
    } else if (init == "random") {
      o.init = InitKind::random_positive;
    } else {
      throw InvalidInput("solver.init must be 'bump' or 'random'");
    }
    return o;
  }

  ExponentField exponent(const Setup& s, const std::string& key = "exponent", double fallback = 2.0) const {
    const ScalarField f =
        cfg_.contains(key) ? field(cfg_.at(key), s, key) : ScalarField(s.grid, fallback);
    return ExponentField(f, s.mask);
  }

  ScalarField weight(const Setup& s) const {
    ScalarField g = cfg_.contains("weight") ? field(cfg_.at("weight"), s, "weight") : ScalarField(s.grid, 1.0);
    return g;
  }

  Nonlinearity nonlinearity() const {
    if (!cfg_.contains("nonlinearity")) return Nonlinearity::canonical_power();
    const json& nj = cfg_.at("nonlinearity");
    detail::check_keys(nj, {"type", "path"}, "nonlinearity");
    const auto type = detail::get_or<std::string>(nj, "type", "canonical");
    if (type == "canonical") return Nonlinearity::canonical_power();
    if (type == "power+power") return Nonlinearity::power_plus_power();
    if (type == "exp") return Nonlinearity::exponential();
    if (type == "table") {
      std::ifstream in(resolve_path(detail::require(nj, "path", "nonlinearity").get<std::string>()));
      if (!in) throw InvalidInput("cannot open nonlinearity table");
      std::vector<double> y, f, fp;
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto parts = picone_lab::detail::split(line, ',');
        if (parts.size() != 3) throw InvalidInput("nonlinearity table rows must be y,f,f'");
        y.push_back(picone_lab::detail::parse_double(parts[0]));
        f.push_back(picone_lab::detail::parse_double(parts[1]));
        fp.push_back(picone_lab::detail::parse_double(parts[2]));
      }
      return Nonlinearity::from_table(y, f, fp);
    }
    throw InvalidInput("unknown nonlinearity type '" + type + "'");
  }

  /// Resolves a field spec on the setup's grid.
  ScalarField field(const json& spec, const Setup& s, const std::string& name) const {
    if (spec.is_number()) return ScalarField(s.grid, spec.get<double>());
    if (!spec.is_object()) throw InvalidInput("field '" + name + "' must be a number or an object");
    const auto type = detail::get_or<std::string>(spec, "type", "");
    const Grid& g = s.grid;
    const std::size_t d = g.dim();
    const auto coeffs = [&](const char* key) {
      std::vector<double> c = spec.contains(key) ? detail::number_list(spec.at(key), name + "." + key)
                                                 : std::vector<double>(d, 0.0);
      if (c.size() != d) throw InvalidInput("field '" + name + "': " + key + " needs one entry per axis");
      return c;
    };
    if (type == "constant") {
      detail::check_keys(spec, {"type", "value"}, name);
      return ScalarField(g, detail::require(spec, "value", name).get<double>());
    }
    if (type == "affine" || type == "quadratic") {
      detail::check_keys(spec, {"type", "c0", "coeffs"}, name);
      const double c0 = detail::get_or<double>(spec, "c0", 0.0);
      const auto c = coeffs("coeffs");
      const bool quad = type == "quadratic";
      return ScalarField::sample(g, [&](const Point& x) {
        double v = c0;
        for (std::size_t a = 0; a < d; ++a) v += c[a] * (quad ? x[a] * x[a] : x[a]);
        return v;
      });
    }
    if (type == "cosine") {
      detail::check_keys(spec, {"type", "c0", "amplitude", "freq"}, name);
      const double c0 = detail::get_or<double>(spec, "c0", 0.0);
      const double amp = detail::get_or<double>(spec, "amplitude", 1.0);
      const auto k = coeffs("freq");
      return ScalarField::sample(g, [&](const Point& x) {
        double v = amp;
        for (std::size_t a = 0; a < d; ++a) v *= std::cos(k[a] * x[a]);
        return c0 + v;
      });
    }
    if (type == "sine_product") {
      // shift + amplitude * prod sin(pi t)^power on the mask box, shift elsewhere.
      detail::check_keys(spec, {"type", "amplitude", "power", "shift"}, name);
      const double amp = detail::get_or<double>(spec, "amplitude", 1.0);
      const double power = detail::get_or<double>(spec, "power", 1.0);
      const double shift = detail::get_or<double>(spec, "shift", 0.0);
      const auto box = mask_box(s.mask);
      ScalarField out(g, shift);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!s.mask.is_interior(i)) continue;
        const Point x = g.point(i);
        double v = 1.0;
        for (std::size_t a = 0; a < d; ++a) v *= std::sin(M_PI * (x[a] - box[a].lo) / (box[a].hi - box[a].lo));
        out.values[i] += amp * std::pow(std::max(v, 0.0), power);
      }
      return out;
    }
    if (type == "random") {
      detail::check_keys(spec, {"type", "lo", "hi", "seed"}, name);
      const double lo = detail::get_or<double>(spec, "lo", 0.5);
      const double hi = detail::get_or<double>(spec, "hi", 1.5);
      if (!(hi >= lo)) throw InvalidInput("field '" + name + "': random needs lo <= hi");
      std::mt19937_64 rng(detail::get_or<std::uint64_t>(spec, "seed", seed_ ^ detail::fnv1a(name)));
      std::uniform_real_distribution<double> dist(lo, hi);
      ScalarField out(g);
      for (double& v : out.values) v = dist(rng);
      return out;
    }
    if (type == "csv") {
      detail::check_keys(spec, {"type", "path"}, name);
      ScalarField f = read_field_csv(resolve_path(detail::require(spec, "path", name).get<std::string>()));
      require_same_grid(f.grid, g, "csv field");
      return f;
    }
    if (type == "eigenfunction") {
      detail::check_keys(spec, {"type", "shift"}, name);
      const auto r = minimize_principal(exponent(s), weight(s), s.frame, s.mask, solver_options());
      if (!r.converged) throw NumericError("eigenfunction for field '" + name + "' did not converge");
      ScalarField out = r.eigenfunction;
      const double shift = detail::get_or<double>(spec, "shift", 0.0);
      for (double& v : out.values) v += shift;
      return out;
    }
    if (type == "torsion" || type == "harmonic") {
      detail::check_keys(spec, {"type", "boundary", "shift"}, name);
      const CornerGradient op(s.frame, s.mask);
      const ScalarField rhs(g, type == "torsion" ? 1.0 : 0.0);
      const ScalarField b = spec.contains("boundary") ? field(spec.at("boundary"), s, name + ".boundary")
                                                      : ScalarField(g, 0.0);
      ScalarField out = solve_p2_dirichlet(op, rhs, b);
      const double shift = detail::get_or<double>(spec, "shift", 0.0);
      for (double& v : out.values) v += shift;
      return out;
    }
    throw InvalidInput("field '" + name + "' has unknown type '" + type + "'");
  }

  ScalarField named_field(const std::string& key, const Setup& s) const {
    return field(detail::require(cfg_, key, "config"), s, key);
  }

  bool strict() const { return detail::get_or<bool>(cfg_, "strict", false); }

 private:
  static std::vector<Interval> mask_box(const DomainMask& mask) {
    const Grid& g = mask.grid();
    std::vector<Interval> box(g.dim(), Interval{std::numeric_limits<double>::infinity(),
                                                -std::numeric_limits<double>::infinity()});
    for (std::size_t i : mask.domain_nodes()) {
      const Point x = g.point(i);
      for (std::size_t a = 0; a < g.dim(); ++a) {
        box[a].lo = std::min(box[a].lo, x[a]);
        box[a].hi = std::max(box[a].hi, x[a]);
      }
    }
    return box;
  }

  std::filesystem::path resolve_path(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_ / path;
  }

  const json& outputs() const {
    static const json empty = json::object();
    if (!cfg_.contains("outputs")) return empty;
    detail::check_keys(cfg_.at("outputs"), {"report", "eigenfunction_csv", "fields_dir"}, "outputs");
    return cfg_.at("outputs");
  }

  void dump_fields(const std::vector<std::pair<std::string, const ScalarField*>>& fields) const {
    const auto dir = detail::get_or<std::string>(outputs(), "fields_dir", "");
    if (dir.empty()) return;
    const auto path = resolve_path(dir);
    std::filesystem::create_directories(path);
    for (const auto& [name, f] : fields) write_field_csv(path / (name + ".csv"), *f);
  }

  static json eigen_json(const EigenResult& r) {
    return {{"lambda", r.lambda},         {"iterations", r.iterations}, {"residual", r.residual},
            {"converged", r.converged},   {"status", r.status},         {"small_lambda", r.small_lambda}};
  }

  // ---- subcommands ----------------------------------------------------------

  void run_norm(std::vector<Check>& checks, json& results) const {
    const Setup s = setup();
    const ExponentField p = exponent(s);
    const ScalarField u = named_field("u", s);
    const auto rel = norm_modular_relations(u, p, s.mask);
    results["modular"] = rel.modular;
    results["norm"] = rel.norm;
    checks.push_back({"sign_agreement", rel.sign_agreement, {{"norm", rel.norm}, {"modular", rel.modular}}});
    checks.push_back({"unit_ball_bounds", rel.unit_ball_bounds,
                      {{"norm", rel.norm}, {"modular", rel.modular}, {"pminus", p.pminus()}, {"pplus", p.pplus()}}});
    checks.push_back({"outside_ball_bounds", rel.outside_ball_bounds,
                      {{"norm", rel.norm}, {"modular", rel.modular}, {"pminus", p.pminus()}, {"pplus", p.pplus()}}});
    checks.push_back({"sandwich", rel.sandwich,
                      {{"norm", rel.norm}, {"modular", rel.modular}, {"pminus", p.pminus()}, {"pplus", p.pplus()}}});
    if (rel.norm > 0.0) {
      const double rho1 = modular(u, p, s.mask, 1.0 / rel.norm);
      checks.push_back({"normalization", std::abs(rho1 - 1.0) <= 1e-9, {{"modular_of_normalized", rho1}, {"tol", 1e-9}}});
      const double c = detail::get_or<double>(cfg_, "scale", 2.5);
      ScalarField cu = u;
      for (double& x : cu.values) x *= c;
      const double ncu = luxemburg_norm(cu, p, s.mask);
      const double expected = std::abs(c) * rel.norm;
      checks.push_back({"homogeneity", std::abs(ncu - expected) <= 1e-9 * std::max(1.0, expected),
                        {{"scale", c}, {"norm_scaled", ncu}, {"expected", expected}, {"tol", 1e-9}}});
    }
    if (cfg_.contains("v")) {
      const ScalarField v = named_field("v", s);
      const auto h = holder_check(u, v, p, s.mask);
      checks.push_back({"holder", h.holds, {{"lhs", h.lhs}, {"rhs", h.rhs}, {"constant", h.constant}}});
      dump_fields({{"u", &u}, {"v", &v}, {"p", &p.field()}});
    } else {
      dump_fields({{"u", &u}, {"p", &p.field()}});
    }
  }

  PiconeMode mode() const {
    const auto m = detail::get_or<std::string>(cfg_, "mode", "algebraic");
    if (m == "algebraic") return PiconeMode::algebraic;
    if (m == "discrete") return PiconeMode::discrete;
    throw InvalidInput("mode must be 'algebraic' or 'discrete'");
  }

  void run_picone(std::vector<Check>& checks, json& results) const {
    const Setup s = setup();
    const ExponentField p = exponent(s);
    const ScalarField u = named_field("u", s);
    const ScalarField v = named_field("v", s);
    const Nonlinearity nl = nonlinearity();
    const PiconeMode md = mode();
    const NodalGradient op(s.frame, s.mask);
    const auto b = picone_evaluate(u, v, p, nl, op, md);
    const auto eq = equality_case_detect(b, u, v, op);
    std::vector<double> samples;
    for (std::size_t i : s.mask.interior_nodes()) {
      if (v.values[i] > 0.0) samples.push_back(v.values[i]);
    }
    const auto adm = admissibility_check(nl, p, s.mask, samples);
    const double defect = orthogonality_defect(op, v, p.field());
    results["identity_residual"] = b.identity_residual;
    results["decomposition_residual"] = b.decomposition_residual;
    results["min_L"] = b.min_L;
    results["equality_locus_fraction"] = b.equality_locus_fraction;
    results["max_ratio_gradient"] = eq.max_ratio_gradient;
    results["orthogonality_defect"] = defect;
    results["admissible"] = adm.admissible;

    const double id_tol = detail::get_or<double>(cfg_, "identity_tol", md == PiconeMode::algebraic ? 1e-12 : -1.0);
    json id_values = json::object();
    id_values["residual"] = b.identity_residual;
    id_values["tol"] = id_tol < 0.0 ? json(nullptr) : json(id_tol);
    id_values["mode"] = md == PiconeMode::algebraic ? "algebraic" : "discrete";
    const bool id_ok = id_tol < 0.0 ? std::isfinite(b.identity_residual) : b.identity_residual <= id_tol;
    checks.push_back({"identity", id_ok, id_values});
    checks.push_back({"decomposition", b.decomposition_residual <= 1e-12,
                      {{"residual", b.decomposition_residual}, {"tol", 1e-12}}});
    const bool applicable = defect <= 1e-12 && adm.admissible;
    checks.push_back({"nonnegativity", !applicable || b.min_L >= -1e-10,
                      {{"min_L", b.min_L}, {"tol", -1e-10}, {"applicable", applicable},
                       {"orthogonality_defect", defect}, {"admissible", adm.admissible}}});
    checks.push_back({"equality_characterization", eq.consistent,
                      {{"equality_locus_fraction", b.equality_locus_fraction},
                       {"max_ratio_gradient", eq.max_ratio_gradient},
                       {"locus_is_everything", eq.locus_is_everything},
                       {"ratio_is_constant", eq.ratio_is_constant}}});
    dump_fields({{"u", &u}, {"v", &v}, {"p", &p.field()}, {"L", &b.L}, {"R", &b.R}});
  }

  void check_expectation(std::vector<Check>& checks, double lambda) const {
    if (!cfg_.contains("expect")) return;
    const json& ej = cfg_.at("expect");
    detail::check_keys(ej, {"lambda", "rel_tol"}, "expect");
    const double target = detail::require(ej, "lambda", "expect").get<double>();
    const double tol = detail::get_or<double>(ej, "rel_tol", 1e-2);
    const double rel = std::abs(lambda - target) / std::abs(target);
    checks.push_back({"lambda_target", rel <= tol,
                      {{"lambda", lambda}, {"target", target}, {"relative_error", rel}, {"tol", tol}}});
  }

  static bool history_monotone(const std::vector<double>& h) {
    for (std::size_t k = 1; k < h.size(); ++k) {
      if (h[k] > h[k - 1]) return false;
    }
    return true;
  }

  void run_eigen(std::vector<Check>& checks, json& results) const {
    const Setup s = setup();
    const ExponentField p = exponent(s);
    const ScalarField g = weight(s);
    const SolverOptions opts = solver_options();
    const auto r = minimize_principal(p, g, s.frame, s.mask, opts);
    results = eigen_json(r);
    checks.push_back({"converged", r.converged,
                      {{"residual", r.residual}, {"grad_tol", opts.grad_tol}, {"iterations", r.iterations}}});
    checks.push_back({"quotient_history_monotone", history_monotone(r.quotient_history),
                      {{"history_length", r.quotient_history.size()}}});
    check_expectation(checks, r.lambda);
    if (p.is_constant() && p.pminus() == 2.0) {
      const auto lin = linear_oracle_p2(CornerGradient(s.frame, s.mask), g);
      const double rel = std::abs(r.lambda - lin.lambda1) / lin.lambda1;
      results["oracle_lambda1"] = lin.lambda1;
      results["oracle_lambda2"] = lin.lambda2;
      checks.push_back({"linear_oracle", rel <= 5e-3, {{"lambda", r.lambda}, {"oracle", lin.lambda1},
                                                      {"relative_error", rel}, {"tol", 5e-3}}});
    }
    const auto csv = detail::get_or<std::string>(outputs(), "eigenfunction_csv", "");
    if (!csv.empty()) {
      write_field_csv(resolve_path(csv), r.eigenfunction);
      results["eigenfunction_csv"] = resolve_path(csv).string();
    }
    dump_fields({{"eigenfunction", &r.eigenfunction}, {"p", &p.field()}, {"g", &g}});
  }

  void run_monotonicity(std::vector<Check>& checks, json& results) const {
    const Setup s = setup();
    if (s.inner.empty()) throw InvalidInput("monotonicity needs 'masks' listing the inner domains");
    const SolverOptions opts = solver_options();
    const auto rep = domain_monotonicity_experiment(exponent(s), weight(s), s.frame, s.mask, s.inner, opts);
    results["lambdas"] = rep.lambdas;
    results["min_relative_gap"] = rep.min_relative_gap;
    bool all_converged = true;
    for (bool c : rep.converged) all_converged = all_converged && c;
    checks.push_back({"all_converged", all_converged, {{"converged", rep.converged}}});
    checks.push_back({"strictly_decreasing", rep.strictly_decreasing && rep.min_relative_gap > 10.0 * opts.grad_tol,
                      {{"lambdas", rep.lambdas},
                       {"min_relative_gap", rep.min_relative_gap},
                       {"required_gap", 10.0 * opts.grad_tol}}});
  }

  void run_simplicity(std::vector<Check>& checks, json& results) const {
    const Setup s = setup();
    const auto restarts = detail::get_or<std::size_t>(cfg_, "restarts", 5);
    const SolverOptions opts = solver_options();
    const auto rep = simplicity_experiment(exponent(s), weight(s), s.frame, s.mask, restarts, opts.seed, opts);
    results["lambdas"] = rep.lambdas;
    results["lambda_deviation"] = rep.lambda_deviation;
    results["eigenfunction_deviation"] = rep.eigenfunction_deviation;
    checks.push_back({"all_converged", rep.all_converged, json::object()});
    checks.push_back({"lambda_agreement", rep.lambda_deviation <= 1e-3,
                      {{"deviation", rep.lambda_deviation}, {"tol", 1e-3}}});
    checks.push_back({"eigenfunction_agreement", rep.eigenfunction_deviation <= 1e-3,
                      {{"deviation", rep.eigenfunction_deviation}, {"tol", 1e-3}}});
  }

  // Random nonnegative test field vanishing off the interior, normalized to
  // int g |u|^p = 1: a smooth positive profile times a random positive
  // low-frequency modulation.
  static ScalarField hardy_sample(const RayleighProblem& rp, std::mt19937_64& rng) {
    const Grid& g = rp.mask().grid();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto box = mask_box(rp.mask());
    std::array<double, kMaxDim> power{};
    std::array<double, kMaxDim> phase{};
    std::array<double, kMaxDim> freq{};
    for (std::size_t a = 0; a < g.dim(); ++a) {
      power[a] = 0.5 + 2.5 * unit(rng);
      phase[a] = 2.0 * M_PI * unit(rng);
      freq[a] = 1.0 + 3.0 * unit(rng);
    }
    const double depth = 0.9 * unit(rng);
    ScalarField u(g);
    for (std::size_t i : rp.mask().interior_nodes()) {
      const Point x = g.point(i);
      double v = 1.0;
      double mod = 0.0;
      for (std::size_t a = 0; a < g.dim(); ++a) {
        const double t = (x[a] - box[a].lo) / (box[a].hi - box[a].lo);
        v *= std::pow(std::sin(M_PI * t), power[a]);
        mod += std::sin(freq[a] * M_PI * t + phase[a]);
      }
      u.values[i] = v * (1.0 + depth * mod / static_cast<double>(g.dim()));
    }
    Vector x = rp.index().gather(u.values);
    picone_lab::detail::normalize(rp, x);
    return rp.index().scatter(x, g);
  }

  void run_hardy(std::vector<Check>& checks, json& results) const {
    const Setup s = setup();
    const ExponentField p = exponent(s);
    const ScalarField g = weight(s);
    const auto r = minimize_principal(p, g, s.frame, s.mask, solver_options());
    if (!r.converged) throw NumericError("eigensolver did not converge for the Hardy check");
    const double mu = detail::get_or<double>(cfg_, "mu_factor", 0.999) * r.lambda;
    const double mu_bad = detail::get_or<double>(cfg_, "violation_factor", 1.05) * r.lambda;
    const auto samples = detail::get_or<std::size_t>(cfg_, "samples", 100);
    results["lambda"] = r.lambda;
    results["mu"] = mu;

    const RayleighProblem rp(s.frame, s.mask, p, g);
    std::mt19937_64 rng(seed_ ^ detail::fnv1a("hardy"));
    std::size_t held = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < samples; ++k) {
      const ScalarField u = hardy_sample(rp, rng);
      const auto rep = hardy_verify(u, p, g, mu, s.frame, s.mask);
      held += rep.holds ? 1 : 0;
      min_slack = std::min(min_slack, rep.slack);
    }
    checks.push_back({"random_fields_hold", held == samples,
                      {{"samples", samples}, {"held", held}, {"min_slack", samples ? json(min_slack) : json(nullptr)}}});
    const auto at_eig = hardy_verify(r.eigenfunction, p, g, mu, s.frame, s.mask);
    checks.push_back({"eigenfunction_holds", at_eig.holds,
                      {{"lhs", at_eig.lhs}, {"rhs", at_eig.rhs}, {"slack", at_eig.slack}}});
    const auto bad = hardy_verify(r.eigenfunction, p, g, mu_bad, s.frame, s.mask);
    checks.push_back({"violation_detected", !bad.holds,
                      {{"mu", mu_bad}, {"lhs", bad.lhs}, {"rhs", bad.rhs}, {"slack", bad.slack}}});
  }

  SolutionKind solution_kind() const {
    const auto c = detail::get_or<std::string>(cfg_, "case", "sub");
    if (c == "sub") return SolutionKind::sub;
    if (c == "sup") return SolutionKind::sup;
    throw InvalidInput("case must be 'sub' or 'sup'");
  }

  double lambda_value(const Setup& s) const {
    if (!cfg_.contains("lambda")) return 0.0;
    const json& lj = cfg_.at("lambda");
    if (lj.is_number()) return lj.get<double>();
    if (lj.is_string() && lj.get<std::string>() == "principal") {
      const auto r = minimize_principal(exponent(s), weight(s), s.frame, s.mask, solver_options());
      if (!r.converged) throw NumericError("eigensolver did not converge for lambda = principal");
      return r.lambda;
    }
    throw InvalidInput("lambda must be a number or \"principal\"");
  }

  InequalityReport caccioppoli_at(const Setup& s, bool log_form) const {
    const ExponentField p = exponent(s);
    const ScalarField g = weight(s);
    const ScalarField v = named_field("v", s);
    const ScalarField phi = named_field("phi", s);
    const double lambda = lambda_value(s);
    CaccioppoliOptions o;
    o.hypothesis_tol = detail::get_or<double>(cfg_, "hypothesis_tol", o.hypothesis_tol);
    o.require_orthogonality = detail::get_or<bool>(cfg_, "require_orthogonality", true);
    if (log_form) return log_caccioppoli_verify(v, phi, p, s.frame, s.mask, lambda, g, o);
    const ScalarField q = cfg_.contains("q_exponent") ? field(cfg_.at("q_exponent"), s, "q_exponent") : p.field();
    return caccioppoli_verify(v, phi, p, q, lambda, g, s.frame, s.mask, solution_kind(), o);
  }

  void run_caccioppoli(std::vector<Check>& checks, json& results, bool log_form) const {
    const Setup s = setup();
    auto rep = caccioppoli_at(s, log_form);
    double allowance = 0.0;
    if (strict()) {
      std::vector<std::size_t> coarse;
      for (std::size_t a = 0; a < s.grid.dim(); ++a) {
        const std::size_t n = s.grid.resolution()[a];
        if (n % 2 == 0) throw InvalidInput("strict mode needs odd resolutions");
        coarse.push_back((n + 1) / 2);
      }
      const auto crep = caccioppoli_at(setup(coarse), log_form);
      allowance = std::abs(rep.slack - crep.slack) / 3.0;
      results["coarse_slack"] = crep.slack;
    }
    const bool holds = rep.slack >= -(kInequalityRelTol * std::abs(rep.rhs) + rep.abs_tol + allowance);
    results["lhs"] = rep.lhs;
    results["rhs"] = rep.rhs;
    if (!rep.note.empty()) results["note"] = rep.note;
    checks.push_back({rep.case_label, holds,
                      {{"lhs", rep.lhs},
                       {"rhs", rep.rhs},
                       {"slack", rep.slack},
                       {"constant", rep.constant_used},
                       {"abs_tol", rep.abs_tol},
                       {"rel_tol", kInequalityRelTol},
                       {"discretization_allowance", allowance}}});
  }

  void run_convergence(std::vector<Check>& checks, json& results) const {
    const json cj = cfg_.contains("convergence") ? cfg_.at("convergence") : json::object();
    detail::check_keys(cj, {"check", "base_n", "levels", "order_range"}, "convergence");
    const auto kind = detail::get_or<std::string>(cj, "check", "quadrature");
    const auto levels = detail::get_or<std::size_t>(cj, "levels", 3);
    if (levels < 2) throw InvalidInput("convergence needs at least two levels");
    std::vector<std::size_t> base = base_resolution();
    if (cj.contains("base_n")) base.assign(base.size(), cj.at("base_n").get<std::size_t>());
    std::vector<double> range{1.8, 2.2};
    if (cj.contains("order_range")) range = detail::number_list(cj.at("order_range"), "order_range");
    if (range.size() != 2) throw InvalidInput("order_range must be [lo, hi]");

    std::vector<double> hs, errs;
    for (std::size_t l = 0; l < levels; ++l) {
      std::vector<std::size_t> n = base;
      for (auto& k : n) k = (k - 1) * (std::size_t{1} << l) + 1;
      const Setup s = setup(n);
      double err = 0.0;
      if (kind == "quadrature") {
        // Trapezoid error of sum_a x_a^2 over the mask box.
        const ScalarField f = ScalarField::sample(s.grid, [&](const Point& x) {
          double v = 0.0;
          for (std::size_t a = 0; a < s.grid.dim(); ++a) v += x[a] * x[a];
          return v;
        });
        const auto box = mask_box(s.mask);
        double exact = 0.0;
        for (std::size_t a = 0; a < s.grid.dim(); ++a) {
          double term = (std::pow(box[a].hi, 3) - std::pow(box[a].lo, 3)) / 3.0;
          for (std::size_t b = 0; b < s.grid.dim(); ++b) {
            if (b != a) term *= box[b].hi - box[b].lo;
          }
          exact += term;
        }
        err = std::abs(integrate(f, s.mask) - exact);
      } else if (kind == "picone") {
        const auto b = picone_evaluate(named_field("u", s), named_field("v", s), exponent(s), nonlinearity(), s.frame,
                                       s.mask, PiconeMode::discrete);
        err = b.identity_residual;
      } else if (kind == "eigen") {
        const auto r = minimize_principal(exponent(s), weight(s), s.frame, s.mask, solver_options());
        if (!r.converged) throw NumericError("eigensolver did not converge at level " + std::to_string(l));
        const json& ej = detail::require(cfg_, "expect", "config");
        err = std::abs(r.lambda - detail::require(ej, "lambda", "expect").get<double>());
      } else {
        throw InvalidInput("convergence.check must be quadrature, picone or eigen");
      }
      hs.push_back(s.grid.spacing(0));
      errs.push_back(err);
    }
    const double order = fitted_order(hs, errs);
    results["h"] = hs;
    results["errors"] = errs;
    results["order"] = order;
    checks.push_back({kind + "_order", order >= range[0] && order <= range[1],
                      {{"order", order}, {"range", range}, {"h", hs}, {"errors", errs}}});
  }

  json cfg_;
  std::filesystem::path base_;
  std::string subcommand_;
  std::uint64_t seed_ = 0;
  std::string frame_name_;
};

/// Applies command-line overrides to a config document.
struct Overrides {
  std::optional<std::string> subcommand;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> frame;
  std::optional<std::string> mode;
  bool strict = false;
};

inline json apply_overrides(json cfg, const Overrides& o) {
  if (cfg.is_null()) cfg = json::object();
  if (!cfg.is_object()) throw InvalidInput("config must be a JSON object");
  if (o.subcommand) {
    if (cfg.contains("subcommand") && cfg.at("subcommand") != *o.subcommand) {
      throw InvalidInput("config subcommand '" + cfg.at("subcommand").get<std::string>() +
                         "' does not match '" + *o.subcommand + "'");
    }
    cfg["subcommand"] = *o.subcommand;
  }
  if (o.seed) cfg["seed"] = *o.seed;
  if (o.frame) cfg["frame"] = *o.frame;
  if (o.mode) cfg["mode"] = *o.mode;
  if (o.strict) cfg["strict"] = true;
  if (o.out) cfg["outputs"]["report"] = *o.out;
  return cfg;
}

/// Report without the wall-clock entry, the part that must be reproducible.
inline json payload(json report) {
  report.erase("wall_time_s");
  return report;
}

}  // namespace picone_lab::cli
