#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>

#include "ncenter/kepler.hpp"
#include "ncenter/minimize.hpp"
#include "ncenter/regularize.hpp"
#include "ncenter/topology.hpp"

#ifndef NCENTER_VERSION
#define NCENTER_VERSION "unknown"
#endif

namespace ncenter::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using std::numbers::pi;

struct UsageFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    json raw;
    std::optional<CenterSystem> sys;
    double alpha = 1.5;
    double period = 2.0 * pi;
    std::string word;
    std::size_t n = 256;
    MinimizeOptions optimizer;
    std::uint64_t seed = 0;

    const CenterSystem& centers() const {
        if (!sys) throw UsageFailure("config: this subcommand needs \"centers\"");
        return *sys;
    }
    json section(const char* name) const {
        return raw.contains(name) ? raw.at(name) : json::object();
    }
};

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
    return obj.contains(key) ? obj.at(key).get<T>() : fallback;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageFailure("cannot read config file " + path);
    RunConfig cfg;
    cfg.raw = json::parse(in);
    if (!cfg.raw.is_object()) throw UsageFailure("config: top level must be an object");
    const json& r = cfg.raw;
    cfg.alpha = get_or(r, "alpha", cfg.alpha);
    cfg.period = get_or(r, "period", cfg.period);
    cfg.word = get_or(r, "word", cfg.word);
    cfg.n = get_or(r, "n", cfg.n);
    cfg.seed = get_or(r, "seed", cfg.seed);
    if (r.contains("centers")) {
        std::vector<double> masses;
        std::vector<Vec2> positions;
        for (const json& c : r.at("centers")) {
            if (c.is_array()) {
                if (c.size() != 3) throw UsageFailure("config: a center is [mass, x, y]");
                masses.push_back(c[0].get<double>());
                positions.emplace_back(c[1].get<double>(), c[2].get<double>());
            } else {
                masses.push_back(c.at("mass").get<double>());
                positions.emplace_back(c.at("x").get<double>(), c.at("y").get<double>());
            }
        }
        cfg.sys.emplace(std::move(masses), std::move(positions), cfg.alpha);
    }
    MinimizeOptions& o = cfg.optimizer;
    const json opt = cfg.section("optimizer");
    o.max_iters = get_or(opt, "max_iters", o.max_iters);
    o.grad_tol = get_or(opt, "grad_tol", o.grad_tol);
    o.restarts = get_or(opt, "restarts", o.restarts);
    o.perturbation = get_or(opt, "perturbation", o.perturbation);
    o.collision_radius = get_or(opt, "collision_radius", o.collision_radius);
    o.max_nodes = get_or(opt, "max_nodes", o.max_nodes);
    o.eom_tol = get_or(opt, "eom_tol", o.eom_tol);
    o.symmetry_tol = get_or(opt, "symmetry_tol", o.symmetry_tol);
    return cfg;
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

// Every artifact goes through here so the manifest can list it.
struct Output {
    fs::path dir;
    json files = json::array();

    void write(const std::string& name, const std::string& content) {
        std::ofstream f(dir / name, std::ios::binary);
        f << content;
        if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
        files.push_back({{"name", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
    }
};

std::string arc_csv(const OpenArc& arc) {
    std::ostringstream os;
    os << "t,x,y,vx,vy\n" << std::setprecision(17);
    for (std::size_t i = 0; i < arc.size(); ++i) {
        const Vec2 v = arc.has_velocities() ? arc.velocities[i] : Vec2(NAN, NAN);
        os << arc.times[i] << ',' << arc.points[i].real() << ',' << arc.points[i].imag() << ',' << v.real() << ','
           << v.imag() << '\n';
    }
    return os.str();
}

struct Path {
    std::vector<Vec2> points;
    bool closed = false;
};

std::string svg_plot(const std::vector<Path>& paths, const std::vector<Vec2>& centers) {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    auto grow = [&](Vec2 p) {
        x0 = std::min(x0, p.real()), x1 = std::max(x1, p.real());
        y0 = std::min(y0, p.imag()), y1 = std::max(y1, p.imag());
    };
    for (const Path& p : paths)
        for (Vec2 q : p.points) grow(q);
    for (Vec2 c : centers) grow(c);
    const double span = std::max({x1 - x0, y1 - y0, 1e-12});
    const double pad = 0.05 * span, size = 640.0, scale = size / (span + 2 * pad);
    const double W = (x1 - x0 + 2 * pad) * scale, H = (y1 - y0 + 2 * pad) * scale;
    auto px = [&](Vec2 p) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3f,%.3f", (p.real() - x0 + pad) * scale, (y1 + pad - p.imag()) * scale);
        return std::string(buf);
    };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    std::ostringstream os;
    char head[160];
    std::snprintf(head, sizeof head,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.3f %.3f\">\n",
                  std::ceil(W), std::ceil(H), W, H);
    os << head << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < paths.size(); ++i) {
        os << '<' << (paths[i].closed ? "polygon" : "polyline") << " fill=\"none\" stroke=\"" << colors[i % 4]
           << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < paths[i].points.size(); ++k) os << (k ? " " : "") << px(paths[i].points[k]);
        os << "\"/>\n";
    }
    for (Vec2 c : centers) {
        const std::string p = px(c);
        const auto comma = p.find(',');
        os << "<circle cx=\"" << p.substr(0, comma) << "\" cy=\"" << p.substr(comma + 1) << "\" r=\"4\" fill=\"black\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

topology::HomotopyWord nontrivial_word(const RunConfig& cfg) {
    const auto w = topology::parse_word(cfg.word, cfg.centers().size());
    if (w.empty()) throw UsageFailure("word \"" + cfg.word + "\" is trivial (reduces to the empty word)");
    return w;
}

std::string centers_1based(const std::vector<std::size_t>& idx) {
    std::string s;
    for (std::size_t j : idx) s += (s.empty() ? "c" : ", c") + std::to_string(j + 1);
    return s.empty() ? "no center" : s;
}

int cmd_solve(const RunConfig& cfg, std::uint64_t seed, Output& out, json& summary, std::ostream& err) {
    const CenterSystem& sys = cfg.centers();
    const auto w = nontrivial_word(cfg);
    const auto adm = topology::is_admissible(w, sys);
    if (!adm.admissible)
        err << "warning: class " << w.str() << " is not admissible; degenerate outcomes are possible\n";
    MinimizeOptions opts = cfg.optimizer;
    opts.nodes = cfg.n;
    opts.seed = seed;
    const auto res = multistart(w, sys, cfg.period, opts);

    json runs = json::array();
    bool any_finite = false;
    for (const auto& r : res.runs) {
        any_finite |= !r.failed && std::isfinite(r.action_value);
        runs.push_back({{"run", r.run},
                        {"status", to_string(r.status)},
                        {"action", r.action_value},
                        {"eom_residual", r.eom_residual},
                        {"min_distance", r.min_distance},
                        {"iterations", r.iterations},
                        {"failed", r.failed},
                        {"error", r.error}});
    }
    const MinimizeOutcome& best = res.best;
    json outcome = {{"word", w.str()}, {"admissible", adm.admissible}};
    if (any_finite) {
        outcome["status"] = to_string(best.status);
        outcome["action"] = best.action_value;
        outcome["eom_residual"] = best.eom_residual;
        outcome["energy_drift"] = best.energy_drift;
        outcome["min_distance"] = best.min_distance;
        outcome["iterations"] = best.iterations;
        outcome["class_check"] = best.class_check.str();
        outcome["word_preserved"] = best.class_check == w;
        try {
            outcome["winding"] = topology::winding_vector(best.loop, sys).entries;
        } catch (const Error& e) {
            outcome["winding"] = nullptr;
        }
        if (best.reflection)
            outcome["reflection"] = {{"k1", best.reflection->k1 + 1},
                                     {"k2", best.reflection->k2 + 1},
                                     {"Tbar", best.reflection->Tbar},
                                     {"off_winding", best.reflection->off_winding}};
        else
            outcome["reflection"] = nullptr;
    } else {
        outcome["status"] = "NoFiniteRun";
    }
    outcome["runs"] = runs;

    if (any_finite) {
        OpenArc arc = loop_to_arc(best.loop);
        arc.times.pop_back(), arc.points.pop_back(), arc.velocities.pop_back();
        out.write("loop.csv", arc_csv(arc));
        out.write("trajectory.svg", svg_plot({{best.loop.nodes, true}}, sys.positions()));
    }
    out.write("outcome.json", outcome.dump(2) + "\n");
    summary = {{"status", outcome["status"]}, {"action", any_finite ? json(best.action_value) : json(nullptr)}};
    return any_finite ? Success : ToleranceFailure;
}

int cmd_admissible(const RunConfig& cfg, Output& out, json& summary, std::ostream& os) {
    const CenterSystem& sys = cfg.centers();
    const auto w = nontrivial_word(cfg);
    const auto adm = topology::is_admissible(w, sys, true);
    json report = {{"word", w.str()}, {"admissible", adm.admissible}};
    os << (adm.admissible ? "admissible" : "inadmissible") << "\nreduced word: " << w.str() << '\n';
    if (adm.witness) {
        const auto& s = adm.witness->enclosed_centers;
        os << "witness: innermost sub-loop from segment " << adm.witness->first_segment << " to segment "
           << adm.witness->last_segment << " enclosing " << centers_1based(s) << '\n';
        std::vector<std::size_t> one_based;
        for (std::size_t j : s) one_based.push_back(j + 1);
        report["witness"] = {{"first_segment", adm.witness->first_segment},
                             {"last_segment", adm.witness->last_segment},
                             {"enclosed_centers", one_based}};
    } else {
        report["witness"] = nullptr;
    }
    if (adm.cross_check_agrees) report["cross_check_agrees"] = *adm.cross_check_agrees;
    out.write("outcome.json", report.dump(2) + "\n");
    out.write("trajectory.svg", svg_plot({{adm.representative.nodes, true}}, sys.positions()));
    summary = {{"admissible", adm.admissible}};
    return Success;
}

int cmd_obstacle_sweep(const RunConfig& cfg, Output& out, json& summary, std::ostream& os) {
    const json s = cfg.section("obstacle_sweep");
    const auto alphas = get_or(s, "alphas", std::vector<double>{1.0, 1.25, 1.5, 1.75});
    std::vector<double> ratios;
    if (s.contains("ratios")) {
        ratios = s.at("ratios").get<std::vector<double>>();
    } else {
        const double lo = get_or(s, "ratio_min", 0.05), hi = get_or(s, "ratio_max", 0.95);
        const int count = get_or(s, "ratio_count", 20);
        if (count < 2) throw UsageFailure("obstacle_sweep: ratio_count must be at least 2");
        for (int i = 0; i < count; ++i) ratios.push_back(lo + (hi - lo) * i / (count - 1));
    }
    if (alphas.empty() || ratios.empty()) throw UsageFailure("obstacle_sweep: empty grid");
    for (double a : alphas)
        if (!(a >= 1.0 && a < 2.0)) throw UsageFailure("obstacle_sweep: alpha outside [1, 2)");
    for (double q : ratios)
        if (!(q > 0.0 && q <= 1.0)) throw UsageFailure("obstacle_sweep: rho / r* outside (0, 1]");
    const double tol = get_or(s, "tolerance", 1e-6);

    const auto rows = kepler::sweep_table(alphas, ratios, get_or(s, "m1", 1.0));
    std::ostringstream csv;
    kepler::write_sweep_csv(csv, rows);
    out.write("sweep.csv", csv.str());

    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, r.abs_err);
    // Total sweep of both grazing halves as rho -> 0, against 2 pi / (2 - alpha).
    json limits = json::array();
    for (double a : alphas)
        limits.push_back({{"alpha", a},
                          {"rho_over_rstar", 1e-4},
                          {"total_sweep", 2.0 * kepler::angular_sweep(1e-4, 1.0, a)},
                          {"limit", 2.0 * pi / (2.0 - a)}});
    summary = {{"rows", rows.size()}, {"max_abs_err", worst}, {"tolerance", tol}, {"small_rho_totals", limits}};
    os << "max |closed - numeric| = " << worst << " over " << rows.size() << " rows\n";
    return worst <= tol ? Success : ToleranceFailure;
}

// Times +-t_i, t_i geometric from lo to hi, n per side.
std::vector<double> symmetric_times(double lo, double hi, std::size_t n) {
    std::vector<double> side(n), ts;
    for (std::size_t i = 0; i < n; ++i)
        side[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
    for (std::size_t i = n; i-- > 0;) ts.push_back(-side[i]);
    for (double t : side) ts.push_back(t);
    return ts;
}

std::size_t center_index(const json& s, const CenterSystem& sys) {
    const auto k = get_or<std::size_t>(s, "center", 1);
    if (k < 1 || k > sys.size()) throw UsageFailure("center index out of range (1-based)");
    return k - 1;
}

OpenArc shifted(OpenArc arc, Vec2 c) {
    for (Vec2& p : arc.points) p += c;
    return arc;
}

int cmd_blowup(const RunConfig& cfg, Output& out, json& summary, std::ostream& os) {
    const CenterSystem& sys = cfg.centers();
    const json s = cfg.section("blowup");
    const std::size_t k = center_index(s, sys);
    const double thm = get_or(s, "theta_minus", 2.0), thp = get_or(s, "theta_plus", -0.6);
    const double T = get_or(s, "T", 0.5), window = get_or(s, "window", 1.0);
    const auto samples = get_or<std::size_t>(s, "samples", 600);
    const auto lambdas = get_or(s, "lambdas", std::vector<double>{0.5, 0.1, 0.02, 0.004});
    const std::string source = get_or<std::string>(s, "source", "ejection");
    const kepler::ParabolicEjection pe(sys.mass(k), sys.alpha(), thm, thp);
    const Vec2 c = sys.position(k);

    OpenArc arc;
    if (source == "parabolic")
        arc = shifted(kepler::parabolic_arc(pe, symmetric_times(1e-8 * T, T, samples)), c);
    else if (source == "ejection")
        arc = kepler::collision_ejection_arc(sys, k, thm, thp, T, samples);
    else
        throw UsageFailure("blowup: source must be \"ejection\" or \"parabolic\"");

    auto rows = kepler::blowup_convergence(arc, c, pe, lambdas, window);
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.lambda > b.lambda; });
    std::ostringstream csv;
    csv << "lambda,sup_distance,velocity_sup_distance\n" << std::setprecision(17);
    bool converging = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        csv << rows[i].lambda << ',' << rows[i].sup_distance << ',' << rows[i].velocity_sup_distance << '\n';
        if (i > 0 && rows[i].sup_distance > rows[i - 1].sup_distance && rows[i].sup_distance > 1e-10) converging = false;
    }
    out.write("blowup.csv", csv.str());

    std::vector<double> rl;
    for (int i = 0; i <= 12; ++i) rl.push_back(std::pow(10.0, -3.0 + 0.25 * i));
    const auto rep = kepler::measure_rescaling(arc, sys, k, get_or(s, "rescale_lambdas", rl));
    std::ostringstream rcsv;
    rcsv << "lambda,action_ratio\n" << std::setprecision(17);
    for (std::size_t i = 0; i < rep.lambdas.size(); ++i) rcsv << rep.lambdas[i] << ',' << rep.ratios[i] << '\n';
    out.write("rescaling.csv", rcsv.str());
    out.write("trajectory.svg", svg_plot({{arc.points, false}}, sys.positions()));

    const bool one_match = rep.matches_derived != rep.matches_stated;
    summary = {{"source", source},
               {"converging", converging},
               {"rescaling",
                {{"fitted_exponent", rep.fitted_exponent},
                 {"r_squared", rep.r_squared},
                 {"derived_exponent", rep.derived_exponent},
                 {"stated_exponent", rep.stated_exponent},
                 {"matches_derived", rep.matches_derived},
                 {"matches_stated", rep.matches_stated}}}};
    os << "blow-up distances " << (converging ? "decrease" : "do not decrease") << " with lambda; action exponent "
       << rep.fitted_exponent << " (derived " << rep.derived_exponent << ", stated " << rep.stated_exponent << ")\n";
    return converging && one_match && rep.r_squared > 1.0 - 1e-9 ? Success : ToleranceFailure;
}

int cmd_asymptotics(const RunConfig& cfg, Output& out, json& summary, std::ostream& os) {
    const CenterSystem& sys = cfg.centers();
    const json s = cfg.section("asymptotics");
    const std::size_t k = center_index(s, sys);
    const double thm = get_or(s, "theta_minus", 0.5), thp = get_or(s, "theta_plus", 2.0);
    const std::string source = get_or<std::string>(s, "source", "parabolic");
    const Vec2 c = sys.position(k);

    OpenArc arc;
    std::optional<CenterSystem> fit_sys;
    double t_lo, t_hi, tol;
    if (source == "parabolic") {
        t_lo = get_or(s, "t_lo", 1e-6), t_hi = get_or(s, "t_hi", 1e-2), tol = get_or(s, "tolerance", 0.01);
        // The analytic ejection only solves the one-center problem of c_k.
        fit_sys.emplace(std::vector<double>{sys.mass(k)}, std::vector<Vec2>{c}, sys.alpha());
        const kepler::ParabolicEjection pe(sys.mass(k), sys.alpha(), thm, thp);
        arc = shifted(kepler::parabolic_arc(pe, symmetric_times(0.1 * t_lo, 10.0 * t_hi, get_or<std::size_t>(s, "samples", 80))), c);
    } else if (source == "ejection") {
        t_lo = get_or(s, "t_lo", 1e-5), t_hi = get_or(s, "t_hi", 1e-3), tol = get_or(s, "tolerance", 0.03);
        fit_sys = sys;
        arc = kepler::collision_ejection_arc(sys, k, thm, thp, 10.0 * t_hi, get_or<std::size_t>(s, "samples", 300));
    } else {
        throw UsageFailure("asymptotics: source must be \"parabolic\" or \"ejection\"");
    }
    const std::size_t kk = source == "parabolic" ? 0 : k;
    const auto fits = regularize::asymptotic_fit(arc, *fit_sys, kk, 0.0, t_lo, t_hi);
    std::ostringstream csv;
    regularize::write_fits_csv(csv, fits);
    out.write("fits.csv", csv.str());

    bool pass = true;
    json rows = json::array();
    for (const auto& f : fits) {
        const bool ok = std::abs(f.fitted_exponent - f.expected_exponent) <= tol * std::abs(f.expected_exponent);
        pass &= ok;
        rows.push_back({{"quantity", f.quantity},
                        {"expected", f.expected_exponent},
                        {"fitted", f.fitted_exponent},
                        {"r_squared", f.r_squared},
                        {"within_tolerance", ok}});
        os << f.quantity << ": fitted " << f.fitted_exponent << ", expected " << f.expected_exponent
           << (ok ? "" : "  (outside tolerance)") << '\n';
    }
    const auto lj = regularize::lagrange_jacobi_check(arc, *fit_sys, kk);
    summary = {{"source", source},
               {"tolerance", tol},
               {"fits", rows},
               {"lagrange_jacobi",
                {{"max_relative_residual", lj.max_relative_residual},
                 {"max_abs_b1", lj.max_abs_b1},
                 {"max_b1_rate_ratio", lj.max_b1_rate_ratio}}}};
    return pass ? Success : ToleranceFailure;
}

int cmd_kepler_compare(const RunConfig& cfg, Output& out, json& summary, std::ostream& os) {
    const json s = cfg.section("kepler_compare");
    const double m1 = get_or(s, "m1", 1.0), alpha = get_or(s, "alpha", cfg.alpha);
    const double phi = get_or(s, "phi_minus", 0.0), dphi = get_or(s, "delta_phi", 2.0 * pi);
    const double T = get_or(s, "T", 1.0);
    const auto n = get_or<std::size_t>(s, "n", 512);
    const double required = get_or(s, "required_relative_margin", 1e-3);
    const kepler::ParabolicEjection pe(m1, alpha, phi, phi + dphi);
    const auto res = kepler::fixed_end_minimize(pe, T, n);

    OpenArc arc = res.arc;
    arc.velocities = kepler::spiral_velocities(arc);
    out.write("arc.csv", arc_csv(arc));
    const std::vector<Vec2> rays = {kepler::parabolic_point(pe, -T), Vec2(0, 0), kepler::parabolic_point(pe, T)};
    out.write("trajectory.svg", svg_plot({{arc.points, false}, {rays, false}}, {Vec2(0, 0)}));

    const double rel = res.margin / res.ejection_action;
    summary = {{"alpha", alpha},
               {"delta_phi", dphi},
               {"n", n},
               {"action", res.action},
               {"ejection_action", res.ejection_action},
               {"margin", res.margin},
               {"relative_margin", rel},
               {"min_radius", res.min_radius},
               {"converged", res.solver.converged}};
    os << "A(gamma) = " << res.action << ", A(x-bar) = " << res.ejection_action << ", relative margin " << rel << '\n';
    return rel > required ? Success : ToleranceFailure;
}

std::string timestamp() {
    const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
    if (!epoch) return {};
    const std::time_t t = static_cast<std::time_t>(std::stoll(epoch));
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Numerical laboratory for the planar N-center problem", "ncenter"};
    app.require_subcommand(1);
    std::string config, out_dir = ".";
    std::optional<std::uint64_t> seed;
    const char* names[] = {"solve", "admissible", "obstacle-sweep", "blowup", "asymptotics", "kepler-compare"};
    const char* help[] = {"minimize the action in a free homotopy class", "admissibility verdict for a word",
                          "closed-form vs numeric grazing sweep table", "blow-up convergence and action rescaling",
                          "power-law fits at a collision", "fixed-end Kepler minimizer vs the ejection action"};
    for (int i = 0; i < 6; ++i) {
        CLI::App* sub = app.add_subcommand(names[i], help[i]);
        sub->add_option("--config", config, "JSON configuration file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "random seed (overrides the config)");
    }

    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return Success;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n' << app.help();
        return UsageError;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();

    try {
        const RunConfig cfg = load_config(config);
        const std::uint64_t s = seed.value_or(cfg.seed);
        Output o{out_dir};
        fs::create_directories(o.dir);
        json summary;
        int code = Success;
        if (cmd == "solve") code = cmd_solve(cfg, s, o, summary, err);
        else if (cmd == "admissible") code = cmd_admissible(cfg, o, summary, out);
        else if (cmd == "obstacle-sweep") code = cmd_obstacle_sweep(cfg, o, summary, out);
        else if (cmd == "blowup") code = cmd_blowup(cfg, o, summary, out);
        else if (cmd == "asymptotics") code = cmd_asymptotics(cfg, o, summary, out);
        else code = cmd_kepler_compare(cfg, o, summary, out);

        const std::string ts = timestamp();
        json manifest = {{"tool", "ncenter"},
                         {"version", NCENTER_VERSION},
                         {"subcommand", cmd},
                         {"config_sha256", sha256_hex(cfg.raw.dump())},
                         {"seed", s},
                         {"timestamp", ts.empty() ? json(nullptr) : json(ts)},
                         {"exit_code", code},
                         {"summary", summary},
                         {"files", o.files}};
        std::ofstream(o.dir / "manifest.json", std::ios::binary) << manifest.dump(2) << '\n';
        return code;
    } catch (const UsageFailure& e) {
        err << "error: " << e.what() << '\n';
        return UsageError;
    } catch (const json::exception& e) {
        err << "config error: " << e.what() << '\n';
        return UsageError;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << '\n';
        return UsageError;
    } catch (const std::out_of_range& e) {
        err << "invalid input: " << e.what() << '\n';
        return UsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return ToleranceFailure;
    }
}

}  // namespace ncenter::cli
