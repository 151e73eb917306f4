#pragma once

// Command-line front end: price single contracts, sweep (T1, K1) grids to
// CSV, and run analytic-vs-Monte-Carlo validation.  All numeric output uses
// 17 significant digits with '.' decimal separators so CSV files diff
// cleanly; identical invocations produce byte-identical output.
//
// Configuration merges three layers per key: command-line flag, then a
// plain-text `key = value` config file (# comments), then built-in defaults.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <jmfbm/jmfbm.hpp>

namespace jmfbm::cli {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string flags_text(unsigned flags) {
    std::string s;
    if (flags & price_flags::series_capped) s += "series_capped";
    if (flags & price_flags::supplied_critical) {
        if (!s.empty()) s += "|";
        s += "supplied_critical";
    }
    return s;
}

/// Merged configuration with per-key provenance (flag/file vs default).
class Config {
  public:
    void set_default(const std::string& key, double value) { defaults_[key] = value; }

    void set_from_file(const std::string& key, double value) {
        file_[key] = value;
    }

    void set_from_flag(const std::string& key, double value) { flags_[key] = value; }

    bool has(const std::string& key) const {
        return flags_.count(key) || file_.count(key) || defaults_.count(key);
    }

    bool user_supplied(const std::string& key) const {
        return flags_.count(key) || file_.count(key);
    }

    double get(const std::string& key) const {
        if (auto it = flags_.find(key); it != flags_.end()) return it->second;
        if (auto it = file_.find(key); it != file_.end()) return it->second;
        if (auto it = defaults_.find(key); it != defaults_.end()) return it->second;
        throw std::runtime_error("missing configuration key: " + key);
    }

    /// Collects every missing key before failing so the error names them all.
    void require(const std::vector<std::string>& keys, bool explicit_only = false) const {
        std::string missing;
        for (const auto& k : keys) {
            const bool ok = explicit_only ? user_supplied(k) : has(k);
            if (!ok) {
                if (!missing.empty()) missing += ", ";
                missing += k;
            }
        }
        if (!missing.empty())
            throw std::runtime_error(
                (explicit_only ? "missing required keys (must be supplied explicitly, not defaulted): "
                               : "missing required keys: ") +
                missing);
    }

  private:
    std::map<std::string, double> flags_, file_, defaults_;
};

inline const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "r",  "q",  "sigma", "hurst",   "lambda", "k",  "sigma_j", "s0",
        "k1", "t1", "k2",    "t2",      "premium", "l", "m",       "t0",
        "paths", "seed", "tail_tol", "t3", "k3", "a3", "t4", "k4", "a4"};
    return keys;
}

inline void load_config_file(const std::string& path, Config& cfg) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    const std::set<std::string> keys(known_keys().begin(), known_keys().end());
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto strip = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        if (strip(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        if (!keys.count(key))
            throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        try {
            std::size_t used = 0;
            const double v = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument(value);
            cfg.set_from_file(key, v);
        } catch (const std::exception&) {
            throw std::runtime_error("config line " + std::to_string(line_no) + ": bad numeric value '" +
                                     value + "'");
        }
    }
}

inline ModelParams model_from(const Config& cfg) {
    cfg.require({"r", "sigma", "hurst", "lambda", "k", "sigma_j"});
    ModelParams p;
    p.r = cfg.get("r");
    p.q = cfg.get("q");
    p.sigma = cfg.get("sigma");
    p.hurst = cfg.get("hurst");
    p.lambda = cfg.get("lambda");
    p.k = cfg.get("k");
    p.sigma_j = cfg.get("sigma_j");
    p.validate();
    return p;
}

inline SeriesControl control_from(const Config& cfg) {
    SeriesControl c;
    c.tail_tolerance = cfg.get("tail_tol");
    c.validate();
    return c;
}

inline std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) throw std::runtime_error("empty grid list");
    return out;
}

inline std::optional<std::pair<double, double>> critical_pair_from(const Config& cfg) {
    const bool has_l = cfg.user_supplied("l");
    const bool has_m = cfg.user_supplied("m");
    if (has_l != has_m) throw std::runtime_error("supply both 'l' and 'm' or neither");
    if (!has_l) return std::nullopt;
    return std::make_pair(cfg.get("l"), cfg.get("m"));
}

inline NExtendibleSpec n_spec_from(const Config& cfg) {
    cfg.require({"k1", "t1", "k2", "t2", "premium"});
    NExtendibleSpec spec;
    spec.valuation_time = cfg.get("t0");
    spec.stages.push_back({cfg.get("t1"), cfg.get("k1"), 0.0});
    spec.stages.push_back({cfg.get("t2"), cfg.get("k2"), cfg.get("premium")});
    for (int j = 3; j <= 4; ++j) {
        const std::string ts = "t" + std::to_string(j);
        const std::string ks = "k" + std::to_string(j);
        const std::string as = "a" + std::to_string(j);
        const int present = cfg.user_supplied(ts) + cfg.user_supplied(ks) + cfg.user_supplied(as);
        if (present == 0) break;
        if (present != 3)
            throw std::runtime_error("stage " + std::to_string(j) + " needs all of " + ts + ", " + ks +
                                     ", " + as);
        spec.stages.push_back({cfg.get(ts), cfg.get(ks), cfg.get(as)});
    }
    spec.validate();
    return spec;
}

inline std::vector<std::string> contract_keys(const std::string& kind) {
    if (kind == "vanilla") return {"k1", "t1"};
    if (kind == "compound" || kind == "extendible" || kind == "nextendible") {
        std::vector<std::string> keys = {"k1", "t1", "k2", "t2"};
        if (kind != "compound") keys.push_back("premium");
        return keys;
    }
    throw std::runtime_error("unknown contract kind: " + kind);
}

inline void require_model_and_contract(const Config& cfg, const std::string& kind) {
    std::vector<std::string> keys = {"r", "sigma", "hurst", "lambda", "k", "sigma_j", "s0"};
    const auto extra = contract_keys(kind);
    keys.insert(keys.end(), extra.begin(), extra.end());
    cfg.require(keys);
}

inline int cmd_price(const std::string& kind, const Config& cfg, std::ostream& out) {
    require_model_and_contract(cfg, kind);
    const ModelParams params = model_from(cfg);
    const SeriesControl control = control_from(cfg);
    const double s0 = cfg.get("s0");
    const double t0 = cfg.get("t0");

    const std::string model_cols = "r,q,sigma,hurst,lambda,k,sigma_j";
    const std::string model_vals = num(params.r) + "," + num(params.q) + "," + num(params.sigma) + "," +
                                   num(params.hurst) + "," + num(params.lambda) + "," + num(params.k) +
                                   "," + num(params.sigma_j);

    PriceResult res;
    if (kind == "vanilla") {
        const VanillaCallSpec spec{cfg.get("k1"), {t0, cfg.get("t1")}};
        res = call_price(params, s0, spec, control);
        out << "kind,s0,strike,t0,t1," << model_cols << ",price,terms_n1,tail_shortfall,flags\n";
        out << "vanilla," << num(s0) << "," << num(spec.strike) << "," << num(t0) << ","
            << num(spec.window.t_end) << "," << model_vals << "," << num(res.value) << ","
            << res.terms_used[0] << "," << num(res.tail_shortfall) << "," << flags_text(res.flags)
            << "\n";
    } else if (kind == "compound") {
        const CompoundCallSpec spec{cfg.get("k1"), cfg.get("t1"), cfg.get("k2"), cfg.get("t2"), t0};
        const CriticalPrice crit = critical_price(params, spec, control);
        res = compound_call_price(params, s0, spec, control);
        out << "kind,s0,k1,t1,k2,t2,t0," << model_cols
            << ",price,terms_n1,terms_n2,tail_shortfall,s1_star,s1_star_residual,flags\n";
        out << "compound," << num(s0) << "," << num(spec.outer_strike) << "," << num(spec.outer_expiry)
            << "," << num(spec.inner_strike) << "," << num(spec.inner_expiry) << "," << num(t0) << ","
            << model_vals << "," << num(res.value) << "," << res.terms_used[0] << ","
            << res.terms_used[1] << "," << num(res.tail_shortfall) << "," << num(crit.value) << ","
            << num(crit.residual) << "," << flags_text(res.flags) << "\n";
    } else if (kind == "extendible") {
        ExtendibleCallSpec spec{cfg.get("k1"), cfg.get("t1"), cfg.get("k2"), cfg.get("t2"),
                                cfg.get("premium"), t0, critical_pair_from(cfg)};
        spec.validate();
        double lv, mv;
        if (spec.critical_values)
            std::tie(lv, mv) = *spec.critical_values;
        else
            std::tie(lv, mv) = critical_values(params, spec, control);
        res = extendible_call_price(params, s0, spec, control);
        // Self-consistency residuals of (L, M) against the indifference
        // conditions C(L) = A and M - K1 = C(M) - A.
        const CallPriceCurve cont(params, {spec.strike2, {spec.expiry1, spec.expiry2}}, control);
        const double l_res = cont(lv) - spec.premium;
        const double m_res = mv - spec.strike1 - (cont(mv) - spec.premium);
        out << "kind,s0,k1,t1,k2,t2,premium,t0," << model_cols
            << ",price,terms_n1,terms_n2,tail_shortfall,l,m,l_residual,m_residual,flags\n";
        out << "extendible," << num(s0) << "," << num(spec.strike1) << "," << num(spec.expiry1) << ","
            << num(spec.strike2) << "," << num(spec.expiry2) << "," << num(spec.premium) << ","
            << num(t0) << "," << model_vals << "," << num(res.value) << "," << res.terms_used[0] << ","
            << res.terms_used[1] << "," << num(res.tail_shortfall) << "," << num(lv) << "," << num(mv)
            << "," << num(l_res) << "," << num(m_res) << "," << flags_text(res.flags) << "\n";
    } else if (kind == "nextendible") {
        const NExtendibleSpec spec = n_spec_from(cfg);
        const auto levels = detail::solve_schedule_levels(params, spec, control, 1e-10);
        res = n_extendible_price(params, s0, spec, control);
        std::string head = "kind,s0,t0";
        std::string row = "nextendible," + num(s0) + "," + num(spec.valuation_time);
        for (std::size_t j = 0; j < spec.stages.size(); ++j) {
            const std::string sj = std::to_string(j + 1);
            head += ",t" + sj + ",k" + sj + ",a" + sj;
            row += "," + num(spec.stages[j].expiry) + "," + num(spec.stages[j].strike) + "," +
                   num(spec.stages[j].premium);
        }
        for (std::size_t j = 0; j < levels.size(); ++j) {
            const std::string sj = std::to_string(j + 1);
            head += ",l" + sj + ",m" + sj;
            row += "," + num(levels[j].l) + "," + num(levels[j].m);
        }
        head += "," + model_cols + ",price";
        row += "," + model_vals + "," + num(res.value);
        for (std::size_t d = 0; d < res.terms_used.size(); ++d) {
            head += ",terms_n" + std::to_string(d + 1);
            row += "," + std::to_string(res.terms_used[d]);
        }
        head += ",tail_shortfall,flags";
        row += "," + num(res.tail_shortfall) + "," + flags_text(res.flags);
        out << head << "\n" << row << "\n";
    } else {
        throw std::runtime_error("unknown contract kind: " + kind);
    }
    return (res.flags & price_flags::series_capped) ? 2 : 0;
}

/// Extendible prices for one grid cell under the full model and its two
/// reductions (H = 1/2 keeps the jumps; lambda = 0 keeps the memory).
struct TableCell {
    double merton = 0.0;
    double mfbm = 0.0;
    double jmfbm = 0.0;
    unsigned flags = 0;
};

inline TableCell table_cell(const ModelParams& params, double s0, const ExtendibleCallSpec& spec,
                            const SeriesControl& control) {
    TableCell cell;
    ModelParams merton = params;
    merton.hurst = 0.5;
    ModelParams diffusion = params;
    diffusion.lambda = 0.0;

    const PriceResult pm = extendible_call_price(merton, s0, spec, control);
    const PriceResult pd = mfbm_extendible_price(diffusion, s0, spec, control);
    const PriceResult pj = extendible_call_price(params, s0, spec, control);
    cell.merton = pm.value;
    cell.mfbm = pd.value;
    cell.jmfbm = pj.value;
    cell.flags = pm.flags | pd.flags | pj.flags;
    return cell;
}

inline int cmd_table(const Config& cfg, const std::vector<double>& t1_grid,
                     const std::vector<double>& k1_grid, std::ostream& out, std::ostream& err) {
    // The published parameter set omits these four; refuse to invent them.
    cfg.require({"lambda", "t2", "k2", "t0"}, /*explicit_only=*/true);
    const ModelParams params = model_from(cfg);
    const SeriesControl control = control_from(cfg);
    cfg.require({"s0", "premium"});
    const double s0 = cfg.get("s0");
    const auto supplied = critical_pair_from(cfg);

    unsigned flags = 0;
    out << "t1,k1,price_merton,price_mfbm,price_jmfbm,price_richardson\n";
    for (double t1 : t1_grid) {
        for (double k1 : k1_grid) {
            ExtendibleCallSpec spec{k1, t1, cfg.get("k2"), cfg.get("t2"), cfg.get("premium"),
                                    cfg.get("t0"), supplied};
            spec.validate();
            const TableCell cell = table_cell(params, s0, spec, control);
            flags |= cell.flags;
            const double richardson = richardson_extrapolate(cell.merton, cell.jmfbm);
            out << num(t1) << "," << num(k1) << "," << num(cell.merton) << "," << num(cell.mfbm)
                << "," << num(cell.jmfbm) << "," << num(richardson) << "\n";
            if (supplied) {
                const CallPriceCurve cont(params, {spec.strike2, {spec.expiry1, spec.expiry2}},
                                          control);
                err << "# t1=" << num(t1) << " k1=" << num(k1)
                    << " supplied critical values: C(L)-A=" << num(cont(supplied->first) - spec.premium)
                    << " M-K1-(C(M)-A)="
                    << num(supplied->second - k1 - (cont(supplied->second) - spec.premium)) << "\n";
            }
        }
    }
    return (flags & price_flags::series_capped) ? 2 : 0;
}

inline int cmd_figure(const Config& cfg, const std::vector<double>& t1_grid,
                      const std::vector<double>& k1_grid, std::ostream& out) {
    cfg.require({"lambda", "t2", "k2", "t0"}, /*explicit_only=*/true);
    const ModelParams params = model_from(cfg);
    const SeriesControl control = control_from(cfg);
    cfg.require({"s0", "premium"});
    const double s0 = cfg.get("s0");
    const auto supplied = critical_pair_from(cfg);

    unsigned flags = 0;
    out << "t1,k1,jmfbm_minus_merton,jmfbm_minus_mfbm\n";
    for (double t1 : t1_grid) {
        for (double k1 : k1_grid) {
            ExtendibleCallSpec spec{k1, t1, cfg.get("k2"), cfg.get("t2"), cfg.get("premium"),
                                    cfg.get("t0"), supplied};
            spec.validate();
            const TableCell cell = table_cell(params, s0, spec, control);
            flags |= cell.flags;
            out << num(t1) << "," << num(k1) << "," << num(cell.jmfbm - cell.merton) << ","
                << num(cell.jmfbm - cell.mfbm) << "\n";
        }
    }
    return (flags & price_flags::series_capped) ? 2 : 0;
}

inline int cmd_mc_check(const std::string& kind, const Config& cfg, bool nested,
                        double corrupt_analytic, std::ostream& out) {
    require_model_and_contract(cfg, kind);
    cfg.require({"paths"});
    const ModelParams params = model_from(cfg);
    const SeriesControl control = control_from(cfg);
    const double s0 = cfg.get("s0");
    const double t0 = cfg.get("t0");
    McConfig mc;
    mc.paths = static_cast<std::int64_t>(cfg.get("paths"));
    mc.seed = static_cast<std::uint64_t>(cfg.get("seed"));
    if (mc.paths < 10000) throw std::runtime_error("mc-check requires paths >= 10000");
    const McMode mode = nested ? McMode::nested : McMode::analytic_inner;

    double analytic = 0.0;
    McEstimate est;
    if (kind == "vanilla") {
        const VanillaCallSpec spec{cfg.get("k1"), {t0, cfg.get("t1")}};
        analytic = call_price(params, s0, spec, control).value;
        est = mc_vanilla_price(params, s0, spec, mc);
    } else if (kind == "compound") {
        const CompoundCallSpec spec{cfg.get("k1"), cfg.get("t1"), cfg.get("k2"), cfg.get("t2"), t0};
        analytic = compound_call_price(params, s0, spec, control).value;
        est = mc_compound_price(params, s0, spec, mc, control, mode);
    } else if (kind == "extendible") {
        ExtendibleCallSpec spec{cfg.get("k1"), cfg.get("t1"), cfg.get("k2"), cfg.get("t2"),
                                cfg.get("premium"), t0, critical_pair_from(cfg)};
        spec.validate();
        analytic = extendible_call_price(params, s0, spec, control).value;
        est = mc_extendible_price(params, s0, spec, mc, control, mode);
    } else if (kind == "nextendible") {
        if (nested) throw std::runtime_error("mc-check nextendible supports the default mode only");
        const NExtendibleSpec spec = n_spec_from(cfg);
        analytic = n_extendible_price(params, s0, spec, control).value;
        est = mc_n_extendible_price(params, s0, spec, mc, control);
    } else {
        throw std::runtime_error("unknown contract kind: " + kind);
    }

    analytic += corrupt_analytic;
    double z;
    if (est.std_error > 0.0) {
        z = (analytic - est.mean) / est.std_error;
    } else {
        z = std::abs(analytic - est.mean) <= 1e-12 * std::max(1.0, std::abs(analytic))
                ? 0.0
                : std::numeric_limits<double>::infinity();
    }

    out << "kind: " << kind << (nested ? " (nested estimator)" : "") << "\n";
    out << "analytic: " << num(analytic) << "\n";
    out << "mc: " << num(est.mean) << " +- " << num(est.std_error) << " (paths " << est.paths
        << ")\n";
    out << "z: " << num(z) << "\n";
    if (nested && params.hurst != 0.5)
        out << "note: nested estimator draws the true joint fractional covariance; for H != 1/2 the "
               "reported gap measures the nested-interval correlation convention\n";
    return std::abs(z) <= 3.0 ? 0 : 3;
}

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"jmfbm: compound/extendible option pricing under a mixed fractional "
                 "jump-diffusion"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "plain-text key = value configuration file");

    Config cfg;
    cfg.set_default("q", 0.0);
    cfg.set_default("t0", 0.0);
    cfg.set_default("paths", 100000);
    cfg.set_default("seed", 42);
    cfg.set_default("tail_tol", 1e-12);

    std::map<std::string, double> flag_values;
    const auto add_key_flags = [&](CLI::App* sub) {
        for (const auto& key : known_keys()) {
            std::string flag = "--" + key;
            for (auto& c : flag) {
                if (c == '_') c = '-';
            }
            sub->add_option_function<double>(
                flag, [&flag_values, key](double v) { flag_values[key] = v; }, "config key " + key);
        }
    };

    std::string price_kind, mc_kind;
    std::string t1_grid_text, k1_grid_text;
    bool nested = false;
    double corrupt_analytic = 0.0;

    CLI::App* price = app.add_subcommand("price", "price one contract, CSV on stdout");
    price->fallthrough();
    price->add_option("kind", price_kind, "vanilla|compound|extendible|nextendible")->required();
    add_key_flags(price);

    CLI::App* table = app.add_subcommand(
        "table", "extendible price table over a T1 x K1 grid (full model and reductions)");
    table->fallthrough();
    table->add_option("--t1-grid", t1_grid_text, "comma-separated T1 values")->required();
    table->add_option("--k1-grid", k1_grid_text, "comma-separated K1 values")->required();
    add_key_flags(table);

    CLI::App* figure = app.add_subcommand("figure",
                                          "model-difference surface over a T1 x K1 grid, long CSV");
    figure->fallthrough();
    figure->add_option("--t1-grid", t1_grid_text, "comma-separated T1 values")->required();
    figure->add_option("--k1-grid", k1_grid_text, "comma-separated K1 values")->required();
    add_key_flags(figure);

    CLI::App* mc_check = app.add_subcommand("mc-check", "analytic price vs Monte Carlo z-score");
    mc_check->fallthrough();
    mc_check->add_option("kind", mc_kind, "vanilla|compound|extendible|nextendible")->required();
    mc_check->add_flag("--nested", nested, "simulate the continuation leg instead of using the "
                                           "analytic inner value");
    mc_check->add_option("--corrupt-analytic", corrupt_analytic,
                         "offset added to the analytic value (validation hook)")
        ->group("");
    add_key_flags(mc_check);

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("jmfbm");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        err << app.help();
        return 1;
    }

    try {
        if (!config_path.empty()) load_config_file(config_path, cfg);
        for (const auto& [key, value] : flag_values) cfg.set_from_flag(key, value);

        if (price->parsed()) return cmd_price(price_kind, cfg, out);
        if (table->parsed())
            return cmd_table(cfg, parse_grid(t1_grid_text), parse_grid(k1_grid_text), out, err);
        if (figure->parsed())
            return cmd_figure(cfg, parse_grid(t1_grid_text), parse_grid(k1_grid_text), out);
        if (mc_check->parsed()) return cmd_mc_check(mc_kind, cfg, nested, corrupt_analytic, out);
        err << "error: no subcommand\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace jmfbm::cli
