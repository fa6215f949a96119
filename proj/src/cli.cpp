#include "flm/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <thread>

#include "flm/criteria.hpp"
#include "flm/error.hpp"
#include "flm/figures.hpp"
#include "flm/homodyne.hpp"
#include "flm/propagation.hpp"

namespace flm::cli {

namespace {

[[noreturn]] void config_error(const std::string& what) { fail(ErrorCode::ConfigError, what); }

std::string num(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

const Json& field(const Json& spec, const char* key, const std::string& where) {
    if (!spec.is_object() || !spec.contains(key)) config_error(where + ": missing field '" + key + "'");
    return spec.at(key);
}

double number(const Json& spec, const char* key, const std::string& where) {
    const auto& v = field(spec, key, where);
    if (!v.is_number()) config_error(where + "." + key + ": expected a number");
    return v.get<double>();
}

int integer(const Json& spec, const char* key, const std::string& where) {
    const double v = number(spec, key, where);
    if (v != std::floor(v) || std::abs(v) > 1e9) config_error(where + "." + key + ": expected an integer");
    return static_cast<int>(v);
}

// number or [re, im]
cplx complex_value(const Json& v, const std::string& where) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return {v[0].get<double>(), v[1].get<double>()};
    config_error(where + ": expected a number or [re, im]");
}

cplx complex_field(const Json& spec, const char* key, const std::string& where) {
    return complex_value(field(spec, key, where), where + "." + key);
}

void allow_only(const Json& spec, std::initializer_list<const char*> keys, const std::string& where) {
    for (const auto& [k, v] : spec.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
            config_error(where + ": unknown field '" + k + "'");
    }
}

std::string type_of(const Json& spec, const std::string& where) {
    const auto& t = field(spec, "type", where);
    if (!t.is_string()) config_error(where + ".type: expected a string");
    return t.get<std::string>();
}

// Convert library errors raised while building specs into ConfigError with context.
template <class F>
auto with_context(const std::string& where, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        throw Error(e.code(), where + ": " + e.what());
    }
}

std::string csv_header(const std::vector<std::string>& cols) {
    std::string s;
    for (std::size_t i = 0; i < cols.size(); ++i) s += (i ? "," : "") + cols[i];
    return s + "\n";
}

CsvTable from_table(const Table& t, std::vector<std::string> comments = {}) {
    std::string body = csv_header(t.columns);
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) body += (i ? "," : "") + num(row[i]);
        body += "\n";
    }
    return {t.name, std::move(comments), std::move(body)};
}

// Evaluates f(i) for i < n on worker threads; results in index order, first
// failure (by index) rethrown.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, F&& f) {
    std::vector<std::optional<T>> out(n);
    std::vector<std::exception_ptr> errors(n);
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency())));
    auto work = [&](unsigned w) {
        for (std::size_t i = w; i < n; i += workers) {
            try {
                out[i] = f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    std::vector<T> result;
    for (std::size_t i = 0; i < n; ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        result.push_back(std::move(*out[i]));
    }
    return result;
}

Json state_defaults() { return {{"type", "fock"}, {"n", 1}}; }
Json fixture_channel() { return {{"type", "fixture"}, {"name", "beamwandering-fig24"}}; }

Json figure_params(const std::string& fig) {
    if (fig == "fig1") {
        const Fig1Params p;
        return {{"xi", p.xi}, {"gamma", p.gamma}, {"t2", p.t2}, {"phi_points", p.phi_points},
                {"beta_points", p.beta_points}, {"beta_max", p.beta_max}};
    }
    if (fig == "fig2") {
        const Fig2Params p;
        return {{"gamma", p.gamma}, {"t4", p.t4}, {"p_min", p.p_min}, {"p_max", p.p_max}, {"points", p.points}};
    }
    if (fig == "fig3") {
        const Fig3Params p;
        return {{"t2", p.t2}, {"ecs_alpha2", p.ecs_alpha2}, {"tmsv_total_mean", p.tmsv_total_mean},
                {"gamma_max", p.gamma_max}, {"points", p.points}};
    }
    if (fig == "fig4") {
        const Fig4Params p;
        return {{"gamma", p.gamma}, {"t2", p.t2}, {"alpha_min", p.alpha_min}, {"alpha_max", p.alpha_max},
                {"points", p.points}, {"output_scale", p.output_scale}};
    }
    config_error("unknown figure '" + fig + "' (expected fig1, fig2, fig3 or fig4)");
}

std::vector<std::pair<MinorModes, std::string>> minor_names() {
    return {{kMinor1234, "1234"}, {kMinor1324, "1324"}, {kMinor2314, "2314"}};
}

bool needs_joint(const std::string& name) {
    return name == "photon_correlation" || name == "simon" || name == "ho_npt" || name == "four_mode_minor";
}

CriterionReport evaluate_criterion(const Json& config) {
    const auto& crit = field(config, "criterion", "config");
    allow_only(crit, {"name", "k", "minor", "partition"}, "criterion");
    const auto& name_json = field(crit, "name", "criterion");
    if (!name_json.is_string()) config_error("criterion.name: expected a string");
    const std::string name = name_json.get<std::string>();
    const double tol = config.contains("tolerance") ? number(config, "tolerance", "config") : kVerdictTolerance;
    const int k = crit.contains("k") ? integer(crit, "k", "criterion") : 1;
    if (k < 1) config_error("criterion.k: must be >= 1");

    const StateModel s = parse_state(field(config, "state", "config"));
    const auto table = with_context("state", [&] { return tabulate(s, std::max(4, 2 * k)); });
    const Json& ch = config.contains("channel") ? config.at("channel") : Json();
    const bool out = !ch.is_null();

    if (needs_joint(name)) {
        std::optional<JointChannel> joint;
        if (out) joint = parse_joint_channel(config, s.modes());
        if (name == "photon_correlation") return out ? photon_correlation_out(table, *joint, tol) : photon_correlation(table, tol);
        if (name == "simon") return out ? simon_out(table, *joint, tol) : simon(table, tol);
        if (name == "ho_npt") return out ? ho_npt_out(table, *joint, tol) : ho_npt(table, tol);
        const std::string minor = crit.contains("minor") ? crit.at("minor").get<std::string>() : "1234";
        const auto names = minor_names();
        const auto it = std::find_if(names.begin(), names.end(), [&](const auto& p) { return p.second == minor; });
        if (it == names.end()) config_error("criterion.minor: expected 1234, 1324 or 2314");
        std::vector<std::size_t> b{0};
        if (crit.contains("partition")) {
            b.clear();
            for (const auto& v : crit.at("partition")) {
                if (!v.is_number_integer() || v.get<int>() < 0) config_error("criterion.partition: expected mode indices");
                b.push_back(v.get<std::size_t>());
            }
        }
        const auto part = with_context("criterion.partition", [&] { return PartitionSpec(s.modes(), b); });
        return out ? four_mode_minor_out(table, it->first, part, *joint, tol)
                   : four_mode_minor(table, it->first, part, tol);
    }
    std::optional<TransmittanceModel> law;
    if (out) law = parse_channel(ch);
    if (name == "mandel_q") {
        if (out) return mandel_q(output_moment(table, JointChannel::single(*law)), tol);
        return mandel_q(table, tol);
    }
    if (name == "sub_poisson") return out ? sub_poisson_out(table, *law, tol) : sub_poisson(table, tol);
    if (name == "amplitude_squeezing")
        return out ? amplitude_squeezing_out(table, *law, k, tol) : amplitude_squeezing(table, k, tol);
    config_error("criterion.name: unknown criterion '" + name +
                 "' (mandel_q, sub_poisson, amplitude_squeezing, photon_correlation, simon, ho_npt, "
                 "four_mode_minor)");
}

std::vector<Json> sweep_values(const Json& sweep) {
    allow_only(sweep, {"variable", "from", "to", "step"}, "sweep");
    const double from = number(sweep, "from", "sweep"), to = number(sweep, "to", "sweep");
    const double step = number(sweep, "step", "sweep");
    if (!(step > 0.0)) config_error("sweep.step: must be positive");
    if (to < from) config_error("sweep: empty range (to < from)");
    const bool ints = sweep.at("from").is_number_integer() && sweep.at("step").is_number_integer();
    const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
    if (n > 1'000'000) config_error("sweep: more than 10^6 points");
    std::vector<Json> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (ints)
            out.emplace_back(sweep.at("from").get<long long>() + static_cast<long long>(i) * sweep.at("step").get<long long>());
        else
            out.emplace_back(from + static_cast<double>(i) * step);
    }
    return out;
}

Json sweep_of(const Json& config) {
    if (!config.contains("sweep") || config.at("sweep").is_null()) return Json();
    return config.at("sweep");
}

std::string variable_of(const Json& sweep) {
    const auto& v = field(sweep, "variable", "sweep");
    if (!v.is_string() || v.get<std::string>().empty()) config_error("sweep.variable: expected a dotted key");
    return v.get<std::string>();
}

std::string json_scalar(const Json& v) { return v.is_number_float() ? num(v.get<double>()) : v.dump(); }

void write_all(const std::vector<CsvTable>& tables, const Json& config, const std::string& out_path,
               std::ostream& out) {
    if (out_path.empty()) {
        for (const auto& t : tables) {
            if (tables.size() > 1) out << "# table: " << t.name << "\n";
            write_table(out, t, config);
        }
        return;
    }
    auto open = [](const std::filesystem::path& p) {
        std::ofstream f(p, std::ios::binary);
        require(static_cast<bool>(f), ErrorCode::IoError, "cannot write " + p.string());
        return f;
    };
    if (tables.size() == 1) {
        auto f = open(out_path);
        write_table(f, tables.front(), config);
        return;
    }
    std::error_code ec;
    std::filesystem::create_directories(out_path, ec);
    require(!ec, ErrorCode::IoError, "cannot create directory " + out_path);
    for (const auto& t : tables) {
        auto f = open(std::filesystem::path(out_path) / (t.name + ".csv"));
        write_table(f, t, config);
    }
}

}  // namespace

Json default_config(const std::string& command, const std::string& figure) {
    if (command == "channel-moments") return {{"channel", fixture_channel()}, {"max_order", 4}};
    if (command == "figure") return {{"figure", figure}, {"params", figure_params(figure)}};
    if (command == "criterion")
        return {{"criterion", {{"name", "sub_poisson"}}},
                {"state", state_defaults()},
                {"channel", fixture_channel()},
                {"joint", "uncorrelated"},
                {"tolerance", kVerdictTolerance},
                {"sweep", {{"variable", "state.n"}, {"from", 1}, {"to", 15}, {"step", 1}}}};
    if (command == "homodyne-validate")
        return {{"state", {{"type", "squeezed"}, {"xi", 0.5}, {"beta", 0.0}}},
                {"channel", {{"type", "beta"}, {"a", 5.0}, {"b", 2.0}}},
                {"homodyne",
                 {{"samples", 100000},
                  {"lo_amplitude", 5.0},
                  {"depth", 2},
                  {"phases", 5},
                  {"threads", 0},
                  {"targets", Json::array({{0, 1}, {1, 0}, {0, 2}, {1, 1}, {2, 0}})}}},
                {"seed", nullptr}};
    config_error("unknown command '" + command + "'");
}

void set_path(Json& config, const std::string& key, Json value) {
    if (key.empty()) config_error("override: empty key");
    Json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) config_error("override: malformed key '" + key + "'");
        if (!node->is_object()) {
            if (!node->is_null()) config_error("override: '" + key + "' descends into a non-object");
            *node = Json::object();
        }
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

void apply_override(Json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) config_error("override '" + assignment + "': expected key=value");
    const std::string value = assignment.substr(eq + 1);
    Json v = Json::parse(value, nullptr, false);
    if (v.is_discarded()) v = value;
    set_path(config, assignment.substr(0, eq), std::move(v));
}

StateModel parse_state(const Json& spec) {
    const std::string where = "state";
    const std::string type = type_of(spec, where);
    return with_context(where, [&]() -> StateModel {
        if (type == "fock") {
            allow_only(spec, {"type", "n"}, where);
            return FockNumber{integer(spec, "n", where)};
        }
        if (type == "coherent") {
            allow_only(spec, {"type", "alpha", "amplitudes"}, where);
            if (spec.contains("amplitudes")) {
                std::vector<cplx> a;
                for (const auto& v : spec.at("amplitudes")) a.push_back(complex_value(v, where + ".amplitudes"));
                return Coherent{a};
            }
            return Coherent{{complex_field(spec, "alpha", where)}};
        }
        if (type == "squeezed") {
            allow_only(spec, {"type", "xi", "beta"}, where);
            const cplx beta = spec.contains("beta") ? complex_field(spec, "beta", where) : cplx{};
            return DisplacedSqueezed{complex_field(spec, "xi", where), beta};
        }
        if (type == "tmsv") {
            allow_only(spec, {"type", "p", "r"}, where);
            if (spec.contains("r")) return TwoModeSqueezedVacuum::from_squeezing(number(spec, "r", where));
            return TwoModeSqueezedVacuum{number(spec, "p", where)};
        }
        if (type == "pr_tmsv") {
            allow_only(spec, {"type", "p"}, where);
            return PhaseRandomizedTMSV{number(spec, "p", where)};
        }
        if (type == "ecs") {
            allow_only(spec, {"type", "alpha", "beta"}, where);
            const cplx a = complex_field(spec, "alpha", where);
            return EntangledCoherent{a, spec.contains("beta") ? complex_field(spec, "beta", where) : a};
        }
        if (type == "coherent_w") {
            allow_only(spec, {"type", "alpha", "modes"}, where);
            return CoherentW{complex_field(spec, "alpha", where), spec.contains("modes") ? integer(spec, "modes", where) : 4};
        }
        if (type == "density_csv") {
            allow_only(spec, {"type", "path", "modes", "cutoff"}, where);
            const auto& path = field(spec, "path", where);
            if (!path.is_string()) config_error("state.path: expected a string");
            if (!std::filesystem::exists(path.get<std::string>()))
                config_error("state.path: file not found: " + path.get<std::string>());
            auto rho = load_density_csv(path.get<std::string>(), static_cast<std::size_t>(integer(spec, "modes", where)),
                                        integer(spec, "cutoff", where));
            return GenericFock{std::make_shared<const FockDensityMatrix>(std::move(rho))};
        }
        config_error("state.type: unknown state '" + type +
                     "' (fock, coherent, squeezed, tmsv, pr_tmsv, ecs, coherent_w, density_csv)");
    });
}

TransmittanceModel parse_channel(const Json& spec) {
    const std::string where = "channel";
    const std::string type = type_of(spec, where);
    return with_context(where, [&]() -> TransmittanceModel {
        if (type == "deterministic") {
            allow_only(spec, {"type", "t0"}, where);
            return Deterministic{number(spec, "t0", where)};
        }
        if (type == "beta") {
            allow_only(spec, {"type", "a", "b"}, where);
            return BetaLaw{number(spec, "a", where), number(spec, "b", where)};
        }
        if (type == "tabulated") {
            allow_only(spec, {"type", "path", "grid", "density"}, where);
            if (spec.contains("path")) {
                const std::string path = spec.at("path").get<std::string>();
                if (!std::filesystem::exists(path)) config_error("channel.path: file not found: " + path);
                return Tabulated::from_csv(path);
            }
            return Tabulated(field(spec, "grid", where).get<std::vector<double>>(),
                             field(spec, "density", where).get<std::vector<double>>());
        }
        if (type == "fixture") {
            allow_only(spec, {"type", "name", "moments"}, where);
            if (spec.contains("moments")) {
                MomentFixture f{spec.contains("name") ? spec.at("name").get<std::string>() : "custom", {}, true};
                for (const auto& [k, v] : spec.at("moments").items()) {
                    int l = 0;
                    try {
                        l = std::stoi(k);
                    } catch (const std::exception&) {
                        config_error("channel.moments: keys must be integers, got '" + k + "'");
                    }
                    f.moments[l] = v.get<double>();
                }
                return f;
            }
            const std::string name = field(spec, "name", where).get<std::string>();
            if (name == "beamwandering-fig24") return beamwandering_fig24();
            config_error("channel.name: unknown fixture '" + name + "' (beamwandering-fig24)");
        }
        if (type == "gamma1" || type == "gamma_ab" || type == "gamma_ijkl") {
            allow_only(spec, {"type", "t2", "gamma"}, where);
            const double t2 = number(spec, "t2", where), g = number(spec, "gamma", where);
            if (type == "gamma1") return gamma1_fixture(t2, g);
            if (type == "gamma_ab") return gamma_ab_fixture(t2, g);
            return gamma_ijkl_fixture(t2, g);
        }
        if (type == "gamma2_pair") {
            allow_only(spec, {"type", "t4", "gamma"}, where);
            return gamma2_pair_fixture(number(spec, "t4", where), number(spec, "gamma", where));
        }
        config_error("channel.type: unknown channel '" + type +
                     "' (deterministic, beta, tabulated, fixture, gamma1, gamma2_pair, gamma_ab, gamma_ijkl)");
    });
}

JointChannel parse_joint_channel(const Json& config, std::size_t modes) {
    const auto law = parse_channel(field(config, "channel", "config"));
    const std::string joint = config.contains("joint") ? config.at("joint").get<std::string>() : "uncorrelated";
    if (joint == "uncorrelated") return JointChannel::uncorrelated(law, modes);
    if (joint == "correlated") return FullyCorrelated{law, modes};
    config_error("joint: expected 'uncorrelated' or 'correlated'");
}

std::vector<CsvTable> cmd_channel_moments(const Json& config) {
    allow_only(config, {"channel", "max_order", "seed"}, "config");
    const auto c = parse_channel(field(config, "channel", "config"));
    const int max_order = integer(config, "max_order", "config");
    if (max_order < 1 || max_order > 64) config_error("max_order: must lie in [1, 64]");
    std::string body = "quantity,order,value,stderr\n";
    auto try_value = [](auto&& f) -> std::optional<double> {
        try {
            return f();
        } catch (const Error& e) {
            if (e.code() == ErrorCode::MissingMoment) return std::nullopt;
            throw;
        }
    };
    for (int l = 1; l <= max_order; ++l) {
        std::optional<MomentEstimate> m;
        try {
            m = t_moment_estimate(c, l);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::MissingMoment) throw;
        }
        if (m) body += "moment," + std::to_string(l) + "," + num(m->value) + "," + num(m->standard_error) + "\n";
    }
    for (int k = 1; 2 * k <= max_order; ++k) {
        const auto g = try_value([&] { return gamma_single(c, k).value; });
        if (g) body += "gamma," + std::to_string(k) + "," + num(*g) + ",0\n";
    }
    return {{"channel_moments", {"channel=" + c.name()}, body}};
}

std::vector<CsvTable> cmd_figure(const Json& config) {
    allow_only(config, {"figure", "params", "seed"}, "config");
    const std::string fig = field(config, "figure", "config").get<std::string>();
    const Json defaults = figure_params(fig);
    const Json& p = field(config, "params", "config");
    for (const auto& [k, v] : p.items())
        if (!defaults.contains(k)) config_error("params: unknown field '" + k + "' for " + fig);
    const std::string w = "params";
    auto d = [&](const char* k) { return number(p.contains(k) ? p : defaults, k, w); };
    auto i = [&](const char* k) { return integer(p.contains(k) ? p : defaults, k, w); };
    if (fig == "fig1") {
        const Fig1Params fp{d("xi"), d("gamma"), d("t2"), i("phi_points"), i("beta_points"), d("beta_max")};
        const auto r = figure1(fp);
        return {from_table(r.grid), from_table(r.contour, {"boundary at phi=pi/2: " + num(fig1_boundary_closed_form(fp, std::numbers::pi / 2))})};
    }
    if (fig == "fig2") {
        const auto r = figure2({d("gamma"), d("t4"), d("p_min"), d("p_max"), i("points")});
        return {from_table(r.curve, {"crossing=" + num(r.crossing), "closed_form_p_max=" + num(r.closed_form_p_max),
                                     "sign_changes=" + std::to_string(r.sign_changes)})};
    }
    if (fig == "fig3") {
        const auto r = figure3({d("t2"), d("ecs_alpha2"), d("tmsv_total_mean"), d("gamma_max"), i("points")});
        return {from_table(r.curve, {"ecs_threshold_closed_form=" + num(r.ecs_threshold_closed_form),
                                     "ecs_crossing=" + num(r.ecs_crossing), "tmsv_crossing=" + num(r.tmsv_crossing)})};
    }
    const auto r = figure4({d("gamma"), d("t2"), d("alpha_min"), d("alpha_max"), i("points"), d("output_scale")});
    Table iv{"fig4_intervals", {"curve", "lo", "hi", "length"}, {}};
    std::string body = csv_header(iv.columns);
    for (const auto& [name, x] : std::vector<std::pair<std::string, Interval>>{
             {"m_I", r.m_i}, {"m_II", r.m_ii}, {"m_I_out", r.m_i_out}, {"m_II_out", r.m_ii_out}})
        body += name + "," + num(x.lo) + "," + num(x.hi) + "," + num(x.length()) + "\n";
    return {from_table(r.curve), {"fig4_intervals", {}, body}};
}

std::vector<CsvTable> cmd_criterion(const Json& config) {
    allow_only(config, {"criterion", "state", "channel", "joint", "tolerance", "sweep", "seed"}, "config");
    const Json sweep = sweep_of(config);
    std::vector<Json> values{Json()};
    std::string var = "point";
    if (!sweep.is_null()) {
        var = variable_of(sweep);
        values = sweep_values(sweep);
    }
    const auto reports = parallel_map<CriterionReport>(values.size(), [&](std::size_t idx) {
        Json point = config;
        point.erase("sweep");
        if (!sweep.is_null()) set_path(point, var, values[idx]);
        auto r = evaluate_criterion(point);
        if (!sweep.is_null()) r.inputs.insert(r.inputs.begin(), {var, json_scalar(values[idx])});
        return r;
    });
    std::ostringstream body;
    body << var << ',';
    write_criterion_header(body);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        body << (sweep.is_null() ? std::string("0") : json_scalar(values[i])) << ',';
        write_criterion_row(body, reports[i]);
    }
    std::vector<std::string> comments;
    for (std::size_t i = 1; i < reports.size(); ++i)
        if (reports[i].detected() != reports[i - 1].detected())
            comments.push_back("verdict change between " + var + "=" + json_scalar(values[i - 1]) + " and " +
                               json_scalar(values[i]));
    return {{"criterion", comments, body.str()}};
}

std::vector<CsvTable> cmd_homodyne_validate(const Json& config) {
    allow_only(config, {"state", "channel", "homodyne", "seed"}, "config");
    if (!config.contains("seed") || config.at("seed").is_null())
        config_error("seed: mandatory for Monte Carlo commands (pass --seed or set \"seed\")");
    if (!config.at("seed").is_number_unsigned()) config_error("seed: expected a non-negative integer");
    const auto& h = field(config, "homodyne", "config");
    allow_only(h, {"samples", "lo_amplitude", "depth", "phases", "threads", "targets"}, "homodyne");
    const StateModel s = parse_state(field(config, "state", "config"));
    const auto c = parse_channel(field(config, "channel", "config"));
    const DetectionNetwork net{integer(h, "depth", "homodyne"), number(h, "lo_amplitude", "homodyne")};
    with_context("homodyne", [&] {
        net.validate();
        return 0;
    });
    HomodyneOptions opt;
    const int samples = integer(h, "samples", "homodyne");
    if (samples < 2) config_error("homodyne.samples: must be >= 2");
    opt.samples = static_cast<std::size_t>(samples);
    opt.seed = config.at("seed").get<std::uint64_t>();
    opt.threads = h.contains("threads") ? static_cast<unsigned>(integer(h, "threads", "homodyne")) : 0;

    std::vector<std::pair<int, int>> targets;
    bool first = false, second = false;
    for (const auto& t : field(h, "targets", "homodyne")) {
        if (!t.is_array() || t.size() != 2 || !t[0].is_number_integer() || !t[1].is_number_integer())
            config_error("homodyne.targets: expected [n, m] pairs");
        targets.emplace_back(t[0].get<int>(), t[1].get<int>());
        const int order = targets.back().first + targets.back().second;
        first = first || order == 1;
        second = second || order >= 2;
    }
    std::vector<Combination> combos;
    if (first) combos.push_back(first_order_combination(net));
    if (second) combos.push_back(second_order_combination(net));
    const auto estimates =
        simulate_correlations(s, c, net, phase_grid(integer(h, "phases", "homodyne")), combos, opt);
    const auto extracted = extract_moments(estimates, net, targets);
    const auto predicted = output_moment(tabulate(s, 4), JointChannel::single(c));

    auto z = [](double diff, double se) {
        if (se > 0.0) return diff / se;
        return std::abs(diff) < 1e-9 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    };
    std::string body =
        "n,m,extracted_re,extracted_im,stderr_re,stderr_im,predicted_re,predicted_im,z_re,z_im\n";
    double max_z = 0.0;
    for (const auto& e : extracted) {
        const cplx want = predicted(MultiIndex{e.n}, MultiIndex{e.m});
        const double zr = z(e.value.real() - want.real(), e.stderr_re);
        const double zi = z(e.value.imag() - want.imag(), e.stderr_im);
        max_z = std::max({max_z, std::abs(zr), std::abs(zi)});
        body += std::to_string(e.n) + "," + std::to_string(e.m) + "," + num(e.value.real()) + "," +
                num(e.value.imag()) + "," + num(e.stderr_re) + "," + num(e.stderr_im) + "," + num(want.real()) +
                "," + num(want.imag()) + "," + num(zr) + "," + num(zi) + "\n";
    }
    std::ostringstream est;
    write_estimates_csv(est, estimates);
    const std::string verdict = max_z < 3.0 ? "pass" : "fail";
    return {{"homodyne_moments", {"max_abs_z=" + num(max_z) + " (" + verdict + " at |z| < 3)"}, body},
            {"homodyne_estimates", {}, est.str()}};
}

void write_table(std::ostream& out, const CsvTable& t, const Json& config) {
    out << "# config: " << config.dump() << "\n";
    for (const auto& c : t.comments) out << "# " << c << "\n";
    out << t.body;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fluctuating-loss moment criteria: figures, criterion sweeps, channel moments, homodyne checks"};
    app.require_subcommand(1);
    struct Common {
        std::string config, out;
        std::vector<std::string> overrides;
        std::optional<std::uint64_t> seed;
    };
    std::vector<std::unique_ptr<Common>> commons;
    std::string figure_name;
    auto add = [&](const std::string& name, const std::string& help) {
        auto* sub = app.add_subcommand(name, help);
        commons.push_back(std::make_unique<Common>());
        auto* c = commons.back().get();
        sub->add_option("--config", c->config, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--out", c->out, "output file (directory for multi-table commands)");
        sub->add_option("--seed", c->seed, "random seed (overrides config)");
        sub->add_option("--override", c->overrides, "key=value, dotted keys, JSON values")->allow_extra_args(false);
        return sub;
    };
    auto* cm = add("channel-moments", "transmittance moments <T^l> and fluctuation parameters");
    auto* fig = add("figure", "sweep data behind a figure (fig1..fig4)");
    fig->add_option("name", figure_name, "fig1, fig2, fig3 or fig4")->required();
    auto* cr = add("criterion", "criterion values along a sweep");
    auto* hv = add("homodyne-validate", "homodyne moment retrieval against propagated moments");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error," << to_string(ErrorCode::ConfigError) << "," << e.what() << "\n";
        return 2;
    }

    const std::vector<CLI::App*> subs{cm, fig, cr, hv};
    const auto active = std::find_if(subs.begin(), subs.end(), [](CLI::App* a) { return a->parsed(); });
    const auto& common = *commons[static_cast<std::size_t>(active - subs.begin())];
    const std::string command = (*active)->get_name();
    try {
        Json config = default_config(command, figure_name.empty() ? "fig1" : figure_name);
        if (!common.config.empty()) {
            std::ifstream f(common.config);
            require(static_cast<bool>(f), ErrorCode::IoError, "cannot read " + common.config);
            Json file = Json::parse(f, nullptr, false);
            if (file.is_discarded() || !file.is_object())
                config_error("--config " + common.config + ": not a JSON object");
            for (const auto& [k, v] : file.items()) {
                if (!config.contains(k) && k != "seed") config_error("--config: unknown top-level field '" + k + "'");
                // state and channel specs replace the defaults wholesale
                if (v.is_object() && config[k].is_object() && k != "state" && k != "channel")
                    config[k].merge_patch(v);
                else
                    config[k] = v;
            }
        }
        for (const auto& o : common.overrides) apply_override(config, o);
        if (common.seed) config["seed"] = *common.seed;
        if (command == "figure" && config.at("figure") != figure_name)
            config_error("figure: config names " + config.at("figure").dump() + " but the command asks for " +
                         figure_name);

        std::vector<CsvTable> tables;
        if (command == "channel-moments") tables = cmd_channel_moments(config);
        else if (command == "figure") tables = cmd_figure(config);
        else if (command == "criterion") tables = cmd_criterion(config);
        else tables = cmd_homodyne_validate(config);
        write_all(tables, config, common.out, out);
        return 0;
    } catch (const Error& e) {
        err << "error," << to_string(e.code()) << "," << e.what() << "\n";
        return e.code() == ErrorCode::ConfigError ? 2 : 1;
    } catch (const Json::exception& e) {
        err << "error," << to_string(ErrorCode::ConfigError) << "," << e.what() << "\n";
        return 2;
    }
}

}  // namespace flm::cli
