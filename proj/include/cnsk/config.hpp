#pragma once
// JSON run configuration: dotted-path lookup with diagnostics that name the
// offending field, and the mapping onto the experiment configs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cnsk/decay_harness.hpp"

namespace cnsk {

/// Malformed config text or a missing/ill-typed field. `field()` is the
/// dotted path ("grid.N"), empty for syntax errors.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what) : std::runtime_error(what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Parses config text; syntax errors carry line and column.
inline json parse_config(std::string_view text, const std::string& source = "<config>") {
    try {
        json j = json::parse(text);
        if (!j.is_object()) throw ConfigError("", source + ": top level must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        const std::size_t at = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        const std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + at, '\n'));
        const std::size_t bol = text.rfind('\n', at == 0 ? 0 : at - 1);
        const std::size_t col = bol == std::string_view::npos || at == 0 ? at + 1 : at - bol;
        std::ostringstream msg;
        msg << source << ':' << line << ':' << col << ": JSON syntax error";
        const std::string w = e.what();
        if (const auto p = w.find("syntax error"); p != std::string::npos) msg << w.substr(p + 12);
        throw ConfigError("", msg.str());
    }
}

inline json load_config(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("", "cannot read config file " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), path.string());
}

/// Sets `path` in `root`, creating intermediate objects.
inline void set_config_value(json& root, std::string_view path, json value) {
    json* node = &root;
    std::size_t start = 0;
    for (;;) {
        const std::size_t dot = path.find('.', start);
        const std::string key(path.substr(start, dot - start));
        if (!node->is_object()) *node = json::object();
        node = &(*node)[key];
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    *node = std::move(value);
}

/// Read-only view with typed, field-named lookups.
class ConfigView {
public:
    explicit ConfigView(const json& root) : root_(root) {}

    const json* find(std::string_view path) const {
        const json* node = &root_;
        std::size_t start = 0;
        for (;;) {
            const std::size_t dot = path.find('.', start);
            const std::string key(path.substr(start, dot - start));
            if (!node->is_object()) return nullptr;
            const auto it = node->find(key);
            if (it == node->end()) return nullptr;
            node = &*it;
            if (dot == std::string_view::npos) return node;
            start = dot + 1;
        }
    }

    bool has(std::string_view path) const { return find(path) != nullptr; }

    template <class T>
    T require(std::string_view path) const {
        const json* v = find(path);
        if (!v) throw ConfigError(std::string(path), "missing required field '" + std::string(path) + "'");
        return convert<T>(*v, path);
    }

    template <class T>
    T get(std::string_view path, const T& fallback) const {
        const json* v = find(path);
        return v ? convert<T>(*v, path) : fallback;
    }

private:
    template <class T>
    static T convert(const json& v, std::string_view path) {
        const auto bad = [&](std::string_view why) {
            return ConfigError(std::string(path), "field '" + std::string(path) + "' " + std::string(why));
        };
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw bad("must be a boolean");
            return v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw bad("must be an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
                if (v.get<std::int64_t>() < 0) throw bad("must be nonnegative");
                return static_cast<T>(v.get<std::int64_t>());
            } else {
                const std::int64_t x = v.get<std::int64_t>();
                if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) throw bad("is out of range");
                return static_cast<T>(x);
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw bad("must be a number");
            return v.get<T>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw bad("must be a string");
            return v.get<std::string>();
        } else {
            try {
                return v.get<T>();
            } catch (const json::exception&) {
                throw bad("has the wrong shape");
            }
        }
    }

    const json& root_;
};

/// Every key a config may contain; anything else is reported as unknown.
inline const std::vector<std::string>& known_config_fields() {
    static const std::vector<std::string> f{
        "physics.mu", "physics.mu_prime", "physics.kappa", "physics.dimension", "physics.pressure.exponent",
        "physics.pressure.coefficient", "grid.N", "grid.L", "run.T", "run.samples", "run.t_first",
        "run.fit_window", "run.seed", "run.threads", "run.out", "run.strict", "data.amplitude", "data.width",
        "data.center", "data.phi_weight", "data.m_weight", "linear.quantities", "linear.tolerance",
        "linear.l1_tolerance", "nonlinear.dt", "nonlinear.dealias", "nonlinear.amplitude_sweep",
        "nonlinear.sweep_tolerance", "nonlinear.tolerance", "nonlinear.l1_tolerance", "nonlinear.mass_tolerance",
        "kernel.component", "kernel.band", "kernel.k", "kernel.alpha", "kernel.row", "kernel.col",
        "kernel.derivative_gain", "kernel.gain_tolerance", "kernel.tolerance", "kernel.shell_cd",
        "kernel.shell_max_outside", "kernel.radial_bins", "highband.t_small", "highband.small_samples",
        "highband.tail_samples", "highband.sigma0", "highband.drift_tolerance", "highband.r2_min",
        "modecheck.samples", "modecheck.tolerance", "modecheck.lambda_tolerance"};
    return f;
}

/// Dotted paths of leaves in `root` that are not known config fields.
inline std::vector<std::string> unknown_config_fields(const json& root) {
    std::vector<std::string> out;
    const auto& known = known_config_fields();
    const auto walk = [&](auto&& self, const json& node, const std::string& prefix) -> void {
        for (auto it = node.begin(); it != node.end(); ++it) {
            const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
            if (std::find(known.begin(), known.end(), path) != known.end()) continue;
            const bool section = std::any_of(known.begin(), known.end(),
                                             [&](const std::string& k) { return k.rfind(path + ".", 0) == 0; });
            if (section && it->is_object()) self(self, *it, path);
            else out.push_back(path);
        }
    };
    walk(walk, root, "");
    return out;
}

/// Process-level settings shared by all commands.
struct RunOptions {
    std::string out = "cnsk_out";
    std::uint64_t seed = 1;
    /// 0 means all available cores.
    int threads = 0;
    bool strict = false;

    int resolved_threads() const {
        if (threads > 0) return threads;
        return std::max(1u, std::thread::hardware_concurrency());
    }
};

inline RunOptions run_options_from(const ConfigView& c) {
    RunOptions o;
    o.out = c.get<std::string>("run.out", o.out);
    o.seed = c.get<std::uint64_t>("run.seed", o.seed);
    o.threads = c.get<int>("run.threads", o.threads);
    if (o.threads < 0) throw ConfigError("run.threads", "field 'run.threads' must be >= 0");
    o.strict = c.get<bool>("run.strict", o.strict);
    return o;
}

inline PhysicalParameters physics_from(const ConfigView& c) {
    PhysicalParameters p;
    p.mu = c.get<double>("physics.mu", p.mu);
    p.mu_prime = c.get<double>("physics.mu_prime", p.mu_prime);
    p.kappa = c.get<double>("physics.kappa", p.kappa);
    p.dimension = c.get<int>("physics.dimension", p.dimension);
    if (c.has("physics.pressure.exponent") || c.has("physics.pressure.coefficient"))
        p.pressure = PressureLaw::polytropic(c.get<double>("physics.pressure.exponent", 1.4),
                                             c.get<double>("physics.pressure.coefficient", 1.0));
    return p;
}

inline Grid grid_from(const ConfigView& c) {
    Grid g;
    g.n = c.get<int>("physics.dimension", 2);
    g.N = c.require<std::size_t>("grid.N");
    g.L = c.require<double>("grid.L");
    if (g.N < 4 || (g.N & (g.N - 1)) != 0) throw ConfigError("grid.N", "field 'grid.N' must be a power of two >= 4");
    if (!(g.L > 0.0)) throw ConfigError("grid.L", "field 'grid.L' must be positive");
    return g;
}

inline std::array<double, 2> fit_window_from(const ConfigView& c, std::array<double, 2> fallback) {
    const auto w = c.get<std::vector<double>>("run.fit_window", {fallback[0], fallback[1]});
    if (w.size() != 2 || !(0.0 <= w[0] && w[0] < w[1] && w[1] <= 1.0))
        throw ConfigError("run.fit_window", "field 'run.fit_window' must be [a, b] with 0 <= a < b <= 1");
    return {w[0], w[1]};
}

namespace detail {

template <std::size_t K, class T>
std::array<T, K> fixed_array(const ConfigView& c, std::string_view path, std::array<T, K> fallback) {
    if (!c.has(path)) return fallback;
    const auto v = c.require<std::vector<T>>(path);
    if (v.size() > K) throw ConfigError(std::string(path), "field '" + std::string(path) + "' has too many entries");
    std::array<T, K> out{};
    std::copy(v.begin(), v.end(), out.begin());
    return out;
}

}  // namespace detail

inline BumpRecipe bump_from(const ConfigView& c) {
    BumpRecipe b;
    b.amplitude = c.get<double>("data.amplitude", b.amplitude);
    b.width = c.get<double>("data.width", b.width);
    if (!(b.width > 0.0)) throw ConfigError("data.width", "field 'data.width' must be positive");
    b.center = detail::fixed_array<3>(c, "data.center", b.center);
    b.phi_weight = c.get<double>("data.phi_weight", b.phi_weight);
    b.m_weight = detail::fixed_array<3>(c, "data.m_weight", b.m_weight);
    return b;
}

inline LinearDecayConfig linear_config_from(const ConfigView& c) {
    LinearDecayConfig x;
    x.phys = physics_from(c);
    x.grid = grid_from(c);
    x.T = c.get<double>("run.T", x.T);
    x.t_first = c.get<double>("run.t_first", x.t_first);
    x.samples = c.get<int>("run.samples", x.samples);
    x.fit_window = fit_window_from(c, x.fit_window);
    x.data = bump_from(c);
    x.quantities = c.get<std::vector<std::string>>("linear.quantities", x.quantities);
    x.tolerance = c.get<double>("linear.tolerance", x.tolerance);
    x.l1_tolerance = c.get<double>("linear.l1_tolerance", x.l1_tolerance);
    return x;
}

inline HighBandConfig highband_config_from(const ConfigView& c) {
    HighBandConfig x;
    x.phys = physics_from(c);
    x.grid = grid_from(c);
    x.seed = c.get<std::uint64_t>("run.seed", x.seed);
    x.T = c.get<double>("run.T", x.T);
    x.t_small = c.get<double>("highband.t_small", x.t_small);
    x.small_samples = c.get<int>("highband.small_samples", x.small_samples);
    x.tail_samples = c.get<int>("highband.tail_samples", x.tail_samples);
    x.sigma0 = c.get<double>("highband.sigma0", x.sigma0);
    if (!(x.sigma0 > 0.0 && x.sigma0 < 0.5))
        throw ConfigError("highband.sigma0", "field 'highband.sigma0' must lie in (0, 1/2)");
    x.drift_tolerance = c.get<double>("highband.drift_tolerance", x.drift_tolerance);
    x.r2_min = c.get<double>("highband.r2_min", x.r2_min);
    return x;
}

inline NonlinearConfig nonlinear_config_from(const ConfigView& c) {
    NonlinearConfig x;
    x.phys = physics_from(c);
    x.grid = grid_from(c);
    x.T = c.get<double>("run.T", x.T);
    x.samples = c.get<int>("run.samples", x.samples);
    x.fit_window = fit_window_from(c, x.fit_window);
    x.data = bump_from(c);
    x.dt = c.get<double>("nonlinear.dt", x.dt);
    if (!(x.dt > 0.0)) throw ConfigError("nonlinear.dt", "field 'nonlinear.dt' must be positive");
    x.dealias = c.get<double>("nonlinear.dealias", x.dealias);
    x.amplitude_sweep = c.get<bool>("nonlinear.amplitude_sweep", x.amplitude_sweep);
    x.sweep_tolerance = c.get<double>("nonlinear.sweep_tolerance", x.sweep_tolerance);
    x.tolerance = c.get<double>("nonlinear.tolerance", x.tolerance);
    x.l1_tolerance = c.get<double>("nonlinear.l1_tolerance", x.l1_tolerance);
    x.mass_tolerance = c.get<double>("nonlinear.mass_tolerance", x.mass_tolerance);
    return x;
}

inline KernelComponent parse_kernel_component(const std::string& s) {
    for (KernelComponent k : {KernelComponent::L11, KernelComponent::L12, KernelComponent::L21, KernelComponent::L22,
                              KernelComponent::KPsi})
        if (s == to_string(k)) return k;
    throw ConfigError("kernel.component", "field 'kernel.component' must be one of L11, L12, L21, L22, K_psi");
}

inline Band parse_band(const std::string& s) {
    if (s == "low") return Band::Low;
    if (s == "mid") return Band::Mid;
    if (s == "high") return Band::High;
    throw ConfigError("kernel.band", "field 'kernel.band' must be one of low, mid, high");
}

inline KernelConfig kernel_config_from(const ConfigView& c) {
    KernelConfig x;
    x.phys = physics_from(c);
    x.grid = grid_from(c);
    x.T = c.get<double>("run.T", x.T);
    x.t_first = c.get<double>("run.t_first", x.t_first);
    x.samples = c.get<int>("run.samples", x.samples);
    x.fit_window = fit_window_from(c, x.fit_window);
    x.component = parse_kernel_component(c.get<std::string>("kernel.component", "K_psi"));
    x.band = parse_band(c.get<std::string>("kernel.band", "low"));
    x.k = c.get<int>("kernel.k", x.k);
    x.alpha = detail::fixed_array<3>(c, "kernel.alpha", x.alpha);
    for (int a : x.alpha)
        if (a < 0) throw ConfigError("kernel.alpha", "field 'kernel.alpha' entries must be >= 0");
    x.row = c.get<int>("kernel.row", x.row);
    x.col = c.get<int>("kernel.col", x.col);
    if (x.row < 0 || x.row >= x.grid.n) throw ConfigError("kernel.row", "field 'kernel.row' must index a dimension");
    if (x.col < 0 || x.col >= x.grid.n) throw ConfigError("kernel.col", "field 'kernel.col' must index a dimension");
    x.derivative_gain = c.get<bool>("kernel.derivative_gain", x.derivative_gain);
    x.gain_tolerance = c.get<double>("kernel.gain_tolerance", x.gain_tolerance);
    x.tolerance = c.get<double>("kernel.tolerance", x.tolerance);
    x.shell_cd = c.get<double>("kernel.shell_cd", x.shell_cd);
    x.shell_max_outside = c.get<double>("kernel.shell_max_outside", x.shell_max_outside);
    x.radial_bins = c.get<int>("kernel.radial_bins", x.radial_bins);
    return x;
}

inline ModeCheckConfig modecheck_config_from(const ConfigView& c) {
    ModeCheckConfig x;
    x.seed = c.get<std::uint64_t>("run.seed", x.seed);
    x.samples = c.get<int>("modecheck.samples", x.samples);
    x.tolerance = c.get<double>("modecheck.tolerance", x.tolerance);
    x.lambda_tolerance = c.get<double>("modecheck.lambda_tolerance", x.lambda_tolerance);
    return x;
}

}  // namespace cnsk
