#include "rsl/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "json.hpp"

namespace rsl {

using nlohmann::json;

// ---------------------------------------------------------------------------
// BumpProfile

std::string to_string(BumpKind k) {
    switch (k) {
        case BumpKind::FlatTile: return "flat-tile";
        case BumpKind::Tent: return "tent";
        case BumpKind::BallIndicator: return "ball-indicator";
    }
    return "?";
}

BumpKind bump_kind_from_string(const std::string& s) {
    if (s == "flat-tile") return BumpKind::FlatTile;
    if (s == "tent") return BumpKind::Tent;
    if (s == "ball-indicator") return BumpKind::BallIndicator;
    throw ConfigError("unknown bump kind: " + s);
}

double BumpProfile::value(const double* u, int d) const {
    switch (kind) {
        case BumpKind::FlatTile: {
            for (int i = 0; i < d; ++i)
                if (u[i] < -0.5 || u[i] >= 0.5) return 0.0;
            return 1.0;
        }
        case BumpKind::Tent: {
            double v = 1.0;
            for (int i = 0; i < d; ++i) {
                double t = 1.0 - std::abs(u[i]);
                if (t <= 0.0) return 0.0;
                v *= t;
            }
            return v;
        }
        case BumpKind::BallIndicator: {
            for (int i = 0; i < d; ++i)
                if (u[i] < -R || u[i] >= R) return 0.0;
            return v_plus;
        }
    }
    return 0.0;
}

double BumpProfile::translated(const double* u, const GridIndex& k, int d) const {
    double shifted[3];
    for (int i = 0; i < d; ++i) shifted[i] = u[i] - k[i];
    return value(shifted, d);
}

void BumpProfile::validate() const {
    if (!(r > 0.0) || !(r <= R)) throw PreconditionError("bump: need 0 < r <= R");
    if (!(v_minus > 0.0) || !(v_minus <= v_plus) || !(v_plus <= 1.0))
        throw PreconditionError("bump: need 0 < v_minus <= v_plus <= 1");
    switch (kind) {
        case BumpKind::FlatTile:
            if (R != 0.5) throw PreconditionError("flat-tile: R must be 0.5");
            if (r > 0.5) throw PreconditionError("flat-tile: r must be <= 0.5");
            if (v_plus != 1.0) throw PreconditionError("flat-tile: height 1 requires v_plus = 1");
            break;
        case BumpKind::Tent:
            if (R != 1.0) throw PreconditionError("tent: R must be 1");
            if (v_plus != 1.0) throw PreconditionError("tent: peak 1 requires v_plus = 1");
            break;
        case BumpKind::BallIndicator:
            break;
    }
}

// ---------------------------------------------------------------------------
// DensitySpec

DensitySpec DensitySpec::uniform() {
    DensitySpec s;
    s.knots = {0.0, 1.0};
    s.values = {1.0, 1.0};
    s.lipschitz_regular = true;
    s.finalize();
    return s;
}

DensitySpec DensitySpec::linear(double at0, double at1) {
    DensitySpec s;
    s.knots = {0.0, 1.0};
    s.values = {at0, at1};
    s.lipschitz_regular = at0 > 0.0 && at1 > 0.0;
    s.finalize();
    return s;
}

void DensitySpec::finalize() {
    double kmax = 0.0, vmin = kInf, vmax = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        double dx = knots[i + 1] - knots[i];
        if (dx > 0.0) kmax = std::max(kmax, std::abs(values[i + 1] - values[i]) / dx);
    }
    for (double v : values) {
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    if (K < 0.0) K = kmax;
    if (rho_minus < 0.0) rho_minus = vmin;
    if (rho_plus < 0.0) rho_plus = vmax;
}

double DensitySpec::integral() const {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i)
        s += 0.5 * (values[i] + values[i + 1]) * (knots[i + 1] - knots[i]);
    return s;
}

void DensitySpec::validate() const {
    if (knots.size() < 2 || knots.size() != values.size())
        throw PreconditionError("density: need matching knots/values, at least two");
    if (knots.front() != 0.0 || knots.back() != 1.0)
        throw PreconditionError("density: support must be [0,1], knots from 0 to 1");
    if (!std::is_sorted(knots.begin(), knots.end()))
        throw PreconditionError("density: knots must be sorted");
    for (double v : values)
        if (v < 0.0) throw PreconditionError("density: values must be nonnegative");
    if (std::abs(integral() - 1.0) > 1e-12)
        throw PreconditionError("density: integral must be 1 within 1e-12");
    if (lipschitz_regular) {
        double kmax = 0.0, vmin = kInf;
        for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
            double dx = knots[i + 1] - knots[i];
            if (dx > 0.0) kmax = std::max(kmax, std::abs(values[i + 1] - values[i]) / dx);
        }
        for (double v : values) vmin = std::min(vmin, v);
        if (kmax > K * (1.0 + 1e-12))
            throw PreconditionError("density: observed slope exceeds declared Lipschitz constant");
        if (!(vmin > 0.0) || vmin + 1e-15 < rho_minus)
            throw PreconditionError("density: flagged regular but not bounded below by rho_minus > 0");
    }
}

double DensitySpec::value_at(double x) const {
    if (x <= knots.front()) return values.front();
    if (x >= knots.back()) return values.back();
    auto it = std::upper_bound(knots.begin(), knots.end(), x);
    std::size_t i = static_cast<std::size_t>(it - knots.begin()) - 1;
    double t = (x - knots[i]) / (knots[i + 1] - knots[i]);
    return values[i] + t * (values[i + 1] - values[i]);
}

double DensitySpec::cdf(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        if (x >= knots[i + 1]) {
            acc += 0.5 * (values[i] + values[i + 1]) * (knots[i + 1] - knots[i]);
        } else {
            double t = x - knots[i];
            double slope = (values[i + 1] - values[i]) / (knots[i + 1] - knots[i]);
            acc += values[i] * t + 0.5 * slope * t * t;
            break;
        }
    }
    return acc;
}

double DensitySpec::inverse_cdf(double u) const {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        double dx = knots[i + 1] - knots[i];
        double seg = 0.5 * (values[i] + values[i + 1]) * dx;
        if (u > acc + seg) {
            acc += seg;
            continue;
        }
        double a = values[i];
        double b = (values[i + 1] - values[i]) / dx;  // density slope on the segment
        double m = u - acc;
        double t;
        if (std::abs(b) < 1e-14 * std::max(1.0, a)) {
            t = a > 0.0 ? m / a : dx;
        } else {
            double disc = a * a + 2.0 * b * m;
            disc = std::max(disc, 0.0);
            t = 2.0 * m / (a + std::sqrt(disc));
        }
        return knots[i] + std::min(t, dx);
    }
    return 1.0;
}

// ---------------------------------------------------------------------------
// Lattice and configurations

std::vector<GridIndex> index_set(double L, double R, int d) {
    if (!(L > 0.0) || R < 0.0 || d < 1 || d > 3) throw PreconditionError("index_set: need L > 0, R >= 0, d in 1..3");
    int kmax = static_cast<int>(std::floor((L + R) / 2.0 + 1e-12));
    std::vector<GridIndex> out;
    GridIndex k{0, 0, 0};
    // lexicographic, last coordinate fastest
    std::vector<int> range;
    for (int v = -kmax; v <= kmax; ++v) range.push_back(v);
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) total *= range.size();
    out.reserve(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        for (int i = d - 1; i >= 0; --i) {
            k[i] = range[rem % range.size()];
            rem /= range.size();
        }
        out.push_back(k);
    }
    std::sort(out.begin(), out.end(), lex_less);
    return out;
}

Configuration sample_configuration(const DensitySpec& density, const std::vector<GridIndex>& indices,
                                   std::uint64_t seed) {
    if (indices.empty()) throw PreconditionError("sample_configuration: empty index set");
    density.validate();
    Configuration c;
    c.indices = indices;
    c.seed = seed;
    c.values.resize(indices.size());
    std::mt19937_64 eng(splitmix64(seed));
    for (std::size_t i = 0; i < indices.size(); ++i) c.values[i] = density.inverse_cdf(u01(eng));
    return c;
}

Configuration shift_configuration(const Configuration& omega, double tau) {
    Configuration out = omega;
    bool flag = omega.out_of_support;
    for (double& v : out.values) {
        v += tau;
        if (v < 0.0 || v > 1.0) flag = true;
    }
    out.out_of_support = flag;
    return out;
}

// ---------------------------------------------------------------------------
// FieldSpec

double FieldSpec::eval(const double* x, int d) const {
    if (kind == "one") return 1.0;
    if (kind == "zero") return 0.0;
    if (kind == "const") return value;
    if (kind == "cosine") {
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += std::cos(2.0 * M_PI * x[i]);
        return value + amp * s / d;
    }
    throw ConfigError("unknown field kind: " + kind);
}

// ---------------------------------------------------------------------------
// ModelParams

int ModelParams::nodes_per_dim() const {
    double m = L / h;
    return static_cast<int>(std::lround(m)) - 1;
}

void ModelParams::validate() const {
    if (d < 1 || d > 3) throw PreconditionError("model: d must be 1, 2 or 3");
    if (!(mu > 0.0)) throw PreconditionError("model: mu must be positive");
    if (!(h > 0.0)) throw PreconditionError("model: h must be positive");
    double m = L / h;
    if (std::abs(m - std::lround(m)) > 1e-9 || std::lround(m) < 2)
        throw PreconditionError("model: L/h must be an integer >= 2");
    bump.validate();
    density.validate();
    auto b = scan_bounds();
    if (!(b.G_minus > 0.0)) throw PreconditionError("model: G must be positive on the grid");
    if (!(b.V_minus > 0.0) || b.V_plus > 1.0 + 1e-12)
        throw PreconditionError("model: covering condition V_- <= sum V_k <= V_+ <= 1 failed");
}

ModelParams::ScanBounds ModelParams::scan_bounds() const {
    int m = nodes_per_dim();
    auto lattice_pts = lattice();
    ScanBounds b{kInf, 0.0, kInf, 0.0, 0.0};
    double x[3] = {0, 0, 0};
    int nd[3] = {m, d > 1 ? m : 1, d > 2 ? m : 1};
    for (int i = 0; i < nd[0]; ++i) {
        x[0] = -L / 2 + (i + 1) * h;
        for (int j = 0; j < nd[1]; ++j) {
            if (d > 1) x[1] = -L / 2 + (j + 1) * h;
            for (int k = 0; k < nd[2]; ++k) {
                if (d > 2) x[2] = -L / 2 + (k + 1) * h;
                double vsum = 0.0;
                for (const auto& kk : lattice_pts) vsum += bump.translated(x, kk, d);
                double g = G.eval(x, d);
                double vo = V_o.eval(x, d);
                b.V_minus = std::min(b.V_minus, vsum);
                b.V_plus = std::max(b.V_plus, vsum);
                b.G_minus = std::min(b.G_minus, g);
                b.G_plus = std::max(b.G_plus, g);
                b.V_o_norm = std::max(b.V_o_norm, std::abs(vo));
            }
        }
    }
    return b;
}

bool ModelParams::partition_of_unity() const {
    if (bump.kind == BumpKind::BallIndicator) {
        auto b = scan_bounds();
        return std::abs(b.V_minus - 1.0) <= 1e-12 && std::abs(b.V_plus - 1.0) <= 1e-12;
    }
    return true;  // flat tile and tent tile space by construction
}

double Thresholds::xi(double L_, double ell, double n, double r, double m) const {
    return prefactor * (V_minus - v_plus * std::pow(L_, d) * std::exp(-m * ell) - 26.0 * std::sqrt(n) * std::pow(ell, -r)) -
           V_o_norm;
}

Thresholds ModelParams::thresholds() const {
    if (!(bump.v_plus > 0.0)) throw PreconditionError("thresholds: v_plus must be positive");
    if (!(bump.R > 0.0)) throw PreconditionError("thresholds: R must be positive");
    auto b = scan_bounds();
    Thresholds t;
    t.d = d;
    t.V_minus = b.V_minus;
    t.v_plus = bump.v_plus;
    t.V_o_norm = b.V_o_norm;
    double denom = 2.0 * bump.R * bump.R * std::pow(2.0 * bump.R + 1.0, d) * bump.v_plus;
    t.prefactor = mu * M_PI * M_PI * b.G_minus * b.G_minus / denom;
    t.E_spc = t.prefactor * b.V_minus - b.V_o_norm;
    t.E_M = t.E_spc * b.V_minus / b.V_plus;
    return t;
}

// ---------------------------------------------------------------------------
// Serialization. Key names are part of the interface.

std::string ModelParams::to_json_string() const {
    json j;
    j["d"] = d;
    j["mu"] = mu;
    j["L"] = L;
    j["h"] = h;
    j["bump"]["kind"] = to_string(bump.kind);
    j["bump"]["r"] = bump.r;
    j["bump"]["R"] = bump.R;
    j["bump"]["v_minus"] = bump.v_minus;
    j["bump"]["v_plus"] = bump.v_plus;
    j["density"]["knots"] = density.knots;
    j["density"]["values"] = density.values;
    j["density"]["lipschitz"] = density.lipschitz_regular;
    j["G"]["kind"] = G.kind;
    j["G"]["value"] = G.value;
    j["G"]["amp"] = G.amp;
    j["V_o"]["kind"] = V_o.kind;
    j["V_o"]["value"] = V_o.value;
    j["V_o"]["amp"] = V_o.amp;
    j["seed"] = seed;
    return j.dump();
}

ModelParams ModelParams::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("model parse error: ") + e.what());
    }
    ModelParams p;
    try {
        p.d = j.at("d").get<int>();
        p.mu = j.at("mu").get<double>();
        p.L = j.at("L").get<double>();
        p.h = j.at("h").get<double>();
        const auto& jb = j.at("bump");
        p.bump.kind = bump_kind_from_string(jb.at("kind").get<std::string>());
        p.bump.r = jb.at("r").get<double>();
        p.bump.R = jb.at("R").get<double>();
        p.bump.v_minus = jb.at("v_minus").get<double>();
        p.bump.v_plus = jb.at("v_plus").get<double>();
        const auto& jd = j.at("density");
        p.density.knots = jd.at("knots").get<std::vector<double>>();
        p.density.values = jd.at("values").get<std::vector<double>>();
        p.density.lipschitz_regular = jd.value("lipschitz", false);
        p.density.finalize();
        p.G.kind = j.at("G").at("kind").get<std::string>();
        p.G.value = j.at("G").value("value", 1.0);
        p.G.amp = j.at("G").value("amp", 0.0);
        p.V_o.kind = j.at("V_o").at("kind").get<std::string>();
        p.V_o.value = j.at("V_o").value("value", 0.0);
        p.V_o.amp = j.at("V_o").value("amp", 0.0);
        p.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model schema error: ") + e.what());
    }
    p.validate();
    return p;
}

std::vector<double> build_bump_profile(BumpKind kind, double r, double R, double v_minus, double v_plus,
                                       const ModelParams& grid_owner) {
    BumpProfile b{kind, r, R, v_minus, v_plus};
    b.validate();
    const ModelParams& p = grid_owner;
    int m = p.nodes_per_dim();
    int nd[3] = {m, p.d > 1 ? m : 1, p.d > 2 ? m : 1};
    std::vector<double> field;
    field.reserve(static_cast<std::size_t>(nd[0]) * nd[1] * nd[2]);
    double x[3] = {0, 0, 0};
    for (int i = 0; i < nd[0]; ++i) {
        x[0] = -p.L / 2 + (i + 1) * p.h;
        for (int j = 0; j < nd[1]; ++j) {
            if (p.d > 1) x[1] = -p.L / 2 + (j + 1) * p.h;
            for (int k = 0; k < nd[2]; ++k) {
                if (p.d > 2) x[2] = -p.L / 2 + (k + 1) * p.h;
                double v = b.value(x, p.d);
                bool in_lower = true, in_upper = true;
                for (int c = 0; c < p.d; ++c) {
                    if (x[c] < -r || x[c] >= r) in_lower = false;
                    if (x[c] < -R || x[c] >= R) in_upper = false;
                }
                if (in_lower && v < v_minus - 1e-12)
                    throw PreconditionError("bump profile violates lower sandwich bound at a grid node");
                if (v > (in_upper ? v_plus : 0.0) + 1e-12)
                    throw PreconditionError("bump profile violates upper sandwich bound at a grid node");
                field.push_back(v);
            }
        }
    }
    return field;
}

}  // namespace rsl
