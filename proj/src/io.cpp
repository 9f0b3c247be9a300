#include "entroflow/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

namespace entroflow {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<double> parse_numbers(const std::string& s) {
    std::vector<double> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) {
        if (!tok.empty() && tok.back() == ',') tok.pop_back();
        out.push_back(std::stod(tok));
    }
    return out;
}

NodeField to_field(const std::vector<double>& v) {
    NodeField f(static_cast<int>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) f[static_cast<int>(i)] = v[i];
    return f;
}

const std::string* find_key(const std::vector<std::pair<std::string, std::string>>& kv,
                            const std::string& key) {
    for (const auto& [k, v] : kv)
        if (k == key) return &v;
    return nullptr;
}

void reject_unknown(const std::vector<std::pair<std::string, std::string>>& kv,
                    std::initializer_list<const char*> allowed, const std::string& section) {
    for (const auto& [k, v] : kv) {
        bool ok = false;
        for (const char* a : allowed)
            if (k == a) ok = true;
        require(ok, "config: unknown key '" + k + "' in section [" + section + "]");
    }
}

NodeField parse_field_spec(const Space& space, const std::string& spec) {
    const int n = space.num_nodes();
    if (spec == "zero") return NodeField::Zero(n);
    if (spec.rfind("constant:", 0) == 0) {
        return NodeField::Constant(n, std::stod(spec.substr(9)));
    }
    if (spec.rfind("cosine:", 0) == 0) {
        // cosine:k,amp over the node index (useful on rings)
        auto rest = spec.substr(7);
        auto comma = rest.find(',');
        require(comma != std::string::npos, "config: cosine spec needs k,amplitude");
        const double k = std::stod(rest.substr(0, comma));
        const double amp = std::stod(rest.substr(comma + 1));
        NodeField f(n);
        for (int x = 0; x < n; ++x) f[x] = amp * std::cos(2.0 * std::numbers::pi * k * x / n);
        return f;
    }
    auto vals = parse_numbers(spec);
    require(static_cast<int>(vals.size()) == n, "config: field needs one value per node");
    return to_field(vals);
}

Density parse_density_spec(const Space& space, const std::string& spec) {
    const int n = space.num_nodes();
    if (spec == "uniform") return Density::uniform(space);
    if (spec.rfind("bump:", 0) == 0) {
        auto rest = spec.substr(5);
        auto comma = rest.find(',');
        require(comma != std::string::npos, "config: bump spec needs center,width");
        const int center = std::stoi(rest.substr(0, comma));
        const double width = std::stod(rest.substr(comma + 1));
        NodeField rho(n);
        for (int x = 0; x < n; ++x) {
            const double d = space.distance()(x, center);
            rho[x] = std::exp(-0.5 * d * d / (width * width)) + 0.05;
        }
        rho /= rho.dot(space.measure());
        return Density(space, rho);
    }
    auto vals = parse_numbers(spec);
    require(static_cast<int>(vals.size()) == n, "config: density needs one value per node");
    NodeField rho = to_field(vals);
    return Density(space, rho);
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    std::string current;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            require(line.back() == ']', "config: malformed section header '" + line + "'");
            current = trim(line.substr(1, line.size() - 2));
            cfg.sections.push_back({current, {}});
            continue;
        }
        auto eq = line.find('=');
        require(eq != std::string::npos, "config: expected key = value, got '" + line + "'");
        require(!current.empty(), "config: key outside any section: '" + line + "'");
        cfg.sections.back().second.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string ConfigFile::serialize() const {
    std::ostringstream out;
    for (const auto& [name, kv] : sections) {
        out << '[' << name << "]\n";
        for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
    }
    return out.str();
}

bool ConfigFile::has(const std::string& name) const {
    for (const auto& [n, kv] : sections)
        if (n == name) return true;
    return false;
}

const std::vector<std::pair<std::string, std::string>>& ConfigFile::section(const std::string& name) const {
    for (const auto& [n, kv] : sections)
        if (n == name) return kv;
    throw Error("config: missing section [" + name + "]");
}

Space load_space(const ConfigFile& cfg) {
    const auto& nodes_kv = cfg.section("nodes");
    reject_unknown(nodes_kv, {"n", "generator"}, "nodes");
    if (const auto* gen = find_key(nodes_kv, "generator")) {
        double beta = 1.0, K = 0.0;
        if (cfg.has("params")) {
            const auto& pkv = cfg.section("params");
            reject_unknown(pkv, {"beta", "K"}, "params");
            if (const auto* b = find_key(pkv, "beta")) beta = std::stod(*b);
            if (const auto* k = find_key(pkv, "K")) K = std::stod(*k);
        }
        Space s = Space::make(*gen, beta);
        (void)K;  // generators carry their own curvature tag
        return s;
    }
    const auto* nstr = find_key(nodes_kv, "n");
    require(nstr != nullptr, "config: [nodes] needs n or generator");
    const int n = std::stoi(*nstr);

    const auto& mkv = cfg.section("measure");
    reject_unknown(mkv, {"m"}, "measure");
    const auto* mstr = find_key(mkv, "m");
    require(mstr != nullptr, "config: [measure] needs m");
    auto mvals = parse_numbers(*mstr);
    require(static_cast<int>(mvals.size()) == n, "config: measure needs one value per node");

    std::vector<Edge> edges;
    for (const auto& [k, v] : cfg.section("edges")) {
        require(k == "edge", "config: unknown key '" + k + "' in section [edges]");
        auto nums = parse_numbers(v);
        require(nums.size() == 3, "config: edge needs 'u v w'");
        int u = static_cast<int>(nums[0]), vv = static_cast<int>(nums[1]);
        if (u > vv) std::swap(u, vv);
        edges.push_back({u, vv, nums[2]});
    }

    double beta = 1.0, K = 0.0;
    const auto& pkv = cfg.section("params");
    reject_unknown(pkv, {"beta", "K"}, "params");
    if (const auto* b = find_key(pkv, "beta")) beta = std::stod(*b);
    if (const auto* k = find_key(pkv, "K")) K = std::stod(*k);

    Eigen::MatrixXd dist;
    if (cfg.has("distance")) {
        std::vector<double> flat;
        for (const auto& [k, v] : cfg.section("distance")) {
            require(k == "row", "config: unknown key '" + k + "' in section [distance]");
            auto nums = parse_numbers(v);
            flat.insert(flat.end(), nums.begin(), nums.end());
        }
        require(static_cast<int>(flat.size()) == n * n, "config: distance needs n rows of n values");
        dist.resize(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) dist(i, j) = flat[i * n + j];
    } else {
        // Default ground distance: shortest path with edge length
        // sqrt(mean mass / conductance), the scaling under which the
        // canonical ring and grid recover their mesh width.
        std::vector<double> len(edges.size());
        for (size_t i = 0; i < edges.size(); ++i) {
            const double mbar = 0.5 * (mvals[edges[i].u] + mvals[edges[i].v]);
            len[i] = std::sqrt(mbar / edges[i].w);
        }
        dist = shortest_path_distance(n, edges, len);
    }
    return Space(n, std::move(edges), to_field(mvals), std::move(dist), beta, K, false, "file");
}

Space load_space_file(const std::filesystem::path& path) { return load_space(ConfigFile::load(path)); }

std::string serialize_space(const Space& space) {
    std::ostringstream out;
    out << "[nodes]\nn = " << space.num_nodes() << "\n[measure]\nm =";
    for (int x = 0; x < space.num_nodes(); ++x) out << ' ' << format_double(space.measure()[x]);
    out << "\n[edges]\n";
    for (const auto& e : space.edges())
        out << "edge = " << e.u << ' ' << e.v << ' ' << format_double(e.w) << '\n';
    out << "[distance]\n";
    for (int i = 0; i < space.num_nodes(); ++i) {
        out << "row =";
        for (int j = 0; j < space.num_nodes(); ++j) out << ' ' << format_double(space.distance()(i, j));
        out << '\n';
    }
    out << "[params]\nbeta = " << format_double(space.beta()) << "\nK = " << format_double(space.curvature_K())
        << '\n';
    return out.str();
}

LoadedScenario load_scenario(const ConfigFile& cfg) {
    const auto& skv = cfg.section("space");
    reject_unknown(skv, {"generator", "file", "beta"}, "space");
    double beta = 1.0;
    if (const auto* b = find_key(skv, "beta")) beta = std::stod(*b);
    std::unique_ptr<Space> owned;
    if (const auto* gen = find_key(skv, "generator")) {
        owned = std::make_unique<Space>(Space::make(*gen, beta));
    } else if (const auto* file = find_key(skv, "file")) {
        owned = std::make_unique<Space>(load_space_file(*file));
    } else {
        throw Error("config: [space] needs generator or file");
    }
    const Space& space = *owned;

    const auto& hkv = cfg.section("horizon");
    reject_unknown(hkv, {"t", "steps"}, "horizon");
    const auto* t = find_key(hkv, "t");
    const auto* steps = find_key(hkv, "steps");
    require(t && steps, "config: [horizon] needs t and steps");

    const auto& ikv = cfg.section("initial");
    reject_unknown(ikv, {"density"}, "initial");
    const auto* dens = find_key(ikv, "density");
    require(dens != nullptr, "config: [initial] needs density");

    Scenario sc(space, std::stod(*t), std::stoi(*steps), parse_density_spec(space, *dens));

    const auto& rkv = cfg.section("running_cost");
    reject_unknown(rkv, {"f", "sign"}, "running_cost");
    if (const auto* f = find_key(rkv, "f")) {
        NodeField field = parse_field_spec(space, *f);
        sc.running_cost.assign(sc.steps + 1, field);
    }
    if (const auto* sign = find_key(rkv, "sign")) sc.running_sign = std::stod(*sign);

    const auto& tkv = cfg.section("terminal");
    reject_unknown(tkv, {"type", "f", "g", "c"}, "terminal");
    const auto* type = find_key(tkv, "type");
    require(type != nullptr, "config: [terminal] needs type");
    if (*type == "linear") {
        const auto* f = find_key(tkv, "f");
        require(f != nullptr, "config: linear terminal needs f");
        sc.terminal = TerminalFunctional::linear(parse_field_spec(space, *f));
    } else if (*type == "quadratic") {
        const auto* g = find_key(tkv, "g");
        const auto* c = find_key(tkv, "c");
        require(g && c, "config: quadratic terminal needs g and c");
        NodeField lin = NodeField::Zero(space.num_nodes());
        if (const auto* f = find_key(tkv, "f")) lin = parse_field_spec(space, *f);
        sc.terminal = TerminalFunctional::quadratic(parse_field_spec(space, *g), std::stod(*c), lin);
    } else {
        throw Error("config: unknown terminal type '" + *type + "'");
    }

    if (cfg.has("optimizer")) {
        const auto& okv = cfg.section("optimizer");
        reject_unknown(okv, {"max_iters", "grad_tol", "step"}, "optimizer");
        if (const auto* mi = find_key(okv, "max_iters")) sc.optimizer.max_iters = std::stoi(*mi);
        if (const auto* gt = find_key(okv, "grad_tol")) sc.optimizer.grad_tol = std::stod(*gt);
        if (const auto* st = find_key(okv, "step")) sc.optimizer.initial_step = std::stod(*st);
    }
    sc.validate();
    return LoadedScenario{std::move(owned), std::move(sc)};
}

LoadedScenario load_scenario_file(const std::filesystem::path& path) {
    return load_scenario(ConfigFile::load(path));
}

std::string serialize_scenario(const Scenario& sc) {
    std::ostringstream out;
    out << "[space]\ngenerator = " << sc.space->name() << "\nbeta = " << format_double(sc.space->beta())
        << '\n';
    out << "[horizon]\nt = " << format_double(sc.t_start) << "\nsteps = " << sc.steps << '\n';
    out << "[initial]\ndensity =";
    for (int x = 0; x < sc.initial.size(); ++x) out << ' ' << format_double(sc.initial[x]);
    out << '\n';
    out << "[running_cost]\nf =";
    for (int x = 0; x < sc.running_cost[0].size(); ++x) out << ' ' << format_double(sc.running_cost[0][x]);
    out << "\nsign = " << format_double(sc.running_sign) << '\n';
    out << "[terminal]\ntype = "
        << (sc.terminal.kind == TerminalFunctional::Kind::Linear ? "linear" : "quadratic") << "\nf =";
    for (int x = 0; x < sc.terminal.f.size(); ++x) out << ' ' << format_double(sc.terminal.f[x]);
    out << '\n';
    if (sc.terminal.kind == TerminalFunctional::Kind::Quadratic) {
        out << "g =";
        for (int x = 0; x < sc.terminal.g.size(); ++x) out << ' ' << format_double(sc.terminal.g[x]);
        out << "\nc = " << format_double(sc.terminal.quad_coef) << '\n';
    }
    out << "[optimizer]\nmax_iters = " << sc.optimizer.max_iters
        << "\ngrad_tol = " << format_double(sc.optimizer.grad_tol)
        << "\nstep = " << format_double(sc.optimizer.initial_step) << '\n';
    return out.str();
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string curve_to_csv(const MeasureCurve& curve) {
    std::ostringstream out;
    out << 's';
    for (int x = 0; x < curve.slice(0).size(); ++x) out << ",node_" << x;
    out << '\n';
    for (int k = 0; k < curve.num_slices(); ++k) {
        out << format_double(curve.time(k));
        for (int x = 0; x < curve.slice(k).size(); ++x) out << ',' << format_double(curve.slice(k)[x]);
        out << '\n';
    }
    return out.str();
}

MeasureCurve curve_from_csv(const Space& space, const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "curve csv: empty");
    std::vector<Density> slices;
    double t0 = 0;
    bool first = true;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        for (auto& ch : line)
            if (ch == ',') ch = ' ';
        auto nums = parse_numbers(line);
        require(static_cast<int>(nums.size()) == space.num_nodes() + 1, "curve csv: bad row length");
        if (first) {
            t0 = nums[0];
            first = false;
        }
        NodeField rho(space.num_nodes());
        for (int x = 0; x < space.num_nodes(); ++x) rho[x] = nums[x + 1];
        slices.emplace_back(space, rho);
    }
    return MeasureCurve(space, t0, std::move(slices));
}

std::string drift_to_csv(const Space& space, const MeasureCurve& curve, const DriftField& drift) {
    std::ostringstream out;
    out << 's';
    for (const auto& e : space.edges()) out << ",edge_" << e.u << '_' << e.v;
    out << '\n';
    for (int k = 0; k < drift.num_intervals(); ++k) {
        out << format_double(curve.time(k));
        for (int i = 0; i < space.num_edges(); ++i) out << ',' << format_double(drift.slices[k][i]);
        out << '\n';
    }
    return out.str();
}

DriftField drift_from_csv(const Space& space, const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "drift csv: empty");
    DriftField d;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        for (auto& ch : line)
            if (ch == ',') ch = ' ';
        auto nums = parse_numbers(line);
        require(static_cast<int>(nums.size()) == space.num_edges() + 1, "drift csv: bad row length");
        EdgeField q(space.num_edges());
        for (int i = 0; i < space.num_edges(); ++i) q[i] = nums[i + 1];
        d.slices.push_back(q);
    }
    return d;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "io: cannot open " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "io: cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fnv1a_hex(const std::string& bytes) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

}  // namespace entroflow
