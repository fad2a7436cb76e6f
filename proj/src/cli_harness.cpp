#include "mhdlayer/cli_harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "mhdlayer/errors.hpp"

namespace mhdlayer {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::correctors: return "correctors";
        case Experiment::lemma31: return "lemma31";
        case Experiment::simulate: return "simulate";
        case Experiment::inviscid_limit: return "inviscid-limit";
        case Experiment::diffusion_limit: return "diffusion-limit";
        case Experiment::budget: return "budget";
        case Experiment::betas: return "betas";
    }
    return "?";
}

Experiment experiment_from_string(const std::string& s) {
    for (Experiment e : {Experiment::correctors, Experiment::lemma31, Experiment::simulate, Experiment::inviscid_limit,
                         Experiment::diffusion_limit, Experiment::budget, Experiment::betas})
        if (to_string(e) == s) return e;
    throw ConfigError("unknown experiment '" + s + "'");
}

GridPtr ExperimentConfig::make_grid() const { return build_grid(grid.nx, grid.nz, grid.h, grid.stretch); }

IdealState ExperimentConfig::make_state() const {
    return make_ideal_state(state.kind, state.sign, state.U, state.B, state.amplitude, grid.h);
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------- parsing

namespace {

struct Frame {
    bool object = false;
    std::set<std::string> keys;
    std::string key;
    int index = -1;
};

std::string frames_path(const std::vector<Frame>& st) {
    std::string p = "$";
    for (const auto& f : st) {
        if (f.object && !f.key.empty()) p += "." + f.key;
        if (!f.object && f.index >= 0) p += "[" + std::to_string(f.index) + "]";
    }
    return p;
}

ojson parse_strict(const std::string& text) {
    std::vector<Frame> st;
    auto bump = [&] {
        if (!st.empty() && !st.back().object) ++st.back().index;
    };
    ojson::parser_callback_t cb = [&](int, ojson::parse_event_t ev, ojson& parsed) {
        using E = ojson::parse_event_t;
        switch (ev) {
            case E::object_start:
                bump();
                st.push_back(Frame{true, {}, {}, -1});
                break;
            case E::array_start:
                bump();
                st.push_back(Frame{false, {}, {}, -1});
                break;
            case E::object_end:
            case E::array_end:
                st.pop_back();
                break;
            case E::key: {
                const std::string k = parsed.get<std::string>();
                auto& f = st.back();
                f.key = k;
                if (!f.keys.insert(k).second) throw ConfigError("duplicate key at " + frames_path(st));
                break;
            }
            case E::value:
                bump();
                break;
        }
        return true;
    };
    try {
        return ojson::parse(text, cb);
    } catch (const ojson::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
}

class Reader {
public:
    Reader(const ojson& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
    }

    void allow(std::initializer_list<const char*> keys) const {
        std::set<std::string> ok(keys.begin(), keys.end());
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!ok.count(it.key())) throw ConfigError("unknown key at " + path_ + "." + it.key());
    }

    bool has(const char* k) const { return j_.contains(k); }
    std::string at(const char* k) const { return path_ + "." + k; }

    double num(const char* k, double def) const {
        if (!has(k)) return def;
        const auto& v = j_.at(k);
        if (!v.is_number()) throw ConfigError(at(k) + " must be a number");
        return v.get<double>();
    }
    long integer(const char* k, long def) const {
        if (!has(k)) return def;
        const auto& v = j_.at(k);
        if (!v.is_number_integer()) throw ConfigError(at(k) + " must be an integer");
        return v.get<long>();
    }
    std::uint64_t uinteger(const char* k, std::uint64_t def) const {
        if (!has(k)) return def;
        const auto& v = j_.at(k);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long>() < 0))
            throw ConfigError(at(k) + " must be a non-negative integer");
        return v.get<std::uint64_t>();
    }
    bool boolean(const char* k, bool def) const {
        if (!has(k)) return def;
        const auto& v = j_.at(k);
        if (!v.is_boolean()) throw ConfigError(at(k) + " must be a boolean");
        return v.get<bool>();
    }
    std::string str(const char* k, const std::string& def) const {
        if (!has(k)) return def;
        const auto& v = j_.at(k);
        if (!v.is_string()) throw ConfigError(at(k) + " must be a string");
        return v.get<std::string>();
    }
    std::vector<double> nums(const char* k, const std::vector<double>& def) const {
        if (!has(k)) return def;
        const auto& v = j_.at(k);
        if (!v.is_array()) throw ConfigError(at(k) + " must be an array of numbers");
        std::vector<double> out;
        for (size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw ConfigError(at(k) + "[" + std::to_string(i) + "] must be a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }
    Reader sub(const char* k) const { return Reader(has(k) ? j_.at(k) : empty(), at(k)); }
    const ojson& raw(const char* k) const { return j_.at(k); }

    template <class F>
    auto enumv(const char* k, F&& conv, decltype(conv(std::string())) def) const {
        if (!has(k)) return def;
        const std::string s = str(k, "");
        try {
            return conv(s);
        } catch (const ConfigError& e) {
            throw ConfigError(at(k) + ": " + e.what());
        }
    }

private:
    static const ojson& empty() {
        static const ojson e = ojson::object();
        return e;
    }
    const ojson& j_;
    std::string path_;
};

Profile read_profile(const Reader& r, const Profile& def) {
    r.allow({"name", "scale"});
    Profile p;
    p.name = r.str("name", def.name);
    p.scale = r.num("scale", def.scale);
    return p;
}

int to_int(long v, const std::string& where) {
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        throw ConfigError(where + " out of range");
    return static_cast<int>(v);
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    const ojson j = parse_strict(text);
    const Reader r(j, "$");
    r.allow({"experiment", "grid", "state", "family", "eps", "solver", "corrector", "perturbation", "diffusion",
             "lemma31", "budget", "output_dir", "seed", "snapshot_cadence", "jobs"});
    ExperimentConfig c;
    if (!r.has("experiment")) throw ConfigError("missing key at $.experiment");
    c.experiment = r.enumv("experiment", experiment_from_string, c.experiment);

    {
        const Reader g = r.sub("grid");
        g.allow({"nx", "nz", "h", "stretch"});
        c.grid.nx = to_int(g.integer("nx", c.grid.nx), g.at("nx"));
        c.grid.nz = to_int(g.integer("nz", c.grid.nz), g.at("nz"));
        c.grid.h = g.num("h", c.grid.h);
        c.grid.stretch = g.num("stretch", c.grid.stretch);
    }
    {
        const Reader s = r.sub("state");
        s.allow({"kind", "sign", "U", "B", "amplitude"});
        c.state.kind = s.enumv("kind", ideal_kind_from_string, c.state.kind);
        c.state.sign = to_int(s.integer("sign", c.state.sign), s.at("sign"));
        c.state.U = read_profile(s.sub("U"), c.state.U);
        c.state.B = read_profile(s.sub("B"), c.state.B);
        c.state.amplitude = s.num("amplitude", c.state.amplitude);
    }
    {
        const Reader f = r.sub("family");
        f.allow({"law", "alpha", "kappa", "table"});
        c.family.law = f.enumv("law", eps_law_from_string, c.family.law);
        c.family.alpha = f.num("alpha", c.family.alpha);
        c.family.kappa = f.num("kappa", c.family.kappa);
        if (f.has("table")) {
            const ojson& t = f.raw("table");
            if (!t.is_array()) throw ConfigError(f.at("table") + " must be an array of [eps, eps1, eps2]");
            for (size_t i = 0; i < t.size(); ++i) {
                const std::string where = f.at("table") + "[" + std::to_string(i) + "]";
                if (!t[i].is_array() || t[i].size() != 3) throw ConfigError(where + " must be [eps, eps1, eps2]");
                std::array<double, 3> row{};
                for (int k = 0; k < 3; ++k) {
                    if (!t[i][k].is_number()) throw ConfigError(where + " must hold numbers");
                    row[k] = t[i][k].get<double>();
                }
                c.family.table.push_back(row);
            }
        }
    }
    c.eps = r.nums("eps", c.eps);
    {
        const Reader s = r.sub("solver");
        s.allow({"eps1", "eps2", "dt", "cfl_limit", "T"});
        c.solver.eps1 = s.num("eps1", c.solver.eps1);
        c.solver.eps2 = s.num("eps2", c.solver.eps2);
        c.solver.dt = s.num("dt", c.solver.dt);
        c.solver.cfl_limit = s.num("cfl_limit", c.solver.cfl_limit);
        c.solver.T = s.num("T", c.solver.T);
    }
    {
        const Reader s = r.sub("corrector");
        s.allow({"enabled", "nu1_star", "nu2_star", "s_shift", "mode", "t"});
        c.corrector.enabled = s.boolean("enabled", c.corrector.enabled);
        c.corrector.nu1_star = s.num("nu1_star", c.corrector.nu1_star);
        c.corrector.nu2_star = s.num("nu2_star", c.corrector.nu2_star);
        c.corrector.s_shift = s.num("s_shift", c.corrector.s_shift);
        c.corrector.mode = s.enumv("mode", corrector_mode_from_string, c.corrector.mode);
        c.corrector.t = s.num("t", c.corrector.t);
    }
    {
        const Reader s = r.sub("perturbation");
        s.allow({"enabled", "kappa", "eps"});
        c.perturbation.enabled = s.boolean("enabled", c.perturbation.enabled);
        c.perturbation.kappa = s.num("kappa", c.perturbation.kappa);
        c.perturbation.eps = s.num("eps", c.perturbation.eps);
    }
    {
        const Reader s = r.sub("diffusion");
        s.allow({"eps1", "eps2", "theta", "tau"});
        c.diffusion.eps1 = s.num("eps1", c.diffusion.eps1);
        c.diffusion.eps2 = s.nums("eps2", c.diffusion.eps2);
        c.diffusion.theta = s.num("theta", c.diffusion.theta);
        c.diffusion.tau = s.num("tau", c.diffusion.tau);
    }
    {
        const Reader s = r.sub("lemma31");
        s.allow({"nu", "per_layer"});
        c.lemma31.nu = s.nums("nu", c.lemma31.nu);
        c.lemma31.per_layer = to_int(s.integer("per_layer", c.lemma31.per_layer), s.at("per_layer"));
    }
    {
        const Reader s = r.sub("budget");
        s.allow({"family"});
        c.budget.family = s.enumv("family", budget_family_from_string, c.budget.family);
    }
    c.output_dir = r.str("output_dir", c.output_dir);
    c.seed = r.uinteger("seed", c.seed);
    c.snapshot_cadence = to_int(r.integer("snapshot_cadence", c.snapshot_cadence), r.at("snapshot_cadence"));
    c.jobs = to_int(r.integer("jobs", c.jobs), r.at("jobs"));

    validate_config(c);
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void validate_config(const ExperimentConfig& c) {
    require(c.grid.nx >= 4 && c.grid.nz >= 5, "$.grid: need nx >= 4 and nz >= 5");
    require(c.grid.h > 0.0, "$.grid.h must be > 0");
    require(c.grid.stretch >= 0.0, "$.grid.stretch must be >= 0");
    (void)c.make_grid();
    (void)c.make_state();

    require(c.solver.dt > 0.0, "$.solver.dt must be > 0");
    require(c.solver.cfl_limit > 0.0, "$.solver.cfl_limit must be > 0");
    require(c.solver.T >= 0.0, "$.solver.T must be >= 0");
    if (c.solver.eps1 < 0.0 || c.solver.eps2 < 0.0) throw DomainError("$.solver: eps1, eps2 must be >= 0");
    require(c.snapshot_cadence >= 1, "$.snapshot_cadence must be >= 1");
    require(c.jobs >= 1, "$.jobs must be >= 1");
    require(c.corrector.s_shift > 0.0, "$.corrector.s_shift must be > 0");
    require(c.lemma31.per_layer >= 1, "$.lemma31.per_layer must be >= 1");
    require(!c.output_dir.empty(), "$.output_dir must be non-empty");

    if (c.family.law == EpsLaw::shifted && !(c.family.alpha > 0.0))
        throw DomainError("$.family.alpha must be > 0");
    for (double e : c.eps)
        if (!(e > 0.0)) throw DomainError("$.eps entries must be > 0");
    for (double e : c.eps) {
        const auto [e1, e2] = c.family.eval(e);
        if (!(e1 > 0.0) || !(e2 > 0.0)) throw DomainError("$.family: eps1, eps2 must be > 0 on the eps range");
    }

    const auto& d = c.diffusion;
    if (!(d.tau >= 0.0 && d.tau < 1.0))
        throw DomainError("$.diffusion.tau = " + fmt17(d.tau) + " violates 'for any given 0 <= tau < 1'");
    if (!(d.theta > 0.0)) throw DomainError("$.diffusion.theta must be > 0");
    if (!(d.eps1 > 0.0)) throw DomainError("$.diffusion.eps1 must be > 0");
    for (double e : d.eps2)
        if (!(e > 0.0)) throw DomainError("$.diffusion.eps2 entries must be > 0");
    for (double n : c.lemma31.nu)
        if (!(n > 0.0)) throw DomainError("$.lemma31.nu entries must be > 0");

    switch (c.experiment) {
        case Experiment::inviscid_limit: {
            require(c.eps.size() >= 2, "$.eps needs at least two values for a rate fit");
            if (!(c.family.kappa > 1.0)) throw DomainError("$.family.kappa must satisfy kappa > 1");
            const double emax = *std::max_element(c.eps.begin(), c.eps.end());
            if (c.family.law != EpsLaw::custom) {
                const AssumptionReport a = check_assumption_2_1(c.family, assumption_grid(emax));
                if (!a.pass())
                    throw ConfigError("$.family: " + c.family.name() +
                                      " rejected by the eps1/eps2 convergence assumption (" + a.message + ")");
            }
            break;
        }
        case Experiment::diffusion_limit:
            require(d.eps2.size() >= 2, "$.diffusion.eps2 needs at least two values for a rate fit");
            break;
        case Experiment::lemma31:
            require(c.lemma31.nu.size() >= 2, "$.lemma31.nu needs at least two values");
            break;
        case Experiment::betas:
        case Experiment::budget:
            require(!c.eps.empty(), "$.eps must be non-empty");
            break;
        case Experiment::simulate:
        case Experiment::correctors:
            break;
    }
    if (c.experiment == Experiment::budget) {
        if (c.budget.family == BudgetFamily::K && c.corrector.mode != CorrectorMode::prandtl_heat)
            throw ConfigError("$.budget.family K requires $.corrector.mode = prandtl_heat");
        if (c.budget.family == BudgetFamily::J && c.corrector.mode != CorrectorMode::exact_exponential)
            throw ConfigError("$.budget.family J requires $.corrector.mode = exact_exponential");
    }
}

ojson serialize_config(const ExperimentConfig& c) {
    ojson j;
    j["experiment"] = to_string(c.experiment);
    j["grid"] = {{"nx", c.grid.nx}, {"nz", c.grid.nz}, {"h", c.grid.h}, {"stretch", c.grid.stretch}};
    j["state"] = {{"kind", to_string(c.state.kind)},
                  {"sign", c.state.sign},
                  {"U", {{"name", c.state.U.name}, {"scale", c.state.U.scale}}},
                  {"B", {{"name", c.state.B.name}, {"scale", c.state.B.scale}}},
                  {"amplitude", c.state.amplitude}};
    ojson table = ojson::array();
    for (const auto& r : c.family.table) table.push_back({r[0], r[1], r[2]});
    j["family"] = {{"law", to_string(c.family.law)},
                   {"alpha", c.family.alpha},
                   {"kappa", c.family.kappa},
                   {"table", table}};
    j["eps"] = c.eps;
    j["solver"] = {{"eps1", c.solver.eps1},
                   {"eps2", c.solver.eps2},
                   {"dt", c.solver.dt},
                   {"cfl_limit", c.solver.cfl_limit},
                   {"T", c.solver.T}};
    j["corrector"] = {{"enabled", c.corrector.enabled},     {"nu1_star", c.corrector.nu1_star},
                      {"nu2_star", c.corrector.nu2_star},   {"s_shift", c.corrector.s_shift},
                      {"mode", to_string(c.corrector.mode)}, {"t", c.corrector.t}};
    j["perturbation"] = {
        {"enabled", c.perturbation.enabled}, {"kappa", c.perturbation.kappa}, {"eps", c.perturbation.eps}};
    j["diffusion"] = {{"eps1", c.diffusion.eps1},
                      {"eps2", c.diffusion.eps2},
                      {"theta", c.diffusion.theta},
                      {"tau", c.diffusion.tau}};
    j["lemma31"] = {{"nu", c.lemma31.nu}, {"per_layer", c.lemma31.per_layer}};
    j["budget"] = {{"family", to_string(c.budget.family)}};
    j["output_dir"] = c.output_dir;
    j["seed"] = c.seed;
    j["snapshot_cadence"] = c.snapshot_cadence;
    j["jobs"] = c.jobs;
    return j;
}

// ---------------------------------------------------------------- persistence

std::string sha256_hex(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 init failed");
    }
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

void write_checkpoint(const MhdState& s, const fs::path& bin, const fs::path& sidecar, const ojson& extra) {
    const GridSpec& g = s.u.grid();
    {
        std::ofstream out(bin, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + bin.string());
        for (const ScalarField* f : {&s.u.f1, &s.u.f3, &s.b.f1, &s.b.f3, &s.p, &s.q})
            out.write(reinterpret_cast<const char*>(f->data().data()),
                      static_cast<std::streamsize>(f->size() * sizeof(double)));
        if (!out) throw std::runtime_error("write failed: " + bin.string());
    }
    ojson j;
    j["format"] = "float64-le";
    j["layout"] = "z-major; arrays u1, u3, b1, b3, p, q";
    j["grid"] = {{"nx", g.nx}, {"nz", g.nz}, {"h", g.h}, {"stretch", g.stretch}};
    j["t"] = s.t;
    j["step"] = s.step;
    j["free_magnetic_walls"] = s.free_magnetic_walls;
    j["binary"] = bin.filename().string();
    if (!extra.is_null()) j["config"] = extra;
    std::ofstream out(sidecar, std::ios::trunc);
    out << j.dump(2) << "\n";
}

MhdState read_checkpoint(const fs::path& bin, const fs::path& sidecar) {
    std::ifstream js(sidecar);
    if (!js) throw ConfigError("cannot read " + sidecar.string());
    const ojson j = ojson::parse(js);
    const auto& gj = j.at("grid");
    const GridPtr g = build_grid(gj.at("nx").get<int>(), gj.at("nz").get<int>(), gj.at("h").get<double>(),
                                 gj.at("stretch").get<double>());
    MhdState s;
    s.u = VectorField(g);
    s.b = VectorField(g);
    s.p = ScalarField(g);
    s.q = ScalarField(g);
    std::ifstream in(bin, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + bin.string());
    for (ScalarField* f : {&s.u.f1, &s.u.f3, &s.b.f1, &s.b.f3, &s.p, &s.q}) {
        in.read(reinterpret_cast<char*>(f->data().data()), static_cast<std::streamsize>(f->size() * sizeof(double)));
        if (!in) throw ConfigError("checkpoint binary is truncated");
    }
    s.t = j.at("t").get<double>();
    s.step = j.at("step").get<long>();
    s.free_magnetic_walls = j.at("free_magnetic_walls").get<bool>();
    return s;
}

// ---------------------------------------------------------------- experiments

namespace {

// Collects artifacts; removes them if the run does not complete.
class Writer {
public:
    explicit Writer(fs::path dir) : dir_(std::move(dir)) {
        created_dir_ = !fs::exists(dir_);
        fs::create_directories(dir_);
    }
    ~Writer() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& f : files_) fs::remove(dir_ / f, ec);
        fs::remove(dir_ / "manifest.json", ec);
        if (created_dir_ && fs::is_empty(dir_, ec)) fs::remove(dir_, ec);
    }

    fs::path path(const std::string& name) {
        if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
        return dir_ / name;
    }

    void text(const std::string& name, const std::string& body) {
        std::ofstream out(path(name), std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
        out << body;
        if (!out) throw std::runtime_error("write failed: " + (dir_ / name).string());
    }

    void json(const std::string& name, const ojson& j) { text(name, j.dump(2) + "\n"); }

    const std::vector<std::string>& files() const { return files_; }
    const fs::path& dir() const { return dir_; }
    void commit() { committed_ = true; }

private:
    fs::path dir_;
    std::vector<std::string> files_;
    bool created_dir_ = false;
    bool committed_ = false;
};

class Csv {
public:
    explicit Csv(std::initializer_list<const char*> header) {
        bool first = true;
        for (const char* h : header) {
            os_ << (first ? "" : ",") << h;
            first = false;
        }
        os_ << "\n";
    }
    template <class... A>
    void row(const A&... a) {
        bool first = true;
        ((os_ << (first ? "" : ",") << cell(a), first = false), ...);
        os_ << "\n";
    }
    std::string str() const { return os_.str(); }

private:
    static std::string cell(double v) { return fmt17(v); }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "true" : "false"; }
    std::ostringstream os_;
};

struct Outcome {
    std::vector<std::string> failed;
    void check(bool ok, const std::string& name) {
        if (!ok) failed.push_back(name);
    }
};

const char* kNormNote =
    "errors are reported in the norm, not its square; predicted slopes are half the exponents of the "
    "squared-norm bounds";

ojson rate_json(const std::string& family, const RateFit& f) {
    ojson j;
    j["family"] = family;
    j["slope"] = f.slope;
    j["r2"] = f.r2;
    j["predicted_slope"] = f.predicted_slope;
    j["verdict"] = f.pass ? "pass" : "fail";
    j["margin"] = f.margin;
    j["note"] = kNormNote;
    ojson pairs = ojson::array();
    for (const auto& [e, v] : f.pairs) pairs.push_back({e, v});
    j["pairs"] = pairs;
    return j;
}

std::string diagnostics_csv(const std::vector<EnergyDiag>& d) {
    Csv c{"t", "energy", "dissipation", "div_u_max", "div_b_max"};
    for (const auto& r : d) c.row(r.t, r.energy, r.dissipation, r.div_u_max, r.div_b_max);
    return c.str();
}

std::string envelope_csv(const std::vector<StudyRow>& rows) {
    Csv c{"eps", "t", "lhs", "base", "grad_term"};
    for (const auto& r : rows)
        for (const auto& e : r.envelope) c.row(r.eps, e.t, e.lhs, e.base, e.grad_term);
    return c.str();
}

std::string run_diag_name(size_t i) {
    char b[40];
    std::snprintf(b, sizeof b, "diagnostics_%02zu.csv", i);
    return b;
}

bool divergence_ok(const std::vector<EnergyDiag>& d) {
    for (const auto& r : d)
        if (!(r.div_u_max <= 1e-10 && r.div_b_max <= 1e-10)) return false;
    return true;
}

double nu_or(double nu, double fallback) { return nu > 0.0 ? nu : fallback; }

std::optional<PerturbationSpec> perturbation_for(const ExperimentConfig& c, double eps) {
    if (!c.perturbation.enabled) return std::nullopt;
    const double kappa = c.perturbation.kappa > 0.0 ? c.perturbation.kappa : c.family.kappa;
    const double e = c.perturbation.eps > 0.0 ? c.perturbation.eps : eps;
    return PerturbationSpec{kappa, e, c.seed};
}

// ---- correctors

void exp_correctors(const ExperimentConfig& c, Writer& w, Outcome& out) {
    const GridPtr g = c.make_grid();
    const IdealState st = c.make_state();
    CorrectorParams cp;
    cp.nu1_star = nu_or(c.corrector.nu1_star, c.solver.eps1);
    cp.nu2_star = nu_or(c.corrector.nu2_star, c.solver.eps2);
    cp.s_shift = c.corrector.s_shift;
    cp.mode = c.corrector.mode;
    if (!(cp.nu1_star > 0.0) || !(cp.nu2_star > 0.0)) throw DomainError("corrector nu*_star must be > 0");
    const CorrectorSet cs = build_correctors(st, cp, make_cutoffs(st.h));
    const double t = c.corrector.t, h = st.h;

    double bu = 0.0, bb = 0.0;
    for (int j = 0; j < g->nx; ++j)
        for (double z : {0.0, h}) {
            const IdealValue iv = eval_ideal(st, g->x(j), z, t);
            const FieldJet ju = cs.u(g->x(j), z, t), jb = cs.b(g->x(j), z, t);
            bu = std::max({bu, std::abs(iv.u0[0] + ju.v1), std::abs(iv.u0[1] + ju.v3)});
            bb = std::max({bb, std::abs(iv.b0[0] + jb.v1), std::abs(iv.b0[1] + jb.v3)});
        }

    Csv csv{"check", "value", "threshold", "pass"};
    auto add = [&](const std::string& name, double v, double thr) {
        const bool ok = v <= thr;
        csv.row(name, v, thr, ok);
        out.check(ok, name);
    };
    add("boundary_match_u", bu, 1e-12);
    add("boundary_match_b", bb, 1e-12);

    const std::pair<LayerPiece, const char*> pieces[] = {{LayerPiece::u_plus, "u_plus"},
                                                         {LayerPiece::u_minus, "u_minus"},
                                                         {LayerPiece::b_plus, "b_plus"},
                                                         {LayerPiece::b_minus, "b_minus"}};
    for (const auto& [p, name] : pieces) {
        const VectorField f = cs.sample_piece(p, g, t);
        const bool plus = p == LayerPiece::u_plus || p == LayerPiece::b_plus;
        double leak = 0.0;
        for (int k = 0; k < g->nz; ++k) {
            const double z = g->z[k];
            if (plus ? z < 0.25 * h : z > 0.75 * h) continue;
            for (int j = 0; j < g->nx; ++j) leak = std::max({leak, std::abs(f.f1(j, k)), std::abs(f.f3(j, k))});
        }
        add(std::string("support_") + name, leak, 0.0);
        csv.row(std::string("divergence_max_") + name, max_abs(divergence(f)), std::string(""), std::string(""));
    }
    if (c.corrector.mode == CorrectorMode::prandtl_heat)
        csv.row(std::string("prandtl_residual_u"), prandtl_residual(cs, cp.nu1_star, g, t), std::string(""),
                std::string(""));
    w.text("correctors.csv", csv.str());
}

// ---- lemma31

void exp_lemma31(const ExperimentConfig& c, Writer& w, Outcome& out) {
    const IdealState st = c.make_state();
    std::vector<double> nus = c.lemma31.nu;
    std::sort(nus.begin(), nus.end(), std::greater<>());
    std::vector<Lemma31Report> reps(nus.size());
    std::vector<std::string> warnings(nus.size());
    parallel_for(static_cast<int>(nus.size()), c.jobs, [&](int i) {
        CorrectorParams cp;
        cp.nu1_star = cp.nu2_star = nus[i];
        cp.s_shift = c.corrector.s_shift;
        cp.mode = c.corrector.mode;
        const CorrectorSet cs = build_correctors(st, cp, make_cutoffs(st.h));
        const GridPtr g = layer_resolving_grid(c.grid.nx, c.grid.nz, c.grid.h, nus[i], c.lemma31.per_layer);
        reps[i] = lemma31_norms(cs, g, c.corrector.t);
    });

    std::map<std::string, SlopeFit> fits;
    std::map<std::string, double> expected;
    for (const auto& [name, s] : lemma31_expected_slopes()) expected[name] = s;
    for (const auto& [name, v0] : reps.front().values) {
        (void)v0;
        std::vector<std::pair<double, double>> xy;
        bool positive = true;
        for (size_t i = 0; i < nus.size(); ++i) {
            const double v = reps[i].values.at(name);
            positive = positive && v > 0.0;
            xy.emplace_back(nus[i], v);
        }
        if (positive) fits[name] = scaling_fit(xy);
    }

    Csv csv{"nu", "norm_name", "value", "fitted_slope"};
    for (size_t i = 0; i < nus.size(); ++i)
        for (const auto& [name, v] : reps[i].values)
            csv.row(nus[i], name, v, fits.count(name) ? fmt17(fits[name].slope) : std::string("nan"));
    w.text("lemma31.csv", csv.str());

    ojson slopes = ojson::array();
    for (const auto& [name, pred] : lemma31_expected_slopes()) {
        if (!fits.count(name)) continue;
        RateFit f;
        f.slope = fits[name].slope;
        f.r2 = fits[name].r2;
        f.predicted_slope = pred;
        f.margin = 0.05 - std::abs(f.slope - pred);
        f.pass = f.margin >= 0.0;
        ojson j = {{"family", name},      {"slope", f.slope},
                   {"r2", f.r2},          {"predicted_slope", pred},
                   {"verdict", f.pass ? "pass" : "fail"}, {"tolerance", 0.05}};
        slopes.push_back(j);
        out.check(f.pass, "lemma31 slope " + name);
    }
    for (const auto& name : lemma31_bounded_norms()) {
        if (!reps.front().values.count(name)) continue;
        double lo = INFINITY, hi = 0.0;
        for (const auto& r : reps) {
            lo = std::min(lo, r.values.at(name));
            hi = std::max(hi, r.values.at(name));
        }
        const double var = hi > 0.0 ? (hi - lo) / hi : 0.0;
        const bool ok = var < 0.05;
        slopes.push_back({{"family", name},
                          {"slope", fits.count(name) ? fits[name].slope : 0.0},
                          {"r2", fits.count(name) ? fits[name].r2 : 1.0},
                          {"predicted_slope", 0.0},
                          {"relative_variation", var},
                          {"verdict", ok ? "pass" : "fail"}});
        out.check(ok, "lemma31 bounded " + name);
    }
    ojson doc;
    doc["note"] = "slopes of log(norm) against log(nu); bounded norms must vary by less than 5%";
    doc["fits"] = slopes;
    ojson warn = ojson::array();
    for (const auto& r : reps)
        if (!r.warning.empty()) warn.push_back(r.warning);
    doc["warnings"] = warn;
    w.json("slopes.json", doc);
}

// ---- simulate

void exp_simulate(const ExperimentConfig& c, Writer& w, Outcome& out) {
    const GridPtr g = c.make_grid();
    const IdealState st = c.make_state();
    const bool free_b = c.solver.eps2 == 0.0;
    std::optional<CorrectorSet> cs;
    if (c.corrector.enabled && st.kind != IdealKind::well_prepared) {
        CorrectorParams cp;
        cp.nu1_star = nu_or(c.corrector.nu1_star, c.solver.eps1);
        cp.nu2_star = nu_or(c.corrector.nu2_star, c.solver.eps2 > 0.0 ? c.solver.eps2 : cp.nu1_star);
        cp.s_shift = c.corrector.s_shift;
        cp.mode = c.corrector.mode;
        if (!(cp.nu1_star > 0.0)) throw DomainError("corrector needs eps1 > 0 or an explicit nu1_star");
        if (free_b)
            cs = CorrectorSet(wall_traces(st), cp, make_cutoffs(st.h), st.h, true, false);
        else
            cs = build_correctors(st, cp, make_cutoffs(st.h));
    }
    const MhdState s0 =
        init_state(st, cs ? &*cs : nullptr, perturbation_for(c, std::max(c.solver.eps1, c.solver.eps2)), g, free_b);
    SolverConfig sc;
    sc.eps1 = c.solver.eps1;
    sc.eps2 = c.solver.eps2;
    sc.dt = c.solver.dt;
    sc.cfl_limit = c.solver.cfl_limit;
    sc.grid = g;

    Csv err{"t", "raw_l2", "corrected_l2", "corrected_linf", "elsasser_l2"};
    auto obs = [&](const MhdState& s) {
        const ErrorNorms n = error_norms(s, st, cs ? &*cs : nullptr);
        err.row(s.t, n.raw_l2, n.corrected_l2, n.corrected_linf, n.elsasser_l2);
    };
    RunResult r = free_b ? run_reference_viscous(s0, sc, c.solver.T, c.snapshot_cadence, obs)
                         : MhdSolver(sc).run(s0, c.solver.T, c.snapshot_cadence, obs);
    w.text("diagnostics.csv", diagnostics_csv(r.diagnostics));
    w.text("errors.csv", err.str());
    write_checkpoint(r.final, w.path("checkpoint.bin"), w.path("checkpoint.json"), serialize_config(c));
    out.check(divergence_ok(r.diagnostics), "divergence <= 1e-10");
    if (sc.eps1 > 0.0 && sc.eps2 > 0.0) {
        bool mono = true;
        for (size_t i = 1; i < r.diagnostics.size(); ++i)
            if (r.diagnostics[i].energy > r.diagnostics[i - 1].energy * (1.0 + 1e-14)) mono = false;
        out.check(mono, "energy non-increasing");
    }
}

// ---- inviscid limit

void exp_inviscid(const ExperimentConfig& c, Writer& w, Outcome& out) {
    InviscidStudyConfig ic;
    ic.family = c.family;
    ic.eps_list = c.eps;
    ic.state = c.make_state();
    ic.T = c.solver.T;
    ic.grid = c.make_grid();
    ic.dt = c.solver.dt;
    ic.cfl_limit = c.solver.cfl_limit;
    ic.cadence = c.snapshot_cadence;
    ic.seed = c.seed;
    ic.perturb = c.perturbation.enabled;
    ic.mode = c.corrector.mode;
    ic.s_shift = c.corrector.s_shift;
    ic.jobs = c.jobs;
    const InviscidStudyResult r = run_inviscid_limit_study(ic);

    Csv csv{"eps", "eps1", "eps2", "raw_l2_sup", "corrected_l2_sup", "elsasser_l2_sup", "predicted_bound",
            "corrected_linf_sup"};
    for (const auto& row : r.rows)
        csv.row(row.eps, row.eps1, row.eps2, row.raw_l2_sup, row.corrected_l2_sup, row.elsasser_l2_sup,
                row.predicted_bound, row.corrected_linf_sup);
    w.text("inviscid.csv", csv.str());
    w.text("envelope.csv", envelope_csv(r.rows));
    for (size_t i = 0; i < r.rows.size(); ++i) w.text(run_diag_name(i), diagnostics_csv(r.rows[i].diagnostics));

    ojson j = rate_json(c.family.name(), r.fit);
    j["envelope"] = {{"delta", kEnvelopeDelta},
                     {"C", r.envelope_C},
                     {"margin", kEnvelopeMargin},
                     {"verdict", r.envelope_ok ? "pass" : "fail"}};
    j["linf_trend"] = {{"monotone_decreasing", r.linf_monotone}, {"verdict", r.linf_monotone ? "pass" : "fail"}};
    w.json("rates.json", j);

    out.check(r.fit.pass, "inviscid rate slope");
    out.check(r.envelope_ok, "elsasser envelope");
    out.check(r.linf_monotone, "corrected Linf trend");
    bool div = true;
    for (const auto& row : r.rows) div = div && divergence_ok(row.diagnostics);
    out.check(div, "divergence <= 1e-10");
}

// ---- diffusion limit

void exp_diffusion(const ExperimentConfig& c, Writer& w, Outcome& out) {
    DiffusionStudyConfig dc;
    dc.eps1 = c.diffusion.eps1;
    dc.eps2_list = c.diffusion.eps2;
    dc.theta = c.diffusion.theta;
    dc.tau = c.diffusion.tau;
    dc.state = c.make_state();
    dc.T = c.solver.T;
    dc.grid = c.make_grid();
    dc.dt = c.solver.dt;
    dc.cfl_limit = c.solver.cfl_limit;
    dc.cadence = c.snapshot_cadence;
    dc.seed = c.seed;
    dc.perturb = c.perturbation.enabled;
    dc.kappa = c.perturbation.kappa > 0.0 ? c.perturbation.kappa : c.family.kappa;
    dc.perturb_eps = c.perturbation.eps > 0.0 ? c.perturbation.eps : dc.eps1;
    dc.jobs = c.jobs;
    const DiffusionStudyResult r = run_diffusion_limit_study(dc);

    Csv csv{"eps2", "nu2_star", "err_l2_sup", "predicted_bound"};
    for (const auto& row : r.rows) csv.row(row.eps2, row.nu_star, row.err_l2_sup, row.predicted_bound);
    w.text("diffusion.csv", csv.str());
    for (size_t i = 0; i < r.rows.size(); ++i) w.text(run_diag_name(i), diagnostics_csv(r.rows[i].diagnostics));
    ojson j = rate_json("diffusion(eps1=" + fmt17(dc.eps1) + ", tau=" + fmt17(dc.tau) + ")", r.fit);
    w.json("rates.json", j);
    out.check(r.fit.pass, "diffusion rate slope");
}

// ---- budget

void exp_budget(const ExperimentConfig& c, Writer& w, Outcome& out) {
    const GridPtr g = c.make_grid();
    const IdealState st = c.make_state();
    const BudgetFamily fam = c.budget.family;
    Csv csv{"t", "term_name", "value"};
    std::map<std::string, double> maxabs;
    auto record = [&](const BudgetReport& rep) {
        for (int i = 0; i < static_cast<int>(rep.terms.size()); ++i) {
            csv.row(rep.t, rep.term_name(i), rep.terms[i]);
            double& m = maxabs[rep.term_name(i)];
            m = std::max(m, std::abs(rep.terms[i]));
        }
    };

    SolverConfig sc;
    sc.dt = c.solver.dt;
    sc.cfl_limit = c.solver.cfl_limit;
    sc.grid = g;

    if (fam == BudgetFamily::I) {
        const double e1 = c.diffusion.eps1, e2 = c.diffusion.eps2.front();
        const auto pert = perturbation_for(c, e1);
        sc.eps1 = e1;
        sc.eps2 = 0.0;
        std::vector<MhdState> ref;
        run_reference_viscous(init_state(st, nullptr, pert, g, true), sc, c.solver.T, c.snapshot_cadence,
                              [&](const MhdState& s) { ref.push_back(s); });
        CorrectorParams cp;
        cp.nu2_star = cp.nu1_star = nu2_star_diffusion_limit(e2, c.diffusion.theta, c.diffusion.tau);
        const WallTraces tr = wall_traces(st);
        const CorrectorSet cs = build_magnetic_corrector(tr.b_lower, tr.b_upper, cp, make_cutoffs(st.h), st.h);
        sc.eps2 = e2;
        size_t idx = 0;
        const BudgetParams prm{e2, e1, e2};
        RunResult r = MhdSolver(sc).run(init_state(st, &cs, pert, g, false), c.solver.T, c.snapshot_cadence,
                                        [&](const MhdState& s) {
                                            record(energy_budget(s, nullptr, &cs, fam, prm, &ref.at(idx++)));
                                        });
        w.text("budgets.csv", csv.str());
        w.text("diagnostics.csv", diagnostics_csv(r.diagnostics));
        out.check(divergence_ok(r.diagnostics), "divergence <= 1e-10");
        return;
    }

    const double eps = c.eps.front();
    const auto [e1, e2] = c.family.eval(eps);
    CorrectorParams cp;
    cp.nu1_star = nu_or(c.corrector.nu1_star, eps);
    cp.nu2_star = nu_or(c.corrector.nu2_star, eps);
    cp.s_shift = c.corrector.s_shift;
    cp.mode = c.corrector.mode;
    const CorrectorSet cs = build_correctors(st, cp, make_cutoffs(st.h));
    sc.eps1 = e1;
    sc.eps2 = e2;
    const BudgetParams prm{eps, e1, e2};
    EnvelopeTracker env(st, &cs, eps, e1, e2, c.family.kappa);
    RunResult r = MhdSolver(sc).run(init_state(st, &cs, perturbation_for(c, eps), g), c.solver.T,
                                    c.snapshot_cadence, [&](const MhdState& s) {
                                        record(energy_budget(s, &st, &cs, fam, prm));
                                        env.observe(s);
                                    });
    w.text("budgets.csv", csv.str());
    w.text("diagnostics.csv", diagnostics_csv(r.diagnostics));
    {
        Csv e{"eps", "t", "lhs", "base", "grad_term"};
        for (const auto& s : env.samples()) e.row(eps, s.t, s.lhs, s.base, s.grad_term);
        w.text("envelope.csv", e.str());
    }
    ojson checks = ojson::array();
    if (fam == BudgetFamily::J && st.kind == IdealKind::elsasser_steady) {
        auto lim = [&](const char* name, double thr) {
            const double v = maxabs[name];
            const bool ok = v <= thr;
            checks.push_back({{"term", name}, {"max_abs", v}, {"threshold", thr}, {"verdict", ok ? "pass" : "fail"}});
            out.check(ok, std::string("budget ") + name);
        };
        for (const char* n : {"J2", "J4", "J5", "J7"}) lim(n, 1e-12);
        for (const char* n : {"J1", "J3", "J9"}) lim(n, 1e-10);
    }
    w.json("budget_checks.json", {{"family", to_string(fam)},
                                  {"eps", eps},
                                  {"envelope_C", env.calibrate()},
                                  {"checks", checks}});
    out.check(divergence_ok(r.diagnostics), "divergence <= 1e-10");
}

// ---- betas

void exp_betas(const ExperimentConfig& c, Writer& w, Outcome& out) {
    std::vector<double> eps = c.eps;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    const double emax = eps.front();
    Csv csv{"eps", "eps1", "eps2", "kappa", "beta0", "beta1", "beta2", "beta3", "beta4", "betabar0", "betabar1",
            "betabar2", "linf_bound"};
    Csv side{"eps", "name", "value", "threshold", "satisfied"};
    std::set<std::string> notes;
    for (double e : eps) {
        const BetaReport b = beta_report(c.family, e, emax);
        csv.row(e, b.eps1, b.eps2, b.kappa, b.beta0, b.beta1, b.beta2, b.beta3, b.beta4, b.betabar0, b.betabar1,
                b.betabar2, predict_linf_bound(b, b.eps1, b.eps2));
        for (const auto& s : b.side_conditions) {
            side.row(e, s.name, s.value, s.threshold, s.satisfied);
            out.check(s.satisfied, "side condition " + s.name + " at eps " + fmt17(e));
        }
        notes.insert(b.footnotes.begin(), b.footnotes.end());
    }
    w.text("betas.csv", csv.str());
    w.text("side_conditions.csv", side.str());
    ojson j;
    j["family"] = c.family.name();
    j["kappa"] = c.family.kappa;
    j["constants"] = "all constants set to 1; only eps-trends are meaningful";
    j["footnotes"] = std::vector<std::string>(notes.begin(), notes.end());
    if (c.family.law != EpsLaw::custom && eps.size() >= 1) {
        const AssumptionReport a = check_assumption_2_1(c.family, assumption_grid(emax));
        j["assumption"] = {{"expr1_ok", a.expr1_ok},
                           {"expr2_ok", a.expr2_ok},
                           {"expr3_ok", a.expr3_ok},
                           {"message", a.message},
                           {"verdict", a.pass() ? "pass" : "fail"}};
    }
    w.json("betas.json", j);
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    Writer w(cfg.output_dir);
    Outcome out;
    try {
        switch (cfg.experiment) {
            case Experiment::correctors: exp_correctors(cfg, w, out); break;
            case Experiment::lemma31: exp_lemma31(cfg, w, out); break;
            case Experiment::simulate: exp_simulate(cfg, w, out); break;
            case Experiment::inviscid_limit: exp_inviscid(cfg, w, out); break;
            case Experiment::diffusion_limit: exp_diffusion(cfg, w, out); break;
            case Experiment::budget: exp_budget(cfg, w, out); break;
            case Experiment::betas: exp_betas(cfg, w, out); break;
        }
    } catch (const ConfigError& e) {
        throw ConfigError(to_string(cfg.experiment) + ": " + e.what());
    } catch (const DomainError& e) {
        throw DomainError(to_string(cfg.experiment) + ": " + e.what());
    } catch (const PreconditionError& e) {
        throw PreconditionError(to_string(cfg.experiment) + ": " + e.what());
    } catch (const InstabilityError& e) {
        throw InstabilityError(e.step, to_string(cfg.experiment) + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(to_string(cfg.experiment) + ": " + e.what());
    }

    RunManifest m;
    m.config = serialize_config(cfg);
    m.failed_verdicts = out.failed;
    m.verdict_pass = out.failed.empty();
    for (const auto& f : w.files()) {
        const fs::path p = w.dir() / f;
        m.files.push_back({f, sha256_hex(p), fs::file_size(p)});
    }
    m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    ojson j;
    j["tool"] = "mhdlayer";
    j["tool_version"] = m.tool_version;
    j["experiment"] = to_string(cfg.experiment);
    j["config"] = m.config;
    j["wall_clock_s"] = m.wall_clock_s;
    j["verdict"] = m.verdict_pass ? "pass" : "fail";
    j["failed_verdicts"] = m.failed_verdicts;
    ojson files = ojson::array();
    for (const auto& f : m.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    j["files"] = files;
    {
        const fs::path mp = w.dir() / "manifest.json";
        std::ofstream o(mp, std::ios::trunc);
        o << j.dump(2) << "\n";
        if (!o) throw std::runtime_error("cannot write " + mp.string());
    }
    w.commit();
    return m;
}

}  // namespace mhdlayer
