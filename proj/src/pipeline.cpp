#include "mqe/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mqe/error.hpp"
#include "mqe/kernels.hpp"
#include "mqe/parallel.hpp"
#include "mqe/propagation.hpp"
#include "mqe/rng.hpp"

namespace mqe {
namespace {

constexpr const char* kModule = "config";

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string fmt(std::uint64_t v) { return std::to_string(v); }

// Typed access to resolved values with key-naming errors.
class Reader {
public:
    explicit Reader(const ConfigValues& values) : values_(values) {}

    const std::string& str(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError(kModule, "missing required config key '" + key + "'");
        return it->second;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    double real(const std::string& key) const {
        const std::string& s = str(key);
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
            throw ConfigError(kModule, "key '" + key + "' expects a real number, got '" + s + "'");
        }
        return v;
    }

    std::uint64_t count(const std::string& key) const {
        const std::string& s = str(key);
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size()) {
            throw ConfigError(kModule, "key '" + key + "' expects a non-negative integer, got '" + s + "'");
        }
        return v;
    }

    bool flag(const std::string& key) const {
        const std::string& s = str(key);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError(kModule, "key '" + key + "' expects true/false, got '" + s + "'");
    }

private:
    const ConfigValues& values_;
};

}  // namespace

bool parse_ablation(std::string_view text, Ablation& out) noexcept {
    if (text == "none") out = Ablation::none;
    else if (text == "no-aug") out = Ablation::no_aug;
    else if (text == "no-mh") out = Ablation::no_mh;
    else if (text == "no-reg") out = Ablation::no_reg;
    else return false;
    return true;
}

const char* ablation_name(Ablation a) noexcept {
    switch (a) {
        case Ablation::none: return "none";
        case Ablation::no_aug: return "no-aug";
        case Ablation::no_mh: return "no-mh";
        case Ablation::no_reg: return "no-reg";
    }
    return "none";
}

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys{
        {"source", nullptr, "dataset source: sbm or dir"},
        {"data", "", "dataset directory (source=dir)"},
        {"out", nullptr, "output directory"},
        {"seed", "0", "root seed; noise, init, splits and probe seeds derive from it"},
        {"threads", "1", "worker thread cap"},
        {"kernels", "auto", "kernel set: auto, scalar or avx2"},
        {"sbm-n", "600", "SBM node count"},
        {"sbm-classes", "3", "SBM class count"},
        {"sbm-p-in", "0.05", "SBM within-class edge probability"},
        {"sbm-p-out", "0.005", "SBM between-class edge probability"},
        {"sbm-dim", "64", "SBM feature dimension"},
        {"sbm-class-sep", "1", "SBM class-mean scale"},
        {"sbm-within-std", "0.5", "SBM within-class feature spread"},
        {"noise-kind", "none", "injected feature noise: none, normal or uniform"},
        {"noise-alpha", "0.5", "fraction of perturbed nodes"},
        {"noise-beta", "1", "noise level"},
        {"noise-uniform-low", "0", "lower bound of uniform noise"},
        {"noise-uniform-high", "1", "upper bound of uniform noise"},
        {"knn-k", "5", "neighbors per node in the kNN augmentation"},
        {"hops", "8", "maximum propagation step L"},
        {"dim-f", "32", "meta-representation width"},
        {"dim-h", "64", "estimator hidden width"},
        {"sigma-floor", "0.001", "lower bound added to every estimated sigma"},
        {"lr", "0.01", "Adam learning rate"},
        {"epochs", "1000", "training epochs (full batch)"},
        {"adam-beta1", "0.9", "Adam beta1"},
        {"adam-beta2", "0.999", "Adam beta2"},
        {"adam-eps", "1e-08", "Adam epsilon"},
        {"log-sigma", "per-dimension", "log-sigma weight: per-dimension (d ln sigma) or single (ln sigma)"},
        {"ablation", "none", "none, no-aug, no-mh or no-reg"},
        {"probe-runs", "5", "linear-probe runs"},
        {"probe-epochs", "300", "linear-probe training epochs"},
        {"probe-lr", "0.01", "linear-probe learning rate"},
        {"probe-raw", "true", "also probe the raw (noisy) input features"},
        {"export-stack", "false", "write the target stack to stack.bin"},
    };
    return keys;
}

ConfigValues parse_config_text(std::string_view text, std::string_view origin) {
    ConfigValues values;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        const std::string where = std::string(origin) + ":" + std::to_string(line_no) + ": ";
        if (eq == std::string::npos) throw ConfigError(kModule, where + "expected key = value");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string value = trim(std::string_view(t).substr(eq + 1));
        bool known = false;
        for (const auto& k : config_keys()) known = known || key == k.name;
        if (!known) throw ConfigError(kModule, where + "unknown key '" + key + "'");
        if (!values.emplace(key, value).second) throw ConfigError(kModule, where + "duplicate key '" + key + "'");
    }
    return values;
}

ConfigValues read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(kModule, "cannot open config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path.string());
}

ExperimentConfig ExperimentConfig::from_values(const ConfigValues& given) {
    ConfigValues values = given;
    for (const auto& k : config_keys()) {
        if (k.default_value != nullptr && !values.count(k.name)) values.emplace(k.name, k.default_value);
    }
    const Reader r(values);
    ExperimentConfig c;
    c.source = r.str("source");
    if (c.source != "sbm" && c.source != "dir") throw ConfigError(kModule, "source must be 'sbm' or 'dir'");
    c.data_dir = r.str("data");
    if (c.source == "dir" && c.data_dir.empty()) throw ConfigError(kModule, "missing required config key 'data'");
    c.out_dir = r.str("out");
    if (c.out_dir.empty()) throw ConfigError(kModule, "missing required config key 'out'");
    c.seed = r.count("seed");
    c.threads = r.count("threads");
    if (c.threads < 1) throw ConfigError(kModule, "threads must be >= 1");
    c.kernels = r.str("kernels");
    kernels::Isa isa{};
    if (c.kernels != "auto" && !kernels::parse_isa(c.kernels, isa)) {
        throw ConfigError(kModule, "kernels must be auto, scalar or avx2");
    }

    const SeedPlan seeds = seed_plan(c.seed);
    c.sbm.nodes = r.count("sbm-n");
    c.sbm.classes = r.count("sbm-classes");
    c.sbm.p_in = r.real("sbm-p-in");
    c.sbm.p_out = r.real("sbm-p-out");
    c.sbm.dim = r.count("sbm-dim");
    c.sbm.class_sep = r.real("sbm-class-sep");
    c.sbm.within_std = r.real("sbm-within-std");
    c.sbm.seed = seeds.sbm;
    if (c.source == "sbm") c.sbm.validate();

    const std::string& kind = r.str("noise-kind");
    if (kind != "none") {
        NoiseSpec spec;
        if (!parse_noise_kind(kind, spec.kind)) throw ConfigError(kModule, "noise-kind must be none, normal or uniform");
        spec.alpha = r.real("noise-alpha");
        spec.beta = r.real("noise-beta");
        spec.uniform_low = r.real("noise-uniform-low");
        spec.uniform_high = r.real("noise-uniform-high");
        spec.seed = seeds.noise;
        spec.validate();
        c.noise = spec;
    }

    c.knn.k = r.count("knn-k");
    c.model.hops = r.count("hops");
    c.model.latent = r.count("dim-f");
    c.model.hidden = r.count("dim-h");
    c.model.sigma_floor = r.real("sigma-floor");
    c.model.validate();

    c.train.learning_rate = r.real("lr");
    c.train.epochs = r.count("epochs");
    c.train.beta1 = r.real("adam-beta1");
    c.train.beta2 = r.real("adam-beta2");
    c.train.epsilon = r.real("adam-eps");
    c.train.validate();

    const std::string& ls = r.str("log-sigma");
    if (ls == "per-dimension") c.log_sigma = LogSigmaTerm::per_dimension;
    else if (ls == "single") c.log_sigma = LogSigmaTerm::single;
    else throw ConfigError(kModule, "log-sigma must be per-dimension or single");
    if (!parse_ablation(r.str("ablation"), c.ablation)) {
        throw ConfigError(kModule, "ablation must be none, no-aug, no-mh or no-reg");
    }
    c.train.loss = loss_options(c.ablation, c.log_sigma, c.model.hops);

    c.probe.runs = r.count("probe-runs");
    if (c.probe.runs < 1) throw ConfigError(kModule, "probe-runs must be >= 1");
    c.probe.epochs = r.count("probe-epochs");
    c.probe.learning_rate = r.real("probe-lr");
    c.probe.seed = seeds.probe;
    c.probe_raw = r.flag("probe-raw");
    c.export_stack = r.flag("export-stack");
    return c;
}

ConfigValues ExperimentConfig::to_values() const {
    ConfigValues v;
    v["source"] = source;
    v["data"] = data_dir.string();
    v["out"] = out_dir.string();
    v["seed"] = fmt(seed);
    v["threads"] = fmt(static_cast<std::uint64_t>(threads));
    v["kernels"] = kernels;
    v["sbm-n"] = fmt(static_cast<std::uint64_t>(sbm.nodes));
    v["sbm-classes"] = fmt(static_cast<std::uint64_t>(sbm.classes));
    v["sbm-p-in"] = fmt(sbm.p_in);
    v["sbm-p-out"] = fmt(sbm.p_out);
    v["sbm-dim"] = fmt(static_cast<std::uint64_t>(sbm.dim));
    v["sbm-class-sep"] = fmt(sbm.class_sep);
    v["sbm-within-std"] = fmt(sbm.within_std);
    const NoiseSpec n = noise.value_or(NoiseSpec{});
    v["noise-kind"] = noise ? noise_kind_name(n.kind) : "none";
    v["noise-alpha"] = fmt(n.alpha);
    v["noise-beta"] = fmt(n.beta);
    v["noise-uniform-low"] = fmt(n.uniform_low);
    v["noise-uniform-high"] = fmt(n.uniform_high);
    v["knn-k"] = fmt(static_cast<std::uint64_t>(knn.k));
    v["hops"] = fmt(static_cast<std::uint64_t>(model.hops));
    v["dim-f"] = fmt(static_cast<std::uint64_t>(model.latent));
    v["dim-h"] = fmt(static_cast<std::uint64_t>(model.hidden));
    v["sigma-floor"] = fmt(model.sigma_floor);
    v["lr"] = fmt(train.learning_rate);
    v["epochs"] = fmt(static_cast<std::uint64_t>(train.epochs));
    v["adam-beta1"] = fmt(train.beta1);
    v["adam-beta2"] = fmt(train.beta2);
    v["adam-eps"] = fmt(train.epsilon);
    v["log-sigma"] = log_sigma == LogSigmaTerm::single ? "single" : "per-dimension";
    v["ablation"] = ablation_name(ablation);
    v["probe-runs"] = fmt(static_cast<std::uint64_t>(probe.runs));
    v["probe-epochs"] = fmt(static_cast<std::uint64_t>(probe.epochs));
    v["probe-lr"] = fmt(probe.learning_rate);
    v["probe-raw"] = probe_raw ? "true" : "false";
    v["export-stack"] = export_stack ? "true" : "false";
    return v;
}

SeedPlan seed_plan(std::uint64_t root) noexcept {
    return {derive_seed(root, "sbm"), derive_seed(root, "noise"), derive_seed(root, "init"), derive_seed(root, "probe")};
}

PreparedTargets prepare_targets(const SparseGraph& raw, const FeatureSet& x, std::size_t hops, const KnnConfig& knn,
                                bool augment) {
    PreparedTargets p;
    p.normalized = sym_normalize(raw, true);
    if (!augment) {
        p.propagation = p.normalized;
        p.targets = propagate_stack(p.normalized, x, hops);
        return p;
    }
    const FeatureSet xstar = summed_features(propagate_stack(p.normalized, x, hops));
    const SparseGraph knn_graph = cosine_knn(xstar, knn, &p.knn);
    p.propagation = build_augmented(p.normalized, knn_graph);
    p.targets = propagate_stack(p.propagation, x, hops);
    p.augmented = true;
    return p;
}

LossOptions loss_options(Ablation ablation, LogSigmaTerm log_sigma, std::size_t hops) {
    LossOptions opts;
    opts.log_sigma = ablation == Ablation::no_reg ? LogSigmaTerm::none : log_sigma;
    if (ablation == Ablation::no_mh) opts.hops = {hops};
    return opts;
}

RunOutputs run_experiment(const ExperimentConfig& cfg) {
    set_max_threads(cfg.threads);
    if (cfg.kernels == "auto") {
        kernels::select_auto();
    } else {
        kernels::Isa isa{};
        kernels::parse_isa(cfg.kernels, isa);
        if (!kernels::select(isa)) throw ConfigError(kModule, "kernel set '" + cfg.kernels + "' is not supported here");
    }

    RunOutputs out;
    out.config = cfg;
    out.kernel_set = kernels::active().name;
    out.config.kernels = out.kernel_set;

    DatasetBundle bundle = cfg.source == "sbm" ? gen_sbm(cfg.sbm) : load_dataset(cfg.data_dir);
    std::optional<std::vector<double>> intensity = bundle.intensity;
    if (cfg.noise) {
        const FeatureSet clean = bundle.clean_features ? *bundle.clean_features : bundle.features;
        NoisyFeatures noisy = inject(clean, *cfg.noise);
        bundle.features = std::move(noisy.noisy);
        intensity = std::move(noisy.truth.intensity);
    }
    out.nodes = bundle.node_count();
    out.dim = bundle.features.cols();

    PreparedTargets prepared = prepare_targets(bundle.graph, bundle.features, cfg.model.hops, cfg.knn,
                                               cfg.ablation != Ablation::no_aug);
    out.augmented = prepared.augmented;
    out.knn_zero_norm_nodes = prepared.knn.zero_norm_nodes.size();

    ModelShape shape = cfg.model;
    shape.nodes = out.nodes;
    shape.dim = out.dim;
    TrainConfig train_cfg = cfg.train;
    train_cfg.loss = loss_options(cfg.ablation, cfg.log_sigma, shape.hops);
    auto trained = train(init_model<float>(shape, seed_plan(cfg.seed).init), prepared.targets, train_cfg);
    out.model = std::move(trained.model);
    out.loss_trace = std::move(trained.loss_trace);
    out.final_loss = trained.final_loss;

    ProbeConfig probe_cfg = cfg.probe;
    probe_cfg.fixed_splits = bundle.splits;
    out.mqe_probe = probe(out.model.z, bundle.labels, probe_cfg);
    if (cfg.probe_raw) out.raw_probe = probe(bundle.features, bundle.labels, probe_cfg);
    if (intensity) {
        bool any = false;
        for (double s : *intensity) any = any || s > 0.0;
        if (any) out.noise = correlation_report(out.model, *intensity);
    }
    if (cfg.export_stack) out.targets = std::move(prepared.targets);
    return out;
}

std::string render_manifest(const RunOutputs& run) {
    std::ostringstream out;
    out << "# mqe run manifest; re-run with: mqe run --config manifest.cfg\n";
    const ConfigValues values = run.config.to_values();
    for (const auto& k : config_keys()) out << k.name << " = " << values.at(k.name) << '\n';
    const SeedPlan seeds = seed_plan(run.config.seed);
    out << "# derived: augmentation = " << (run.augmented ? "applied" : "skipped") << '\n';
    out << "# derived: seed.sbm = " << seeds.sbm << '\n';
    out << "# derived: seed.noise = " << seeds.noise << '\n';
    out << "# derived: seed.init = " << seeds.init << '\n';
    out << "# derived: seed.probe = " << seeds.probe << '\n';
    out << "# derived: nodes = " << run.nodes << ", dim = " << run.dim << '\n';
    return out.str();
}

std::string render_noise_report(const NoiseReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "noise.perturbed_nodes: " << report.nodes.size() << '\n';
    out << "noise.pearson: " << (report.pearson ? fmt(*report.pearson) : std::string("undefined")) << '\n';
    out << "noise.spearman: " << (report.spearman ? fmt(*report.spearman) : std::string("undefined")) << '\n';
    out << "\n[csv noise_pairs]\nnode,sigma0,s_true\n";
    for (std::size_t k = 0; k < report.nodes.size(); ++k) {
        out << report.nodes[k] << ',' << fmt(report.sigma0[k]) << ',' << fmt(report.s_true[k]) << '\n';
    }
    return out.str();
}

std::string render_report(const RunOutputs& run) {
    std::ostringstream out;
    out << "# mqe report\n";
    out << "ablation: " << ablation_name(run.config.ablation) << '\n';
    out << "augmentation: " << (run.augmented ? "applied" : "skipped") << '\n';
    out << "kernels: " << run.kernel_set << '\n';
    out << "nodes: " << run.nodes << '\n';
    out << "dim: " << run.dim << '\n';
    out << "knn.zero_norm_nodes: " << run.knn_zero_norm_nodes << '\n';
    out << "train.epochs: " << run.loss_trace.size() << '\n';
    out << "train.initial_loss: " << (run.loss_trace.empty() ? fmt(run.final_loss) : fmt(run.loss_trace.front()))
        << '\n';
    out << "train.final_loss: " << fmt(run.final_loss) << '\n';
    auto emit_probe = [&](const char* name, const ProbeResult& p) {
        out << "probe." << name << ".accuracy_mean: " << fmt(p.accuracy_mean) << '\n';
        out << "probe." << name << ".accuracy_std: " << fmt(p.accuracy_std) << '\n';
        out << "probe." << name << ".runs: " << p.runs << '\n';
        out << "probe." << name << ".chosen_l2: " << fmt(p.chosen_l2) << '\n';
    };
    emit_probe("mqe", run.mqe_probe);
    if (run.raw_probe) emit_probe("raw", *run.raw_probe);

    out << "\n[csv probe_runs]\nrun,mqe_accuracy,mqe_l2";
    if (run.raw_probe) out << ",raw_accuracy,raw_l2";
    out << '\n';
    for (std::size_t k = 0; k < run.mqe_probe.runs; ++k) {
        out << k << ',' << fmt(run.mqe_probe.run_accuracies[k]) << ',' << fmt(run.mqe_probe.run_l2[k]);
        if (run.raw_probe) out << ',' << fmt(run.raw_probe->run_accuracies[k]) << ',' << fmt(run.raw_probe->run_l2[k]);
        out << '\n';
    }
    if (run.noise) out << '\n' << render_noise_report(*run.noise);
    return out.str();
}

void write_run_outputs(const RunOutputs& run) {
    const auto& dir = run.config.out_dir;
    std::filesystem::create_directories(dir);
    auto write_text = [&](const char* name, const std::string& text) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw InputError("cli", "cannot write " + (dir / name).string());
        f << text;
    };
    write_text("manifest.cfg", render_manifest(run));
    write_text("report.txt", render_report(run));
    write_embeddings(dir / "embeddings.bin", run.model.z);
    write_model(dir / "model.bin", run.model);
    write_loss_trace(dir / "loss.csv", run.loss_trace);
    if (run.targets) write_stack(dir / "stack.bin", *run.targets);
}

}  // namespace mqe
