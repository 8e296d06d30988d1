// mqe: command-line front end.
//
//   mqe run --config exp.cfg [--key value ...]
//   mqe gen-sbm --out DIR [--sbm-n N ...]
//   mqe inject-noise --kind normal --alpha A --beta B --seed S --in DIR --out DIR
//   mqe train --data DIR --out DIR [--hops L --dim-f F ...]
//   mqe probe --data DIR --embeddings FILE [--runs 5]
//   mqe estimate --model FILE --data DIR
//   mqe hop-sweep --data DIR --hops 8

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "mqe/error.hpp"
#include "mqe/kernels.hpp"
#include "mqe/parallel.hpp"
#include "mqe/pipeline.hpp"
#include "mqe/propagation.hpp"

namespace {

using namespace mqe;

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw InputError("cli", "cannot write " + out_path);
    f << text;
}

// Registers one --key option per config key. Only flags that were actually
// given end up in the returned overrides.
std::map<std::string, std::string>& add_key_options(CLI::App& cmd, std::map<std::string, std::string>& store,
                                                    std::initializer_list<const char*> only = {}) {
    for (const auto& k : config_keys()) {
        if (only.size() != 0 && std::find_if(only.begin(), only.end(), [&](const char* s) {
                                    return std::string_view(s) == k.name;
                                }) == only.end()) {
            continue;
        }
        cmd.add_option(std::string("--") + k.name, store[k.name], k.help);
    }
    return store;
}

ConfigValues given_values(const CLI::App& cmd, const std::map<std::string, std::string>& store) {
    ConfigValues v;
    for (const auto& [key, value] : store) {
        if (cmd.count("--" + key) > 0) v[key] = value;
    }
    return v;
}

std::string probe_line(const char* name, const ProbeResult& p) {
    std::ostringstream out;
    out.precision(4);
    out << std::fixed << name << ": " << 100.0 * p.accuracy_mean << " +- " << 100.0 * p.accuracy_std << " % ("
        << p.runs << " runs, l2=" << p.chosen_l2 << ")\n";
    return out.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Noise-resilient node embeddings via multi-hop feature quality estimation"};
    app.require_subcommand(1);

    // run
    std::string config_path;
    std::map<std::string, std::string> run_flags;
    auto* run = app.add_subcommand("run", "Full pipeline from a key=value config; flags override config keys");
    run->add_option("--config", config_path, "config file")->required();
    add_key_options(*run, run_flags);

    // gen-sbm
    std::map<std::string, std::string> sbm_flags;
    auto* gen = app.add_subcommand("gen-sbm", "Write a planted-partition dataset directory");
    add_key_options(*gen, sbm_flags,
                    {"out", "seed", "sbm-n", "sbm-classes", "sbm-p-in", "sbm-p-out", "sbm-dim", "sbm-class-sep",
                     "sbm-within-std"});
    gen->get_option("--out")->required();

    // inject-noise
    std::string noise_kind = "normal";
    double noise_alpha = 0.5;
    double noise_beta = 1.0;
    std::uint64_t noise_seed = 0;
    double uniform_low = 0.0;
    double uniform_high = 1.0;
    std::string noise_in;
    std::string noise_out;
    auto* inj = app.add_subcommand("inject-noise", "Perturb a dataset's features and record the ground truth");
    inj->add_option("--kind", noise_kind, "normal or uniform")->check(CLI::IsMember({"normal", "uniform"}));
    inj->add_option("--alpha", noise_alpha, "fraction of perturbed nodes");
    inj->add_option("--beta", noise_beta, "noise level");
    inj->add_option("--seed", noise_seed, "noise seed");
    inj->add_option("--uniform-low", uniform_low, "lower bound of uniform noise");
    inj->add_option("--uniform-high", uniform_high, "upper bound of uniform noise");
    inj->add_option("--in", noise_in, "input dataset directory")->required();
    inj->add_option("--out", noise_out, "output dataset directory")->required();

    // train
    std::map<std::string, std::string> train_flags;
    auto* tr = app.add_subcommand("train", "Train the estimator on a dataset directory");
    add_key_options(*tr, train_flags,
                    {"data", "out", "seed", "threads", "kernels", "knn-k", "hops", "dim-f", "dim-h", "sigma-floor", "lr",
                     "epochs", "adam-beta1", "adam-beta2", "adam-eps", "log-sigma", "ablation", "export-stack"});
    tr->get_option("--data")->required();
    tr->get_option("--out")->required();

    // probe
    std::string probe_data;
    std::string probe_embeddings;
    std::size_t probe_runs = 5;
    std::uint64_t probe_seed = 0;
    bool probe_raw = false;
    std::string probe_out;
    auto* pr = app.add_subcommand("probe", "Linear-probe node classification on embeddings");
    pr->add_option("--data", probe_data, "dataset directory (labels, optional splits)")->required();
    pr->add_option("--embeddings", probe_embeddings, "embedding file; defaults to the raw features");
    pr->add_option("--runs", probe_runs, "probe runs");
    pr->add_option("--seed", probe_seed, "probe seed");
    pr->add_flag("--raw", probe_raw, "probe the dataset features instead of embeddings");
    pr->add_option("--out", probe_out, "write the report here instead of stdout");

    // estimate
    std::string est_model;
    std::string est_data;
    std::string est_out;
    auto* es = app.add_subcommand("estimate", "Correlate estimated hop-0 sigma with true noise intensity");
    es->add_option("--model", est_model, "model checkpoint from train/run")->required();
    es->add_option("--data", est_data, "dataset directory with intensity.txt")->required();
    es->add_option("--out", est_out, "write the report here instead of stdout");

    // hop-sweep
    std::string sweep_data;
    std::size_t sweep_hops = 8;
    std::size_t sweep_runs = 5;
    std::uint64_t sweep_seed = 0;
    std::string sweep_out;
    auto* hs = app.add_subcommand("hop-sweep", "Probe raw propagated features at every hop");
    hs->add_option("--data", sweep_data, "dataset directory")->required();
    hs->add_option("--hops", sweep_hops, "maximum hop");
    hs->add_option("--runs", sweep_runs, "probe runs per hop");
    hs->add_option("--seed", sweep_seed, "probe seed");
    hs->add_option("--out", sweep_out, "write CSV here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::config);
    }

    try {
        if (*run) {
            ConfigValues values = read_config_file(config_path);
            for (auto& [k, v] : given_values(*run, run_flags)) values[k] = v;
            const ExperimentConfig cfg = ExperimentConfig::from_values(values);
            const RunOutputs outputs = run_experiment(cfg);
            write_run_outputs(outputs);
            std::cerr << "augmentation: " << (outputs.augmented ? "applied" : "skipped") << '\n';
            if (outputs.knn_zero_norm_nodes > 0) {
                std::cerr << "warning: " << outputs.knn_zero_norm_nodes
                          << " zero-norm rows in kNN construction; they take the lowest-index neighbors\n";
            }
            std::cout << probe_line("mqe", outputs.mqe_probe);
            if (outputs.raw_probe) std::cout << probe_line("raw", *outputs.raw_probe);
            if (outputs.noise && outputs.noise->spearman) std::cout << "noise spearman: " << *outputs.noise->spearman << '\n';
            std::cout << "outputs written to " << cfg.out_dir.string() << '\n';
        } else if (*gen) {
            ConfigValues values = given_values(*gen, sbm_flags);
            values["source"] = "sbm";
            const ExperimentConfig cfg = ExperimentConfig::from_values(values);
            save_dataset(cfg.out_dir, gen_sbm(cfg.sbm));
            std::cout << "wrote " << cfg.sbm.nodes << "-node SBM dataset to " << cfg.out_dir.string() << '\n';
        } else if (*inj) {
            DatasetBundle bundle = load_dataset(noise_in);
            NoiseSpec spec;
            parse_noise_kind(noise_kind, spec.kind);
            spec.alpha = noise_alpha;
            spec.beta = noise_beta;
            spec.seed = noise_seed;
            spec.uniform_low = uniform_low;
            spec.uniform_high = uniform_high;
            const FeatureSet clean = bundle.clean_features ? *bundle.clean_features : bundle.features;
            NoisyFeatures noisy = inject(clean, spec);
            bundle.features = std::move(noisy.noisy);
            bundle.clean_features = clean;
            bundle.noise_mask = std::move(noisy.truth.perturbed);
            bundle.intensity = std::move(noisy.truth.intensity);
            save_dataset(noise_out, bundle);
            std::size_t count = 0;
            for (auto m : *bundle.noise_mask) count += m;
            std::cout << "perturbed " << count << " of " << bundle.node_count() << " nodes; wrote " << noise_out << '\n';
        } else if (*tr) {
            ConfigValues values = given_values(*tr, train_flags);
            values["source"] = "dir";
            const ExperimentConfig cfg = ExperimentConfig::from_values(values);
            set_max_threads(cfg.threads);
            if (cfg.kernels != "auto") {
                kernels::Isa isa{};
                kernels::parse_isa(cfg.kernels, isa);
                if (!kernels::select(isa)) throw ConfigError("cli", "kernel set '" + cfg.kernels + "' unavailable");
            }
            const DatasetBundle bundle = load_dataset(cfg.data_dir);
            const PreparedTargets prepared = prepare_targets(bundle.graph, bundle.features, cfg.model.hops, cfg.knn,
                                                             cfg.ablation != Ablation::no_aug);
            ModelShape shape = cfg.model;
            shape.nodes = bundle.node_count();
            shape.dim = bundle.features.cols();
            const auto result = train(init_model<float>(shape, seed_plan(cfg.seed).init), prepared.targets, cfg.train);
            std::filesystem::create_directories(cfg.out_dir);
            write_model(cfg.out_dir / "model.bin", result.model);
            write_embeddings(cfg.out_dir / "embeddings.bin", result.model.z);
            write_loss_trace(cfg.out_dir / "loss.csv", result.loss_trace);
            if (cfg.export_stack) write_stack(cfg.out_dir / "stack.bin", prepared.targets);
            std::cout << "augmentation: " << (prepared.augmented ? "applied" : "skipped") << "\nfinal loss: "
                      << result.final_loss << "\nwrote model.bin, embeddings.bin, loss.csv to " << cfg.out_dir.string()
                      << '\n';
        } else if (*pr) {
            const DatasetBundle bundle = load_dataset(probe_data);
            ProbeConfig cfg;
            cfg.runs = probe_runs;
            cfg.seed = probe_seed;
            cfg.fixed_splits = bundle.splits;
            ProbeResult result;
            if (probe_raw || probe_embeddings.empty()) {
                result = probe(bundle.features, bundle.labels, cfg);
            } else {
                result = probe(read_embeddings(probe_embeddings), bundle.labels, cfg);
            }
            std::ostringstream out;
            out.precision(17);
            out << "accuracy_mean: " << result.accuracy_mean << "\naccuracy_std: " << result.accuracy_std
                << "\nruns: " << result.runs << "\nchosen_l2: " << result.chosen_l2 << "\n\n[csv probe_runs]\nrun,accuracy,l2\n";
            for (std::size_t k = 0; k < result.runs; ++k) {
                out << k << ',' << result.run_accuracies[k] << ',' << result.run_l2[k] << '\n';
            }
            emit(out.str(), probe_out);
            std::cerr << probe_line(probe_raw || probe_embeddings.empty() ? "raw" : "embeddings", result);
        } else if (*es) {
            const MqeModel model = read_model(est_model);
            const std::filesystem::path dir(est_data);
            std::vector<double> intensity;
            if (std::filesystem::exists(dir / "intensity.txt")) {
                intensity = read_vector(dir / "intensity.txt");
            } else if (std::filesystem::exists(dir / "clean_features.txt")) {
                intensity = mqe::intensity(read_features(dir / "clean_features.txt"), read_features(dir / "features.txt"));
            } else {
                throw InputError("eval", "no ground truth in " + dir.string() + " (need intensity.txt or clean_features.txt)");
            }
            const NoiseReport report = correlation_report(model, intensity);
            emit(render_noise_report(report), est_out);
            std::cerr << "spearman: " << (report.spearman ? std::to_string(*report.spearman) : "undefined")
                      << "  pearson: " << (report.pearson ? std::to_string(*report.pearson) : "undefined") << '\n';
        } else if (*hs) {
            const DatasetBundle bundle = load_dataset(sweep_data);
            ProbeConfig cfg;
            cfg.runs = sweep_runs;
            cfg.seed = sweep_seed;
            cfg.fixed_splits = bundle.splits;
            const auto results = hop_sweep(sym_normalize(bundle.graph, true), bundle.features, bundle.labels, sweep_hops, cfg);
            emit(hop_sweep_csv(results), sweep_out);
        }
    } catch (const Error& e) {
        std::cerr << "error [" << e.module() << "]: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
