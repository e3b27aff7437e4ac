// wadapt: data generation, training stages, evaluation and ablations.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "wadapt/dataset.hpp"
#include "wadapt/encoders.hpp"
#include "wadapt/errors.hpp"
#include "wadapt/keyvalue.hpp"
#include "wadapt/metrics.hpp"
#include "wadapt/train.hpp"

#ifndef WADAPT_VERSION
#define WADAPT_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using namespace wadapt;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitMissingInput = 3;
constexpr int kExitNumerical = 4;

constexpr const char* kManifestName = "run_manifest.txt";
constexpr const char* kCheckpointName = "checkpoint.ckpt";
constexpr const char* kLastGoodName = "last_good.ckpt";

struct Options {
    std::string config;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string data;
    std::string out;
    std::string resume;
    bool force = false;
    bool trace = false;
    bool oracle = false;
    std::string variant = "proposed";
    std::vector<std::string> variants;
    std::string seeds;
    bool pool_sweep = false;
    std::size_t workers = 1;
    std::string split = "target";
};

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::set<std::string> known_keys() {
    KeyValues kv;
    GenConfig{}.write(kv);
    TrainConfig{}.write(kv);
    std::set<std::string> keys;
    for (const auto& [k, v] : kv.entries()) keys.insert(k);
    return keys;
}

// Config file, then --set overrides, then --seed.
KeyValues resolve_settings(const Options& o) {
    KeyValues kv = o.config.empty() ? KeyValues{} : KeyValues::load(o.config);
    for (const std::string& item : o.overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("--set expects key=value, got '" + item + "'");
        }
        kv.set(item.substr(0, eq), item.substr(eq + 1));
    }
    if (o.seed) kv.set("seed", std::to_string(*o.seed));
    const std::set<std::string> keys = known_keys();
    for (const auto& [k, v] : kv.entries()) {
        if (keys.count(k) == 0) throw ConfigError("unknown config key '" + k + "'");
    }
    return kv;
}

TrainConfig train_config(const KeyValues& kv) {
    TrainConfig c = TrainConfig::from(kv);
    c.validate();
    return c;
}

void prepare_out(const fs::path& out, bool force) {
    if (out.empty()) throw ConfigError("--out is required");
    if (fs::exists(out / kManifestName) && !force) {
        throw ConfigError(out.string() + " already holds a run; pass --force to overwrite");
    }
    fs::create_directories(out);
}

class RunManifest {
   public:
    RunManifest(fs::path out, const std::string& command, const std::string& argv, std::uint64_t seed)
        : path_(std::move(out) / kManifestName) {
        kv_.set("command", command);
        kv_.set("argv", argv);
        kv_.set("version", WADAPT_VERSION);
        kv_.set("seed", std::to_string(seed));
        kv_.set("started_at", utc_now());
        kv_.set("status", "running");
    }
    void set_config(const KeyValues& resolved) {
        for (const auto& [k, v] : resolved.entries()) kv_.set("config." + k, v);
    }
    void set(const std::string& key, const std::string& value) { kv_.set(key, value); }
    void save() const { kv_.save(path_); }
    void finish(const std::string& status) {
        kv_.set("finished_at", utc_now());
        kv_.set("status", status);
        save();
    }

   private:
    fs::path path_;
    KeyValues kv_;
};

// All defaults materialized, then the data generator's settings as recorded
// in the dataset itself.
KeyValues resolved_config(const TrainConfig& train, const GenConfig* gen) {
    KeyValues kv;
    if (gen != nullptr) gen->write(kv);
    train.write(kv);
    return kv;
}

std::string hex_digest(std::uint64_t h) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

DatasetBundle load_data(const Options& o) {
    if (o.data.empty()) throw ConfigError("--data is required");
    return load(o.data);
}

void print_summary(const MetricsReport& m) {
    std::cout << std::fixed << std::setprecision(4) << "medr=" << m.medr << " r1=" << m.r1
              << " r5=" << m.r5 << " r10=" << m.r10 << std::endl;
}

void write_metrics(const fs::path& file, const std::vector<RunResult>& rows) {
    std::ofstream out(file);
    if (!out) throw MissingInputError("cannot write " + file.string());
    write_metrics_header(out);
    for (const RunResult& r : rows) write_metrics_row(out, r);
}

RunResult make_result(Variant v, const TrainConfig& cfg, MetricsReport metrics) {
    RunResult r;
    r.variant = v;
    r.seed = cfg.seed;
    r.pool_size = cfg.selection_active() ? cfg.pool_size() : cfg.batch_size;
    r.run_id = std::string(variant_name(v)) + "-s" + std::to_string(cfg.seed) + "-p" +
               std::to_string(r.pool_size) + "-" + config_hash(cfg);
    r.metrics = std::move(metrics);
    return r;
}

MetricsReport score(const ModelState& model, const std::vector<Pair>& pairs, const TrainConfig& cfg) {
    const std::size_t pool = std::min(cfg.eval_pool, pairs.size());
    return evaluate(model, pairs, pool, cfg.eval_repeats, cfg.seed, cfg.eval_direction);
}

// Saves the state carried by a numerical failure and reports where it went.
[[noreturn]] void rethrow_with_checkpoint(const NumericalFailure& e, const fs::path& out,
                                          const FrozenRecipeEncoder* frozen) {
    const fs::path file = out / kLastGoodName;
    if (e.last_good() != nullptr) save_checkpoint(*e.last_good(), frozen, file);
    throw TrainingError(std::string(e.what()) + "; last good checkpoint: " + file.string());
}

// ---------------------------------------------------------------------------

void cmd_gen_data(const Options& o, const std::string& argv) {
    const KeyValues kv = resolve_settings(o);
    GenConfig gen = GenConfig::from(kv);
    gen.validate();
    const std::uint64_t seed = kv.get_uint("seed", TrainConfig{}.seed);
    prepare_out(o.out, o.force);
    RunManifest manifest(o.out, "gen-data", argv, seed);
    KeyValues resolved;
    gen.write(resolved);
    manifest.set_config(resolved);
    manifest.save();
    save(generate(gen, seed), o.out);
    manifest.set("dataset_hash", hex_digest(dataset_digest(o.out)));
    manifest.finish("ok");
}

void cmd_pretrain(const Options& o, const std::string& argv) {
    const TrainConfig cfg = train_config(resolve_settings(o));
    const DatasetBundle bundle = load_data(o);
    std::optional<ModelState> initial;
    if (!o.resume.empty()) initial = load_checkpoint(o.resume, nullptr);

    prepare_out(o.out, o.force);
    const fs::path out(o.out);
    RunManifest manifest(out, o.oracle ? "pretrain --oracle" : "pretrain", argv, cfg.seed);
    manifest.set_config(resolved_config(cfg, &bundle.manifest.config));
    manifest.set("dataset_hash", hex_digest(dataset_digest(o.data)));
    if (!o.resume.empty()) manifest.set("resume", o.resume);
    manifest.save();

    std::ofstream log(out / "training_log.tsv");
    write_training_log_header(log);
    PretrainResult result;
    try {
        const ModelState* init = initial ? &*initial : nullptr;
        result = o.oracle ? train_oracle(bundle, cfg, TrainSinks{&log, nullptr}, init)
                          : pretrain_source(bundle, cfg, TrainSinks{&log, nullptr}, init);
    } catch (const NumericalFailure& e) {
        manifest.finish("numerical_failure");
        rethrow_with_checkpoint(e, out, nullptr);
    }
    save_checkpoint(result.model, &result.frozen, out / kCheckpointName);
    const Variant v = o.oracle ? Variant::kOracle : Variant::kSourceOnly;
    const RunResult row = make_result(v, cfg, score(result.model, bundle.target_test, cfg));
    write_metrics(out / "metrics.csv", {row});
    print_summary(row.metrics);
    manifest.finish("ok");
}

void cmd_adapt(const Options& o, const std::string& argv) {
    const Variant variant = parse_variant(o.variant);
    if (variant == Variant::kOracle || variant == Variant::kSourceOnly) {
        throw ConfigError("adapt: variant '" + o.variant + "' does not adapt; use pretrain");
    }
    const TrainConfig cfg = configure_variant(train_config(resolve_settings(o)), variant);
    cfg.validate();
    if (o.resume.empty()) throw MissingInputError("adapt: --resume <pretrained checkpoint> is required");
    FrozenRecipeEncoder frozen;
    const ModelState start = load_checkpoint(o.resume, &frozen);
    const DatasetBundle bundle = load_data(o);

    prepare_out(o.out, o.force);
    const fs::path out(o.out);
    RunManifest manifest(out, "adapt", argv, cfg.seed);
    manifest.set_config(resolved_config(cfg, &bundle.manifest.config));
    manifest.set("dataset_hash", hex_digest(dataset_digest(o.data)));
    manifest.set("variant", variant_name(variant));
    manifest.set("resume", o.resume);
    manifest.save();

    std::ofstream log(out / "training_log.tsv");
    write_training_log_header(log);
    std::ofstream trace;
    if (o.trace) trace.open(out / "selection_trace.tsv");
    ModelState adapted;
    try {
        adapted = adapt(bundle, start, frozen, cfg, TrainSinks{&log, o.trace ? &trace : nullptr});
    } catch (const NumericalFailure& e) {
        manifest.finish("numerical_failure");
        rethrow_with_checkpoint(e, out, &frozen);
    }
    save_checkpoint(adapted, &frozen, out / kCheckpointName);
    const RunResult row = make_result(variant, cfg, score(adapted, bundle.target_test, cfg));
    write_metrics(out / "metrics.csv", {row});
    print_summary(row.metrics);
    manifest.finish("ok");
}

void cmd_eval(const Options& o, const std::string& argv) {
    const TrainConfig cfg = train_config(resolve_settings(o));
    if (o.resume.empty()) throw MissingInputError("eval: --resume <checkpoint> is required");
    const ModelState model = load_checkpoint(o.resume, nullptr);
    const DatasetBundle bundle = load_data(o);

    std::vector<Pair> pairs;
    if (o.split == "target") {
        pairs = bundle.target_test;
    } else if (o.split == "source") {
        // The tail that early stopping holds out of training.
        const std::size_t k = std::min(cfg.validation_count, bundle.source_pairs.size());
        pairs.assign(bundle.source_pairs.end() - static_cast<std::ptrdiff_t>(k), bundle.source_pairs.end());
    } else {
        throw ConfigError("--split must be 'target' or 'source'");
    }
    if (pairs.empty()) throw ConfigError("eval: the selected split is empty");

    prepare_out(o.out, o.force);
    const fs::path out(o.out);
    RunManifest manifest(out, "eval", argv, cfg.seed);
    manifest.set_config(resolved_config(cfg, &bundle.manifest.config));
    manifest.set("dataset_hash", hex_digest(dataset_digest(o.data)));
    manifest.set("resume", o.resume);
    manifest.set("split", o.split);
    manifest.save();

    const MetricsReport report = score(model, pairs, cfg);
    std::ofstream full(out / "eval_report.tsv");
    full << "repeat\tmedr\tr1\tr5\tr10\n";
    for (std::size_t i = 0; i < report.per_repeat.size(); ++i) {
        const RankMetrics& m = report.per_repeat[i];
        full << i << '\t' << format_double(m.medr) << '\t' << format_double(m.r1) << '\t'
             << format_double(m.r5) << '\t' << format_double(m.r10) << '\n';
    }
    full << "mean\t" << format_double(report.medr) << '\t' << format_double(report.r1) << '\t'
         << format_double(report.r5) << '\t' << format_double(report.r10) << '\n';
    write_metrics(out / "metrics.csv", {make_result(Variant::kSourceOnly, cfg, report)});
    print_summary(report);
    manifest.finish("ok");
}

// "1-10", "1,3,5" or "4".
std::vector<std::uint64_t> parse_seeds(const std::string& text, std::uint64_t fallback) {
    if (text.empty()) return {fallback};
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string part;
    try {
        while (std::getline(ss, part, ',')) {
            const auto dash = part.find('-');
            if (dash == std::string::npos) {
                seeds.push_back(std::stoull(part));
                continue;
            }
            const std::uint64_t lo = std::stoull(part.substr(0, dash));
            const std::uint64_t hi = std::stoull(part.substr(dash + 1));
            if (hi < lo) throw ConfigError("bad seed range '" + part + "'");
            for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
        }
    } catch (const std::logic_error&) {
        throw ConfigError("cannot parse --seeds '" + text + "'");
    }
    if (seeds.empty()) throw ConfigError("--seeds is empty");
    return seeds;
}

void write_table(const fs::path& file, const std::vector<RunResult>& rows, bool by_pool) {
    // Mean MedR per variant (or per pool size) over seeds.
    std::map<std::string, std::pair<double, std::size_t>> acc;
    std::vector<std::string> order;
    for (const RunResult& r : rows) {
        const std::string key = by_pool ? std::to_string(r.pool_size) + "\t" + variant_name(r.variant)
                                        : std::string(variant_name(r.variant));
        if (acc.count(key) == 0) order.push_back(key);
        acc[key].first += r.metrics.medr;
        acc[key].second += 1;
    }
    std::ofstream out(file);
    out << (by_pool ? "pool_size\tvariant" : "variant") << "\tmean_medr\truns\n";
    for (const std::string& key : order) {
        const auto& [sum, count] = acc[key];
        out << key << '\t' << std::fixed << std::setprecision(3) << sum / static_cast<double>(count) << '\t'
            << count << '\n';
    }
}

void cmd_ablate(const Options& o, const std::string& argv) {
    const TrainConfig base = train_config(resolve_settings(o));
    const DatasetBundle bundle = load_data(o);

    AblationGrid grid;
    grid.base = base;
    grid.workers = o.workers;
    grid.seeds = parse_seeds(o.seeds, base.seed);
    if (o.variants.empty()) {
        grid.variants = table_variants();
    } else {
        for (const std::string& name : o.variants) grid.variants.push_back(parse_variant(name));
    }
    if (o.pool_sweep) grid.pool_multiples = {1, 2, 3, 4, 5};

    prepare_out(o.out, o.force);
    const fs::path out(o.out);
    RunManifest manifest(out, o.pool_sweep ? "ablate --pool-sweep" : "ablate", argv, base.seed);
    manifest.set_config(resolved_config(base, &bundle.manifest.config));
    manifest.set("dataset_hash", hex_digest(dataset_digest(o.data)));
    std::string seed_list, variant_list;
    for (std::uint64_t s : grid.seeds) seed_list += (seed_list.empty() ? "" : ",") + std::to_string(s);
    for (Variant v : grid.variants) variant_list += (variant_list.empty() ? "" : ",") + std::string(variant_name(v));
    manifest.set("seeds", seed_list);
    manifest.set("variants", variant_list);
    manifest.save();

    std::vector<RunResult> rows;
    try {
        rows = run_ablation(bundle, grid);
    } catch (const NumericalFailure& e) {
        manifest.finish("numerical_failure");
        rethrow_with_checkpoint(e, out, nullptr);
    }
    write_metrics(out / "metrics.csv", rows);
    write_table(out / (o.pool_sweep ? "pool_sweep.tsv" : "ablation_table.tsv"), rows, o.pool_sweep);
    std::ifstream table(out / (o.pool_sweep ? "pool_sweep.tsv" : "ablation_table.tsv"));
    std::cout << table.rdbuf();
    manifest.finish("ok");
}

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config, "key=value config file");
    cmd->add_option("--set", o.overrides, "override a config key (key=value), repeatable");
    cmd->add_option("--seed", o.seed, "seed (overrides the config)");
    cmd->add_option("--out", o.out, "output directory")->required();
    cmd->add_flag("--force", o.force, "overwrite an existing run in --out");
}

void add_training(CLI::App* cmd, Options& o, bool resume = true) {
    add_common(cmd, o);
    cmd->add_option("--data", o.data, "dataset directory")->required();
    if (resume) cmd->add_option("--resume", o.resume, "checkpoint to start from");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weighted adversarial cross-domain recipe retrieval"};
    app.set_version_flag("--version", WADAPT_VERSION);
    app.require_subcommand(1);
    Options o;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic source/target dataset");
    add_common(gen, o);

    auto* pre = app.add_subcommand("pretrain", "train on source pairs; writes the frozen source encoder");
    add_training(pre, o);
    pre->add_flag("--oracle", o.oracle, "supervised upper bound on source + target pairs");

    auto* ada = app.add_subcommand("adapt", "adapt a pretrained checkpoint to the target recipes");
    add_training(ada, o);
    ada->add_option("--variant", o.variant, "proposed, unweighted_adv, no_sbs, no_w_triplet or no_w_adv");
    ada->add_flag("--trace", o.trace, "write the per-step selection trace");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    add_training(ev, o);
    ev->add_option("--split", o.split, "target (test pairs) or source (held-out tail)");

    auto* abl = app.add_subcommand("ablate", "variant x seed (x pool size) grid");
    add_training(abl, o, false);
    abl->add_option("--variants", o.variants, "variants to run (default: the six table rows)")->delimiter(',');
    abl->add_option("--seeds", o.seeds, "seed list, e.g. 1-10 or 1,2,3");
    abl->add_flag("--pool-sweep", o.pool_sweep, "sweep pool sizes n..5n");
    abl->add_option("--workers", o.workers, "parallel grid cells")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    std::string joined;
    for (int i = 0; i < argc; ++i) joined += (i ? " " : "") + std::string(argv[i]);

    try {
        if (*gen) cmd_gen_data(o, joined);
        if (*pre) cmd_pretrain(o, joined);
        if (*ada) cmd_adapt(o, joined);
        if (*ev) cmd_eval(o, joined);
        if (*abl) cmd_ablate(o, joined);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const MissingInputError& e) {
        std::cerr << "missing input: " << e.what() << '\n';
        return kExitMissingInput;
    } catch (const TrainingError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
