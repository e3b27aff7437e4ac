#include "wadapt/train.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace wadapt {

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (pool_multiple < 1 || pool_multiple > 5) {
        throw ConfigError("pool_multiple must lie in 1..5 (pool size n..5n), got " +
                          std::to_string(pool_multiple));
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be positive");
    }
    if (!(adapt_learning_rate > 0.0) || !std::isfinite(adapt_learning_rate)) {
        throw ConfigError("adapt_learning_rate must be positive");
    }
    loss.validate();
    if (eval_pool == 0) throw ConfigError("eval_pool must be positive");
    if (eval_repeats == 0) throw ConfigError("eval_repeats must be positive");
}

void TrainConfig::write(KeyValues& kv) const {
    kv.set("batch_size", std::to_string(batch_size));
    kv.set("pool_multiple", std::to_string(pool_multiple));
    kv.set("pretrain_epochs", std::to_string(pretrain_epochs));
    kv.set("adapt_epochs", std::to_string(adapt_epochs));
    kv.set("seed", std::to_string(seed));
    kv.set("margin", format_double(loss.margin));
    kv.set("beta", format_double(loss.beta));
    kv.set("lambda", format_double(loss.lambda));
    kv.set("learning_rate", format_double(learning_rate));
    kv.set("adapt_learning_rate", format_double(adapt_learning_rate));
    kv.set("mining", mining == NegativeMining::kHardest ? "hardest" : "average");
    kv.set("sbs_off", sbs_off ? "1" : "0");
    kv.set("w_triplet_off", w_triplet_off ? "1" : "0");
    kv.set("w_adv_off", w_adv_off ? "1" : "0");
    kv.set("warm_start_off", warm_start_off ? "1" : "0");
    kv.set("early_stop_patience", std::to_string(early_stop_patience));
    kv.set("validation_count", std::to_string(validation_count));
    kv.set("eval_pool", std::to_string(eval_pool));
    kv.set("eval_repeats", std::to_string(eval_repeats));
    kv.set("eval_direction",
           eval_direction == RetrievalDirection::kImageToRecipe ? "image_to_recipe" : "recipe_to_image");
}

TrainConfig TrainConfig::from(const KeyValues& kv) {
    TrainConfig c;
    auto count = [&](const char* key, std::size_t fallback) {
        const std::int64_t v = kv.get_int(key, static_cast<std::int64_t>(fallback));
        if (v < 0) throw ConfigError(std::string(key) + " must be non-negative");
        return static_cast<std::size_t>(v);
    };
    c.batch_size = count("batch_size", c.batch_size);
    c.pool_multiple = count("pool_multiple", c.pool_multiple);
    c.pretrain_epochs = count("pretrain_epochs", c.pretrain_epochs);
    c.adapt_epochs = count("adapt_epochs", c.adapt_epochs);
    c.seed = kv.get_uint("seed", c.seed);
    c.loss.margin = kv.get_double("margin", c.loss.margin);
    c.loss.beta = kv.get_double("beta", c.loss.beta);
    c.loss.lambda = kv.get_double("lambda", c.loss.lambda);
    c.learning_rate = kv.get_double("learning_rate", c.learning_rate);
    c.adapt_learning_rate = kv.get_double("adapt_learning_rate", c.adapt_learning_rate);
    const std::string mining = kv.get_string("mining", "average");
    if (mining == "average") {
        c.mining = NegativeMining::kAverage;
    } else if (mining == "hardest") {
        c.mining = NegativeMining::kHardest;
    } else {
        throw ConfigError("mining must be 'average' or 'hardest', got '" + mining + "'");
    }
    c.sbs_off = kv.get_bool("sbs_off", c.sbs_off);
    c.w_triplet_off = kv.get_bool("w_triplet_off", c.w_triplet_off);
    c.w_adv_off = kv.get_bool("w_adv_off", c.w_adv_off);
    c.warm_start_off = kv.get_bool("warm_start_off", c.warm_start_off);
    c.early_stop_patience = count("early_stop_patience", c.early_stop_patience);
    c.validation_count = count("validation_count", c.validation_count);
    c.eval_pool = count("eval_pool", c.eval_pool);
    c.eval_repeats = count("eval_repeats", c.eval_repeats);
    const std::string dir = kv.get_string("eval_direction", "image_to_recipe");
    if (dir == "image_to_recipe") {
        c.eval_direction = RetrievalDirection::kImageToRecipe;
    } else if (dir == "recipe_to_image") {
        c.eval_direction = RetrievalDirection::kRecipeToImage;
    } else {
        throw ConfigError("eval_direction must be image_to_recipe or recipe_to_image");
    }
    return c;
}

// ---------------------------------------------------------------------------
// Logging

void write_training_log_header(std::ostream& out) {
    out << "stage\tepoch\tstep\tw_triplet\tw_adv_encoder\tw_adv_discriminator\treg_classification"
           "\treg_reconstruction\ttotal\n";
}

namespace {

void log_step(std::ostream* out, const char* stage, std::size_t epoch, std::size_t step,
              const LossBreakdown& b) {
    if (out == nullptr) return;
    *out << stage << '\t' << epoch << '\t' << step << '\t' << format_double(b.w_triplet) << '\t'
         << format_double(b.w_adv_encoder) << '\t' << format_double(b.w_adv_discriminator) << '\t'
         << format_double(b.reg_classification) << '\t' << format_double(b.reg_reconstruction)
         << '\t' << format_double(b.total) << '\n';
}

std::vector<const RecipeSample*> recipes_of(const std::vector<const Pair*>& pairs) {
    std::vector<const RecipeSample*> out;
    out.reserve(pairs.size());
    for (const Pair* p : pairs) out.push_back(&p->recipe);
    return out;
}

std::vector<const ImageSample*> images_of(const std::vector<const Pair*>& pairs) {
    std::vector<const ImageSample*> out;
    out.reserve(pairs.size());
    for (const Pair* p : pairs) out.push_back(&p->image);
    return out;
}

// Number of leading source pairs used for training; the rest is held out for
// early stopping.
std::size_t training_prefix(std::size_t total, const TrainConfig& config) {
    if (config.early_stop_patience == 0) return total;
    if (config.validation_count + config.batch_size > total) {
        throw ConfigError("validation_count leaves fewer than one batch of training pairs");
    }
    return total - config.validation_count;
}

double validation_medr(const ModelState& model, const std::vector<Pair>& held_out,
                       const TrainConfig& config) {
    const std::size_t pool = std::min<std::size_t>(100, held_out.size());
    return evaluate(model, held_out, pool, 1, config.seed, config.eval_direction).medr;
}

struct EarlyStopper {
    std::size_t patience = 0;
    double best = 0.0;
    std::size_t since_best = 0;
    std::shared_ptr<ModelState> best_state;

    // Returns true when training should stop.
    bool update(const ModelState& model, double medr) {
        if (best_state == nullptr || medr < best) {
            best = medr;
            since_best = 0;
            best_state = std::make_shared<ModelState>(model);
            return false;
        }
        return ++since_best >= patience;
    }
};

PretrainResult supervised_training(const std::vector<Pair>& pairs, const ModelDims& dims,
                                   const TrainConfig& config, const TrainSinks& sinks,
                                   const char* stage, const ModelState* initial) {
    config.validate();
    PretrainResult result{initial != nullptr ? *initial : ModelState(dims, config.seed), {}};
    if (!(result.model.dims == dims)) throw DimensionError(std::string(stage) + ": initial model dims do not match the data");
    ModelState& model = result.model;
    const std::size_t train_count = training_prefix(pairs.size(), config);
    const std::vector<Pair> held_out(pairs.begin() + static_cast<std::ptrdiff_t>(train_count), pairs.end());
    const std::size_t n = config.batch_size;
    if (train_count < n) throw ConfigError("fewer training pairs than one batch");

    Adam opt(model.encoder_parameters(), AdamOptions{.learning_rate = config.learning_rate});
    Rng rng = make_rng(config.seed, std::string("batch.") + stage);
    std::vector<std::size_t> order(train_count);
    std::iota(order.begin(), order.end(), 0);
    const WeightVector ones = WeightVector::ones(n);
    EarlyStopper stopper;
    stopper.patience = config.early_stop_patience;

    for (std::size_t epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
        auto last_good = std::make_shared<const ModelState>(model);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t b = 0; b + n <= train_count; b += n) {
            std::vector<const Pair*> batch;
            for (std::size_t k = b; k < b + n; ++k) batch.push_back(&pairs[order[k]]);
            try {
                const LossBreakdown br = source_step(model, opt, batch, ones, config);
                log_step(sinks.log, stage, epoch, b / n, br);
            } catch (const TrainingError& e) {
                throw NumericalFailure(std::string(stage) + ": " + e.what(), last_good);
            } catch (const DegenerateInputError& e) {
                // Diverged weights collapse an embedding to zero.
                throw NumericalFailure(std::string(stage) + ": " + e.what(), last_good);
            }
        }
        if (config.early_stop_patience > 0 && stopper.update(model, validation_medr(model, held_out, config))) {
            break;
        }
    }
    if (stopper.best_state != nullptr) model = *stopper.best_state;
    result.frozen = FrozenRecipeEncoder(model.recipe);
    return result;
}

}  // namespace

// ---------------------------------------------------------------------------
// Steps

LossBreakdown source_step(ModelState& model, Adam& encoder_opt, const std::vector<const Pair*>& batch,
                          const WeightVector& weights, const TrainConfig& config) {
    const RecipeBatch recipes = make_recipe_batch(recipes_of(batch));
    const Matrix images = make_image_batch(images_of(batch));
    Tape t;
    Var r = model.recipe.forward(t, recipes);
    Var v = model.image.forward(t, images);
    Var triplet = weighted_triplet_loss(r, v, weights, config.loss.margin, config.mining);
    const RegularizerLosses reg = regularizer(t, v, recipes.labels, r, images, model.heads);
    Var total = total_objective(triplet, Var{}, reg, config.loss);
    t.backward(total);
    encoder_opt.step();

    LossBreakdown parts;
    parts.w_triplet = triplet.scalar();
    parts.reg_classification = reg.classification.scalar();
    parts.reg_reconstruction = reg.reconstruction.scalar();
    return total_loss(parts, config.loss);
}

LossBreakdown adapt_step(ModelState& model, Adam& encoder_opt, Adam& disc_opt,
                         const AdaptBatch& batch, const TrainConfig& config) {
    const RecipeBatch src_recipes = make_recipe_batch(recipes_of(batch.source));
    const Matrix src_images = make_image_batch(images_of(batch.source));
    const RecipeBatch tgt_recipes = make_recipe_batch(batch.target);

    LossBreakdown parts;
    {
        // Discriminator step on detached recipe embeddings.
        Tape t;
        Var rs = model.recipe.forward_frozen(t, src_recipes);
        Var rt = model.recipe.forward_frozen(t, tgt_recipes);
        Var d_loss = weighted_discriminator_loss(t, rs, rt, batch.adversarial_weights, model.discriminator);
        t.backward(d_loss);
        disc_opt.step();
        parts.w_adv_discriminator = d_loss.scalar();
    }
    Tape t;
    Var rs = model.recipe.forward(t, src_recipes);
    Var vs = model.image.forward(t, src_images);
    Var triplet = weighted_triplet_loss(rs, vs, batch.triplet_weights, config.loss.margin, config.mining);
    const RegularizerLosses reg = regularizer(t, vs, src_recipes.labels, rs, src_images, model.heads);
    Var rt = model.recipe.forward(t, tgt_recipes);
    Var adv = weighted_encoder_adversarial_loss(t, rt, batch.adversarial_weights, model.discriminator);
    Var total = total_objective(triplet, adv, reg, config.loss);
    t.backward(total);
    encoder_opt.step();

    parts.w_triplet = triplet.scalar();
    parts.w_adv_encoder = adv.scalar();
    parts.reg_classification = reg.classification.scalar();
    parts.reg_reconstruction = reg.reconstruction.scalar();
    return total_loss(parts, config.loss);
}

// ---------------------------------------------------------------------------
// Stages

PretrainResult pretrain_source(const DatasetBundle& bundle, const TrainConfig& config,
                               const TrainSinks& sinks, const ModelState* initial) {
    if (bundle.source_pairs.empty()) throw MissingInputError("pretrain: bundle has no source pairs");
    return supervised_training(bundle.source_pairs, ModelDims::for_data(bundle.manifest.config), config,
                               sinks, "pretrain", initial);
}

PretrainResult train_oracle(const DatasetBundle& bundle, const TrainConfig& config,
                            const TrainSinks& sinks, const ModelState* initial) {
    if (bundle.target_train_images.size() != bundle.target_recipes.size()) {
        throw MissingInputError("oracle: bundle lacks images for the target training recipes");
    }
    // Target pairs first so that a held-out validation tail stays source-only.
    std::vector<Pair> pairs;
    pairs.reserve(bundle.source_pairs.size() + bundle.target_recipes.size());
    for (std::size_t i = 0; i < bundle.target_recipes.size(); ++i) {
        pairs.push_back(Pair{bundle.target_recipes[i], bundle.target_train_images[i], false});
    }
    pairs.insert(pairs.end(), bundle.source_pairs.begin(), bundle.source_pairs.end());
    return supervised_training(pairs, ModelDims::for_data(bundle.manifest.config), config, sinks, "oracle",
                               initial);
}

FrozenFeatures precompute_frozen_features(const DatasetBundle& bundle,
                                          const FrozenRecipeEncoder& frozen) {
    std::vector<const RecipeSample*> src, tgt;
    for (const Pair& p : bundle.source_pairs) src.push_back(&p.recipe);
    for (const RecipeSample& r : bundle.target_recipes) tgt.push_back(&r);
    return {frozen.encode(make_recipe_batch(src)), frozen.encode(make_recipe_batch(tgt))};
}

namespace {

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = m.row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

}  // namespace

AdaptBatch draw_adapt_batch(const DatasetBundle& bundle, const FrozenFeatures& features,
                            const std::vector<std::size_t>& target_positions,
                            std::size_t source_limit, const TrainConfig& config, Rng& rng,
                            SimilarityMatrix* w1_out, SelectedSubset* subset_out) {
    const std::size_t n = config.batch_size;
    if (target_positions.size() != n) throw ContractError("draw_adapt_batch: target batch size mismatch");
    // Without selection the pool is a single batch and the whole pool is used.
    const std::size_t pool_size = config.selection_active() ? config.pool_size() : n;
    if (source_limit < pool_size) throw ConfigError("source pool larger than the source training set");

    std::vector<std::size_t> all(source_limit);
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::size_t> pool;
    pool.reserve(pool_size);
    std::sample(all.begin(), all.end(), std::back_inserter(pool), pool_size, rng);

    const SimilarityMatrix w1 =
        compute_w1(gather_rows(features.target, target_positions), gather_rows(features.source, pool));

    SelectedSubset subset;
    if (config.selection_active()) {
        subset = select_topk(w1, config.top_k());
    } else {
        subset.indices.resize(pool.size());
        std::iota(subset.indices.begin(), subset.indices.end(), 0);
        subset.provenance.assign(pool.size(), {});
    }
    const std::vector<std::size_t> picks = sample_source_batch(subset, n, rng);
    const WeightVector weights = compute_weight_vector(extract_w2(w1, picks));

    AdaptBatch batch;
    for (std::size_t p : picks) batch.source.push_back(&bundle.source_pairs[pool[p]]);
    for (std::size_t t : target_positions) batch.target.push_back(&bundle.target_recipes[t]);
    batch.triplet_weights = config.w_triplet_off ? WeightVector::ones(n) : weights;
    batch.adversarial_weights = config.w_adv_off ? WeightVector::ones(n) : weights;
    if (w1_out != nullptr) *w1_out = w1;
    if (subset_out != nullptr) *subset_out = subset;
    return batch;
}

ModelState adapt(const DatasetBundle& bundle, ModelState model, const FrozenRecipeEncoder& frozen,
                 const TrainConfig& config, const TrainSinks& sinks) {
    config.validate();
    if (bundle.target_recipes.size() < config.batch_size) {
        throw ConfigError("adapt: fewer target recipes than one batch");
    }
    if (config.warm_start_off) {
        Rng rng = make_rng(config.seed, "model.cold_start");
        model.recipe = RecipeEncoder(model.dims, rng);
    } else {
        model.recipe = frozen.encoder();
    }
    const std::size_t source_limit = training_prefix(bundle.source_pairs.size(), config);
    const std::vector<Pair> held_out(bundle.source_pairs.begin() + static_cast<std::ptrdiff_t>(source_limit),
                                     bundle.source_pairs.end());
    const FrozenFeatures features = precompute_frozen_features(bundle, frozen);

    Adam encoder_opt(model.encoder_parameters(), AdamOptions{.learning_rate = config.adapt_learning_rate});
    Adam disc_opt(model.discriminator_parameters(), AdamOptions{.learning_rate = config.adapt_learning_rate});
    Rng rng = make_rng(config.seed, "batch.adapt");

    const std::size_t n = config.batch_size;
    const std::size_t steps_per_epoch = bundle.target_recipes.size() / n;
    std::vector<std::size_t> target_order(bundle.target_recipes.size());
    std::iota(target_order.begin(), target_order.end(), 0);
    EarlyStopper stopper;
    stopper.patience = config.early_stop_patience;
    std::size_t global_step = 0;

    for (std::size_t epoch = 0; epoch < config.adapt_epochs; ++epoch) {
        auto last_good = std::make_shared<const ModelState>(model);
        std::shuffle(target_order.begin(), target_order.end(), rng);
        for (std::size_t s = 0; s < steps_per_epoch; ++s, ++global_step) {
            const std::vector<std::size_t> positions(target_order.begin() + static_cast<std::ptrdiff_t>(s * n),
                                                     target_order.begin() + static_cast<std::ptrdiff_t>((s + 1) * n));
            try {
                SimilarityMatrix w1;
                SelectedSubset subset;
                const AdaptBatch batch = draw_adapt_batch(bundle, features, positions, source_limit, config, rng,
                                                          sinks.trace != nullptr ? &w1 : nullptr,
                                                          sinks.trace != nullptr ? &subset : nullptr);
                if (sinks.trace != nullptr) {
                    const WeightVector& w = config.w_triplet_off ? batch.adversarial_weights : batch.triplet_weights;
                    write_selection_trace(*sinks.trace, global_step, w1, subset, w);
                }
                const LossBreakdown br = adapt_step(model, encoder_opt, disc_opt, batch, config);
                log_step(sinks.log, "adapt", epoch, s, br);
            } catch (const TrainingError& e) {
                throw NumericalFailure(std::string("adapt: ") + e.what(), last_good);
            } catch (const DegenerateInputError& e) {
                throw NumericalFailure(std::string("adapt: ") + e.what(), last_good);
            }
        }
        if (config.early_stop_patience > 0 && stopper.update(model, validation_medr(model, held_out, config))) {
            break;
        }
    }
    if (stopper.best_state != nullptr) model = *stopper.best_state;
    return model;
}

// ---------------------------------------------------------------------------
// Variants and grids

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::kSourceOnly:
            return "source_only";
        case Variant::kUnweightedAdversarial:
            return "unweighted_adv";
        case Variant::kProposed:
            return "proposed";
        case Variant::kNoSelection:
            return "no_sbs";
        case Variant::kNoWeightedTriplet:
            return "no_w_triplet";
        case Variant::kNoWeightedAdversarial:
            return "no_w_adv";
        case Variant::kOracle:
            return "oracle";
    }
    return "?";
}

Variant parse_variant(const std::string& name) {
    for (Variant v : {Variant::kSourceOnly, Variant::kUnweightedAdversarial, Variant::kProposed,
                      Variant::kNoSelection, Variant::kNoWeightedTriplet, Variant::kNoWeightedAdversarial,
                      Variant::kOracle}) {
        if (name == variant_name(v)) return v;
    }
    throw ConfigError("unknown variant '" + name + "'");
}

const std::vector<Variant>& table_variants() {
    static const std::vector<Variant> kVariants = {
        Variant::kSourceOnly,        Variant::kUnweightedAdversarial, Variant::kNoSelection,
        Variant::kNoWeightedTriplet, Variant::kNoWeightedAdversarial, Variant::kProposed};
    return kVariants;
}

TrainConfig configure_variant(TrainConfig c, Variant v) {
    switch (v) {
        case Variant::kUnweightedAdversarial:
            c.sbs_off = c.w_triplet_off = c.w_adv_off = true;
            break;
        case Variant::kNoSelection:
            c.sbs_off = true;
            break;
        case Variant::kNoWeightedTriplet:
            c.w_triplet_off = true;
            break;
        case Variant::kNoWeightedAdversarial:
            c.w_adv_off = true;
            break;
        case Variant::kSourceOnly:
        case Variant::kProposed:
        case Variant::kOracle:
            break;
    }
    return c;
}

std::string config_hash(const TrainConfig& config) {
    TrainConfig c = config;
    c.seed = 0;
    KeyValues kv;
    c.write(kv);
    std::ostringstream ss;
    kv.write(ss);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%08llx",
                  static_cast<unsigned long long>(fnv1a(ss.str()) & 0xffffffffULL));
    return buf;
}

RunResult run_variant(const DatasetBundle& bundle, const PretrainResult& pretrained, Variant v,
                      const TrainConfig& config) {
    const TrainConfig cfg = configure_variant(config, v);
    cfg.validate();
    RunResult r;
    r.variant = v;
    r.seed = cfg.seed;
    r.pool_size = cfg.selection_active() ? cfg.pool_size() : cfg.batch_size;
    r.run_id = std::string(variant_name(v)) + "-s" + std::to_string(cfg.seed) + "-p" +
               std::to_string(r.pool_size) + "-" + config_hash(cfg);
    auto score = [&](const ModelState& m) {
        return evaluate(m, bundle.target_test, cfg.eval_pool, cfg.eval_repeats, cfg.seed, cfg.eval_direction);
    };
    switch (v) {
        case Variant::kSourceOnly:
            r.metrics = score(pretrained.model);
            break;
        case Variant::kOracle:
            r.metrics = score(train_oracle(bundle, cfg).model);
            break;
        default:
            r.metrics = score(adapt(bundle, pretrained.model, pretrained.frozen, cfg));
            break;
    }
    return r;
}

namespace {

template <typename F>
void parallel_for(std::size_t count, std::size_t workers, F&& body) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<RunResult> run_ablation(const DatasetBundle& bundle, const AblationGrid& grid) {
    if (grid.variants.empty() || grid.seeds.empty()) throw ConfigError("ablation grid is empty");
    const std::vector<std::size_t> multiples =
        grid.pool_multiples.empty() ? std::vector<std::size_t>{grid.base.pool_multiple} : grid.pool_multiples;
    for (std::size_t m : multiples) {
        TrainConfig c = grid.base;
        c.pool_multiple = m;
        c.validate();
    }

    std::vector<PretrainResult> pretrained(grid.seeds.size());
    parallel_for(grid.seeds.size(), grid.workers, [&](std::size_t s) {
        TrainConfig c = grid.base;
        c.seed = grid.seeds[s];
        pretrained[s] = pretrain_source(bundle, c);
    });

    struct Cell {
        std::size_t seed_index;
        std::size_t multiple;
        Variant variant;
    };
    std::vector<Cell> cells;
    for (std::size_t s = 0; s < grid.seeds.size(); ++s)
        for (std::size_t m : multiples)
            for (Variant v : grid.variants) cells.push_back({s, m, v});

    std::vector<RunResult> results(cells.size());
    parallel_for(cells.size(), grid.workers, [&](std::size_t i) {
        const Cell& cell = cells[i];
        TrainConfig c = grid.base;
        c.seed = grid.seeds[cell.seed_index];
        c.pool_multiple = cell.multiple;
        results[i] = run_variant(bundle, pretrained[cell.seed_index], cell.variant, c);
    });
    return results;
}

void write_metrics_header(std::ostream& out) { out << "run_id,variant,seed,pool_size,medr,r1,r5,r10\n"; }

void write_metrics_row(std::ostream& out, const RunResult& r) {
    out << r.run_id << ',' << variant_name(r.variant) << ',' << r.seed << ',' << r.pool_size << ','
        << format_double(r.metrics.medr) << ',' << format_double(r.metrics.r1) << ','
        << format_double(r.metrics.r5) << ',' << format_double(r.metrics.r10) << '\n';
}

}  // namespace wadapt
