#include "wadapt/encoders.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>

#include "wadapt/errors.hpp"
#include "wadapt/keyvalue.hpp"

namespace wadapt {

ModelDims ModelDims::for_data(const GenConfig& cfg) {
    ModelDims d;
    d.title = cfg.title_dim;
    d.ingredients = cfg.ingredient_dim;
    d.steps = cfg.steps_dim;
    d.image = cfg.image_dim;
    d.vocab = cfg.vocab;
    return d;
}

namespace {

Matrix stack_rows(const std::vector<const std::vector<double>*>& rows, std::size_t dim,
                  const char* what) {
    Matrix m(rows.size(), dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i]->size() != dim) {
            throw DimensionError(std::string(what) + ": sample " + std::to_string(i) + " has " +
                                 std::to_string(rows[i]->size()) + " values, expected " +
                                 std::to_string(dim));
        }
        std::copy(rows[i]->begin(), rows[i]->end(), m.row(i).begin());
    }
    return m;
}

}  // namespace

RecipeBatch make_recipe_batch(const std::vector<const RecipeSample*>& samples) {
    if (samples.empty()) throw ContractError("empty recipe batch");
    std::vector<const std::vector<double>*> t, g, s;
    for (const auto* r : samples) {
        t.push_back(&r->title);
        g.push_back(&r->ingredients);
        s.push_back(&r->steps);
    }
    RecipeBatch b;
    b.title = stack_rows(t, samples.front()->title.size(), "title");
    b.ingredients = stack_rows(g, samples.front()->ingredients.size(), "ingredients");
    b.steps = stack_rows(s, samples.front()->steps.size(), "steps");
    const std::size_t v = samples.front()->labels.size();
    b.labels = Matrix(samples.size(), v);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i]->labels.size() != v) throw DimensionError("labels: ragged vocabulary");
        for (std::size_t k = 0; k < v; ++k) b.labels(i, k) = samples[i]->labels[k];
    }
    return b;
}

Matrix make_image_batch(const std::vector<const ImageSample*>& samples) {
    if (samples.empty()) throw ContractError("empty image batch");
    std::vector<const std::vector<double>*> rows;
    for (const auto* s : samples) rows.push_back(&s->features);
    return stack_rows(rows, samples.front()->features.size(), "image");
}

Dense::Dense(std::string name, std::size_t in, std::size_t out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-a, a);
    Matrix w(in, out);
    for (double& v : w.data()) v = u(rng);
    weight = Parameter(name + ".weight", std::move(w));
    bias = Parameter(name + ".bias", Matrix(1, out));
}

Var Dense::forward(Tape& t, Var x) {
    if (x.cols() != weight.value.rows()) {
        throw DimensionError(weight.name + ": input " + x.value().shape_string() +
                             " does not match weight " + weight.value.shape_string());
    }
    return ad::add(ad::matmul(x, t.param(weight)), t.param(bias));
}

Var Dense::forward_frozen(Tape& t, Var x) const {
    if (x.cols() != weight.value.rows()) {
        throw DimensionError(weight.name + ": input " + x.value().shape_string() +
                             " does not match weight " + weight.value.shape_string());
    }
    return ad::add(ad::matmul(x, t.constant(weight.value)), t.constant(bias.value));
}

// ---------------------------------------------------------------------------

RecipeEncoder::RecipeEncoder(const ModelDims& d, Rng& rng)
    : title_("recipe.title", d.title, d.section_hidden, rng),
      ingredients_("recipe.ingredients", d.ingredients, d.section_hidden, rng),
      steps_("recipe.steps", d.steps, d.section_hidden, rng),
      fusion_("recipe.fusion", 3 * d.section_hidden, d.embed, rng) {}

template <typename Self>
Var RecipeEncoder::run(Self& self, Tape& t, const RecipeBatch& batch, bool frozen) {
    if (batch.size() == 0) throw ContractError("encode_recipe: empty batch");
    auto layer = [&](auto& dense, Var x) {
        if constexpr (std::is_const_v<Self>) {
            return dense.forward_frozen(t, x);
        } else {
            return frozen ? dense.forward_frozen(t, x) : dense.forward(t, x);
        }
    };
    Var title = ad::tanh(layer(self.title_, t.constant(batch.title)));
    Var ingredients = ad::tanh(layer(self.ingredients_, t.constant(batch.ingredients)));
    Var steps = ad::tanh(layer(self.steps_, t.constant(batch.steps)));
    Var fused = layer(self.fusion_, ad::concat_cols({title, ingredients, steps}));
    return ad::l2_normalize_rows(fused);
}

Var RecipeEncoder::forward(Tape& t, const RecipeBatch& batch) { return run(*this, t, batch, false); }

Var RecipeEncoder::forward_frozen(Tape& t, const RecipeBatch& batch) const {
    return run(*this, t, batch, true);
}

std::vector<Parameter*> RecipeEncoder::parameters() {
    return {&title_.weight, &title_.bias, &ingredients_.weight, &ingredients_.bias,
            &steps_.weight, &steps_.bias, &fusion_.weight,      &fusion_.bias};
}

std::vector<const Parameter*> RecipeEncoder::parameters() const {
    return {&title_.weight, &title_.bias, &ingredients_.weight, &ingredients_.bias,
            &steps_.weight, &steps_.bias, &fusion_.weight,      &fusion_.bias};
}

// ---------------------------------------------------------------------------

ImageEncoder::ImageEncoder(const ModelDims& d, Rng& rng)
    : hidden_("image.hidden", d.image, d.image_hidden, rng),
      out_("image.out", d.image_hidden, d.embed, rng) {}

Var ImageEncoder::forward(Tape& t, const Matrix& images) {
    if (images.rows() == 0) throw ContractError("encode_image: empty batch");
    Var h = ad::relu(hidden_.forward(t, t.constant(images)));
    return ad::l2_normalize_rows(out_.forward(t, h));
}

std::vector<Parameter*> ImageEncoder::parameters() {
    return {&hidden_.weight, &hidden_.bias, &out_.weight, &out_.bias};
}

std::vector<const Parameter*> ImageEncoder::parameters() const {
    return {&hidden_.weight, &hidden_.bias, &out_.weight, &out_.bias};
}

// ---------------------------------------------------------------------------

Discriminator::Discriminator(const ModelDims& d, Rng& rng)
    : l1_("disc.l1", d.embed, d.disc_hidden, rng),
      l2_("disc.l2", d.disc_hidden, d.disc_hidden, rng),
      l3_("disc.l3", d.disc_hidden, 1, rng) {}

Var Discriminator::forward(Tape& t, Var x) {
    Var h = ad::relu(l1_.forward(t, x));
    h = ad::relu(l2_.forward(t, h));
    return ad::sigmoid(l3_.forward(t, h));
}

Var Discriminator::forward_frozen(Tape& t, Var x) const {
    Var h = ad::relu(l1_.forward_frozen(t, x));
    h = ad::relu(l2_.forward_frozen(t, h));
    return ad::sigmoid(l3_.forward_frozen(t, h));
}

std::vector<Parameter*> Discriminator::parameters() {
    return {&l1_.weight, &l1_.bias, &l2_.weight, &l2_.bias, &l3_.weight, &l3_.bias};
}

std::vector<const Parameter*> Discriminator::parameters() const {
    return {&l1_.weight, &l1_.bias, &l2_.weight, &l2_.bias, &l3_.weight, &l3_.bias};
}

// ---------------------------------------------------------------------------

Heads::Heads(const ModelDims& d, Rng& rng)
    : ingredient_("heads.ingredient", d.embed, d.vocab, rng),
      reconstruction_("heads.reconstruction", d.embed, d.image, rng) {}

Var Heads::ingredients(Tape& t, Var image_embeddings) {
    return ad::sigmoid(ingredient_.forward(t, image_embeddings));
}

Var Heads::reconstruct(Tape& t, Var recipe_embeddings) {
    return reconstruction_.forward(t, recipe_embeddings);
}

std::vector<Parameter*> Heads::parameters() {
    return {&ingredient_.weight, &ingredient_.bias, &reconstruction_.weight, &reconstruction_.bias};
}

std::vector<const Parameter*> Heads::parameters() const {
    return {&ingredient_.weight, &ingredient_.bias, &reconstruction_.weight, &reconstruction_.bias};
}

// ---------------------------------------------------------------------------

Matrix FrozenRecipeEncoder::encode(const RecipeBatch& batch) const {
    Tape t;
    return encoder_.forward_frozen(t, batch).value();
}

std::uint64_t parameter_digest(const std::vector<const Parameter*>& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const Parameter* p : params) {
        h = fnv1a(p->name, h);
        const auto& d = p->value.data();
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double)), h);
    }
    return h;
}

std::uint64_t FrozenRecipeEncoder::digest() const { return parameter_digest(encoder_.parameters()); }

ModelState::ModelState(const ModelDims& d, std::uint64_t seed) : dims(d) {
    Rng rng = make_rng(seed, "model.init");
    recipe = RecipeEncoder(d, rng);
    image = ImageEncoder(d, rng);
    discriminator = Discriminator(d, rng);
    heads = Heads(d, rng);
}

std::vector<Parameter*> ModelState::encoder_parameters() {
    std::vector<Parameter*> out = recipe.parameters();
    for (Parameter* p : image.parameters()) out.push_back(p);
    for (Parameter* p : heads.parameters()) out.push_back(p);
    return out;
}

std::vector<const Parameter*> ModelState::all_parameters() const {
    std::vector<const Parameter*> out = recipe.parameters();
    for (const Parameter* p : image.parameters()) out.push_back(p);
    for (const Parameter* p : discriminator.parameters()) out.push_back(p);
    for (const Parameter* p : heads.parameters()) out.push_back(p);
    return out;
}

Matrix embed_recipes(const ModelState& model, const RecipeBatch& batch) {
    Tape t;
    return model.recipe.forward_frozen(t, batch).value();
}

Matrix embed_images(const ModelState& model, const Matrix& images) {
    // ImageEncoder has no const forward; a copy keeps the caller's state untouched.
    ImageEncoder copy = model.image;
    Tape t;
    return copy.forward(t, images).value();
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kCheckpointFormat = "wadapt-checkpoint-1";

void write_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
    out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (i) out << ',';
        out << format_double(m.data()[i]);
    }
    out << '\n';
}

void write_dims(KeyValues& kv, const ModelDims& d) {
    kv.set("dims.title", std::to_string(d.title));
    kv.set("dims.ingredients", std::to_string(d.ingredients));
    kv.set("dims.steps", std::to_string(d.steps));
    kv.set("dims.image", std::to_string(d.image));
    kv.set("dims.vocab", std::to_string(d.vocab));
    kv.set("dims.section_hidden", std::to_string(d.section_hidden));
    kv.set("dims.image_hidden", std::to_string(d.image_hidden));
    kv.set("dims.embed", std::to_string(d.embed));
    kv.set("dims.disc_hidden", std::to_string(d.disc_hidden));
}

ModelDims read_dims(const KeyValues& kv) {
    ModelDims d;
    d.title = kv.get_uint("dims.title");
    d.ingredients = kv.get_uint("dims.ingredients");
    d.steps = kv.get_uint("dims.steps");
    d.image = kv.get_uint("dims.image");
    d.vocab = kv.get_uint("dims.vocab");
    d.section_hidden = kv.get_uint("dims.section_hidden");
    d.image_hidden = kv.get_uint("dims.image_hidden");
    d.embed = kv.get_uint("dims.embed");
    d.disc_hidden = kv.get_uint("dims.disc_hidden");
    return d;
}

}  // namespace

void save_checkpoint(const ModelState& model, const FrozenRecipeEncoder* frozen,
                     const std::filesystem::path& file) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw MissingInputError("cannot write " + file.string());
    KeyValues header;
    header.set("format", kCheckpointFormat);
    header.set("has_frozen", frozen != nullptr ? "1" : "0");
    write_dims(header, model.dims);
    header.write(out);
    out << "---\n";
    for (const Parameter* p : model.all_parameters()) write_tensor(out, p->name, p->value);
    if (frozen != nullptr) {
        for (const Parameter* p : frozen->encoder().parameters())
            write_tensor(out, "frozen." + p->name, p->value);
    }
}

ModelState load_checkpoint(const std::filesystem::path& file, FrozenRecipeEncoder* frozen) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw MissingInputError("cannot open checkpoint " + file.string());

    std::string line;
    std::ostringstream header_text;
    std::size_t line_no = 0;
    bool saw_separator = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line == "---") {
            saw_separator = true;
            break;
        }
        header_text << line << '\n';
    }
    auto fail = [&](const std::string& what) -> ParseError {
        return ParseError(file.string() + ":" + std::to_string(line_no) + ": " + what);
    };
    if (!saw_separator) throw fail("missing header separator");
    std::istringstream hs(header_text.str());
    const KeyValues header = KeyValues::parse(hs, file.string());
    if (header.get_string("format", "") != kCheckpointFormat) throw fail("not a wadapt checkpoint");
    const bool has_frozen = header.get_bool("has_frozen", false);

    std::map<std::string, Matrix> tensors;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag, name;
        std::size_t rows = 0, cols = 0;
        if (!(ls >> tag >> name >> rows >> cols) || tag != "tensor") throw fail("expected a tensor header");
        std::string values;
        if (!std::getline(in, values)) throw fail("tensor '" + name + "' has no values (truncated?)");
        ++line_no;
        std::vector<double> data;
        data.reserve(rows * cols);
        std::size_t start = 0;
        while (start <= values.size() && data.size() < rows * cols + 1) {
            const auto pos = values.find(',', start);
            const std::string tok = values.substr(start, pos - start);
            try {
                data.push_back(parse_double(tok));
            } catch (const ParseError&) {
                throw fail("tensor '" + name + "': bad value '" + tok + "'");
            }
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        if (data.size() != rows * cols) {
            throw fail("tensor '" + name + "': expected " + std::to_string(rows * cols) +
                       " values, found " + std::to_string(data.size()));
        }
        tensors[name] = Matrix(rows, cols, std::move(data));
    }

    ModelState model(read_dims(header), 0);
    auto assign = [&](Parameter& p, const std::string& name) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ParseError(file.string() + ": missing tensor '" + name + "'");
        if (!it->second.same_shape(p.value)) {
            throw DimensionError(file.string() + ": tensor '" + name + "' has shape " +
                                 it->second.shape_string() + ", model expects " +
                                 p.value.shape_string());
        }
        p.value = it->second;
        p.grad = Matrix(p.value.rows(), p.value.cols());
    };
    for (Parameter* p : model.encoder_parameters()) assign(*p, p->name);
    for (Parameter* p : model.discriminator_parameters()) assign(*p, p->name);
    if (frozen != nullptr) {
        if (!has_frozen) throw MissingInputError(file.string() + ": checkpoint has no frozen source encoder");
        Rng unused(0);
        RecipeEncoder enc(model.dims, unused);
        for (Parameter* p : enc.parameters()) assign(*p, "frozen." + p->name);
        *frozen = FrozenRecipeEncoder(std::move(enc));
    }
    return model;
}

}  // namespace wadapt
