#include "wadapt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string_view>

#include "wadapt/errors.hpp"
#include "wadapt/rng.hpp"

namespace wadapt {

namespace {

constexpr int kFormatVersion = 1;

using Vec = std::vector<double>;

// Linear map plus the target-domain distortion of one feature block.
struct BlockMap {
    std::size_t dim = 0;
    std::vector<Vec> rows;  // dim × L
    Vec plane_u, plane_v;   // orthonormal rotation plane
    double angle = 0.0;
    Vec target_offset;      // lies in the noise-only complement of the signal subspace

    Vec apply(const Vec& z, bool target, double noise, Rng& rng) const {
        Vec x(dim, 0.0);
        for (std::size_t r = 0; r < dim; ++r)
            x[r] = std::inner_product(rows[r].begin(), rows[r].end(), z.begin(), 0.0);
        if (target) {
            // Rotate the (u, v) component by `angle`, leave the complement alone.
            const double a = std::inner_product(x.begin(), x.end(), plane_u.begin(), 0.0);
            const double b = std::inner_product(x.begin(), x.end(), plane_v.begin(), 0.0);
            const double ra = std::cos(angle) * a - std::sin(angle) * b;
            const double rb = std::sin(angle) * a + std::cos(angle) * b;
            for (std::size_t r = 0; r < dim; ++r) {
                x[r] += (ra - a) * plane_u[r] + (rb - b) * plane_v[r] + target_offset[r];
            }
        }
        std::normal_distribution<double> eps(0.0, 1.0);
        for (double& v : x) v += noise * eps(rng);
        return x;
    }
};

Vec gaussian_vec(std::size_t n, Rng& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Vec v(n);
    for (double& x : v) x = nd(rng);
    return v;
}

double norm(const Vec& v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

Vec scaled_unit(Vec v, double length) {
    const double n = norm(v);
    for (double& x : v) x *= length / n;
    return v;
}

Vec map_of(const std::vector<Vec>& rows, const Vec& a) {
    Vec out(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        out[r] = std::inner_product(rows[r].begin(), rows[r].end(), a.begin(), 0.0);
    return out;
}

// Removes from v its components along the orthonormal vectors in `basis`.
void project_out(Vec& v, const std::vector<Vec>& basis) {
    for (const Vec& q : basis) {
        const double d = std::inner_product(v.begin(), v.end(), q.begin(), 0.0);
        for (std::size_t r = 0; r < v.size(); ++r) v[r] -= d * q[r];
    }
}

BlockMap make_block(std::size_t dim, const GenConfig& cfg, double shift_scale, Rng& rng) {
    BlockMap m;
    m.dim = dim;
    const double s = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
    for (std::size_t r = 0; r < dim; ++r) {
        Vec row = gaussian_vec(cfg.latent_dim, rng);
        for (double& x : row) x *= s;
        m.rows.push_back(std::move(row));
    }
    // Rotation plane inside the signal subspace of the block.
    m.plane_u = scaled_unit(map_of(m.rows, gaussian_vec(cfg.latent_dim, rng)), 1.0);
    Vec v = map_of(m.rows, gaussian_vec(cfg.latent_dim, rng));
    project_out(v, {m.plane_u});
    m.plane_v = scaled_unit(std::move(v), 1.0);
    m.angle = cfg.shift_angle * shift_scale;

    // Gram-Schmidt over the map's columns spans the signal subspace.
    std::vector<Vec> basis;
    for (std::size_t k = 0; k < cfg.latent_dim; ++k) {
        Vec col(dim);
        for (std::size_t r = 0; r < dim; ++r) col[r] = m.rows[r][k];
        project_out(col, basis);
        if (norm(col) > 1e-9) basis.push_back(scaled_unit(std::move(col), 1.0));
    }
    Vec g = gaussian_vec(dim, rng);
    project_out(g, basis);
    // A block no wider than the latent has no noise-only directions.
    m.target_offset = norm(g) > 1e-9 ? scaled_unit(std::move(g), cfg.target_offset * shift_scale)
                                     : Vec(dim, 0.0);
    return m;
}

struct DomainModel {
    BlockMap title, ingredients, steps, image;
    std::vector<Vec> label_projection;  // V × L
    Vec concept_dir;                    // unit latent direction of the domain shift
};

DomainModel make_model(const GenConfig& cfg, Rng& rng) {
    DomainModel dm;
    dm.concept_dir = scaled_unit(gaussian_vec(cfg.latent_dim, rng), 1.0);
    dm.title = make_block(cfg.title_dim, cfg, 1.0, rng);
    dm.ingredients = make_block(cfg.ingredient_dim, cfg, 1.0, rng);
    dm.steps = make_block(cfg.steps_dim, cfg, 1.0, rng);
    dm.image = make_block(cfg.image_dim, cfg, cfg.image_shift, rng);
    for (std::size_t k = 0; k < cfg.vocab; ++k) dm.label_projection.push_back(gaussian_vec(cfg.latent_dim, rng));
    return dm;
}

std::vector<std::uint8_t> labels_for(const DomainModel& dm, const GenConfig& cfg, const Vec& z) {
    const Vec scores = map_of(dm.label_projection, z);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<std::uint8_t> labels(cfg.vocab, 0);
    for (std::size_t k = 0; k < cfg.active_labels; ++k) labels[order[k]] = 1;
    return labels;
}

Pair make_pair(const DomainModel& dm, const GenConfig& cfg, std::int64_t id, const Vec& base_z,
               bool target, bool distinctive, Rng& rng) {
    // Target dishes lean towards +concept_dir, distinctive source dishes away from it.
    const double lean = (target ? cfg.concept_shift : 0.0) - (distinctive ? cfg.distinctive_offset : 0.0);
    Vec z = base_z;
    for (std::size_t k = 0; k < z.size(); ++k) z[k] += lean * dm.concept_dir[k];
    Pair p;
    p.distinctive = distinctive;
    p.recipe.id = id;
    p.recipe.title = dm.title.apply(z, target, cfg.noise_scale, rng);
    p.recipe.ingredients = dm.ingredients.apply(z, target, cfg.noise_scale, rng);
    p.recipe.steps = dm.steps.apply(z, target, cfg.noise_scale, rng);
    p.recipe.labels = labels_for(dm, cfg, z);
    p.image.id = id;
    p.image.features = dm.image.apply(z, target, cfg.noise_scale, rng);
    return p;
}

void digest_vec(std::uint64_t& h, const Vec& v) {
    std::string_view bytes(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    h = fnv1a(bytes, h);
}

}  // namespace

void GenConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(source_count, "source_count");
    positive(target_count, "target_count");
    positive(target_test_count, "target_test_count");
    positive(latent_dim, "latent_dim");
    positive(title_dim, "title_dim");
    positive(ingredient_dim, "ingredient_dim");
    positive(steps_dim, "steps_dim");
    positive(image_dim, "image_dim");
    positive(vocab, "vocab");
    positive(active_labels, "active_labels");
    if (active_labels > vocab) throw ConfigError("active_labels must not exceed vocab");
    if (!(shift_angle >= 0.0 && shift_angle <= std::numbers::pi / 2)) {
        throw ConfigError("shift_angle must lie in [0, pi/2], got " + format_double(shift_angle));
    }
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
        throw ConfigError("noise_scale must be finite and >= 0");
    }
    if (!(concept_shift >= 0.0) || !std::isfinite(concept_shift)) {
        throw ConfigError("concept_shift must be finite and >= 0");
    }
    if (!(target_offset >= 0.0) || !std::isfinite(target_offset)) {
        throw ConfigError("target_offset must be finite and >= 0");
    }
    if (!(image_shift >= 0.0) || !std::isfinite(image_shift)) {
        throw ConfigError("image_shift must be finite and >= 0");
    }
    if (!(distinctive_fraction >= 0.0 && distinctive_fraction <= 1.0)) {
        throw ConfigError("distinctive_fraction must lie in [0, 1]");
    }
    if (!(distinctive_offset >= 0.0) || !std::isfinite(distinctive_offset)) {
        throw ConfigError("distinctive_offset must be finite and >= 0");
    }
}

void GenConfig::write(KeyValues& kv) const {
    kv.set("source_count", std::to_string(source_count));
    kv.set("target_count", std::to_string(target_count));
    kv.set("target_test_count", std::to_string(target_test_count));
    kv.set("latent_dim", std::to_string(latent_dim));
    kv.set("title_dim", std::to_string(title_dim));
    kv.set("ingredient_dim", std::to_string(ingredient_dim));
    kv.set("steps_dim", std::to_string(steps_dim));
    kv.set("image_dim", std::to_string(image_dim));
    kv.set("vocab", std::to_string(vocab));
    kv.set("active_labels", std::to_string(active_labels));
    kv.set("shift_angle", format_double(shift_angle));
    kv.set("noise_scale", format_double(noise_scale));
    kv.set("concept_shift", format_double(concept_shift));
    kv.set("target_offset", format_double(target_offset));
    kv.set("image_shift", format_double(image_shift));
    kv.set("distinctive_fraction", format_double(distinctive_fraction));
    kv.set("distinctive_offset", format_double(distinctive_offset));
}

GenConfig GenConfig::from(const KeyValues& kv) {
    GenConfig c;
    auto count = [&](const char* key, std::size_t fallback) -> std::size_t {
        const std::int64_t v = kv.get_int(key, static_cast<std::int64_t>(fallback));
        if (v <= 0) throw ConfigError(std::string(key) + " must be positive");
        return static_cast<std::size_t>(v);
    };
    c.source_count = count("source_count", c.source_count);
    c.target_count = count("target_count", c.target_count);
    c.target_test_count = count("target_test_count", c.target_test_count);
    c.latent_dim = count("latent_dim", c.latent_dim);
    c.title_dim = count("title_dim", c.title_dim);
    c.ingredient_dim = count("ingredient_dim", c.ingredient_dim);
    c.steps_dim = count("steps_dim", c.steps_dim);
    c.image_dim = count("image_dim", c.image_dim);
    c.vocab = count("vocab", c.vocab);
    c.active_labels = count("active_labels", c.active_labels);
    c.shift_angle = kv.get_double("shift_angle", c.shift_angle);
    c.noise_scale = kv.get_double("noise_scale", c.noise_scale);
    c.concept_shift = kv.get_double("concept_shift", c.concept_shift);
    c.target_offset = kv.get_double("target_offset", c.target_offset);
    c.image_shift = kv.get_double("image_shift", c.image_shift);
    c.distinctive_fraction = kv.get_double("distinctive_fraction", c.distinctive_fraction);
    c.distinctive_offset = kv.get_double("distinctive_offset", c.distinctive_offset);
    return c;
}

DatasetBundle generate(const GenConfig& config, std::uint64_t seed) {
    return generate(config, seed, nullptr);
}

DatasetBundle generate(const GenConfig& cfg, std::uint64_t seed,
                       std::vector<std::vector<double>>* source_latents) {
    cfg.validate();
    Rng map_rng = make_rng(seed, "data.maps");
    const DomainModel dm = make_model(cfg, map_rng);

    DatasetBundle b;
    b.manifest.seed = seed;
    b.manifest.config = cfg;
    if (source_latents != nullptr) source_latents->clear();

    Rng src_rng = make_rng(seed, "data.source");
    std::vector<bool> distinctive(cfg.source_count, false);
    {
        const auto n_distinct = static_cast<std::size_t>(
            std::llround(cfg.distinctive_fraction * static_cast<double>(cfg.source_count)));
        std::vector<std::size_t> order(cfg.source_count);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), src_rng);
        for (std::size_t k = 0; k < n_distinct; ++k) distinctive[order[k]] = true;
    }
    std::uint64_t digest = 0xcbf29ce484222325ULL;
    std::int64_t next_id = 0;
    b.source_pairs.reserve(cfg.source_count);
    for (std::size_t i = 0; i < cfg.source_count; ++i) {
        const Vec z = gaussian_vec(cfg.latent_dim, src_rng);
        b.source_pairs.push_back(make_pair(dm, cfg, next_id++, z, false, distinctive[i], src_rng));
        digest_vec(digest, z);
        if (source_latents != nullptr) source_latents->push_back(z);
    }
    b.manifest.source_latent_digest = digest;

    Rng tgt_rng = make_rng(seed, "data.target");
    b.target_recipes.reserve(cfg.target_count);
    b.target_train_images.reserve(cfg.target_count);
    for (std::size_t i = 0; i < cfg.target_count; ++i) {
        const Vec z = gaussian_vec(cfg.latent_dim, tgt_rng);
        Pair p = make_pair(dm, cfg, next_id++, z, true, false, tgt_rng);
        b.target_recipes.push_back(std::move(p.recipe));
        b.target_train_images.push_back(std::move(p.image));
    }

    Rng test_rng = make_rng(seed, "data.test");
    b.target_test.reserve(cfg.target_test_count);
    for (std::size_t i = 0; i < cfg.target_test_count; ++i) {
        const Vec z = gaussian_vec(cfg.latent_dim, test_rng);
        b.target_test.push_back(make_pair(dm, cfg, next_id++, z, true, false, test_rng));
    }
    return b;
}

// ---------------------------------------------------------------------------
// Text format: tab-separated fields, one sample per line, vectors as
// comma-separated decimals with 17 significant digits. Lines starting with '#'
// are comments.

namespace {

enum class Field { kId, kDistinctive, kTitle, kIngredients, kSteps, kLabels, kImage };

const std::vector<Field> kSourceFields = {Field::kId,    Field::kDistinctive, Field::kTitle,
                                          Field::kIngredients, Field::kSteps, Field::kLabels,
                                          Field::kImage};
const std::vector<Field> kTargetFields = {Field::kId, Field::kTitle, Field::kIngredients,
                                          Field::kSteps, Field::kLabels};
const std::vector<Field> kTestFields = {Field::kId,    Field::kTitle,  Field::kIngredients,
                                        Field::kSteps, Field::kLabels, Field::kImage};
const std::vector<Field> kImageFields = {Field::kId, Field::kImage};

std::string field_name(Field f, const GenConfig& c) {
    switch (f) {
        case Field::kId:
            return "id";
        case Field::kDistinctive:
            return "distinctive";
        case Field::kTitle:
            return "title[" + std::to_string(c.title_dim) + "]";
        case Field::kIngredients:
            return "ingredients[" + std::to_string(c.ingredient_dim) + "]";
        case Field::kSteps:
            return "steps[" + std::to_string(c.steps_dim) + "]";
        case Field::kLabels:
            return "labels[" + std::to_string(c.vocab) + "]";
        case Field::kImage:
            return "image[" + std::to_string(c.image_dim) + "]";
    }
    return {};
}

std::string field_list(const std::vector<Field>& fields, const GenConfig& c) {
    std::string out;
    for (Field f : fields) {
        if (!out.empty()) out += ',';
        out += field_name(f, c);
    }
    return out;
}

void write_vec(std::ostream& out, const Vec& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ',';
        out << format_double(v[i]);
    }
}

void write_labels(std::ostream& out, const std::vector<std::uint8_t>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ',';
        out << static_cast<int>(v[i]);
    }
}

void write_record(std::ostream& out, const std::vector<Field>& fields, const RecipeSample* r,
                  const ImageSample* img, bool distinctive) {
    bool first = true;
    for (Field f : fields) {
        if (!first) out << '\t';
        first = false;
        switch (f) {
            case Field::kId:
                out << (r != nullptr ? r->id : img->id);
                break;
            case Field::kDistinctive:
                out << (distinctive ? 1 : 0);
                break;
            case Field::kTitle:
                write_vec(out, r->title);
                break;
            case Field::kIngredients:
                write_vec(out, r->ingredients);
                break;
            case Field::kSteps:
                write_vec(out, r->steps);
                break;
            case Field::kLabels:
                write_labels(out, r->labels);
                break;
            case Field::kImage:
                write_vec(out, img->features);
                break;
        }
    }
    out << '\n';
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw MissingInputError("cannot write " + p.string());
    return out;
}

struct Record {
    RecipeSample recipe;
    ImageSample image;
    bool distinctive = false;
};

class TsvReader {
   public:
    TsvReader(const std::filesystem::path& path, const GenConfig& cfg)
        : path_(path), cfg_(cfg), in_(path, std::ios::binary) {
        if (!in_) throw MissingInputError("cannot open " + path.string());
    }

    std::vector<Record> read_all(const std::vector<Field>& fields, std::size_t expected) {
        std::vector<Record> out;
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (line.empty() || line[0] == '#') continue;
            out.push_back(parse_line(line, fields));
        }
        if (out.size() != expected) {
            throw ParseError(path_.string() + ": expected " + std::to_string(expected) +
                             " records, found " + std::to_string(out.size()) +
                             " (file truncated?)");
        }
        return out;
    }

   private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(path_.string() + ":" + std::to_string(line_no_) + ": " + what);
    }

    std::vector<std::string> split(const std::string& s, char sep) const {
        std::vector<std::string> parts;
        std::size_t start = 0;
        while (true) {
            const auto pos = s.find(sep, start);
            parts.push_back(s.substr(start, pos - start));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        return parts;
    }

    Vec parse_vec(const std::string& text, std::size_t dim, const char* what) const {
        const auto parts = split(text, ',');
        if (parts.size() != dim) {
            fail(std::string(what) + ": expected " + std::to_string(dim) + " values, found " +
                 std::to_string(parts.size()));
        }
        Vec v(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            try {
                v[i] = parse_double(parts[i]);
            } catch (const ParseError& e) {
                fail(std::string(what) + "[" + std::to_string(i) + "]: " + e.what());
            }
            if (!std::isfinite(v[i])) fail(std::string(what) + ": non-finite value");
        }
        return v;
    }

    std::int64_t parse_int(const std::string& text, const char* what) const {
        std::int64_t v = 0;
        auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty()) {
            fail(std::string(what) + ": expected an integer, got '" + text + "'");
        }
        return v;
    }

    Record parse_line(const std::string& raw, const std::vector<Field>& fields) const {
        std::string line = raw;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto cols = split(line, '\t');
        if (cols.size() != fields.size()) {
            fail("expected " + std::to_string(fields.size()) + " fields, found " +
                 std::to_string(cols.size()));
        }
        Record r;
        for (std::size_t k = 0; k < fields.size(); ++k) {
            const std::string& c = cols[k];
            switch (fields[k]) {
                case Field::kId:
                    r.recipe.id = r.image.id = parse_int(c, "id");
                    break;
                case Field::kDistinctive: {
                    const auto v = parse_int(c, "distinctive");
                    if (v != 0 && v != 1) fail("distinctive must be 0 or 1");
                    r.distinctive = v == 1;
                    break;
                }
                case Field::kTitle:
                    r.recipe.title = parse_vec(c, cfg_.title_dim, "title");
                    break;
                case Field::kIngredients:
                    r.recipe.ingredients = parse_vec(c, cfg_.ingredient_dim, "ingredients");
                    break;
                case Field::kSteps:
                    r.recipe.steps = parse_vec(c, cfg_.steps_dim, "steps");
                    break;
                case Field::kLabels: {
                    const auto parts = split(c, ',');
                    if (parts.size() != cfg_.vocab) {
                        fail("labels: expected " + std::to_string(cfg_.vocab) + " values, found " +
                             std::to_string(parts.size()));
                    }
                    bool any = false;
                    for (const auto& p : parts) {
                        const auto v = parse_int(p, "labels");
                        if (v != 0 && v != 1) fail("labels must be 0 or 1");
                        r.recipe.labels.push_back(static_cast<std::uint8_t>(v));
                        any = any || v == 1;
                    }
                    if (!any) fail("labels: at least one ingredient must be active");
                    break;
                }
                case Field::kImage:
                    r.image.features = parse_vec(c, cfg_.image_dim, "image");
                    break;
            }
        }
        return r;
    }

    std::filesystem::path path_;
    const GenConfig& cfg_;
    std::ifstream in_;
    std::size_t line_no_ = 0;
};

}  // namespace

void save(const DatasetBundle& b, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const GenConfig& cfg = b.manifest.config;
    KeyValues kv;
    kv.set("format_version", std::to_string(kFormatVersion));
    kv.set("seed", std::to_string(b.manifest.seed));
    kv.set("source_latent_digest", std::to_string(b.manifest.source_latent_digest));
    cfg.write(kv);
    // The counts actually stored, which may differ from the config for hand-made bundles.
    kv.set("rows.source_pairs", std::to_string(b.source_pairs.size()));
    kv.set("rows.target_recipes", std::to_string(b.target_recipes.size()));
    kv.set("rows.target_test", std::to_string(b.target_test.size()));
    kv.set("rows.target_train_images", std::to_string(b.target_train_images.size()));
    kv.set("delimiter", "tab; vectors comma-separated");
    kv.set("fields.source_pairs", field_list(kSourceFields, cfg));
    kv.set("fields.target_recipes", field_list(kTargetFields, cfg));
    kv.set("fields.target_test", field_list(kTestFields, cfg));
    kv.set("fields.target_train_images", field_list(kImageFields, cfg));
    kv.save(dir / "manifest.txt");

    {
        auto out = open_out(dir / "source_pairs.tsv");
        for (const Pair& p : b.source_pairs)
            write_record(out, kSourceFields, &p.recipe, &p.image, p.distinctive);
    }
    {
        auto out = open_out(dir / "target_recipes.tsv");
        for (const RecipeSample& r : b.target_recipes) write_record(out, kTargetFields, &r, nullptr, false);
    }
    {
        auto out = open_out(dir / "target_test.tsv");
        for (const Pair& p : b.target_test) write_record(out, kTestFields, &p.recipe, &p.image, false);
    }
    {
        auto out = open_out(dir / "target_train_images.tsv");
        for (const ImageSample& img : b.target_train_images)
            write_record(out, kImageFields, nullptr, &img, false);
    }
}

DatasetBundle load(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "manifest.txt")) {
        throw MissingInputError("no manifest.txt in " + dir.string());
    }
    const KeyValues kv = KeyValues::load(dir / "manifest.txt");
    const auto version = kv.get_int("format_version");
    if (version != kFormatVersion) {
        throw ParseError("manifest.txt: unsupported format_version " + std::to_string(version));
    }
    DatasetBundle b;
    b.manifest.seed = kv.get_uint("seed");
    b.manifest.source_latent_digest = kv.get_uint("source_latent_digest", 0);
    b.manifest.config = GenConfig::from(kv);
    const GenConfig& cfg = b.manifest.config;

    auto rows = [&](const char* key) { return static_cast<std::size_t>(kv.get_uint(key)); };

    for (auto& r : TsvReader(dir / "source_pairs.tsv", cfg).read_all(kSourceFields, rows("rows.source_pairs"))) {
        b.source_pairs.push_back(Pair{std::move(r.recipe), std::move(r.image), r.distinctive});
    }
    for (auto& r : TsvReader(dir / "target_recipes.tsv", cfg).read_all(kTargetFields, rows("rows.target_recipes"))) {
        b.target_recipes.push_back(std::move(r.recipe));
    }
    for (auto& r : TsvReader(dir / "target_test.tsv", cfg).read_all(kTestFields, rows("rows.target_test"))) {
        b.target_test.push_back(Pair{std::move(r.recipe), std::move(r.image), false});
    }
    const std::size_t n_images = kv.get_uint("rows.target_train_images", 0);
    if (n_images > 0 || std::filesystem::exists(dir / "target_train_images.tsv")) {
        for (auto& r : TsvReader(dir / "target_train_images.tsv", cfg).read_all(kImageFields, n_images)) {
            b.target_train_images.push_back(std::move(r.image));
        }
    }
    return b;
}

std::uint64_t dataset_digest(const std::filesystem::path& dir) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char* name : {"manifest.txt", "source_pairs.tsv", "target_recipes.tsv",
                             "target_test.tsv", "target_train_images.tsv"}) {
        std::ifstream in(dir / name, std::ios::binary);
        if (!in) continue;
        std::ostringstream ss;
        ss << in.rdbuf();
        h = fnv1a(name, h);
        h = fnv1a(ss.str(), h);
    }
    return h;
}

}  // namespace wadapt
