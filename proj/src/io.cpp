#include "rpflow/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "binary containers are written in little-endian host order");

namespace rpflow::io {

namespace {

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void get_bytes(std::istream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw IoError("unexpected end of file");
}

template <typename T>
void put(std::ostream& out, T v) {
    put_bytes(out, &v, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v;
    get_bytes(in, &v, sizeof(T));
    return v;
}

void put_matrix(std::ostream& out, const Matrix& m) {
    put<std::uint64_t>(out, m.rows());
    put<std::uint64_t>(out, m.cols());
    put_bytes(out, m.data(), m.size() * sizeof(double));
}

Matrix get_matrix(std::istream& in) {
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    Matrix m(rows, cols);
    get_bytes(in, m.data(), m.size() * sizeof(double));
    return m;
}

void put_layers(std::ostream& out, const std::vector<net::Layer>& layers) {
    put<std::uint64_t>(out, layers.size());
    for (const auto& l : layers) {
        put_matrix(out, l.w);
        put<std::uint64_t>(out, l.b.size());
        put_bytes(out, l.b.data(), l.b.size() * sizeof(double));
    }
}

std::vector<net::Layer> get_layers(std::istream& in) {
    const auto n = get<std::uint64_t>(in);
    std::vector<net::Layer> layers(n);
    for (auto& l : layers) {
        l.w = get_matrix(in);
        l.b.resize(get<std::uint64_t>(in));
        get_bytes(in, l.b.data(), l.b.size() * sizeof(double));
    }
    return layers;
}

int read_pnm_token(std::istream& in) {
    // skips whitespace and '#' comments per the netpbm grammar
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw IoError("truncated image header");
    std::string tok;
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    try {
        return std::stoi(tok);
    } catch (...) {
        throw IoError("malformed image header token '" + tok + "'");
    }
}

}  // namespace

Image load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[2];
    get_bytes(in, magic, 2);
    std::size_t channels;
    if (magic[0] == 'P' && magic[1] == '5')
        channels = 1;
    else if (magic[0] == 'P' && magic[1] == '6')
        channels = 3;
    else
        throw IoError(path + ": not a binary PGM/PPM file");

    Image img;
    img.channels = channels;
    img.width = static_cast<std::size_t>(read_pnm_token(in));
    img.height = static_cast<std::size_t>(read_pnm_token(in));
    img.maxval = static_cast<std::size_t>(read_pnm_token(in));
    if (img.maxval != 255 && img.maxval != 65535)
        throw IoError(path + ": unsupported maxval " + std::to_string(img.maxval));

    const std::size_t pixels = img.height * img.width;
    img.values = Matrix(pixels, channels);
    const double scale = 1.0 / static_cast<double>(img.maxval);
    const std::size_t bytes_per = img.maxval == 255 ? 1 : 2;
    std::vector<unsigned char> raw(pixels * channels * bytes_per);
    get_bytes(in, raw.data(), raw.size());
    for (std::size_t i = 0; i < pixels * channels; ++i) {
        std::size_t v;
        if (bytes_per == 1)
            v = raw[i];
        else
            v = (static_cast<std::size_t>(raw[2 * i]) << 8) | raw[2 * i + 1];  // network order
        img.values.data()[i] = static_cast<double>(v) * scale;
    }
    return img;
}

void save_image(const Image& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        throw InvalidParam("save_image: channels must be 1 or 3");
    if (img.maxval != 255 && img.maxval != 65535)
        throw InvalidParam("save_image: maxval must be 255 or 65535");
    if (img.values.rows() != img.height * img.width || img.values.cols() != img.channels)
        throw DimensionMismatch("save_image: value shape does not match header");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path);
    out << (img.channels == 1 ? "P5" : "P6") << "\n"
        << img.width << " " << img.height << "\n"
        << img.maxval << "\n";
    const double scale = static_cast<double>(img.maxval);
    for (std::size_t i = 0; i < img.values.size(); ++i) {
        double v = img.values.data()[i];
        v = std::min(1.0, std::max(0.0, v));
        const auto q = static_cast<std::size_t>(std::lround(v * scale));
        if (img.maxval == 255) {
            const auto b = static_cast<unsigned char>(q);
            put_bytes(out, &b, 1);
        } else {
            const unsigned char hi = static_cast<unsigned char>(q >> 8);
            const unsigned char lo = static_cast<unsigned char>(q & 0xff);
            put_bytes(out, &hi, 1);
            put_bytes(out, &lo, 1);
        }
    }
}

Matrix image_grid(std::size_t height, std::size_t width) {
    Matrix grid(height * width, 2);
    for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c) {
            grid(r * width + c, 0) =
                width > 1 ? static_cast<double>(c) / static_cast<double>(width - 1) : 0.0;
            grid(r * width + c, 1) =
                height > 1 ? static_cast<double>(r) / static_cast<double>(height - 1) : 0.0;
        }
    return grid;
}

cfm::FieldObservations load_field_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");

    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    std::size_t d = 0;
    while (d < header.size() && header[d] == "x" + std::to_string(d)) ++d;
    if (d == 0 || d == header.size())
        throw IoError(path + ": header must start with x0..x{d-1} followed by value columns");
    const std::size_t m = header.size() - d;

    std::vector<double> flat;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t cells = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                flat.push_back(std::stod(cell));
            } catch (...) {
                throw IoError(path + ": non-numeric cell '" + cell + "'");
            }
            ++cells;
        }
        if (cells != header.size())
            throw IoError(path + ": ragged row with " + std::to_string(cells) + " cells");
        ++rows;
    }

    cfm::FieldObservations obs;
    obs.positions = Matrix(rows, d);
    obs.values = Matrix(rows, m);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < d; ++j) obs.positions(i, j) = flat[i * header.size() + j];
        for (std::size_t j = 0; j < m; ++j) obs.values(i, j) = flat[i * header.size() + d + j];
    }
    return obs;
}

void save_field_csv(const cfm::FieldObservations& obs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path);
    out.precision(17);
    for (std::size_t j = 0; j < obs.dim(); ++j) out << (j ? "," : "") << "x" << j;
    for (std::size_t j = 0; j < obs.channels(); ++j) out << ",v" << j;
    out << "\n";
    for (std::size_t i = 0; i < obs.count(); ++i) {
        for (std::size_t j = 0; j < obs.dim(); ++j) out << (j ? "," : "") << obs.positions(i, j);
        for (std::size_t j = 0; j < obs.channels(); ++j) out << "," << obs.values(i, j);
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {
constexpr char kCheckpointMagic[4] = {'R', 'P', 'F', 'C'};
constexpr char kEnsembleMagic[4] = {'R', 'P', 'E', 'N'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path);
    put_bytes(out, kCheckpointMagic, 4);
    put<std::uint32_t>(out, kVersion);

    put<std::uint8_t>(out, static_cast<std::uint8_t>(ckpt.encoder.kind));
    switch (ckpt.encoder.kind) {
        case rff::EncoderKind::rff:
        case rff::EncoderKind::rff_region:
            put<std::uint64_t>(out, ckpt.encoder.basis.seed);
            put<double>(out, ckpt.encoder.basis.sigma_rff);
            put_matrix(out, ckpt.encoder.basis.b);
            if (ckpt.encoder.kind == rff::EncoderKind::rff_region)
                put<double>(out, ckpt.encoder.region_split);
            break;
        case rff::EncoderKind::posenc:
            put<std::uint64_t>(out, ckpt.encoder.octaves);
            put<std::uint64_t>(out, ckpt.encoder.coords);
            break;
        case rff::EncoderKind::none:
            put<std::uint64_t>(out, ckpt.encoder.coords);
            break;
    }

    put<std::uint64_t>(out, ckpt.time_embedding.pairs);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(ckpt.net.out_act));
    put_layers(out, ckpt.net.layers);

    const auto& tc = ckpt.train_config;
    put<std::uint64_t>(out, tc.iterations);
    put<std::uint64_t>(out, tc.batch_size);
    put<double>(out, tc.lr);
    put<double>(out, tc.sigma_noise);
    put<std::uint64_t>(out, tc.warmup_steps);
    put<std::uint8_t>(out, tc.ema_decay ? 1 : 0);
    put<double>(out, tc.ema_decay.value_or(0.0));
    put<std::uint64_t>(out, tc.seed);

    put<std::uint8_t>(out, ckpt.adam ? 1 : 0);
    if (ckpt.adam) {
        put<double>(out, ckpt.adam->lr);
        put<double>(out, ckpt.adam->beta1);
        put<double>(out, ckpt.adam->beta2);
        put<double>(out, ckpt.adam->eps);
        put<std::uint64_t>(out, ckpt.adam->step);
        put_layers(out, ckpt.adam->m);
        put_layers(out, ckpt.adam->v);
    }
    put<std::uint8_t>(out, ckpt.ema_shadow ? 1 : 0);
    if (ckpt.ema_shadow) {
        put<double>(out, ckpt.ema_decay);
        put_layers(out, *ckpt.ema_shadow);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    get_bytes(in, magic, 4);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw IoError(path + ": not a checkpoint file");
    const auto version = get<std::uint32_t>(in);
    if (version != kVersion)
        throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));

    Checkpoint ckpt;
    const auto kind = static_cast<rff::EncoderKind>(get<std::uint8_t>(in));
    ckpt.encoder.kind = kind;
    switch (kind) {
        case rff::EncoderKind::rff:
        case rff::EncoderKind::rff_region:
            ckpt.encoder.basis.seed = get<std::uint64_t>(in);
            ckpt.encoder.basis.sigma_rff = get<double>(in);
            ckpt.encoder.basis.b = get_matrix(in);
            ckpt.encoder.coords = ckpt.encoder.basis.dim();
            if (kind == rff::EncoderKind::rff_region)
                ckpt.encoder.region_split = get<double>(in);
            break;
        case rff::EncoderKind::posenc:
            ckpt.encoder.octaves = get<std::uint64_t>(in);
            ckpt.encoder.coords = get<std::uint64_t>(in);
            break;
        case rff::EncoderKind::none:
            ckpt.encoder.coords = get<std::uint64_t>(in);
            break;
        default:
            throw IoError(path + ": unknown encoder kind");
    }

    ckpt.time_embedding.pairs = get<std::uint64_t>(in);
    ckpt.net.out_act = static_cast<net::OutputActivation>(get<std::uint8_t>(in));
    ckpt.net.layers = get_layers(in);

    auto& tc = ckpt.train_config;
    tc.iterations = get<std::uint64_t>(in);
    tc.batch_size = get<std::uint64_t>(in);
    tc.lr = get<double>(in);
    tc.sigma_noise = get<double>(in);
    tc.warmup_steps = get<std::uint64_t>(in);
    const bool has_decay = get<std::uint8_t>(in) != 0;
    const double decay = get<double>(in);
    if (has_decay) tc.ema_decay = decay;
    tc.seed = get<std::uint64_t>(in);

    if (get<std::uint8_t>(in) != 0) {
        net::AdamState adam;
        adam.lr = get<double>(in);
        adam.beta1 = get<double>(in);
        adam.beta2 = get<double>(in);
        adam.eps = get<double>(in);
        adam.step = get<std::uint64_t>(in);
        adam.m = get_layers(in);
        adam.v = get_layers(in);
        ckpt.adam = std::move(adam);
    }
    if (get<std::uint8_t>(in) != 0) {
        ckpt.ema_decay = get<double>(in);
        ckpt.ema_shadow = get_layers(in);
    }
    return ckpt;
}

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

void save_ensemble(const pipeline::Ensemble& e, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path);
    put_bytes(out, kEnsembleMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, e.count());
    put<std::uint64_t>(out, e.points());
    put<std::uint64_t>(out, e.channels());
    put<std::uint64_t>(out, e.positions.cols());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.provenance));
    put<std::uint64_t>(out, e.seed);
    put<std::uint64_t>(out, e.joint_block);
    put_bytes(out, e.positions.data(), e.positions.size() * sizeof(double));
    for (const auto& s : e.samples) put_bytes(out, s.data(), s.size() * sizeof(double));
}

pipeline::Ensemble load_ensemble(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    get_bytes(in, magic, 4);
    if (std::memcmp(magic, kEnsembleMagic, 4) != 0)
        throw IoError(path + ": not an ensemble file");
    const auto version = get<std::uint32_t>(in);
    if (version != kVersion)
        throw IoError(path + ": unsupported ensemble version " + std::to_string(version));

    pipeline::Ensemble e;
    const auto s = get<std::uint64_t>(in);
    const auto n = get<std::uint64_t>(in);
    const auto m = get<std::uint64_t>(in);
    const auto d = get<std::uint64_t>(in);
    e.provenance = static_cast<pipeline::Provenance>(get<std::uint8_t>(in));
    e.seed = get<std::uint64_t>(in);
    e.joint_block = get<std::uint64_t>(in);
    e.positions = Matrix(n, d);
    get_bytes(in, e.positions.data(), e.positions.size() * sizeof(double));
    e.samples.assign(s, Matrix(n, m));
    for (auto& sample : e.samples) get_bytes(in, sample.data(), sample.size() * sizeof(double));
    return e;
}

void save_summary_csv(const pipeline::Ensemble& e, const std::string& path) {
    pipeline::Summary summary = pipeline::summarize(e, {});
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path);
    out.precision(17);
    for (std::size_t j = 0; j < e.positions.cols(); ++j) out << (j ? "," : "") << "x" << j;
    for (std::size_t c = 0; c < e.channels(); ++c) out << ",mean" << c;
    for (std::size_t c = 0; c < e.channels(); ++c) out << ",std" << c;
    out << "\n";
    for (std::size_t i = 0; i < e.points(); ++i) {
        for (std::size_t j = 0; j < e.positions.cols(); ++j)
            out << (j ? "," : "") << e.positions(i, j);
        for (std::size_t c = 0; c < e.channels(); ++c) out << "," << summary.mean(i, c);
        for (std::size_t c = 0; c < e.channels(); ++c) out << "," << summary.stdev(i, c);
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::from_string(const std::string& text) {
    Config cfg;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidParam("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw InvalidParam("config line " + std::to_string(lineno) + ": empty key");
        cfg.values_[key] = value;
    }
    return cfg;
}

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw InvalidParam("config: missing key '" + key + "'");
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
    try {
        return std::stod(get_string(key));
    } catch (const InvalidParam&) {
        throw;
    } catch (...) {
        throw InvalidParam("config: key '" + key + "' is not a number");
    }
}

double Config::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

std::int64_t Config::get_int(const std::string& key) const {
    try {
        return std::stoll(get_string(key));
    } catch (const InvalidParam&) {
        throw;
    } catch (...) {
        throw InvalidParam("config: key '" + key + "' is not an integer");
    }
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

void Config::reject_unknown(const std::set<std::string>& known) const {
    for (const auto& [key, value] : values_)
        if (!known.count(key)) throw InvalidParam("config: unknown key '" + key + "'");
}

}  // namespace rpflow::io
