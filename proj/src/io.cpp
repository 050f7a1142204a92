#include "lmconv/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace lmconv {

namespace {

// ---- little-endian primitives ----

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
    put_u32(out, static_cast<uint32_t>(v));
    put_u32(out, static_cast<uint32_t>(v >> 32));
}

void put_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t take_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw FormatError(std::string("checkpoint: truncated reading ") + what);
    }
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t take_u64(std::istream& in, const char* what) {
    const uint64_t lo = take_u32(in, what);
    const uint64_t hi = take_u32(in, what);
    return lo | (hi << 32);
}

double take_f64(std::istream& in, const char* what) {
    const uint64_t bits = take_u64(in, what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::string take_string(std::istream& in, const char* what) {
    const uint32_t n = take_u32(in, what);
    std::string s(n, '\0');
    if (n > 0 && !in.read(s.data(), n)) {
        throw FormatError(std::string("checkpoint: truncated reading ") + what);
    }
    return s;
}

void put_f64_array(std::ostream& out, const std::vector<double>& v) {
    put_u64(out, v.size());
    for (double x : v) put_f64(out, x);
}

std::vector<double> take_f64_array(std::istream& in, const char* what) {
    const uint64_t n = take_u64(in, what);
    std::vector<double> v(n);
    for (uint64_t i = 0; i < n; ++i) v[i] = take_f64(in, what);
    return v;
}

constexpr char kCheckpointMagic[4] = {'L', 'M', 'C', 'K'};
constexpr uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open checkpoint for writing: " + path);
    out.write(kCheckpointMagic, 4);
    put_u32(out, kCheckpointVersion);

    const ModelConfig& c = ckpt.config;
    put_u32(out, static_cast<uint32_t>(c.channels));
    put_u32(out, static_cast<uint32_t>(c.height));
    put_u32(out, static_cast<uint32_t>(c.width));
    put_u32(out, static_cast<uint32_t>(c.hidden));
    put_u32(out, static_cast<uint32_t>(c.depth));
    put_u32(out, static_cast<uint32_t>(c.kernel));
    put_u32(out, static_cast<uint32_t>(c.n_mix));
    put_u32(out, static_cast<uint32_t>(c.bits));
    out.put(c.head == HeadKind::Binary ? 0 : 1);
    out.put(c.mask_conditioning ? 1 : 0);
    put_f64(out, c.norm_eps);
    for (int d : c.dilations) put_u32(out, static_cast<uint32_t>(d));

    put_u32(out, static_cast<uint32_t>(ckpt.orders.size()));
    for (const GenerationOrder& o : ckpt.orders) {
        put_u32(out, static_cast<uint32_t>(o.height()));
        put_u32(out, static_cast<uint32_t>(o.width()));
        for (const Coord& cell : o.sequence()) {
            put_u32(out, static_cast<uint32_t>(cell.row));
            put_u32(out, static_cast<uint32_t>(cell.col));
        }
    }

    put_u32(out, static_cast<uint32_t>(ckpt.params.tensors.size()));
    for (const NamedTensor& t : ckpt.params.tensors) {
        put_string(out, t.name);
        put_u32(out, static_cast<uint32_t>(t.dims.size()));
        for (int d : t.dims) put_u32(out, static_cast<uint32_t>(d));
        put_f64_array(out, t.values);
    }

    out.put(ckpt.optimizer.has_value() ? 1 : 0);
    if (ckpt.optimizer.has_value()) {
        const OptimizerState& opt = *ckpt.optimizer;
        put_u64(out, static_cast<uint64_t>(opt.step));
        put_f64(out, opt.beta1);
        put_f64(out, opt.beta2);
        put_f64(out, opt.eps);
        put_u32(out, static_cast<uint32_t>(opt.m.size()));
        for (size_t i = 0; i < opt.m.size(); ++i) {
            put_f64_array(out, opt.m[i]);
            put_f64_array(out, opt.v[i]);
        }
    }

    put_u64(out, ckpt.step);
    put_u64(out, ckpt.seed);
    put_f64_array(out, ckpt.loss_tail);
    if (!out) throw FormatError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw FormatError("checkpoint: bad magic in " + path);
    }
    const uint32_t version = take_u32(in, "version");
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint: refusing version " + std::to_string(version) +
                          " (supported: " + std::to_string(kCheckpointVersion) + ")");
    }

    Checkpoint ckpt;
    ModelConfig& c = ckpt.config;
    c.channels = static_cast<int>(take_u32(in, "channels"));
    c.height = static_cast<int>(take_u32(in, "height"));
    c.width = static_cast<int>(take_u32(in, "width"));
    c.hidden = static_cast<int>(take_u32(in, "hidden"));
    c.depth = static_cast<int>(take_u32(in, "depth"));
    c.kernel = static_cast<int>(take_u32(in, "kernel"));
    c.n_mix = static_cast<int>(take_u32(in, "n_mix"));
    c.bits = static_cast<int>(take_u32(in, "bits"));
    const int head = in.get();
    c.head = head == 0 ? HeadKind::Binary : HeadKind::LogisticMixture;
    c.mask_conditioning = in.get() == 1;
    c.norm_eps = take_f64(in, "norm_eps");
    c.dilations.resize(static_cast<size_t>(c.depth));
    for (int i = 0; i < c.depth; ++i) {
        c.dilations[static_cast<size_t>(i)] = static_cast<int>(take_u32(in, "dilations"));
    }
    c.validate();

    const uint32_t n_orders = take_u32(in, "order count");
    for (uint32_t i = 0; i < n_orders; ++i) {
        const int oh = static_cast<int>(take_u32(in, "order height"));
        const int ow = static_cast<int>(take_u32(in, "order width"));
        std::vector<Coord> seq;
        seq.reserve(static_cast<size_t>(oh) * ow);
        for (long k = 0; k < static_cast<long>(oh) * ow; ++k) {
            Coord cell;
            cell.row = static_cast<int>(take_u32(in, "order cell"));
            cell.col = static_cast<int>(take_u32(in, "order cell"));
            seq.push_back(cell);
        }
        ckpt.orders.emplace_back(oh, ow, std::move(seq));
    }

    const uint32_t n_tensors = take_u32(in, "tensor count");
    for (uint32_t i = 0; i < n_tensors; ++i) {
        NamedTensor t;
        t.name = take_string(in, "tensor name");
        const uint32_t nd = take_u32(in, "tensor rank");
        t.dims.resize(nd);
        size_t expect = 1;
        for (uint32_t k = 0; k < nd; ++k) {
            t.dims[k] = static_cast<int>(take_u32(in, "tensor dim"));
            expect *= static_cast<size_t>(t.dims[k]);
        }
        t.values = take_f64_array(in, t.name.c_str());
        if (t.values.size() != expect) {
            throw FormatError("checkpoint: tensor " + t.name + " has " +
                              std::to_string(t.values.size()) + " values, dims say " +
                              std::to_string(expect));
        }
        ckpt.params.tensors.push_back(std::move(t));
    }

    if (in.get() == 1) {
        OptimizerState opt;
        opt.step = static_cast<int64_t>(take_u64(in, "adam step"));
        opt.beta1 = take_f64(in, "beta1");
        opt.beta2 = take_f64(in, "beta2");
        opt.eps = take_f64(in, "adam eps");
        const uint32_t n = take_u32(in, "moment count");
        for (uint32_t i = 0; i < n; ++i) {
            opt.m.push_back(take_f64_array(in, "adam m"));
            opt.v.push_back(take_f64_array(in, "adam v"));
        }
        ckpt.optimizer = std::move(opt);
    }

    ckpt.step = take_u64(in, "step");
    ckpt.seed = take_u64(in, "seed");
    ckpt.loss_tail = take_f64_array(in, "loss tail");
    return ckpt;
}

// ---- IDX ----

Tensor4 load_idx(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open idx file: " + path);
    unsigned char magic[4];
    if (!in.read(reinterpret_cast<char*>(magic), 4)) {
        throw FormatError("idx: truncated magic in " + path);
    }
    if (magic[0] != 0 || magic[1] != 0) {
        throw FormatError("idx: bad magic (leading bytes nonzero) in " + path);
    }
    if (magic[2] != 0x08) {
        throw FormatError("idx: unsupported element type 0x" + std::to_string(magic[2]) +
                          " (only unsigned byte supported)");
    }
    const int ndims = magic[3];
    if (ndims < 1 || ndims > 3) {
        throw FormatError("idx: unsupported rank " + std::to_string(ndims));
    }
    auto take_be32 = [&in, &path](const char* what) {
        unsigned char b[4];
        if (!in.read(reinterpret_cast<char*>(b), 4)) {
            throw FormatError(std::string("idx: truncated ") + what + " in " + path);
        }
        return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
               (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
    };
    uint32_t dims[3] = {1, 1, 1};
    for (int i = 0; i < ndims; ++i) dims[i] = take_be32("dimension");

    const size_t expect = static_cast<size_t>(dims[0]) * dims[1] * dims[2];
    std::vector<unsigned char> payload(expect);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(expect));
    const size_t got = static_cast<size_t>(in.gcount());
    if (got != expect) {
        throw FormatError("idx: expected " + std::to_string(expect) + " data bytes, got " +
                          std::to_string(got) + " in " + path);
    }

    Tensor4 out(static_cast<int>(dims[0]), 1, static_cast<int>(dims[1]),
                static_cast<int>(dims[2]));
    for (size_t i = 0; i < expect; ++i) out.data()[i] = static_cast<double>(payload[i]);
    return out;
}

// ---- PNM ----

namespace {

int pnm_token(std::istream& in, const std::string& path) {
    // Skips whitespace and '#' comments, reads one nonnegative integer.
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (std::isspace(ch)) {
            ch = in.get();
        } else {
            break;
        }
    }
    if (ch == EOF || !std::isdigit(ch)) throw FormatError("pnm: malformed header in " + path);
    int value = 0;
    while (ch != EOF && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        ch = in.get();
    }
    return value;
}

}  // namespace

void save_pnm(const Tensor4& images, int b, int maxval, const std::string& path) {
    if (maxval < 1 || maxval > 255) throw std::invalid_argument("pnm maxval must be in [1,255]");
    const int ch = images.channels();
    if (ch != 1 && ch != 3) throw std::invalid_argument("pnm supports 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open image for writing: " + path);
    out << (ch == 1 ? "P5" : "P6") << "\n"
        << images.width() << " " << images.height() << "\n"
        << maxval << "\n";
    for (int r = 0; r < images.height(); ++r) {
        for (int c = 0; c < images.width(); ++c) {
            for (int k = 0; k < ch; ++k) {
                const double v = images(b, k, r, c);
                const long q = std::lround(v);
                if (q < 0 || q > maxval) {
                    throw std::invalid_argument("pnm: value " + std::to_string(v) +
                                                " out of [0," + std::to_string(maxval) + "]");
                }
                out.put(static_cast<char>(static_cast<unsigned char>(q)));
            }
        }
    }
    if (!out) throw FormatError("image write failed: " + path);
}

Tensor4 load_pnm(const std::string& path, int* maxval_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open image: " + path);
    char p = 0, kind = 0;
    in.get(p);
    in.get(kind);
    if (p != 'P' || (kind != '5' && kind != '6')) {
        throw FormatError("pnm: expected P5 or P6 in " + path);
    }
    const int channels = kind == '5' ? 1 : 3;
    const int width = pnm_token(in, path);
    const int height = pnm_token(in, path);
    const int maxval = pnm_token(in, path);
    if (maxval < 1 || maxval > 255) throw FormatError("pnm: unsupported maxval in " + path);
    if (maxval_out != nullptr) *maxval_out = maxval;

    const size_t expect = static_cast<size_t>(width) * height * channels;
    std::vector<unsigned char> payload(expect);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(expect));
    if (static_cast<size_t>(in.gcount()) != expect) {
        throw FormatError("pnm: truncated pixel data in " + path);
    }
    Tensor4 out(1, channels, height, width);
    size_t idx = 0;
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            for (int k = 0; k < channels; ++k) {
                out(0, k, r, c) = static_cast<double>(payload[idx++]);
            }
        }
    }
    return out;
}

// ---- PBM hidden-region bitmaps ----

void save_pbm_hidden(const ObservedSet& observed, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open bitmap for writing: " + path);
    out << "P4\n" << observed.width << " " << observed.height << "\n";
    for (int r = 0; r < observed.height; ++r) {
        unsigned char byte = 0;
        int nbits = 0;
        for (int c = 0; c < observed.width; ++c) {
            byte = static_cast<unsigned char>(byte << 1);
            if (!observed.observed(r, c)) byte |= 1;  // set bit = hidden
            if (++nbits == 8) {
                out.put(static_cast<char>(byte));
                byte = 0;
                nbits = 0;
            }
        }
        if (nbits > 0) out.put(static_cast<char>(byte << (8 - nbits)));
    }
    if (!out) throw FormatError("bitmap write failed: " + path);
}

ObservedSet load_pbm_hidden(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open bitmap: " + path);
    char p = 0, kind = 0;
    in.get(p);
    in.get(kind);
    if (p != 'P' || kind != '4') throw FormatError("pbm: expected P4 in " + path);
    const int width = pnm_token(in, path);
    const int height = pnm_token(in, path);
    ObservedSet observed(height, width);
    const int row_bytes = (width + 7) / 8;
    std::vector<unsigned char> row(static_cast<size_t>(row_bytes));
    for (int r = 0; r < height; ++r) {
        if (!in.read(reinterpret_cast<char*>(row.data()), row_bytes)) {
            throw FormatError("pbm: truncated rows in " + path);
        }
        for (int c = 0; c < width; ++c) {
            const bool hidden = (row[static_cast<size_t>(c / 8)] >> (7 - c % 8)) & 1;
            observed.set(r, c, !hidden);
        }
    }
    return observed;
}

// ---- config files ----

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

ConfigFile ConfigFile::parse_string(const std::string& text) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw FormatError("config line " + std::to_string(lineno) + ": unclosed section");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw FormatError("config line " + std::to_string(lineno) + ": empty key");
        }
        cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

bool ConfigFile::has(const std::string& key) const { return values_.count(key) > 0; }

std::string ConfigFile::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw FormatError("config: missing required key '" + key + "'");
    return it->second;
}

std::string ConfigFile::get_or(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

long ConfigFile::get_int(const std::string& key) const {
    try {
        return std::stol(get(key));
    } catch (const std::logic_error&) {
        throw FormatError("config: key '" + key + "' is not an integer");
    }
}

long ConfigFile::get_int_or(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

double ConfigFile::get_double(const std::string& key) const {
    try {
        return std::stod(get(key));
    } catch (const std::logic_error&) {
        throw FormatError("config: key '" + key + "' is not a number");
    }
}

double ConfigFile::get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

bool ConfigFile::get_bool_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw FormatError("config: key '" + key + "' is not a boolean");
}

std::vector<int> ConfigFile::get_int_list(const std::string& key) const {
    std::vector<int> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stoi(item));
        } catch (const std::logic_error&) {
            throw FormatError("config: key '" + key + "' is not a list of integers");
        }
    }
    if (out.empty()) throw FormatError("config: key '" + key + "' is empty");
    return out;
}

// ---- datasets ----

namespace {

Tensor4 synthesize(const std::string& name, const DatasetSpec& spec, std::mt19937_64& rng) {
    if (spec.height < 1 || spec.width < 1 || spec.count < 1) {
        throw std::invalid_argument("synthetic dataset needs positive height/width/count");
    }
    const int maxv = (1 << spec.bits) - 1;
    Tensor4 images(spec.count, 1, spec.height, spec.width);
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution flip(0.1);

    auto stripes_into = [&](int b, bool horizontal) {
        // Lines of constant value; adjacent lines form a Markov chain.
        const int lines = horizontal ? spec.height : spec.width;
        int value = coin(rng) ? maxv : 0;
        for (int i = 0; i < lines; ++i) {
            if (i > 0 && flip(rng)) value = maxv - value;
            if (horizontal) {
                for (int c = 0; c < spec.width; ++c) images(b, 0, i, c) = value;
            } else {
                for (int r = 0; r < spec.height; ++r) images(b, 0, r, i) = value;
            }
        }
    };

    for (int b = 0; b < spec.count; ++b) {
        if (name == "stripes") {
            stripes_into(b, true);
        } else if (name == "bars") {
            stripes_into(b, false);
        } else if (name == "mix") {
            stripes_into(b, coin(rng));
        } else {
            throw std::invalid_argument("unknown synthetic dataset '" + name + "'");
        }
    }
    return images;
}

Tensor4 load_dir_of_pnm(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm") files.push_back(entry.path().string());
    }
    if (files.empty()) throw FormatError("no .pgm/.ppm files in " + dir);
    std::sort(files.begin(), files.end());

    Tensor4 first = load_pnm(files[0]);
    Tensor4 all(static_cast<int>(files.size()), first.channels(), first.height(), first.width());
    for (size_t i = 0; i < files.size(); ++i) {
        const Tensor4 img = load_pnm(files[i]);
        if (img.channels() != first.channels() || img.height() != first.height() ||
            img.width() != first.width()) {
            throw FormatError("image " + files[i] + " has mismatched shape");
        }
        std::copy(img.data(), img.data() + img.size(),
                  all.data() + i * img.size());
    }
    return all;
}

}  // namespace

Dataset load_dataset(const DatasetSpec& spec) {
    if (spec.train_fraction <= 0.0 || spec.train_fraction > 1.0) {
        throw std::invalid_argument("train_fraction must be in (0,1]");
    }
    std::mt19937_64 rng(spec.seed);

    Tensor4 all;
    double source_maxval = 255.0;
    const size_t colon = spec.source.find(':');
    const std::string kind = colon == std::string::npos ? spec.source : spec.source.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.source.substr(colon + 1);
    if (kind == "synthetic") {
        all = synthesize(arg, spec, rng);
        source_maxval = static_cast<double>((1 << spec.bits) - 1);
    } else if (kind == "idx") {
        all = load_idx(arg);
        source_maxval = 255.0;
    } else if (kind == "dir") {
        all = load_dir_of_pnm(arg);
        source_maxval = 255.0;
    } else {
        throw std::invalid_argument("unknown dataset source '" + spec.source + "'");
    }

    // Map source intensities onto the working bit depth.
    const int maxv = (1 << spec.bits) - 1;
    if (spec.binarize) {
        if (spec.bits != 1) throw std::invalid_argument("binarize requires bits=1");
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (size_t i = 0; i < all.size(); ++i) {
            const double p = all.data()[i] / source_maxval;
            all.data()[i] = unit(rng) < p ? 1.0 : 0.0;
        }
    } else if (static_cast<double>(maxv) != source_maxval) {
        for (size_t i = 0; i < all.size(); ++i) {
            all.data()[i] = std::floor(all.data()[i] * (maxv + 1.0) / (source_maxval + 1.0));
        }
    }

    // Deterministic shuffle + split.
    std::vector<int> perm(static_cast<size_t>(all.batch()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const int n_train =
        std::max(1, static_cast<int>(std::lround(spec.train_fraction * all.batch())));
    const int n_test = all.batch() - n_train;

    Dataset out;
    out.bits = spec.bits;
    const size_t image_sz = all.size() / static_cast<size_t>(all.batch());
    out.train = Tensor4(n_train, all.channels(), all.height(), all.width());
    out.test = Tensor4(std::max(n_test, 0), all.channels(), all.height(), all.width());
    for (int i = 0; i < n_train; ++i) {
        std::copy(all.data() + perm[static_cast<size_t>(i)] * image_sz,
                  all.data() + (perm[static_cast<size_t>(i)] + 1) * image_sz,
                  out.train.data() + static_cast<size_t>(i) * image_sz);
    }
    for (int i = 0; i < n_test; ++i) {
        std::copy(all.data() + perm[static_cast<size_t>(n_train + i)] * image_sz,
                  all.data() + (perm[static_cast<size_t>(n_train + i)] + 1) * image_sz,
                  out.test.data() + static_cast<size_t>(i) * image_sz);
    }
    return out;
}

GenerationOrder order_by_name(const std::string& name, int height, int width) {
    if (name == "raster") return raster_order(height, width);
    if (name == "hilbert") return hilbert_order(height, width);
    if (name == "hilbert_r") return reverse(hilbert_order(height, width));
    if (name.size() == 2 && name[0] == 's' && name[1] >= '0' && name[1] <= '7') {
        return s_curve_order(height, width, name[1] - '0');
    }
    if (name.rfind("file:", 0) == 0) {
        GenerationOrder o = load_order(name.substr(5));
        if (o.height() != height || o.width() != width) {
            throw std::invalid_argument("order file grid " + std::to_string(o.height()) + "x" +
                                        std::to_string(o.width()) + " does not match " +
                                        std::to_string(height) + "x" + std::to_string(width));
        }
        return o;
    }
    throw std::invalid_argument("unknown order '" + name + "'");
}

}  // namespace lmconv
