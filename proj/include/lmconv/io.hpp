#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lmconv/engine.hpp"
#include "lmconv/net.hpp"

namespace lmconv {

/// Raised by readers on malformed input (bad magic, truncation, ...).
class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Versioned model snapshot, magic "LMCK". Round-trips bit-exactly.
struct Checkpoint {
    ModelConfig config;
    std::vector<GenerationOrder> orders;  // training order set
    Parameters params;
    std::optional<OptimizerState> optimizer;
    uint64_t step = 0;
    uint64_t seed = 0;
    std::vector<double> loss_tail;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// IDX reader (big-endian header per the MNIST layout). Element type must be
/// unsigned byte; 3-D data comes back as count x 1 x rows x cols, 1-D as
/// count x 1 x 1 x 1.
Tensor4 load_idx(const std::string& path);

/// Binary PGM (P5) / PPM (P6) with maxval up to 255. Images hold raw
/// intensities; save takes one batch element.
void save_pnm(const Tensor4& images, int b, int maxval, const std::string& path);
/// Returns a 1 x C x H x W tensor; maxval_out receives the file's maxval.
Tensor4 load_pnm(const std::string& path, int* maxval_out = nullptr);

/// PBM (P4) bitmaps name the HIDDEN region of a completion task: set bits
/// are hidden, clear bits observed.
void save_pbm_hidden(const ObservedSet& observed, const std::string& path);
ObservedSet load_pbm_hidden(const std::string& path);

/// Sectioned key=value configuration files ("[section]" headers, '#'
/// comments). Keys are addressed as "section.key".
class ConfigFile {
  public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get(const std::string& key) const;  // throws if missing
    std::string get_or(const std::string& key, const std::string& fallback) const;
    long get_int(const std::string& key) const;
    long get_int_or(const std::string& key, long fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    bool get_bool_or(const std::string& key, bool fallback) const;
    std::vector<int> get_int_list(const std::string& key) const;

  private:
    std::map<std::string, std::string> values_;
};

struct DatasetSpec {
    std::string source;  // "synthetic:<name>", "idx:<images-file>", "dir:<path>"
    int height = 0;      // synthetic dims
    int width = 0;
    int count = 0;       // synthetic sample count
    int bits = 8;
    bool binarize = false;  // Bernoulli(v / maxval) using the dataset seed
    double train_fraction = 0.9;
    uint64_t seed = 0;
};

struct Dataset {
    Tensor4 train;  // raw intensities, batch-major
    Tensor4 test;
    int bits = 8;
};

/// Loads, optionally binarizes, shuffles and splits deterministically.
/// Synthetic generators: "stripes" (rows of constant value forming a Markov
/// chain down the image), "bars" (the column transpose), "mix" (each image
/// drawn from one of the two).
Dataset load_dataset(const DatasetSpec& spec);

/// Parses an order name: "raster", "s0".."s7", "hilbert", "hilbert_r", or
/// "file:<path>".
GenerationOrder order_by_name(const std::string& name, int height, int width);

}  // namespace lmconv
