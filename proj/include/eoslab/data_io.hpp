#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eoslab/common.hpp"
#include "eoslab/network.hpp"

namespace eoslab::data_io {

enum class SyntheticKind {
    GaussianRegression,        // x ~ N(0,I), y = <1,x> + noise * N(0,1)
    FoldedGaussianRegression,  // x = |N(0,I)|, y = <1,x> exactly
    SphereClusterClassification,  // origin vs normalized Gaussian cluster
    TwoPointToy,                  // origin and one random unit vector
};

std::string to_string(SyntheticKind k);
SyntheticKind synthetic_kind_from_string(const std::string& s);

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::GaussianRegression;
    std::size_t d = 2;
    std::size_t n = 1;
    double noise = 1.0;    // label noise scale, regression kinds only
    double mu_norm = 1.0;  // cluster center distance, sphere kind only
    std::uint64_t seed = 0;
};

// Deterministic per spec (seed included). Classification kinds emit two-column
// one-hot targets; the first sample of the sphere cluster is the origin with
// class 0 and the rest are the normalized Gaussian cluster with class 1.
// TwoPointToy ignores n and always emits its two samples.
network::Dataset generate(const SyntheticSpec& spec);

class BadMagic : public Error {
public:
    explicit BadMagic(const std::string& what) : Error(what) {}
};
class TruncatedFile : public Error {
public:
    explicit TruncatedFile(const std::string& what) : Error(what) {}
};
class CountMismatch : public Error {
public:
    explicit CountMismatch(const std::string& what) : Error(what) {}
};

enum class LabelEncoding {
    OneHot,      // width max(10, max label + 1), for losses that need vectors
    ClassIndex,  // single column holding the class id
};

struct IdxLoad {
    network::Dataset data;
    std::size_t available = 0;  // record count in the files
    bool truncated_to_available = false;  // take_first_n exceeded the files
};

// Big-endian IDX pair: images with magic 0x00000803 and 3 dimension fields,
// labels with magic 0x00000801 and 1. Pixels are scaled to [0,1] by /255.
// take_first_n = 0 loads everything; a larger request clamps with the
// warning flag set.
IdxLoad load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t take_first_n, LabelEncoding encoding);

class CheckpointError : public Error {
public:
    explicit CheckpointError(const std::string& what) : Error(what) {}
};

struct CheckpointManifest {
    int version = 1;
    std::string spec;  // model description the parameters belong to
    std::uint64_t seed = 0;
    long step = 0;
    double loss = 0.0;
    std::size_t count = 0;  // parameter count, set on write
};

struct Checkpoint {
    CheckpointManifest manifest;
    ParamVector theta;
};

// One JSON manifest line followed by the raw little-endian 64-bit reals.
// Round-trips are bit-exact. Reading rejects unknown versions and any payload
// whose byte length disagrees with the manifest count.
void write_checkpoint(const std::string& path, CheckpointManifest manifest,
                      std::span<const double> theta);
Checkpoint read_checkpoint(const std::string& path);

// comma-separated table; cells must not contain commas or newlines
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// shortest round-trip formatting for a numeric row
std::vector<std::string> csv_row(const std::vector<double>& values);

// pretty-printed JSON with alphabetical keys; takes the serialized text so
// this header stays light (callers dump with nlohmann::json)
void write_text_file(const std::string& path, const std::string& content);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct ChartOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    int width = 720;
    int height = 440;
};

// Minimal self-contained SVG line chart: axes, ticks, one polyline per
// series, legend. Non-finite points (and non-positive ones on log axes) are
// dropped per series.
void write_svg_chart(const std::string& path, const std::vector<Series>& series,
                     const ChartOptions& options);

}  // namespace eoslab::data_io
