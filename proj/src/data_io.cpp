#include "eoslab/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "eoslab/rng.hpp"

namespace eoslab::data_io {

namespace {

using network::Dataset;
using network::Matrix;

Dataset gaussian_regression(const SyntheticSpec& spec, SplitMix64& rng, bool folded) {
    Dataset out;
    out.inputs = Matrix(spec.n, spec.d);
    out.targets = Matrix(spec.n, 1);
    for (std::size_t s = 0; s < spec.n; ++s) {
        double sum = 0.0;
        for (std::size_t j = 0; j < spec.d; ++j) {
            double v = rng.next_gaussian();
            if (folded) v = std::abs(v);
            out.inputs.at(s, j) = v;
            sum += v;
        }
        out.targets.at(s, 0) = folded ? sum : sum + spec.noise * rng.next_gaussian();
    }
    return out;
}

Dataset sphere_cluster(const SyntheticSpec& spec, SplitMix64& rng) {
    Dataset out;
    out.inputs = Matrix(spec.n, spec.d);
    out.targets = Matrix(spec.n, 2);
    out.targets.at(0, 0) = 1.0;  // the origin, class 0
    for (std::size_t s = 1; s < spec.n; ++s) {
        double norm_sq = 0.0;
        for (std::size_t j = 0; j < spec.d; ++j) {
            const double g = (j == 0 ? spec.mu_norm : 0.0) + rng.next_gaussian();
            out.inputs.at(s, j) = g;
            norm_sq += g * g;
        }
        const double inv = norm_sq > 0.0 ? 1.0 / std::sqrt(norm_sq) : 0.0;
        for (std::size_t j = 0; j < spec.d; ++j) out.inputs.at(s, j) *= inv;
        out.targets.at(s, 1) = 1.0;
    }
    return out;
}

Dataset two_point_toy(const SyntheticSpec& spec, SplitMix64& rng) {
    Dataset out;
    out.inputs = Matrix(2, spec.d);
    out.targets = Matrix(2, 2);
    out.targets.at(0, 0) = 1.0;
    out.targets.at(1, 1) = 1.0;
    double n = 0.0;
    do {
        for (std::size_t j = 0; j < spec.d; ++j) out.inputs.at(1, j) = rng.next_gaussian();
        n = norm2(out.inputs.row(1));
    } while (n < 1e-8);
    for (std::size_t j = 0; j < spec.d; ++j) out.inputs.at(1, j) /= n;
    return out;
}

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw TruncatedFile("idx: " + path + " ends inside the header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

std::vector<unsigned char> read_bytes(std::istream& in, std::size_t n,
                                      const std::string& path) {
    std::vector<unsigned char> buf(n);
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n)))
        throw TruncatedFile("idx: " + path + " is shorter than its header promises");
    return buf;
}

}  // namespace

std::string to_string(SyntheticKind k) {
    switch (k) {
        case SyntheticKind::GaussianRegression: return "gaussian_regression";
        case SyntheticKind::FoldedGaussianRegression: return "folded_gaussian_regression";
        case SyntheticKind::SphereClusterClassification:
            return "sphere_cluster_classification";
        default: return "two_point_toy";
    }
}

SyntheticKind synthetic_kind_from_string(const std::string& s) {
    if (s == "gaussian_regression") return SyntheticKind::GaussianRegression;
    if (s == "folded_gaussian_regression") return SyntheticKind::FoldedGaussianRegression;
    if (s == "sphere_cluster_classification") return SyntheticKind::SphereClusterClassification;
    if (s == "two_point_toy") return SyntheticKind::TwoPointToy;
    throw InvalidArgument("unknown synthetic data kind: " + s);
}

network::Dataset generate(const SyntheticSpec& spec) {
    if (spec.d < 1 || spec.n < 1)
        throw InvalidArgument("generate: need d >= 1 and n >= 1");
    SplitMix64 rng(spec.seed);
    switch (spec.kind) {
        case SyntheticKind::GaussianRegression: return gaussian_regression(spec, rng, false);
        case SyntheticKind::FoldedGaussianRegression:
            return gaussian_regression(spec, rng, true);
        case SyntheticKind::SphereClusterClassification: return sphere_cluster(spec, rng);
        case SyntheticKind::TwoPointToy: return two_point_toy(spec, rng);
    }
    throw InvalidArgument("generate: unknown kind");
}

IdxLoad load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t take_first_n, LabelEncoding encoding) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw Error("idx: cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw Error("idx: cannot open " + labels_path);

    const std::uint32_t img_magic = read_be_u32(img, images_path);
    if (img_magic != 0x00000803u)
        throw BadMagic("idx: " + images_path + " has magic " + std::to_string(img_magic) +
                       ", expected 2051");
    const std::size_t n_img = read_be_u32(img, images_path);
    const std::size_t rows = read_be_u32(img, images_path);
    const std::size_t cols = read_be_u32(img, images_path);

    const std::uint32_t lab_magic = read_be_u32(lab, labels_path);
    if (lab_magic != 0x00000801u)
        throw BadMagic("idx: " + labels_path + " has magic " + std::to_string(lab_magic) +
                       ", expected 2049");
    const std::size_t n_lab = read_be_u32(lab, labels_path);

    if (n_img != n_lab)
        throw CountMismatch("idx: " + std::to_string(n_img) + " images vs " +
                            std::to_string(n_lab) + " labels");

    IdxLoad out;
    out.available = n_img;
    std::size_t take = take_first_n == 0 ? n_img : take_first_n;
    if (take > n_img) {
        take = n_img;
        out.truncated_to_available = true;
    }

    const auto pixels = read_bytes(img, take * rows * cols, images_path);
    const auto labels = read_bytes(lab, take, labels_path);

    out.data.inputs = Matrix(take, rows * cols);
    for (std::size_t i = 0; i < take * rows * cols; ++i)
        out.data.inputs.data[i] = static_cast<double>(pixels[i]) / 255.0;

    if (encoding == LabelEncoding::ClassIndex) {
        out.data.targets = Matrix(take, 1);
        for (std::size_t i = 0; i < take; ++i)
            out.data.targets.at(i, 0) = static_cast<double>(labels[i]);
    } else {
        std::size_t width = 10;
        for (std::size_t i = 0; i < take; ++i)
            width = std::max(width, static_cast<std::size_t>(labels[i]) + 1);
        out.data.targets = Matrix(take, width);
        for (std::size_t i = 0; i < take; ++i)
            out.data.targets.at(i, labels[i]) = 1.0;
    }
    return out;
}

void write_checkpoint(const std::string& path, CheckpointManifest manifest,
                      std::span<const double> theta) {
    manifest.count = theta.size();
    nlohmann::json j;
    j["count"] = manifest.count;
    j["loss"] = manifest.loss;
    j["seed"] = manifest.seed;
    j["spec"] = manifest.spec;
    j["step"] = manifest.step;
    j["version"] = manifest.version;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("checkpoint: cannot open " + path + " for writing");
    out << j.dump() << '\n';
    for (double v : theta) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        unsigned char b[8];
        for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
        out.write(reinterpret_cast<const char*>(b), 8);
    }
    if (!out) throw Error("checkpoint: write to " + path + " failed");
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw CheckpointError("checkpoint: missing manifest line");

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("checkpoint: bad manifest: ") + e.what());
    }

    Checkpoint out;
    out.manifest.version = j.value("version", -1);
    if (out.manifest.version != 1)
        throw CheckpointError("checkpoint: unsupported version " +
                              std::to_string(out.manifest.version));
    out.manifest.spec = j.value("spec", std::string{});
    out.manifest.seed = j.value("seed", std::uint64_t{0});
    out.manifest.step = j.value("step", 0L);
    out.manifest.loss = j.value("loss", 0.0);
    out.manifest.count = j.value("count", std::size_t{0});

    std::vector<char> payload((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
    if (payload.size() != out.manifest.count * 8)
        throw CheckpointError("checkpoint: payload holds " + std::to_string(payload.size()) +
                              " bytes, manifest promises " +
                              std::to_string(out.manifest.count * 8));

    out.theta.resize(out.manifest.count);
    for (std::size_t i = 0; i < out.manifest.count; ++i) {
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k)
            bits |= std::uint64_t(static_cast<unsigned char>(payload[i * 8 + k])) << (8 * k);
        std::memcpy(&out.theta[i], &bits, sizeof bits);
    }
    return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw Error("csv: cannot open " + path + " for writing");
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            out << cells[i];
        }
        out << '\n';
    };
    emit(header);
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw InvalidArgument("csv: row width differs from header");
        emit(row);
    }
    if (!out) throw Error("csv: write to " + path + " failed");
}

std::vector<std::string> csv_row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    return cells;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << content;
    if (!out) throw Error("write to " + path + " failed");
}

namespace {

struct AxisMap {
    double lo = 0.0, hi = 1.0;
    bool log = false;
    double px0 = 0.0, px1 = 1.0;

    double operator()(double v) const {
        const double t = log ? std::log10(v) : v;
        return px0 + (t - lo) / (hi - lo) * (px1 - px0);
    }
};

bool usable(double v, bool log) { return std::isfinite(v) && (!log || v > 0.0); }

}  // namespace

void write_svg_chart(const std::string& path, const std::vector<Series>& series,
                     const ChartOptions& options) {
    const double W = options.width, H = options.height;
    const double ml = 64, mr = 16, mt = 36, mb = 46;

    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
    double ylo = xlo, yhi = -xlo;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], options.log_x) || !usable(s.y[i], options.log_y)) continue;
            const double xv = options.log_x ? std::log10(s.x[i]) : s.x[i];
            const double yv = options.log_y ? std::log10(s.y[i]) : s.y[i];
            xlo = std::min(xlo, xv);
            xhi = std::max(xhi, xv);
            ylo = std::min(ylo, yv);
            yhi = std::max(yhi, yv);
        }
    }
    if (!(xlo <= xhi)) {
        xlo = 0.0;
        xhi = 1.0;
        ylo = 0.0;
        yhi = 1.0;
    }
    auto pad = [](double& lo, double& hi) {
        if (hi - lo < 1e-300) {
            lo -= std::max(1.0, std::abs(lo)) * 0.5;
            hi += std::max(1.0, std::abs(hi)) * 0.5;
        } else {
            const double p = (hi - lo) * 0.05;
            lo -= p;
            hi += p;
        }
    };
    pad(xlo, xhi);
    pad(ylo, yhi);

    const AxisMap X{xlo, xhi, options.log_x, ml, W - mr};
    const AxisMap Y{ylo, yhi, options.log_y, H - mb, mt};  // y grows upward

    static const char* palette[] = {"#1f6fb4", "#c23b3b", "#2f8f4e",
                                    "#8356a8", "#d07f2a", "#5a5a5a"};
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\" "
           "font-family=\"sans-serif\">"
        << options.title << "</text>\n";

    // frame and ticks
    svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr
        << "\" height=\"" << H - mt - mb << "\" fill=\"none\" stroke=\"#444\"/>\n";
    const int ticks = 5;
    for (int t = 0; t <= ticks; ++t) {
        const double fx = xlo + (xhi - xlo) * t / ticks;
        const double fy = ylo + (yhi - ylo) * t / ticks;
        const double px = X(options.log_x ? std::pow(10.0, fx) : fx);
        const double py = Y(options.log_y ? std::pow(10.0, fy) : fy);
        const double xv = options.log_x ? std::pow(10.0, fx) : fx;
        const double yv = options.log_y ? std::pow(10.0, fy) : fy;
        svg << "<line x1=\"" << px << "\" y1=\"" << H - mb << "\" x2=\"" << px << "\" y2=\""
            << H - mb + 4 << "\" stroke=\"#444\"/>\n"
            << "<text x=\"" << px << "\" y=\"" << H - mb + 17
            << "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\">"
            << format_double(std::abs(xv) < 1e-12 ? 0.0 : xv) << "</text>\n"
            << "<line x1=\"" << ml - 4 << "\" y1=\"" << py << "\" x2=\"" << ml << "\" y2=\""
            << py << "\" stroke=\"#444\"/>\n"
            << "<text x=\"" << ml - 7 << "\" y=\"" << py + 3
            << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">"
            << format_double(std::abs(yv) < 1e-12 ? 0.0 : yv) << "</text>\n";
    }
    svg << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 10
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
        << options.x_label << "</text>\n"
        << "<text x=\"14\" y=\"" << (mt + H - mb) / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 14 "
        << (mt + H - mb) / 2 << ")\">" << options.y_label << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = palette[si % 6];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], options.log_x) || !usable(s.y[i], options.log_y)) continue;
            svg << X(s.x[i]) << ',' << Y(s.y[i]) << ' ';
        }
        svg << "\"/>\n";
        const double ly = mt + 14 + 14 * static_cast<double>(si);
        svg << "<line x1=\"" << W - mr - 120 << "\" y1=\"" << ly << "\" x2=\"" << W - mr - 100
            << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
            << "<text x=\"" << W - mr - 95 << "\" y=\"" << ly + 3
            << "\" font-size=\"10\" font-family=\"sans-serif\">" << s.label << "</text>\n";
    }
    svg << "</svg>\n";
    write_text_file(path, svg.str());
}

}  // namespace eoslab::data_io
