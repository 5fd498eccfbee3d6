#include "rsgan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace rsgan {

namespace {

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto* b = reinterpret_cast<unsigned char*>(&v);
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    }
    return v;
}

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw IoError("cannot write " + path.string());
    }
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u32(std::uint32_t v) {
        v = to_little(v);
        bytes(&v, sizeof v);
    }
    void f64(const double* data, Eigen::Index n) {
        if constexpr (std::endian::native == std::endian::little) {
            bytes(data, static_cast<std::size_t>(n) * sizeof(double));
        } else {
            for (Eigen::Index k = 0; k < n; ++k) {
                double v = to_little(data[k]);
                bytes(&v, sizeof v);
            }
        }
    }
    void finish() {
        out_.flush();
        if (!out_) throw IoError("write failed: " + path_.string());
    }

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

class Reader {
public:
    explicit Reader(std::vector<char> buf) : buf_(std::move(buf)) {}
    void bytes(void* p, std::size_t n) {
        if (buf_.size() - pos_ < n) throw FormatError("checkpoint truncated");
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, sizeof v);
        return to_little(v);
    }
    void f64(double* data, Eigen::Index n) {
        bytes(data, static_cast<std::size_t>(n) * sizeof(double));
        if constexpr (std::endian::native == std::endian::big)
            for (Eigen::Index k = 0; k < n; ++k) data[k] = to_little(data[k]);
    }
    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    std::vector<char> buf_;
    std::size_t pos_ = 0;
};

std::uint32_t dim32(Eigen::Index v) {
    if (v < 0 || v > std::numeric_limits<std::uint32_t>::max()) throw FormatError("dimension out of range");
    return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string Checkpoint::get(const std::string& key, const std::string& fallback) const {
    for (const auto& [k, v] : config)
        if (k == key) return v;
    return fallback;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto& g = ckpt.generator;
    const auto& d = ckpt.discriminator;
    const Eigen::Index m = d.num_users(), n = d.num_items(), dim = d.dim();
    const Eigen::Index h = ckpt.has_generator() ? g.hidden() : 0;
    if (h > 0 && (g.num_users() != m || g.num_items() != n))
        throw FormatError("generator and discriminator disagree on dimensions");

    Writer w(path);
    w.bytes("RSGN", 4);
    w.u32(ckpt.version);
    w.u32(dim32(m));
    w.u32(dim32(n));
    w.u32(dim32(dim));
    w.u32(dim32(h));
    if (h > 0) {
        w.f64(g.w_in.data(), g.w_in.size());
        w.f64(g.b_hidden.data(), g.b_hidden.size());
        w.f64(g.user_node.data(), g.user_node.size());
        w.f64(g.w_out.data(), g.w_out.size());
        w.f64(g.b_out.data(), g.b_out.size());
        w.f64(g.item_scores.data(), g.item_scores.size());
    }
    w.f64(d.user_factors.data(), d.user_factors.size());
    w.f64(d.item_factors.data(), d.item_factors.size());
    w.u32(dim32(static_cast<Eigen::Index>(ckpt.config.size())));
    for (const auto& [k, v] : ckpt.config) {
        const std::string line = k + "=" + v;
        w.u32(dim32(static_cast<Eigen::Index>(line.size())));
        w.bytes(line.data(), line.size());
    }
    w.finish();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "RSGN", 4) != 0) throw FormatError(path.string() + ": not a checkpoint (bad magic)");
    Checkpoint ckpt;
    ckpt.version = r.u32();
    if (ckpt.version != kCheckpointVersion)
        throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(ckpt.version));
    const Eigen::Index m = r.u32(), n = r.u32(), dim = r.u32(), h = r.u32();

    // Refuse sizes the file cannot possibly hold before allocating.
    const double needed = 8.0 * (static_cast<double>(m) * static_cast<double>(dim) +
                                 static_cast<double>(n) * static_cast<double>(dim) +
                                 (h > 0 ? static_cast<double>(m) * (2.0 * h + 1.0 + static_cast<double>(n)) +
                                              static_cast<double>(h) * (1.0 + static_cast<double>(m))
                                        : 0.0));
    if (needed > static_cast<double>(r.remaining())) throw FormatError(path.string() + ": checkpoint truncated");

    auto& g = ckpt.generator;
    if (h > 0) {
        g.w_in.resize(m, h);
        g.b_hidden.resize(h);
        g.user_node.resize(m, h);
        g.w_out.resize(h, m);
        g.b_out.resize(m);
        g.item_scores.resize(m, n);
        r.f64(g.w_in.data(), g.w_in.size());
        r.f64(g.b_hidden.data(), g.b_hidden.size());
        r.f64(g.user_node.data(), g.user_node.size());
        r.f64(g.w_out.data(), g.w_out.size());
        r.f64(g.b_out.data(), g.b_out.size());
        r.f64(g.item_scores.data(), g.item_scores.size());
    }
    auto& d = ckpt.discriminator;
    d.user_factors.resize(m, dim);
    d.item_factors.resize(n, dim);
    r.f64(d.user_factors.data(), d.user_factors.size());
    r.f64(d.item_factors.data(), d.item_factors.size());

    const std::uint32_t lines = r.u32();
    for (std::uint32_t k = 0; k < lines; ++k) {
        const std::uint32_t len = r.u32();
        if (len > r.remaining()) throw FormatError(path.string() + ": checkpoint truncated");
        std::string line(len, '\0');
        r.bytes(line.data(), len);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError(path.string() + ": malformed config line '" + line + "'");
        ckpt.config.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    if (r.remaining() != 0) throw FormatError(path.string() + ": trailing bytes after checkpoint");

    try {
        d.lambda = std::stod(ckpt.get("lambda", "0.001"));
        g.temperature = std::stod(ckpt.get("tau", "0.2"));
        g.corruption = std::stod(ckpt.get("corrupt", "0.2"));
    } catch (const std::exception&) {
        throw FormatError(path.string() + ": bad numeric config value");
    }
    return ckpt;
}

}  // namespace rsgan
